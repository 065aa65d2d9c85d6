//! Measures, functions, and total-variation neighborhoods on a finite color
//! alphabet `X = {1, ..., r}`.
//!
//! A measure is a nonnegative weight vector `m = (m(1), ..., m(r))`; a
//! function is an arbitrary finite real vector. The pairing between them is
//! the integral
//!
//! ```text
//! m[f] = sum_i m(i) f(i)
//! ```
//!
//! which is bilinear and positive (`m[f] >= 0` whenever `f >= 0`). Every
//! nonzero measure factors uniquely as `m = c * p` with `c = m[1]` its total
//! mass and `p` a probability vector.
//!
//! Neighborhoods of probability vectors are total-variation balls,
//!
//! ```text
//! TV(p, q) = (1/2) sum_i |p(i) - q(i)|,
//! ```
//!
//! which are convex and, on a finite alphabet, generate the same topology as
//! any other norm ball. Convexity matters downstream: block selections and
//! almost-sure counting arguments average spectra inside a neighborhood and
//! need the average to stay inside.
//!
//! Indexing is zero-based throughout; color `i` of the mathematical alphabet
//! is entry `i - 1` of the vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for exact arithmetic identities (normalization residues,
/// closed-form comparisons).
pub const TOL_EXACT: f64 = 1e-12;

/// Tolerance for quantities assembled from floating accumulation over many
/// terms, e.g. empirical spectra of Monte Carlo lines.
pub const TOL_EMPIRICAL: f64 = 1e-9;

/// Weights below this threshold are treated as exact zeros when deciding
/// support membership, so that `0 * ln 0 = 0` conventions are applied
/// consistently.
pub const ZERO_WEIGHT: f64 = 1e-300;

/// A finite alphabet of `r >= 1` colors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorAlphabet {
    size: usize,
}

impl ColorAlphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::EmptyAlphabet);
        }
        Ok(ColorAlphabet { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Iterator over the color indices `0..r`.
    pub fn colors(&self) -> impl Iterator<Item = usize> {
        0..self.size
    }
}

/// A nonnegative measure on the alphabet, stored densely.
///
/// Entries are validated to be finite and `>= 0` at construction, so a
/// `MeasureVec` can never hold a negative weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureVec {
    weights: Vec<f64>,
}

impl MeasureVec {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if value < 0.0 {
                return Err(Error::NegativeEntry { index, value });
            }
        }
        Ok(MeasureVec { weights })
    }

    /// The uniform probability vector `(1/r, ..., 1/r)`.
    pub fn uniform(r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::EmptyAlphabet);
        }
        Ok(MeasureVec {
            weights: vec![1.0 / r as f64; r],
        })
    }

    /// The counting measure `(1, ..., 1)`; integrating against it sums a
    /// function over the alphabet.
    pub fn unit(r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::EmptyAlphabet);
        }
        Ok(MeasureVec {
            weights: vec![1.0; r],
        })
    }

    /// Point mass at color `i`.
    pub fn point_mass(r: usize, i: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::EmptyAlphabet);
        }
        if i >= r {
            return Err(Error::DimensionMismatch {
                expected: r,
                actual: i,
            });
        }
        let mut weights = vec![0.0; r];
        weights[i] = 1.0;
        Ok(MeasureVec { weights })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total mass `m[1]`.
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// True when the total mass equals 1 within [`TOL_EXACT`].
    pub fn is_probability(&self) -> bool {
        self.is_probability_within(TOL_EXACT)
    }

    pub fn is_probability_within(&self, tol: f64) -> bool {
        (self.total_mass() - 1.0).abs() <= tol
    }

    /// True when color `i` carries weight, i.e. `m(i) > 0` beyond the
    /// [`ZERO_WEIGHT`] threshold.
    pub fn charges(&self, i: usize) -> bool {
        self.weights[i] > ZERO_WEIGHT
    }

    /// Total variation distance `(1/2) sum_i |m(i) - other(i)|`.
    pub fn tv_distance(&self, other: &MeasureVec) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        let l1: f64 = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum();
        Ok(0.5 * l1)
    }
}

/// A real-valued function on the alphabet (an arbitrary finite vector).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuncVec {
    values: Vec<f64>,
}

impl FuncVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index });
            }
        }
        Ok(FuncVec { values })
    }

    /// The constant function `t`.
    pub fn constant(r: usize, t: f64) -> Result<Self> {
        if r == 0 {
            return Err(Error::EmptyAlphabet);
        }
        if !t.is_finite() {
            return Err(Error::NonFinite { index: 0 });
        }
        Ok(FuncVec { values: vec![t; r] })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Integral `m[f] = sum_i m(i) f(i)`.
pub fn integrate(m: &MeasureVec, f: &FuncVec) -> Result<f64> {
    check_dims(m.dim(), f.dim())?;
    Ok(m.weights().iter().zip(f.values()).map(|(w, v)| w * v).sum())
}

/// Factor a nonzero measure as `m = c * p` with `p` a probability vector and
/// `c = m[1]` the total mass.
pub fn normalize(m: &MeasureVec) -> Result<(MeasureVec, f64)> {
    let c = m.total_mass();
    if c <= ZERO_WEIGHT {
        return Err(Error::ZeroMass);
    }
    let p = MeasureVec::new(m.weights().iter().map(|w| w / c).collect())?;
    Ok((p, c))
}

/// An open total-variation ball around a probability vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TVNeighborhood {
    center: MeasureVec,
    radius: f64,
}

impl TVNeighborhood {
    /// The center must be a probability vector (within [`TOL_EMPIRICAL`],
    /// so empirically assembled centers qualify); the radius must be
    /// positive.
    pub fn new(center: MeasureVec, radius: f64) -> Result<Self> {
        if !center.is_probability_within(TOL_EMPIRICAL) {
            return Err(Error::NotProbability {
                sum: center.total_mass(),
            });
        }
        if radius.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::NonPositiveRadius { radius });
        }
        Ok(TVNeighborhood { center, radius })
    }

    pub fn center(&self) -> &MeasureVec {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Strict membership: `TV(delta, center) < radius`.
    ///
    /// `delta` is expected to be a probability vector of the same dimension;
    /// a dimension mismatch is a programming error and panics.
    pub fn contains(&self, delta: &MeasureVec) -> bool {
        let tv = self
            .center
            .tv_distance(delta)
            .expect("neighborhood membership requires matching dimensions");
        tv < self.radius
    }
}

fn check_dims(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}
