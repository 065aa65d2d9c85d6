//! Exact and Monte Carlo line counting at large-deviation scale.
//!
//! For a base measure `mu` on `r` colors, the `mu^n`-mass of the words
//! whose spectrum falls in a total-variation ball `O` around `nu` is
//!
//! ```text
//! mass_n(O) = sum_{|c| = n, c/n in O}  multinomial(n; c) * prod_i mu(i)^{c_i},
//! ```
//!
//! and `(1/n) ln mass_n(O)` converges to `-inf_{s in O} rho(s, mu)`; when
//! the ball shrinks onto `nu` the limit is `-rho(nu, mu)`. With `mu` the
//! counting measure the mass is the number of words, so the same sums
//! quantify entropy-scale word counts.
//!
//! The exact routines enumerate color-count keys: the binomial recurrence
//! covers `r = 2` up to `n = 10000`, a factorial table covers `r <= 4` up
//! to `n = 40`, and anything larger is refused with a numeric guard (the
//! Monte Carlo path below has no such limit). All masses are handled in
//! log scale; multinomial coefficients are exact big integers and only
//! their logarithms enter the floating-point accumulation.
//!
//! [`colored_mcmillan_experiment`] is the stochastic counterpart: it grows
//! a colored branching process and counts realized lines with spectrum in
//! the ball, trial by trial, against the predicted decay rate
//! `-rho(nu, mu)` with `mu` the color expectation of the structure law.

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alphabet::{MeasureVec, TVNeighborhood};
use crate::branching::{
    count_lines_in_neighborhood, evolve_histograms, ColorStructureLaw, StepMeta, StepOptions,
};
use crate::error::{Error, Result};
use crate::galton_watson::extinction_probability;
use crate::rate::kullback_action;
use crate::rng::stream_rng;

/// Exact enumeration bound for two colors.
pub const EXACT_N_TWO_COLORS: usize = 10_000;

/// Exact enumeration bounds for three or four colors.
pub const EXACT_N_SMALL_R: usize = 40;
pub const EXACT_R_MAX: usize = 4;

/// One row of a rate table: the exact log-mass at depth `n` against the
/// Kullback prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub n: usize,
    /// `ln mass_n(O)`.
    pub log_mass: f64,
    /// `(1/n) ln mass_n(O)`.
    pub log_rate: f64,
    /// `-rho(center, mu)`.
    pub predicted: f64,
    /// `log_rate - predicted`.
    pub gap: f64,
}

/// Natural logarithm of a nonnegative big integer, exact to one ulp of the
/// 64-bit mantissa: `x = m * 2^e` with `m` the top 64 bits.
pub(crate) fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 64 {
        let digits = x.to_u64_digits();
        return (digits[0] as f64).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64_digits()[0];
    (top as f64).ln() + shift as f64 * std::f64::consts::LN_2
}

/// Numerically stable `ln sum_i e^{t_i}`; empty input and all `-inf` give
/// `-inf`.
pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms
        .iter()
        .copied()
        .filter(|t| t.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = terms
        .iter()
        .filter(|t| t.is_finite())
        .map(|&t| (t - max).exp())
        .sum();
    max + sum.ln()
}

/// Visit every color-count key `c` with `|c| = n` over `r` colors together
/// with `ln multinomial(n; c)`.
fn for_each_key_with_ln_multinomial<F: FnMut(&[u64], f64)>(
    r: usize,
    n: usize,
    mut f: F,
) -> Result<()> {
    if r == 2 && n <= EXACT_N_TWO_COLORS {
        // Binomial recurrence C(n, k+1) = C(n, k) (n-k)/(k+1), exact in big
        // integers.
        let n64 = n as u64;
        let mut coef = BigUint::from(1u32);
        for k in 0..=n64 {
            if k > 0 {
                coef *= n64 - k + 1;
                coef /= k;
            }
            f(&[k, n64 - k], ln_biguint(&coef));
        }
        return Ok(());
    }
    if (3..=EXACT_R_MAX).contains(&r) && n <= EXACT_N_SMALL_R {
        let n64 = n as u64;
        let mut factorials = Vec::with_capacity(n + 1);
        factorials.push(BigUint::from(1u32));
        for k in 1..=n64 {
            let next = factorials.last().unwrap() * k;
            factorials.push(next);
        }
        let mut key = vec![0u64; r];
        visit_compositions(n64, 0, &mut key, &mut |key: &[u64]| {
            let mut denom = BigUint::from(1u32);
            for &c in key {
                denom *= &factorials[c as usize];
            }
            let coef = &factorials[n] / denom;
            f(key, ln_biguint(&coef));
        });
        return Ok(());
    }
    Err(Error::CombinatorialBlowup { r, n })
}

fn visit_compositions<F: FnMut(&[u64])>(rest: u64, slot: usize, key: &mut Vec<u64>, f: &mut F) {
    if slot == key.len() - 1 {
        key[slot] = rest;
        f(key);
        return;
    }
    for c in 0..=rest {
        key[slot] = c;
        visit_compositions(rest - c, slot + 1, key, f);
    }
}

/// Exact `ln` of the `mu^n`-mass of words with spectrum in the ball.
///
/// `mu` need not be a probability vector. Keys that charge a color of zero
/// `mu`-weight carry zero mass and are skipped; an empty intersection
/// yields `-inf`.
pub fn ldp_log_mass_exact(mu: &MeasureVec, nbhd: &TVNeighborhood, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::ZeroDepth);
    }
    let r = mu.dim();
    if nbhd.center().dim() != r {
        return Err(Error::DimensionMismatch {
            expected: r,
            actual: nbhd.center().dim(),
        });
    }
    let log_mu: Vec<f64> = mu.weights().iter().map(|&w| w.ln()).collect();
    let mut terms: Vec<f64> = Vec::new();
    let mut bad_key = None;
    for_each_key_with_ln_multinomial(r, n, |key, ln_coef| {
        let spectrum = match crate::branching::spectrum_of_key(key, n) {
            Ok(s) => s,
            Err(e) => {
                bad_key = Some(e);
                return;
            }
        };
        if !nbhd.contains(&spectrum) {
            return;
        }
        let mut log_weight = ln_coef;
        for (i, &c) in key.iter().enumerate() {
            if c == 0 {
                continue;
            }
            if !mu.charges(i) {
                return;
            }
            log_weight += c as f64 * log_mu[i];
        }
        terms.push(log_weight);
    })?;
    if let Some(e) = bad_key {
        return Err(e);
    }
    Ok(log_sum_exp(&terms))
}

/// Exact number of length-`n` words whose spectrum lies in the ball
/// (the `mu^n`-mass under the counting measure).
pub fn mcmillan_count_exact(r: usize, nbhd: &TVNeighborhood, n: usize) -> Result<BigUint> {
    if n == 0 {
        return Err(Error::ZeroDepth);
    }
    if nbhd.center().dim() != r {
        return Err(Error::DimensionMismatch {
            expected: r,
            actual: nbhd.center().dim(),
        });
    }
    // Recompute the coefficient exactly rather than exponentiate its log:
    // the count must be an exact integer.
    let n64 = n as u64;
    if r == 2 && n <= EXACT_N_TWO_COLORS {
        let mut total = BigUint::from(0u32);
        let mut coef = BigUint::from(1u32);
        for k in 0..=n64 {
            if k > 0 {
                coef *= n64 - k + 1;
                coef /= k;
            }
            let spectrum = crate::branching::spectrum_of_key(&[k, n64 - k], n)?;
            if nbhd.contains(&spectrum) {
                total += &coef;
            }
        }
        return Ok(total);
    }
    if (3..=EXACT_R_MAX).contains(&r) && n <= EXACT_N_SMALL_R {
        let mut factorials = Vec::with_capacity(n + 1);
        factorials.push(BigUint::from(1u32));
        for k in 1..=n64 {
            let next = factorials.last().unwrap() * k;
            factorials.push(next);
        }
        let mut total = BigUint::from(0u32);
        let mut key = vec![0u64; r];
        let mut bad_key = None;
        visit_compositions(n64, 0, &mut key, &mut |key: &[u64]| {
            let spectrum = match crate::branching::spectrum_of_key(key, n) {
                Ok(s) => s,
                Err(e) => {
                    bad_key = Some(e);
                    return;
                }
            };
            if !nbhd.contains(&spectrum) {
                return;
            }
            let mut denom = BigUint::from(1u32);
            for &c in key {
                denom *= &factorials[c as usize];
            }
            total += &factorials[n] / denom;
        });
        if let Some(e) = bad_key {
            return Err(e);
        }
        return Ok(total);
    }
    Err(Error::CombinatorialBlowup { r, n })
}

/// Exact rate estimates for each requested depth.
pub fn rate_table(
    mu: &MeasureVec,
    nbhd: &TVNeighborhood,
    ns: &[usize],
) -> Result<Vec<RateEstimate>> {
    let rho = kullback_action(nbhd.center(), mu)?;
    let predicted = -rho;
    ns.iter()
        .map(|&n| {
            let log_mass = ldp_log_mass_exact(mu, nbhd, n)?;
            let log_rate = log_mass / n as f64;
            Ok(RateEstimate {
                n,
                log_mass,
                log_rate,
                predicted,
                gap: log_rate - predicted,
            })
        })
        .collect()
}

/// The certified deviation of one ball radius: how far the finite-depth
/// rates still sit from the Kullback prediction once they have settled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonCertificate {
    pub radius: f64,
    /// Largest depth entering the certificate.
    pub n_max: usize,
    /// `max |log_rate - predicted|` over the settled (upper) half of the
    /// sampled depths.
    pub epsilon: f64,
    /// First sampled depth from which every later sampled gap stays within
    /// `epsilon`.
    pub settle_n: usize,
}

/// Certify, per radius, the asymptotic gap between exact rates and the
/// Kullback prediction. Larger balls keep a positive residual gap
/// (`inf rho` over the ball undercuts `rho` at the center); shrinking the
/// radius drives the certificate toward zero.
pub fn epsilon_certificates(
    mu: &MeasureVec,
    center: &MeasureVec,
    radii: &[f64],
    ns: &[usize],
) -> Result<Vec<EpsilonCertificate>> {
    if ns.is_empty() {
        return Err(Error::ZeroDepth);
    }
    let mut out = Vec::with_capacity(radii.len());
    for &radius in radii {
        let nbhd = TVNeighborhood::new(center.clone(), radius)?;
        let table = rate_table(mu, &nbhd, ns)?;
        let half = table.len() / 2;
        let epsilon = table[half..]
            .iter()
            .map(|row| row.gap.abs())
            .fold(0.0f64, f64::max);
        let settle_n = table
            .iter()
            .position(|row| {
                table
                    .iter()
                    .filter(|later| later.n >= row.n)
                    .all(|later| later.gap.abs() <= epsilon)
            })
            .map(|idx| table[idx].n)
            .unwrap_or(table[table.len() - 1].n);
        out.push(EpsilonCertificate {
            radius,
            n_max: table[table.len() - 1].n,
            epsilon,
            settle_n,
        });
    }
    Ok(out)
}

/// One trial of the colored Monte Carlo experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColoredTrialRow {
    pub trial: u64,
    /// Whether the process was still alive at the target depth.
    pub survived: bool,
    /// Total number of depth-`n` lines.
    pub population: u128,
    /// Lines whose spectrum fell inside the ball.
    pub in_ball: u128,
    /// `(1/n) ln in_ball`; `-inf` when no line hit the ball.
    pub log_rate: f64,
    /// `log_rate - predicted`.
    pub gap: f64,
}

/// Aggregates of a colored Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColoredSummary {
    pub trials: u64,
    pub depth: usize,
    pub radius: f64,
    /// Trials alive at the target depth.
    pub survivors: u64,
    pub survival_frequency: f64,
    /// `1 - q*` for the total offspring law.
    pub predicted_survival: f64,
    /// `-rho(center, mu)` with `mu` the color expectation.
    pub predicted_rate: f64,
    /// Median of `log_rate` over trials that put at least one line in the
    /// ball; absent if none did.
    pub median_log_rate: Option<f64>,
    /// `median_log_rate - predicted_rate`.
    pub median_gap: Option<f64>,
    /// Sampling regime counts accumulated over every step of every trial.
    pub meta: StepMeta,
}

/// Grow `trials` independent colored branching processes to depth `n` and
/// count, per trial, the lines with spectrum in the ball around `nu`.
///
/// Trial `t` draws from the stream `(phase 0, trial t)` of `master_seed`,
/// so results are independent of execution order and thread count.
pub fn colored_mcmillan_experiment(
    law: &ColorStructureLaw,
    nbhd: &TVNeighborhood,
    n: usize,
    trials: u64,
    master_seed: u64,
) -> Result<(Vec<ColoredTrialRow>, ColoredSummary)> {
    if n == 0 {
        return Err(Error::ZeroDepth);
    }
    let mu = law.color_expectation();
    let rho = kullback_action(nbhd.center(), mu.as_measure())?;
    let predicted = -rho;
    let opts = StepOptions::default();

    let rows: Vec<(ColoredTrialRow, StepMeta)> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<(ColoredTrialRow, StepMeta)> {
            let mut rng = stream_rng(master_seed, 0, trial);
            let evo = evolve_histograms(law, n, &mut rng, &opts)?;
            let last = evo.last();
            let population = last.total();
            let in_ball = count_lines_in_neighborhood(last, nbhd)?;
            let log_rate = if in_ball == 0 {
                f64::NEG_INFINITY
            } else {
                (in_ball as f64).ln() / n as f64
            };
            Ok((
                ColoredTrialRow {
                    trial,
                    survived: population > 0,
                    population,
                    in_ball,
                    log_rate,
                    gap: log_rate - predicted,
                },
                evo.meta,
            ))
        })
        .collect::<Result<_>>()?;

    let mut meta = StepMeta::default();
    let mut trial_rows = Vec::with_capacity(rows.len());
    for (row, m) in rows {
        meta.absorb(&m);
        trial_rows.push(row);
    }

    let survivors = trial_rows.iter().filter(|r| r.survived).count() as u64;
    let mut hitting_rates: Vec<f64> = trial_rows
        .iter()
        .filter(|r| r.in_ball > 0)
        .map(|r| r.log_rate)
        .collect();
    let median_log_rate = median(&mut hitting_rates);
    let q = extinction_probability(&law.total_offspring_law()).probability;

    let summary = ColoredSummary {
        trials,
        depth: n,
        radius: nbhd.radius(),
        survivors,
        survival_frequency: survivors as f64 / trials as f64,
        predicted_survival: 1.0 - q,
        predicted_rate: predicted,
        median_log_rate,
        median_gap: median_log_rate.map(|m| m - predicted),
        meta,
    };
    Ok((trial_rows, summary))
}

/// Median of an unordered sample; `None` when empty.
fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("rates are never NaN"));
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    })
}
