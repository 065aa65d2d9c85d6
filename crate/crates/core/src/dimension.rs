//! Hausdorff-type dimensions on color sequence space.
//!
//! A contraction vector `theta` with every `theta(i)` strictly inside
//! `(0, 1)` metrizes the space of infinite color sequences: the cylinder of
//! a prefix `x_1 ... x_n` has diameter `theta(x_1) * ... * theta(x_n)`, and
//! the distance between two sequences is the diameter of their longest
//! common cylinder, an ultrametric.
//!
//! Dimensions computed here:
//!
//! * **Billingsley entropy** of a probability vector `nu`,
//!   `S(nu, theta) = sum nu ln nu / sum nu ln theta`: the local dimension
//!   of the iid(`nu`) measure at `nu`-typical sequences.
//! * **Billingsley-Kullback entropy** against a base measure `mu`,
//!   `d(nu, mu, theta) = rho(nu, mu) / sum_i nu(i) ln theta(i)`: the
//!   dimension of the set of lines with spectrum near `nu` inside a random
//!   tree with color expectation `mu`. It never exceeds the Bowen root and
//!   touches it at `nu(i) = mu(i) theta(i)^s`.
//! * **Moran root** of a color subset: the `s` with
//!   `sum_{i in subset} theta(i)^s = 1`, the dimension of the full shift
//!   on those colors.
//! * **Bowen root** of a base measure: the `s` with
//!   `sum_i mu(i) theta(i)^s = 1`; it may be negative when `mu` has mass
//!   below one, signaling an almost surely finite population.
//! * **Pointwise (local) dimension** along one sampled line: the partial
//!   sum ratio `sum ln nu(x_t) / sum ln theta(x_t)`.
//! * **Covering root** of a generation histogram: the `s` with
//!   `sum_c count(c) diam(c)^s = 1`, a natural-cover box dimension at one
//!   depth, evaluated in log scale.

use serde::{Deserialize, Serialize};

use crate::alphabet::MeasureVec;
use crate::branching::GenerationHistogram;
use crate::error::{Error, Result};
use crate::mcmillan::log_sum_exp;
use crate::rate::kullback_action;

/// Bisection tolerance for Moran and Bowen roots.
pub const ROOT_TOL: f64 = 1e-12;

/// Bisection tolerance for covering roots of sampled histograms.
pub const COVERING_TOL: f64 = 1e-10;

/// A metric on sequence space given by per-color contraction ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaMetric {
    theta: MeasureVec,
}

impl ThetaMetric {
    /// Every ratio must lie strictly inside `(0, 1)`.
    pub fn new(theta: MeasureVec) -> Result<Self> {
        for (index, &value) in theta.weights().iter().enumerate() {
            if value <= 0.0 || value >= 1.0 {
                return Err(Error::ThetaOutOfRange { index, value });
            }
        }
        Ok(ThetaMetric { theta })
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }

    pub fn contraction(&self, i: usize) -> f64 {
        self.theta.weight(i)
    }

    pub fn as_measure(&self) -> &MeasureVec {
        &self.theta
    }

    /// Diameter of the cylinder of a color prefix; the empty prefix is the
    /// whole space, of diameter 1.
    pub fn cylinder_diameter(&self, prefix: &[usize]) -> Result<f64> {
        let mut diam = 1.0f64;
        for &color in prefix {
            if color >= self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    actual: color,
                });
            }
            diam *= self.contraction(color);
        }
        Ok(diam)
    }

    /// Ultrametric distance between two finite words: the diameter of
    /// their longest common prefix cylinder (1 if they differ at once,
    /// 0 only for identical infinite continuations, so equal words get
    /// their own cylinder diameter).
    pub fn distance(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        let lcp = a.iter().zip(b.iter()).take_while(|(x, y)| x == y).count();
        self.cylinder_diameter(&a[..lcp])
    }
}

/// `sum_i nu(i) ln theta(i)`, the mean log contraction; always negative
/// for a probability `nu`.
fn mean_log_contraction(nu: &MeasureVec, theta: &ThetaMetric) -> Result<f64> {
    if nu.dim() != theta.dim() {
        return Err(Error::DimensionMismatch {
            expected: theta.dim(),
            actual: nu.dim(),
        });
    }
    if !nu.is_probability() {
        return Err(Error::NotProbability {
            sum: nu.total_mass(),
        });
    }
    Ok(nu
        .weights()
        .iter()
        .zip(theta.as_measure().weights())
        .map(|(&p, &t)| p * t.ln())
        .sum())
}

/// Billingsley entropy `S(nu, theta) = sum nu ln nu / sum nu ln theta`.
pub fn billingsley_entropy(nu: &MeasureVec, theta: &ThetaMetric) -> Result<f64> {
    let denom = mean_log_contraction(nu, theta)?;
    let numer: f64 = nu
        .weights()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum();
    Ok(numer / denom)
}

/// Billingsley-Kullback entropy
/// `d(nu, mu, theta) = rho(nu, mu) / sum nu ln theta`.
///
/// When `nu` escapes the support of `mu` the action is infinite and the
/// entropy is `-inf`: no line of the `mu`-tree ever tracks such a spectrum.
pub fn billingsley_kullback_entropy(
    nu: &MeasureVec,
    mu: &MeasureVec,
    theta: &ThetaMetric,
) -> Result<f64> {
    let denom = mean_log_contraction(nu, theta)?;
    let rho = kullback_action(nu, mu)?;
    if rho == f64::INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(rho / denom)
}

/// Root of a strictly decreasing function with `g(lo) >= 0 >= g(hi)`.
fn bisect_decreasing<G: Fn(f64) -> f64>(g: G, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    debug_assert!(g(lo) >= 0.0 && g(hi) <= 0.0, "root must be bracketed");
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Moran root of a color subset: the `s >= 0` with
/// `sum_{i in subset} theta(i)^s = 1`.
pub fn moran_root(theta: &ThetaMetric, subset: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    for &i in subset {
        if i >= theta.dim() {
            return Err(Error::DimensionMismatch {
                expected: theta.dim(),
                actual: i,
            });
        }
    }
    let g = |s: f64| -> f64 {
        subset
            .iter()
            .map(|&i| theta.contraction(i).powf(s))
            .sum::<f64>()
            - 1.0
    };
    if subset.len() == 1 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    Ok(bisect_decreasing(g, 0.0, hi, ROOT_TOL))
}

/// Bowen root of a base measure: the real `s` with
/// `sum_i mu(i) theta(i)^s = 1`. Negative roots are meaningful and flag a
/// base measure too thin to sustain an infinite population.
pub fn bowen_root(mu: &MeasureVec, theta: &ThetaMetric) -> Result<f64> {
    if mu.dim() != theta.dim() {
        return Err(Error::DimensionMismatch {
            expected: theta.dim(),
            actual: mu.dim(),
        });
    }
    if (0..mu.dim()).all(|i| !mu.charges(i)) {
        return Err(Error::EmptySupport);
    }
    let g = |s: f64| -> f64 {
        mu.weights()
            .iter()
            .zip(theta.as_measure().weights())
            .map(|(&m, &t)| m * t.powf(s))
            .sum::<f64>()
            - 1.0
    };
    let mut lo = 0.0;
    let mut hi = 0.0;
    let mut span = 1.0;
    while g(lo) < 0.0 {
        lo -= span;
        span *= 2.0;
    }
    span = 1.0;
    while g(hi) > 0.0 {
        hi += span;
        span *= 2.0;
    }
    Ok(bisect_decreasing(g, lo, hi, ROOT_TOL))
}

/// Local dimension of the iid(`nu`) measure along the first `depth` colors
/// of a line: `sum ln nu(x_t) / sum ln theta(x_t)`.
///
/// A color of zero `nu`-weight makes the cylinder measure vanish and the
/// ratio `+inf`; a numerator of zero (every visited color has full mass)
/// gives 0.
pub fn pointwise_dimension(
    nu: &MeasureVec,
    theta: &ThetaMetric,
    colors: &[usize],
    depth: usize,
) -> Result<f64> {
    if depth == 0 {
        return Err(Error::ZeroDepth);
    }
    if depth > colors.len() {
        return Err(Error::DepthBeyondLine {
            requested: depth,
            available: colors.len(),
        });
    }
    if nu.dim() != theta.dim() {
        return Err(Error::DimensionMismatch {
            expected: theta.dim(),
            actual: nu.dim(),
        });
    }
    let mut log_measure = 0.0f64;
    let mut log_diam = 0.0f64;
    for &color in &colors[..depth] {
        if color >= nu.dim() {
            return Err(Error::DimensionMismatch {
                expected: nu.dim(),
                actual: color,
            });
        }
        if !nu.charges(color) {
            return Ok(f64::INFINITY);
        }
        log_measure += nu.weight(color).ln();
        log_diam += theta.contraction(color).ln();
    }
    if log_measure == 0.0 {
        return Ok(0.0);
    }
    Ok(log_measure / log_diam)
}

/// How a dimension estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DimensionMethod {
    Pointwise,
    CoveringRoot,
}

/// A dimension estimate with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub method: DimensionMethod,
    pub estimate: f64,
    pub depth: usize,
    /// True when the generation carried no lines; the estimate is then 0
    /// by convention.
    pub empty: bool,
    pub diagnostics: Vec<String>,
}

/// Covering root of one generation histogram: the `s >= 0` with
/// `sum_c count(c) diam(c)^s = 1`, where `diam(c) = prod theta(i)^{c_i}`.
/// Solved in log scale, so astronomically large counts are fine.
pub fn covering_dimension_estimate(
    h: &GenerationHistogram,
    theta: &ThetaMetric,
) -> Result<DimensionReport> {
    if h.depth() == 0 {
        return Err(Error::ZeroDepth);
    }
    if h.colors() != theta.dim() {
        return Err(Error::DimensionMismatch {
            expected: theta.dim(),
            actual: h.colors(),
        });
    }
    let total = h.total();
    if total == 0 {
        return Ok(DimensionReport {
            method: DimensionMethod::CoveringRoot,
            estimate: 0.0,
            depth: h.depth(),
            empty: true,
            diagnostics: vec!["no lines at this depth".to_string()],
        });
    }
    let log_theta: Vec<f64> = theta
        .as_measure()
        .weights()
        .iter()
        .map(|&t| t.ln())
        .collect();
    let entries: Vec<(f64, f64)> = h
        .counts()
        .iter()
        .filter(|(_, &count)| count > 0)
        .map(|(key, &count)| {
            let log_diam: f64 = key
                .iter()
                .zip(&log_theta)
                .map(|(&c, &lt)| c as f64 * lt)
                .sum();
            ((count as f64).ln(), log_diam)
        })
        .collect();
    // g(s) = ln sum_c count(c) diam(c)^s, strictly decreasing with
    // g(0) = ln total >= 0.
    let g = |s: f64| -> f64 {
        let terms: Vec<f64> = entries.iter().map(|&(lc, ld)| lc + s * ld).collect();
        log_sum_exp(&terms)
    };
    let mut hi = 1.0;
    let mut span = 1.0;
    while g(hi) > 0.0 {
        hi += span;
        span *= 2.0;
    }
    let estimate = bisect_decreasing(g, 0.0, hi, COVERING_TOL);
    Ok(DimensionReport {
        method: DimensionMethod::CoveringRoot,
        estimate,
        depth: h.depth(),
        empty: false,
        diagnostics: vec![format!("lines {total}"), format!("keys {}", entries.len())],
    })
}

/// Covering roots for every positive depth of an evolution.
pub fn covering_dimension_table(
    histograms: &[GenerationHistogram],
    theta: &ThetaMetric,
) -> Result<Vec<DimensionReport>> {
    histograms
        .iter()
        .filter(|h| h.depth() > 0)
        .map(|h| covering_dimension_estimate(h, theta))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branching::{evolve_histograms, ColorStructureLaw, StepOptions};
    use crate::rng::trial_rng;
    use proptest::prelude::*;
    use rand::Rng;
    use std::collections::BTreeMap;

    fn metric(values: Vec<f64>) -> ThetaMetric {
        ThetaMetric::new(MeasureVec::new(values).unwrap()).unwrap()
    }

    fn prob(values: Vec<f64>) -> MeasureVec {
        MeasureVec::new(values).unwrap()
    }

    /// A seeded random probability vector with strictly positive entries.
    fn random_simplex(dim: usize, rng: &mut impl Rng) -> MeasureVec {
        let raw: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.01..1.0f64)).collect();
        let total: f64 = raw.iter().sum();
        prob(raw.into_iter().map(|x| x / total).collect())
    }

    #[test]
    fn theta_ratios_must_be_strict_contractions() {
        assert!(matches!(
            ThetaMetric::new(prob(vec![0.5, 1.0])),
            Err(Error::ThetaOutOfRange { index: 1, .. })
        ));
        assert!(matches!(
            ThetaMetric::new(MeasureVec::new(vec![0.0, 0.5]).unwrap()),
            Err(Error::ThetaOutOfRange { index: 0, .. })
        ));
        assert!(ThetaMetric::new(prob(vec![0.2, 0.5])).is_ok());
    }

    #[test]
    fn cylinder_diameter_multiplies_contractions() {
        let theta = metric(vec![0.2, 0.5]);
        let diam = theta.cylinder_diameter(&[0, 1, 0]).unwrap();
        assert!((diam - 0.02).abs() <= 1e-15);
        assert_eq!(theta.cylinder_diameter(&[]).unwrap(), 1.0);
        assert!(matches!(
            theta.cylinder_diameter(&[2]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn billingsley_entropy_of_the_uniform_measure() {
        let s = billingsley_entropy(&prob(vec![0.5, 0.5]), &metric(vec![1.0 / 3.0, 1.0 / 3.0]))
            .unwrap();
        assert!((s - 2f64.ln() / 3f64.ln()).abs() <= 1e-12);
    }

    #[test]
    fn billingsley_entropy_vanishes_on_point_masses() {
        let s = billingsley_entropy(&prob(vec![1.0, 0.0]), &metric(vec![0.3, 0.6])).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn billingsley_entropy_equals_the_entropy_action_ratio() {
        // S = H / (H + rho(nu, theta)), with theta read as a measure.
        let theta = metric(vec![0.4, 0.35, 0.1]);
        let mut rng = trial_rng(31, 0);
        for _ in 0..20 {
            let nu = random_simplex(3, &mut rng);
            let s = billingsley_entropy(&nu, &theta).unwrap();
            let h = crate::rate::shannon_entropy(&nu).unwrap();
            let rho = kullback_action(&nu, theta.as_measure()).unwrap();
            assert!(
                (s - h / (h + rho)).abs() <= 1e-12,
                "ratio identity fails: {s} vs {}",
                h / (h + rho)
            );
        }
    }

    #[test]
    fn kullback_entropy_reduces_to_billingsley_for_the_counting_measure() {
        let theta = metric(vec![0.25, 0.55]);
        let unit = MeasureVec::unit(2).unwrap();
        let mut rng = trial_rng(32, 0);
        for _ in 0..20 {
            let nu = random_simplex(2, &mut rng);
            let d = billingsley_kullback_entropy(&nu, &unit, &theta).unwrap();
            let s = billingsley_entropy(&nu, &theta).unwrap();
            assert!((d - s).abs() <= 1e-12, "{d} vs {s}");
        }
    }

    #[test]
    fn kullback_entropy_is_minus_infinite_off_the_support() {
        let theta = metric(vec![0.5, 0.5]);
        let mu = MeasureVec::new(vec![0.0, 2.0]).unwrap();
        let d = billingsley_kullback_entropy(&prob(vec![0.5, 0.5]), &mu, &theta).unwrap();
        assert_eq!(d, f64::NEG_INFINITY);
    }

    #[test]
    fn kullback_entropy_touches_the_bowen_root_at_the_conformal_measure() {
        for (mu_w, theta_w) in [
            (vec![1.5, 1.5], vec![0.5, 0.5]),
            (vec![1.2, 0.9], vec![0.5, 0.25]),
        ] {
            let mu = MeasureVec::new(mu_w).unwrap();
            let theta = metric(theta_w);
            let s = bowen_root(&mu, &theta).unwrap();
            // nu(i) = mu(i) theta(i)^s sums to 1 by definition of the root.
            let nu = prob(
                mu.weights()
                    .iter()
                    .zip(theta.as_measure().weights())
                    .map(|(&m, &t)| m * t.powf(s))
                    .collect(),
            );
            let d = billingsley_kullback_entropy(&nu, &mu, &theta).unwrap();
            assert!((d - s).abs() <= 1e-10, "d = {d} vs root {s}");
        }
    }

    #[test]
    fn kullback_entropy_never_exceeds_the_bowen_root() {
        let mu = MeasureVec::new(vec![1.5, 0.9, 0.6]).unwrap();
        let theta = metric(vec![0.5, 0.3, 0.7]);
        let s = bowen_root(&mu, &theta).unwrap();
        let mut rng = trial_rng(33, 0);
        for _ in 0..1000 {
            let nu = random_simplex(3, &mut rng);
            let d = billingsley_kullback_entropy(&nu, &mu, &theta).unwrap();
            assert!(d <= s + 1e-12, "d = {d} exceeds the root {s}");
        }
    }

    #[test]
    fn moran_roots_of_classic_sets() {
        let third = metric(vec![1.0 / 3.0, 1.0 / 3.0]);
        let s = moran_root(&third, &[0, 1]).unwrap();
        assert!((s - 2f64.ln() / 3f64.ln()).abs() <= 1e-10);

        // theta = (1/2, 1/4): 2^-s + 4^-s = 1 gives s = log2 of the
        // golden ratio.
        let mixed = metric(vec![0.5, 0.25]);
        let s2 = moran_root(&mixed, &[0, 1]).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((s2 - golden.log2()).abs() <= 1e-10, "{s2}");

        let single = moran_root(&mixed, &[1]).unwrap();
        assert_eq!(single, 0.0);

        assert!(matches!(moran_root(&mixed, &[]), Err(Error::EmptySubset)));
        assert!(matches!(
            moran_root(&mixed, &[2]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn bowen_roots_match_closed_forms() {
        let half = metric(vec![0.5, 0.5]);
        let s = bowen_root(&MeasureVec::new(vec![1.5, 1.5]).unwrap(), &half).unwrap();
        assert!((s - 3f64.log2()).abs() <= 1e-10);

        let s1 = bowen_root(&MeasureVec::unit(2).unwrap(), &half).unwrap();
        assert!((s1 - 1.0).abs() <= 1e-10);

        // Total mass below 1: the root goes negative.
        let thin = bowen_root(&MeasureVec::new(vec![0.5, 0.4]).unwrap(), &half).unwrap();
        assert!((thin - 0.9f64.log2()).abs() <= 1e-10);
        assert!(thin < 0.0);

        assert!(matches!(
            bowen_root(&MeasureVec::new(vec![0.0, 0.0]).unwrap(), &half),
            Err(Error::EmptySupport)
        ));
    }

    #[test]
    fn pointwise_dimension_is_a_partial_sum_ratio() {
        let nu = prob(vec![0.5, 0.5]);
        let theta = metric(vec![0.2, 0.4]);
        let d = pointwise_dimension(&nu, &theta, &[0, 1], 2).unwrap();
        let expected = (2.0 * 0.5f64.ln()) / (0.2f64.ln() + 0.4f64.ln());
        assert!((d - expected).abs() <= 1e-12);

        assert!(matches!(
            pointwise_dimension(&nu, &theta, &[0, 1], 0),
            Err(Error::ZeroDepth)
        ));
        assert!(matches!(
            pointwise_dimension(&nu, &theta, &[0, 1], 3),
            Err(Error::DepthBeyondLine { .. })
        ));
    }

    #[test]
    fn pointwise_dimension_handles_degenerate_measures() {
        let theta = metric(vec![0.5, 0.5]);
        // A zero-weight color makes the cylinder measure vanish.
        let off = pointwise_dimension(&prob(vec![1.0, 0.0]), &theta, &[0, 1, 0], 3).unwrap();
        assert_eq!(off, f64::INFINITY);
        // Full-mass colors along the whole line give a zero numerator.
        let flat = pointwise_dimension(&prob(vec![1.0, 0.0]), &theta, &[0, 0, 0], 3).unwrap();
        assert_eq!(flat, 0.0);
    }

    #[test]
    fn pointwise_dimension_converges_to_the_billingsley_entropy() {
        let nu = prob(vec![0.7, 0.3]);
        let theta = metric(vec![0.5, 0.5]);
        let line = crate::branching::sample_bernoulli_line(&nu, 20_000, 77).unwrap();
        let d = pointwise_dimension(&nu, &theta, &line.colors, 20_000).unwrap();
        let s = billingsley_entropy(&nu, &theta).unwrap();
        assert!((d - s).abs() <= 0.02, "pointwise {d} vs entropy {s}");
    }

    #[test]
    fn covering_root_of_the_full_binary_tree_is_one() {
        let law = ColorStructureLaw::new(2, vec![(vec![1, 1], 1.0)]).unwrap();
        let mut rng = trial_rng(0, 0);
        let evo = evolve_histograms(&law, 10, &mut rng, &StepOptions::default()).unwrap();
        let theta = metric(vec![0.5, 0.5]);
        let reports = covering_dimension_table(&evo.histograms, &theta).unwrap();
        assert_eq!(reports.len(), 10);
        for report in reports {
            assert!(
                (report.estimate - 1.0).abs() <= 1e-9,
                "depth {}: {}",
                report.depth,
                report.estimate
            );
            assert!(!report.empty);
        }
    }

    #[test]
    fn covering_root_of_a_two_color_face_matches_moran() {
        // Counts C(n, a) on keys (0, a, n - a): the face of a ternary tree
        // spanned by the last two colors, whose Moran dimension under
        // theta = 1/3 is ln 2 / ln 3 at every depth.
        let theta = metric(vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        for n in [4usize, 9, 16] {
            let mut counts: BTreeMap<Vec<u64>, u128> = BTreeMap::new();
            let mut coef = 1u128;
            for a in 0..=n as u64 {
                if a > 0 {
                    coef = coef * (n as u64 - a + 1) as u128 / a as u128;
                }
                counts.insert(vec![0, a, n as u64 - a], coef);
            }
            let h = GenerationHistogram::from_counts(3, n, counts).unwrap();
            let report = covering_dimension_estimate(&h, &theta).unwrap();
            assert!(
                (report.estimate - 2f64.ln() / 3f64.ln()).abs() <= 1e-9,
                "n = {n}: {}",
                report.estimate
            );
        }
    }

    #[test]
    fn covering_root_of_an_extinct_generation_is_flagged_empty() {
        let h = GenerationHistogram::from_counts(2, 5, BTreeMap::new()).unwrap();
        let theta = metric(vec![0.5, 0.5]);
        let report = covering_dimension_estimate(&h, &theta).unwrap();
        assert!(report.empty);
        assert_eq!(report.estimate, 0.0);
    }

    #[test]
    fn covering_root_of_a_single_line_is_zero() {
        let mut counts = BTreeMap::new();
        counts.insert(vec![3u64, 2], 1u128);
        let h = GenerationHistogram::from_counts(2, 5, counts).unwrap();
        let report = covering_dimension_estimate(&h, &metric(vec![0.5, 0.5])).unwrap();
        assert!(report.estimate.abs() <= 1e-9);
        assert!(!report.empty);
    }

    #[test]
    fn dimension_reports_serialize() {
        let report = DimensionReport {
            method: DimensionMethod::CoveringRoot,
            estimate: 1.0,
            depth: 4,
            empty: false,
            diagnostics: vec!["lines 16".to_string()],
        };
        let json = serde_json::to_string(&report).unwrap();
        let back: DimensionReport = serde_json::from_str(&json).unwrap();
        assert_eq!(report, back);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn distance_is_an_ultrametric(
            x in prop::collection::vec(0usize..3, 12),
            y in prop::collection::vec(0usize..3, 12),
            z in prop::collection::vec(0usize..3, 12),
            raw in prop::collection::vec(0.05..0.95f64, 3),
        ) {
            let theta = metric(raw);
            let dxy = theta.distance(&x, &y).unwrap();
            let dyz = theta.distance(&y, &z).unwrap();
            let dxz = theta.distance(&x, &z).unwrap();
            prop_assert!(dxz <= dxy.max(dyz) + 1e-15);
        }

        #[test]
        fn diameters_are_multiplicative_over_concatenation(
            a in prop::collection::vec(0usize..2, 1..8),
            b in prop::collection::vec(0usize..2, 1..8),
            raw in prop::collection::vec(0.05..0.95f64, 2),
        ) {
            let theta = metric(raw);
            let joined: Vec<usize> = a.iter().chain(b.iter()).copied().collect();
            let lhs = theta.cylinder_diameter(&joined).unwrap();
            let rhs = theta.cylinder_diameter(&a).unwrap()
                * theta.cylinder_diameter(&b).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
        }
    }
}
