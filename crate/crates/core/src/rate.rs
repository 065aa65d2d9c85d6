//! The spectral potential, tilted measures, and the Kullback action, tied
//! together by Legendre duality.
//!
//! For a nonzero measure `mu` and a function `phi` on the alphabet, the
//! spectral potential is
//!
//! ```text
//! lambda(phi, mu) = ln mu[e^phi] = ln sum_i mu(i) e^phi(i).
//! ```
//!
//! It is nondecreasing in `phi`, additively homogeneous
//! (`lambda(phi + t) = lambda(phi) + t`), and convex in `phi`. Its first
//! derivative at `phi` is the *tilted* probability measure
//!
//! ```text
//! mu_phi(i) = mu(i) e^{phi(i) - lambda(phi, mu)},
//! ```
//!
//! and its second derivative is the covariance form of `mu_phi`.
//!
//! The convex conjugate of the potential is the Kullback action
//!
//! ```text
//! rho(nu, mu) = sum_i nu(i) ln(nu(i) / mu(i))
//! ```
//!
//! for probability vectors `nu` absolutely continuous with respect to `mu`,
//! and `+inf` in every other case (escaping support, non-normalized input).
//! The two sides are linked by the Young inequality
//!
//! ```text
//! rho(nu, mu) >= nu[psi] - lambda(psi, mu)      for every psi,
//! ```
//!
//! with equality exactly at `psi = ln(nu / mu)` (up to an additive
//! constant), and by the dual representation
//! `rho(nu, mu) = sup_psi { nu[psi] - lambda(psi, mu) }`.
//!
//! Unlike the probability-base case, `rho` against a general base measure
//! can be negative; its floor is `-ln mu[1]`, attained at the normalization
//! of `mu`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::alphabet::{integrate, FuncVec, MeasureVec, TOL_EMPIRICAL};
use crate::error::{Error, Result};
use crate::rng::trial_rng;

/// Numerical floor used in place of `ln 0` when seeding the duality search
/// at `psi = ln(nu / mu)` on colors that `nu` does not charge. The induced
/// objective error is of order `e^-PSI_FLOOR`, far below every tolerance in
/// the crate.
const PSI_FLOOR: f64 = 40.0;

/// A base measure together with a tilt and the resulting tilted probability
/// vector; `tilted(i) = base(i) e^{tilt(i) - value}` where
/// `value = lambda(tilt, base)`.
#[derive(Debug, Clone)]
pub struct TiltedFamily {
    base: MeasureVec,
    tilt: FuncVec,
    value: f64,
    tilted: MeasureVec,
}

impl TiltedFamily {
    pub fn base(&self) -> &MeasureVec {
        &self.base
    }

    pub fn tilt(&self) -> &FuncVec {
        &self.tilt
    }

    /// The spectral potential `lambda(tilt, base)`.
    pub fn value(&self) -> f64 {
        self.value
    }

    /// The tilted probability measure; sums to 1 by construction.
    pub fn tilted(&self) -> &MeasureVec {
        &self.tilted
    }
}

/// `lambda(phi, mu) = ln mu[e^phi]`, evaluated in log-sum-exp form so that
/// large tilts do not overflow.
pub fn spectral_potential(phi: &FuncVec, mu: &MeasureVec) -> Result<f64> {
    if phi.dim() != mu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            actual: phi.dim(),
        });
    }
    let mut max_tilt = f64::NEG_INFINITY;
    for i in 0..mu.dim() {
        if mu.charges(i) {
            max_tilt = max_tilt.max(phi.value(i));
        }
    }
    if max_tilt == f64::NEG_INFINITY {
        return Err(Error::ZeroMass);
    }
    let sum: f64 = (0..mu.dim())
        .filter(|&i| mu.charges(i))
        .map(|i| mu.weight(i) * (phi.value(i) - max_tilt).exp())
        .sum();
    Ok(max_tilt + sum.ln())
}

/// The tilted family at `phi`: base, tilt, potential value, and the tilted
/// probability measure in one bundle.
pub fn tilted_measure(phi: &FuncVec, mu: &MeasureVec) -> Result<TiltedFamily> {
    let value = spectral_potential(phi, mu)?;
    let weights: Vec<f64> = (0..mu.dim())
        .map(|i| {
            if mu.charges(i) {
                mu.weight(i) * (phi.value(i) - value).exp()
            } else {
                0.0
            }
        })
        .collect();
    let tilted = MeasureVec::new(weights)?;
    debug_assert!(
        tilted.is_probability_within(TOL_EMPIRICAL),
        "tilted measure must normalize"
    );
    Ok(TiltedFamily {
        base: mu.clone(),
        tilt: phi.clone(),
        value,
        tilted,
    })
}

/// First derivative of the potential: the gradient of `phi -> lambda(phi, mu)`
/// is the tilted measure `mu_phi` itself.
pub fn potential_gradient(phi: &FuncVec, mu: &MeasureVec) -> Result<MeasureVec> {
    Ok(tilted_measure(phi, mu)?.tilted().clone())
}

/// Second derivative of the potential as a quadratic form: the covariance
/// `cov_{mu_phi}(f, g) = mu_phi[(f - mu_phi[f])(g - mu_phi[g])]`.
///
/// The centered product form makes the diagonal (`f == g`) a sum of
/// nonnegative terms, so variances are nonnegative exactly, not just up to
/// rounding.
pub fn potential_hessian_quadform(
    phi: &FuncVec,
    mu: &MeasureVec,
    f: &FuncVec,
    g: &FuncVec,
) -> Result<f64> {
    let family = tilted_measure(phi, mu)?;
    let t = family.tilted();
    let mean_f = integrate(t, f)?;
    let mean_g = integrate(t, g)?;
    let mut acc = 0.0;
    for i in 0..t.dim() {
        acc += t.weight(i) * (f.value(i) - mean_f) * (g.value(i) - mean_g);
    }
    Ok(acc)
}

/// The Kullback action `rho(nu, mu)`, an extended real.
///
/// Returns `+inf` when `nu` charges a color outside the support of `mu`, and
/// also when `nu` is not a probability vector (the action is defined as
/// `+inf` for every functional that is not a probability measure). Negative
/// entries cannot occur: `MeasureVec` rejects them at construction.
pub fn kullback_action(nu: &MeasureVec, mu: &MeasureVec) -> Result<f64> {
    if nu.dim() != mu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            actual: nu.dim(),
        });
    }
    if !nu.is_probability_within(TOL_EMPIRICAL) {
        return Ok(f64::INFINITY);
    }
    let mut acc = 0.0;
    for i in 0..nu.dim() {
        if !nu.charges(i) {
            continue; // 0 ln 0 = 0
        }
        if !mu.charges(i) {
            return Ok(f64::INFINITY);
        }
        acc += nu.weight(i) * (nu.weight(i) / mu.weight(i)).ln();
    }
    Ok(acc)
}

/// Shannon entropy `H(nu) = -sum_i nu(i) ln nu(i)`; requires a probability
/// vector. Equals `-rho(nu, 1)` against the counting measure.
pub fn shannon_entropy(nu: &MeasureVec) -> Result<f64> {
    if !nu.is_probability_within(TOL_EMPIRICAL) {
        return Err(Error::NotProbability {
            sum: nu.total_mass(),
        });
    }
    let mut acc = 0.0;
    for i in 0..nu.dim() {
        if nu.charges(i) {
            acc -= nu.weight(i) * nu.weight(i).ln();
        }
    }
    Ok(acc)
}

/// Search control for [`legendre_sup_estimate`].
#[derive(Debug, Clone)]
pub struct LegendreSearch {
    /// Gaussian perturbations placed around the analytic maximizer.
    pub perturbations: usize,
    /// Coarse random restarts away from the maximizer.
    pub restarts: usize,
    /// Scale of the perturbation noise.
    pub perturb_scale: f64,
    /// Gradient-ascent refinement steps per start point.
    pub ascent_iters: usize,
    /// Seed of the search's own randomness.
    pub seed: u64,
}

impl Default for LegendreSearch {
    fn default() -> Self {
        LegendreSearch {
            perturbations: 4,
            restarts: 4,
            perturb_scale: 0.5,
            ascent_iters: 120,
            seed: 0,
        }
    }
}

/// Numerical estimate of `sup_psi { nu[psi] - lambda(psi, mu) }`.
///
/// The supremum equals `rho(nu, mu)` and is attained at
/// `psi* = ln(nu / mu)`, so the search seeds there, adds Gaussian
/// perturbations and coarse random restarts, and refines each start with
/// backtracking gradient ascent (the objective is concave, with gradient
/// `nu - mu_psi`). Requires `nu` to be a probability vector absolutely
/// continuous with respect to `mu`; a singular pair has an infinite
/// supremum and is rejected.
pub fn legendre_sup_estimate(
    nu: &MeasureVec,
    mu: &MeasureVec,
    search: &LegendreSearch,
) -> Result<f64> {
    if nu.dim() != mu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            actual: nu.dim(),
        });
    }
    if !nu.is_probability_within(TOL_EMPIRICAL) {
        return Err(Error::NotProbability {
            sum: nu.total_mass(),
        });
    }
    for i in 0..nu.dim() {
        if nu.charges(i) && !mu.charges(i) {
            return Err(Error::SingularPair { index: i });
        }
    }

    let r = nu.dim();
    let objective = |psi: &[f64]| -> f64 {
        let f = FuncVec::new(psi.to_vec()).expect("finite search point");
        let pairing: f64 = (0..r).map(|i| nu.weight(i) * psi[i]).sum();
        pairing - spectral_potential(&f, mu).expect("mu has mass")
    };

    // Analytic maximizer, with a finite floor standing in for ln 0 on
    // colors nu does not charge.
    let psi_star: Vec<f64> = (0..r)
        .map(|i| {
            if nu.charges(i) {
                (nu.weight(i) / mu.weight(i)).ln()
            } else {
                -PSI_FLOOR
            }
        })
        .collect();

    let mut rng = trial_rng(search.seed, 0);
    let mut starts: Vec<Vec<f64>> = vec![psi_star.clone()];
    for _ in 0..search.perturbations {
        let p: Vec<f64> = psi_star
            .iter()
            .map(|&v| v + search.perturb_scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        starts.push(p);
    }
    for _ in 0..search.restarts {
        let p: Vec<f64> = (0..r)
            .map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        starts.push(p);
    }

    let mut best = f64::NEG_INFINITY;
    for start in starts {
        let refined = ascend(&start, nu, mu, search.ascent_iters, &objective);
        best = best.max(refined);
    }
    Ok(best)
}

/// Backtracking gradient ascent on the concave objective; returns the best
/// value seen along the path.
fn ascend(
    start: &[f64],
    nu: &MeasureVec,
    mu: &MeasureVec,
    iters: usize,
    objective: &dyn Fn(&[f64]) -> f64,
) -> f64 {
    let r = start.len();
    let mut psi = start.to_vec();
    let mut value = objective(&psi);
    for _ in 0..iters {
        let f = FuncVec::new(psi.clone()).expect("finite iterate");
        let tilted = match tilted_measure(&f, mu) {
            Ok(t) => t,
            Err(_) => break,
        };
        let grad: Vec<f64> = (0..r)
            .map(|i| nu.weight(i) - tilted.tilted().weight(i))
            .collect();
        let grad_norm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm < 1e-14 {
            break;
        }
        let mut step = 1.0;
        let mut advanced = false;
        while step > 1e-12 {
            let candidate: Vec<f64> = psi.iter().zip(&grad).map(|(p, g)| p + step * g).collect();
            let cand_value = objective(&candidate);
            if cand_value > value {
                psi = candidate;
                value = cand_value;
                advanced = true;
                break;
            }
            step *= 0.5;
        }
        if !advanced {
            break;
        }
    }
    value
}

/// The Young gap `rho(nu, mu) - (nu[psi] - lambda(psi, mu))`.
///
/// Always `>= 0` up to rounding; vanishes exactly when `nu` is the tilted
/// measure `mu_psi`. Pairs with infinite action are rejected since the gap
/// is then undefined.
pub fn young_gap(nu: &MeasureVec, mu: &MeasureVec, psi: &FuncVec) -> Result<f64> {
    let rho = kullback_action(nu, mu)?;
    if !rho.is_finite() {
        return Err(Error::InfiniteKullback);
    }
    let pairing = integrate(nu, psi)?;
    let lambda = spectral_potential(psi, mu)?;
    Ok(rho - (pairing - lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LN_2: f64 = std::f64::consts::LN_2;

    fn meas(w: &[f64]) -> MeasureVec {
        MeasureVec::new(w.to_vec()).unwrap()
    }

    fn func(v: &[f64]) -> FuncVec {
        FuncVec::new(v.to_vec()).unwrap()
    }

    #[test]
    fn potential_vanishes_for_zero_tilt_of_probability_base() {
        let lambda = spectral_potential(&func(&[0.0, 0.0]), &meas(&[0.5, 0.5])).unwrap();
        assert!(lambda.abs() <= 1e-12);
    }

    #[test]
    fn potential_of_constant_tilt_is_the_constant() {
        let lambda = spectral_potential(&func(&[1.7, 1.7]), &meas(&[0.5, 0.5])).unwrap();
        assert!((lambda - 1.7).abs() <= 1e-12);
    }

    #[test]
    fn potential_records_total_mass_of_non_probability_base() {
        let lambda = spectral_potential(&func(&[0.0, 0.0]), &meas(&[1.5, 1.5])).unwrap();
        assert!((lambda - 3.0f64.ln()).abs() <= 1e-12);
    }

    #[test]
    fn potential_rejects_zero_mass_base() {
        assert!(matches!(
            spectral_potential(&func(&[0.0]), &meas(&[0.0])),
            Err(Error::ZeroMass)
        ));
    }

    #[test]
    fn potential_survives_huge_tilts() {
        let lambda = spectral_potential(&func(&[800.0, -800.0]), &meas(&[0.5, 0.5])).unwrap();
        assert!((lambda - (800.0 + 0.5f64.ln())).abs() <= 1e-9);
    }

    #[test]
    fn tilting_reweights_by_exponential_factors() {
        let fam = tilted_measure(&func(&[LN_2, 0.0]), &meas(&[0.5, 0.5])).unwrap();
        assert!((fam.tilted().weight(0) - 2.0 / 3.0).abs() <= 1e-12);
        assert!((fam.tilted().weight(1) - 1.0 / 3.0).abs() <= 1e-12);
    }

    #[test]
    fn zero_tilt_normalizes_the_base() {
        let fam = tilted_measure(&func(&[0.0, 0.0]), &meas(&[2.0, 6.0])).unwrap();
        assert!((fam.tilted().weight(0) - 0.25).abs() <= 1e-12);
        assert!((fam.tilted().weight(1) - 0.75).abs() <= 1e-12);
        assert!((fam.value() - 8.0f64.ln()).abs() <= 1e-12);
    }

    #[test]
    fn hessian_diagonal_is_the_bernoulli_variance() {
        let q = potential_hessian_quadform(
            &func(&[0.0, 0.0]),
            &meas(&[0.5, 0.5]),
            &func(&[1.0, 0.0]),
            &func(&[1.0, 0.0]),
        )
        .unwrap();
        assert!((q - 0.25).abs() <= 1e-12);
    }

    #[test]
    fn kullback_action_of_point_mass_against_fair_coin_is_ln_two() {
        let rho = kullback_action(&meas(&[1.0, 0.0]), &meas(&[0.5, 0.5])).unwrap();
        assert!((rho - LN_2).abs() <= 1e-12);
    }

    #[test]
    fn kullback_action_is_infinite_off_the_support() {
        let rho = kullback_action(&meas(&[0.5, 0.5]), &meas(&[0.0, 1.0])).unwrap();
        assert!(rho.is_infinite() && rho > 0.0);
    }

    #[test]
    fn kullback_action_is_infinite_for_non_probability_nu() {
        let rho = kullback_action(&meas(&[0.5, 0.6]), &meas(&[0.5, 0.5])).unwrap();
        assert!(rho.is_infinite() && rho > 0.0);
    }

    #[test]
    fn kullback_action_can_be_negative_against_a_heavy_base() {
        // rho(nu, c * p) = rho(nu, p) - ln c; here nu = p = (1/2, 1/2) and
        // c = 3, so the action is exactly -ln 3.
        let rho = kullback_action(&meas(&[0.5, 0.5]), &meas(&[1.5, 1.5])).unwrap();
        assert!((rho + 3.0f64.ln()).abs() <= 1e-12);
    }

    #[test]
    fn shannon_entropy_of_fair_coin_is_ln_two() {
        assert!((shannon_entropy(&meas(&[0.5, 0.5])).unwrap() - LN_2).abs() <= 1e-12);
        assert!(shannon_entropy(&meas(&[1.0, 0.0])).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn shannon_entropy_rejects_non_probability_input() {
        assert!(matches!(
            shannon_entropy(&meas(&[0.4, 0.4])),
            Err(Error::NotProbability { .. })
        ));
    }

    #[test]
    fn entropy_is_negative_action_against_counting_measure() {
        let nu = meas(&[0.2, 0.3, 0.5]);
        let unit = MeasureVec::unit(3).unwrap();
        let h = shannon_entropy(&nu).unwrap();
        let rho = kullback_action(&nu, &unit).unwrap();
        assert!((h + rho).abs() <= 1e-12);
    }

    #[test]
    fn duality_estimate_reaches_the_action() {
        let cases = [
            (vec![0.5, 0.5], vec![0.5, 0.5]),
            (vec![0.9, 0.1], vec![0.5, 0.5]),
            (vec![0.5, 0.5], vec![1.5, 1.5]),
            (vec![0.2, 0.3, 0.5], vec![0.4, 0.4, 0.2]),
        ];
        for (nu_w, mu_w) in cases {
            let nu = meas(&nu_w);
            let mu = meas(&mu_w);
            let rho = kullback_action(&nu, &mu).unwrap();
            let est = legendre_sup_estimate(&nu, &mu, &LegendreSearch::default()).unwrap();
            assert!(
                (est - rho).abs() <= 1e-8,
                "duality gap {} for nu={nu_w:?}, mu={mu_w:?}",
                est - rho
            );
        }
    }

    #[test]
    fn duality_estimate_is_negative_for_heavy_base() {
        let est = legendre_sup_estimate(
            &meas(&[0.5, 0.5]),
            &meas(&[1.5, 1.5]),
            &LegendreSearch::default(),
        )
        .unwrap();
        assert!((est + 3.0f64.ln()).abs() <= 1e-8);
        assert!(est < 0.0, "the supremum can be negative");
    }

    #[test]
    fn duality_estimate_rejects_singular_pairs() {
        assert!(matches!(
            legendre_sup_estimate(
                &meas(&[0.5, 0.5]),
                &meas(&[0.0, 1.0]),
                &LegendreSearch::default()
            ),
            Err(Error::SingularPair { index: 0 })
        ));
    }

    #[test]
    fn young_gap_is_positive_away_from_the_tilt_and_zero_at_it() {
        let nu = meas(&[0.5, 0.5]);
        let mu = meas(&[0.5, 0.5]);
        let psi = func(&[1.0, 0.0]);
        let gap = young_gap(&nu, &mu, &psi).unwrap();
        let expected = ((std::f64::consts::E + 1.0) / 2.0).ln() - 0.5;
        assert!((gap - expected).abs() <= 1e-12);
        assert!(gap > 0.0);

        // At psi = ln(nu/mu) the inequality saturates.
        let nu2 = meas(&[0.7, 0.3]);
        let psi_star = func(&[(0.7f64 / 0.5).ln(), (0.3f64 / 0.5).ln()]);
        let gap_star = young_gap(&nu2, &mu, &psi_star).unwrap();
        assert!(gap_star.abs() <= 1e-10);
    }

    #[test]
    fn young_gap_rejects_infinite_action() {
        assert!(matches!(
            young_gap(&meas(&[0.5, 0.5]), &meas(&[0.0, 1.0]), &func(&[0.0, 0.0])),
            Err(Error::InfiniteKullback)
        ));
    }

    // Qualitative divergence of the dual objective for functionals outside
    // the probability simplex: the gap grows without bound along explicit
    // witness families, so no finite certification is attempted.
    fn raw_objective(nu: &[f64], psi: &[f64], mu: &MeasureVec) -> f64 {
        let pairing: f64 = nu.iter().zip(psi).map(|(a, b)| a * b).sum();
        pairing - spectral_potential(&func(psi), mu).unwrap()
    }

    #[test]
    fn dual_objective_diverges_for_singular_nu() {
        let mu = meas(&[0.0, 1.0]);
        let nu = [0.5, 0.5]; // charges color 0 outside supp(mu)
        let mut last = f64::NEG_INFINITY;
        for t in [1.0, 10.0, 100.0] {
            let v = raw_objective(&nu, &[t, 0.0], &mu);
            assert!(v > last, "objective must grow along the witness family");
            last = v;
        }
    }

    #[test]
    fn dual_objective_diverges_for_non_normalized_nu() {
        let mu = meas(&[0.5, 0.5]);
        let heavy = [0.8, 0.8]; // mass 1.6 > 1: push with +t
        let light = [0.2, 0.2]; // mass 0.4 < 1: push with -t
        let mut last_heavy = f64::NEG_INFINITY;
        let mut last_light = f64::NEG_INFINITY;
        for t in [1.0, 10.0, 100.0] {
            let vh = raw_objective(&heavy, &[t, t], &mu);
            let vl = raw_objective(&light, &[-t, -t], &mu);
            assert!(vh > last_heavy);
            assert!(vl > last_light);
            last_heavy = vh;
            last_light = vl;
        }
    }

    #[test]
    fn dual_objective_diverges_for_signed_nu() {
        let mu = meas(&[0.5, 0.5]);
        let nu = [1.5, -0.5]; // signed functional of total mass 1
        let mut last = f64::NEG_INFINITY;
        for t in [1.0, 10.0, 100.0] {
            // Push against the negative part.
            let v = raw_objective(&nu, &[0.0, -t], &mu);
            assert!(v > last, "objective must grow along the witness family");
            last = v;
        }
    }

    // ---- property tests ----------------------------------------------

    fn simplex_vec(r: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1e-3..1.0f64, r).prop_map(|raw| {
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|w| w / total).collect()
        })
    }

    fn positive_measure(r: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1e-3..3.0f64, r)
    }

    fn tilt_vec(r: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0..5.0f64, r)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn potential_is_monotone(mu_w in positive_measure(3), phi in tilt_vec(3), bump in prop::collection::vec(0.0..2.0f64, 3)) {
            let mu = meas(&mu_w);
            let lo = spectral_potential(&func(&phi), &mu).unwrap();
            let hi_tilt: Vec<f64> = phi.iter().zip(&bump).map(|(a, b)| a + b).collect();
            let hi = spectral_potential(&func(&hi_tilt), &mu).unwrap();
            prop_assert!(hi >= lo - 1e-12);
        }

        #[test]
        fn potential_is_additively_homogeneous(mu_w in positive_measure(3), phi in tilt_vec(3), t in -10.0..10.0f64) {
            let mu = meas(&mu_w);
            let base = spectral_potential(&func(&phi), &mu).unwrap();
            let shifted_tilt: Vec<f64> = phi.iter().map(|a| a + t).collect();
            let shifted = spectral_potential(&func(&shifted_tilt), &mu).unwrap();
            prop_assert!((shifted - base - t).abs() <= 1e-12 * (1.0 + base.abs() + t.abs()));
        }

        #[test]
        fn potential_is_convex(mu_w in positive_measure(3), phi in tilt_vec(3), psi in tilt_vec(3), a in 0.0..1.0f64) {
            let mu = meas(&mu_w);
            let mix: Vec<f64> = phi.iter().zip(&psi).map(|(x, y)| a * x + (1.0 - a) * y).collect();
            let left = spectral_potential(&func(&mix), &mu).unwrap();
            let right = a * spectral_potential(&func(&phi), &mu).unwrap()
                + (1.0 - a) * spectral_potential(&func(&psi), &mu).unwrap();
            prop_assert!(left <= right + 1e-12);
        }

        #[test]
        fn gradient_matches_finite_differences(mu_w in positive_measure(3), phi in tilt_vec(3)) {
            let mu = meas(&mu_w);
            let grad = potential_gradient(&func(&phi), &mu).unwrap();
            let h = 1e-5;
            for i in 0..3 {
                let mut up = phi.clone();
                let mut down = phi.clone();
                up[i] += h;
                down[i] -= h;
                let fd = (spectral_potential(&func(&up), &mu).unwrap()
                    - spectral_potential(&func(&down), &mu).unwrap())
                    / (2.0 * h);
                prop_assert!((grad.weight(i) - fd).abs() <= 1e-6);
            }
        }

        #[test]
        fn hessian_matches_finite_differences(mu_w in positive_measure(2), phi in tilt_vec(2), f_v in tilt_vec(2)) {
            let mu = meas(&mu_w);
            let f = func(&f_v);
            let q = potential_hessian_quadform(&func(&phi), &mu, &f, &f).unwrap();
            let h = 1e-3;
            let at = |t: f64| {
                let tilt: Vec<f64> = phi.iter().zip(&f_v).map(|(p, fv)| p + t * fv).collect();
                spectral_potential(&func(&tilt), &mu).unwrap()
            };
            let fd = (at(h) - 2.0 * at(0.0) + at(-h)) / (h * h);
            prop_assert!((q - fd).abs() <= 1e-4 * (1.0 + q.abs()));
        }

        #[test]
        fn variance_is_nonnegative(mu_w in positive_measure(4), phi in tilt_vec(4), f_v in tilt_vec(4)) {
            let mu = meas(&mu_w);
            let f = func(&f_v);
            let q = potential_hessian_quadform(&func(&phi), &mu, &f, &f).unwrap();
            prop_assert!(q >= 0.0, "centered variance must be exactly nonnegative");
        }

        #[test]
        fn action_is_nonnegative_against_probability_base(nu_w in simplex_vec(3), mu_w in simplex_vec(3)) {
            let rho = kullback_action(&meas(&nu_w), &meas(&mu_w)).unwrap();
            prop_assert!(rho >= -1e-12);
        }

        #[test]
        fn action_obeys_the_mass_shift_rule(nu_w in simplex_vec(3), mu_w in simplex_vec(3), c in 0.1..10.0f64) {
            let nu = meas(&nu_w);
            let p = meas(&mu_w);
            let scaled = meas(&mu_w.iter().map(|w| w * c).collect::<Vec<_>>());
            let direct = kullback_action(&nu, &scaled).unwrap();
            let shifted = kullback_action(&nu, &p).unwrap() - c.ln();
            prop_assert!((direct - shifted).abs() <= 1e-10);
        }

        #[test]
        fn action_is_bounded_below_by_negative_log_mass(nu_w in simplex_vec(3), mu_w in positive_measure(3)) {
            let mu = meas(&mu_w);
            let rho = kullback_action(&meas(&nu_w), &mu).unwrap();
            prop_assert!(rho >= -mu.total_mass().ln() - 1e-10);
        }

        #[test]
        fn duality_holds_on_random_pairs(nu_w in simplex_vec(3), mu_w in positive_measure(3)) {
            let nu = meas(&nu_w);
            let mu = meas(&mu_w);
            let rho = kullback_action(&nu, &mu).unwrap();
            let est = legendre_sup_estimate(&nu, &mu, &LegendreSearch::default()).unwrap();
            prop_assert!((est - rho).abs() <= 1e-8);
        }

        #[test]
        fn young_inequality_holds_and_saturates(nu_w in simplex_vec(3), mu_w in positive_measure(3), psi_v in tilt_vec(3)) {
            let nu = meas(&nu_w);
            let mu = meas(&mu_w);
            let gap = young_gap(&nu, &mu, &func(&psi_v)).unwrap();
            prop_assert!(gap >= -1e-12);

            let psi_star: Vec<f64> = nu_w.iter().zip(&mu_w).map(|(n, m)| (n / m).ln()).collect();
            let gap_star = young_gap(&nu, &mu, &func(&psi_star)).unwrap();
            prop_assert!(gap_star.abs() <= 1e-10);
        }

        #[test]
        fn tilted_measure_saturates_young(nu_unused in simplex_vec(2), mu_w in positive_measure(2), psi_v in tilt_vec(2)) {
            let _ = nu_unused;
            let mu = meas(&mu_w);
            let psi = func(&psi_v);
            let fam = tilted_measure(&psi, &mu).unwrap();
            let gap = young_gap(fam.tilted(), &mu, &psi).unwrap();
            prop_assert!(gap.abs() <= 1e-10, "equality case must saturate within 1e-10");
        }
    }
}
