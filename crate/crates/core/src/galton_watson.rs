//! Scalar Galton-Watson processes with finitely supported offspring laws.
//!
//! A population starts from a single individual, `Z_0 = 1`, and every
//! individual independently leaves `k` children with probability `p_k`. The
//! generating function
//!
//! ```text
//! f(s) = sum_k p_k s^k,        f_{n+1} = f(f_n),
//! ```
//!
//! drives everything: `f_n(0)` is the probability of extinction by
//! generation `n`, and the extinction probability `q` is the smallest root
//! of `f(s) = s` in `[0, 1]`. For mean offspring `m <= 1` the process dies
//! out almost surely (`q = 1`), except for the degenerate law `{1: 1}`
//! whose population is frozen at 1 forever. For `m > 1`, `q` is the unique
//! root of `f(s) = s` in `[0, 1)` by convexity of `f`.
//!
//! In the supercritical case the normalized sequence `W_n = Z_n / m^n` is a
//! nonnegative martingale with `E W_n = 1`.
//!
//! Simulation draws the offspring multinomial exactly: given `Z_n`
//! individuals, the number choosing each atom is sampled by sequential
//! binomials, which is distributionally identical to drawing `Z_n`
//! independent offspring counts and stays cheap when `Z_n` reaches billions.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::trial_rng;

/// Probabilities must sum to 1 within this tolerance.
pub const LAW_TOL: f64 = 1e-12;

/// Root tolerance for the extinction bisection.
pub const EXTINCTION_TOL: f64 = 1e-12;

/// The bisection bracket is `[0, 1 - EXTINCTION_GUARD]`; the guard keeps the
/// right endpoint away from the unit fixed point `f(1) = 1`.
pub const EXTINCTION_GUARD: f64 = 1e-9;

/// A finitely supported offspring law `{k: p_k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffspringCountLaw {
    atoms: Vec<(u64, f64)>,
}

impl OffspringCountLaw {
    /// Build from `(k, p_k)` pairs. Duplicate `k` entries are merged;
    /// probabilities must be nonnegative and sum to 1 within [`LAW_TOL`].
    pub fn new(atoms: Vec<(u64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptySupport);
        }
        for (index, &(_, p)) in atoms.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if p < 0.0 {
                return Err(Error::NegativeEntry { index, value: p });
            }
        }
        let mut merged: Vec<(u64, f64)> = Vec::with_capacity(atoms.len());
        let mut sorted = atoms;
        sorted.sort_by_key(|&(k, _)| k);
        for (k, p) in sorted {
            match merged.last_mut() {
                Some((last_k, last_p)) if *last_k == k => *last_p += p,
                _ => merged.push((k, p)),
            }
        }
        let sum: f64 = merged.iter().map(|&(_, p)| p).sum();
        if (sum - 1.0).abs() > LAW_TOL {
            return Err(Error::LawNotNormalized { sum });
        }
        if merged.iter().all(|&(_, p)| p <= 0.0) {
            return Err(Error::EmptySupport);
        }
        Ok(OffspringCountLaw { atoms: merged })
    }

    pub fn atoms(&self) -> &[(u64, f64)] {
        &self.atoms
    }

    /// Mean offspring `m = sum_k k p_k`.
    pub fn mean_offspring(&self) -> f64 {
        self.atoms.iter().map(|&(k, p)| k as f64 * p).sum()
    }

    /// True for the frozen law `{1: 1}`: one child always, so the
    /// population never grows and never dies.
    pub fn is_frozen(&self) -> bool {
        self.atoms
            .iter()
            .all(|&(k, p)| (k == 1 && (p - 1.0).abs() <= LAW_TOL) || p <= LAW_TOL)
            && self
                .atoms
                .iter()
                .any(|&(k, p)| k == 1 && (p - 1.0).abs() <= LAW_TOL)
    }
}

/// `f(s) = sum_k p_k s^k` for `s` in `[0, 1]`.
pub fn generating_function(law: &OffspringCountLaw, s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::OutOfUnitInterval { value: s });
    }
    Ok(law
        .atoms()
        .iter()
        .map(|&(k, p)| p * s.powi(k.min(i32::MAX as u64) as i32))
        .sum())
}

/// The `n`-fold composition `f_n(s)`; `n = 0` is the identity.
pub fn iterate_generating_function(law: &OffspringCountLaw, n: usize, s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::OutOfUnitInterval { value: s });
    }
    let mut value = s;
    for _ in 0..n {
        value = generating_function(law, value)?;
    }
    Ok(value)
}

/// Extinction probability together with the degeneracy marker for the
/// frozen law `{1: 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extinction {
    pub probability: f64,
    /// Set for `{1: 1}`: the fixed-point characterization breaks down
    /// (every `s` is a fixed point) but the population trivially survives.
    pub degenerate: bool,
}

/// Extinction probability of the law.
///
/// `m <= 1` gives certain extinction except for the frozen law; `m > 1`
/// gives the unique root of `f(s) = s` in `[0, 1)`, found by bisection on
/// `[0, 1 - EXTINCTION_GUARD]` to within [`EXTINCTION_TOL`]. The bracket is
/// valid because `f(0) = p_0 >= 0` and `f(s) < s` just below 1 in the
/// supercritical case.
pub fn extinction_probability(law: &OffspringCountLaw) -> Extinction {
    if law.is_frozen() {
        return Extinction {
            probability: 0.0,
            degenerate: true,
        };
    }
    if law.mean_offspring() <= 1.0 {
        return Extinction {
            probability: 1.0,
            degenerate: false,
        };
    }
    let g = |s: f64| generating_function(law, s).expect("s stays in [0,1]") - s;
    let mut lo = 0.0f64;
    let mut hi = 1.0 - EXTINCTION_GUARD;
    debug_assert!(g(lo) >= 0.0);
    if g(hi) >= 0.0 {
        // The root is pinched against 1 - guard; report the endpoint.
        return Extinction {
            probability: hi,
            degenerate: false,
        };
    }
    while hi - lo > EXTINCTION_TOL {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Extinction {
        probability: 0.5 * (lo + hi),
        degenerate: false,
    }
}

/// One simulated population trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GWTrajectory {
    counts: Vec<u64>,
    seed: u64,
}

impl GWTrajectory {
    /// `counts()[n]` is `Z_n`; `counts()[0] == 1`.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn depth(&self) -> usize {
        self.counts.len() - 1
    }

    /// True once the absorbing state 0 has been reached.
    pub fn is_extinct(&self) -> bool {
        *self.counts.last().expect("Z_0 always present") == 0
    }
}

/// Advance a population of `z` individuals by one generation: draw the
/// multinomial split of `z` over the atoms and sum `k * n_k`. Overflow of
/// the u64 population trips a numeric guard.
pub(crate) fn step_population<R: Rng + ?Sized>(
    law: &OffspringCountLaw,
    z: u64,
    rng: &mut R,
) -> Result<u64> {
    let probs: Vec<f64> = law.atoms().iter().map(|&(_, p)| p).collect();
    let split = crate::rng::multinomial_split(z, &probs, rng);
    let mut next: u64 = 0;
    for (&(k, _), drawn) in law.atoms().iter().zip(split) {
        let children = drawn
            .checked_mul(k)
            .ok_or(Error::CountOverflow { limit_log2: 63 })?;
        next = next
            .checked_add(children)
            .ok_or(Error::CountOverflow { limit_log2: 63 })?;
    }
    Ok(next)
}

/// Simulate `Z_0, ..., Z_depth` on the deterministic stream addressed by
/// `seed`. The zero state is absorbing.
pub fn simulate_gw(law: &OffspringCountLaw, depth: usize, seed: u64) -> Result<GWTrajectory> {
    let mut rng = trial_rng(seed, 0);
    let mut counts = Vec::with_capacity(depth + 1);
    let mut z: u64 = 1;
    counts.push(z);
    for _ in 0..depth {
        if z > 0 {
            z = step_population(law, z, &mut rng)?;
        }
        counts.push(z);
    }
    Ok(GWTrajectory { counts, seed })
}

/// The martingale normalization `W_n = Z_n / m^n` of a trajectory; only
/// meaningful in the supercritical case, so `m <= 1` is rejected.
pub fn martingale_sequence(traj: &GWTrajectory, mean_offspring: f64) -> Result<Vec<f64>> {
    if mean_offspring <= 1.0 {
        return Err(Error::NotSupercritical {
            mean: mean_offspring,
        });
    }
    let mut scale = 1.0f64;
    Ok(traj
        .counts()
        .iter()
        .map(|&z| {
            let w = z as f64 / scale;
            scale *= mean_offspring;
            w
        })
        .collect())
}

/// Fraction of `trials` trajectories extinct by `depth`; trial `t` runs on
/// its own stream derived from `master_seed`, so the estimate is
/// reproducible and independent of scheduling.
pub fn extinction_frequency(
    law: &OffspringCountLaw,
    depth: usize,
    trials: u64,
    master_seed: u64,
) -> Result<f64> {
    let extinct = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(master_seed, t);
            let mut z: u64 = 1;
            for _ in 0..depth {
                if z == 0 {
                    break;
                }
                z = step_population(law, z, &mut rng)?;
            }
            Ok(u64::from(z == 0))
        })
        .collect::<Result<Vec<u64>>>()?
        .iter()
        .sum::<u64>();
    Ok(extinct as f64 / trials as f64)
}
