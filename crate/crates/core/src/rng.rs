//! Deterministic random-number streams.
//!
//! Every Monte Carlo routine in this crate draws from a `ChaCha8` generator.
//! ChaCha is a counter-based stream cipher: a (seed, stream) pair addresses a
//! keystream, and distinct stream ids yield independent, non-overlapping
//! streams by construction. The derivation scheme is:
//!
//! ```text
//! trial t of phase p  ->  ChaCha8Rng::seed_from_u64(master_seed)
//!                         .set_stream(p * 2^40 + t)
//! ```
//!
//! Phases separate independent stages of one experiment (e.g. histogram
//! evolution vs. line sampling) so that changing the trial count of one
//! stage never perturbs another. With `t < 2^40` and `p < 2^24` no two
//! (phase, trial) pairs collide, which comfortably covers the guaranteed
//! collision-free range of 2^32 trials.
//!
//! Trials can therefore run in parallel and in any order: trial `t` always
//! sees the same stream, and results are aggregated in trial order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Width of the trial field inside the stream id.
const TRIAL_BITS: u32 = 40;

/// A deterministic generator for one (phase, trial) cell of an experiment.
pub fn stream_rng(master_seed: u64, phase: u64, trial: u64) -> ChaCha8Rng {
    debug_assert!(trial < (1 << TRIAL_BITS), "trial id exceeds stream field");
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((phase << TRIAL_BITS) | trial);
    rng
}

/// Shorthand for single-phase experiments.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    stream_rng(master_seed, 0, trial)
}

/// Split `n` individuals over atoms with the given probabilities by drawing
/// the exact multinomial via sequential conditional binomials. This is
/// distributionally identical to drawing `n` independent categorical samples
/// and counting, but costs one binomial draw per atom.
pub(crate) fn multinomial_split<R: rand::Rng + ?Sized>(
    n: u64,
    probs: &[f64],
    rng: &mut R,
) -> Vec<u64> {
    use rand_distr::{Binomial, Distribution};
    let mut out = vec![0u64; probs.len()];
    let last_charged = probs.iter().rposition(|&p| p > 0.0);
    let mut remaining = n;
    let mut prob_left = 1.0f64;
    for (i, (slot, &p)) in out.iter_mut().zip(probs).enumerate() {
        if remaining == 0 {
            break;
        }
        if p <= 0.0 {
            continue;
        }
        // Conditional probability of this atom among the unassigned
        // individuals; floating residue can push the ratio past 1. The last
        // charged atom is degenerate by construction and takes the rest,
        // keeping the split an exact partition of n.
        let q = (p / prob_left).clamp(0.0, 1.0);
        let drawn = if q >= 1.0 || Some(i) == last_charged {
            remaining
        } else {
            Binomial::new(remaining, q)
                .expect("q lies in [0,1]")
                .sample(rng)
        };
        *slot = drawn;
        remaining -= drawn;
        prob_left -= p;
        if prob_left <= 0.0 {
            break;
        }
    }
    out
}

/// Draw an index from a finite distribution given by cumulative weights.
///
/// The table stores the running sums of the atom probabilities; sampling is
/// one uniform draw plus a binary search, so it is cheap enough for the
/// per-line hot paths.
#[derive(Debug, Clone)]
pub struct CategoricalSampler {
    cumulative: Vec<f64>,
}

impl CategoricalSampler {
    /// Build from nonnegative weights with positive total mass. The weights
    /// need not be normalized.
    pub fn new(weights: &[f64]) -> Self {
        debug_assert!(!weights.is_empty());
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in weights {
            debug_assert!(w >= 0.0 && w.is_finite());
            acc += w;
            cumulative.push(acc);
        }
        debug_assert!(acc > 0.0, "total weight must be positive");
        CategoricalSampler { cumulative }
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("nonempty table");
        let u: f64 = rng.gen::<f64>() * total;
        // partition_point returns the first index whose cumulative weight
        // exceeds u; the final clamp guards the u == total edge.
        let idx = self.cumulative.partition_point(|&c| c <= u);
        idx.min(self.cumulative.len() - 1)
    }
}
