//! Colored branching processes.
//!
//! Each individual carries a color from `{1, ..., r}` and independently
//! gives birth to a *color structure* `k = (k_1, ..., k_r)`: `k_i` children
//! of color `i`, the whole vector drawn with probability `p_k`. A *line* is
//! a genetic path root -> child -> grandchild -> ...; its word is the color
//! sequence along the path and its spectrum at depth `n` is the empirical
//! color distribution of the word.
//!
//! The color expectation `mu(i) = sum_k k_i p_k` governs line counting: the
//! expected number of depth-`n` lines with word `omega` factorizes as
//!
//! ```text
//! E #{x in X_n : word(x) = omega} = mu(omega_1) * ... * mu(omega_n),
//! ```
//!
//! so `mu` plays the role of a (generally non-probability) base measure on
//! the alphabet and all large-deviation rates are Kullback actions against
//! it.
//!
//! Two simulation modes:
//!
//! * **Histogram evolution** aggregates a generation into counts keyed by
//!   the color-count vector `c` of the line words (`|c| = n`). All lines in
//!   one key are exchangeable, so one multinomial split per key advances a
//!   whole generation. Keys with at most [`StepOptions::exact_cap`] lines
//!   are split exactly; larger keys switch to a normal approximation of the
//!   same split, and the switch is recorded in [`StepMeta`]. Counts are
//!   `u128`; growth past `2^120` trips a numeric guard.
//! * **Explicit trees** keep every individual and its parent link, which
//!   block selections need because they must follow prolongations of a
//!   specific line. Explicit mode is bounded by a population cap and
//!   refuses to grow past it.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::alphabet::{MeasureVec, TVNeighborhood, TOL_EMPIRICAL};
use crate::error::{Error, Result};
use crate::galton_watson::OffspringCountLaw;
use crate::rng::{multinomial_split, CategoricalSampler};

/// Keys with at most this many lines are advanced by an exact multinomial
/// split; larger keys use the normal approximation.
pub const EXACT_DRAW_CAP: u64 = 1_000_000;

/// Histogram counts may not exceed `2^COUNT_GUARD_LOG2`.
pub const COUNT_GUARD_LOG2: u32 = 120;

const COUNT_GUARD: u128 = 1 << COUNT_GUARD_LOG2;

/// A finitely supported law on color structures `k in Z_+^r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorStructureLaw {
    r: usize,
    atoms: Vec<StructureAtom>,
}

/// One atom `(k, p_k)` of a color structure law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureAtom {
    pub counts: Vec<u64>,
    pub prob: f64,
}

impl ColorStructureLaw {
    /// Build from `(k, p_k)` pairs over `r` colors; probabilities must be
    /// nonnegative and sum to 1 within the offspring-law tolerance.
    pub fn new(r: usize, atoms: Vec<(Vec<u64>, f64)>) -> Result<Self> {
        if r == 0 {
            return Err(Error::EmptyAlphabet);
        }
        if atoms.is_empty() {
            return Err(Error::EmptySupport);
        }
        for (index, (k, p)) in atoms.iter().enumerate() {
            if k.len() != r {
                return Err(Error::DimensionMismatch {
                    expected: r,
                    actual: k.len(),
                });
            }
            if !p.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if *p < 0.0 {
                return Err(Error::NegativeEntry { index, value: *p });
            }
        }
        let sum: f64 = atoms.iter().map(|(_, p)| p).sum();
        if (sum - 1.0).abs() > crate::galton_watson::LAW_TOL {
            return Err(Error::LawNotNormalized { sum });
        }
        if atoms.iter().all(|(_, p)| *p <= 0.0) {
            return Err(Error::EmptySupport);
        }
        Ok(ColorStructureLaw {
            r,
            atoms: atoms
                .into_iter()
                .map(|(counts, prob)| StructureAtom { counts, prob })
                .collect(),
        })
    }

    pub fn colors(&self) -> usize {
        self.r
    }

    pub fn atoms(&self) -> &[StructureAtom] {
        &self.atoms
    }

    /// The color expectation `mu(i) = sum_k k_i p_k`.
    pub fn color_expectation(&self) -> ColorExpectation {
        let mut mu = vec![0.0f64; self.r];
        for atom in &self.atoms {
            for (slot, &k) in mu.iter_mut().zip(&atom.counts) {
                *slot += k as f64 * atom.prob;
            }
        }
        ColorExpectation {
            mu: MeasureVec::new(mu).expect("expectations are finite and nonnegative"),
        }
    }

    /// The law of the total number of children `|k| = k_1 + ... + k_r`,
    /// which drives survival of the whole population.
    pub fn total_offspring_law(&self) -> OffspringCountLaw {
        let atoms: Vec<(u64, f64)> = self
            .atoms
            .iter()
            .map(|a| (a.counts.iter().sum(), a.prob))
            .collect();
        OffspringCountLaw::new(atoms).expect("a valid structure law projects to a valid count law")
    }

    /// Largest possible number of children in one birth.
    pub fn max_total_children(&self) -> u64 {
        self.atoms
            .iter()
            .map(|a| a.counts.iter().sum())
            .max()
            .unwrap_or(0)
    }
}

/// The color expectation vector of a structure law, used as the base
/// measure of every counting rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorExpectation {
    mu: MeasureVec,
}

impl ColorExpectation {
    pub fn new(mu: MeasureVec) -> Self {
        ColorExpectation { mu }
    }

    pub fn as_measure(&self) -> &MeasureVec {
        &self.mu
    }
}

/// Expected number of depth-`n` lines carrying the word `omega` (colors are
/// zero-based indices): the product `mu(omega_1) ... mu(omega_n)`.
pub fn expected_line_count(mu: &ColorExpectation, word: &[usize]) -> Result<f64> {
    if word.is_empty() {
        return Err(Error::EmptyWord);
    }
    let m = mu.as_measure();
    let mut product = 1.0f64;
    for &color in word {
        if color >= m.dim() {
            return Err(Error::DimensionMismatch {
                expected: m.dim(),
                actual: color,
            });
        }
        product *= m.weight(color);
    }
    Ok(product)
}

/// A generation of lines aggregated by the color-count vector of their
/// words: key `c` holds the number of depth-`n` lines whose word contains
/// `c_i` occurrences of color `i` (so `|c| = n`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationHistogram {
    r: usize,
    depth: usize,
    counts: BTreeMap<Vec<u64>, u128>,
}

impl GenerationHistogram {
    /// The depth-0 histogram: one empty line (the root) at the zero key.
    pub fn root(r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::EmptyAlphabet);
        }
        let mut counts = BTreeMap::new();
        counts.insert(vec![0u64; r], 1u128);
        Ok(GenerationHistogram {
            r,
            depth: 0,
            counts,
        })
    }

    /// Build from explicit counts; every key must have `|c| = depth`.
    pub fn from_counts(r: usize, depth: usize, counts: BTreeMap<Vec<u64>, u128>) -> Result<Self> {
        if r == 0 {
            return Err(Error::EmptyAlphabet);
        }
        for key in counts.keys() {
            if key.len() != r {
                return Err(Error::DimensionMismatch {
                    expected: r,
                    actual: key.len(),
                });
            }
            let total: u64 = key.iter().sum();
            if total as usize != depth {
                return Err(Error::DepthBeyondLine {
                    requested: total as usize,
                    available: depth,
                });
            }
        }
        Ok(GenerationHistogram { r, depth, counts })
    }

    pub fn colors(&self) -> usize {
        self.r
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn counts(&self) -> &BTreeMap<Vec<u64>, u128> {
        &self.counts
    }

    /// Total number of lines in the generation.
    pub fn total(&self) -> u128 {
        self.counts.values().sum()
    }

    pub fn is_extinct(&self) -> bool {
        self.total() == 0
    }

    /// Restrict to keys whose spectrum lies in the neighborhood; depth and
    /// alphabet are preserved.
    pub fn filter_by_spectrum(&self, nbhd: &TVNeighborhood) -> Result<GenerationHistogram> {
        if self.depth == 0 {
            return Err(Error::ZeroDepth);
        }
        let mut kept = BTreeMap::new();
        for (key, &count) in &self.counts {
            if count == 0 {
                continue;
            }
            let spectrum = spectrum_of_key(key, self.depth)?;
            if nbhd.contains(&spectrum) {
                kept.insert(key.clone(), count);
            }
        }
        Ok(GenerationHistogram {
            r: self.r,
            depth: self.depth,
            counts: kept,
        })
    }

    /// CSV snapshot with columns `c_1, ..., c_r, count`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.r).map(|i| format!("c_{i}")).collect();
        writeln!(out, "{},count", header.join(","))?;
        for (key, count) in &self.counts {
            let cells: Vec<String> = key.iter().map(|c| c.to_string()).collect();
            writeln!(out, "{},{count}", cells.join(","))?;
        }
        Ok(())
    }
}

/// The spectrum `c / n` of a color-count key at depth `n`.
pub fn spectrum_of_key(key: &[u64], depth: usize) -> Result<MeasureVec> {
    if depth == 0 {
        return Err(Error::ZeroDepth);
    }
    MeasureVec::new(key.iter().map(|&c| c as f64 / depth as f64).collect())
}

/// Number of lines in the generation whose spectrum lies in the
/// neighborhood.
pub fn count_lines_in_neighborhood(h: &GenerationHistogram, nbhd: &TVNeighborhood) -> Result<u128> {
    Ok(h.filter_by_spectrum(nbhd)?.total())
}

/// Controls for one histogram step.
#[derive(Debug, Clone, Copy)]
pub struct StepOptions {
    /// Per-key threshold between the exact multinomial split and its normal
    /// approximation.
    pub exact_cap: u64,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions {
            exact_cap: EXACT_DRAW_CAP,
        }
    }
}

/// Record of which sampling regime each key used, accumulated over an
/// evolution and echoed into experiment metadata.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepMeta {
    pub exact_keys: u64,
    pub approx_keys: u64,
    pub exact_cap: u64,
}

impl StepMeta {
    pub fn absorb(&mut self, other: &StepMeta) {
        self.exact_keys += other.exact_keys;
        self.approx_keys += other.approx_keys;
        self.exact_cap = other.exact_cap;
    }
}

/// Advance a generation histogram by one level.
///
/// Per key, the split of its lines over the structure atoms is drawn from
/// the exact multinomial when the key holds at most `opts.exact_cap` lines,
/// and from a sequential normal approximation of the same multinomial
/// above the cap (degenerate splits are exact in both regimes). Children
/// are then routed: `n_a` lines drawing atom `a` put `n_a * k_i` lines on
/// the key `c + e_i`.
pub fn step_generation<R: Rng + ?Sized>(
    h: &GenerationHistogram,
    law: &ColorStructureLaw,
    rng: &mut R,
    opts: &StepOptions,
) -> Result<(GenerationHistogram, StepMeta)> {
    if law.colors() != h.colors() {
        return Err(Error::DimensionMismatch {
            expected: h.colors(),
            actual: law.colors(),
        });
    }
    let r = h.colors();
    let probs: Vec<f64> = law.atoms().iter().map(|a| a.prob).collect();
    let mut next: BTreeMap<Vec<u64>, u128> = BTreeMap::new();
    let mut meta = StepMeta {
        exact_keys: 0,
        approx_keys: 0,
        exact_cap: opts.exact_cap,
    };

    for (key, &count) in h.counts() {
        if count == 0 {
            continue;
        }
        let split: Vec<u128> = if count <= opts.exact_cap as u128 {
            meta.exact_keys += 1;
            multinomial_split(count as u64, &probs, rng)
                .into_iter()
                .map(u128::from)
                .collect()
        } else {
            meta.approx_keys += 1;
            normal_multinomial_split(count, &probs, rng)
        };

        // Children of this key: lines drawing atom a contribute
        // split[a] * k_i lines of color i, landing on key + e_i.
        let mut children = vec![0u128; r];
        for (atom, &n_a) in law.atoms().iter().zip(&split) {
            if n_a == 0 {
                continue;
            }
            for (slot, &k) in children.iter_mut().zip(&atom.counts) {
                if k == 0 {
                    continue;
                }
                let add = n_a
                    .checked_mul(u128::from(k))
                    .filter(|&v| v < COUNT_GUARD)
                    .ok_or(Error::CountOverflow {
                        limit_log2: COUNT_GUARD_LOG2,
                    })?;
                *slot = slot.checked_add(add).filter(|&v| v < COUNT_GUARD).ok_or(
                    Error::CountOverflow {
                        limit_log2: COUNT_GUARD_LOG2,
                    },
                )?;
            }
        }
        for (i, &added) in children.iter().enumerate() {
            if added == 0 {
                continue;
            }
            let mut child_key = key.clone();
            child_key[i] += 1;
            let slot = next.entry(child_key).or_insert(0);
            *slot = slot.checked_add(added).filter(|&v| v < COUNT_GUARD).ok_or(
                Error::CountOverflow {
                    limit_log2: COUNT_GUARD_LOG2,
                },
            )?;
        }
    }

    Ok((
        GenerationHistogram {
            r,
            depth: h.depth() + 1,
            counts: next,
        },
        meta,
    ))
}

/// Sequential normal approximation of the multinomial split for keys above
/// the exact cap. Tracks the integer remainder so the split still sums to
/// the line count; degenerate conditionals are assigned without noise.
fn normal_multinomial_split<R: Rng + ?Sized>(count: u128, probs: &[f64], rng: &mut R) -> Vec<u128> {
    let mut out = vec![0u128; probs.len()];
    let last_charged = probs.iter().rposition(|&p| p > 0.0);
    let mut remaining = count;
    let mut prob_left = 1.0f64;
    for (i, (slot, &p)) in out.iter_mut().zip(probs).enumerate() {
        if remaining == 0 {
            break;
        }
        if p <= 0.0 {
            continue;
        }
        // The last charged atom takes the remainder, so the split always
        // partitions the key's line count exactly.
        let q = (p / prob_left).clamp(0.0, 1.0);
        let drawn = if q >= 1.0 || Some(i) == last_charged {
            remaining
        } else {
            let n_f = remaining as f64;
            let mean = n_f * q;
            let sd = (n_f * q * (1.0 - q)).sqrt();
            let z: f64 = rng.sample(StandardNormal);
            let x = (mean + z * sd).round();
            if x <= 0.0 {
                0
            } else if x >= remaining as f64 {
                remaining
            } else {
                x as u128
            }
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

/// A histogram evolution: one histogram per depth `0..=depth` plus the
/// accumulated sampling metadata.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub histograms: Vec<GenerationHistogram>,
    pub meta: StepMeta,
}

impl Evolution {
    pub fn last(&self) -> &GenerationHistogram {
        self.histograms.last().expect("depth 0 always present")
    }

    /// Population totals per depth.
    pub fn totals(&self) -> Vec<u128> {
        self.histograms.iter().map(|h| h.total()).collect()
    }
}

/// Evolve the histogram from the root to `depth` levels.
pub fn evolve_histograms<R: Rng + ?Sized>(
    law: &ColorStructureLaw,
    depth: usize,
    rng: &mut R,
    opts: &StepOptions,
) -> Result<Evolution> {
    let mut histograms = Vec::with_capacity(depth + 1);
    let mut meta = StepMeta {
        exact_cap: opts.exact_cap,
        ..StepMeta::default()
    };
    histograms.push(GenerationHistogram::root(law.colors())?);
    for _ in 0..depth {
        let (next, step_meta) = step_generation(histograms.last().unwrap(), law, rng, opts)?;
        meta.absorb(&step_meta);
        histograms.push(next);
    }
    Ok(Evolution { histograms, meta })
}

/// A line sampled color by color, carrying its sampling provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledLine {
    pub colors: Vec<usize>,
    pub provenance: String,
}

/// Sample a line of `n` iid colors from the probability vector `nu` on the
/// stream addressed by `seed`.
pub fn sample_bernoulli_line(nu: &MeasureVec, n: usize, seed: u64) -> Result<SampledLine> {
    if n == 0 {
        return Err(Error::ZeroDepth);
    }
    if !nu.is_probability_within(TOL_EMPIRICAL) {
        return Err(Error::NotProbability {
            sum: nu.total_mass(),
        });
    }
    let sampler = CategoricalSampler::new(nu.weights());
    let mut rng = crate::rng::trial_rng(seed, 0);
    let colors: Vec<usize> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
    Ok(SampledLine {
        colors,
        provenance: format!("bernoulli(seed={seed})"),
    })
}

/// One individual of an explicit tree: parent index in the previous
/// generation plus its own color.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeNode {
    pub parent: u32,
    pub color: u8,
}

/// An explicitly stored branching tree: generation `d` holds every line of
/// depth `d` as an individual with a parent link, so prolongations of a
/// specific line can be enumerated.
#[derive(Debug, Clone)]
pub struct ExplicitTree {
    r: usize,
    generations: Vec<Vec<TreeNode>>,
}

/// Default population bound for explicit trees.
pub const EXPLICIT_POPULATION_CAP: usize = 1_000_000;

impl ExplicitTree {
    /// Simulate down to `depth` generations, refusing to grow any
    /// generation past `max_population` individuals.
    pub fn simulate<R: Rng + ?Sized>(
        law: &ColorStructureLaw,
        depth: usize,
        rng: &mut R,
        max_population: usize,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(Error::ZeroDepth);
        }
        if law.colors() > u8::MAX as usize + 1 {
            return Err(Error::DimensionMismatch {
                expected: u8::MAX as usize + 1,
                actual: law.colors(),
            });
        }
        let sampler =
            CategoricalSampler::new(&law.atoms().iter().map(|a| a.prob).collect::<Vec<_>>());
        let mut generations: Vec<Vec<TreeNode>> = Vec::with_capacity(depth);
        // Generation 1: children of the root, which has index 0 by
        // convention.
        let mut current: Vec<TreeNode> = Vec::new();
        {
            let atom = &law.atoms()[sampler.sample(rng)];
            for (color, &k) in atom.counts.iter().enumerate() {
                for _ in 0..k {
                    current.push(TreeNode {
                        parent: 0,
                        color: color as u8,
                    });
                }
            }
        }
        if current.len() > max_population {
            return Err(Error::PopulationCap {
                population: current.len(),
                cap: max_population,
            });
        }
        generations.push(current);
        for _ in 1..depth {
            let previous = generations.last().unwrap();
            let mut next: Vec<TreeNode> = Vec::new();
            for (idx, _) in previous.iter().enumerate() {
                let atom = &law.atoms()[sampler.sample(rng)];
                for (color, &k) in atom.counts.iter().enumerate() {
                    for _ in 0..k {
                        next.push(TreeNode {
                            parent: idx as u32,
                            color: color as u8,
                        });
                    }
                }
                if next.len() > max_population {
                    return Err(Error::PopulationCap {
                        population: next.len(),
                        cap: max_population,
                    });
                }
            }
            generations.push(next);
        }
        Ok(ExplicitTree {
            r: law.colors(),
            generations,
        })
    }

    pub fn colors(&self) -> usize {
        self.r
    }

    /// Number of simulated generations.
    pub fn depth(&self) -> usize {
        self.generations.len()
    }

    /// Individuals of generation `d` (1-based, matching line depth).
    pub fn generation(&self, d: usize) -> &[TreeNode] {
        &self.generations[d - 1]
    }

    pub fn population(&self, d: usize) -> usize {
        self.generation(d).len()
    }

    pub fn total_nodes(&self) -> usize {
        self.generations.iter().map(|g| g.len()).sum()
    }

    /// Index of the ancestor of node `idx` (at generation `d`) living
    /// `steps` generations earlier.
    pub fn ancestor(&self, d: usize, idx: usize, steps: usize) -> usize {
        let mut gen = d;
        let mut node = idx;
        for _ in 0..steps {
            node = self.generation(gen)[node].parent as usize;
            gen -= 1;
        }
        node
    }

    /// Colors along the line from the root down to node `idx` of
    /// generation `d` (oldest first).
    pub fn line_colors(&self, d: usize, idx: usize) -> Vec<u8> {
        let mut colors = Vec::with_capacity(d);
        let mut gen = d;
        let mut node = idx;
        while gen >= 1 {
            colors.push(self.generation(gen)[node].color);
            node = self.generation(gen)[node].parent as usize;
            if gen == 1 {
                break;
            }
            gen -= 1;
        }
        colors.reverse();
        colors
    }

    /// Color counts of the trailing `len` colors of the line ending at
    /// node `idx` of generation `d`.
    pub fn trailing_counts(&self, d: usize, idx: usize, len: usize) -> Vec<u64> {
        let mut counts = vec![0u64; self.r];
        let mut gen = d;
        let mut node = idx;
        for _ in 0..len {
            counts[self.generation(gen)[node].color as usize] += 1;
            node = self.generation(gen)[node].parent as usize;
            gen -= 1;
        }
        counts
    }
}
