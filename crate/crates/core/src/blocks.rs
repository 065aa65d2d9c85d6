//! Block selections and steered line sampling.
//!
//! Fix a block order `N` and cut every line of an explicit tree into
//! consecutive blocks of `N` colors. A *block selection* keeps, level by
//! level, the lines all of whose blocks have spectrum inside a prescribed
//! neighborhood, pruned to the unique maximal family in which every
//! non-leaf member keeps at least `l` qualifying prolongations. With
//! `l = ceil(e^{N(-rho(nu,mu)-eps)})` a nonempty selection certifies an
//! entire subtree of lines tracking `nu`, and the probability of
//! nonemptiness approaches the survival probability `1 - q*`.
//!
//! The *choice law* steers block averages: around a cube center, commanded
//! vertices sit at `center_j +/- half_width` in the first `r - 1`
//! coordinates, and each next block is required to land its spectrum near
//! the vertex on the opposite side of the running average's deviation.
//! If every delivered block stays within `half_width` of its commanded
//! vertex, the running average obeys the deterministic decay
//! `|avg_n - center| < 2 half_width / n` in every cube coordinate (the
//! first `r - 1` simplex coordinates), whatever the adversary does inside
//! the balls; the dependent last coordinate converges at the summed rate.
//!
//! The *steered sampler* combines the two: it grows a fresh local
//! depth-`N` subtree from the current line end, picks a prolongation whose
//! block spectrum lies in the commanded vertex ball, and backtracks
//! depth-first (never resampling an already-grown subtree) when a branch
//! dies out. The result is a line whose empirical spectrum converges to
//! the cube center at rate `2 half_width / n`.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alphabet::{MeasureVec, TVNeighborhood, TOL_EMPIRICAL};
use crate::branching::{
    spectrum_of_key, ColorStructureLaw, ExplicitTree, SampledLine, EXPLICIT_POPULATION_CAP,
};
use crate::error::{Error, Result};
use crate::galton_watson::extinction_probability;
use crate::rate::kullback_action;
use crate::rng::{stream_rng, trial_rng};

/// Explicit-mode total depth cap `levels * order`.
pub const DEPTH_CAP: usize = 10_000;

/// Node budget for one steered line (all subtrees, including backtracked
/// ones).
pub const STEER_NODE_BUDGET: u64 = 64_000_000;

/// Node budget for one lazy selection trial.
pub const TRIAL_NODE_BUDGET: u64 = 4_000_000;

/// Tolerance for vertex coordinates at the simplex boundary.
const VERTEX_TOL: f64 = 1e-12;

/// One selected block sequence endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockNode {
    /// Individual index at tree generation `level * order`.
    pub tree_index: u32,
    /// Position of the parent sequence in the previous level (0 for the
    /// first level, whose parent is the root).
    pub parent: u32,
    /// Bit `i` set when this block's spectrum lies in neighborhood `i`.
    pub ball_mask: u32,
}

/// A selection of block sequences: level `k` holds the surviving sequences
/// of `k` blocks, each a tree node at depth `k * order` with a parent link
/// into level `k - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockTree {
    order: usize,
    ball_count: usize,
    levels: Vec<Vec<BlockNode>>,
}

impl BlockTree {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn ball_count(&self) -> usize {
        self.ball_count
    }

    pub fn levels(&self) -> &[Vec<BlockNode>] {
        &self.levels
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.len()).collect()
    }

    /// True when nothing survived; pruning leaves either every level
    /// inhabited or all of them empty.
    pub fn is_empty(&self) -> bool {
        self.levels.iter().all(|l| l.is_empty())
    }

    /// Per-neighborhood prolongation counts of one sequence.
    pub fn prolongation_counts(&self, level: usize, pos: usize) -> Vec<u64> {
        let mut counts = vec![0u64; self.ball_count];
        if level + 1 >= self.levels.len() {
            return counts;
        }
        for child in &self.levels[level + 1] {
            if child.parent as usize != pos {
                continue;
            }
            for (i, slot) in counts.iter_mut().enumerate() {
                if child.ball_mask >> i & 1 == 1 {
                    *slot += 1;
                }
            }
        }
        counts
    }

    /// The maximal sub-selection in which every non-leaf sequence keeps at
    /// least `thresholds[i]` prolongations into neighborhood `i`, for
    /// every `i`.
    pub fn pruned(&self, thresholds: &[u64]) -> Result<BlockTree> {
        if thresholds.len() != self.ball_count {
            return Err(Error::DimensionMismatch {
                expected: self.ball_count,
                actual: thresholds.len(),
            });
        }
        let mut pruned = self.clone();
        prune_levels(&mut pruned.levels, thresholds);
        Ok(pruned)
    }
}

/// Prune to the greatest family satisfying both constraints.
///
/// One backward sweep enforces the branching condition against the already
/// pruned next level, then one forward sweep removes orphans. The result
/// is the greatest fixpoint: by downward induction the backward sweep
/// never removes a node of any valid sub-family, the orphan sweep only
/// removes children of removed nodes, and the output itself satisfies both
/// conditions.
fn prune_levels(levels: &mut [Vec<BlockNode>], thresholds: &[u64]) {
    let depth = levels.len();
    if depth == 0 {
        return;
    }
    let ball_count = thresholds.len();
    let mut keep: Vec<Vec<bool>> = levels.iter().map(|l| vec![true; l.len()]).collect();

    // Backward: branching condition against the pruned next level.
    for j in (0..depth - 1).rev() {
        let mut counts = vec![vec![0u64; ball_count]; levels[j].len()];
        for (cpos, child) in levels[j + 1].iter().enumerate() {
            if !keep[j + 1][cpos] {
                continue;
            }
            let slot = &mut counts[child.parent as usize];
            for (i, s) in slot.iter_mut().enumerate() {
                if child.ball_mask >> i & 1 == 1 {
                    *s += 1;
                }
            }
        }
        for (pos, c) in counts.iter().enumerate() {
            if c.iter().zip(thresholds).any(|(&have, &need)| have < need) {
                keep[j][pos] = false;
            }
        }
    }

    // Forward: drop orphans of removed parents (cascades level by level).
    for j in 1..depth {
        for pos in 0..levels[j].len() {
            if keep[j][pos] && !keep[j - 1][levels[j][pos].parent as usize] {
                keep[j][pos] = false;
            }
        }
    }

    // Compact, remapping parent positions.
    let mut remap_prev: Vec<u32> = Vec::new();
    for j in 0..depth {
        let mut remap: Vec<u32> = vec![u32::MAX; levels[j].len()];
        let mut next_level: Vec<BlockNode> = Vec::new();
        for (pos, node) in levels[j].iter().enumerate() {
            if !keep[j][pos] {
                continue;
            }
            let mut node = *node;
            if j > 0 {
                node.parent = remap_prev[node.parent as usize];
            }
            remap[pos] = next_level.len() as u32;
            next_level.push(node);
        }
        levels[j] = next_level;
        remap_prev = remap;
    }
}

/// All block sequences of the tree whose every block spectrum lies in at
/// least one of the neighborhoods (parent-closed, no branching condition
/// yet).
pub fn initial_block_selection(
    tree: &ExplicitTree,
    order: usize,
    nbhds: &[TVNeighborhood],
) -> Result<BlockTree> {
    if order == 0 {
        return Err(Error::ZeroDepth);
    }
    if !tree.depth().is_multiple_of(order) {
        return Err(Error::DepthNotDivisible {
            depth: tree.depth(),
            order,
        });
    }
    if nbhds.is_empty() || nbhds.len() > 32 {
        return Err(Error::DimensionMismatch {
            expected: 32,
            actual: nbhds.len(),
        });
    }
    for nbhd in nbhds {
        if nbhd.center().dim() != tree.colors() {
            return Err(Error::DimensionMismatch {
                expected: tree.colors(),
                actual: nbhd.center().dim(),
            });
        }
    }
    let level_count = tree.depth() / order;
    let mut levels: Vec<Vec<BlockNode>> = Vec::with_capacity(level_count);
    // Position of each selected tree node within its level, by tree index;
    // u32::MAX marks unselected nodes.
    let mut prev_pos: Vec<u32> = vec![0];
    for level in 1..=level_count {
        let gen = level * order;
        let mut nodes: Vec<BlockNode> = Vec::new();
        let mut pos: Vec<u32> = vec![u32::MAX; tree.population(gen)];
        for (idx, slot) in pos.iter_mut().enumerate() {
            let parent_tree_index = tree.ancestor(gen, idx, order);
            let parent = if level == 1 {
                0
            } else {
                let p = prev_pos[parent_tree_index];
                if p == u32::MAX {
                    continue;
                }
                p
            };
            let counts = tree.trailing_counts(gen, idx, order);
            let spectrum = spectrum_of_key(&counts, order)?;
            let mut mask = 0u32;
            for (i, nbhd) in nbhds.iter().enumerate() {
                if nbhd.contains(&spectrum) {
                    mask |= 1 << i;
                }
            }
            if mask == 0 {
                continue;
            }
            *slot = nodes.len() as u32;
            nodes.push(BlockNode {
                tree_index: idx as u32,
                parent,
                ball_mask: mask,
            });
        }
        levels.push(nodes);
        prev_pos = pos;
    }
    Ok(BlockTree {
        order,
        ball_count: nbhds.len(),
        levels,
    })
}

/// The unique maximal block selection of order `order` in which every
/// block spectrum lies in `nbhd` and every non-leaf sequence keeps at
/// least `l` prolongations. Thresholds below 1 act as 1-free (the
/// parent-closed initial selection).
pub fn maximal_block_selection(
    tree: &ExplicitTree,
    order: usize,
    nbhd: &TVNeighborhood,
    l: u64,
) -> Result<BlockTree> {
    maximal_block_selection_multi(tree, order, std::slice::from_ref(nbhd), &[l])
}

/// Multi-neighborhood variant: every block spectrum must lie in at least
/// one neighborhood, and every non-leaf sequence keeps at least `ls[i]`
/// prolongations into neighborhood `i`, for every `i` simultaneously.
pub fn maximal_block_selection_multi(
    tree: &ExplicitTree,
    order: usize,
    nbhds: &[TVNeighborhood],
    ls: &[u64],
) -> Result<BlockTree> {
    if ls.len() != nbhds.len() {
        return Err(Error::DimensionMismatch {
            expected: nbhds.len(),
            actual: ls.len(),
        });
    }
    let mut bt = initial_block_selection(tree, order, nbhds)?;
    prune_levels(&mut bt.levels, ls);
    Ok(bt)
}

/// The prolongation threshold `ceil(e^{order (-rho(nu,mu) - epsilon)})`,
/// at least 1. An infinite action gives the trivial threshold 1.
pub fn prolongation_threshold(
    nu: &MeasureVec,
    mu: &MeasureVec,
    order: usize,
    epsilon: f64,
) -> Result<u64> {
    let rho = kullback_action(nu, mu)?;
    let exponent = order as f64 * (-rho - epsilon);
    if exponent == f64::NEG_INFINITY {
        return Ok(1);
    }
    Ok((exponent.exp().ceil() as u64).max(1))
}

/// Verdict of one selection trial at the canonical threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRateReport {
    pub order: usize,
    pub threshold: u64,
    pub rho: f64,
    pub nonempty: bool,
    pub level_sizes: Vec<usize>,
}

/// Re-prune a block selection at the threshold derived from `(nu, mu,
/// epsilon)` and report whether anything survives. Works for any sign of
/// the action: a nonnegative `rho` simply yields the trivial threshold and
/// the verdict reflects the tree alone.
pub fn selection_rate_check(
    bt: &BlockTree,
    nu: &MeasureVec,
    mu: &MeasureVec,
    epsilon: f64,
) -> Result<SelectionRateReport> {
    if bt.ball_count != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: bt.ball_count,
        });
    }
    let rho = kullback_action(nu, mu)?;
    let threshold = prolongation_threshold(nu, mu, bt.order, epsilon)?;
    let pruned = bt.pruned(&[threshold])?;
    Ok(SelectionRateReport {
        order: bt.order,
        threshold,
        rho,
        nonempty: !pruned.is_empty(),
        level_sizes: pruned.level_sizes(),
    })
}

/// Count subtree descendants at depth `order` whose block spectrum lies in
/// the ball and which recursively sustain the selection, stopping early at
/// `need`. `level` is the level these blocks live on; blocks on the last
/// level qualify by spectrum alone.
#[allow(clippy::too_many_arguments)]
fn count_rich_blocks<R: Rng + ?Sized>(
    law: &ColorStructureLaw,
    nbhd: &TVNeighborhood,
    order: usize,
    level: usize,
    total_levels: usize,
    threshold: u64,
    need: u64,
    rng: &mut R,
    nodes_left: &mut u64,
) -> Result<u64> {
    let subtree = ExplicitTree::simulate(law, order, rng, EXPLICIT_POPULATION_CAP)?;
    let used = subtree.total_nodes() as u64;
    if used > *nodes_left {
        return Err(Error::PopulationCap {
            population: used as usize,
            cap: *nodes_left as usize,
        });
    }
    *nodes_left -= used;
    let mut rich = 0u64;
    for idx in 0..subtree.population(order) {
        let counts = subtree.trailing_counts(order, idx, order);
        if !nbhd.contains(&spectrum_of_key(&counts, order)?) {
            continue;
        }
        let qualified = if level == total_levels {
            true
        } else {
            count_rich_blocks(
                law,
                nbhd,
                order,
                level + 1,
                total_levels,
                threshold,
                threshold,
                rng,
                nodes_left,
            )? >= threshold
        };
        if qualified {
            rich += 1;
            if rich >= need {
                return Ok(rich);
            }
        }
    }
    Ok(rich)
}

/// Whether a maximal selection of `levels` block levels is nonempty, grown
/// lazily: subtrees are simulated on demand and abandoned branches are
/// never revisited, so the check stays cheap even when an explicit tree of
/// depth `levels * order` would burst the population cap.
pub fn lazy_selection_nonempty<R: Rng + ?Sized>(
    law: &ColorStructureLaw,
    nbhd: &TVNeighborhood,
    order: usize,
    levels: usize,
    threshold: u64,
    rng: &mut R,
    node_budget: u64,
) -> Result<bool> {
    if order == 0 || levels == 0 {
        return Err(Error::ZeroDepth);
    }
    if levels * order > DEPTH_CAP {
        return Err(Error::DepthCap {
            depth: levels * order,
            cap: DEPTH_CAP,
        });
    }
    let mut nodes_left = node_budget;
    let rich = count_rich_blocks(
        law,
        nbhd,
        order,
        1,
        levels,
        threshold.max(1),
        1,
        rng,
        &mut nodes_left,
    )?;
    Ok(rich >= 1)
}

/// One trial of the selection rate experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionTrialRow {
    pub trial: u64,
    pub nonempty: bool,
    /// True when the trial hit a population or budget guard and was
    /// abandoned rather than decided.
    pub refused: bool,
}

/// Aggregates of the selection rate experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRateSummary {
    pub order: usize,
    pub levels: usize,
    pub threshold: u64,
    pub rho: f64,
    pub trials: u64,
    pub nonempty_trials: u64,
    pub refusals: u64,
    /// Frequency of nonempty selections among decided trials.
    pub nonempty_frequency: f64,
    /// `1 - q*` for the total offspring law.
    pub predicted_survival: f64,
}

/// Estimate the probability that a maximal selection at the canonical
/// threshold is nonempty; it approaches the survival probability
/// `1 - q*`. Trial `t` draws from stream `(phase 0, trial t)`.
#[allow(clippy::too_many_arguments)]
pub fn selection_rate_experiment(
    law: &ColorStructureLaw,
    nu: &MeasureVec,
    radius: f64,
    order: usize,
    levels: usize,
    epsilon: f64,
    trials: u64,
    master_seed: u64,
) -> Result<(Vec<SelectionTrialRow>, SelectionRateSummary)> {
    let mu = law.color_expectation();
    let rho = kullback_action(nu, mu.as_measure())?;
    let threshold = prolongation_threshold(nu, mu.as_measure(), order, epsilon)?;
    let nbhd = TVNeighborhood::new(nu.clone(), radius)?;

    let rows: Vec<SelectionTrialRow> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<SelectionTrialRow> {
            let mut rng = stream_rng(master_seed, 0, trial);
            match lazy_selection_nonempty(
                law,
                &nbhd,
                order,
                levels,
                threshold,
                &mut rng,
                TRIAL_NODE_BUDGET,
            ) {
                Ok(nonempty) => Ok(SelectionTrialRow {
                    trial,
                    nonempty,
                    refused: false,
                }),
                Err(e) if e.is_numeric_guard() => Ok(SelectionTrialRow {
                    trial,
                    nonempty: false,
                    refused: true,
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let nonempty_trials = rows.iter().filter(|r| r.nonempty).count() as u64;
    let refusals = rows.iter().filter(|r| r.refused).count() as u64;
    let decided = trials - refusals;
    let q = extinction_probability(&law.total_offspring_law()).probability;
    let summary = SelectionRateSummary {
        order,
        levels,
        threshold,
        rho,
        trials,
        nonempty_trials,
        refusals,
        nonempty_frequency: if decided == 0 {
            0.0
        } else {
            nonempty_trials as f64 / decided as f64
        },
        predicted_survival: 1.0 - q,
    };
    Ok((rows, summary))
}

/// One boosted trial: wait until the population reaches `floor`, then run
/// an independent lazy selection from each of the first `floor` ancestors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedSelectionTrial {
    pub trial: u64,
    /// Generations waited before the floor was reached; `None` when the
    /// process died or `max_wait` passed first.
    pub waited: Option<usize>,
    /// Sub-trial verdicts, one per ancestor.
    pub sub_nonempty: Vec<bool>,
    pub refusals: u64,
}

/// The restart trick: a population of `floor` ancestors gives the
/// selection `floor` independent chances, lifting its success rate from
/// `1 - q*` toward 1.
#[allow(clippy::too_many_arguments)]
pub fn boosted_selection_trial(
    law: &ColorStructureLaw,
    nu: &MeasureVec,
    radius: f64,
    order: usize,
    levels: usize,
    epsilon: f64,
    floor: u64,
    max_wait: usize,
    master_seed: u64,
    trial: u64,
) -> Result<BoostedSelectionTrial> {
    let mu = law.color_expectation();
    let threshold = prolongation_threshold(nu, mu.as_measure(), order, epsilon)?;
    let nbhd = TVNeighborhood::new(nu.clone(), radius)?;
    let total_law = law.total_offspring_law();
    let mut rng = stream_rng(master_seed, 1, trial);

    let mut population = 1u64;
    let mut waited = None;
    for generation in 0..max_wait {
        if population >= floor {
            waited = Some(generation);
            break;
        }
        if population == 0 {
            break;
        }
        population = crate::galton_watson::step_population(&total_law, population, &mut rng)?;
    }
    if waited.is_none() && population >= floor {
        waited = Some(max_wait);
    }

    let mut sub_nonempty = Vec::new();
    let mut refusals = 0u64;
    if waited.is_some() {
        for _ in 0..floor {
            match lazy_selection_nonempty(
                law,
                &nbhd,
                order,
                levels,
                threshold,
                &mut rng,
                TRIAL_NODE_BUDGET,
            ) {
                Ok(nonempty) => sub_nonempty.push(nonempty),
                Err(e) if e.is_numeric_guard() => {
                    sub_nonempty.push(false);
                    refusals += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(BoostedSelectionTrial {
        trial,
        waited,
        sub_nonempty,
        refusals,
    })
}

/// One row of the order search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderSearchRow {
    pub order: usize,
    pub threshold: u64,
    /// `None` when the order was refused by a cap.
    pub nonempty: Option<bool>,
    pub refused: bool,
}

/// Try block orders in turn and report, per order, whether one trial's
/// maximal selection is nonempty; orders whose explicit mode would exceed
/// the caps are refused gracefully rather than attempted.
#[allow(clippy::too_many_arguments)]
pub fn selection_order_search(
    law: &ColorStructureLaw,
    nu: &MeasureVec,
    radius: f64,
    epsilon: f64,
    orders: &[usize],
    levels: usize,
    master_seed: u64,
    trial: u64,
) -> Result<Vec<OrderSearchRow>> {
    let mu = law.color_expectation();
    let nbhd = TVNeighborhood::new(nu.clone(), radius)?;
    let mut rows = Vec::with_capacity(orders.len());
    for &order in orders {
        let threshold = prolongation_threshold(nu, mu.as_measure(), order, epsilon)?;
        let mut rng = stream_rng(master_seed, order as u64, trial);
        let row = match lazy_selection_nonempty(
            law,
            &nbhd,
            order,
            levels,
            threshold,
            &mut rng,
            TRIAL_NODE_BUDGET,
        ) {
            Ok(nonempty) => OrderSearchRow {
                order,
                threshold,
                nonempty: Some(nonempty),
                refused: false,
            },
            Err(e) if e.is_numeric_guard() => OrderSearchRow {
                order,
                threshold,
                nonempty: None,
                refused: true,
            },
            Err(e) => return Err(e),
        };
        rows.push(row);
    }
    Ok(rows)
}

/// The cube-vertex choice law: commanded targets at
/// `center_j +/- half_width` in the first `r - 1` simplex coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceLaw {
    center: MeasureVec,
    half_width: f64,
}

impl ChoiceLaw {
    /// The center must be a probability vector and every cube vertex must
    /// stay inside the simplex.
    pub fn new(center: MeasureVec, half_width: f64) -> Result<Self> {
        if !center.is_probability_within(TOL_EMPIRICAL) {
            return Err(Error::NotProbability {
                sum: center.total_mass(),
            });
        }
        if half_width <= 0.0 || !half_width.is_finite() {
            return Err(Error::NonPositiveRadius { radius: half_width });
        }
        let law = ChoiceLaw { center, half_width };
        for index in 0..law.vertex_count() {
            law.vertex_coords(index)?;
        }
        Ok(law)
    }

    pub fn center(&self) -> &MeasureVec {
        &self.center
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Number of free simplex coordinates, `r - 1`.
    pub fn free_coordinates(&self) -> usize {
        self.center.dim() - 1
    }

    pub fn vertex_count(&self) -> usize {
        1 << self.free_coordinates()
    }

    fn vertex_coords(&self, index: usize) -> Result<Vec<f64>> {
        let free = self.free_coordinates();
        let mut coords = Vec::with_capacity(free + 1);
        let mut head = 0.0f64;
        for j in 0..free {
            let sign = if index >> j & 1 == 1 { 1.0 } else { -1.0 };
            let c = self.center.weight(j) + sign * self.half_width;
            if !(-VERTEX_TOL..=1.0 + VERTEX_TOL).contains(&c) {
                return Err(Error::VertexOutsideSimplex { index: j });
            }
            let c = c.clamp(0.0, 1.0);
            coords.push(c);
            head += c;
        }
        let last = 1.0 - head;
        if !(-VERTEX_TOL..=1.0 + VERTEX_TOL).contains(&last) {
            return Err(Error::VertexOutsideSimplex { index: free });
        }
        coords.push(last.clamp(0.0, 1.0));
        Ok(coords)
    }

    /// Vertex `index`: bit `j` set means the high side `center_j +
    /// half_width`; index 0 is the all-low vertex.
    pub fn vertex(&self, index: usize) -> MeasureVec {
        debug_assert!(index < self.vertex_count(), "vertex index out of range");
        MeasureVec::new(
            self.vertex_coords(index)
                .expect("vertices were validated at construction"),
        )
        .expect("vertex coordinates are clamped into [0, 1]")
    }

    /// The sign rule: per free coordinate, a running average on or above
    /// the center (tie included) commands the low side, below commands
    /// the high side. The all-tied case yields index 0, the all-low
    /// vertex.
    pub fn select(&self, running_avg: &MeasureVec) -> Result<usize> {
        if running_avg.dim() != self.center.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.center.dim(),
                actual: running_avg.dim(),
            });
        }
        let mut index = 0usize;
        for j in 0..self.free_coordinates() {
            let delta = running_avg.weight(j) - self.center.weight(j);
            if delta < 0.0 {
                index |= 1 << j;
            }
        }
        Ok(index)
    }
}

/// The selection rule as a free function, matching the law's `select`.
pub fn choice_law_select(running_avg: &MeasureVec, law: &ChoiceLaw) -> Result<usize> {
    law.select(running_avg)
}

/// Diagnostics and result of one steered line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeredOutcome {
    /// The sampled line, absent when every branch died or the budget ran
    /// out.
    pub line: Option<SampledLine>,
    /// Commanded vertex index per accepted block.
    pub commanded: Vec<usize>,
    /// Color counts of each accepted block.
    pub block_spectra: Vec<Vec<u64>>,
    /// Deviation of the running average from the center after each
    /// accepted block, maximized over the cube coordinates (the first
    /// `r - 1` simplex coordinates, where the decay bound lives).
    pub deltas: Vec<f64>,
    /// Deepest block (1-based) reached before the search died; `None` on
    /// success.
    pub died_at_block: Option<usize>,
    pub backtracks: u64,
    pub nodes_used: u64,
    pub budget_exhausted: bool,
}

struct SteerFrame {
    subtree: ExplicitTree,
    candidates: Vec<u32>,
    chosen: usize,
    command: usize,
    counts_added: Vec<u64>,
}

/// Sample one line of `depth` colors whose block spectra follow the choice
/// law: block `n + 1` must land in `nbhds[command]` where `command` is
/// selected from the running average of blocks `1..=n`.
///
/// The search is a depth-first backtracking walk over lazily grown
/// depth-`order` subtrees: each candidate prolongation gets its own fresh
/// subtree (no individual is ever resampled), and exhausted branches are
/// abandoned for the parent's next candidate.
pub fn steered_line_sampler(
    law: &ColorStructureLaw,
    choice: &ChoiceLaw,
    nbhds: &[TVNeighborhood],
    order: usize,
    depth: usize,
    master_seed: u64,
    trial: u64,
) -> Result<SteeredOutcome> {
    if order == 0 || depth == 0 {
        return Err(Error::ZeroDepth);
    }
    if !depth.is_multiple_of(order) {
        return Err(Error::DepthNotDivisible { depth, order });
    }
    if depth > DEPTH_CAP {
        return Err(Error::DepthCap {
            depth,
            cap: DEPTH_CAP,
        });
    }
    if choice.center().dim() != law.colors() {
        return Err(Error::DimensionMismatch {
            expected: law.colors(),
            actual: choice.center().dim(),
        });
    }
    if nbhds.len() != choice.vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: choice.vertex_count(),
            actual: nbhds.len(),
        });
    }
    let mu = law.color_expectation();
    for index in 0..choice.vertex_count() {
        let rho = kullback_action(&choice.vertex(index), mu.as_measure())?;
        if rho >= 0.0 {
            return Err(Error::RateNotNegative { rho });
        }
    }

    let r = law.colors();
    let blocks = depth / order;
    let mut rng = trial_rng(master_seed, trial);
    let mut sums = vec![0u64; r];
    let mut total = 0u64;
    let mut stack: Vec<SteerFrame> = Vec::with_capacity(blocks);
    let mut backtracks = 0u64;
    let mut nodes_used = 0u64;
    let mut budget_exhausted = false;
    let mut deepest_block = 0usize;

    'grow: while stack.len() < blocks {
        deepest_block = deepest_block.max(stack.len() + 1);
        let avg = if total == 0 {
            choice.center().clone()
        } else {
            MeasureVec::new(sums.iter().map(|&s| s as f64 / total as f64).collect())?
        };
        let command = choice.select(&avg)?;
        if nodes_used >= STEER_NODE_BUDGET {
            budget_exhausted = true;
            break;
        }
        let subtree = ExplicitTree::simulate(law, order, &mut rng, EXPLICIT_POPULATION_CAP)?;
        nodes_used += subtree.total_nodes() as u64;
        let mut candidates: Vec<u32> = (0..subtree.population(order) as u32)
            .filter(|&idx| {
                let counts = subtree.trailing_counts(order, idx as usize, order);
                spectrum_of_key(&counts, order)
                    .map(|s| nbhds[command].contains(&s))
                    .unwrap_or(false)
            })
            .collect();
        candidates.shuffle(&mut rng);
        let mut frame = SteerFrame {
            subtree,
            candidates,
            chosen: 0,
            command,
            counts_added: Vec::new(),
        };
        loop {
            if frame.chosen < frame.candidates.len() {
                let cand = frame.candidates[frame.chosen] as usize;
                let counts = frame.subtree.trailing_counts(order, cand, order);
                for (slot, &c) in sums.iter_mut().zip(&counts) {
                    *slot += c;
                }
                total += order as u64;
                frame.counts_added = counts;
                stack.push(frame);
                continue 'grow;
            }
            // This block is exhausted; abandon it and move the parent to
            // its next candidate.
            match stack.pop() {
                None => {
                    return Ok(SteeredOutcome {
                        line: None,
                        commanded: Vec::new(),
                        block_spectra: Vec::new(),
                        deltas: Vec::new(),
                        died_at_block: Some(deepest_block),
                        backtracks,
                        nodes_used,
                        budget_exhausted,
                    });
                }
                Some(mut parent) => {
                    backtracks += 1;
                    for (slot, &c) in sums.iter_mut().zip(&parent.counts_added) {
                        *slot -= c;
                    }
                    total -= order as u64;
                    parent.chosen += 1;
                    frame = parent;
                }
            }
        }
    }

    if budget_exhausted {
        return Ok(SteeredOutcome {
            line: None,
            commanded: Vec::new(),
            block_spectra: Vec::new(),
            deltas: Vec::new(),
            died_at_block: Some(deepest_block),
            backtracks,
            nodes_used,
            budget_exhausted,
        });
    }

    // Reconstruct the accepted path.
    let mut colors: Vec<usize> = Vec::with_capacity(depth);
    let mut commanded = Vec::with_capacity(blocks);
    let mut block_spectra = Vec::with_capacity(blocks);
    let mut deltas = Vec::with_capacity(blocks);
    let mut cum = vec![0u64; r];
    for (n, frame) in stack.iter().enumerate() {
        let cand = frame.candidates[frame.chosen] as usize;
        colors.extend(
            frame
                .subtree
                .line_colors(order, cand)
                .into_iter()
                .map(|c| c as usize),
        );
        commanded.push(frame.command);
        block_spectra.push(frame.counts_added.clone());
        for (slot, &c) in cum.iter_mut().zip(&frame.counts_added) {
            *slot += c;
        }
        let seen = ((n + 1) * order) as f64;
        let sup = (0..choice.free_coordinates())
            .map(|j| (cum[j] as f64 / seen - choice.center().weight(j)).abs())
            .fold(0.0f64, f64::max);
        deltas.push(sup);
    }
    Ok(SteeredOutcome {
        line: Some(SampledLine {
            colors,
            provenance: format!("steered(master={master_seed},trial={trial},order={order})"),
        }),
        commanded,
        block_spectra,
        deltas,
        died_at_block: None,
        backtracks,
        nodes_used,
        budget_exhausted,
    })
}
