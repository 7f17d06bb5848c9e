//! Adaptive partitioning of the input domain against a policy network.
//!
//! Starting from one cell covering the whole domain, cells whose verified
//! action set holds more than one action are split until every leaf is
//! either single-action or at the minimum cell size. The informed strategy
//! first evaluates the network at the cell corners: disagreeing corners
//! prove the cell is mixed without a verifier call, and the disagreement
//! pattern picks the dimensions worth splitting.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::geom::Rect;
use crate::network::{Network, MAX_CORNER_DIM};
use crate::partition::{CellId, PartitionTree};
use crate::verifier::{possible_actions, ActionSet};

/// How cells are divided when verification reports multiple actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitStrategy {
    /// Split along every dimension still above its minimum width.
    AllSplit,
    /// Evaluate the corners first; split only along dimensions where
    /// adjacent corners disagree, skipping the verifier call entirely when
    /// the corners already prove the cell mixed. Requires input dimension
    /// at most 16.
    InformedSplit,
}

/// Counters from a verification run.
#[derive(Debug, Clone, Copy, Default)]
pub struct VerifierStats {
    pub verifier_calls: usize,
    pub corner_eval_batches: usize,
    pub leaves_total: usize,
    pub leaves_singleton: usize,
    pub leaves_multi: usize,
    pub wall_time: f64,
}

impl VerifierStats {
    pub fn merge(&mut self, other: &VerifierStats) {
        self.verifier_calls += other.verifier_calls;
        self.corner_eval_batches += other.corner_eval_batches;
        self.leaves_total += other.leaves_total;
        self.leaves_singleton += other.leaves_singleton;
        self.leaves_multi += other.leaves_multi;
        self.wall_time += other.wall_time;
    }

    fn count_leaves(&mut self, tree: &PartitionTree) {
        self.leaves_total = 0;
        self.leaves_singleton = 0;
        self.leaves_multi = 0;
        for leaf in tree.leaves() {
            self.leaves_total += 1;
            if leaf.action_set.len() == 1 {
                self.leaves_singleton += 1;
            } else {
                self.leaves_multi += 1;
            }
        }
    }
}

/// Dimensions of `rect` still wide enough to split: width strictly above the
/// per-dimension minimum.
pub fn splittable_dims(rect: &Rect, min_size: &[f64]) -> Vec<usize> {
    (0..rect.dim())
        .filter(|&d| rect.width(d) > min_size[d])
        .collect()
}

/// Dimensions along which adjacent corners (equal in every other bit)
/// select different actions. `corner_actions` must hold `2^d` entries in
/// lexicographic corner order. Empty iff all corners agree.
pub fn strategy_dims(corner_actions: &[usize], d: usize) -> Result<Vec<usize>> {
    if corner_actions.len() != 1usize << d {
        return Err(Error::InvalidConfig(format!(
            "expected {} corner actions for dimension {d}, got {}",
            1usize << d,
            corner_actions.len()
        )));
    }
    let mut dims = Vec::new();
    'dim: for k in 0..d {
        for c in 0..corner_actions.len() {
            if c >> k & 1 == 0 && corner_actions[c] != corner_actions[c | 1 << k] {
                dims.push(k);
                continue 'dim;
            }
        }
    }
    Ok(dims)
}

fn validate_min_size(dim: usize, min_size: &[f64]) -> Result<()> {
    if min_size.len() != dim {
        return Err(Error::InvalidConfig(format!(
            "minimum cell size has {} entries for dimension {dim}",
            min_size.len()
        )));
    }
    if min_size.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::InvalidConfig(
            "minimum cell size must be strictly positive".into(),
        ));
    }
    Ok(())
}

/// Build an overapproximated policy for `net` over `domain`.
///
/// On return every leaf carries a nonempty, sound action set, and every leaf
/// is either single-action or has no dimension above its minimum width.
pub fn adaptive_verify(
    net: &Network,
    domain: Rect,
    min_size: &[f64],
    strategy: SplitStrategy,
    refine_depth: usize,
) -> Result<(PartitionTree, VerifierStats)> {
    if domain.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: domain.dim(),
        });
    }
    let mut tree = PartitionTree::new(domain);
    let mut stats = VerifierStats::default();
    let seeds = tree.leaf_ids();
    verify_leaves(&mut tree, seeds, net, min_size, strategy, refine_depth, &mut stats)?;
    stats.count_leaves(&tree);
    Ok((tree, stats))
}

/// Run the adaptive loop over an existing set of leaves. Used directly when
/// the tree carries structure the verifier must not disturb (for example
/// pre-cut time slices).
pub fn verify_leaves(
    tree: &mut PartitionTree,
    seeds: Vec<CellId>,
    net: &Network,
    min_size: &[f64],
    strategy: SplitStrategy,
    refine_depth: usize,
    stats: &mut VerifierStats,
) -> Result<()> {
    validate_min_size(tree.dim(), min_size)?;
    if strategy == SplitStrategy::InformedSplit && tree.dim() > MAX_CORNER_DIM {
        return Err(Error::InvalidConfig(format!(
            "informed split needs corner evaluation, capped at dimension {MAX_CORNER_DIM}"
        )));
    }
    let start = Instant::now();
    let mut stack = seeds;
    while let Some(id) = stack.pop() {
        let (rect, mask) = {
            let cell = tree.leaf(id)?;
            (cell.rect.clone(), cell.action_set)
        };
        let splittable = splittable_dims(&rect, min_size);

        if strategy == SplitStrategy::InformedSplit {
            let corners = net.evaluate_corners(&rect)?;
            stats.corner_eval_batches += 1;
            let mixed = corners.iter().any(|&a| a != corners[0]);
            if mixed {
                debug_assert!(
                    mask.is_empty() || corners.iter().all(|&a| mask.contains(a)),
                    "corner action outside the inherited candidate mask"
                );
                let dims: Vec<usize> = strategy_dims(&corners, rect.dim())?
                    .into_iter()
                    .filter(|d| splittable.contains(d))
                    .collect();
                if !dims.is_empty() {
                    // Corners prove the cell mixed; split without verifying.
                    // Children inherit the parent mask (corner observations
                    // are not sound evidence of absence).
                    stack.extend(tree.split(id, &dims)?);
                    continue;
                }
            }
        }

        let acts = possible_actions(net, &rect, mask, refine_depth)?;
        stats.verifier_calls += 1;
        tree.leaf_mut(id)?.action_set = acts;
        if acts.len() > 1 && !splittable.is_empty() {
            stack.extend(tree.split(id, &splittable)?);
        }
    }
    stats.wall_time += start.elapsed().as_secs_f64();
    Ok(())
}

/// Non-adaptive baseline: bisect every dimension down to the minimum width,
/// then verify each cell. One verifier call per minimum-size cell.
pub fn uniform_verify(
    net: &Network,
    domain: Rect,
    min_size: &[f64],
    refine_depth: usize,
) -> Result<(PartitionTree, VerifierStats)> {
    if domain.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: domain.dim(),
        });
    }
    validate_min_size(domain.dim(), min_size)?;
    let start = Instant::now();
    let mut tree = PartitionTree::new(domain);
    let mut stats = VerifierStats::default();
    let mut stack = tree.leaf_ids();
    while let Some(id) = stack.pop() {
        let rect = tree.leaf(id)?.rect.clone();
        let splittable = splittable_dims(&rect, min_size);
        if splittable.is_empty() {
            let acts = possible_actions(net, &rect, ActionSet::empty(), refine_depth)?;
            stats.verifier_calls += 1;
            tree.leaf_mut(id)?.action_set = acts;
        } else {
            stack.extend(tree.split(id, &splittable)?);
        }
    }
    stats.wall_time += start.elapsed().as_secs_f64();
    stats.count_leaves(&tree);
    Ok((tree, stats))
}
