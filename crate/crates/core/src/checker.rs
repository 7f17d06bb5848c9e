//! Cell-level probabilistic model checking with online refinement.
//!
//! Value iteration over the verified partition computes, for every cell, an
//! overapproximated probability of eventually reaching the unsafe set. Two
//! sources of slack are attacked online: when the probabilities of a cell's
//! possible next cells spread too far (worst-case transition error) the cell
//! is split before being updated, and when the per-action probabilities
//! spread too far (policy overapproximation error) the cell is split and its
//! children reverified against the parent's action set.
//!
//! Updates are Jacobi style against the previous sweep's snapshot; split
//! children enter the next sweep. Models with a deterministic countdown
//! dimension get a single-pass backward solver instead (`check_layered`).

use rayon::prelude::*;

use crate::adaptive::{
    adaptive_verify, splittable_dims, verify_leaves, SplitStrategy, VerifierStats,
};
use crate::dynamics::{resolve_mode_nets, DynamicsModel};
use crate::error::{Error, Result};
use crate::geom::Rect;
use crate::network::Network;
use crate::partition::{Cell, CellId, PartitionTree};
use crate::verifier::{possible_actions, DEFAULT_REFINE_DEPTH};

/// Action-range threshold, either fixed or a piecewise-constant schedule in
/// the sweep index (layer index for the layered solver).
#[derive(Debug, Clone)]
pub enum ThresholdSchedule {
    Fixed(f64),
    /// Sorted (sweep, value) steps; entry `(s, v)` applies from sweep `s`
    /// until the next entry. The first entry must start at sweep 0.
    Schedule(Vec<(usize, f64)>),
}

impl ThresholdSchedule {
    pub fn disabled() -> Self {
        ThresholdSchedule::Fixed(f64::INFINITY)
    }

    pub fn at(&self, sweep: usize) -> f64 {
        match self {
            ThresholdSchedule::Fixed(v) => *v,
            ThresholdSchedule::Schedule(steps) => {
                let mut value = f64::INFINITY;
                for &(s, v) in steps {
                    if s <= sweep {
                        value = v;
                    } else {
                        break;
                    }
                }
                value
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let ThresholdSchedule::Schedule(steps) = self {
            if steps.first().map(|&(s, _)| s) != Some(0) {
                return Err(Error::InvalidConfig(
                    "action threshold schedule must start at sweep 0".into(),
                ));
            }
            if steps.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(Error::InvalidConfig(
                    "action threshold schedule must have increasing sweep indices".into(),
                ));
            }
            if steps.iter().any(|&(_, v)| v < 0.0 || v.is_nan()) {
                return Err(Error::InvalidConfig(
                    "action threshold values must be nonnegative".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Parameters of a checking run. Thresholds of infinity disable the
/// corresponding online heuristic.
#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub min_size: Vec<f64>,
    pub transition_threshold: f64,
    pub action_threshold: ThresholdSchedule,
    pub convergence_eps: f64,
    pub max_sweeps: usize,
    pub strategy: SplitStrategy,
    pub refine_depth: usize,
    /// Pin cells inside absorbing safe regions at probability zero.
    pub pin_absorbing_safe: bool,
}

impl CheckConfig {
    pub fn new(min_size: Vec<f64>) -> Self {
        CheckConfig {
            min_size,
            transition_threshold: f64::INFINITY,
            action_threshold: ThresholdSchedule::disabled(),
            convergence_eps: 1e-6,
            max_sweeps: 500,
            strategy: SplitStrategy::InformedSplit,
            refine_depth: DEFAULT_REFINE_DEPTH,
            pin_absorbing_safe: true,
        }
    }

    pub fn with_transition_threshold(mut self, t: f64) -> Self {
        self.transition_threshold = t;
        self
    }

    pub fn with_action_threshold(mut self, t: f64) -> Self {
        self.action_threshold = ThresholdSchedule::Fixed(t);
        self
    }

    pub fn with_strategy(mut self, s: SplitStrategy) -> Self {
        self.strategy = s;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.convergence_eps = eps;
        self
    }

    pub fn with_max_sweeps(mut self, n: usize) -> Self {
        self.max_sweeps = n;
        self
    }

    fn validate(&self, model: &dyn DynamicsModel) -> Result<()> {
        if self.min_size.len() != model.state_dim() {
            return Err(Error::InvalidConfig(format!(
                "minimum cell size has {} entries for state dimension {}",
                self.min_size.len(),
                model.state_dim()
            )));
        }
        if !(self.convergence_eps > 0.0) {
            return Err(Error::InvalidConfig("convergence eps must be positive".into()));
        }
        if self.transition_threshold < 0.0 || self.transition_threshold.is_nan() {
            return Err(Error::InvalidConfig(
                "transition threshold must be nonnegative".into(),
            ));
        }
        self.action_threshold.validate()
    }
}

/// Counters from a checking run.
#[derive(Debug, Clone, Default)]
pub struct CheckStats {
    pub verify: VerifierStats,
    pub transition_splits: usize,
    pub action_splits: usize,
    /// Leaf count when the final sweep began and when it ended; online
    /// splits in the last sweep make these differ.
    pub leaves_final_sweep_start: usize,
    pub leaves_final: usize,
}

/// Converged (or flagged) probability field: one partition per mode with
/// per-cell probabilities and per-action probabilities.
#[derive(Debug, Clone)]
pub struct ProbField {
    pub trees: Vec<PartitionTree>,
    pub sweeps: usize,
    pub max_delta: f64,
    /// False when the run stopped at the sweep limit; the field is then an
    /// incomplete lower iterate, not a certified bound.
    pub converged: bool,
    /// Per-layer maxima `(tau slice low, max prob)` for layered models.
    pub tau_curve: Option<Vec<(f64, f64)>>,
    pub stats: CheckStats,
}

impl ProbField {
    pub fn max_prob(&self) -> f64 {
        self.trees
            .iter()
            .flat_map(|t| t.leaves().map(|c| c.prob))
            .fold(0.0, f64::max)
    }

    pub fn prob_at(&self, mode: usize, point: &[f64]) -> Result<f64> {
        let tree = self
            .trees
            .get(mode)
            .ok_or_else(|| Error::InvalidConfig(format!("mode {mode} out of range")))?;
        let id = tree.locate(point)?;
        Ok(tree.leaf(id)?.prob)
    }
}

/// Max spread of current probabilities over the next-cell sets of one
/// action: `max_i [max_{c' in C'_i} Pr(c') - min_{c' in C'_i} Pr(c')]`.
pub fn transition_range(
    trees: &[PartitionTree],
    model: &dyn DynamicsModel,
    mode: usize,
    cell: &Cell,
    action: usize,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for out in model.outcomes(mode, &cell.rect, action)? {
        let tree = &trees[out.next_mode];
        if let Some(img) = out.image.intersect(tree.domain()) {
            let (mx, mn) = tree.prob_range_over(&img)?;
            worst = worst.max(mx - mn);
        }
        // Fully expired outcomes have a single (safe) destination: range 0.
    }
    Ok(worst)
}

/// One Bellman evaluation of a cell: per-action probabilities
/// `Pr(c,a) = sum_i p_i * max_{c' in C'_i} Pr(c')` over the verified action
/// set, and the cell value `Pr(c) = max_a Pr(c,a)`.
pub fn bellman_update(
    trees: &[PartitionTree],
    model: &dyn DynamicsModel,
    mode: usize,
    cell: &Cell,
) -> Result<(Vec<(usize, f64)>, f64)> {
    let mut per_action = Vec::with_capacity(cell.action_set.len());
    let mut best = 0.0f64;
    for action in cell.action_set.iter() {
        let mut p = 0.0;
        for out in model.outcomes(mode, &cell.rect, action)? {
            let tree = &trees[out.next_mode];
            if let Some(img) = out.image.intersect(tree.domain()) {
                let (mx, _) = tree.prob_range_over(&img)?;
                p += out.probability * mx;
            }
        }
        per_action.push((action, p));
        best = best.max(p);
    }
    Ok((per_action, best))
}

/// Spread of the stored per-action probabilities; zero for single-action
/// cells or cells not yet updated.
pub fn action_range(cell: &Cell) -> f64 {
    match &cell.per_action_prob {
        Some(pa) if pa.len() > 1 => {
            let mx = pa.iter().map(|&(_, p)| p).fold(f64::NEG_INFINITY, f64::max);
            let mn = pa.iter().map(|&(_, p)| p).fold(f64::INFINITY, f64::min);
            mx - mn
        }
        _ => 0.0,
    }
}

fn spread(per_action: &[(usize, f64)]) -> f64 {
    if per_action.len() <= 1 {
        return 0.0;
    }
    let mx = per_action.iter().map(|&(_, p)| p).fold(f64::NEG_INFINITY, f64::max);
    let mn = per_action.iter().map(|&(_, p)| p).fold(f64::INFINITY, f64::min);
    mx - mn
}

struct CellEval {
    transition_range: f64,
    per_action: Vec<(usize, f64)>,
    prob: f64,
}

/// Transition ranges and Bellman values in one pass over the outcomes.
fn evaluate_cell(
    trees: &[PartitionTree],
    model: &dyn DynamicsModel,
    mode: usize,
    cell: &Cell,
) -> Result<CellEval> {
    debug_assert!(!cell.action_set.is_empty(), "cell was never verified");
    let mut worst_range = 0.0f64;
    let mut per_action = Vec::with_capacity(cell.action_set.len());
    let mut best = 0.0f64;
    for action in cell.action_set.iter() {
        let mut p = 0.0;
        for out in model.outcomes(mode, &cell.rect, action)? {
            let tree = &trees[out.next_mode];
            if let Some(img) = out.image.intersect(tree.domain()) {
                let (mx, mn) = tree.prob_range_over(&img)?;
                worst_range = worst_range.max(mx - mn);
                p += out.probability * mx;
            }
        }
        per_action.push((action, p));
        best = best.max(p);
    }
    Ok(CellEval {
        transition_range: worst_range,
        per_action,
        prob: best,
    })
}

fn init_field(trees: &mut [PartitionTree], model: &dyn DynamicsModel, pin_safe: bool) {
    for (mode, tree) in trees.iter_mut().enumerate() {
        for id in tree.leaf_ids() {
            let cell = tree.leaf_mut(id).unwrap();
            cell.in_unsafe = model.is_unsafe(mode, &cell.rect);
            cell.pinned_safe =
                !cell.in_unsafe && pin_safe && model.absorbing_safe(mode, &cell.rect);
            cell.prob = if cell.in_unsafe { 1.0 } else { 0.0 };
            cell.per_action_prob = None;
        }
    }
}

/// Re-derive pinning for freshly split children; returns the ids that still
/// participate in iteration.
fn refresh_children(
    tree: &mut PartitionTree,
    mode: usize,
    ids: &[CellId],
    model: &dyn DynamicsModel,
    pin_safe: bool,
) {
    for &id in ids {
        let cell = tree.leaf_mut(id).unwrap();
        debug_assert!(!model.is_unsafe(mode, &cell.rect), "pinned cells never split");
        cell.per_action_prob = None;
        if pin_safe && model.absorbing_safe(mode, &cell.rect) {
            cell.pinned_safe = true;
            cell.prob = 0.0;
        }
    }
}

enum Decision {
    SplitTransition,
    SplitAction,
    Update { per_action: Vec<(usize, f64)>, prob: f64 },
}


/// Full pipeline: adaptive verification, then value iteration with the
/// online splitting heuristics until convergence (no splits and max delta
/// below eps) or the sweep limit.
///
/// Pass one network, or one per previous-advisory mode.
pub fn check(
    nets: &[&Network],
    model: &dyn DynamicsModel,
    config: &CheckConfig,
) -> Result<ProbField> {
    check_with_observer(nets, model, config, |_, _| {})
}

/// `check` with a callback invoked after every sweep, for convergence
/// diagnostics and tests. Receives the sweep index and the field so far.
pub fn check_with_observer(
    nets: &[&Network],
    model: &dyn DynamicsModel,
    config: &CheckConfig,
    mut observer: impl FnMut(usize, &[PartitionTree]),
) -> Result<ProbField> {
    config.validate(model)?;
    let nets = resolve_mode_nets(nets, model)?;
    let mut verify = VerifierStats::default();
    let mut trees = Vec::with_capacity(model.num_modes());
    for mode in 0..model.num_modes() {
        let (tree, stats) = adaptive_verify(
            nets[mode],
            model.domain(),
            &config.min_size,
            config.strategy,
            config.refine_depth,
        )?;
        verify.merge(&stats);
        trees.push(tree);
    }
    run_sweeps(trees, Some(&nets), model, config, verify, &mut observer)
}

/// Value iteration over pre-verified trees (one per mode). Every leaf must
/// already carry a nonempty action set. Without networks, action-range
/// splits keep the parent's action set instead of reverifying.
pub fn check_with_trees(
    trees: Vec<PartitionTree>,
    nets: Option<&[&Network]>,
    model: &dyn DynamicsModel,
    config: &CheckConfig,
) -> Result<ProbField> {
    config.validate(model)?;
    if trees.len() != model.num_modes() {
        return Err(Error::InvalidConfig(format!(
            "{} trees for {} modes",
            trees.len(),
            model.num_modes()
        )));
    }
    let nets = match nets {
        Some(n) => Some(resolve_mode_nets(n, model)?),
        None => None,
    };
    for tree in &trees {
        if tree.leaves().any(|c| c.action_set.is_empty()) {
            return Err(Error::InvalidConfig(
                "every leaf must carry a verified action set".into(),
            ));
        }
    }
    let mut observer = |_: usize, _: &[PartitionTree]| {};
    match nets {
        Some(n) => run_sweeps(trees, Some(&n), model, config, VerifierStats::default(), &mut observer),
        None => run_sweeps(trees, None, model, config, VerifierStats::default(), &mut observer),
    }
}

fn run_sweeps(
    mut trees: Vec<PartitionTree>,
    nets: Option<&Vec<&Network>>,
    model: &dyn DynamicsModel,
    config: &CheckConfig,
    verify: VerifierStats,
    observer: &mut impl FnMut(usize, &[PartitionTree]),
) -> Result<ProbField> {
    init_field(&mut trees, model, config.pin_absorbing_safe);
    let mut stats = CheckStats {
        verify,
        ..CheckStats::default()
    };

    let mut sweeps = 0;
    let mut max_delta = f64::INFINITY;
    let mut converged = false;
    while sweeps < config.max_sweeps {
        let action_threshold = config.action_threshold.at(sweeps);
        stats.leaves_final_sweep_start = trees.iter().map(|t| t.num_leaves()).sum();

        // Phase A: evaluate every active cell against the frozen snapshot.
        let work: Vec<(usize, CellId)> = trees
            .iter()
            .enumerate()
            .flat_map(|(m, t)| {
                t.leaves()
                    .filter(|c| !c.pinned())
                    .map(move |c| (m, c.id))
            })
            .collect();
        let trees_ref = &trees;
        let decisions: Vec<(usize, CellId, Decision)> = work
            .par_iter()
            .map(|&(mode, id)| -> Result<(usize, CellId, Decision)> {
                let cell = trees_ref[mode].leaf(id)?;
                let splittable = !splittable_dims(&cell.rect, &config.min_size).is_empty();
                let eval = evaluate_cell(trees_ref, model, mode, cell)?;
                let decision = if eval.transition_range > config.transition_threshold && splittable
                {
                    Decision::SplitTransition
                } else if spread(&eval.per_action) > action_threshold && splittable {
                    Decision::SplitAction
                } else {
                    Decision::Update {
                        per_action: eval.per_action,
                        prob: eval.prob,
                    }
                };
                Ok((mode, id, decision))
            })
            .collect::<Result<_>>()?;

        // Phase B: apply updates, then splits.
        let mut delta = 0.0f64;
        let mut split_count = 0usize;
        for (mode, id, decision) in decisions {
            match decision {
                Decision::Update { per_action, prob } => {
                    let cell = trees[mode].leaf_mut(id)?;
                    delta = delta.max((prob - cell.prob).abs());
                    cell.prob = prob;
                    cell.per_action_prob = Some(per_action);
                }
                Decision::SplitTransition => {
                    let dims = splittable_dims(&trees[mode].leaf(id)?.rect, &config.min_size);
                    let children = trees[mode].split(id, &dims)?;
                    refresh_children(&mut trees[mode], mode, &children, model, config.pin_absorbing_safe);
                    stats.transition_splits += 1;
                    split_count += 1;
                }
                Decision::SplitAction => {
                    let dims = splittable_dims(&trees[mode].leaf(id)?.rect, &config.min_size);
                    let children = trees[mode].split(id, &dims)?;
                    refresh_children(&mut trees[mode], mode, &children, model, config.pin_absorbing_safe);
                    if let Some(nets) = nets {
                        // Reverify restricted to the parent's action set,
                        // which the children inherited as their mask.
                        for &child in &children {
                            let (rect, mask) = {
                                let c = trees[mode].leaf(child)?;
                                (c.rect.clone(), c.action_set)
                            };
                            let acts =
                                possible_actions(nets[mode], &rect, mask, config.refine_depth)?;
                            stats.verify.verifier_calls += 1;
                            trees[mode].leaf_mut(child)?.action_set = acts;
                        }
                    }
                    stats.action_splits += 1;
                    split_count += 1;
                }
            }
        }

        sweeps += 1;
        max_delta = delta;
        observer(sweeps, &trees);
        if split_count == 0 && delta < config.convergence_eps {
            converged = true;
            break;
        }
    }

    stats.leaves_final = trees.iter().map(|t| t.num_leaves()).sum();
    let tau_curve = model.tau_dim().map(|td| layer_maxima(&trees, td));
    Ok(ProbField {
        trees,
        sweeps,
        max_delta,
        converged,
        tau_curve,
        stats,
    })
}

// ---------------------------------------------------------------------------
// Layered backward solver
// ---------------------------------------------------------------------------

fn layer_of(rect: &Rect, tau_dim: usize) -> usize {
    rect.lows[tau_dim].floor() as usize
}

fn layer_maxima(trees: &[PartitionTree], tau_dim: usize) -> Vec<(f64, f64)> {
    let mut maxima: Vec<(f64, f64)> = Vec::new();
    for tree in trees {
        for cell in tree.leaves() {
            let layer = layer_of(&cell.rect, tau_dim);
            if maxima.len() <= layer {
                maxima.resize(layer + 1, (0.0, 0.0));
            }
            maxima[layer] = (layer as f64, maxima[layer].1.max(cell.prob));
        }
    }
    maxima
}

/// Single-pass backward solver for models whose countdown dimension drops by
/// exactly one per step. The countdown axis is pre-cut into unit slices;
/// each slice is verified adaptively, then solved bottom-up: every cell in
/// slice `k` depends only on slice `k-1`, so one pass per layer (with online
/// splitting inside the layer) reaches the layered fixpoint.
///
/// Pass one network per previous-advisory mode, or a single shared network.
pub fn check_layered(
    nets: &[&Network],
    model: &dyn DynamicsModel,
    config: &CheckConfig,
) -> Result<ProbField> {
    let tau = model
        .tau_dim()
        .ok_or_else(|| Error::InvalidConfig("model has no countdown dimension".into()))?;
    config.validate(model)?;
    let nets = resolve_mode_nets(nets, model)?;
    let domain = model.domain();
    let (tau_lo, tau_hi) = (domain.lows[tau], domain.highs[tau]);
    if tau_lo.fract() != 0.0 || tau_hi.fract() != 0.0 {
        return Err(Error::InvalidConfig(
            "countdown range must have integer endpoints".into(),
        ));
    }
    let layers = (tau_hi - tau_lo) as usize;

    // Pre-cut the countdown axis into unit slices, then verify each slice.
    let mut verify = VerifierStats::default();
    let mut trees = Vec::with_capacity(model.num_modes());
    for mode in 0..model.num_modes() {
        let mut tree = PartitionTree::new(domain.clone());
        let mut id = 0 as CellId;
        for cut in 1..layers {
            let kids = tree.split_at(id, &[tau], &[tau_lo + cut as f64])?;
            id = kids[1];
        }
        let seeds = tree.leaf_ids();
        let mut min_size = config.min_size.clone();
        min_size[tau] = min_size[tau].max(1.0);
        verify_leaves(
            &mut tree,
            seeds,
            nets[mode],
            &min_size,
            config.strategy,
            config.refine_depth,
            &mut verify,
        )?;
        trees.push(tree);
    }
    init_field(&mut trees, model, config.pin_absorbing_safe);
    let mut stats = CheckStats {
        verify,
        ..CheckStats::default()
    };

    // Bottom-up over layers; values inside a layer are final on first
    // computation because every outcome lands strictly in the layer below.
    for layer in 0..layers {
        let action_threshold = config.action_threshold.at(layer);
        for mode in 0..model.num_modes() {
            let mut stack: Vec<CellId> = trees[mode]
                .leaves()
                .filter(|c| !c.pinned() && layer_of(&c.rect, tau) == layer)
                .map(|c| c.id)
                .collect();
            while let Some(id) = stack.pop() {
                let cell = trees[mode].leaf(id)?;
                let splittable =
                    !splittable_dims(&cell.rect, &config.min_size).is_empty();
                let eval = evaluate_cell(&trees, model, mode, cell)?;
                if eval.transition_range > config.transition_threshold && splittable {
                    let dims = splittable_dims(&trees[mode].leaf(id)?.rect, &config.min_size);
                    let children = trees[mode].split(id, &dims)?;
                    refresh_children(
                        &mut trees[mode],
                        mode,
                        &children,
                        model,
                        config.pin_absorbing_safe,
                    );
                    stats.transition_splits += 1;
                    stack.extend(children);
                    continue;
                }
                if spread(&eval.per_action) > action_threshold && splittable {
                    let dims = splittable_dims(&trees[mode].leaf(id)?.rect, &config.min_size);
                    let children = trees[mode].split(id, &dims)?;
                    refresh_children(
                        &mut trees[mode],
                        mode,
                        &children,
                        model,
                        config.pin_absorbing_safe,
                    );
                    for &child in &children {
                        let (rect, mask) = {
                            let c = trees[mode].leaf(child)?;
                            (c.rect.clone(), c.action_set)
                        };
                        let acts =
                            possible_actions(nets[mode], &rect, mask, config.refine_depth)?;
                        stats.verify.verifier_calls += 1;
                        trees[mode].leaf_mut(child)?.action_set = acts;
                    }
                    stats.action_splits += 1;
                    stack.extend(children);
                    continue;
                }
                let cell = trees[mode].leaf_mut(id)?;
                cell.prob = eval.prob;
                cell.per_action_prob = Some(eval.per_action);
            }
        }
    }

    stats.leaves_final = trees.iter().map(|t| t.num_leaves()).sum();
    stats.leaves_final_sweep_start = stats.leaves_final;
    let tau_curve = Some(layer_maxima(&trees, tau));
    Ok(ProbField {
        trees,
        sweeps: layers,
        max_delta: 0.0,
        converged: true,
        tau_curve,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ContinuumWorld, TransitionOutcome};
    use crate::verifier::ActionSet;

    /// Single-action model with hand-placed outcome images, independent of
    /// the source cell; used to pin down the worked transition example.
    struct MockModel {
        labels: Vec<String>,
        outcomes: Vec<TransitionOutcome>,
    }

    impl DynamicsModel for MockModel {
        fn state_dim(&self) -> usize {
            2
        }
        fn num_modes(&self) -> usize {
            1
        }
        fn num_actions(&self) -> usize {
            1
        }
        fn action_labels(&self) -> &[String] {
            &self.labels
        }
        fn domain(&self) -> Rect {
            Rect::new(vec![0.0, 0.0], vec![8.0, 8.0])
        }
        fn outcomes(&self, _m: usize, _c: &Rect, a: usize) -> Result<Vec<TransitionOutcome>> {
            if a != 0 {
                return Err(Error::UnknownAction(a));
            }
            Ok(self.outcomes.clone())
        }
        fn is_unsafe(&self, _m: usize, _c: &Rect) -> bool {
            false
        }
        fn absorbing_safe(&self, _m: usize, _c: &Rect) -> bool {
            false
        }
        fn outcome_probs(&self, _m: usize, _a: usize) -> Result<Vec<f64>> {
            Ok(self.outcomes.iter().map(|o| o.probability).collect())
        }
        fn step_point(
            &self,
            _m: usize,
            _s: &[f64],
            _a: usize,
            _o: usize,
        ) -> Result<(usize, Vec<f64>)> {
            unreachable!("mock has no point dynamics")
        }
        fn is_unsafe_point(&self, _m: usize, _s: &[f64]) -> bool {
            false
        }
        fn absorbing_safe_point(&self, _m: usize, _s: &[f64]) -> bool {
            false
        }
    }

    fn outcome(p: f64, lows: [f64; 2], highs: [f64; 2]) -> TransitionOutcome {
        TransitionOutcome {
            probability: p,
            image: Rect::new(lows.to_vec(), highs.to_vec()),
            next_mode: 0,
        }
    }

    /// Grid of 2x2 cells over [0,8]^2 with chosen probabilities, and four
    /// outcome regions whose neighborhoods carry the probability sets
    /// {0, 0}, {0.03..0.13}, {0.12, 0.13}, {0, 0.02}.
    fn worked_example() -> (Vec<PartitionTree>, MockModel, CellId) {
        let mut tree = PartitionTree::new(Rect::new(vec![0.0, 0.0], vec![8.0, 8.0]));
        for id in tree.leaf_ids() {
            tree.split(id, &[0, 1]).unwrap();
        }
        for id in tree.leaf_ids() {
            tree.split(id, &[0, 1]).unwrap();
        }
        assert_eq!(tree.num_leaves(), 16);
        let mut set = |x: f64, y: f64, p: f64| {
            let id = tree.locate(&[x, y]).unwrap();
            let c = tree.leaf_mut(id).unwrap();
            c.prob = p;
            c.action_set = ActionSet::singleton(0);
        };
        // Row y in [0,2): probs 0, 0, 0.12, 0.13.
        set(1.0, 1.0, 0.0);
        set(3.0, 1.0, 0.0);
        set(5.0, 1.0, 0.12);
        set(7.0, 1.0, 0.13);
        // Row y in [2,4): probs 0.03, 0.13, 0.0, 0.02.
        set(1.0, 3.0, 0.03);
        set(3.0, 3.0, 0.13);
        set(5.0, 3.0, 0.0);
        set(7.0, 3.0, 0.02);
        for id in tree.leaf_ids() {
            let c = tree.leaf_mut(id).unwrap();
            c.action_set = ActionSet::singleton(0);
        }
        let model = MockModel {
            labels: vec!["up".into()],
            outcomes: vec![
                outcome(0.7, [1.0, 0.5], [3.0, 1.5]),  // spans probs {0, 0}
                outcome(0.1, [1.0, 2.5], [3.0, 3.5]),  // spans {0.03, 0.13}
                outcome(0.1, [5.0, 0.5], [7.0, 1.5]),  // spans {0.12, 0.13}
                outcome(0.1, [5.0, 2.5], [7.0, 3.5]),  // spans {0.0, 0.02}
            ],
        };
        let source = tree.locate(&[1.0, 7.0]).unwrap();
        (vec![tree], model, source)
    }

    #[test]
    fn transition_range_worked_example_is_exactly_point_one() {
        let (trees, model, source) = worked_example();
        let cell = trees[0].leaf(source).unwrap();
        let r = transition_range(&trees, &model, 0, cell, 0).unwrap();
        assert_eq!(r, 0.1);
    }

    #[test]
    fn bellman_update_worked_example() {
        let (trees, model, source) = worked_example();
        let cell = trees[0].leaf(source).unwrap();
        let (per_action, prob) = bellman_update(&trees, &model, 0, cell).unwrap();
        // 0.7*0 + 0.1*0.13 + 0.1*0.13 + 0.1*0.02
        assert!((prob - 0.028).abs() < 1e-12, "{prob}");
        assert_eq!(per_action.len(), 1);
    }

    #[test]
    fn action_range_basics() {
        let mut tree = PartitionTree::new(Rect::new(vec![0.0], vec![1.0]));
        let id = tree.leaf_ids()[0];
        {
            let c = tree.leaf_mut(id).unwrap();
            c.per_action_prob = Some(vec![(0, 0.2), (1, 0.5)]);
        }
        assert!((action_range(tree.leaf(id).unwrap()) - 0.3).abs() < 1e-15);
        {
            let c = tree.leaf_mut(id).unwrap();
            c.per_action_prob = Some(vec![(2, 0.4)]);
        }
        assert_eq!(action_range(tree.leaf(id).unwrap()), 0.0);
    }

    #[test]
    fn threshold_schedule_lookup() {
        let s = ThresholdSchedule::Schedule(vec![(0, 0.05), (10, 0.01), (20, 0.005)]);
        assert_eq!(s.at(0), 0.05);
        assert_eq!(s.at(9), 0.05);
        assert_eq!(s.at(10), 0.01);
        assert_eq!(s.at(25), 0.005);
        assert!(ThresholdSchedule::Schedule(vec![(3, 0.1)]).validate().is_err());
    }

    /// With the pit removed nothing is unsafe, so all probabilities stay 0;
    /// with the pit covering everything, all probabilities are 1.
    #[test]
    fn degenerate_pits() {
        let net = crate::network::Network::new(
            vec![2, 1, 4],
            vec![vec![0.0, 0.0], vec![0.0, 0.0, 0.0, 0.0]],
            vec![vec![0.0], vec![1.0, 0.0, 0.0, 0.0]],
            ["up", "down", "left", "right"].iter().map(|s| s.to_string()).collect(),
            crate::network::SelectionRule::Argmax,
        )
        .unwrap();
        let config = CheckConfig::new(vec![5.0, 5.0]).with_max_sweeps(50);

        let empty = ContinuumWorld::new().with_pit(None).with_goal(None);
        let field = check(&[&net], &empty, &config).unwrap();
        assert!(field.converged);
        assert!(field.max_prob() == 0.0);

        let full = ContinuumWorld::new()
            .with_pit(Some(Rect::new(vec![-1.0, -1.0], vec![21.0, 21.0])))
            .with_goal(None);
        let field = check(&[&net], &full, &config).unwrap();
        assert!(field.trees[0].leaves().all(|c| c.prob == 1.0));
    }
}
