//! Sound bounds on network outputs over a box of inputs.
//!
//! Two cooperating bound engines, both sound:
//!
//! - plain interval bound propagation, layer by layer;
//! - a forward linear-relaxation pass that carries a pair of input-anchored
//!   bounding lines through every neuron, replacing each unstable ReLU by
//!   fixed bounding lines. The linear forms preserve cancellations between
//!   correlated units that interval arithmetic cannot see, which keeps
//!   action sets tight enough for adaptive splitting to pay off.
//!
//! `possible_actions` filters actions by strict dominance using both engines
//! (score intervals and upper bounds on pairwise score differences) and
//! tightens the result by bounded-depth bisection along the widest
//! dimension. The relaxation slopes are fixed per pass and the line
//! parameters come from the linear forms themselves, which makes every
//! reported bound shrink monotonically when a cell is split.

use std::fmt;

use crate::error::{Error, Result};
use crate::geom::Rect;
use crate::network::{Network, SelectionRule};

/// Default bisection depth for `possible_actions` refinement.
pub const DEFAULT_REFINE_DEPTH: usize = 4;

/// A set of action indices, stored as a bitmask. Holds up to 64 actions,
/// which comfortably covers advisory-style action spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ActionSet(u64);

impl ActionSet {
    pub const MAX_ACTIONS: usize = 64;

    pub fn empty() -> Self {
        ActionSet(0)
    }

    pub fn all(n: usize) -> Self {
        assert!(n <= Self::MAX_ACTIONS);
        if n == 64 {
            ActionSet(u64::MAX)
        } else {
            ActionSet((1u64 << n) - 1)
        }
    }

    pub fn singleton(i: usize) -> Self {
        ActionSet(1u64 << i)
    }

    pub fn insert(&mut self, i: usize) {
        self.0 |= 1u64 << i;
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn union(&self, other: ActionSet) -> ActionSet {
        ActionSet(self.0 | other.0)
    }

    pub fn intersection(&self, other: ActionSet) -> ActionSet {
        ActionSet(self.0 & other.0)
    }

    pub fn is_subset_of(&self, other: ActionSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        let bits = self.0;
        (0..Self::MAX_ACTIONS).filter(move |i| bits >> i & 1 == 1)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        let mut s = ActionSet::empty();
        for i in indices {
            s.insert(i);
        }
        s
    }
}

impl fmt::Display for ActionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, i) in self.iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// Componentwise output bounds: `lows[i] <= y_i <= highs[i]` for every input
/// in the queried cell.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalVector {
    pub lows: Vec<f64>,
    pub highs: Vec<f64>,
}

impl IntervalVector {
    pub fn len(&self) -> usize {
        self.lows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lows.is_empty()
    }

    /// True when every interval of `self` lies inside the matching interval
    /// of `other`.
    pub fn nested_in(&self, other: &IntervalVector) -> bool {
        self.lows
            .iter()
            .zip(&self.highs)
            .zip(other.lows.iter().zip(&other.highs))
            .all(|((l, h), (ol, oh))| l >= ol && h <= oh)
    }
}

fn check_dims(net: &Network, cell: &Rect) -> Result<()> {
    if cell.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            got: cell.dim(),
        });
    }
    Ok(())
}

/// Plain interval propagation; returns pre-activation bounds of every layer
/// (the last entry is the output layer).
fn ibp_layers(net: &Network, cell: &Rect) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut lo = cell.lows.clone();
    let mut hi = cell.highs.clone();
    let mut layers = Vec::with_capacity(net.num_layers());
    for k in 0..net.num_layers() {
        let rows = net.layer_sizes()[k + 1];
        let cols = net.layer_sizes()[k];
        let w = net.layer_weights(k);
        let b = net.layer_biases(k);
        let mut nlo = Vec::with_capacity(rows);
        let mut nhi = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = &w[r * cols..(r + 1) * cols];
            let mut acc_lo = b[r];
            let mut acc_hi = b[r];
            for (j, &wj) in row.iter().enumerate() {
                if wj >= 0.0 {
                    acc_lo += wj * lo[j];
                    acc_hi += wj * hi[j];
                } else {
                    acc_lo += wj * hi[j];
                    acc_hi += wj * lo[j];
                }
            }
            nlo.push(acc_lo);
            nhi.push(acc_hi);
        }
        layers.push((nlo.clone(), nhi.clone()));
        if k + 1 < net.num_layers() {
            for v in &mut nlo {
                *v = v.max(0.0);
            }
            for v in &mut nhi {
                *v = v.max(0.0);
            }
        }
        lo = nlo;
        hi = nhi;
    }
    layers
}

/// Per-neuron linear envelope over the queried cell: input-anchored lines
/// `lo_c[j] . x + lo_b[j] <= value_j(x) <= hi_c[j] . x + hi_b[j]`, plus the
/// concrete range of those lines over the cell.
struct LinearEnvelope {
    n: usize,
    dim: usize,
    lo_c: Vec<f64>,
    lo_b: Vec<f64>,
    hi_c: Vec<f64>,
    hi_b: Vec<f64>,
    /// Min of the lower line over the cell, per neuron.
    l: Vec<f64>,
    /// Max of the upper line over the cell, per neuron.
    u: Vec<f64>,
}

fn line_max(c: &[f64], b: f64, cell: &Rect) -> f64 {
    let mut acc = b;
    for (d, &cd) in c.iter().enumerate() {
        acc += if cd >= 0.0 { cd * cell.highs[d] } else { cd * cell.lows[d] };
    }
    acc
}

fn line_min(c: &[f64], b: f64, cell: &Rect) -> f64 {
    let mut acc = b;
    for (d, &cd) in c.iter().enumerate() {
        acc += if cd >= 0.0 { cd * cell.lows[d] } else { cd * cell.highs[d] };
    }
    acc
}

impl LinearEnvelope {
    fn input(cell: &Rect) -> Self {
        let dim = cell.dim();
        let mut env = LinearEnvelope {
            n: dim,
            dim,
            lo_c: vec![0.0; dim * dim],
            lo_b: vec![0.0; dim],
            hi_c: vec![0.0; dim * dim],
            hi_b: vec![0.0; dim],
            l: cell.lows.clone(),
            u: cell.highs.clone(),
        };
        for d in 0..dim {
            env.lo_c[d * dim + d] = 1.0;
            env.hi_c[d * dim + d] = 1.0;
        }
        env
    }

    /// Push the envelope through an affine map: positive weights combine
    /// upper lines with upper lines, negative weights swap them.
    fn affine(&self, rows: usize, w: &[f64], bias: &[f64], cell: &Rect) -> Self {
        let cols = self.n;
        let dim = self.dim;
        let mut out = LinearEnvelope {
            n: rows,
            dim,
            lo_c: vec![0.0; rows * dim],
            lo_b: vec![0.0; rows],
            hi_c: vec![0.0; rows * dim],
            hi_b: vec![0.0; rows],
            l: Vec::with_capacity(rows),
            u: Vec::with_capacity(rows),
        };
        for r in 0..rows {
            let wrow = &w[r * cols..(r + 1) * cols];
            let lo_c = &mut out.lo_c[r * dim..(r + 1) * dim];
            let hi_c = &mut out.hi_c[r * dim..(r + 1) * dim];
            let mut lo_b = bias[r];
            let mut hi_b = bias[r];
            for (j, &wj) in wrow.iter().enumerate() {
                if wj == 0.0 {
                    continue;
                }
                if wj > 0.0 {
                    for d in 0..dim {
                        lo_c[d] += wj * self.lo_c[j * dim + d];
                        hi_c[d] += wj * self.hi_c[j * dim + d];
                    }
                    lo_b += wj * self.lo_b[j];
                    hi_b += wj * self.hi_b[j];
                } else {
                    for d in 0..dim {
                        lo_c[d] += wj * self.hi_c[j * dim + d];
                        hi_c[d] += wj * self.lo_c[j * dim + d];
                    }
                    lo_b += wj * self.hi_b[j];
                    hi_b += wj * self.lo_b[j];
                }
            }
            out.lo_b[r] = lo_b;
            out.hi_b[r] = hi_b;
            out.l.push(line_min(&out.lo_c[r * dim..(r + 1) * dim], lo_b, cell));
            out.u.push(line_max(&out.hi_c[r * dim..(r + 1) * dim], hi_b, cell));
        }
        out
    }

    /// Apply the ReLU relaxation in place. Stable neurons pass through or
    /// zero out; unstable neurons take the chord upper line and a fixed
    /// lower slope of `alpha`.
    fn relu(&mut self, alpha: f64, cell: &Rect) {
        let dim = self.dim;
        for j in 0..self.n {
            let (l, u) = (self.l[j], self.u[j]);
            if l >= 0.0 {
                continue;
            }
            if u <= 0.0 {
                for d in 0..dim {
                    self.lo_c[j * dim + d] = 0.0;
                    self.hi_c[j * dim + d] = 0.0;
                }
                self.lo_b[j] = 0.0;
                self.hi_b[j] = 0.0;
                self.l[j] = 0.0;
                self.u[j] = 0.0;
                continue;
            }
            // Upper chord: relu(z) <= s (z - l) for z in [l, u].
            let s = u / (u - l);
            for d in 0..dim {
                self.hi_c[j * dim + d] *= s;
                self.lo_c[j * dim + d] *= alpha;
            }
            self.hi_b[j] = s * (self.hi_b[j] - l);
            self.lo_b[j] *= alpha;
            self.l[j] = line_min(&self.lo_c[j * dim..(j + 1) * dim], self.lo_b[j], cell);
            self.u[j] = line_max(&self.hi_c[j * dim..(j + 1) * dim], self.hi_b[j], cell);
        }
    }
}

/// Forward pass producing the linear envelope of the last hidden layer's
/// activations for one fixed lower slope.
fn forward_envelope(net: &Network, cell: &Rect, alpha: f64) -> LinearEnvelope {
    let mut env = LinearEnvelope::input(cell);
    for k in 0..net.num_layers() - 1 {
        let rows = net.layer_sizes()[k + 1];
        env = env.affine(rows, net.layer_weights(k), net.layer_biases(k), cell);
        env.relu(alpha, cell);
    }
    env
}

/// Bounds of affine functionals `rows x a_last + bias` of the last hidden
/// activations, concretized over the cell.
fn functional_bounds(
    env: &LinearEnvelope,
    cell: &Rect,
    rows: &[f64],
    biases: &[f64],
    n_rows: usize,
) -> (Vec<f64>, Vec<f64>) {
    let dim = env.dim;
    let cols = env.n;
    let mut lo = Vec::with_capacity(n_rows);
    let mut hi = Vec::with_capacity(n_rows);
    let mut lo_c = vec![0.0; dim];
    let mut hi_c = vec![0.0; dim];
    for r in 0..n_rows {
        let wrow = &rows[r * cols..(r + 1) * cols];
        lo_c.fill(0.0);
        hi_c.fill(0.0);
        let mut lo_b = biases[r];
        let mut hi_b = biases[r];
        for (j, &wj) in wrow.iter().enumerate() {
            if wj == 0.0 {
                continue;
            }
            if wj > 0.0 {
                for d in 0..dim {
                    lo_c[d] += wj * env.lo_c[j * dim + d];
                    hi_c[d] += wj * env.hi_c[j * dim + d];
                }
                lo_b += wj * env.lo_b[j];
                hi_b += wj * env.hi_b[j];
            } else {
                for d in 0..dim {
                    lo_c[d] += wj * env.hi_c[j * dim + d];
                    hi_c[d] += wj * env.lo_c[j * dim + d];
                }
                lo_b += wj * env.hi_b[j];
                hi_b += wj * env.lo_b[j];
            }
        }
        lo.push(line_min(&lo_c, lo_b, cell));
        hi.push(line_max(&hi_c, hi_b, cell));
    }
    (lo, hi)
}

/// Both fixed-slope passes, best bound per functional.
struct Envelopes {
    zero: LinearEnvelope,
    one: LinearEnvelope,
}

impl Envelopes {
    fn new(net: &Network, cell: &Rect) -> Self {
        Envelopes {
            zero: forward_envelope(net, cell, 0.0),
            one: forward_envelope(net, cell, 1.0),
        }
    }

    fn functional_bounds(
        &self,
        cell: &Rect,
        rows: &[f64],
        biases: &[f64],
        n_rows: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let (lo0, hi0) = functional_bounds(&self.zero, cell, rows, biases, n_rows);
        let (lo1, hi1) = functional_bounds(&self.one, cell, rows, biases, n_rows);
        let lo = lo0.iter().zip(&lo1).map(|(a, b)| a.max(*b)).collect();
        let hi = hi0.iter().zip(&hi1).map(|(a, b)| a.min(*b)).collect();
        (lo, hi)
    }
}

fn output_bounds(net: &Network, cell: &Rect, envs: &Envelopes) -> IntervalVector {
    let ibp = ibp_layers(net, cell);
    let (ibp_lo, ibp_hi) = ibp.last().unwrap();
    let last = net.num_layers() - 1;
    let (rlo, rhi) = envs.functional_bounds(
        cell,
        net.layer_weights(last),
        net.layer_biases(last),
        net.output_dim(),
    );
    IntervalVector {
        lows: ibp_lo.iter().zip(&rlo).map(|(a, b)| a.max(*b)).collect(),
        highs: ibp_hi.iter().zip(&rhi).map(|(a, b)| a.min(*b)).collect(),
    }
}

/// Sound output bounds over the cell: the componentwise intersection of the
/// interval route and the linear-relaxation route.
///
/// For every `x` in the cell, `evaluate(net, x)` lies inside the returned
/// intervals, output by output.
pub fn propagate_bounds(net: &Network, cell: &Rect) -> Result<IntervalVector> {
    check_dims(net, cell)?;
    let envs = Envelopes::new(net, cell);
    Ok(output_bounds(net, cell, &envs))
}

/// Dominance filter over interval bounds: under argmax, action `i` is
/// excluded when `highs[i] < lows[j]` for some `j` (then `j` beats `i` at
/// every point). Exact ties keep both actions.
fn interval_filter(bounds: &IntervalVector, rule: SelectionRule, candidates: ActionSet) -> ActionSet {
    let n = bounds.len();
    let mut out = ActionSet::empty();
    match rule {
        SelectionRule::Argmax => {
            let best_low = bounds.lows.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for i in 0..n {
                if candidates.contains(i) && bounds.highs[i] >= best_low {
                    out.insert(i);
                }
            }
        }
        SelectionRule::Argmin => {
            let best_high = bounds.highs.iter().cloned().fold(f64::INFINITY, f64::min);
            for i in 0..n {
                if candidates.contains(i) && bounds.lows[i] <= best_high {
                    out.insert(i);
                }
            }
        }
    }
    out
}

/// Tighten `kept` by bounding score differences: action `i` is excluded
/// when some `j` strictly beats it everywhere, shown by a negative upper
/// bound on `score_i - score_j` (argmax) or on `score_j - score_i`
/// (argmin). The difference rows are affine in the last hidden activations,
/// so cancellation between the two scores is captured exactly.
fn difference_filter(net: &Network, cell: &Rect, envs: &Envelopes, kept: ActionSet) -> ActionSet {
    if kept.len() <= 1 {
        return kept;
    }
    let n = net.output_dim();
    let last = net.num_layers() - 1;
    let hidden = net.layer_sizes()[last];
    let w = net.layer_weights(last);
    let b = net.layer_biases(last);
    let mut rows = Vec::new();
    let mut biases = Vec::new();
    let mut pairs = Vec::new();
    for i in kept.iter() {
        for j in 0..n {
            if j == i {
                continue;
            }
            let (win, lose) = match net.selection_rule() {
                SelectionRule::Argmax => (i, j),
                SelectionRule::Argmin => (j, i),
            };
            for h in 0..hidden {
                rows.push(w[win * hidden + h] - w[lose * hidden + h]);
            }
            biases.push(b[win] - b[lose]);
            pairs.push(i);
        }
    }
    let (_, hi) = envs.functional_bounds(cell, &rows, &biases, pairs.len());
    let mut out = kept;
    for (r, &i) in pairs.iter().enumerate() {
        if hi[r] < 0.0 && out.contains(i) {
            out = ActionSet(out.0 & !(1u64 << i));
        }
    }
    out
}

/// Guaranteed superset of the actions the network can select anywhere in
/// `cell`, refined by recursive bisection along the widest dimension up to
/// `refine_depth`.
///
/// `candidates` is the reverification shortcut: pass the parent cell's
/// action set so actions already ruled out upstream are skipped. An empty
/// set means "no restriction".
pub fn possible_actions(
    net: &Network,
    cell: &Rect,
    candidates: ActionSet,
    refine_depth: usize,
) -> Result<ActionSet> {
    check_dims(net, cell)?;
    let candidates = if candidates.is_empty() {
        ActionSet::all(net.output_dim())
    } else {
        candidates
    };
    let result = refine(net, cell, candidates, refine_depth)?;
    debug_assert!(
        !result.is_empty(),
        "possible_actions produced an empty set; candidate mask was unsound"
    );
    Ok(result)
}

fn filter_once(net: &Network, cell: &Rect, candidates: ActionSet) -> Result<ActionSet> {
    let envs = Envelopes::new(net, cell);
    let bounds = output_bounds(net, cell, &envs);
    let kept = interval_filter(&bounds, net.selection_rule(), candidates);
    Ok(difference_filter(net, cell, &envs, kept))
}

fn refine(net: &Network, cell: &Rect, candidates: ActionSet, depth: usize) -> Result<ActionSet> {
    let coarse = filter_once(net, cell, candidates)?;
    if depth == 0 || coarse.len() <= 1 {
        return Ok(coarse);
    }
    let d = cell.widest_dim();
    let mid = cell.midpoint(d);
    if mid <= cell.lows[d] || mid >= cell.highs[d] {
        return Ok(coarse); // cell too thin to bisect
    }
    let mut left = cell.clone();
    left.highs[d] = mid;
    let mut right = cell.clone();
    right.lows[d] = mid;
    // Bounds shrink monotonically on subcells, so the union over subcells
    // can only shrink relative to `coarse`; once the left half reports
    // everything in `coarse`, the right half cannot change the answer.
    let a = refine(net, &left, coarse, depth - 1)?;
    if a == coarse {
        return Ok(coarse);
    }
    let b = refine(net, &right, coarse, depth - 1)?;
    Ok(a.union(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::SelectionRule;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Hidden layer is a shifted identity that stays active on the domain,
    /// so the whole net computes the affine map given by the output layer.
    fn affine_net(in_dim: usize, out_rows: Vec<Vec<f64>>, out_bias: Vec<f64>, shift: f64) -> Network {
        let mut w1 = vec![0.0; in_dim * in_dim];
        for i in 0..in_dim {
            w1[i * in_dim + i] = 1.0;
        }
        let b1 = vec![shift; in_dim];
        let mut w2 = Vec::new();
        let mut b2 = Vec::new();
        for (row, bias) in out_rows.iter().zip(&out_bias) {
            w2.extend(row.iter().cloned());
            let correction: f64 = row.iter().map(|c| c * shift).sum();
            b2.push(bias - correction);
        }
        let labels = (0..out_rows.len()).map(|i| format!("a{i}")).collect();
        Network::new(
            vec![in_dim, in_dim, out_rows.len()],
            vec![w1, w2],
            vec![b1, b2],
            labels,
            SelectionRule::Argmax,
        )
        .unwrap()
    }

    #[test]
    fn affine_bounds_are_exact() {
        // y0 = 2x + 1 on x in [0, 1] gives [1, 3].
        let net = affine_net(1, vec![vec![2.0], vec![0.0]], vec![1.0, 0.0], 10.0);
        let b = propagate_bounds(&net, &Rect::new(vec![0.0], vec![1.0])).unwrap();
        assert_eq!(b.lows[0], 1.0);
        assert_eq!(b.highs[0], 3.0);
    }

    #[test]
    fn difference_bounds_see_cancellation() {
        // Outputs (x - 5)+ - (x - 5)+ style correlation: y0 = R(x) - R(x - 1)
        // is bounded by 1, invisible to plain intervals on wide cells but
        // exact for the backward relaxation when both units are active.
        let net = Network::new(
            vec![1, 2, 2],
            vec![vec![1.0, 1.0], vec![1.0, -1.0, 0.0, 0.0]],
            vec![vec![0.0, -1.0], vec![0.0, 0.0]],
            vec!["a".into(), "b".into()],
            SelectionRule::Argmax,
        )
        .unwrap();
        let b = propagate_bounds(&net, &Rect::new(vec![5.0], vec![100.0])).unwrap();
        assert!((b.highs[0] - 1.0).abs() < 1e-9, "{:?}", b);
        assert!((b.lows[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn difference_bounds() {
        // y0 = x1 - x2 over the unit square gives [-1, 1].
        let net = affine_net(2, vec![vec![1.0, -1.0], vec![0.0, 0.0]], vec![0.0, 0.0], 10.0);
        let b = propagate_bounds(&net, &Rect::new(vec![0.0, 0.0], vec![1.0, 1.0])).unwrap();
        assert_eq!(b.lows[0], -1.0);
        assert_eq!(b.highs[0], 1.0);
    }

    #[test]
    fn constant_network_singleton() {
        let net = Network::new(
            vec![2, 1, 3],
            vec![vec![0.0, 0.0], vec![0.0, 0.0, 0.0]],
            vec![vec![0.0], vec![0.1, 0.9, 0.3]],
            vec!["a".into(), "b".into(), "c".into()],
            SelectionRule::Argmax,
        )
        .unwrap();
        let cell = Rect::new(vec![-5.0, -5.0], vec![5.0, 5.0]);
        let acts = possible_actions(&net, &cell, ActionSet::empty(), 4).unwrap();
        assert_eq!(acts, ActionSet::singleton(1));
    }

    #[test]
    fn strict_winner_in_linear_region() {
        // Scores (x, 1 - x) on [0.6, 0.9]: output 0 spans [0.6, 0.9], output 1
        // spans [0.1, 0.4]; corner and midpoint enumeration confirms action 0
        // everywhere and dominance proves the singleton.
        let net = affine_net(1, vec![vec![1.0], vec![-1.0]], vec![0.0, 1.0], 10.0);
        let cell = Rect::new(vec![0.6], vec![0.9]);
        for x in [0.6, 0.75, 0.9] {
            assert_eq!(net.best_action(&[x]).unwrap(), 0);
        }
        let acts = possible_actions(&net, &cell, ActionSet::empty(), 0).unwrap();
        assert_eq!(acts, ActionSet::singleton(0));
    }

    #[test]
    fn boundary_cell_keeps_both_actions() {
        // Scores (x, 1 - x) around the crossing at x = 0.5.
        let net = affine_net(1, vec![vec![1.0], vec![-1.0]], vec![0.0, 1.0], 10.0);
        let cell = Rect::new(vec![0.3], vec![0.7]);
        let acts = possible_actions(&net, &cell, ActionSet::empty(), 4).unwrap();
        assert!(acts.contains(0) && acts.contains(1));
    }

    #[test]
    fn argmin_dominance() {
        let net = Network::new(
            vec![1, 1, 2],
            vec![vec![1.0], vec![1.0, 0.0]],
            vec![vec![0.0], vec![0.0, 10.0]],
            vec!["cheap".into(), "dear".into()],
            SelectionRule::Argmin,
        )
        .unwrap();
        let cell = Rect::new(vec![0.0], vec![1.0]);
        let acts = possible_actions(&net, &cell, ActionSet::empty(), 2).unwrap();
        assert_eq!(acts, ActionSet::singleton(0));
    }

    #[test]
    fn candidate_mask_restricts_output() {
        // Ties everywhere: all actions possible, but the mask limits the set.
        let net = Network::new(
            vec![1, 1, 3],
            vec![vec![0.0], vec![0.0, 0.0, 0.0]],
            vec![vec![0.0], vec![0.5, 0.5, 0.5]],
            vec!["a".into(), "b".into(), "c".into()],
            SelectionRule::Argmax,
        )
        .unwrap();
        let cell = Rect::new(vec![0.0], vec![1.0]);
        let full = possible_actions(&net, &cell, ActionSet::empty(), 2).unwrap();
        assert_eq!(full.len(), 3);
        let masked =
            possible_actions(&net, &cell, ActionSet::from_indices([0, 2]), 2).unwrap();
        assert_eq!(masked, ActionSet::from_indices([0, 2]));
    }

    fn random_net(rng: &mut StdRng, sizes: &[usize]) -> Network {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for k in 0..sizes.len() - 1 {
            weights.push(
                (0..sizes[k] * sizes[k + 1])
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect(),
            );
            biases.push((0..sizes[k + 1]).map(|_| rng.gen_range(-0.5..0.5)).collect());
        }
        let labels = (0..*sizes.last().unwrap()).map(|i| format!("a{i}")).collect();
        Network::new(sizes.to_vec(), weights, biases, labels, SelectionRule::Argmax).unwrap()
    }

    fn random_cell(rng: &mut StdRng, dim: usize) -> Rect {
        let mut lows = Vec::new();
        let mut highs = Vec::new();
        for _ in 0..dim {
            let a: f64 = rng.gen_range(-2.0..2.0);
            let w: f64 = rng.gen_range(0.01..1.5);
            lows.push(a);
            highs.push(a + w);
        }
        Rect::new(lows, highs)
    }

    /// The load-bearing property: sampled best actions always lie in the
    /// verified action set, and sampled scores lie in the interval bounds.
    #[test]
    fn soundness_on_random_networks() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..30 {
            let net = random_net(&mut rng, &[3, 8, 8, 4]);
            for _ in 0..10 {
                let cell = random_cell(&mut rng, 3);
                let bounds = propagate_bounds(&net, &cell).unwrap();
                let acts = possible_actions(&net, &cell, ActionSet::empty(), 3).unwrap();
                for _ in 0..50 {
                    let x = cell.sample(&mut rng);
                    let scores = net.evaluate(&x).unwrap();
                    for (i, s) in scores.iter().enumerate() {
                        assert!(*s >= bounds.lows[i] && *s <= bounds.highs[i]);
                    }
                    assert!(acts.contains(net.best_action(&x).unwrap()));
                }
            }
        }
    }

    /// Splitting a cell can only shrink the reported action set, and child
    /// bounds nest inside parent bounds (up to roundoff: parent and child
    /// evaluate the same linear forms along different arithmetic paths).
    #[test]
    fn monotone_under_splitting() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..40 {
            let net = random_net(&mut rng, &[2, 6, 6, 3]);
            let cell = random_cell(&mut rng, 2);
            let parent_bounds = propagate_bounds(&net, &cell).unwrap();
            let parent = possible_actions(&net, &cell, ActionSet::empty(), 2).unwrap();
            let mut union = ActionSet::empty();
            for quadrant in 0..4 {
                let mut sub = cell.clone();
                for d in 0..2 {
                    let mid = cell.midpoint(d);
                    if quadrant >> d & 1 == 0 {
                        sub.highs[d] = mid;
                    } else {
                        sub.lows[d] = mid;
                    }
                }
                let sb = propagate_bounds(&net, &sub).unwrap();
                for i in 0..3 {
                    assert!(sb.lows[i] >= parent_bounds.lows[i] - 1e-12);
                    assert!(sb.highs[i] <= parent_bounds.highs[i] + 1e-12);
                }
                union = union.union(possible_actions(&net, &sub, ActionSet::empty(), 2).unwrap());
            }
            assert!(union.is_subset_of(parent));
        }
    }
}
