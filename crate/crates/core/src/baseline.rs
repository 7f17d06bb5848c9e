//! Independent oracles: exact discrete model checking on tabular policies
//! and a Monte Carlo rollout simulator.
//!
//! Both are deliberately separate from the cell checker's code path so they
//! can serve as cross-checks: the exact checker runs classical fixed-policy
//! reachability value iteration on grid nodes, and the simulator estimates
//! reach probabilities by rolling out the true network policy.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{resolve_mode_nets, DynamicsModel};
use crate::error::{Error, Result};
use crate::geom::Rect;
use crate::network::Network;

/// Rectangular grid of nodes, given by per-dimension node coordinates.
/// Flat indexing runs dimension 0 fastest.
#[derive(Debug, Clone)]
pub struct Grid {
    pub cuts: Vec<Vec<f64>>,
}

impl Grid {
    pub fn new(cuts: Vec<Vec<f64>>) -> Result<Self> {
        if cuts.is_empty() || cuts.iter().any(|c| c.is_empty()) {
            return Err(Error::InvalidConfig("grid needs nodes in every dimension".into()));
        }
        for c in &cuts {
            if c.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig("grid nodes must be strictly increasing".into()));
            }
        }
        Ok(Grid { cuts })
    }

    /// Evenly spaced nodes covering `domain`, `counts[d]` nodes per axis.
    pub fn regular(domain: &Rect, counts: &[usize]) -> Result<Self> {
        if counts.len() != domain.dim() || counts.iter().any(|&c| c < 1) {
            return Err(Error::InvalidConfig("bad grid node counts".into()));
        }
        let cuts = counts
            .iter()
            .enumerate()
            .map(|(d, &n)| {
                (0..n)
                    .map(|i| {
                        if n == 1 {
                            domain.midpoint(d)
                        } else {
                            domain.lows[d] + domain.width(d) * i as f64 / (n - 1) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        Grid::new(cuts)
    }

    pub fn dim(&self) -> usize {
        self.cuts.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.cuts.iter().map(Vec::len).product()
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut rem = flat;
        self.cuts
            .iter()
            .map(|c| {
                let i = rem % c.len();
                rem /= c.len();
                c[i]
            })
            .collect()
    }

    /// Flat index of the nearest node; ties break toward the lower index.
    pub fn nearest(&self, state: &[f64]) -> usize {
        let mut flat = 0;
        let mut stride = 1;
        for (d, c) in self.cuts.iter().enumerate() {
            let x = state[d];
            let i = match c.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
                Ok(i) => i,
                Err(ins) => {
                    if ins == 0 {
                        0
                    } else if ins == c.len() {
                        c.len() - 1
                    } else if x - c[ins - 1] <= c[ins] - x {
                        ins - 1
                    } else {
                        ins
                    }
                }
            };
            flat += i * stride;
            stride *= c.len();
        }
        flat
    }
}

/// Probability interpolation at off-grid states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Nearest,
    /// Multilinear interpolation of probabilities. Smooth for plotting, but
    /// not guaranteed to preserve the overapproximation.
    Multilinear,
}

/// Interpolate per-node values at an arbitrary state.
pub fn interpolate(grid: &Grid, values: &[f64], state: &[f64], how: Interpolation) -> f64 {
    match how {
        Interpolation::Nearest => values[grid.nearest(state)],
        Interpolation::Multilinear => {
            let d = grid.dim();
            // Bracketing index and fraction per dimension, clamped to the grid.
            let mut base = Vec::with_capacity(d);
            let mut frac = Vec::with_capacity(d);
            for (dim, c) in grid.cuts.iter().enumerate() {
                let x = state[dim];
                if c.len() == 1 || x <= c[0] {
                    base.push(0);
                    frac.push(0.0);
                } else if x >= *c.last().unwrap() {
                    base.push(c.len().saturating_sub(2));
                    frac.push(1.0);
                } else {
                    let ins = c.partition_point(|&v| v <= x);
                    base.push(ins - 1);
                    frac.push((x - c[ins - 1]) / (c[ins] - c[ins - 1]));
                }
            }
            let mut acc = 0.0;
            for corner in 0..1usize << d {
                let mut w = 1.0;
                let mut flat = 0;
                let mut stride = 1;
                for dim in 0..d {
                    let hi = corner >> dim & 1 == 1;
                    let nodes = grid.cuts[dim].len();
                    let idx = if hi && nodes > 1 { base[dim] + 1 } else { base[dim] };
                    w *= if hi { frac[dim] } else { 1.0 - frac[dim] };
                    flat += idx.min(nodes - 1) * stride;
                    stride *= nodes;
                }
                if w > 0.0 {
                    acc += w * values[flat];
                }
            }
            acc
        }
    }
}

/// Tabular policy: an action per grid node, looked up by nearest node.
#[derive(Debug, Clone)]
pub struct TabularPolicy {
    pub grid: Grid,
    pub actions: Vec<usize>,
}

impl TabularPolicy {
    pub fn new(grid: Grid, actions: Vec<usize>) -> Result<Self> {
        if actions.len() != grid.num_nodes() {
            return Err(Error::InvalidConfig(format!(
                "{} actions for {} grid nodes",
                actions.len(),
                grid.num_nodes()
            )));
        }
        Ok(TabularPolicy { grid, actions })
    }

    pub fn action_at(&self, state: &[f64]) -> usize {
        self.actions[self.grid.nearest(state)]
    }
}

/// Classical fixed-policy reachability value iteration on the grid nodes.
///
/// Point dynamics are evaluated at each node and successors snapped to the
/// nearest node, so the result is exact for models whose outcomes map nodes
/// to nodes. Single-mode models only. Returns one probability per node,
/// converged monotonically from zero to within `eps`.
pub fn exact_check(
    policy: &TabularPolicy,
    model: &dyn DynamicsModel,
    eps: f64,
) -> Result<Vec<f64>> {
    if model.num_modes() != 1 {
        return Err(Error::InvalidConfig(
            "exact_check supports single-mode models only".into(),
        ));
    }
    if policy.grid.dim() != model.state_dim() {
        return Err(Error::InvalidConfig("grid dimension does not match model".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig("eps must be positive".into()));
    }
    let n = policy.grid.num_nodes();
    let mut unsafe_node = vec![false; n];
    let mut safe_node = vec![false; n];
    // Successor table: node -> (probability, next node) list.
    let mut succ: Vec<Vec<(f64, usize)>> = Vec::with_capacity(n);
    for s in 0..n {
        let x = policy.grid.node(s);
        unsafe_node[s] = model.is_unsafe_point(0, &x);
        safe_node[s] = model.absorbing_safe_point(0, &x);
        if unsafe_node[s] || safe_node[s] {
            succ.push(Vec::new());
            continue;
        }
        let a = policy.actions[s];
        let probs = model.outcome_probs(0, a)?;
        let mut list = Vec::with_capacity(probs.len());
        for (i, &p) in probs.iter().enumerate() {
            let (_, next) = model.step_point(0, &x, a, i)?;
            list.push((p, policy.grid.nearest(&next)));
        }
        succ.push(list);
    }

    let mut probs: Vec<f64> = unsafe_node
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect();
    let mut next = probs.clone();
    // Monotone from below; each Jacobi sweep is a full application of the
    // fixed-policy operator.
    for _ in 0..1_000_000 {
        let mut delta = 0.0f64;
        for s in 0..n {
            if unsafe_node[s] || safe_node[s] {
                continue;
            }
            let v: f64 = succ[s].iter().map(|&(p, t)| p * probs[t]).sum();
            delta = delta.max((v - probs[s]).abs());
            next[s] = v;
        }
        std::mem::swap(&mut probs, &mut next);
        if delta < eps {
            break;
        }
    }
    Ok(probs)
}

/// Monte Carlo estimate of a reach probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub hits: u64,
    pub rollouts: u64,
}

/// Estimate the probability of reaching the unsafe set from `start` under
/// the exact network policy, by `n` seeded rollouts capped at `horizon`
/// steps. Episodes end on reaching the unsafe set, an absorbing safe
/// region, or leaving the domain (time expiry counts as safe).
///
/// Each rollout uses an independent RNG stream derived from
/// `(seed, rollout index)`, so results are reproducible and independent of
/// scheduling order.
pub fn monte_carlo(
    nets: &[&Network],
    model: &dyn DynamicsModel,
    start_mode: usize,
    start: &[f64],
    n: usize,
    horizon: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n == 0 || horizon == 0 {
        return Err(Error::InvalidConfig("need n >= 1 and horizon >= 1".into()));
    }
    if start_mode >= model.num_modes() {
        return Err(Error::InvalidConfig(format!("start mode {start_mode} out of range")));
    }
    let nets = resolve_mode_nets(nets, model)?;
    let domain = model.domain();
    let hits: u64 = (0..n as u64)
        .into_par_iter()
        .map(|rollout| -> Result<u64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rollout.wrapping_add(1));
            let mut mode = start_mode;
            let mut state = start.to_vec();
            for _ in 0..horizon {
                if !domain.contains_point(&state) {
                    return Ok(0);
                }
                if model.is_unsafe_point(mode, &state) {
                    return Ok(1);
                }
                if model.absorbing_safe_point(mode, &state) {
                    return Ok(0);
                }
                let action = nets[mode].best_action(&state)?;
                let probs = model.outcome_probs(mode, action)?;
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut outcome = probs.len() - 1;
                for (i, &p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        outcome = i;
                        break;
                    }
                }
                let (m, s) = model.step_point(mode, &state, action, outcome)?;
                mode = m;
                state = s;
            }
            Ok(0)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;

    let estimate = hits as f64 / n as f64;
    let stderr = (estimate * (1.0 - estimate) / n as f64).sqrt();
    Ok(McEstimate {
        estimate,
        stderr,
        hits,
        rollouts: n as u64,
    })
}

/// Start states for simulation inside a cell: the center first, then
/// uniform samples.
pub fn sample_starts(rect: &Rect, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    if count > 0 {
        out.push(rect.center());
    }
    while out.len() < count {
        out.push(rect.sample(&mut rng));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::SelectionRule;

    /// One-dimensional three-node chain: node 0.5 is live, node 1.5 is the
    /// unsafe target, node 2.5 absorbs safely. Action 0 moves to the unsafe
    /// node with probability 0.3; the remaining 0.7 either self-loops
    /// (`absorbing_escape = false`) or jumps to the safe absorber.
    struct Chain {
        absorbing_escape: bool,
        labels: Vec<String>,
    }

    impl Chain {
        fn new(absorbing_escape: bool) -> Self {
            Chain {
                absorbing_escape,
                labels: vec!["go".into(), "noop".into()],
            }
        }
    }

    impl DynamicsModel for Chain {
        fn state_dim(&self) -> usize {
            1
        }
        fn num_modes(&self) -> usize {
            1
        }
        fn num_actions(&self) -> usize {
            2
        }
        fn action_labels(&self) -> &[String] {
            &self.labels
        }
        fn domain(&self) -> Rect {
            Rect::new(vec![0.0], vec![3.0])
        }
        fn outcomes(
            &self,
            _m: usize,
            _c: &Rect,
            _a: usize,
        ) -> Result<Vec<crate::dynamics::TransitionOutcome>> {
            unreachable!("chain is only used through point dynamics")
        }
        fn is_unsafe(&self, _m: usize, _c: &Rect) -> bool {
            false
        }
        fn absorbing_safe(&self, _m: usize, _c: &Rect) -> bool {
            false
        }
        fn outcome_probs(&self, _m: usize, _a: usize) -> Result<Vec<f64>> {
            Ok(vec![0.3, 0.7])
        }
        fn step_point(
            &self,
            _m: usize,
            s: &[f64],
            _a: usize,
            outcome: usize,
        ) -> Result<(usize, Vec<f64>)> {
            let next = match outcome {
                0 => s[0] + 1.0,
                _ if self.absorbing_escape => s[0] + 2.0,
                _ => s[0],
            };
            Ok((0, vec![next.min(2.5)]))
        }
        fn is_unsafe_point(&self, _m: usize, s: &[f64]) -> bool {
            s[0] > 1.0 && s[0] < 2.0
        }
        fn absorbing_safe_point(&self, _m: usize, s: &[f64]) -> bool {
            s[0] >= 2.0
        }
    }

    fn chain_policy() -> TabularPolicy {
        let grid = Grid::new(vec![vec![0.5, 1.5, 2.5]]).unwrap();
        TabularPolicy::new(grid, vec![0, 0, 0]).unwrap()
    }

    #[test]
    fn chain_reaches_unsafe_almost_surely() {
        let probs = exact_check(&chain_policy(), &Chain::new(false), 1e-12).unwrap();
        assert!((probs[0] - 1.0).abs() < 1e-9, "{probs:?}");
        assert_eq!(probs[1], 1.0);
        assert_eq!(probs[2], 0.0);
    }

    #[test]
    fn chain_with_safe_escape_is_geometric() {
        let probs = exact_check(&chain_policy(), &Chain::new(true), 1e-13).unwrap();
        assert!((probs[0] - 0.3).abs() < 1e-12, "{probs:?}");
    }

    #[test]
    fn all_unsafe_grid_is_all_ones() {
        struct AllBad(Vec<String>);
        impl DynamicsModel for AllBad {
            fn state_dim(&self) -> usize {
                1
            }
            fn num_modes(&self) -> usize {
                1
            }
            fn num_actions(&self) -> usize {
                2
            }
            fn action_labels(&self) -> &[String] {
                &self.0
            }
            fn domain(&self) -> Rect {
                Rect::new(vec![0.0], vec![1.0])
            }
            fn outcomes(
                &self,
                _m: usize,
                _c: &Rect,
                _a: usize,
            ) -> Result<Vec<crate::dynamics::TransitionOutcome>> {
                unreachable!()
            }
            fn is_unsafe(&self, _m: usize, _c: &Rect) -> bool {
                true
            }
            fn absorbing_safe(&self, _m: usize, _c: &Rect) -> bool {
                false
            }
            fn outcome_probs(&self, _m: usize, _a: usize) -> Result<Vec<f64>> {
                Ok(vec![1.0])
            }
            fn step_point(
                &self,
                _m: usize,
                s: &[f64],
                _a: usize,
                _o: usize,
            ) -> Result<(usize, Vec<f64>)> {
                Ok((0, s.to_vec()))
            }
            fn is_unsafe_point(&self, _m: usize, _s: &[f64]) -> bool {
                true
            }
            fn absorbing_safe_point(&self, _m: usize, _s: &[f64]) -> bool {
                false
            }
        }
        let grid = Grid::regular(&Rect::new(vec![0.0], vec![1.0]), &[5]).unwrap();
        let policy = TabularPolicy::new(grid, vec![0; 5]).unwrap();
        let probs = exact_check(&policy, &AllBad(vec!["a".into(), "b".into()]), 1e-9).unwrap();
        assert!(probs.iter().all(|&p| p == 1.0));
    }

    fn constant_net(actions: usize) -> Network {
        let mut bias = vec![0.0; actions];
        bias[0] = 1.0;
        Network::new(
            vec![1, 1, actions],
            vec![vec![0.0], vec![0.0; actions]],
            vec![vec![0.0], bias],
            (0..actions)
                .map(|i| if i == 0 { "go".into() } else { "noop".into() })
                .collect(),
            SelectionRule::Argmax,
        )
        .unwrap()
    }

    #[test]
    fn mc_start_inside_unsafe() {
        let net = constant_net(2);
        let m = Chain::new(true);
        let est = monte_carlo(&[&net], &m, 0, &[1.5], 100, 10, 1).unwrap();
        assert_eq!(est.estimate, 1.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn mc_is_seed_deterministic() {
        let net = constant_net(2);
        let m = Chain::new(true);
        let a = monte_carlo(&[&net], &m, 0, &[0.5], 500, 200, 42).unwrap();
        let b = monte_carlo(&[&net], &m, 0, &[0.5], 500, 200, 42).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo(&[&net], &m, 0, &[0.5], 500, 200, 43).unwrap();
        assert!(a.hits != c.hits || a.estimate == c.estimate);
    }

    /// Binomial concentration against the closed-form p = 0.3: at n = 1000
    /// the estimate stays within three standard errors for at least 99 of
    /// 100 seeds.
    #[test]
    fn mc_concentrates_around_exact_probability() {
        let net = constant_net(2);
        let m = Chain::new(true);
        let p = 0.3;
        let sigma = (p * (1.0 - p) / 1000.0f64).sqrt();
        let mut ok = 0;
        for seed in 0..100 {
            let est = monte_carlo(&[&net], &m, 0, &[0.5], 1000, 500, seed).unwrap();
            if (est.estimate - p).abs() <= 3.0 * sigma {
                ok += 1;
            }
        }
        assert!(ok >= 99, "only {ok}/100 seeds within 3 sigma");
    }

    #[test]
    fn mc_stderr_scales_with_sqrt_n() {
        let net = constant_net(2);
        let m = Chain::new(true);
        let a = monte_carlo(&[&net], &m, 0, &[0.5], 1000, 500, 7).unwrap();
        let b = monte_carlo(&[&net], &m, 0, &[0.5], 2000, 500, 7).unwrap();
        let ratio = a.stderr / b.stderr;
        assert!((ratio - 2.0f64.sqrt()).abs() < 0.05 * 2.0f64.sqrt(), "ratio {ratio}");
    }

    #[test]
    fn nearest_node_tie_breaks_low() {
        let grid = Grid::new(vec![vec![0.0, 1.0]]).unwrap();
        assert_eq!(grid.nearest(&[0.5]), 0);
        assert_eq!(grid.nearest(&[0.51]), 1);
        assert_eq!(grid.nearest(&[-3.0]), 0);
        assert_eq!(grid.nearest(&[9.0]), 1);
    }

    #[test]
    fn multilinear_interpolation() {
        let grid = Grid::new(vec![vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        // values indexed dim-0 fastest: (0,0), (1,0), (0,1), (1,1)
        let values = [0.0, 1.0, 2.0, 3.0];
        let at = |x: f64, y: f64| interpolate(&grid, &values, &[x, y], Interpolation::Multilinear);
        assert!((at(0.5, 0.5) - 1.5).abs() < 1e-12);
        assert!((at(1.0, 0.0) - 1.0).abs() < 1e-12);
        assert!((at(0.25, 0.0) - 0.25).abs() < 1e-12);
        // Clamped outside the grid.
        assert!((at(2.0, 2.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn sample_starts_center_first() {
        let rect = Rect::new(vec![0.0, 2.0], vec![1.0, 4.0]);
        let starts = sample_starts(&rect, 5, 3);
        assert_eq!(starts.len(), 5);
        assert_eq!(starts[0], vec![0.5, 3.0]);
        for s in &starts {
            assert!(rect.contains_point(s));
        }
    }
}
