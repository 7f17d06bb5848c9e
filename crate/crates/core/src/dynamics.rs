//! Stochastic transition models with finitely many outcomes per action.
//!
//! A model reports, for a cell and an action, a short list of outcomes: each
//! carries a probability and an image box that contains the successor of
//! every point in the cell under that outcome. Image boxes may leave the
//! domain (time expiry); the checker treats the out-of-domain portion as
//! safe. Models also expose exact point dynamics for simulation and for the
//! discrete-oracle baselines.

use crate::error::{Error, Result};
use crate::geom::Rect;

/// Standard gravity, ft/s^2.
pub const G: f64 = 32.2;

/// What happens to state components that would leave their modeled range.
///
/// `Clamp` closes the system (walls / velocity saturation); `TreatAsSafe`
/// lets the image box leave the domain, and the out-of-domain portion is
/// treated as never reaching the unsafe set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryPolicy {
    #[default]
    Clamp,
    TreatAsSafe,
}

/// One discrete stochastic outcome of taking an action from a cell.
#[derive(Debug, Clone)]
pub struct TransitionOutcome {
    /// Probability of this outcome, in (0, 1].
    pub probability: f64,
    /// Box containing the successor of every point in the source cell.
    pub image: Rect,
    /// Probability field the successors land in (previous-advisory rewiring;
    /// always 0 for single-mode models).
    pub next_mode: usize,
}

/// Contract for pluggable dynamics.
///
/// `mode` indexes a discrete coordinate carried alongside the continuous
/// state (the previous advisory for the collision-avoidance models); models
/// without one report a single mode. All methods are pure.
pub trait DynamicsModel: Sync {
    /// Dimension of the continuous state.
    fn state_dim(&self) -> usize;
    fn num_modes(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn action_labels(&self) -> &[String];
    /// Continuous domain, shared by all modes.
    fn domain(&self) -> Rect;
    /// Index of the deterministic countdown dimension, if the model has one.
    /// Its value drops by exactly one per step, which makes the transition
    /// graph layered and enables single-pass backward checking.
    fn tau_dim(&self) -> Option<usize> {
        None
    }

    /// Sound outcome list: for every point in `cell`, its successor under
    /// outcome `i` lies inside `outcomes[i].image`. Probabilities sum to 1.
    fn outcomes(&self, mode: usize, cell: &Rect, action: usize) -> Result<Vec<TransitionOutcome>>;

    /// Does the cell intersect the unsafe set?
    fn is_unsafe(&self, mode: usize, cell: &Rect) -> bool;

    /// Is the cell contained in an absorbing safe region?
    fn absorbing_safe(&self, mode: usize, cell: &Rect) -> bool;

    /// Outcome probabilities for sampling (same order as `outcomes`).
    fn outcome_probs(&self, mode: usize, action: usize) -> Result<Vec<f64>>;

    /// Exact successor of a single state under a specific outcome.
    fn step_point(
        &self,
        mode: usize,
        state: &[f64],
        action: usize,
        outcome: usize,
    ) -> Result<(usize, Vec<f64>)>;

    fn is_unsafe_point(&self, mode: usize, state: &[f64]) -> bool;
    fn absorbing_safe_point(&self, mode: usize, state: &[f64]) -> bool;
}

fn clamp_interval(lo: f64, hi: f64, min: f64, max: f64) -> (f64, f64) {
    (lo.clamp(min, max), hi.clamp(min, max))
}

/// Resolve the caller-supplied network list against the model's modes: a
/// single network is shared by every mode, otherwise one per mode. Validates
/// input dimension and action labels.
pub(crate) fn resolve_mode_nets<'a>(
    nets: &[&'a crate::network::Network],
    model: &dyn DynamicsModel,
) -> Result<Vec<&'a crate::network::Network>> {
    let modes = model.num_modes();
    let picked: Vec<&crate::network::Network> = if nets.len() == 1 {
        vec![nets[0]; modes]
    } else if nets.len() == modes {
        nets.to_vec()
    } else {
        return Err(Error::InvalidConfig(format!(
            "model has {modes} previous-advisory modes; pass 1 network or {modes}, got {}",
            nets.len()
        )));
    };
    for net in &picked {
        if net.input_dim() != model.state_dim() {
            return Err(Error::InvalidConfig(format!(
                "network input dimension {} does not match model state dimension {}",
                net.input_dim(),
                model.state_dim()
            )));
        }
        if net.action_labels() != model.action_labels() {
            return Err(Error::InvalidConfig(format!(
                "network action labels {:?} do not match model labels {:?}",
                net.action_labels(),
                model.action_labels()
            )));
        }
    }
    Ok(picked)
}

// ---------------------------------------------------------------------------
// Continuum world
// ---------------------------------------------------------------------------

/// The slippery continuum world: a 20x20 box with a pit in the center and a
/// goal corner. Taking an action moves one unit in the chosen direction with
/// probability 0.7 and one unit in each other direction with probability 0.1.
#[derive(Debug, Clone)]
pub struct ContinuumWorld {
    pub pit: Option<Rect>,
    pub goal: Option<Rect>,
    pub boundary: BoundaryPolicy,
    labels: Vec<String>,
}

/// Fixed direction order; outcome `i` of any action is a move in direction
/// `i`, so outcome lists always read up, down, left, right.
const DIRECTIONS: [[f64; 2]; 4] = [[0.0, 1.0], [0.0, -1.0], [-1.0, 0.0], [1.0, 0.0]];

impl ContinuumWorld {
    pub const SIZE: f64 = 20.0;

    pub fn new() -> Self {
        ContinuumWorld {
            pit: Some(Rect::new(vec![8.0, 8.0], vec![12.0, 12.0])),
            goal: Some(Rect::new(vec![19.0, 19.0], vec![20.0, 20.0])),
            boundary: BoundaryPolicy::Clamp,
            labels: ["up", "down", "left", "right"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }

    pub fn with_pit(mut self, pit: Option<Rect>) -> Self {
        self.pit = pit;
        self
    }

    pub fn with_goal(mut self, goal: Option<Rect>) -> Self {
        self.goal = goal;
        self
    }

    pub fn with_boundary(mut self, boundary: BoundaryPolicy) -> Self {
        self.boundary = boundary;
        self
    }
}

impl Default for ContinuumWorld {
    fn default() -> Self {
        Self::new()
    }
}

impl DynamicsModel for ContinuumWorld {
    fn state_dim(&self) -> usize {
        2
    }

    fn num_modes(&self) -> usize {
        1
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn action_labels(&self) -> &[String] {
        &self.labels
    }

    fn domain(&self) -> Rect {
        Rect::new(vec![0.0, 0.0], vec![Self::SIZE, Self::SIZE])
    }

    fn outcomes(&self, _mode: usize, cell: &Rect, action: usize) -> Result<Vec<TransitionOutcome>> {
        if action >= 4 {
            return Err(Error::UnknownAction(action));
        }
        let mut out = Vec::with_capacity(4);
        for (dir, delta) in DIRECTIONS.iter().enumerate() {
            let p = if dir == action { 0.7 } else { 0.1 };
            let mut lows = vec![cell.lows[0] + delta[0], cell.lows[1] + delta[1]];
            let mut highs = vec![cell.highs[0] + delta[0], cell.highs[1] + delta[1]];
            if self.boundary == BoundaryPolicy::Clamp {
                for d in 0..2 {
                    let (lo, hi) = clamp_interval(lows[d], highs[d], 0.0, Self::SIZE);
                    lows[d] = lo;
                    highs[d] = hi;
                }
            }
            out.push(TransitionOutcome {
                probability: p,
                image: Rect::new(lows, highs),
                next_mode: 0,
            });
        }
        Ok(out)
    }

    fn is_unsafe(&self, _mode: usize, cell: &Rect) -> bool {
        self.pit.as_ref().is_some_and(|pit| cell.overlaps_open(pit))
    }

    fn absorbing_safe(&self, _mode: usize, cell: &Rect) -> bool {
        self.goal.as_ref().is_some_and(|goal| goal.contains_rect(cell))
    }

    fn outcome_probs(&self, _mode: usize, action: usize) -> Result<Vec<f64>> {
        if action >= 4 {
            return Err(Error::UnknownAction(action));
        }
        Ok((0..4).map(|d| if d == action { 0.7 } else { 0.1 }).collect())
    }

    fn step_point(
        &self,
        _mode: usize,
        state: &[f64],
        action: usize,
        outcome: usize,
    ) -> Result<(usize, Vec<f64>)> {
        if action >= 4 || outcome >= 4 {
            return Err(Error::UnknownAction(action.max(outcome)));
        }
        let delta = DIRECTIONS[outcome];
        let mut next = vec![state[0] + delta[0], state[1] + delta[1]];
        if self.boundary == BoundaryPolicy::Clamp {
            for v in &mut next {
                *v = v.clamp(0.0, Self::SIZE);
            }
        }
        Ok((0, next))
    }

    fn is_unsafe_point(&self, _mode: usize, state: &[f64]) -> bool {
        self.pit.as_ref().is_some_and(|pit| pit.contains_point(state))
    }

    fn absorbing_safe_point(&self, _mode: usize, state: &[f64]) -> bool {
        self.goal.as_ref().is_some_and(|goal| goal.contains_point(state))
    }
}

// ---------------------------------------------------------------------------
// VerticalCAS vertical logic
// ---------------------------------------------------------------------------

/// The nine vertical advisories, in table order.
pub const ADVISORY_LABELS: [&str; 9] = [
    "COC", "DNC", "DND", "DES1500", "CL1500", "SDES1500", "SCL1500", "SDES2500", "SCL2500",
];

/// Ownship acceleration response for a previous advisory: probabilities and
/// matching accelerations in ft/s^2. The ownship responds to its previous
/// advisory (pilot delay) and accelerates against it 20% of the time.
pub fn ownship_response(prev_advisory: usize) -> Result<([f64; 3], [f64; 3])> {
    let row = match prev_advisory {
        0 => ([0.34, 0.33, 0.33], [0.0, -G / 3.0, G / 3.0]), // COC
        1 => ([0.50, 0.30, 0.20], [-G / 3.0, -G / 2.0, G / 3.0]), // DNC
        2 => ([0.50, 0.30, 0.20], [G / 3.0, G / 2.0, -G / 3.0]), // DND
        3 => ([0.50, 0.30, 0.20], [-G / 3.0, -G / 2.0, G / 3.0]), // DES1500
        4 => ([0.50, 0.30, 0.20], [G / 3.0, G / 2.0, -G / 3.0]), // CL1500
        5 => ([0.50, 0.30, 0.20], [-G / 2.5, -G / 2.0, G / 3.0]), // SDES1500
        6 => ([0.50, 0.30, 0.20], [G / 2.5, G / 2.0, -G / 3.0]), // SCL1500
        7 => ([0.50, 0.30, 0.20], [-G / 2.5, -G / 2.0, G / 3.0]), // SDES2500
        8 => ([0.50, 0.30, 0.20], [G / 2.5, G / 2.0, -G / 3.0]), // SCL2500
        other => return Err(Error::UnknownAction(other)),
    };
    Ok(row)
}

/// Intruder accelerations, each with probability 1/3.
pub const INTRUDER_ACCELS: [f64; 3] = [-G / 8.0, G / 8.0, 0.0];

const H_RANGE: (f64, f64) = (-8000.0, 8000.0);
const VRATE_RANGE: (f64, f64) = (-100.0, 100.0);
const TAU_RANGE: (f64, f64) = (0.0, 40.0);
/// NMAC: vertical separation strictly under 100 ft at the time of closest
/// horizontal approach.
const NMAC_H: f64 = 100.0;

/// Full vertical collision-avoidance model. State is `[h, hdot0, hdot1,
/// tau]` (relative intruder altitude ft, ownship and intruder vertical rates
/// ft/s, seconds to loss of lateral separation); the previous advisory is
/// the discrete mode. One-second steps:
///
/// ```text
/// h'     = h + hdot1 + 0.5*a1 - hdot0 - 0.5*a0
/// hdot0' = hdot0 + a0          hdot1' = hdot1 + a1
/// tau'   = tau - 1             mode'  = action
/// ```
///
/// with the ownship acceleration drawn from the previous advisory's response
/// row and the intruder acceleration uniform over three values, giving nine
/// outcomes per action.
#[derive(Debug, Clone)]
pub struct VcasModel {
    pub boundary: BoundaryPolicy,
    labels: Vec<String>,
}

impl VcasModel {
    pub fn new() -> Self {
        VcasModel {
            boundary: BoundaryPolicy::Clamp,
            labels: ADVISORY_LABELS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn with_boundary(mut self, boundary: BoundaryPolicy) -> Self {
        self.boundary = boundary;
        self
    }

    fn clamp(&self) -> bool {
        self.boundary == BoundaryPolicy::Clamp
    }
}

impl Default for VcasModel {
    fn default() -> Self {
        Self::new()
    }
}

fn nmac_cell(cell: &Rect, h_dim: usize, tau_dim: usize) -> bool {
    cell.lows[tau_dim] < 1.0 && cell.lows[h_dim] < NMAC_H && cell.highs[h_dim] > -NMAC_H
}

fn nmac_point(state: &[f64], h_dim: usize, tau_dim: usize) -> bool {
    state[tau_dim] < 1.0 && state[h_dim].abs() < NMAC_H
}

impl DynamicsModel for VcasModel {
    fn state_dim(&self) -> usize {
        4
    }

    fn num_modes(&self) -> usize {
        9
    }

    fn num_actions(&self) -> usize {
        9
    }

    fn action_labels(&self) -> &[String] {
        &self.labels
    }

    fn domain(&self) -> Rect {
        Rect::new(
            vec![H_RANGE.0, VRATE_RANGE.0, VRATE_RANGE.0, TAU_RANGE.0],
            vec![H_RANGE.1, VRATE_RANGE.1, VRATE_RANGE.1, TAU_RANGE.1],
        )
    }

    fn tau_dim(&self) -> Option<usize> {
        Some(3)
    }

    fn outcomes(&self, mode: usize, cell: &Rect, action: usize) -> Result<Vec<TransitionOutcome>> {
        if action >= 9 {
            return Err(Error::UnknownAction(action));
        }
        let (probs, accels) = ownship_response(mode)?;
        let mut out = Vec::with_capacity(9);
        for (&p_own, &a0) in probs.iter().zip(&accels) {
            for &a1 in &INTRUDER_ACCELS {
                // Componentwise affine in (h, hdot0, hdot1) with scalar
                // accelerations, so the interval image is exact before
                // clamping.
                let shift = 0.5 * a1 - 0.5 * a0;
                let mut h_lo = cell.lows[0] + cell.lows[2] - cell.highs[1] + shift;
                let mut h_hi = cell.highs[0] + cell.highs[2] - cell.lows[1] + shift;
                let mut v0_lo = cell.lows[1] + a0;
                let mut v0_hi = cell.highs[1] + a0;
                let mut v1_lo = cell.lows[2] + a1;
                let mut v1_hi = cell.highs[2] + a1;
                if self.clamp() {
                    (h_lo, h_hi) = clamp_interval(h_lo, h_hi, H_RANGE.0, H_RANGE.1);
                    (v0_lo, v0_hi) = clamp_interval(v0_lo, v0_hi, VRATE_RANGE.0, VRATE_RANGE.1);
                    (v1_lo, v1_hi) = clamp_interval(v1_lo, v1_hi, VRATE_RANGE.0, VRATE_RANGE.1);
                }
                // tau decrements deterministically and is never clamped; the
                // checker treats the portion below tau = 0 as expired.
                out.push(TransitionOutcome {
                    probability: p_own / 3.0,
                    image: Rect::new(
                        vec![h_lo, v0_lo, v1_lo, cell.lows[3] - 1.0],
                        vec![h_hi, v0_hi, v1_hi, cell.highs[3] - 1.0],
                    ),
                    next_mode: action,
                });
            }
        }
        Ok(out)
    }

    fn is_unsafe(&self, _mode: usize, cell: &Rect) -> bool {
        nmac_cell(cell, 0, 3)
    }

    fn absorbing_safe(&self, _mode: usize, _cell: &Rect) -> bool {
        false
    }

    fn outcome_probs(&self, mode: usize, _action: usize) -> Result<Vec<f64>> {
        let (probs, _) = ownship_response(mode)?;
        let mut out = Vec::with_capacity(9);
        for &p in &probs {
            for _ in 0..3 {
                out.push(p / 3.0);
            }
        }
        Ok(out)
    }

    fn step_point(
        &self,
        mode: usize,
        state: &[f64],
        action: usize,
        outcome: usize,
    ) -> Result<(usize, Vec<f64>)> {
        if action >= 9 || outcome >= 9 {
            return Err(Error::UnknownAction(action.max(outcome)));
        }
        let (_, accels) = ownship_response(mode)?;
        let a0 = accels[outcome / 3];
        let a1 = INTRUDER_ACCELS[outcome % 3];
        let mut h = state[0] + state[2] + 0.5 * a1 - state[1] - 0.5 * a0;
        let mut v0 = state[1] + a0;
        let mut v1 = state[2] + a1;
        if self.clamp() {
            h = h.clamp(H_RANGE.0, H_RANGE.1);
            v0 = v0.clamp(VRATE_RANGE.0, VRATE_RANGE.1);
            v1 = v1.clamp(VRATE_RANGE.0, VRATE_RANGE.1);
        }
        Ok((action, vec![h, v0, v1, state[3] - 1.0]))
    }

    fn is_unsafe_point(&self, _mode: usize, state: &[f64]) -> bool {
        nmac_point(state, 0, 3)
    }

    fn absorbing_safe_point(&self, _mode: usize, _state: &[f64]) -> bool {
        false
    }
}

// ---------------------------------------------------------------------------
// VerticalCAS slice (intruder rate fixed)
// ---------------------------------------------------------------------------

/// Desk-scale slice of the vertical logic with the intruder's vertical rate
/// frozen (no intruder acceleration). State is `[h, hdot0, tau]`; the
/// advisory set is reduced to COC, DES1500, CL1500 with their full response
/// rows, giving three outcomes per action.
#[derive(Debug, Clone)]
pub struct VcasSliceModel {
    pub intruder_rate: f64,
    pub boundary: BoundaryPolicy,
    labels: Vec<String>,
}

/// Advisory indices (into the full table) retained by the slice.
const SLICE_ADVISORIES: [usize; 3] = [0, 3, 4];

impl VcasSliceModel {
    pub fn new(intruder_rate: f64) -> Self {
        VcasSliceModel {
            intruder_rate,
            boundary: BoundaryPolicy::Clamp,
            labels: SLICE_ADVISORIES
                .iter()
                .map(|&i| ADVISORY_LABELS[i].to_string())
                .collect(),
        }
    }

    pub fn with_boundary(mut self, boundary: BoundaryPolicy) -> Self {
        self.boundary = boundary;
        self
    }

    fn response(&self, mode: usize) -> Result<([f64; 3], [f64; 3])> {
        let adv = *SLICE_ADVISORIES
            .get(mode)
            .ok_or(Error::UnknownAction(mode))?;
        ownship_response(adv)
    }
}

impl DynamicsModel for VcasSliceModel {
    fn state_dim(&self) -> usize {
        3
    }

    fn num_modes(&self) -> usize {
        3
    }

    fn num_actions(&self) -> usize {
        3
    }

    fn action_labels(&self) -> &[String] {
        &self.labels
    }

    fn domain(&self) -> Rect {
        Rect::new(
            vec![H_RANGE.0, VRATE_RANGE.0, TAU_RANGE.0],
            vec![H_RANGE.1, VRATE_RANGE.1, TAU_RANGE.1],
        )
    }

    fn tau_dim(&self) -> Option<usize> {
        Some(2)
    }

    fn outcomes(&self, mode: usize, cell: &Rect, action: usize) -> Result<Vec<TransitionOutcome>> {
        if action >= 3 {
            return Err(Error::UnknownAction(action));
        }
        let (probs, accels) = self.response(mode)?;
        let mut out = Vec::with_capacity(3);
        for (&p, &a0) in probs.iter().zip(&accels) {
            let shift = self.intruder_rate - 0.5 * a0;
            let mut h_lo = cell.lows[0] - cell.highs[1] + shift;
            let mut h_hi = cell.highs[0] - cell.lows[1] + shift;
            let mut v0_lo = cell.lows[1] + a0;
            let mut v0_hi = cell.highs[1] + a0;
            if self.boundary == BoundaryPolicy::Clamp {
                (h_lo, h_hi) = clamp_interval(h_lo, h_hi, H_RANGE.0, H_RANGE.1);
                (v0_lo, v0_hi) = clamp_interval(v0_lo, v0_hi, VRATE_RANGE.0, VRATE_RANGE.1);
            }
            out.push(TransitionOutcome {
                probability: p,
                image: Rect::new(
                    vec![h_lo, v0_lo, cell.lows[2] - 1.0],
                    vec![h_hi, v0_hi, cell.highs[2] - 1.0],
                ),
                next_mode: action,
            });
        }
        Ok(out)
    }

    fn is_unsafe(&self, _mode: usize, cell: &Rect) -> bool {
        nmac_cell(cell, 0, 2)
    }

    fn absorbing_safe(&self, _mode: usize, _cell: &Rect) -> bool {
        false
    }

    fn outcome_probs(&self, mode: usize, _action: usize) -> Result<Vec<f64>> {
        Ok(self.response(mode)?.0.to_vec())
    }

    fn step_point(
        &self,
        mode: usize,
        state: &[f64],
        action: usize,
        outcome: usize,
    ) -> Result<(usize, Vec<f64>)> {
        if action >= 3 || outcome >= 3 {
            return Err(Error::UnknownAction(action.max(outcome)));
        }
        let (_, accels) = self.response(mode)?;
        let a0 = accels[outcome];
        let mut h = state[0] + self.intruder_rate - state[1] - 0.5 * a0;
        let mut v0 = state[1] + a0;
        if self.boundary == BoundaryPolicy::Clamp {
            h = h.clamp(H_RANGE.0, H_RANGE.1);
            v0 = v0.clamp(VRATE_RANGE.0, VRATE_RANGE.1);
        }
        Ok((action, vec![h, v0, state[2] - 1.0]))
    }

    fn is_unsafe_point(&self, _mode: usize, state: &[f64]) -> bool {
        nmac_point(state, 0, 2)
    }

    fn absorbing_safe_point(&self, _mode: usize, _state: &[f64]) -> bool {
        false
    }
}
