//! Domain types shared by every other module.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Robot pose. `theta` is kept unwrapped; see [`wrap_angle`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub x1: f64,
    pub x2: f64,
    pub theta: f64,
}

impl State {
    pub const fn new(x1: f64, x2: f64, theta: f64) -> Self {
        Self { x1, x2, theta }
    }

    pub fn try_new(x1: f64, x2: f64, theta: f64) -> Result<Self> {
        let s = Self::new(x1, x2, theta);
        if !s.is_finite() {
            return Err(Error::invalid(format!("non-finite state {s:?}")));
        }
        Ok(s)
    }

    pub fn is_finite(&self) -> bool {
        self.x1.is_finite() && self.x2.is_finite() && self.theta.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x1, self.x2, self.theta]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

/// Input pair: forward velocity `v` (m/s) and yaw rate `omega` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Control {
    pub v: f64,
    pub omega: f64,
}

impl Control {
    pub const ZERO: Control = Control { v: 0.0, omega: 0.0 };

    pub const fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.omega.is_finite()
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self::new(self.v * factor, self.omega * factor)
    }
}

/// Minimum |det| for a pair of controls to count as a basis.
pub const BASIS_DET_TOL: f64 = 1e-12;

/// Two linearly independent constant inputs used to collect training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[Control; 2]", into = "[Control; 2]")]
pub struct ControlBasis {
    vectors: [Control; 2],
}

impl ControlBasis {
    pub fn new(first: Control, second: Control) -> Result<Self> {
        if !first.is_finite() || !second.is_finite() {
            return Err(Error::invalid("control basis vectors must be finite"));
        }
        let det = first.v * second.omega - second.v * first.omega;
        if det.abs() <= BASIS_DET_TOL {
            return Err(Error::invalid(format!(
                "control basis vectors {first:?}, {second:?} are linearly dependent (det = {det:e})"
            )));
        }
        Ok(Self {
            vectors: [first, second],
        })
    }

    /// Unit vectors {e1, e2}.
    pub fn unit() -> Self {
        Self::new(Control::new(1.0, 0.0), Control::new(0.0, 1.0)).expect("valid basis")
    }

    /// Straight line and turn on the spot.
    pub fn b1() -> Self {
        Self::new(Control::new(0.2, 0.0), Control::new(0.0, 2.0)).expect("valid basis")
    }

    /// Two arcs of different curvature.
    pub fn b2() -> Self {
        Self::new(Control::new(0.2, -0.4), Control::new(0.2, 0.6)).expect("valid basis")
    }

    pub fn vectors(&self) -> &[Control; 2] {
        &self.vectors
    }

    /// Basis vector `i`, 1-based, matching the operator index it trains.
    pub fn input(&self, i: usize) -> Control {
        if i == 0 {
            Control::ZERO
        } else {
            self.vectors[i - 1]
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn determinant(&self) -> f64 {
        let [a, b] = self.vectors;
        a.v * b.omega - b.v * a.omega
    }

    /// Solves `g1 * u1 + g2 * u2 = u` by Cramer's rule.
    pub fn coefficients(&self, u: &Control) -> [f64; 2] {
        let [a, b] = self.vectors;
        let det = self.determinant();
        [
            (u.v * b.omega - b.v * u.omega) / det,
            (a.v * u.omega - u.v * a.omega) / det,
        ]
    }
}

impl TryFrom<[Control; 2]> for ControlBasis {
    type Error = Error;

    fn try_from(v: [Control; 2]) -> Result<Self> {
        Self::new(v[0], v[1])
    }
}

impl From<ControlBasis> for [Control; 2] {
    fn from(b: ControlBasis) -> Self {
        b.vectors
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::invalid(format!("empty or non-finite interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        Self::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

/// Admissible positions; orientation is unrestricted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateDomain {
    pub x1_range: Interval,
    pub x2_range: Interval,
}

impl StateDomain {
    pub fn new(x1_range: Interval, x2_range: Interval) -> Self {
        Self { x1_range, x2_range }
    }

    /// The 1.5 m x 1.5 m motion plane `[0, 1.5] x [-0.75, 0.75]`.
    pub fn motion_plane() -> Self {
        Self::new(
            Interval::new(0.0, 1.5).expect("valid"),
            Interval::new(-0.75, 0.75).expect("valid"),
        )
    }

    pub fn contains(&self, s: &State) -> bool {
        in_domain(s, self)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x1_range.mid(), self.x2_range.mid())
    }
}

impl Default for StateDomain {
    fn default() -> Self {
        Self::motion_plane()
    }
}

/// Box-shaped admissible input set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputBounds {
    pub v: Interval,
    pub omega: Interval,
}

impl Default for InputBounds {
    fn default() -> Self {
        Self {
            v: Interval::new(-0.3, 0.3).expect("valid"),
            omega: Interval::new(-2.5, 2.5).expect("valid"),
        }
    }
}

/// Recorded or predicted run; `controls[i]` drives `states[i] -> states[i + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dt: f64,
    states: Vec<State>,
    controls: Vec<Control>,
}

impl Trajectory {
    pub fn new(dt: f64, states: Vec<State>, controls: Vec<Control>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("trajectory time step must be positive, got {dt}")));
        }
        if states.len() != controls.len() + 1 {
            return Err(Error::invalid(format!(
                "trajectory needs one more state than controls ({} states, {} controls)",
                states.len(),
                controls.len()
            )));
        }
        Ok(Self {
            dt,
            states,
            controls,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn controls(&self) -> &[Control] {
        &self.controls
    }

    /// Number of transitions.
    pub fn steps(&self) -> usize {
        self.controls.len()
    }

    pub fn initial(&self) -> State {
        self.states[0]
    }

    pub fn last(&self) -> State {
        *self.states.last().expect("nonempty")
    }

    /// `(state, control, successor)` triples.
    pub fn transitions(&self) -> impl Iterator<Item = (State, Control, State)> + '_ {
        self.controls
            .iter()
            .enumerate()
            .map(move |(k, u)| (self.states[k], *u, self.states[k + 1]))
    }

    /// Keeps the first `steps` transitions.
    pub fn truncated(&self, steps: usize) -> Self {
        let steps = steps.min(self.steps());
        Self {
            dt: self.dt,
            states: self.states[..=steps].to_vec(),
            controls: self.controls[..steps].to_vec(),
        }
    }
}

/// Result of [`wrap_angle`]: `theta = wrapped + shift * 2pi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrappedAngle {
    pub wrapped: f64,
    pub shift: i64,
}

impl WrappedAngle {
    /// Adds the removed multiple of 2pi back onto `theta`.
    pub fn unshift(&self, theta: f64) -> f64 {
        theta + self.shift as f64 * TAU
    }
}

/// Maps `theta` into `(-pi, pi]`, returning the number of whole turns removed.
pub fn wrap_angle(theta: f64) -> Result<WrappedAngle> {
    if !theta.is_finite() {
        return Err(Error::invalid(format!("cannot wrap non-finite angle {theta}")));
    }
    let mut shift = ((theta - PI) / TAU).ceil() as i64;
    let mut wrapped = theta - shift as f64 * TAU;
    // rounding in the division can land one period off at the boundary
    if wrapped <= -PI {
        wrapped += TAU;
        shift -= 1;
    } else if wrapped > PI {
        wrapped -= TAU;
        shift += 1;
    }
    Ok(WrappedAngle { wrapped, shift })
}

/// Wrapped difference `a - b` in `(-pi, pi]`; non-finite input passes through.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let d = a - b;
    wrap_angle(d).map(|w| w.wrapped).unwrap_or(d)
}

/// True iff the position lies in the closed rectangle.
pub fn in_domain(s: &State, d: &StateDomain) -> bool {
    d.x1_range.contains(s.x1) && d.x2_range.contains(s.x2)
}
