//! Unicycle kinematics, fixed-step RK4 and an imperfect-hardware emulator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Control, State};

/// Nominal driftless kinematics `(cos(theta) v, sin(theta) v, omega)`.
pub fn vector_field(s: &State, u: &Control) -> [f64; 3] {
    let (sin, cos) = s.theta.sin_cos();
    [cos * u.v, sin * u.v, u.omega]
}

fn offset(s: &State, k: &[f64; 3], h: f64) -> State {
    State::new(s.x1 + h * k[0], s.x2 + h * k[1], s.theta + h * k[2])
}

/// Classical four-stage Runge-Kutta step with `u` held constant.
pub fn rk4_step(s: &State, u: &Control, delta: f64) -> State {
    let k1 = vector_field(s, u);
    let k2 = vector_field(&offset(s, &k1, 0.5 * delta), u);
    let k3 = vector_field(&offset(s, &k2, 0.5 * delta), u);
    let k4 = vector_field(&offset(s, &k3, delta), u);
    let w = delta / 6.0;
    State::new(
        s.x1 + w * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        s.x2 + w * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        s.theta + w * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    )
}

/// Integrates a sequence of piecewise-constant inputs with [`rk4_step`].
pub fn rk4_rollout(x0: State, controls: &[Control], delta: f64) -> Vec<State> {
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(x0);
    let mut s = x0;
    for u in controls {
        s = rk4_step(&s, u, delta);
        states.push(s);
    }
    states
}

/// Closed-form flow of the kinematics under a constant input.
///
/// Uses the half-angle form `v t sinc(omega t / 2)` along the mean heading,
/// which equals `(v / omega)(sin(theta + omega t) - sin(theta))` etc. and
/// stays accurate as `omega -> 0`.
pub fn analytic_flow(s: &State, u: &Control, t: f64) -> State {
    let half = 0.5 * u.omega * t;
    let sinc = if half.abs() < 1e-8 {
        1.0 - half * half / 6.0
    } else {
        half.sin() / half
    };
    let chord = u.v * t * sinc;
    let (sin_mid, cos_mid) = (s.theta + half).sin_cos();
    State::new(
        s.x1 + chord * cos_mid,
        s.x2 + chord * sin_mid,
        s.theta + u.omega * t,
    )
}

/// Anything that advances a pose by one sampling interval.
///
/// Implemented by the nominal model and by [`Emulator`], which carries
/// actuator memory and noise between calls.
pub trait Plant {
    fn pose(&self) -> State;
    fn step(&mut self, u: &Control, delta: f64) -> State;
}

/// Plant that follows the nominal kinematics exactly (RK4).
#[derive(Debug, Clone)]
pub struct NominalPlant {
    pose: State,
}

impl NominalPlant {
    pub fn new(pose: State) -> Self {
        Self { pose }
    }
}

impl Plant for NominalPlant {
    fn pose(&self) -> State {
        self.pose
    }

    fn step(&mut self, u: &Control, delta: f64) -> State {
        self.pose = rk4_step(&self.pose, u, delta);
        self.pose
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmulatorParams {
    pub wheel_scale_left: f64,
    pub wheel_scale_right: f64,
    /// First-order lag time constant in seconds; 0 means instantaneous.
    pub actuator_tau: f64,
    pub noise_std_v: f64,
    pub noise_std_omega: f64,
    /// Half the wheel separation, meters.
    pub half_axle: f64,
    pub seed: u64,
}

impl EmulatorParams {
    /// Unperturbed robot: reproduces [`rk4_step`] exactly.
    pub fn identity() -> Self {
        Self {
            wheel_scale_left: 1.0,
            wheel_scale_right: 1.0,
            actuator_tau: 0.0,
            noise_std_v: 0.0,
            noise_std_omega: 0.0,
            half_axle: 0.08,
            seed: 0,
        }
    }

    /// Default imperfect robot: skewed wheels, actuator lag, velocity noise.
    pub fn hardware_like() -> Self {
        Self {
            wheel_scale_left: 1.03,
            wheel_scale_right: 0.99,
            actuator_tau: 0.08,
            noise_std_v: 0.005,
            noise_std_omega: 0.01,
            half_axle: 0.08,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.wheel_scale_left,
            self.wheel_scale_right,
            self.actuator_tau,
            self.noise_std_v,
            self.noise_std_omega,
            self.half_axle,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::invalid("emulator parameters must be finite"));
        }
        if self.wheel_scale_left <= 0.0 || self.wheel_scale_right <= 0.0 {
            return Err(Error::invalid("emulator wheel gains must be positive"));
        }
        if self.actuator_tau < 0.0 {
            return Err(Error::invalid("emulator actuator_tau must be nonnegative"));
        }
        if self.noise_std_v < 0.0 || self.noise_std_omega < 0.0 {
            return Err(Error::invalid("emulator noise standard deviations must be nonnegative"));
        }
        if self.half_axle <= 0.0 {
            return Err(Error::invalid("emulator half_axle must be positive"));
        }
        Ok(())
    }

    /// Body velocities the wheels actually produce for a command, after the
    /// per-wheel gains.
    pub fn scaled_command(&self, u: &Control) -> Control {
        if self.wheel_scale_left == 1.0 && self.wheel_scale_right == 1.0 {
            // skip the wheel round trip so unit gains are bit-exact
            return *u;
        }
        let l = self.half_axle;
        let left = (u.v - u.omega * l) * self.wheel_scale_left;
        let right = (u.v + u.omega * l) * self.wheel_scale_right;
        Control::new(0.5 * (left + right), (right - left) / (2.0 * l))
    }
}

impl Default for EmulatorParams {
    fn default() -> Self {
        Self::hardware_like()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EmulatorState {
    pub pose: State,
    pub v_actual: f64,
    pub omega_actual: f64,
}

impl EmulatorState {
    pub fn at_rest(pose: State) -> Self {
        Self {
            pose,
            v_actual: 0.0,
            omega_actual: 0.0,
        }
    }
}

/// Advances the emulated robot by one interval.
///
/// The lagged velocities are propagated with the exact first-order response;
/// the pose is integrated with RK4 using the interval-averaged lagged
/// velocity plus one Gaussian noise draw per interval. Noise does not enter
/// the lag memory.
pub fn emulator_step<R: Rng + ?Sized>(
    params: &EmulatorParams,
    es: &EmulatorState,
    u: &Control,
    delta: f64,
    rng: &mut R,
) -> EmulatorState {
    let target = params.scaled_command(u);
    let (v_end, omega_end, v_mean, omega_mean) = if params.actuator_tau > 0.0 {
        let decay = (-delta / params.actuator_tau).exp();
        let avg = params.actuator_tau / delta * (1.0 - decay);
        (
            target.v + (es.v_actual - target.v) * decay,
            target.omega + (es.omega_actual - target.omega) * decay,
            target.v + (es.v_actual - target.v) * avg,
            target.omega + (es.omega_actual - target.omega) * avg,
        )
    } else {
        (target.v, target.omega, target.v, target.omega)
    };
    let mut applied = Control::new(v_mean, omega_mean);
    if params.noise_std_v > 0.0 {
        applied.v += Normal::new(0.0, params.noise_std_v).expect("valid std").sample(rng);
    }
    if params.noise_std_omega > 0.0 {
        applied.omega += Normal::new(0.0, params.noise_std_omega)
            .expect("valid std")
            .sample(rng);
    }
    EmulatorState {
        pose: rk4_step(&es.pose, &applied, delta),
        v_actual: v_end,
        omega_actual: omega_end,
    }
}

/// Emulated hardware robot owning its parameters, actuator state and RNG.
#[derive(Debug, Clone)]
pub struct Emulator {
    params: EmulatorParams,
    state: EmulatorState,
    rng: ChaCha8Rng,
}

impl Emulator {
    pub fn new(params: EmulatorParams, pose: State) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            state: EmulatorState::at_rest(pose),
            rng: ChaCha8Rng::seed_from_u64(params.seed),
        })
    }

    pub fn params(&self) -> &EmulatorParams {
        &self.params
    }

    pub fn state(&self) -> &EmulatorState {
        &self.state
    }
}

impl Plant for Emulator {
    fn pose(&self) -> State {
        self.state.pose
    }

    fn step(&mut self, u: &Control, delta: f64) -> State {
        self.state = emulator_step(&self.params, &self.state, u, delta, &mut self.rng);
        self.state.pose
    }
}
