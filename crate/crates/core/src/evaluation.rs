//! Test scenarios, prediction error metrics and multi-run statistics.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{rk4_step, Emulator, EmulatorParams, Plant};
use crate::error::{Error, Result};
use crate::types::{angle_difference, Control, InputBounds, State, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioName {
    Circle,
    Random,
    Infinity,
    Square,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 4] = [
        ScenarioName::Circle,
        ScenarioName::Random,
        ScenarioName::Infinity,
        ScenarioName::Square,
    ];

    /// Start pose used by the experiment recipes.
    pub fn default_start(self) -> State {
        match self {
            ScenarioName::Circle => State::new(0.2, 0.0, -FRAC_PI_2),
            ScenarioName::Random | ScenarioName::Infinity => State::new(0.75, 0.0, 0.0),
            ScenarioName::Square => State::new(0.25, -0.5, 0.0),
        }
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "circle" => Ok(ScenarioName::Circle),
            "random" => Ok(ScenarioName::Random),
            "infinity" | "inf" => Ok(ScenarioName::Infinity),
            "square" => Ok(ScenarioName::Square),
            _ => Err(Error::invalid(format!(
                "unknown scenario `{s}` (expected circle, random, infinity or square)"
            ))),
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioName::Circle => "circle",
            ScenarioName::Random => "random",
            ScenarioName::Infinity => "infinity",
            ScenarioName::Square => "square",
        })
    }
}

/// Geometry and timing of the test scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub circle_control: Control,
    /// Seconds; `None` drives one full nominal circle.
    pub circle_duration: Option<f64>,
    pub random_duration: f64,
    pub random_bounds: InputBounds,
    pub infinity_speed: f64,
    pub infinity_radius: f64,
    pub infinity_ramp_time: f64,
    pub square_edge: f64,
    pub square_speed: f64,
    pub square_accel: f64,
    pub square_turn_rate: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            circle_control: Control::new(0.2, 0.2),
            circle_duration: None,
            random_duration: 10.0,
            random_bounds: InputBounds::default(),
            infinity_speed: 0.2,
            infinity_radius: 1.0,
            infinity_ramp_time: 1.0,
            square_edge: 1.0,
            square_speed: 0.2,
            square_accel: 0.2,
            square_turn_rate: 1.0,
        }
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {x}")))
    }
}

fn steps_for(duration: f64, dt: f64) -> usize {
    // guard against 3.0000000000000004 style overshoot
    ((duration / dt) - 1e-9).ceil().max(1.0) as usize
}

/// Rescales `profile` so that `sum(profile) * dt == total`.
fn normalize(profile: &mut [f64], dt: f64, total: f64) {
    let sum: f64 = profile.iter().sum::<f64>() * dt;
    if sum != 0.0 {
        let f = total / sum;
        profile.iter_mut().for_each(|x| *x *= f);
    }
}

/// Trapezoid with slope `accel` and plateau `peak`, sampled at interval
/// midpoints and rescaled to integrate to `area`.
fn trapezoid(area: f64, peak: f64, accel: f64, dt: f64) -> Vec<f64> {
    let ramp = peak / accel;
    let duration = if area >= peak * ramp {
        area / peak + ramp
    } else {
        2.0 * (area / accel).sqrt()
    };
    let n = steps_for(duration, dt);
    let mut p: Vec<f64> = (0..n)
        .map(|k| {
            let t = (k as f64 + 0.5) * duration / n as f64;
            (accel * t).min(accel * (duration - t)).min(peak)
        })
        .collect();
    normalize(&mut p, dt, area);
    p
}

fn infinity(p: &ScenarioParams, dt: f64) -> Result<Vec<Control>> {
    positive("infinity_speed", p.infinity_speed)?;
    positive("infinity_radius", p.infinity_radius)?;
    if p.infinity_ramp_time.is_nan() || p.infinity_ramp_time < 0.0 {
        return Err(Error::invalid("infinity_ramp_time must be nonnegative"));
    }
    let r = p.infinity_radius;
    let half = TAU * r;
    let ramp = (p.infinity_ramp_time / dt).round() as usize;
    let ramp_dist = if ramp > 0 { p.infinity_speed * dt * ramp as f64 / 2.0 } else { 0.0 };
    let cruise = steps_for(((2.0 * half - 2.0 * ramp_dist) / p.infinity_speed).max(dt), dt);
    // v starts and ends at exactly zero
    let mut v: Vec<f64> = Vec::with_capacity(2 * ramp + cruise + 2);
    v.push(0.0);
    v.extend((1..=ramp).map(|k| p.infinity_speed * k as f64 / (ramp + 1) as f64));
    v.extend(std::iter::repeat_n(p.infinity_speed, cruise));
    v.extend((1..=ramp).rev().map(|k| p.infinity_speed * k as f64 / (ramp + 1) as f64));
    v.push(0.0);
    normalize(&mut v, dt, 2.0 * half);

    // counter-clockwise until half the distance, then clockwise
    let mut travelled = 0.0;
    Ok(v.iter()
        .map(|&vk| {
            let start = travelled;
            travelled += vk * dt;
            let frac = if travelled <= half {
                1.0
            } else if start >= half {
                -1.0
            } else {
                ((half - start) - (travelled - half)) / (vk * dt)
            };
            Control::new(vk, frac * vk / r)
        })
        .collect())
}

fn square(p: &ScenarioParams, dt: f64) -> Result<Vec<Control>> {
    positive("square_edge", p.square_edge)?;
    positive("square_speed", p.square_speed)?;
    positive("square_accel", p.square_accel)?;
    positive("square_turn_rate", p.square_turn_rate)?;
    let edge = trapezoid(p.square_edge, p.square_speed, p.square_accel, dt);
    // triangular profile: peak * T / 2 = pi/2
    let turn_time = 2.0 * FRAC_PI_2 / p.square_turn_rate;
    let turn = trapezoid(FRAC_PI_2, p.square_turn_rate, 2.0 * p.square_turn_rate / turn_time, dt);
    let mut out = Vec::with_capacity(4 * (edge.len() + turn.len()));
    for _ in 0..4 {
        out.extend(edge.iter().map(|&v| Control::new(v, 0.0)));
        out.extend(turn.iter().map(|&w| Control::new(0.0, w)));
    }
    Ok(out)
}

/// Control sequence of a named test scenario at sampling interval `dt`.
pub fn scenario_controls<R: Rng + ?Sized>(
    name: ScenarioName,
    params: &ScenarioParams,
    dt: f64,
    rng: &mut R,
) -> Result<Vec<Control>> {
    positive("dt", dt)?;
    match name {
        ScenarioName::Circle => {
            let u = params.circle_control;
            let duration = match params.circle_duration {
                Some(t) => t,
                None if u.omega != 0.0 => TAU / u.omega.abs(),
                None => return Err(Error::invalid("circle_control needs omega != 0 for a full circle")),
            };
            positive("circle_duration", duration)?;
            Ok(vec![u; steps_for(duration, dt)])
        }
        ScenarioName::Random => {
            positive("random_duration", params.random_duration)?;
            let b = params.random_bounds;
            Ok((0..steps_for(params.random_duration, dt))
                .map(|_| {
                    let v = rng.random_range(b.v.lo()..=b.v.hi());
                    let omega = rng.random_range(b.omega.lo()..=b.omega.hi());
                    Control::new(v, omega)
                })
                .collect())
        }
        ScenarioName::Infinity => infinity(params, dt),
        ScenarioName::Square => square(params, dt),
    }
}

/// Source of reference trajectories.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceStepper {
    Nominal,
    /// One run per seed.
    Emulator { params: EmulatorParams, seeds: Vec<u64> },
}

/// Drives the scenario `count` times; emulator runs use `seeds[k]`.
pub fn reference_runs(
    controls: &[Control],
    stepper: &ReferenceStepper,
    x0: State,
    count: usize,
    dt: f64,
) -> Result<Vec<Trajectory>> {
    if count == 0 {
        return Err(Error::invalid("run count must be at least 1"));
    }
    positive("dt", dt)?;
    match stepper {
        ReferenceStepper::Nominal => {
            let mut states = vec![x0];
            let mut s = x0;
            for u in controls {
                s = rk4_step(&s, u, dt);
                states.push(s);
            }
            let t = Trajectory::new(dt, states, controls.to_vec())?;
            Ok(vec![t; count])
        }
        ReferenceStepper::Emulator { params, seeds } => {
            if seeds.len() < count {
                return Err(Error::invalid(format!(
                    "{count} emulator runs requested but only {} seeds given",
                    seeds.len()
                )));
            }
            params.validate()?;
            seeds[..count]
                .par_iter()
                .map(|&seed| {
                    let mut robot = Emulator::new(params.with_seed(seed), x0)?;
                    let mut states = Vec::with_capacity(controls.len() + 1);
                    states.push(x0);
                    states.extend(controls.iter().map(|u| robot.step(u, dt)));
                    Trajectory::new(dt, states, controls.to_vec())
                })
                .collect()
        }
    }
}

/// Per-step error norms between two state sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub dt: f64,
    /// Time index of the first entry: 1 for one-step errors, 0 for rollouts.
    pub first_step: usize,
    pub total_norm: Vec<f64>,
    pub position_norm: Vec<f64>,
    pub orientation_abs: Vec<f64>,
}

impl ErrorSeries {
    fn with_capacity(dt: f64, first_step: usize, n: usize) -> Self {
        Self {
            dt,
            first_step,
            total_norm: Vec::with_capacity(n),
            position_norm: Vec::with_capacity(n),
            orientation_abs: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, predicted: &State, reference: &State) {
        let dx = predicted.x1 - reference.x1;
        let dy = predicted.x2 - reference.x2;
        let dth = angle_difference(predicted.theta, reference.theta);
        let pos = dx.hypot(dy);
        self.position_norm.push(pos);
        self.orientation_abs.push(dth.abs());
        self.total_norm.push(pos.hypot(dth));
    }

    pub fn len(&self) -> usize {
        self.total_norm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total_norm.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| (k + self.first_step) as f64 * self.dt)
    }

    pub fn metric(&self, m: Metric) -> &[f64] {
        match m {
            Metric::Total => &self.total_norm,
            Metric::Position => &self.position_norm,
            Metric::Orientation => &self.orientation_abs,
        }
    }

    pub fn mean(&self, m: Metric) -> f64 {
        let v = self.metric(m);
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn last(&self, m: Metric) -> f64 {
        *self.metric(m).last().expect("nonempty series")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Total,
    Position,
    Orientation,
}

/// Entry `k` compares `predictor(x_k, u_k)` with `x_{k+1}` of the reference.
pub fn one_step_errors<F>(predictor: F, reference: &Trajectory) -> Result<ErrorSeries>
where
    F: Fn(&State, &Control) -> State,
{
    if reference.steps() == 0 {
        return Err(Error::invalid("reference needs at least one transition"));
    }
    let mut e = ErrorSeries::with_capacity(reference.dt(), 1, reference.steps());
    for (x, u, next) in reference.transitions() {
        e.push(&predictor(&x, &u), &next);
    }
    Ok(e)
}

/// Stepwise comparison of two trajectories of equal length and sampling.
pub fn rollout_errors(predicted: &Trajectory, reference: &Trajectory) -> Result<ErrorSeries> {
    if predicted.states().len() != reference.states().len() {
        return Err(Error::invalid(format!(
            "trajectory lengths differ: {} vs {}",
            predicted.states().len(),
            reference.states().len()
        )));
    }
    if predicted.dt() != reference.dt() {
        return Err(Error::invalid(format!(
            "sampling intervals differ: {} vs {}",
            predicted.dt(),
            reference.dt()
        )));
    }
    let mut e = ErrorSeries::with_capacity(reference.dt(), 0, reference.states().len());
    for (p, r) in predicted.states().iter().zip(reference.states()) {
        e.push(p, r);
    }
    Ok(e)
}

/// Pointwise statistics of an error metric over repeated runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStatistics {
    pub e_max: Vec<f64>,
    pub e_avg: Vec<f64>,
    /// Population standard deviation.
    pub sigma: Vec<f64>,
    pub run_count: usize,
}

impl RunStatistics {
    pub fn from_values(runs: &[&[f64]]) -> Result<Self> {
        let Some(first) = runs.first() else {
            return Err(Error::invalid("no runs to summarize"));
        };
        let len = first.len();
        if runs.iter().any(|r| r.len() != len) {
            return Err(Error::invalid("runs differ in length"));
        }
        let n = runs.len() as f64;
        let mut stats = Self {
            e_max: Vec::with_capacity(len),
            e_avg: Vec::with_capacity(len),
            sigma: Vec::with_capacity(len),
            run_count: runs.len(),
        };
        for k in 0..len {
            let col = runs.iter().map(|r| r[k]);
            let max = col.clone().fold(f64::NEG_INFINITY, f64::max);
            let mean = col.clone().sum::<f64>() / n;
            let var = col.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            // the mean of identical values can round above them
            stats.e_max.push(max);
            stats.e_avg.push(mean.min(max));
            stats.sigma.push(var.sqrt());
        }
        Ok(stats)
    }
}

/// Statistics of `total_norm` over runs.
pub fn run_statistics(series: &[ErrorSeries]) -> Result<RunStatistics> {
    run_statistics_of(series, Metric::Total)
}

pub fn run_statistics_of(series: &[ErrorSeries], metric: Metric) -> Result<RunStatistics> {
    let runs: Vec<&[f64]> = series.iter().map(|s| s.metric(metric)).collect();
    RunStatistics::from_values(&runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::analytic_flow;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn controls(name: ScenarioName, dt: f64) -> Vec<Control> {
        scenario_controls(name, &ScenarioParams::default(), dt, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    #[test]
    fn circle_step_count() {
        let c = controls(ScenarioName::Circle, 0.02);
        assert_eq!(c.len(), 1571);
        assert!(c.iter().all(|u| *u == Control::new(0.2, 0.2)));
    }

    #[test]
    fn square_turns_full_circle() {
        for dt in [0.02, 0.1] {
            let c = controls(ScenarioName::Square, dt);
            let total: f64 = c.iter().map(|u| u.omega * dt).sum();
            assert!((total - TAU).abs() <= 1e-10);
            let dist: f64 = c.iter().map(|u| u.v * dt).sum();
            assert!((dist - 4.0).abs() <= 1e-10);
            let peak_w = c.iter().map(|u| u.omega).fold(0.0, f64::max);
            let peak_v = c.iter().map(|u| u.v).fold(0.0, f64::max);
            assert!((peak_w - 1.0).abs() < 0.1 && (peak_v - 0.2).abs() < 0.02);
        }
    }

    #[test]
    fn square_closes_on_itself() {
        let dt = 0.1;
        let c = controls(ScenarioName::Square, dt);
        let x0 = ScenarioName::Square.default_start();
        let end = c.iter().fold(x0, |s, u| analytic_flow(&s, u, dt));
        assert!((end.x1 - x0.x1).abs() < 1e-9 && (end.x2 - x0.x2).abs() < 1e-9);
        assert!((end.theta - x0.theta - TAU).abs() < 1e-9);
    }

    #[test]
    fn infinity_profile() {
        for dt in [0.02, 0.1] {
            let c = controls(ScenarioName::Infinity, dt);
            assert_eq!(c.first().unwrap().v, 0.0);
            assert_eq!(c.last().unwrap().v, 0.0);
            let heading: f64 = c.iter().map(|u| u.omega * dt).sum();
            assert!(heading.abs() < 1e-9);
            // figure eight returns to its start
            let x0 = ScenarioName::Infinity.default_start();
            let end = c.iter().fold(x0, |s, u| analytic_flow(&s, u, dt));
            assert!((end.x1 - x0.x1).hypot(end.x2 - x0.x2) < 1e-3, "{end:?}");
            // constant curvature
            assert!(c.iter().filter(|u| u.v > 0.0).all(|u| (u.omega.abs() / u.v - 1.0).abs() < 1e-9 || u.omega.abs() < u.v));
        }
    }

    #[test]
    fn random_controls_in_bounds_and_seeded() {
        let p = ScenarioParams::default();
        let a = scenario_controls(ScenarioName::Random, &p, 0.02, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = scenario_controls(ScenarioName::Random, &p, 0.02, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 500);
        assert!(a.iter().all(|u| u.v.abs() <= 0.3 && u.omega.abs() <= 2.5));
    }

    #[test]
    fn bad_dt_and_names() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(scenario_controls(ScenarioName::Circle, &ScenarioParams::default(), 0.0, &mut rng).is_err());
        assert!("triangle".parse::<ScenarioName>().is_err());
        assert_eq!("Infinity".parse::<ScenarioName>().unwrap(), ScenarioName::Infinity);
    }

    #[test]
    fn nominal_runs_identical() {
        let c = controls(ScenarioName::Square, 0.1);
        let runs = reference_runs(&c, &ReferenceStepper::Nominal, State::new(0.25, -0.5, 0.0), 3, 0.1).unwrap();
        assert_eq!(runs.len(), 3);
        assert!(runs.iter().all(|r| *r == runs[0]));
    }

    #[test]
    fn noiseless_emulator_runs_identical() {
        let c = controls(ScenarioName::Infinity, 0.1);
        let params = EmulatorParams {
            noise_std_v: 0.0,
            noise_std_omega: 0.0,
            ..EmulatorParams::hardware_like()
        };
        let stepper = ReferenceStepper::Emulator { params, seeds: vec![1, 2, 3] };
        let runs = reference_runs(&c, &stepper, State::new(0.75, 0.0, 0.0), 3, 0.1).unwrap();
        assert!(runs.iter().all(|r| *r == runs[0]));
        let short = ReferenceStepper::Emulator { params, seeds: vec![1] };
        assert!(reference_runs(&c, &short, State::new(0.75, 0.0, 0.0), 3, 0.1).is_err());
    }

    #[test]
    fn hardware_like_emulator_is_skewed() {
        let dt = 0.1;
        let c = controls(ScenarioName::Infinity, dt);
        let x0 = ScenarioName::Infinity.default_start();
        let stepper = ReferenceStepper::Emulator {
            params: EmulatorParams::hardware_like(),
            seeds: (0..15).collect(),
        };
        let runs = reference_runs(&c, &stepper, x0, 15, dt).unwrap();
        let nominal = reference_runs(&c, &ReferenceStepper::Nominal, x0, 1, dt).unwrap()[0].last();
        let ends: Vec<(f64, f64)> = runs.iter().map(|r| (r.last().x1, r.last().x2)).collect();
        let n = ends.len() as f64;
        let mean = (
            ends.iter().map(|e| e.0).sum::<f64>() / n,
            ends.iter().map(|e| e.1).sum::<f64>() / n,
        );
        let spread = (ends
            .iter()
            .map(|e| (e.0 - mean.0).powi(2) + (e.1 - mean.1).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        let offset = (mean.0 - nominal.x1).hypot(mean.1 - nominal.x2);
        assert!(offset > 3.0 * spread, "offset {offset}, spread {spread}");
    }

    #[test]
    fn perfect_and_identity_predictors() {
        let dt = 0.1;
        let c = controls(ScenarioName::Square, dt);
        let r = &reference_runs(&c, &ReferenceStepper::Nominal, State::new(0.25, -0.5, 0.0), 1, dt).unwrap()[0];
        let e = one_step_errors(|s, u| rk4_step(s, u, dt), r).unwrap();
        assert!(e.total_norm.iter().all(|&x| x == 0.0));
        assert_eq!(e.first_step, 1);
        let e = one_step_errors(|s, _| *s, r).unwrap();
        for (k, (x, _, y)) in r.transitions().enumerate() {
            let step = (y.x1 - x.x1).hypot(y.x2 - x.x2).hypot(angle_difference(y.theta, x.theta));
            assert!((e.total_norm[k] - step).abs() <= 1e-15);
        }
        let empty = Trajectory::new(dt, vec![State::default()], vec![]).unwrap();
        assert!(one_step_errors(|s, _| *s, &empty).is_err());
    }

    fn shifted(t: &Trajectory, d: State) -> Trajectory {
        let states = t
            .states()
            .iter()
            .map(|s| State::new(s.x1 + d.x1, s.x2 + d.x2, s.theta + d.theta))
            .collect();
        Trajectory::new(t.dt(), states, t.controls().to_vec()).unwrap()
    }

    #[test]
    fn rollout_error_examples() {
        let dt = 0.1;
        let c = controls(ScenarioName::Square, dt)[..30].to_vec();
        let r = reference_runs(&c, &ReferenceStepper::Nominal, State::new(0.25, -0.5, 0.0), 1, dt)
            .unwrap()
            .remove(0);
        let e = rollout_errors(&r, &r).unwrap();
        assert!(e.total_norm.iter().all(|&x| x == 0.0));
        let e = rollout_errors(&shifted(&r, State::new(0.3, 0.4, 0.0)), &r).unwrap();
        assert!(e.position_norm.iter().all(|&x| (x - 0.5).abs() <= 1e-12));
        assert!(e.orientation_abs.iter().all(|&x| x == 0.0));
        let e = rollout_errors(&shifted(&r, State::new(0.0, 0.0, TAU)), &r).unwrap();
        assert!(e.orientation_abs.iter().all(|&x| x <= 1e-12));
        assert!(rollout_errors(&r.truncated(3), &r).is_err());
    }

    #[test]
    fn statistics_examples() {
        let a = [1.0, 2.0, 3.0];
        let b = [3.0, 2.0, 0.0];
        let s = RunStatistics::from_values(&[&a, &b]).unwrap();
        assert_eq!(s.e_avg, vec![2.0, 2.0, 1.5]);
        assert_eq!(s.sigma, vec![1.0, 0.0, 1.5]);
        assert_eq!(s.e_max, vec![3.0, 2.0, 3.0]);
        let single = RunStatistics::from_values(&[&a]).unwrap();
        assert_eq!(single.e_max, a.to_vec());
        assert_eq!(single.e_avg, a.to_vec());
        assert!(single.sigma.iter().all(|&x| x == 0.0));
        assert!(RunStatistics::from_values(&[]).is_err());
        assert!(RunStatistics::from_values(&[&a, &a[..2]]).is_err());
    }

    proptest! {
        #[test]
        fn total_dominates_position(
            a in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -PI..PI), 1..20),
            b in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -10.0f64..10.0), 20),
        ) {
            let n = a.len();
            let to_t = |v: Vec<(f64, f64, f64)>| {
                let states: Vec<State> = v.into_iter().map(|(x, y, t)| State::new(x, y, t)).collect();
                let k = states.len();
                Trajectory::new(0.1, states, vec![Control::ZERO; k - 1]).unwrap()
            };
            let e = rollout_errors(&to_t(a), &to_t(b[..n].to_vec())).unwrap();
            for k in 0..n {
                prop_assert!(e.total_norm[k] >= e.position_norm[k]);
                prop_assert!(e.orientation_abs[k] <= PI);
            }
        }

        #[test]
        fn statistics_are_ordered_and_permutation_invariant(
            runs in prop::collection::vec(prop::collection::vec(0.0f64..5.0, 8), 1..6),
            rot in 0usize..6,
        ) {
            let refs: Vec<&[f64]> = runs.iter().map(Vec::as_slice).collect();
            let s = RunStatistics::from_values(&refs).unwrap();
            let mut permuted = refs.clone();
            permuted.rotate_left(rot % refs.len());
            permuted.reverse();
            let p = RunStatistics::from_values(&permuted).unwrap();
            for k in 0..8 {
                prop_assert!(s.e_max[k] >= s.e_avg[k] && s.e_avg[k] >= 0.0 && s.sigma[k] >= 0.0);
                prop_assert_eq!(s.e_max[k], p.e_max[k]);
                prop_assert!((s.e_avg[k] - p.e_avg[k]).abs() <= 1e-12);
                prop_assert!((s.sigma[k] - p.sigma[k]).abs() <= 1e-12);
            }
        }
    }
}
