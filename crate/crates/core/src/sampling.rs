//! Training-data generation.
//!
//! Two routes produce a [`SnapshotSet`]: i.i.d. initial conditions stepped
//! forward under every basis input ([`sample_iid`] + [`simulate_snapshots`]),
//! and trajectory-based collection on a (possibly emulated) robot
//! ([`collect_b1`], [`collect_b2`]). The latter records labeled segments that
//! [`subsample`] can thin out for data-efficiency studies.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{rk4_step, Plant};
use crate::error::{Error, Result};
use crate::estimator::SnapshotSet;
use crate::types::{angle_difference, in_domain, Control, ControlBasis, Interval, State, StateDomain, Trajectory};

/// Uniform i.i.d. poses over `domain x theta_range`.
pub fn sample_iid<R: Rng + ?Sized>(
    domain: &StateDomain,
    theta_range: &Interval,
    d: usize,
    rng: &mut R,
) -> Result<Vec<State>> {
    if d == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let draw = |rng: &mut R, i: &Interval| {
        if i.width() == 0.0 {
            i.lo()
        } else {
            rng.random_range(i.lo()..=i.hi())
        }
    };
    Ok((0..d)
        .map(|_| {
            let x1 = draw(rng, &domain.x1_range);
            let x2 = draw(rng, &domain.x2_range);
            let theta = draw(rng, theta_range);
            State::new(x1, x2, theta)
        })
        .collect())
}

/// Steps every point under `u = 0` and under each basis vector.
///
/// All blocks share the same states, `X[i] = points`.
pub fn simulate_snapshots<F>(points: &[State], basis: &ControlBasis, delta: f64, stepper: F) -> Result<SnapshotSet>
where
    F: Fn(&State, &Control, f64) -> State,
{
    if points.is_empty() {
        return Err(Error::invalid("no points to simulate"));
    }
    let blocks = basis.len() + 1;
    let x = vec![points.to_vec(); blocks];
    let y = (0..blocks)
        .map(|i| {
            let u = basis.input(i);
            points.iter().map(|s| stepper(s, &u, delta)).collect()
        })
        .collect();
    SnapshotSet::new(delta, *basis, x, y)
}

/// Knobs of the trajectory-based collection strategies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectConfig {
    pub domain: StateDomain,
    pub delta: f64,
    /// Retained state pairs to collect, all labels included.
    pub steps_budget: usize,
    /// Ramp-in and ramp-out steps per maneuver; never recorded.
    pub ramp_steps: usize,
    /// Distance at which a straight drive counts as having reached its target.
    pub target_tolerance: f64,
    /// Full-magnitude steps a straight drive must fit, else the target is redrawn.
    pub min_cruise_steps: usize,
    /// Segments shorter than this are discarded.
    pub min_segment_steps: usize,
    /// Input used to approach targets in the arc strategy (never recorded).
    pub approach: Control,
    pub max_targets: usize,
}

impl Default for CollectConfig {
    fn default() -> Self {
        Self {
            domain: StateDomain::motion_plane(),
            delta: 0.1,
            steps_budget: 5000,
            ramp_steps: 3,
            target_tolerance: 0.05,
            min_cruise_steps: 1,
            min_segment_steps: 1,
            approach: Control::new(0.2, 1.0),
            max_targets: 100_000,
        }
    }
}

impl CollectConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid(format!("delta must be positive, got {}", self.delta)));
        }
        if self.steps_budget == 0 {
            return Err(Error::invalid("steps_budget must be at least 1"));
        }
        if self.target_tolerance.is_nan() || self.target_tolerance <= 0.0 {
            return Err(Error::invalid("target_tolerance must be positive"));
        }
        if self.approach.v <= 0.0 || self.approach.omega == 0.0 {
            return Err(Error::invalid("approach input needs v > 0 and omega != 0"));
        }
        Ok(())
    }
}

/// Consecutive recorded transitions under one constant training input.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSegment {
    /// 0 for the zero input, `i >= 1` for basis vector `i`.
    pub label: usize,
    pub trajectory: Trajectory,
}

/// Bookkeeping of a collection run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplingReport {
    /// Retained pairs per input index (0 = zero input).
    pub counts: Vec<usize>,
    /// Every plant step taken.
    pub generated: usize,
    pub retained: usize,
    pub discarded_ramp: usize,
    pub discarded_out_of_domain: usize,
    pub discarded_approach: usize,
    pub discarded_short: usize,
    pub targets_drawn: usize,
    pub targets_rejected: usize,
    #[serde(skip)]
    pub segments: Vec<LabeledSegment>,
}

impl SamplingReport {
    pub fn discarded(&self) -> usize {
        self.discarded_ramp + self.discarded_out_of_domain + self.discarded_approach + self.discarded_short
    }
}

#[derive(Debug, Clone, Copy)]
enum Discard {
    Ramp,
    Approach,
}

struct Collector<'a, P: Plant + ?Sized> {
    cfg: CollectConfig,
    plant: &'a mut P,
    report: SamplingReport,
    open: Option<(usize, Vec<State>, Vec<Control>)>,
}

impl<'a, P: Plant + ?Sized> Collector<'a, P> {
    fn new(cfg: CollectConfig, basis: &ControlBasis, plant: &'a mut P) -> Self {
        Self {
            cfg,
            plant,
            report: SamplingReport {
                counts: vec![0; basis.len() + 1],
                ..Default::default()
            },
            open: None,
        }
    }

    fn pose(&self) -> State {
        self.plant.pose()
    }

    fn delta(&self) -> f64 {
        self.cfg.delta
    }

    fn discard(&mut self, u: Control, why: Discard) {
        self.plant.step(&u, self.cfg.delta);
        self.report.generated += 1;
        match why {
            Discard::Ramp => self.report.discarded_ramp += 1,
            Discard::Approach => self.report.discarded_approach += 1,
        }
    }

    fn record(&mut self, label: usize, u: Control) {
        let x = self.plant.pose();
        let y = self.plant.step(&u, self.cfg.delta);
        self.report.generated += 1;
        if !(in_domain(&x, &self.cfg.domain) && in_domain(&y, &self.cfg.domain)) {
            self.report.discarded_out_of_domain += 1;
            self.close();
            return;
        }
        match &mut self.open {
            Some((l, states, controls)) if *l == label && states.last() == Some(&x) => {
                states.push(y);
                controls.push(u);
            }
            _ => {
                self.close();
                self.open = Some((label, vec![x, y], vec![u]));
            }
        }
    }

    fn close(&mut self) {
        let Some((label, states, controls)) = self.open.take() else {
            return;
        };
        let len = controls.len();
        if len < self.cfg.min_segment_steps {
            self.report.discarded_short += len;
            return;
        }
        self.report.counts[label] += len;
        self.report.retained += len;
        let trajectory = Trajectory::new(self.cfg.delta, states, controls).expect("consistent segment");
        self.report.segments.push(LabeledSegment { label, trajectory });
    }

    fn ramp_factor(&self, k: usize, up: bool) -> f64 {
        let r = self.cfg.ramp_steps as f64;
        let k = k as f64 + 1.0;
        if up {
            k / (r + 1.0)
        } else {
            (r + 1.0 - k) / (r + 1.0)
        }
    }

    fn ramp(&mut self, u: Control, up: bool, why: Discard) {
        for k in 0..self.cfg.ramp_steps {
            let f = self.ramp_factor(k, up);
            self.discard(u.scaled(f), why);
        }
    }

    /// Nominal poses after one more full step (optional) followed by the ramp-down.
    fn predict_stop(&self, from: State, u: Control, extra_full_step: bool) -> Vec<State> {
        let mut out = Vec::with_capacity(self.cfg.ramp_steps + 1);
        let mut s = from;
        if extra_full_step {
            s = rk4_step(&s, &u, self.delta());
            out.push(s);
        }
        for k in 0..self.cfg.ramp_steps {
            s = rk4_step(&s, &u.scaled(self.ramp_factor(k, false)), self.delta());
            out.push(s);
        }
        out
    }

    fn stop_leaves_domain(&self, u: Control) -> bool {
        self.predict_stop(self.pose(), u, true)
            .iter()
            .any(|s| !in_domain(s, &self.cfg.domain))
    }

    fn standstill(&mut self) {
        self.close();
        self.record(0, Control::ZERO);
        self.close();
    }

    /// Rotation contributed by a full ramp (up or down), in units of full steps.
    fn ramp_equivalent_steps(&self) -> f64 {
        0.5 * self.cfg.ramp_steps as f64
    }

    /// Turns in place with `u` until the heading after ramp-down faces `target`
    /// and at least `min_rotation` has been commanded. Returns commanded rotation.
    fn turn_towards(&mut self, target: (f64, f64), u: Control, min_rotation: f64, label: Option<usize>) -> f64 {
        let why = Discard::Approach;
        let step_rot = u.omega.abs() * self.delta();
        let ramp_rot = self.ramp_equivalent_steps() * step_rot;
        let end_heading = |s: &State| s.theta + u.omega.signum() * ramp_rot;
        let bearing = |s: &State| (target.1 - s.x2).atan2(target.0 - s.x1);

        let s0 = self.pose();
        if min_rotation == 0.0 && angle_difference(bearing(&s0), s0.theta).abs() <= 0.5 * step_rot {
            return 0.0;
        }
        self.ramp(u, true, label.map_or(why, |_| Discard::Ramp));
        let mut rotated = ramp_rot;
        let limit = min_rotation + TAU + 4.0 * step_rot;
        loop {
            let s = self.pose();
            let err = angle_difference(bearing(&s), end_heading(&s));
            if rotated + ramp_rot >= min_rotation && err.abs() <= 0.6 * step_rot {
                break;
            }
            if rotated >= limit {
                break;
            }
            match label {
                Some(l) => self.record(l, u),
                None => self.discard(u, why),
            }
            rotated += step_rot;
        }
        self.close();
        self.ramp(u, false, label.map_or(why, |_| Discard::Ramp));
        rotated + ramp_rot
    }

    /// Drives straight with `u` until the ramp-down would end closest to the
    /// target, within tolerance, or outside the domain.
    fn drive_towards(&mut self, target: (f64, f64), u: Control, label: Option<usize>) {
        let why = label.map_or(Discard::Approach, |_| Discard::Ramp);
        self.ramp(u, true, why);
        let dist = |s: &State| (target.0 - s.x1).hypot(target.1 - s.x2);
        let mut guard = 0usize;
        loop {
            let here = self.pose();
            let now = dist(self.predict_stop(here, u, false).last().unwrap_or(&here));
            let next = dist(self.predict_stop(here, u, true).last().expect("nonempty"));
            if now <= self.cfg.target_tolerance.min(0.5 * u.v.abs() * self.delta()) || next >= now {
                break;
            }
            if self.stop_leaves_domain(u) {
                break;
            }
            guard += 1;
            if guard > 100_000 {
                break;
            }
            match label {
                Some(l) => self.record(l, u),
                None => self.discard(u, Discard::Approach),
            }
        }
        self.close();
        self.ramp(u, false, why);
    }

    fn draw_target<R: Rng + ?Sized>(&mut self, rng: &mut R, min_distance: f64) -> Result<(f64, f64)> {
        let d = self.cfg.domain;
        loop {
            if self.report.targets_drawn >= self.cfg.max_targets {
                return Err(Error::InsufficientData(format!(
                    "drew {} targets without collecting {} pairs ({} retained)",
                    self.report.targets_drawn, self.cfg.steps_budget, self.report.retained
                )));
            }
            self.report.targets_drawn += 1;
            let t = (
                rng.random_range(d.x1_range.lo()..=d.x1_range.hi()),
                rng.random_range(d.x2_range.lo()..=d.x2_range.hi()),
            );
            let p = self.pose();
            if (t.0 - p.x1).hypot(t.1 - p.x2) >= min_distance {
                return Ok(t);
            }
            self.report.targets_rejected += 1;
        }
    }

    fn finish(mut self, basis: &ControlBasis) -> Result<(SnapshotSet, SamplingReport)> {
        self.close();
        let data = snapshots_from_segments(&self.report.segments, basis, self.cfg.delta)?;
        Ok((data, self.report))
    }
}

/// Straight-then-turn collection for a basis `{[v, 0], [0, omega]}`.
///
/// Per random target: turn in place (label 2) for at least a full rotation
/// until facing the target, then drive straight (label 1) until the target is
/// reached or the nominal stopping maneuver would leave the domain. A
/// zero-input pair (label 0) is recorded at every standstill.
pub fn collect_b1<P, R>(
    cfg: &CollectConfig,
    basis: &ControlBasis,
    plant: &mut P,
    rng: &mut R,
) -> Result<(SnapshotSet, SamplingReport)>
where
    P: Plant + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let straight = basis.input(1);
    let turn = basis.input(2);
    if !(straight.omega == 0.0 && straight.v > 0.0 && turn.v == 0.0 && turn.omega != 0.0) {
        return Err(Error::invalid(format!(
            "straight/turn collection needs basis {{[v > 0, 0], [0, omega != 0]}}, got {:?}",
            basis.vectors()
        )));
    }
    let mut c = Collector::new(*cfg, basis, plant);
    let min_distance = (cfg.ramp_steps + cfg.min_cruise_steps) as f64 * straight.v * cfg.delta;
    c.standstill();
    while c.report.retained < cfg.steps_budget {
        let target = c.draw_target(rng, min_distance)?;
        c.turn_towards(target, turn, TAU, Some(2));
        c.standstill();
        c.drive_towards(target, straight, Some(1));
        c.standstill();
    }
    c.finish(basis)
}

/// Arc collection for a basis of two curved inputs.
///
/// Per random target: approach it with turn-and-drive maneuvers (not
/// recorded), then hold the next basis vector, alternating between the two,
/// until a full circle is commanded or the nominal stopping maneuver would
/// leave the domain.
pub fn collect_b2<P, R>(
    cfg: &CollectConfig,
    basis: &ControlBasis,
    plant: &mut P,
    rng: &mut R,
) -> Result<(SnapshotSet, SamplingReport)>
where
    P: Plant + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    if basis.vectors().iter().any(|u| u.v == 0.0 || u.omega == 0.0) {
        return Err(Error::invalid(format!(
            "arc collection needs both basis vectors with v != 0 and omega != 0, got {:?}",
            basis.vectors()
        )));
    }
    let mut c = Collector::new(*cfg, basis, plant);
    let approach_drive = Control::new(cfg.approach.v, 0.0);
    let min_distance = (cfg.ramp_steps + cfg.min_cruise_steps) as f64 * cfg.approach.v * cfg.delta;
    let mut label = 1;
    c.standstill();
    while c.report.retained < cfg.steps_budget {
        let target = c.draw_target(rng, min_distance)?;
        let p = c.pose();
        let bearing = (target.1 - p.x2).atan2(target.0 - p.x1);
        let sign = angle_difference(bearing, p.theta).signum();
        c.turn_towards(target, Control::new(0.0, sign * cfg.approach.omega.abs()), 0.0, None);
        c.drive_towards(target, approach_drive, None);
        c.standstill();

        let u = basis.input(label);
        let step_rot = u.omega.abs() * cfg.delta;
        let ramp_rot = c.ramp_equivalent_steps() * step_rot;
        c.ramp(u, true, Discard::Ramp);
        let mut rotated = ramp_rot;
        while rotated + step_rot + ramp_rot <= TAU && !c.stop_leaves_domain(u) {
            c.record(label, u);
            rotated += step_rot;
        }
        c.close();
        c.ramp(u, false, Discard::Ramp);
        c.standstill();
        label = if label == 1 { 2 } else { 1 };
    }
    c.finish(basis)
}

/// Every transition of every segment, grouped by label.
pub fn snapshots_from_segments(segments: &[LabeledSegment], basis: &ControlBasis, delta: f64) -> Result<SnapshotSet> {
    let blocks = basis.len() + 1;
    let mut x = vec![Vec::new(); blocks];
    let mut y = vec![Vec::new(); blocks];
    for seg in segments {
        if seg.label >= blocks {
            return Err(Error::invalid(format!("segment label {} outside basis", seg.label)));
        }
        for (s, _, t) in seg.trajectory.transitions() {
            x[seg.label].push(s);
            y[seg.label].push(t);
        }
    }
    SnapshotSet::new(delta, *basis, x, y)
}

/// Outcome of [`subsample`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SubsampleReport {
    /// Segments shorter than `m2` that were dropped.
    pub skipped_segments: usize,
    /// Transitions per label after truncation, before striding.
    pub truncated_counts: Vec<usize>,
    /// Transitions per label in the result.
    pub kept_counts: Vec<usize>,
}

/// Truncates every basis-input segment to its first `m2` transitions,
/// concatenates them in the given order, keeps every `n`th transition
/// (indices `0, n, 2n, ...`) and sorts the survivors by label.
///
/// Zero-input segments are standstill records and pass through unchanged.
pub fn subsample(
    segments: &[LabeledSegment],
    basis: &ControlBasis,
    delta: f64,
    m2: usize,
    n: usize,
) -> Result<(SnapshotSet, SubsampleReport)> {
    if m2 == 0 || n == 0 {
        return Err(Error::invalid(format!("m2 and n must be at least 1 (got m2 = {m2}, n = {n})")));
    }
    let blocks = basis.len() + 1;
    let mut x: Vec<Vec<State>> = vec![Vec::new(); blocks];
    let mut y: Vec<Vec<State>> = vec![Vec::new(); blocks];
    let mut report = SubsampleReport {
        truncated_counts: vec![0; blocks],
        ..Default::default()
    };
    let mut position = 0usize;
    for seg in segments {
        if seg.label >= blocks {
            return Err(Error::invalid(format!("segment label {} outside basis", seg.label)));
        }
        if seg.label == 0 {
            for (s, _, t) in seg.trajectory.transitions() {
                x[0].push(s);
                y[0].push(t);
            }
            report.truncated_counts[0] += seg.trajectory.steps();
            continue;
        }
        if seg.trajectory.steps() < m2 {
            report.skipped_segments += 1;
            continue;
        }
        for (s, _, t) in seg.trajectory.transitions().take(m2) {
            if position.is_multiple_of(n) {
                x[seg.label].push(s);
                y[seg.label].push(t);
            }
            position += 1;
        }
        report.truncated_counts[seg.label] += m2;
    }
    report.kept_counts = x.iter().map(Vec::len).collect();
    Ok((SnapshotSet::new(delta, *basis, x, y)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{analytic_flow, NominalPlant};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn max_flow_error(data: &SnapshotSet) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..data.blocks() {
            let u = data.input(i);
            for (x, y) in data.states(i).iter().zip(data.successors(i)) {
                let f = analytic_flow(x, &u, data.delta());
                worst = worst
                    .max((f.x1 - y.x1).abs())
                    .max((f.x2 - y.x2).abs())
                    .max((f.theta - y.theta).abs());
            }
        }
        worst
    }

    #[test]
    fn iid_degenerate_ranges() {
        let d = StateDomain::new(Interval::new(0.3, 0.3).unwrap(), Interval::new(-0.1, -0.1).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pts = sample_iid(&d, &Interval::new(1.0, 1.0).unwrap(), 1, &mut rng).unwrap();
        assert_eq!(pts, vec![State::new(0.3, -0.1, 1.0)]);
        assert!(sample_iid(&d, &Interval::new(1.0, 1.0).unwrap(), 0, &mut rng).is_err());
    }

    #[test]
    fn iid_mean_near_center() {
        let d = StateDomain::motion_plane();
        let th = Interval::new(-PI, PI).unwrap();
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = sample_iid(&d, &th, n, &mut rng).unwrap();
        let sd_of_mean = |w: f64| w / 12f64.sqrt() / (n as f64).sqrt();
        let mean = |f: fn(&State) -> f64| pts.iter().map(f).sum::<f64>() / n as f64;
        assert!((mean(|s| s.x1) - 0.75).abs() < 3.0 * sd_of_mean(1.5));
        assert!(mean(|s| s.x2).abs() < 3.0 * sd_of_mean(1.5));
        assert!(mean(|s| s.theta).abs() < 3.0 * sd_of_mean(TAU));
    }

    #[test]
    fn iid_deterministic() {
        let d = StateDomain::motion_plane();
        let th = Interval::new(-PI, PI).unwrap();
        let a = sample_iid(&d, &th, 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_iid(&d, &th, 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn simulated_snapshots() {
        let pts = vec![State::new(0.4, 0.2, 0.9)];
        let data = simulate_snapshots(&pts, &ControlBasis::unit(), 0.02, rk4_step).unwrap();
        assert_eq!(data.states(0), data.successors(0));
        assert!(max_flow_error(&data) <= 1e-10);
        let ident = simulate_snapshots(&pts, &ControlBasis::b2(), 0.02, |s, _, _| *s).unwrap();
        for i in 0..3 {
            assert_eq!(ident.states(i), ident.successors(i));
        }
        assert!(simulate_snapshots(&[], &ControlBasis::b2(), 0.02, rk4_step).is_err());
    }

    fn nominal_collect_b1(budget: usize, seed: u64) -> (SnapshotSet, SamplingReport) {
        let cfg = CollectConfig {
            steps_budget: budget,
            ..Default::default()
        };
        let mut plant = NominalPlant::new(State::new(0.75, 0.0, 0.0));
        collect_b1(&cfg, &ControlBasis::b1(), &mut plant, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn nominal_collect_b2(budget: usize, seed: u64) -> (SnapshotSet, SamplingReport) {
        let cfg = CollectConfig {
            steps_budget: budget,
            ..Default::default()
        };
        let mut plant = NominalPlant::new(State::new(0.75, 0.0, 0.0));
        collect_b2(&cfg, &ControlBasis::b2(), &mut plant, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn b1_pairs_follow_the_flow() {
        let (data, report) = nominal_collect_b1(1500, 2);
        assert!(report.retained >= 1500);
        assert!(max_flow_error(&data) <= 1e-10);
        assert_eq!(report.retained + report.discarded(), report.generated);
        assert_eq!(report.counts, data.counts());
        let plane = StateDomain::motion_plane();
        for i in 0..3 {
            assert!(data.states(i).iter().all(|s| in_domain(s, &plane)));
        }
        // straight segments keep their heading, turn segments their position
        for seg in &report.segments {
            let st = seg.trajectory.states();
            match seg.label {
                1 => assert!(st.iter().all(|s| s.theta == st[0].theta)),
                2 => assert!(st.iter().all(|s| s.x1 == st[0].x1 && s.x2 == st[0].x2)),
                _ => {}
            }
        }
    }

    #[test]
    fn b1_turns_at_least_once_around() {
        let (_, report) = nominal_collect_b1(600, 3);
        let turns: Vec<&LabeledSegment> = report.segments.iter().filter(|s| s.label == 2).collect();
        assert!(!turns.is_empty());
        for t in turns {
            // recorded full steps plus the two ramps (r steps of rotation) reach 2pi
            let rot = (t.trajectory.steps() + 3) as f64 * 2.0 * 0.1;
            assert!(rot >= TAU - 1e-9, "turn of {rot} rad");
        }
    }

    #[test]
    fn b2_pairs_follow_the_flow() {
        let (data, report) = nominal_collect_b2(1200, 4);
        assert!(report.retained >= 1200);
        assert!(max_flow_error(&data) <= 1e-10);
        assert_eq!(data.states(0), data.successors(0));
        assert_eq!(report.retained + report.discarded(), report.generated);
        assert!(report.discarded_approach > 0);
        let basis = ControlBasis::b2();
        for seg in &report.segments {
            assert!(seg.trajectory.controls().iter().all(|u| *u == basis.input(seg.label)));
            let rot = seg.trajectory.steps() as f64 * basis.input(seg.label).omega.abs() * 0.1;
            assert!(rot <= TAU + 1e-12);
        }
        assert!(report.counts[1] > 0 && report.counts[2] > 0);
    }

    #[test]
    fn collection_rejects_wrong_basis_shape() {
        let cfg = CollectConfig::default();
        let mut plant = NominalPlant::new(State::new(0.75, 0.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(collect_b1(&cfg, &ControlBasis::b2(), &mut plant, &mut rng).is_err());
        assert!(collect_b2(&cfg, &ControlBasis::b1(), &mut plant, &mut rng).is_err());
    }

    #[test]
    fn collection_is_deterministic() {
        let (a, _) = nominal_collect_b2(400, 5);
        let (b, _) = nominal_collect_b2(400, 5);
        assert_eq!(a, b);
    }

    fn line_segments(count: usize, len: usize, label: usize) -> Vec<LabeledSegment> {
        (0..count)
            .map(|k| {
                let states = (0..=len).map(|i| State::new(k as f64, i as f64, 0.0)).collect();
                let trajectory = Trajectory::new(0.1, states, vec![Control::new(0.2, 0.0); len]).unwrap();
                LabeledSegment { label, trajectory }
            })
            .collect()
    }

    fn with_other_labels(mut segs: Vec<LabeledSegment>) -> Vec<LabeledSegment> {
        segs.extend(line_segments(1, 25, 2));
        segs.extend(line_segments(2, 1, 0));
        segs
    }

    #[test]
    fn subsample_stride_arithmetic() {
        let segs = with_other_labels(line_segments(50, 30, 1));
        let b = ControlBasis::b1();
        let (full, rep) = subsample(&segs, &b, 0.1, 20, 1).unwrap();
        assert_eq!(full.counts()[1], 1000);
        assert_eq!(rep.truncated_counts[1], 1000);
        let (one, _) = subsample(&segs, &b, 0.1, 20, 1000).unwrap();
        assert_eq!(one.counts()[1], 1);
        let (fifty, _) = subsample(&segs, &b, 0.1, 20, 20).unwrap();
        assert_eq!(fifty.counts()[1], 50);
        // standstill pairs are never thinned
        assert_eq!(fifty.counts()[0], 2);
    }

    #[test]
    fn subsample_skips_short_segments() {
        let mut segs = with_other_labels(line_segments(3, 30, 1));
        segs.extend(line_segments(2, 10, 1));
        let (data, rep) = subsample(&segs, &ControlBasis::b1(), 0.1, 20, 1).unwrap();
        assert_eq!(rep.skipped_segments, 2);
        assert_eq!(data.counts()[1], 60);
        assert!(subsample(&segs, &ControlBasis::b1(), 0.1, 0, 1).is_err());
    }

    #[test]
    fn subsample_keeps_first_transitions_in_order() {
        let segs = with_other_labels(line_segments(2, 30, 1));
        let (data, _) = subsample(&segs, &ControlBasis::b1(), 0.1, 20, 7).unwrap();
        let xs = data.states(1);
        // indices 0, 7, 14, 21, 28, 35 of the concatenation [seg0 0..20, seg1 0..20]
        let expected: Vec<State> = [0, 7, 14, 21, 28, 35]
            .iter()
            .map(|&i| State::new((i / 20) as f64, (i % 20) as f64, 0.0))
            .collect();
        assert_eq!(xs, expected.as_slice());
    }

    #[test]
    fn subsample_stride_runs_across_labels() {
        let mut segs = line_segments(1, 20, 1);
        segs.extend(line_segments(1, 20, 2));
        segs.extend(line_segments(1, 1, 0));
        let (data, rep) = subsample(&segs, &ControlBasis::b1(), 0.1, 20, 15).unwrap();
        // concatenation indices 0, 15, 30: two from the first segment, one from the second
        assert_eq!(data.counts(), vec![1, 2, 1]);
        assert_eq!(rep.truncated_counts, vec![1, 20, 20]);
        assert_eq!(data.states(2)[0], State::new(0.0, 10.0, 0.0));
    }
}
