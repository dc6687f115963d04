//! Building blocks shared by the commands and the experiment recipes.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{DataSource, ExperimentConfig, PlantChoice};
use crate::dictionary::ObservableSet;
use crate::dynamics::{rk4_step, Emulator, NominalPlant, Plant};
use crate::error::{Error, Result};
use crate::estimator::{fit_snapshot_operators, BilinearKoopmanModel, SnapshotSet};
use crate::evaluation::{reference_runs, scenario_controls, ReferenceStepper, ScenarioName};
use crate::io::read_snapshots;
use crate::sampling::{
    collect_b1, collect_b2, sample_iid, simulate_snapshots, subsample, SamplingReport, SubsampleReport,
};
use crate::types::{Control, ControlBasis, State, Trajectory};

/// Independent random streams derived from the experiment seed.
pub mod stream {
    pub const IID: u64 = 1;
    pub const COLLECT: u64 = 2;
    pub const COLLECT_PLANT: u64 = 3;
    pub const SCENARIO: u64 = 4;
    /// Reference run `k` uses stream `REFERENCE + k`.
    pub const REFERENCE: u64 = 1 << 32;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn derived_seed(seed: u64, stream: u64) -> u64 {
    stream_rng(seed, stream).next_u64()
}

/// Training data plus how it was produced.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub data: SnapshotSet,
    pub report: Option<SamplingReport>,
    pub subsample: Option<SubsampleReport>,
}

/// Collects trajectory data for `source`, which must be a collection source.
pub fn collect(cfg: &ExperimentConfig, source: &DataSource, basis: &ControlBasis) -> Result<(SnapshotSet, SamplingReport)> {
    let ccfg = cfg.collect_config();
    let start = State::from_array(cfg.collect.start);
    let mut rng = stream_rng(cfg.seed, stream::COLLECT);
    let mut plant: Box<dyn Plant> = match cfg.plant {
        PlantChoice::Nominal => Box::new(NominalPlant::new(start)),
        PlantChoice::Emulator => Box::new(Emulator::new(
            cfg.emulator.with_seed(derived_seed(cfg.seed, stream::COLLECT_PLANT)),
            start,
        )?),
    };
    match source {
        DataSource::CollectB1 => collect_b1(&ccfg, basis, plant.as_mut(), &mut rng),
        DataSource::CollectB2 => collect_b2(&ccfg, basis, plant.as_mut(), &mut rng),
        other => Err(Error::invalid(format!("data_source: {other} is not a collection strategy"))),
    }
}

/// Produces the training data described by the configuration.
pub fn build_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let basis = cfg.basis()?;
    match &cfg.data_source {
        DataSource::IidSim => {
            if cfg.plant == PlantChoice::Emulator {
                log::warn!("iid-sim always steps the nominal model; plant = emulator is ignored");
            }
            let mut rng = stream_rng(cfg.seed, stream::IID);
            let points = sample_iid(&cfg.domain, &cfg.theta_range, cfg.d, &mut rng)?;
            let data = simulate_snapshots(&points, &basis, cfg.delta, rk4_step)?;
            Ok(Dataset {
                data,
                report: None,
                subsample: None,
            })
        }
        source @ (DataSource::CollectB1 | DataSource::CollectB2) => {
            let (full, report) = collect(cfg, source, &basis)?;
            log::info!(
                "collected {} pairs per input {:?} ({} generated, {} discarded)",
                report.retained,
                report.counts,
                report.generated,
                report.discarded()
            );
            let (data, sub) = match cfg.subsample {
                Some(s) => {
                    let (d, r) = subsample(&report.segments, &basis, cfg.delta, s.m2, s.n)?;
                    (d, Some(r))
                }
                None => (full, None),
            };
            Ok(Dataset {
                data,
                report: Some(report),
                subsample: sub,
            })
        }
        DataSource::Dataset(path) => {
            let (data, _) = read_snapshots(path)?;
            if *data.basis() != basis {
                log::warn!(
                    "dataset basis {:?} differs from the configured basis; using the dataset's",
                    data.basis().vectors()
                );
            }
            Ok(Dataset {
                data,
                report: None,
                subsample: None,
            })
        }
    }
}

/// `max |K0 - I|` for drift-free data (`Y0 == X0`), else `None`.
pub fn driftless_deviation(model: &BilinearKoopmanModel, data: &SnapshotSet) -> Option<f64> {
    if data.states(0) != data.successors(0) {
        return None;
    }
    let k0 = model.operator(0);
    let n = k0.nrows();
    Some(
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (k0[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max),
    )
}

/// Fits the bilinear model and runs the drift-free sanity check.
pub fn fit_model(cfg: &ExperimentConfig, data: &SnapshotSet, obs: &ObservableSet) -> Result<BilinearKoopmanModel> {
    let model = fit_snapshot_operators(data, obs, cfg.ridge)?;
    for (i, d) in model.diagnostics().iter().enumerate() {
        match d.gram_condition {
            Some(c) => log::info!("K{i}: {} samples, rank {}, Gram condition {c:.3e}", d.samples, d.rank),
            None => log::info!("K{i}: {} samples, rank {}, Gram matrix singular", d.samples, d.rank),
        }
    }
    if let Some(dev) = driftless_deviation(&model, data) {
        if dev <= cfg.driftless_tolerance {
            log::info!("drift-free data: max |K0 - I| = {dev:.3e}");
        } else {
            let msg = format!("drift-free data but max |K0 - I| = {dev:.3e} > {:e}", cfg.driftless_tolerance);
            if cfg.waive_checks {
                log::warn!("{msg} (waived)");
            } else {
                return Err(Error::Check(msg));
            }
        }
    }
    Ok(model)
}

pub fn scenario(cfg: &ExperimentConfig, name: ScenarioName, dt: f64) -> Result<Vec<Control>> {
    scenario_controls(name, &cfg.scenario_params, dt, &mut stream_rng(cfg.seed, stream::SCENARIO))
}

pub fn reference_stepper(cfg: &ExperimentConfig) -> ReferenceStepper {
    match cfg.plant {
        PlantChoice::Nominal => ReferenceStepper::Nominal,
        PlantChoice::Emulator => ReferenceStepper::Emulator {
            params: cfg.emulator,
            seeds: (0..cfg.runs as u64)
                .map(|k| derived_seed(cfg.seed, stream::REFERENCE + k))
                .collect(),
        },
    }
}

pub fn references(cfg: &ExperimentConfig, controls: &[Control], x0: State, dt: f64) -> Result<Vec<Trajectory>> {
    let count = match cfg.plant {
        PlantChoice::Nominal => 1,
        PlantChoice::Emulator => cfg.runs,
    };
    reference_runs(controls, &reference_stepper(cfg), x0, count, dt)
}

/// Nominal RK4 prediction of a whole control sequence.
pub fn nominal_rollout(x0: State, controls: &[Control], dt: f64) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(x0);
    let mut s = x0;
    for u in controls {
        s = rk4_step(&s, u, dt);
        states.push(s);
    }
    Trajectory::new(dt, states, controls.to_vec())
}
