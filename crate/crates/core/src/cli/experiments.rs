//! Named end-to-end recipes, one per figure of the study.
//!
//! Each recipe has a preset configuration layer, a function computing typed
//! results (used directly by the acceptance suite) and a renderer that turns
//! the results into CSV files.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{DataSource, DictionaryChoice, ExperimentConfig, PlantChoice};
use super::pipeline::{build_dataset, collect, fit_model, nominal_rollout, references, scenario, Dataset};
use crate::dictionary::ObservableSet;
use crate::dynamics::rk4_step;
use crate::error::{Error, Result};
use crate::estimator::BilinearKoopmanModel;
use crate::evaluation::{
    one_step_errors, rollout_errors, run_statistics_of, ErrorSeries, Metric, RunStatistics, ScenarioName,
};
use crate::io::{error_series_csv, run_statistics_csv, segments_csv, snapshot_block_csv, trajectory_csv};
use crate::sampling::{subsample, SamplingReport};
use crate::surrogate::{rollout, sur1_rollout, sur1_step, sur2_rollout};
use crate::types::{ControlBasis, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentName {
    Fig1,
    Fig2,
    Fig3,
    Fig4Data,
    Fig5,
    Fig6,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 6] = [
        ExperimentName::Fig1,
        ExperimentName::Fig2,
        ExperimentName::Fig3,
        ExperimentName::Fig4Data,
        ExperimentName::Fig5,
        ExperimentName::Fig6,
    ];

    /// Recipes driven by the emulator instead of the nominal model.
    pub fn hardware_analogue(self) -> bool {
        !matches!(self, ExperimentName::Fig1 | ExperimentName::Fig2)
    }

    /// Configuration layer applied beneath the user's settings.
    pub fn preset(self) -> Value {
        match self {
            ExperimentName::Fig1 => json!({
                "delta": 0.02, "basis": "B", "dictionary": "O120", "data_source": "iid-sim",
                "plant": "nominal", "d": 10000, "scenario": "circle",
                "domain": simulation_domain()
            }),
            ExperimentName::Fig2 => json!({
                "delta": 0.02, "dictionary": "O120", "data_source": "iid-sim",
                "plant": "nominal", "d": 10000, "scenario": "random",
                "domain": simulation_domain()
            }),
            ExperimentName::Fig3 | ExperimentName::Fig4Data => json!({
                "delta": 0.1, "plant": "emulator", "steps_budget": 5000, "scenario": "infinity"
            }),
            ExperimentName::Fig5 => json!({
                "delta": 0.1, "plant": "emulator", "basis": "B2", "dictionary": "O11",
                "data_source": "collect-b2", "steps_budget": 5000, "runs": 15
            }),
            ExperimentName::Fig6 => json!({
                "delta": 0.1, "plant": "emulator", "dictionary": "O11", "steps_budget": 5000,
                "runs": 15, "scenario": "infinity", "subsample": {"m2": 20, "n": 1}
            }),
        }
    }
}

/// Sampling box for the simulation recipes; covers the circle and random scenarios.
fn simulation_domain() -> Value {
    json!({ "x1_range": [-0.5, 2.5], "x2_range": [-1.5, 1.5] })
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fig1" => Ok(ExperimentName::Fig1),
            "fig2" => Ok(ExperimentName::Fig2),
            "fig3" => Ok(ExperimentName::Fig3),
            "fig4-data" => Ok(ExperimentName::Fig4Data),
            "fig5" => Ok(ExperimentName::Fig5),
            "fig6" => Ok(ExperimentName::Fig6),
            _ => Err(Error::invalid(format!(
                "unknown experiment `{s}` (expected fig1, fig2, fig3, fig4-data, fig5 or fig6)"
            ))),
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentName::Fig1 => "fig1",
            ExperimentName::Fig2 => "fig2",
            ExperimentName::Fig3 => "fig3",
            ExperimentName::Fig4Data => "fig4-data",
            ExperimentName::Fig5 => "fig5",
            ExperimentName::Fig6 => "fig6",
        })
    }
}

/// Files produced by a recipe plus a JSON summary for the manifest.
#[derive(Debug, Clone, Default)]
pub struct Rendered {
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Value,
}

fn with(cfg: &ExperimentConfig, basis: &str, dictionary: Option<&str>) -> Result<ExperimentConfig> {
    let mut c = cfg.clone();
    c.basis = serde_json::from_value(json!(basis))?;
    if let Some(d) = dictionary {
        c.dictionary = DictionaryChoice::Preset(d.into());
    }
    if matches!(c.data_source, DataSource::CollectB1 | DataSource::CollectB2) || c.plant == PlantChoice::Emulator {
        c.data_source = if basis == "B1" { DataSource::CollectB1 } else { DataSource::CollectB2 };
    }
    Ok(c)
}

fn fit(cfg: &ExperimentConfig) -> Result<(Dataset, BilinearKoopmanModel)> {
    let ds = build_dataset(cfg)?;
    let model = fit_model(cfg, &ds.data, &cfg.observables()?)?;
    Ok((ds, model))
}

fn series_columns(prefix: &str) -> [String; 3] {
    ["total_norm", "position_norm", "orientation_abs"].map(|c| format!("{prefix}_{c}"))
}

/// Side-by-side error series sharing a time axis.
fn combined_errors_csv(parts: &[(&str, &ErrorSeries)]) -> Result<Vec<u8>> {
    let mut header = vec!["t".to_string()];
    for (p, _) in parts {
        header.extend(series_columns(p));
    }
    let first = parts[0].1;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(&header)?;
    for (k, t) in first.times().enumerate() {
        let mut row = vec![format!("{t}")];
        for (_, e) in parts {
            row.push(format!("{}", e.total_norm[k]));
            row.push(format!("{}", e.position_norm[k]));
            row.push(format!("{}", e.orientation_abs[k]));
        }
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub struct Fig1 {
    pub reference: Trajectory,
    pub sur1: Trajectory,
    pub sur2: Trajectory,
    pub sur1_errors: ErrorSeries,
    pub sur2_errors: ErrorSeries,
    pub k0_deviation: Option<f64>,
}

/// Circle prediction with SUR1 and SUR2 from i.i.d. nominal data.
pub fn fig1(cfg: &ExperimentConfig) -> Result<Fig1> {
    let (ds, model) = fit(cfg)?;
    let controls = scenario(cfg, cfg.scenario, cfg.delta)?;
    let x0 = cfg.start_pose();
    let reference = nominal_rollout(x0, &controls, cfg.delta)?;
    let sur1 = sur1_rollout(&model, x0, &controls);
    let sur2 = sur2_rollout(&model, x0, &controls);
    Ok(Fig1 {
        sur1_errors: rollout_errors(&sur1, &reference)?,
        sur2_errors: rollout_errors(&sur2, &reference)?,
        k0_deviation: super::pipeline::driftless_deviation(&model, &ds.data),
        reference,
        sur1,
        sur2,
    })
}

fn render_fig1(r: &Fig1) -> Result<Rendered> {
    Ok(Rendered {
        files: vec![
            ("reference.csv".into(), trajectory_csv(&r.reference)?),
            ("sur1.csv".into(), trajectory_csv(&r.sur1)?),
            ("sur2.csv".into(), trajectory_csv(&r.sur2)?),
            (
                "errors.csv".into(),
                combined_errors_csv(&[("sur1", &r.sur1_errors), ("sur2", &r.sur2_errors)])?,
            ),
        ],
        summary: json!({
            "sur1_final_total_error": r.sur1_errors.last(Metric::Total),
            "sur1_final_position_error": r.sur1_errors.last(Metric::Position),
            "sur2_final_total_error": r.sur2_errors.last(Metric::Total),
            "k0_max_deviation": r.k0_deviation,
        }),
    })
}

pub struct BasisRun {
    pub basis: String,
    pub prediction: Trajectory,
    pub one_step: ErrorSeries,
    pub rollout: ErrorSeries,
}

pub struct Fig2 {
    pub reference: Trajectory,
    pub runs: Vec<BasisRun>,
}

/// Random-input prediction with SUR1 for the bases B1 and B2.
pub fn fig2(cfg: &ExperimentConfig) -> Result<Fig2> {
    let controls = scenario(cfg, cfg.scenario, cfg.delta)?;
    let x0 = cfg.start_pose();
    let reference = nominal_rollout(x0, &controls, cfg.delta)?;
    let runs = ["B1", "B2"]
        .par_iter()
        .map(|b| {
            let c = with(cfg, b, None)?;
            let (_, model) = fit(&c)?;
            let prediction = rollout(&model, c.variant, x0, &controls);
            Ok(BasisRun {
                basis: b.to_string(),
                one_step: one_step_errors(|s, u| sur1_step(&model, s, u), &reference)?,
                rollout: rollout_errors(&prediction, &reference)?,
                prediction,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Fig2 { reference, runs })
}

fn render_fig2(r: &Fig2) -> Result<Rendered> {
    let mut files = vec![("reference.csv".to_string(), trajectory_csv(&r.reference)?)];
    let mut summary = serde_json::Map::new();
    for run in &r.runs {
        let b = run.basis.to_lowercase();
        files.push((format!("prediction_{b}.csv"), trajectory_csv(&run.prediction)?));
        files.push((format!("one_step_{b}.csv"), error_series_csv(&run.one_step)?));
        files.push((format!("rollout_{b}.csv"), error_series_csv(&run.rollout)?));
        summary.insert(format!("{b}_mean_one_step_total"), json!(run.one_step.mean(Metric::Total)));
        summary.insert(format!("{b}_final_rollout_total"), json!(run.rollout.last(Metric::Total)));
    }
    Ok(Rendered {
        files,
        summary: Value::Object(summary),
    })
}

pub struct Fig3Entry {
    pub basis: String,
    pub dictionary: String,
    pub prediction: Trajectory,
    pub errors: ErrorSeries,
}

pub struct Fig3 {
    pub reference: Trajectory,
    pub nominal: Trajectory,
    pub nominal_errors: ErrorSeries,
    pub entries: Vec<Fig3Entry>,
}

/// One representative emulated lap against SUR1 models for both bases and all
/// preset dictionaries.
pub fn fig3(cfg: &ExperimentConfig) -> Result<Fig3> {
    let controls = scenario(cfg, cfg.scenario, cfg.delta)?;
    let x0 = cfg.start_pose();
    let reference = references(cfg, &controls, x0, cfg.delta)?.remove(0);
    let nominal = nominal_rollout(x0, &controls, cfg.delta)?;
    let mut entries = Vec::new();
    for b in ["B1", "B2"] {
        let c = with(cfg, b, None)?;
        let data = build_dataset(&c)?.data;
        let fitted = ["O120", "O32", "O11"]
            .par_iter()
            .map(|d| {
                let obs = ObservableSet::preset_by_name(d)?;
                let model = fit_model(&c, &data, &obs)?;
                let prediction = sur1_rollout(&model, x0, &controls);
                Ok(Fig3Entry {
                    basis: b.into(),
                    dictionary: d.to_string(),
                    errors: rollout_errors(&prediction, &reference)?,
                    prediction,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        entries.extend(fitted);
    }
    Ok(Fig3 {
        nominal_errors: rollout_errors(&nominal, &reference)?,
        reference,
        nominal,
        entries,
    })
}

fn render_fig3(r: &Fig3) -> Result<Rendered> {
    let mut files = vec![
        ("reference.csv".to_string(), trajectory_csv(&r.reference)?),
        ("nominal.csv".to_string(), trajectory_csv(&r.nominal)?),
        ("errors_nominal.csv".to_string(), error_series_csv(&r.nominal_errors)?),
    ];
    let mut summary = serde_json::Map::new();
    for e in &r.entries {
        let tag = format!("{}_{}", e.basis, e.dictionary).to_lowercase();
        files.push((format!("prediction_{tag}.csv"), trajectory_csv(&e.prediction)?));
        files.push((format!("errors_{tag}.csv"), error_series_csv(&e.errors)?));
        summary.insert(format!("{tag}_mean_position_error"), json!(e.errors.mean(Metric::Position)));
    }
    summary.insert("nominal_mean_position_error".into(), json!(r.nominal_errors.mean(Metric::Position)));
    Ok(Rendered {
        files,
        summary: Value::Object(summary),
    })
}

pub struct Fig4Data {
    pub collections: Vec<(String, crate::estimator::SnapshotSet, SamplingReport)>,
}

/// Training trajectories of both collection strategies.
pub fn fig4_data(cfg: &ExperimentConfig) -> Result<Fig4Data> {
    let collections = ["B1", "B2"]
        .par_iter()
        .map(|b| {
            let c = with(cfg, b, None)?;
            let source = if *b == "B1" { DataSource::CollectB1 } else { DataSource::CollectB2 };
            let (data, report) = collect(&c, &source, &c.basis()?)?;
            Ok((b.to_string(), data, report))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Fig4Data { collections })
}

fn render_fig4(r: &Fig4Data) -> Result<Rendered> {
    let mut files = Vec::new();
    let mut summary = serde_json::Map::new();
    for (b, data, report) in &r.collections {
        let b = b.to_lowercase();
        files.push((format!("segments_{b}.csv"), segments_csv(&report.segments)?));
        for i in 0..data.blocks() {
            files.push((format!("snapshots_{b}_u{i}.csv"), snapshot_block_csv(data.states(i), data.successors(i))?));
        }
        summary.insert(format!("report_{b}"), serde_json::to_value(report)?);
    }
    Ok(Rendered {
        files,
        summary: Value::Object(summary),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioBenchmark {
    pub scenario: ScenarioName,
    #[serde(skip)]
    pub runs: Vec<Trajectory>,
    #[serde(skip)]
    pub surrogate: Trajectory,
    #[serde(skip)]
    pub nominal: Trajectory,
    #[serde(skip)]
    pub surrogate_stats: [RunStatistics; 2],
    #[serde(skip)]
    pub nominal_stats: [RunStatistics; 2],
    pub surrogate_mean_one_step: f64,
    pub nominal_mean_one_step: f64,
}

/// Rollout error statistics of the surrogate and the nominal model against
/// the emulated runs, plus the mean one-step errors over all runs.
pub fn benchmark(
    cfg: &ExperimentConfig,
    model: &BilinearKoopmanModel,
    name: ScenarioName,
) -> Result<ScenarioBenchmark> {
    let dt = model.delta();
    let controls = scenario(cfg, name, dt)?;
    let x0 = name.default_start();
    let runs = references(cfg, &controls, x0, dt)?;
    let surrogate = sur1_rollout(model, x0, &controls);
    let nominal = nominal_rollout(x0, &controls, dt)?;
    let sur_err: Vec<ErrorSeries> = runs.iter().map(|r| rollout_errors(&surrogate, r)).collect::<Result<_>>()?;
    let nom_err: Vec<ErrorSeries> = runs.iter().map(|r| rollout_errors(&nominal, r)).collect::<Result<_>>()?;
    let stats = |e: &[ErrorSeries]| -> Result<[RunStatistics; 2]> {
        Ok([run_statistics_of(e, Metric::Position)?, run_statistics_of(e, Metric::Orientation)?])
    };
    let sur_one: Vec<ErrorSeries> = runs
        .par_iter()
        .map(|r| one_step_errors(|s, u| sur1_step(model, s, u), r))
        .collect::<Result<_>>()?;
    let nom_one: Vec<ErrorSeries> = runs
        .par_iter()
        .map(|r| one_step_errors(|s, u| rk4_step(s, u, dt), r))
        .collect::<Result<_>>()?;
    let mean = |e: &[ErrorSeries]| e.iter().map(|s| s.mean(Metric::Total)).sum::<f64>() / e.len() as f64;
    Ok(ScenarioBenchmark {
        scenario: name,
        surrogate_stats: stats(&sur_err)?,
        nominal_stats: stats(&nom_err)?,
        surrogate_mean_one_step: mean(&sur_one),
        nominal_mean_one_step: mean(&nom_one),
        runs,
        surrogate,
        nominal,
    })
}

pub struct Fig5 {
    pub report: SamplingReport,
    pub scenarios: Vec<ScenarioBenchmark>,
}

/// B2/O11 surrogate against repeated emulated runs of the infinity and square
/// scenarios.
pub fn fig5(cfg: &ExperimentConfig) -> Result<Fig5> {
    let (ds, model) = fit(cfg)?;
    let scenarios = [ScenarioName::Infinity, ScenarioName::Square]
        .iter()
        .map(|&n| benchmark(cfg, &model, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(Fig5 {
        report: ds.report.unwrap_or_default(),
        scenarios,
    })
}

fn render_fig5(r: &Fig5, dt: f64) -> Result<Rendered> {
    let mut files = Vec::new();
    for s in &r.scenarios {
        let n = s.scenario.to_string();
        files.push((format!("{n}_surrogate.csv"), trajectory_csv(&s.surrogate)?));
        files.push((format!("{n}_nominal.csv"), trajectory_csv(&s.nominal)?));
        for (k, run) in s.runs.iter().enumerate() {
            files.push((format!("{n}_run{k:02}.csv"), trajectory_csv(run)?));
        }
        for (who, stats) in [("surrogate", &s.surrogate_stats), ("nominal", &s.nominal_stats)] {
            files.push((format!("{n}_{who}_position_stats.csv"), run_statistics_csv(&stats[0], dt, 0)?));
            files.push((format!("{n}_{who}_orientation_stats.csv"), run_statistics_csv(&stats[1], dt, 0)?));
        }
    }
    Ok(Rendered {
        files,
        summary: json!({ "sampling": r.report, "scenarios": r.scenarios }),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StrideResult {
    pub n: usize,
    pub counts: Vec<usize>,
    pub mean_one_step: f64,
    #[serde(skip)]
    pub average: RunStatistics,
}

#[derive(Debug, Clone, Serialize)]
pub struct BasisEfficiency {
    pub basis: String,
    pub strides: Vec<StrideResult>,
}

pub struct Fig6 {
    pub nominal_mean_one_step: f64,
    pub nominal: RunStatistics,
    pub bases: Vec<BasisEfficiency>,
}

fn one_step_stats<F>(runs: &[Trajectory], predictor: F) -> Result<(RunStatistics, f64)>
where
    F: Fn(&crate::types::State, &crate::types::Control) -> crate::types::State + Sync,
{
    let series: Vec<ErrorSeries> = runs
        .par_iter()
        .map(|r| one_step_errors(&predictor, r))
        .collect::<Result<_>>()?;
    let stats = run_statistics_of(&series, Metric::Total)?;
    let mean = stats.e_avg.iter().sum::<f64>() / stats.e_avg.len() as f64;
    Ok((stats, mean))
}

/// Mean one-step errors of subsampled-data surrogates over repeated emulated
/// runs, for both bases, next to the nominal model.
pub fn fig6(cfg: &ExperimentConfig) -> Result<Fig6> {
    let dt = cfg.delta;
    let controls = scenario(cfg, cfg.scenario, dt)?;
    let runs = references(cfg, &controls, cfg.start_pose(), dt)?;
    let (nominal, nominal_mean) = one_step_stats(&runs, |s, u| rk4_step(s, u, dt))?;
    let m2 = cfg.subsample.map_or(20, |s| s.m2);
    let mut bases = Vec::new();
    for b in ["B1", "B2"] {
        let c = with(cfg, b, None)?;
        let basis: ControlBasis = c.basis()?;
        let source = if b == "B1" { DataSource::CollectB1 } else { DataSource::CollectB2 };
        let (_, report) = collect(&c, &source, &basis)?;
        let obs = c.observables()?;
        let strides = c
            .subsample_strides
            .par_iter()
            .map(|&n| {
                let (data, _) = subsample(&report.segments, &basis, dt, m2, n)?;
                let model = fit_model(&c, &data, &obs)?;
                let (average, mean_one_step) = one_step_stats(&runs, |s, u| sur1_step(&model, s, u))?;
                Ok(StrideResult {
                    n,
                    counts: data.counts(),
                    mean_one_step,
                    average,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        bases.push(BasisEfficiency { basis: b.into(), strides });
    }
    Ok(Fig6 {
        nominal_mean_one_step: nominal_mean,
        nominal,
        bases,
    })
}

fn render_fig6(r: &Fig6, dt: f64) -> Result<Rendered> {
    let mut files = vec![("nominal.csv".to_string(), run_statistics_csv(&r.nominal, dt, 1)?)];
    for b in &r.bases {
        for s in &b.strides {
            files.push((
                format!("{}_n{}.csv", b.basis.to_lowercase(), s.n),
                run_statistics_csv(&s.average, dt, 1)?,
            ));
        }
    }
    Ok(Rendered {
        files,
        summary: json!({ "nominal_mean_one_step": r.nominal_mean_one_step, "bases": r.bases }),
    })
}

/// Runs a recipe and renders its outputs.
pub fn run(name: ExperimentName, cfg: &ExperimentConfig) -> Result<Rendered> {
    match name {
        ExperimentName::Fig1 => render_fig1(&fig1(cfg)?),
        ExperimentName::Fig2 => render_fig2(&fig2(cfg)?),
        ExperimentName::Fig3 => render_fig3(&fig3(cfg)?),
        ExperimentName::Fig4Data => render_fig4(&fig4_data(cfg)?),
        ExperimentName::Fig5 => render_fig5(&fig5(cfg)?, cfg.delta),
        ExperimentName::Fig6 => render_fig6(&fig6(cfg)?, cfg.delta),
    }
}
