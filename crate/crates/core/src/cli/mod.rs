//! Command-line interface: `generate-data`, `fit`, `predict`, `evaluate` and
//! `experiment`.
//!
//! Exit codes: 0 on success, 2 for invalid arguments or configuration, 1 for
//! any other failure (I/O, insufficient data, failed sanity checks).

pub mod config;
pub mod experiments;
pub mod pipeline;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::evaluation::{one_step_errors, rollout_errors, run_statistics_of, ErrorSeries, Metric};
use crate::io;
use crate::surrogate::{rollout, sur1_step, Variant};
use crate::types::State;
use config::ExperimentConfig;
use experiments::ExperimentName;

#[derive(Debug, Parser)]
#[command(name = "koopman-drive", version, about = "Bilinear Koopman surrogates for a differential-drive robot")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Configuration override `key.path=value`, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Report failed sanity checks without failing.
    #[arg(long, global = true)]
    pub waive_checks: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a training data set.
    GenerateData,
    /// Fit a bilinear surrogate model.
    Fit {
        /// Snapshot sidecar written by generate-data; generated from the config when absent.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Roll out a model along a control sequence.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Initial state `x1,x2,theta`; the scenario's start pose when absent.
        #[arg(long, value_parser = parse_state, allow_hyphen_values = true)]
        x0: Option<State>,
        /// CSV with columns `v,omega`; the configured scenario when absent.
        #[arg(long)]
        controls: Option<PathBuf>,
        #[arg(long)]
        variant: Option<Variant>,
    },
    /// Compare a model and the nominal predictor against reference runs.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Run a named experiment recipe.
    Experiment {
        /// fig1, fig2, fig3, fig4-data, fig5 or fig6.
        name: ExperimentName,
    },
}

fn parse_state(s: &str) -> std::result::Result<State, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("`{p}` is not a number")))
        .collect::<std::result::Result<_, _>>()?;
    match parts.as_slice() {
        [a, b, c] => State::try_new(*a, *b, *c).map_err(|e| e.to_string()),
        _ => Err(format!("expected x1,x2,theta, got `{s}`")),
    }
}

impl Cli {
    fn config(&self, preset: Value) -> Result<ExperimentConfig> {
        let mut overrides = self.global.overrides.clone();
        if self.global.waive_checks {
            overrides.push("waive_checks=true".into());
        }
        config::resolve(preset, self.global.config.as_deref(), &overrides, self.global.seed)
    }
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) => 2,
        _ => 1,
    }
}

/// Executes the parsed command, on a dedicated thread pool when `--threads` is given.
pub fn run(cli: &Cli) -> Result<()> {
    match cli.global.threads {
        Some(0) => Err(Error::invalid("--threads must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(format!("--threads: {e}")))?;
            pool.install(|| dispatch(cli))
        }
        None => dispatch(cli),
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let out = &cli.global.out;
    match &cli.command {
        Command::GenerateData => generate_data(&cli.config(json!({}))?, out),
        Command::Fit { data } => fit(&cli.config(json!({}))?, data.as_deref(), out),
        Command::Predict {
            model,
            x0,
            controls,
            variant,
        } => predict(&cli.config(json!({}))?, model, *x0, controls.as_deref(), *variant, out),
        Command::Evaluate { model } => evaluate(&cli.config(json!({}))?, model, out),
        Command::Experiment { name } => experiment(*name, &cli.config(name.preset())?, out),
    }
}

fn generate_data(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let ds = pipeline::build_dataset(cfg)?;
    let sidecar = io::write_snapshots(out, "data", &ds.data, Some(cfg.seed))?;
    let mut summary = json!({ "dataset": sidecar, "counts": ds.data.counts(), "data_source": cfg.data_source });
    if let Some(report) = &ds.report {
        io::write_atomic(&out.join("segments.csv"), &io::segments_csv(&report.segments)?)?;
        summary["report"] = serde_json::to_value(report)?;
    }
    if let Some(sub) = &ds.subsample {
        summary["subsample"] = serde_json::to_value(sub)?;
    }
    io::write_json(&out.join("data_report.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn fit(cfg: &ExperimentConfig, data: Option<&Path>, out: &Path) -> Result<()> {
    let data = match data {
        Some(p) => io::read_snapshots(p)?.0,
        None => pipeline::build_dataset(cfg)?.data,
    };
    let model = pipeline::fit_model(cfg, &data, &cfg.observables()?)?;
    let path = out.join("model.json");
    io::write_model(&path, &model)?;
    let summary = json!({
        "model": path,
        "observables": model.observables().len(),
        "diagnostics": model.diagnostics(),
        "k0_max_deviation": pipeline::driftless_deviation(&model, &data),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn predict(
    cfg: &ExperimentConfig,
    model_path: &Path,
    x0: Option<State>,
    controls: Option<&Path>,
    variant: Option<Variant>,
    out: &Path,
) -> Result<()> {
    let model = io::read_model(model_path)?;
    let controls = match controls {
        Some(p) => io::read_controls(p)?,
        None => pipeline::scenario(cfg, cfg.scenario, model.delta())?,
    };
    let x0 = x0.unwrap_or_else(|| cfg.start_pose());
    let variant = variant.unwrap_or(cfg.variant);
    let t = rollout(&model, variant, x0, &controls);
    let path = out.join("prediction.csv");
    io::write_trajectory(&path, &t)?;
    log::info!("{variant} rollout of {} steps written to {}", controls.len(), path.display());
    Ok(())
}

fn evaluate(cfg: &ExperimentConfig, model_path: &Path, out: &Path) -> Result<()> {
    let model = io::read_model(model_path)?;
    let dt = model.delta();
    let controls = pipeline::scenario(cfg, cfg.scenario, dt)?;
    let x0 = cfg.start_pose();
    let runs = pipeline::references(cfg, &controls, x0, dt)?;
    let prediction = rollout(&model, cfg.variant, x0, &controls);
    let nominal = pipeline::nominal_rollout(x0, &controls, dt)?;

    let collect = |f: &dyn Fn(&crate::types::Trajectory) -> Result<ErrorSeries>| -> Result<Vec<ErrorSeries>> {
        runs.iter().map(f).collect()
    };
    let sur_one = collect(&|r| one_step_errors(|s, u| sur1_step(&model, s, u), r))?;
    let nom_one = collect(&|r| one_step_errors(|s, u| crate::dynamics::rk4_step(s, u, dt), r))?;
    let sur_roll = collect(&|r| rollout_errors(&prediction, r))?;
    let nom_roll = collect(&|r| rollout_errors(&nominal, r))?;

    let mut summary = serde_json::Map::new();
    for (name, series, first) in [
        ("surrogate_one_step", &sur_one, 1),
        ("nominal_one_step", &nom_one, 1),
        ("surrogate_rollout", &sur_roll, 0),
        ("nominal_rollout", &nom_roll, 0),
    ] {
        let stats = run_statistics_of(series, Metric::Total)?;
        io::write_run_statistics(&out.join(format!("{name}_stats.csv")), &stats, dt, first)?;
        let mean = series.iter().map(|s| s.mean(Metric::Total)).sum::<f64>() / series.len() as f64;
        summary.insert(format!("{name}_mean_total"), json!(mean));
    }
    io::write_trajectory(&out.join("prediction.csv"), &prediction)?;
    summary.insert("scenario".into(), json!(cfg.scenario));
    summary.insert("runs".into(), json!(runs.len()));
    summary.insert("variant".into(), json!(cfg.variant));
    let summary = Value::Object(summary);
    io::write_json(&out.join("evaluation.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn experiment(name: ExperimentName, cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let rendered = experiments::run(name, cfg)?;
    let dir = out.join(name.to_string());
    let mut files = Vec::with_capacity(rendered.files.len());
    for (file, bytes) in &rendered.files {
        io::write_atomic(&dir.join(file), bytes)?;
        files.push(file.clone());
    }
    let manifest = json!({
        "experiment": name.to_string(),
        "kind": if name.hardware_analogue() { "hardware-analogue (emulated robot)" } else { "simulation" },
        "config": cfg,
        "derived_seeds": {
            "collect_plant": pipeline::derived_seed(cfg.seed, pipeline::stream::COLLECT_PLANT),
            "reference_runs": match pipeline::reference_stepper(cfg) {
                crate::evaluation::ReferenceStepper::Emulator { seeds, .. } => json!(seeds),
                crate::evaluation::ReferenceStepper::Nominal => Value::Null,
            },
        },
        "files": files,
        "summary": rendered.summary,
    });
    io::write_json(&dir.join("manifest.json"), &manifest)?;
    println!("{}", serde_json::to_string_pretty(&manifest["summary"])?);
    log::info!("{} files written to {}", files.len() + 1, dir.display());
    Ok(())
}
