//! File formats: trajectories, snapshot sets, models, error series.
//!
//! Every writer goes through [`write_atomic`], so readers never observe a
//! half-written file. Floats are printed in shortest round-trip form.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::dictionary::ObservableSet;
use crate::error::{Error, Result};
use crate::estimator::{BilinearKoopmanModel, FitDiagnostics, SnapshotSet};
use crate::evaluation::{ErrorSeries, RunStatistics};
use crate::sampling::LabeledSegment;
use crate::types::{Control, ControlBasis, State, Trajectory};

/// Writes `bytes` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>())?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn parse(field: &str, what: &str, line: u64) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("line {line}: `{field}` is not a number ({what})")))
}

fn read_records(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::ReaderBuilder::new()
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    let found: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if found != header {
        return Err(Error::invalid(format!(
            "{}: expected columns {}, found {}",
            path.display(),
            header.join(","),
            found.join(",")
        )));
    }
    Ok(r.records().collect::<std::result::Result<_, _>>()?)
}

pub const TRAJECTORY_HEADER: [&str; 6] = ["t", "x1", "x2", "theta", "v", "omega"];

/// One row per state; the control columns hold the input applied from that
/// state on and are empty on the final row.
pub fn trajectory_csv(t: &Trajectory) -> Result<Vec<u8>> {
    let rows = t.states().iter().enumerate().map(|(k, s)| {
        let (v, w) = match t.controls().get(k) {
            Some(u) => (num(u.v), num(u.omega)),
            None => (String::new(), String::new()),
        };
        vec![num(k as f64 * t.dt()), num(s.x1), num(s.x2), num(s.theta), v, w]
    });
    csv_bytes(&TRAJECTORY_HEADER, rows)
}

pub fn write_trajectory(path: &Path, t: &Trajectory) -> Result<()> {
    write_atomic(path, &trajectory_csv(t)?)
}

pub fn read_trajectory(path: &Path, dt: f64) -> Result<Trajectory> {
    let records = read_records(path, &TRAJECTORY_HEADER)?;
    let mut states = Vec::with_capacity(records.len());
    let mut controls = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let line = i as u64 + 2;
        states.push(State::new(parse(&r[1], "x1", line)?, parse(&r[2], "x2", line)?, parse(&r[3], "theta", line)?));
        if i + 1 < records.len() {
            controls.push(Control::new(parse(&r[4], "v", line)?, parse(&r[5], "omega", line)?));
        }
    }
    Trajectory::new(dt, states, controls)
}

pub const CONTROLS_HEADER: [&str; 2] = ["v", "omega"];

pub fn controls_csv(controls: &[Control]) -> Result<Vec<u8>> {
    csv_bytes(&CONTROLS_HEADER, controls.iter().map(|u| vec![num(u.v), num(u.omega)]))
}

pub fn read_controls(path: &Path) -> Result<Vec<Control>> {
    read_records(path, &CONTROLS_HEADER)?
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let line = i as u64 + 2;
            let u = Control::new(parse(&r[0], "v", line)?, parse(&r[1], "omega", line)?);
            if u.is_finite() {
                Ok(u)
            } else {
                Err(Error::invalid(format!("line {line}: non-finite control")))
            }
        })
        .collect()
}

pub const SNAPSHOT_HEADER: [&str; 6] = ["x1", "x2", "theta", "y1", "y2", "ytheta"];

/// Sidecar describing a snapshot set on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotManifest {
    pub delta: f64,
    pub basis: ControlBasis,
    pub counts: Vec<usize>,
    pub seed: Option<u64>,
    /// Block CSVs relative to the sidecar, index 0 = zero input.
    pub files: Vec<String>,
}

pub fn snapshot_block_csv(xs: &[State], ys: &[State]) -> Result<Vec<u8>> {
    let rows = xs.iter().zip(ys).map(|(x, y)| {
        [x.x1, x.x2, x.theta, y.x1, y.x2, y.theta]
            .into_iter()
            .map(num)
            .collect::<Vec<_>>()
    });
    csv_bytes(&SNAPSHOT_HEADER, rows)
}

/// Writes `<stem>_u<i>.csv` per block and `<stem>.json` into `dir`; returns
/// the sidecar path.
pub fn write_snapshots(dir: &Path, stem: &str, data: &SnapshotSet, seed: Option<u64>) -> Result<PathBuf> {
    let mut files = Vec::with_capacity(data.blocks());
    for i in 0..data.blocks() {
        let name = format!("{stem}_u{i}.csv");
        write_atomic(&dir.join(&name), &snapshot_block_csv(data.states(i), data.successors(i))?)?;
        files.push(name);
    }
    let manifest = SnapshotManifest {
        delta: data.delta(),
        basis: *data.basis(),
        counts: data.counts(),
        seed,
        files,
    };
    let path = dir.join(format!("{stem}.json"));
    write_json(&path, &manifest)?;
    Ok(path)
}

pub fn read_snapshots(sidecar: &Path) -> Result<(SnapshotSet, SnapshotManifest)> {
    let manifest: SnapshotManifest = read_json(sidecar)?;
    let dir = sidecar.parent().unwrap_or(Path::new("."));
    let mut x = Vec::with_capacity(manifest.files.len());
    let mut y = Vec::with_capacity(manifest.files.len());
    for (i, name) in manifest.files.iter().enumerate() {
        let records = read_records(&dir.join(name), &SNAPSHOT_HEADER)?;
        let mut xs = Vec::with_capacity(records.len());
        let mut ys = Vec::with_capacity(records.len());
        for (k, r) in records.iter().enumerate() {
            let line = k as u64 + 2;
            let v: Vec<f64> = (0..6).map(|c| parse(&r[c], SNAPSHOT_HEADER[c], line)).collect::<Result<_>>()?;
            xs.push(State::new(v[0], v[1], v[2]));
            ys.push(State::new(v[3], v[4], v[5]));
        }
        if manifest.counts.get(i) != Some(&xs.len()) {
            return Err(Error::invalid(format!(
                "{name}: {} rows but the sidecar lists {:?}",
                xs.len(),
                manifest.counts.get(i)
            )));
        }
        x.push(xs);
        y.push(ys);
    }
    let data = SnapshotSet::new(manifest.delta, manifest.basis, x, y)?;
    Ok((data, manifest))
}

pub const MODEL_FORMAT: &str = "bilinear-koopman";
pub const MODEL_CONVENTION: &str = "z_next = K z";

/// JSON form of a [`BilinearKoopmanModel`]; matrices are stored row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub convention: String,
    pub delta: f64,
    pub basis: ControlBasis,
    pub observables: ObservableSet,
    pub operators: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub diagnostics: Vec<FitDiagnostics>,
}

impl From<&BilinearKoopmanModel> for ModelFile {
    fn from(m: &BilinearKoopmanModel) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            convention: MODEL_CONVENTION.into(),
            delta: m.delta(),
            basis: *m.basis(),
            observables: m.observables().clone(),
            operators: m
                .operators()
                .iter()
                .map(|op| op.matrix.row_iter().map(|r| r.iter().copied().collect()).collect())
                .collect(),
            diagnostics: m.diagnostics().to_vec(),
        }
    }
}

impl TryFrom<ModelFile> for BilinearKoopmanModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.format != MODEL_FORMAT || f.convention != MODEL_CONVENTION {
            return Err(Error::invalid(format!(
                "unsupported model file (format `{}`, convention `{}`)",
                f.format, f.convention
            )));
        }
        let n = f.observables.len();
        let mut ops = Vec::with_capacity(f.operators.len());
        for (i, rows) in f.operators.iter().enumerate() {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::invalid(format!(
                    "operator {i} does not match the {n} observables of the model"
                )));
            }
            ops.push(DMatrix::from_fn(n, n, |r, c| rows[r][c]));
        }
        BilinearKoopmanModel::new(f.observables, f.basis, f.delta, ops, f.diagnostics)
    }
}

pub fn write_model(path: &Path, m: &BilinearKoopmanModel) -> Result<()> {
    write_json(path, &ModelFile::from(m))
}

pub fn read_model(path: &Path) -> Result<BilinearKoopmanModel> {
    read_json::<ModelFile>(path)?.try_into()
}

pub const SEGMENTS_HEADER: [&str; 8] = ["segment", "label", "step", "x1", "x2", "theta", "v", "omega"];

/// All states of all segments, one row each; the control columns are empty
/// on the last row of a segment.
pub fn segments_csv(segments: &[LabeledSegment]) -> Result<Vec<u8>> {
    let rows = segments.iter().enumerate().flat_map(|(i, seg)| {
        let t = &seg.trajectory;
        t.states().iter().enumerate().map(move |(k, s)| {
            let (v, w) = match t.controls().get(k) {
                Some(u) => (num(u.v), num(u.omega)),
                None => (String::new(), String::new()),
            };
            vec![i.to_string(), seg.label.to_string(), k.to_string(), num(s.x1), num(s.x2), num(s.theta), v, w]
        })
    });
    csv_bytes(&SEGMENTS_HEADER, rows)
}

pub const ERROR_SERIES_HEADER: [&str; 4] = ["t", "total_norm", "position_norm", "orientation_abs"];

pub fn error_series_csv(e: &ErrorSeries) -> Result<Vec<u8>> {
    let rows = e.times().enumerate().map(|(k, t)| {
        vec![num(t), num(e.total_norm[k]), num(e.position_norm[k]), num(e.orientation_abs[k])]
    });
    csv_bytes(&ERROR_SERIES_HEADER, rows)
}

pub fn write_error_series(path: &Path, e: &ErrorSeries) -> Result<()> {
    write_atomic(path, &error_series_csv(e)?)
}

pub const RUN_STATISTICS_HEADER: [&str; 5] = ["t", "e_max", "e_avg", "sigma", "run_count"];

/// Rows are labeled with times `(first_step + k) * dt`.
pub fn run_statistics_csv(s: &RunStatistics, dt: f64, first_step: usize) -> Result<Vec<u8>> {
    let rows = (0..s.e_avg.len()).map(|k| {
        vec![
            num((k + first_step) as f64 * dt),
            num(s.e_max[k]),
            num(s.e_avg[k]),
            num(s.sigma[k]),
            s.run_count.to_string(),
        ]
    });
    csv_bytes(&RUN_STATISTICS_HEADER, rows)
}

pub fn write_run_statistics(path: &Path, s: &RunStatistics, dt: f64, first_step: usize) -> Result<()> {
    write_atomic(path, &run_statistics_csv(s, dt, first_step)?)
}
