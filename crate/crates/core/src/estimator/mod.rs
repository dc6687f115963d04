//! Least-squares eDMD estimators: Koopman operators per constant input,
//! the Koopman generator, linear eDMDc, and the bilinear combination.
//!
//! All operators act on lifted column vectors: `z+ = K z` for operators and
//! `dz/dt = L z` for the generator.

mod lstsq;

pub use lstsq::{LeastSquares, GRAM_WARN_CONDITION, RANK_TOL};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::{Dictionary, ObservableSet};
use crate::error::{Error, Result};
use crate::types::{wrap_angle, Control, ControlBasis, State};

/// Conditioning report of one least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// `None` when the Gram matrix is singular.
    pub gram_condition: Option<f64>,
    pub rank: usize,
    pub samples: usize,
}

impl FitDiagnostics {
    fn from_solver(ls: &LeastSquares, samples: usize, what: &str) -> Self {
        let cond = ls.gram_condition();
        if cond > GRAM_WARN_CONDITION {
            log::warn!(
                "{what}: Gram matrix condition number {cond:.3e} exceeds {GRAM_WARN_CONDITION:e} \
                 (rank {} of {}, {samples} samples)",
                ls.rank(),
                ls.cols()
            );
        } else {
            log::debug!("{what}: Gram condition {cond:.3e}, rank {}", ls.rank());
        }
        Self {
            gram_condition: cond.is_finite().then_some(cond),
            rank: ls.rank(),
            samples,
        }
    }
}

/// Result of [`fit_operator`].
#[derive(Debug, Clone)]
pub struct OperatorFit {
    pub matrix: DMatrix<f64>,
    pub diagnostics: FitDiagnostics,
}

fn check_data(psi_x: &DMatrix<f64>, psi_y: &DMatrix<f64>) -> Result<()> {
    if psi_x.shape() != psi_y.shape() {
        return Err(Error::invalid(format!(
            "snapshot matrices differ in shape: {:?} vs {:?}",
            psi_x.shape(),
            psi_y.shape()
        )));
    }
    if psi_x.ncols() == 0 {
        return Err(Error::invalid("at least one snapshot pair is required"));
    }
    if psi_x.iter().chain(psi_y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("snapshot data contains non-finite entries"));
    }
    Ok(())
}

/// Least-squares operator `K` (N x N) with `K psi_x ~ psi_y`.
///
/// Minimizes `||K psi_x - psi_y||_F^2 + ridge ||K||_F^2` for `N x d` data.
pub fn fit_operator(psi_x: &DMatrix<f64>, psi_y: &DMatrix<f64>, ridge: f64) -> Result<OperatorFit> {
    check_data(psi_x, psi_y)?;
    let ls = LeastSquares::new(&psi_x.transpose(), ridge)?;
    solve_operator(&ls, psi_y, "operator fit")
}

fn solve_operator(ls: &LeastSquares, psi_y: &DMatrix<f64>, what: &str) -> Result<OperatorFit> {
    let k_t = ls.solve(&psi_y.transpose())?;
    Ok(OperatorFit {
        matrix: k_t.transpose(),
        diagnostics: FitDiagnostics::from_solver(ls, psi_y.ncols(), what),
    })
}

/// State/successor pairs per training input.
///
/// Index 0 holds zero-input pairs, index `i >= 1` pairs under basis vector `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    delta: f64,
    basis: ControlBasis,
    x: Vec<Vec<State>>,
    y: Vec<Vec<State>>,
}

impl SnapshotSet {
    pub fn new(delta: f64, basis: ControlBasis, x: Vec<Vec<State>>, y: Vec<Vec<State>>) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::invalid(format!("snapshot delta must be positive, got {delta}")));
        }
        let expected = basis.len() + 1;
        if x.len() != expected || y.len() != expected {
            return Err(Error::invalid(format!(
                "expected {expected} snapshot blocks, got {} states and {} successors",
                x.len(),
                y.len()
            )));
        }
        for (i, (xi, yi)) in x.iter().zip(&y).enumerate() {
            if xi.len() != yi.len() {
                return Err(Error::invalid(format!(
                    "block {i}: {} states but {} successors",
                    xi.len(),
                    yi.len()
                )));
            }
            if xi.is_empty() {
                return Err(Error::InsufficientData(format!("block {i} has no snapshot pairs")));
            }
        }
        Ok(Self { delta, basis, x, y })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn basis(&self) -> &ControlBasis {
        &self.basis
    }

    pub fn states(&self, i: usize) -> &[State] {
        &self.x[i]
    }

    pub fn successors(&self, i: usize) -> &[State] {
        &self.y[i]
    }

    /// Number of blocks, `n_u + 1`.
    pub fn blocks(&self) -> usize {
        self.x.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.x.iter().map(Vec::len).collect()
    }

    /// Input that generated block `i`.
    pub fn input(&self, i: usize) -> Control {
        self.basis.input(i)
    }

    /// Shifts every state's orientation into `(-pi, pi]` and its successor by
    /// the same multiple of 2pi.
    pub fn with_wrapped_angles(&self) -> Self {
        let mut out = self.clone();
        for (xs, ys) in out.x.iter_mut().zip(out.y.iter_mut()) {
            for (x, y) in xs.iter_mut().zip(ys.iter_mut()) {
                if let Ok(w) = wrap_angle(x.theta) {
                    x.theta = w.wrapped;
                    y.theta -= w.shift as f64 * std::f64::consts::TAU;
                }
            }
        }
        out
    }

    /// Repeats every pair `times` times.
    pub fn duplicated(&self, times: usize) -> Self {
        let rep = |v: &Vec<Vec<State>>| {
            v.iter()
                .map(|b| b.iter().cycle().take(b.len() * times).copied().collect())
                .collect()
        };
        Self {
            delta: self.delta,
            basis: self.basis,
            x: rep(&self.x),
            y: rep(&self.y),
        }
    }
}

/// Lifted operator learned for one constant input.
#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanOperator {
    pub matrix: DMatrix<f64>,
    pub delta: f64,
}

/// Input-affine surrogate `K_u = (1 - sum g_i) K_0 + sum g_i K_i`, where
/// `g` solves `sum g_i u_i = u` in the control basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearKoopmanModel {
    obs: ObservableSet,
    basis: ControlBasis,
    delta: f64,
    operators: Vec<KoopmanOperator>,
    diagnostics: Vec<FitDiagnostics>,
}

impl BilinearKoopmanModel {
    /// `operators[0]` is the zero-input operator, `operators[i]` the one for
    /// basis vector `i`.
    pub fn new(
        obs: ObservableSet,
        basis: ControlBasis,
        delta: f64,
        operators: Vec<DMatrix<f64>>,
        diagnostics: Vec<FitDiagnostics>,
    ) -> Result<Self> {
        if operators.len() != basis.len() + 1 {
            return Err(Error::invalid(format!(
                "expected {} operators, got {}",
                basis.len() + 1,
                operators.len()
            )));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::invalid(format!("model delta must be positive, got {delta}")));
        }
        let n = obs.len();
        for (i, k) in operators.iter().enumerate() {
            if k.shape() != (n, n) {
                return Err(Error::invalid(format!(
                    "operator {i} has shape {:?}, observable set needs {n} x {n}",
                    k.shape()
                )));
            }
            if k.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("operator {i} has non-finite entries")));
            }
        }
        Ok(Self {
            obs,
            basis,
            delta,
            operators: operators
                .into_iter()
                .map(|matrix| KoopmanOperator { matrix, delta })
                .collect(),
            diagnostics,
        })
    }

    pub fn observables(&self) -> &ObservableSet {
        &self.obs
    }

    pub fn basis(&self) -> &ControlBasis {
        &self.basis
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn operators(&self) -> &[KoopmanOperator] {
        &self.operators
    }

    pub fn operator(&self, i: usize) -> &DMatrix<f64> {
        &self.operators[i].matrix
    }

    pub fn diagnostics(&self) -> &[FitDiagnostics] {
        &self.diagnostics
    }

    fn weights(&self, u: &Control) -> [f64; 3] {
        let [g1, g2] = self.basis.coefficients(u);
        [1.0 - g1 - g2, g1, g2]
    }

    /// The operator for input `u`.
    pub fn combine(&self, u: &Control) -> DMatrix<f64> {
        let w = self.weights(u);
        let mut k = &self.operators[0].matrix * w[0];
        for (op, &wi) in self.operators.iter().zip(&w).skip(1) {
            k += &op.matrix * wi;
        }
        k
    }

    /// `combine(u) * z` evaluated with matrix-vector products only.
    pub fn apply(&self, u: &Control, z: &DVector<f64>) -> DVector<f64> {
        let w = self.weights(u);
        let mut out = (&self.operators[0].matrix * z) * w[0];
        for (op, &wi) in self.operators.iter().zip(&w).skip(1) {
            out += (&op.matrix * z) * wi;
        }
        out
    }
}

/// Fits one operator per snapshot block.
///
/// Orientations are wrapped into `(-pi, pi]` first (successors shifted
/// alongside). Blocks with identical states share one factorization; the
/// fits run in parallel and are deterministic.
pub fn fit_snapshot_operators(
    data: &SnapshotSet,
    obs: &ObservableSet,
    ridge: f64,
) -> Result<BilinearKoopmanModel> {
    let data = data.with_wrapped_angles();
    let blocks = data.blocks();

    // share a factorization between blocks with the same states
    let mut owner: Vec<usize> = (0..blocks).collect();
    for i in 1..blocks {
        if let Some(j) = (0..i).find(|&j| owner[j] == j && data.x[j] == data.x[i]) {
            owner[i] = j;
        }
    }
    let solvers: Vec<Option<LeastSquares>> = (0..blocks)
        .into_par_iter()
        .map(|i| {
            if owner[i] != i {
                return Ok(None);
            }
            let psi_x = obs.lift_states(&data.x[i]);
            LeastSquares::new(&psi_x.transpose(), ridge).map(Some)
        })
        .collect::<Result<_>>()?;

    let fits: Vec<OperatorFit> = (0..blocks)
        .into_par_iter()
        .map(|i| {
            let ls = solvers[owner[i]].as_ref().expect("owner has a solver");
            let psi_y = obs.lift_states(&data.y[i]);
            if psi_y.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("block {i}: non-finite successor data")));
            }
            solve_operator(ls, &psi_y, &format!("operator K{i}"))
        })
        .collect::<Result<_>>()?;

    let (matrices, diagnostics) = fits.into_iter().map(|f| (f.matrix, f.diagnostics)).unzip();
    BilinearKoopmanModel::new(obs.clone(), *data.basis(), data.delta(), matrices, diagnostics)
}

/// Koopman generator estimate with `dz/dt ~ L z`.
#[derive(Debug, Clone)]
pub struct GeneratorModel {
    pub matrix: DMatrix<f64>,
    pub diagnostics: FitDiagnostics,
}

impl GeneratorModel {
    /// `exp(t L)`, the operator the generator induces for time shift `t`.
    pub fn propagator(&self, t: f64) -> DMatrix<f64> {
        (&self.matrix * t).exp()
    }
}

/// Generator eDMD from states (`n_x x d`) and a vector field.
///
/// Builds `C = psi_x psi_x^T / d` and `A = psi_x dpsi^T / d`, where
/// `dpsi[j, i] = f(x_i) . grad psi_j(x_i)`, and solves `(C + ridge I) L^T = A`.
pub fn fit_generator<D, F>(states: &DMatrix<f64>, dict: &D, field: F, ridge: f64) -> Result<GeneratorModel>
where
    D: Dictionary + ?Sized,
    F: Fn(&[f64]) -> Vec<f64>,
{
    let nx = dict.state_dim();
    if states.nrows() != nx {
        return Err(Error::invalid(format!(
            "states have {} rows, dictionary expects {nx}",
            states.nrows()
        )));
    }
    let d = states.ncols();
    if d == 0 {
        return Err(Error::invalid("at least one sample is required"));
    }
    let n = dict.len();
    let psi_x = dict.lift_columns(states);
    let mut dpsi = DMatrix::zeros(n, d);
    let mut grad = vec![0.0; n * nx];
    for (i, col) in states.column_iter().enumerate() {
        let x: Vec<f64> = col.iter().copied().collect();
        let f = field(&x);
        if f.len() != nx {
            return Err(Error::invalid(format!("vector field returned {} components, expected {nx}", f.len())));
        }
        dict.gradient_into(&x, &mut grad);
        for j in 0..n {
            dpsi[(j, i)] = (0..nx).map(|k| grad[j * nx + k] * f[k]).sum();
        }
    }
    check_data(&psi_x, &dpsi)?;
    let norm = 1.0 / (d as f64).sqrt();
    let ls = LeastSquares::new(&(psi_x.transpose() * norm), ridge)?;
    let l_t = ls.solve(&(dpsi.transpose() * norm))?;
    Ok(GeneratorModel {
        matrix: l_t.transpose(),
        diagnostics: FitDiagnostics::from_solver(&ls, d, "generator fit"),
    })
}

/// Linear lifted model with additive input, `z+ = A z + B u`.
#[derive(Debug, Clone)]
pub struct EdmdcModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub obs: ObservableSet,
    pub delta: f64,
    pub diagnostics: FitDiagnostics,
}

impl EdmdcModel {
    /// One-step prediction with the same orientation wrap protocol as the
    /// bilinear surrogate.
    pub fn predict_step(&self, s: &State, u: &Control) -> State {
        let w = match wrap_angle(s.theta) {
            Ok(w) => w,
            Err(_) => return State::new(f64::NAN, f64::NAN, f64::NAN),
        };
        let z = self.obs.lift(&State::new(s.x1, s.x2, w.wrapped));
        let zu = DVector::from_column_slice(&[u.v, u.omega]);
        let next = &self.a * z + &self.b * zu;
        let p = self.obs.project(next.as_slice()).expect("lengths match");
        State::new(p.x1, p.x2, w.unshift(p.theta))
    }
}

/// eDMDc over the stacked regressor `[psi(x); u]`.
pub fn fit_edmdc(
    states: &[State],
    controls: &[Control],
    successors: &[State],
    obs: &ObservableSet,
    delta: f64,
    ridge: f64,
) -> Result<EdmdcModel> {
    if states.len() != controls.len() || states.len() != successors.len() {
        return Err(Error::invalid(format!(
            "column counts differ: {} states, {} controls, {} successors",
            states.len(),
            controls.len(),
            successors.len()
        )));
    }
    if states.is_empty() {
        return Err(Error::invalid("at least one sample is required"));
    }
    let (xs, ys): (Vec<State>, Vec<State>) = states
        .iter()
        .zip(successors)
        .map(|(x, y)| {
            let shift = wrap_angle(x.theta).map(|w| w.shift).unwrap_or(0) as f64 * std::f64::consts::TAU;
            (
                State::new(x.x1, x.x2, x.theta - shift),
                State::new(y.x1, y.x2, y.theta - shift),
            )
        })
        .unzip();
    let n = obs.len();
    let d = xs.len();
    let psi_x = obs.lift_states(&xs);
    let psi_y = obs.lift_states(&ys);
    let mut regressor = DMatrix::zeros(n + 2, d);
    regressor.rows_mut(0, n).copy_from(&psi_x);
    for (j, u) in controls.iter().enumerate() {
        regressor[(n, j)] = u.v;
        regressor[(n + 1, j)] = u.omega;
    }
    check_data(&regressor.rows(0, n).into_owned(), &psi_y)?;
    if controls.iter().any(|u| !u.is_finite()) {
        return Err(Error::invalid("controls contain non-finite entries"));
    }
    let fit = fit_operator_rect(&regressor, &psi_y, ridge)?;
    Ok(EdmdcModel {
        a: fit.matrix.columns(0, n).into_owned(),
        b: fit.matrix.columns(n, 2).into_owned(),
        obs: obs.clone(),
        delta,
        diagnostics: fit.diagnostics,
    })
}

fn fit_operator_rect(regressor: &DMatrix<f64>, target: &DMatrix<f64>, ridge: f64) -> Result<OperatorFit> {
    let ls = LeastSquares::new(&regressor.transpose(), ridge)?;
    solve_operator(&ls, target, "eDMDc fit")
}
