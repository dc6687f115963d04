//! Rank-revealing least squares with optional Tikhonov regularization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Gram condition numbers above this are logged as warnings.
pub const GRAM_WARN_CONDITION: f64 = 1e12;

/// Factorized regressor `A` (m x n) for `min ||A X - B||_F^2 + ridge ||X||_F^2`.
///
/// The problem is solved as the augmented system `[A; sqrt(ridge) I] X = [B; 0]`
/// through a Householder QR followed by an SVD of the triangular factor. This
/// is the solution of the regularized normal equations
/// `(A^T A + ridge I) X = A^T B` without squaring the condition number; with
/// `ridge = 0` and a rank-deficient `A` the minimum-norm solution is returned.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    rows: usize,
    cols: usize,
    q: DMatrix<f64>,
    u: DMatrix<f64>,
    singular: DVector<f64>,
    v_t: DMatrix<f64>,
    rank: usize,
}

impl LeastSquares {
    pub fn new(a: &DMatrix<f64>, ridge: f64) -> Result<Self> {
        if !(ridge >= 0.0 && ridge.is_finite()) {
            return Err(Error::invalid(format!("ridge must be a finite nonnegative number, got {ridge}")));
        }
        let (rows, cols) = a.shape();
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!("empty regressor ({rows} x {cols})")));
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("regressor contains non-finite entries"));
        }
        let augmented = if ridge > 0.0 {
            let mut m = DMatrix::zeros(rows + cols, cols);
            m.rows_mut(0, rows).copy_from(a);
            m.rows_mut(rows, cols).fill_diagonal(ridge.sqrt());
            m
        } else {
            a.clone()
        };
        let qr = augmented.qr();
        let q = qr.q();
        let r = qr.r();
        let svd = r.svd(true, true);
        let u = svd.u.expect("requested U");
        let v_t = svd.v_t.expect("requested V^T");
        let singular = svd.singular_values;
        let smax = singular.max();
        let rank = singular.iter().filter(|&&s| s > RANK_TOL * smax).count();
        Ok(Self {
            rows,
            cols,
            q,
            u,
            singular,
            v_t,
            rank,
        })
    }

    /// Numerical rank of the (augmented) regressor.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Condition number of the Gram matrix `A^T A + ridge I`.
    pub fn gram_condition(&self) -> f64 {
        if self.singular.len() < self.cols {
            return f64::INFINITY;
        }
        let smax = self.singular.max();
        let smin = self.singular.min();
        if smin == 0.0 {
            f64::INFINITY
        } else {
            (smax / smin).powi(2)
        }
    }

    /// Solves for every column of `b` (m x p); returns n x p.
    pub fn solve(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.nrows() != self.rows {
            return Err(Error::invalid(format!(
                "right-hand side has {} rows, regressor has {}",
                b.nrows(),
                self.rows
            )));
        }
        if b.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("right-hand side contains non-finite entries"));
        }
        // zero rows of the augmented right-hand side contribute nothing
        let c = self.q.rows(0, self.rows).tr_mul(b);
        let mut y = self.u.tr_mul(&c);
        let smax = self.singular.max();
        for (i, &s) in self.singular.iter().enumerate() {
            let scale = if s > RANK_TOL * smax { 1.0 / s } else { 0.0 };
            y.row_mut(i).scale_mut(scale);
        }
        Ok(self.v_t.tr_mul(&y))
    }
}
