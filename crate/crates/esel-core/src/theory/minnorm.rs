//! Min-norm linear-regression prediction.
//!
//! Given selected demonstration embeddings stacked as a data matrix `E`
//! (one row per demo), the model predicts `<e_q, P theta>` where `P` is the
//! orthogonal projector onto the row space of `E` — the prediction of the
//! minimum-norm interpolating solution. The projector is computed
//! rank-robustly from an SVD: singular values below `1e-10 * sigma_max` are
//! treated as zero, so duplicate or linearly dependent rows are harmless.

use nalgebra::DMatrix;

use crate::{Error, Real, Result};

const RANK_TOLERANCE: Real = 1e-10;

/// Orthonormal basis of the row space of a data matrix, reusable across many
/// `(theta, e_q)` evaluations.
#[derive(Debug, Clone)]
pub struct MinNormModel {
    basis: Vec<Vec<Real>>,
    dim: usize,
}

impl MinNormModel {
    /// Build from demonstration rows (each of length `d`).
    pub fn new(rows: &[Vec<Real>]) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::contract("min-norm model needs at least one row"));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::contract("rows must share one dimension"));
        }
        let matrix = DMatrix::from_fn(k, d, |i, j| rows[i][j]);
        let svd = matrix.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let sigma_max = svd.singular_values.iter().cloned().fold(0.0, Real::max);
        let mut basis = Vec::new();
        for (i, &s) in svd.singular_values.iter().enumerate() {
            if s > RANK_TOLERANCE * sigma_max {
                basis.push(v_t.row(i).iter().cloned().collect());
            }
        }
        Ok(MinNormModel { basis, dim: d })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Rank of the data matrix (number of kept basis vectors).
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Orthogonal projection of `v` onto the row space.
    pub fn project(&self, v: &[Real]) -> Vec<Real> {
        let mut out = vec![0.0; self.dim];
        for b in &self.basis {
            let c: Real = b.iter().zip(v).map(|(x, y)| x * y).sum();
            for (o, &x) in out.iter_mut().zip(b) {
                *o += c * x;
            }
        }
        out
    }

    /// `<e_q, P theta>`.
    pub fn predict(&self, theta: &[Real], e_q: &[Real]) -> Real {
        self.basis
            .iter()
            .map(|b| {
                let cq: Real = b.iter().zip(e_q).map(|(x, y)| x * y).sum();
                let ct: Real = b.iter().zip(theta).map(|(x, y)| x * y).sum();
                cq * ct
            })
            .sum()
    }
}

/// One-shot form of [`MinNormModel::predict`].
pub fn min_norm_predict(rows: &[Vec<Real>], theta: &[Real], e_q: &[Real]) -> Result<Real> {
    Ok(MinNormModel::new(rows)?.predict(theta, e_q))
}

/// Squared prediction error `(y_pred - <theta, e_q>)^2`.
pub fn prediction_loss(y_pred: Real, theta: &[Real], e_q: &[Real]) -> Real {
    let gold: Real = theta.iter().zip(e_q).map(|(t, q)| t * q).sum();
    (y_pred - gold) * (y_pred - gold)
}
