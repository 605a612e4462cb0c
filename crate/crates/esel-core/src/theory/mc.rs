//! Monte Carlo verification harness for fixed demonstration configurations.
//!
//! Freezes a pair of supports and a query, then estimates the expected
//! prediction loss by resampling `theta ~ U[0,1]^d` per trial. This is the
//! independent check for every closed-form expression in
//! [`crate::theory::closed_form`].

use rayon::prelude::*;

use crate::rng::{mix, rng_from};
use crate::theory::binary::{BinaryExample, TaskVector};
use crate::theory::minnorm::{prediction_loss, MinNormModel};
use crate::{Error, Real, Result};

/// Mean and empirical standard error of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: Real,
    pub std_error: Real,
    pub trials: usize,
}

impl McEstimate {
    /// Distance from `reference` in units of the standard error.
    pub fn z_score(&self, reference: Real) -> Real {
        (self.mean - reference) / self.std_error
    }

    /// Whether `reference` lies within `k` standard errors of the mean.
    pub fn within_std_errors(&self, reference: Real, k: Real) -> bool {
        (self.mean - reference).abs() <= k * self.std_error
    }
}

/// Neumaier-compensated sum, so aggregation does not depend on how trials
/// were scheduled (the input order is fixed by trial index).
pub(crate) fn compensated_sum(values: &[Real]) -> Real {
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

pub(crate) fn mean_and_se(values: &[Real]) -> (Real, Real) {
    let n = values.len();
    let mean = compensated_sum(values) / n as Real;
    if n < 2 {
        return (mean, 0.0);
    }
    let squares: Vec<Real> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let variance = compensated_sum(&squares) / (n - 1) as Real;
    (mean, (variance / n as Real).sqrt())
}

/// Estimate the expected prediction loss of the configuration `(T1, T2, e_q)`
/// under fresh `theta ~ U[0,1]^d` per trial.
///
/// Deterministic given `seed` at any parallelism level: trial `t` draws from
/// a generator seeded by `mix(seed, t)`.
pub fn run_fixed_config_mc(
    t1: &BinaryExample,
    t2: &BinaryExample,
    e_q: &BinaryExample,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    if trials < 1000 {
        return Err(Error::config(format!(
            "at least 1000 trials required for a usable standard error, got {trials}"
        )));
    }
    let d = t1.dim();
    if t2.dim() != d || e_q.dim() != d {
        return Err(Error::contract("supports must share one dimension"));
    }
    let model = MinNormModel::new(&[t1.embedding(), t2.embedding()])?;
    let query = e_q.embedding();
    let losses: Vec<Real> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from(mix(seed, t as u64));
            let theta = TaskVector::sample(d, &mut rng);
            let y_pred = model.predict(theta.as_slice(), &query);
            prediction_loss(y_pred, theta.as_slice(), &query)
        })
        .collect();
    let (mean, std_error) = mean_and_se(&losses);
    Ok(McEstimate {
        mean,
        std_error,
        trials,
    })
}
