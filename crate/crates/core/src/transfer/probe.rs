use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::rng::seeded;

use super::metrics::{auroc, rmse};

pub const RIDGE_ALPHA: f64 = 1e-3;
pub const PROBE_TRAIN_FRACTION: f64 = 0.8;
const LOGISTIC_STEPS: usize = 500;
const LOGISTIC_LR: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeTask {
    Regression,
    Binary,
}

/// Affine model `x·w + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>() + self.bias
    }
}

fn matrix(rows: &[&[f64]]) -> DMatrix<f64> {
    let cols = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

/// Minimizes `‖y − Xw − b‖² + α‖w‖²`, the intercept unpenalized.
pub fn ridge_fit(x: &[&[f64]], y: &[f64], alpha: f64) -> Result<LinearModel> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::shape("ridge_fit", &[x.len()], &[y.len()]));
    }
    let n = x.len() as f64;
    let mut xm = matrix(x);
    let x_mean: Vec<f64> = xm.column_iter().map(|c| c.sum() / n).collect();
    let y_mean = y.iter().sum::<f64>() / n;
    for (j, mut col) in xm.column_iter_mut().enumerate() {
        col.add_scalar_mut(-x_mean[j]);
    }
    let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - y_mean));
    let d = xm.ncols();
    let gram = xm.transpose() * &xm + DMatrix::identity(d, d) * alpha;
    let rhs = xm.transpose() * yc;
    let w = gram
        .cholesky()
        .ok_or_else(|| Error::Degenerate("ridge normal equations are not positive definite".into()))?
        .solve(&rhs);
    let weights: Vec<f64> = w.iter().copied().collect();
    let bias = y_mean - weights.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    Ok(LinearModel { weights, bias })
}

/// Logistic regression by full-batch gradient descent on standardized
/// inputs; weights are returned in the original input scale.
pub fn logistic_fit(x: &[&[f64]], y: &[bool]) -> Result<LinearModel> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::shape("logistic_fit", &[x.len()], &[y.len()]));
    }
    let n = x.len() as f64;
    let d = x[0].len();
    let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let scale: Vec<f64> = (0..d)
        .map(|j| {
            let v = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
            if v > 0.0 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let z: Vec<Vec<f64>> = x
        .iter()
        .map(|r| (0..d).map(|j| (r[j] - mean[j]) / scale[j]).collect())
        .collect();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for _ in 0..LOGISTIC_STEPS {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for (row, &label) in z.iter().zip(y) {
            let s = row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() + b;
            let err = 1.0 / (1.0 + (-s).exp()) - f64::from(u8::from(label));
            for (g, a) in gw.iter_mut().zip(row) {
                *g += err * a;
            }
            gb += err;
        }
        for (wj, g) in w.iter_mut().zip(&gw) {
            *wj -= LOGISTIC_LR * g / n;
        }
        b -= LOGISTIC_LR * gb / n;
    }
    let weights: Vec<f64> = (0..d).map(|j| w[j] / scale[j]).collect();
    let bias = b - (0..d).map(|j| weights[j] * mean[j]).sum::<f64>();
    Ok(LinearModel { weights, bias })
}

/// Fits a linear model on a shuffled 80% of frozen embeddings and scores the
/// rest: RMSE for regression (ridge), AUROC for binary targets (logistic).
pub fn linear_probe(embeddings: &Tensor, targets: &[f64], task: ProbeTask, seed: u64) -> Result<f64> {
    let n = embeddings.rows();
    if targets.len() != n {
        return Err(Error::shape("linear_probe", &[n], &[targets.len()]));
    }
    if targets.iter().all(|&t| t == targets[0]) {
        return Err(Error::Degenerate("probe targets are constant".into()));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|r| embeddings.row(r).iter().map(|&v| v as f64).collect())
        .collect();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded(seed));
    let cut = (n as f64 * PROBE_TRAIN_FRACTION).round() as usize;
    if cut == 0 || cut >= n {
        return Err(Error::Contract(format!("{n} embeddings are too few for a probe split")));
    }
    let (train, test) = idx.split_at(cut);
    let xs = |ids: &[usize]| ids.iter().map(|&i| rows[i].as_slice()).collect::<Vec<_>>();
    let ys = |ids: &[usize]| ids.iter().map(|&i| targets[i]).collect::<Vec<_>>();
    match task {
        ProbeTask::Regression => {
            let model = ridge_fit(&xs(train), &ys(train), RIDGE_ALPHA)?;
            let pred: Vec<f64> = test.iter().map(|&i| model.predict(&rows[i])).collect();
            rmse(&pred, &ys(test))
        }
        ProbeTask::Binary => {
            let labels = |ids: &[usize]| ids.iter().map(|&i| targets[i] > 0.5).collect::<Vec<_>>();
            let train_labels = labels(train);
            if train_labels.iter().all(|&l| l == train_labels[0]) {
                return Err(Error::Degenerate("probe training split has one class".into()));
            }
            let model = logistic_fit(&xs(train), &train_labels)?;
            let scores: Vec<f64> = test.iter().map(|&i| model.predict(&rows[i])).collect();
            auroc(&scores, &labels(test))
        }
    }
}
