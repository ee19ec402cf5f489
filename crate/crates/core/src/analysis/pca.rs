use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Leading principal axes of a point cloud.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    /// `k` orthonormal rows of length `h`, by decreasing variance. The
    /// largest-magnitude coordinate of each row is positive.
    pub components: Vec<Vec<f64>>,
    /// Variance along each component over the total variance.
    pub explained_variance_ratio: Vec<f64>,
    pub mean: Vec<f64>,
}

pub fn tensor_rows(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows())
        .map(|r| t.row(r).iter().map(|&v| v as f64).collect())
        .collect()
}

/// Eigendecomposition of the sample covariance of `rows`.
pub fn pca(rows: &[Vec<f64>], k: usize) -> Result<PcaResult> {
    let n = rows.len();
    let h = rows.first().map_or(0, Vec::len);
    if k == 0 || k >= n || k > h {
        return Err(Error::Contract(format!(
            "pca needs 1 <= k < n and k <= dim, got k={k}, n={n}, dim={h}"
        )));
    }
    if rows.iter().any(|r| r.len() != h) {
        return Err(Error::Shape {
            op: "pca",
            left: vec![n, h],
            right: rows.iter().map(Vec::len).collect(),
        });
    }
    let mean: Vec<f64> = (0..h)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let centered = DMatrix::from_fn(n, h, |i, j| rows[i][j] - mean[j]);
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..h).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let mut components = Vec::with_capacity(k);
    let mut ratios = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let lead = v
            .iter()
            .copied()
            .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        ratios.push(if total > 0.0 {
            eig.eigenvalues[i].max(0.0) / total
        } else {
            0.0
        });
    }
    Ok(PcaResult {
        components,
        explained_variance_ratio: ratios,
        mean,
    })
}

impl PcaResult {
    /// Coordinates of `rows` along each component.
    pub fn project(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                self.components
                    .iter()
                    .map(|c| c.iter().zip(r).zip(&self.mean).map(|((a, x), m)| a * (x - m)).sum())
                    .collect()
            })
            .collect()
    }

    /// Centered points rebuilt from their projections.
    pub fn reconstruct(&self, projections: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let h = self.mean.len();
        projections
            .iter()
            .map(|p| {
                (0..h)
                    .map(|j| p.iter().zip(&self.components).map(|(s, c)| s * c[j]).sum())
                    .collect()
            })
            .collect()
    }
}
