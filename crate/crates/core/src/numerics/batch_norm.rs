use crate::error::{Error, Result};

/// Whether batch normalization uses batch or running statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormMode {
    Training,
    Inference,
}

/// Per-channel moments observed on one training batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchMoments {
    pub mean: Vec<f32>,
    /// Biased (population) variance.
    pub var: Vec<f32>,
    pub count: usize,
}

/// Running statistics of a batch-normalization layer.
///
/// The affine parameters (gamma, beta) are ordinary model parameters and live
/// with the rest of the parameter set; only the non-learned buffers are here.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormStats {
    running_mean: Vec<f32>,
    running_var: Vec<f32>,
    momentum: f32,
    eps: f32,
}

impl BatchNormStats {
    pub const DEFAULT_MOMENTUM: f32 = 0.1;
    pub const DEFAULT_EPS: f32 = 1e-5;

    pub fn new(channels: usize) -> Self {
        Self {
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: Self::DEFAULT_MOMENTUM,
            eps: Self::DEFAULT_EPS,
        }
    }

    pub fn with_momentum(mut self, momentum: f32) -> Result<Self> {
        if !(momentum > 0.0 && momentum < 1.0) {
            return Err(Error::Config(vec![format!(
                "batch-norm momentum must be in (0,1), got {momentum}"
            )]));
        }
        self.momentum = momentum;
        Ok(self)
    }

    pub fn from_buffers(running_mean: Vec<f32>, running_var: Vec<f32>) -> Result<Self> {
        if running_mean.len() != running_var.len() {
            return Err(Error::shape(
                "batch_norm_stats",
                &[running_mean.len()],
                &[running_var.len()],
            ));
        }
        if running_var.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Domain {
                op: "batch_norm_stats",
                message: "running variance must be non-negative".into(),
            });
        }
        Ok(Self {
            running_mean,
            running_var,
            momentum: Self::DEFAULT_MOMENTUM,
            eps: Self::DEFAULT_EPS,
        })
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }

    pub fn eps(&self) -> f32 {
        self.eps
    }

    pub fn momentum(&self) -> f32 {
        self.momentum
    }

    pub fn running_mean(&self) -> &[f32] {
        &self.running_mean
    }

    pub fn running_var(&self) -> &[f32] {
        &self.running_var
    }

    /// Folds batch moments into the running statistics. The running variance
    /// tracks the unbiased batch variance.
    pub fn update(&mut self, moments: &BatchMoments) {
        let m = self.momentum;
        let correction = if moments.count > 1 {
            moments.count as f32 / (moments.count - 1) as f32
        } else {
            1.0
        };
        for (r, &b) in self.running_mean.iter_mut().zip(&moments.mean) {
            *r = (1.0 - m) * *r + m * b;
        }
        for (r, &b) in self.running_var.iter_mut().zip(&moments.var) {
            *r = ((1.0 - m) * *r + m * b * correction).max(0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Tape, Tensor};

    fn run(x: Tensor, gamma: Vec<f32>, beta: Vec<f32>, stats: &BatchNormStats, mode: NormMode) -> Tensor {
        let mut tape = Tape::new();
        let x = tape.constant(x);
        let g = tape.constant(Tensor::vector(gamma));
        let b = tape.constant(Tensor::vector(beta));
        let (y, _) = tape.batch_norm(x, g, b, stats, mode).unwrap();
        tape.value(y).clone()
    }

    #[test]
    fn identical_rows_map_to_beta() {
        let x = Tensor::from_rows(&[vec![2.0, -1.0], vec![2.0, -1.0], vec![2.0, -1.0]]).unwrap();
        let stats = BatchNormStats::new(2);
        let y = run(x, vec![1.5, 0.5], vec![0.25, -3.0], &stats, NormMode::Training);
        for r in 0..3 {
            assert_eq!(y.row(r), &[0.25, -3.0]);
        }
    }

    #[test]
    fn identity_statistics_in_inference() {
        let x = Tensor::from_rows(&[vec![0.3, -1.2], vec![4.0, 0.0]]).unwrap();
        let stats = BatchNormStats::new(2);
        let y = run(x.clone(), vec![1.0, 1.0], vec![0.0, 0.0], &stats, NormMode::Inference);
        let scale = 1.0 / (1.0 + BatchNormStats::DEFAULT_EPS).sqrt();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b * scale).abs() < 1e-6);
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[4, 3]));
        let g = tape.constant(Tensor::ones(&[2]));
        let b = tape.constant(Tensor::zeros(&[2]));
        let err = tape
            .batch_norm(x, g, b, &BatchNormStats::new(2), NormMode::Training)
            .unwrap_err();
        assert_eq!(err.kind(), "shape");
    }

    #[test]
    fn running_statistics_follow_momentum() {
        let mut stats = BatchNormStats::new(1);
        let moments = BatchMoments {
            mean: vec![2.0],
            var: vec![3.0],
            count: 4,
        };
        stats.update(&moments);
        assert!((stats.running_mean()[0] - 0.2).abs() < 1e-6);
        // 0.9 * 1 + 0.1 * 3 * 4/3
        assert!((stats.running_var()[0] - 1.3).abs() < 1e-6);
        assert!(BatchNormStats::new(1).with_momentum(1.5).is_err());
    }
}
