use rand::Rng as _;

use crate::error::Result;
use crate::numerics::{ParamStore, Tape, Tensor, Var};
use crate::rng::Rng;

/// Glorot-uniform `fan_in × fan_out` matrix.
pub(crate) fn glorot(rng: &mut Rng, fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt() as f32;
    let data = (0..fan_in * fan_out).map(|_| rng.gen_range(-limit..=limit)).collect();
    Tensor::new(vec![fan_in, fan_out], data).expect("glorot shape")
}

/// `x·W + b`, with `W` and `b` held in a [`ParamStore`] at the stored
/// positions.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Linear {
    weight: usize,
    bias: usize,
}

impl Linear {
    pub(crate) fn new(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        let weight = store.push(format!("{name}.weight"), glorot(rng, in_dim, out_dim));
        let bias = store.push(format!("{name}.bias"), Tensor::zeros(&[out_dim]));
        Self { weight, bias }
    }

    pub(crate) fn apply(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        let y = tape.matmul(x, vars[self.weight])?;
        tape.add_row(y, vars[self.bias])
    }
}

/// Stack of linear layers with ReLU between them (none after the last).
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Mlp {
    layers: Vec<Linear>,
}

impl Mlp {
    pub(crate) fn new(store: &mut ParamStore, prefix: &str, dims: &[usize], rng: &mut Rng) -> Self {
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{prefix}.{i}"), w[0], w[1], rng))
            .collect();
        Self { layers }
    }

    pub(crate) fn apply(&self, tape: &mut Tape, vars: &[Var], mut x: Var) -> Result<Var> {
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                x = tape.relu(x);
            }
            x = layer.apply(tape, vars, x)?;
        }
        Ok(x)
    }
}
