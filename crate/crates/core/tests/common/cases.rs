//! Randomized models and batches shared by the gradient checks.

use rand::Rng as _;
use topo_core::encoder::{EncoderConfig, InputKind, Model, OutputKind, Readout, Trainable};
use topo_core::graphs::{batch_graphs, er_with, Graph, GraphBatch};
use topo_core::numerics::{NormMode, Tape, Tensor};
use topo_core::rng::{seeded, Rng};

use super::gin_oracle::Layout;
use super::gradcheck;

pub fn random_tensor(rng: &mut Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::new(
        vec![rows, cols],
        (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

pub fn with_features(g: Graph, rng: &mut Rng, node_dim: usize, edge_dim: Option<usize>) -> Graph {
    let n = g.node_count();
    let m = g.edge_count();
    let g = g.with_node_feats(random_tensor(rng, n, node_dim)).unwrap();
    match edge_dim {
        Some(d) => g.with_edge_feats(random_tensor(rng, m, d)).unwrap(),
        None => g,
    }
}

/// Redraws every parameter so checks run at generic points: zero-initialized
/// biases can put ReLU inputs exactly on the kink.
pub fn randomize(params: Vec<&mut Tensor>, rng: &mut Rng) {
    for t in params {
        t.data_mut().iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
    }
}

/// One randomized model and batch for gradient checking.
pub struct Case {
    pub model: Model,
    pub batch: GraphBatch,
    pub weights: Option<Vec<f32>>,
    pub coeffs: Tensor,
}

pub fn random_case(seed: u64) -> Case {
    let mut rng = seeded(seed);
    let config = EncoderConfig {
        num_layers: rng.gen_range(1..=3),
        hidden_dim: rng.gen_range(2..=16),
        projection_dim: rng.gen_range(1..=6),
        readout: if rng.gen_bool(0.5) { Readout::Mean } else { Readout::Sum },
        batch_norm: rng.gen_bool(0.7),
        epsilon_learnable: rng.gen_bool(0.7),
    };
    let input = match rng.gen_range(0..3) {
        0 => InputKind::Constant,
        1 => InputKind::FeatureMlp {
            node_dim: 3,
            edge_dim: None,
        },
        _ => InputKind::FeatureMlp {
            node_dim: 3,
            edge_dim: Some(2),
        },
    };
    let output = if rng.gen_bool(0.5) {
        OutputKind::Projection {
            dim: config.projection_dim,
        }
    } else {
        OutputKind::GraphTask
    };
    let mut model = Model::new(&config, input.clone(), output, rng.gen()).unwrap();
    randomize(model.params_mut(Trainable::ALL), &mut rng);
    let graphs: Vec<Graph> = (0..3)
        .map(|_| {
            let n = rng.gen_range(3..=7);
            let g = er_with(&mut rng, n, 0.5);
            match &input {
                InputKind::Constant => g,
                InputKind::FeatureMlp { edge_dim, .. } => with_features(g, &mut rng, 3, *edge_dim),
            }
        })
        .collect();
    let batch = batch_graphs(&graphs).unwrap();
    let weights = rng
        .gen_bool(0.5)
        .then(|| (0..batch.total_edges()).map(|_| rng.gen_range(0.1..1.0)).collect());
    let out_dim = match model.output_head().kind() {
        OutputKind::Projection { dim } => *dim,
        _ => 1,
    };
    let coeffs = random_tensor(&mut rng, 3, out_dim);
    Case {
        model,
        batch,
        weights,
        coeffs,
    }
}

/// Max relative gradient error over every parameter (and the edge weights
/// when present) for one case.
pub fn gradient_error(case: &Case) -> gradcheck::GradReport {
    let mut tape = Tape::new();
    let bound = case.model.bind(&mut tape, Trainable::ALL);
    let w = case.weights.as_ref().map(|w| tape.param(Tensor::vector(w.clone())));
    let out = case
        .model
        .forward(&mut tape, &bound, &case.batch, w, NormMode::Training)
        .unwrap();
    let c = tape.constant(case.coeffs.clone());
    let prod = tape.mul(out.output.unwrap(), c).unwrap();
    let loss = tape.sum(prod);
    let grads = tape.backward(loss).unwrap();
    let mut analytic = case.model.grads(&bound, &grads);
    let mut params: Vec<Tensor> = case.model.param_tensors(Trainable::ALL).into_iter().cloned().collect();
    if let Some(w) = w {
        analytic.push(grads.get(w).unwrap().clone());
        params.push(tape.value(w).clone());
    }
    let layout = Layout::of_model(&case.model);
    let coeffs: Vec<f64> = case.coeffs.data().iter().map(|&x| x as f64).collect();
    let n_model = case.model.param_tensors(Trainable::ALL).len();
    gradcheck::check(&params, &analytic, |p| {
        let weights = (p.len() > n_model).then(|| p[n_model].as_slice());
        let g = layout.graphs(&p[..n_model], &case.batch, weights);
        g.d.iter().zip(&coeffs).map(|(a, b)| a * b).sum()
    })
}
