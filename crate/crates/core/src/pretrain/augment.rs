//! Random and learned augmentations.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graphs::{Graph, GraphBatch};
use crate::numerics::{Tape, Tensor, Var};
use crate::rng::Rng;

/// Keeps `u` away from 0 and 1 so the logistic noise stays finite.
pub const NOISE_GUARD: f64 = 1e-6;

fn check_probability(op: &'static str, p: f64) -> Result<()> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain {
            op,
            message: format!("drop probability must be in [0,1), got {p}"),
        })
    }
}

/// Removes each undirected edge independently with probability `p`.
pub fn random_edge_drop(g: &Graph, p: f64, rng: &mut Rng) -> Result<Graph> {
    check_probability("random_edge_drop", p)?;
    let keep: Vec<usize> = (0..g.edge_count()).filter(|_| !rng.gen_bool(p)).collect();
    Ok(g.with_edge_subset(&keep))
}

/// Removes each node independently with probability `p`, with incident
/// edges, renumbering the survivors in order. Redraws until at least one
/// node survives.
pub fn random_node_drop(g: &Graph, p: f64, rng: &mut Rng) -> Result<Graph> {
    check_probability("random_node_drop", p)?;
    loop {
        let keep: Vec<usize> = (0..g.node_count()).filter(|_| !rng.gen_bool(p)).collect();
        if !keep.is_empty() || g.node_count() == 0 {
            return g.induced_subgraph(&keep);
        }
    }
}

/// Logistic noise `log u − log(1−u)`, one draw per undirected edge written
/// to both of its directed slots.
pub fn logistic_noise(batch: &GraphBatch, rng: &mut Rng) -> Vec<f32> {
    let m = batch.total_edges();
    let mut noise = vec![0.0f32; m];
    for k in 0..m / 2 {
        let u: f64 = rng.gen_range(NOISE_GUARD..1.0 - NOISE_GUARD);
        let g = (u.ln() - (1.0 - u).ln()) as f32;
        noise[2 * k] = g;
        noise[2 * k + 1] = g;
    }
    noise
}

/// Relaxed Bernoulli keep-weights `σ((logit + noise)/t)` for given noise.
pub fn concrete_weights_with_noise(tape: &mut Tape, logits: Var, noise: &[f32], t: f32) -> Result<Var> {
    if !(t > 0.0) {
        return Err(Error::Domain {
            op: "concrete_edge_weights",
            message: format!("temperature must be positive, got {t}"),
        });
    }
    if tape.value(logits).len() != noise.len() {
        return Err(Error::shape(
            "concrete_edge_weights",
            tape.shape(logits),
            &[noise.len()],
        ));
    }
    let shape = tape.shape(logits).to_vec();
    let noise = tape.constant(Tensor::new(shape, noise.to_vec())?);
    let shifted = tape.add(logits, noise)?;
    let scaled = tape.scale(shifted, 1.0 / t);
    Ok(tape.sigmoid(scaled))
}

/// [`concrete_weights_with_noise`] with fresh noise from `rng`.
pub fn concrete_edge_weights(tape: &mut Tape, logits: Var, batch: &GraphBatch, t: f32, rng: &mut Rng) -> Result<Var> {
    let noise = logistic_noise(batch, rng);
    concrete_weights_with_noise(tape, logits, &noise, t)
}
