use crate::error::{Error, Result};
use crate::graphs::GraphBatch;
use crate::numerics::{Tape, Tensor, Var};

/// Guard against zero-norm rows before cosine similarity.
pub const NORM_EPS: f32 = 1e-8;

/// Contrastive loss between two views of the same `B` graphs.
///
/// With `s_ij` the cosine similarity of `z1_i` and `z2_j`,
/// `ℓ_i = −log( exp(s_ii/τ) / Σ_j exp(s_ij/τ) )` and the loss is the mean
/// of `ℓ_i`. Negatives come from the other view only, in one direction.
pub fn nt_xent(tape: &mut Tape, z1: Var, z2: Var, tau: f32) -> Result<Var> {
    if tape.shape(z1) != tape.shape(z2) || tape.shape(z1).len() != 2 {
        return Err(Error::shape("nt_xent", tape.shape(z1), tape.shape(z2)));
    }
    let b = tape.shape(z1)[0];
    if b < 2 {
        return Err(Error::Contract(format!(
            "nt_xent needs at least 2 rows for in-batch negatives, got {b}"
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::Domain {
            op: "nt_xent",
            message: format!("temperature must be positive, got {tau}"),
        });
    }
    let n1 = tape.l2_normalize_rows(z1, NORM_EPS);
    let n2 = tape.l2_normalize_rows(z2, NORM_EPS);
    let n2t = tape.transpose(n2);
    let sim = tape.matmul(n1, n2t)?;
    let logits = tape.scale(sim, 1.0 / tau);
    let log_probs = tape.log_softmax_rows(logits);
    let diagonal: Vec<usize> = (0..b).collect();
    let positives = tape.pick_per_row(log_probs, &diagonal)?;
    let mean = tape.mean(positives);
    Ok(tape.scale(mean, -1.0))
}

/// Mean over graphs of the fraction of (weighted) edges dropped,
/// `mean_g Σ_{e∈g}(1 − w_e) / M_g`. Graphs without edges are left out; a
/// batch with no edges at all gives a constant 0.
pub fn drop_ratio(tape: &mut Tape, weights: Var, batch: &GraphBatch) -> Result<Var> {
    let m = batch.total_edges();
    if tape.value(weights).len() != m {
        return Err(Error::shape("drop_ratio", tape.shape(weights), &[m]));
    }
    let counts = batch.graph_edge_counts();
    let with_edges = counts.iter().filter(|&&c| c > 0).count();
    if with_edges == 0 {
        return Ok(tape.constant(Tensor::scalar(0.0)));
    }
    let flat = tape.reshape(weights, &[m])?;
    let negated = tape.scale(flat, -1.0);
    let dropped = tape.add_scalar(negated, 1.0);
    let per_graph = tape.segment_sum(dropped, batch.edge_to_graph(), batch.num_graphs())?;
    // Directed counts; symmetric weights give the undirected fraction.
    let inv: Vec<f32> = counts
        .iter()
        .map(|&c| if c == 0 { 0.0 } else { 1.0 / c as f32 })
        .collect();
    let inv = tape.constant(Tensor::vector(inv));
    let fractions = tape.mul(per_graph, inv)?;
    let total = tape.sum(fractions);
    Ok(tape.scale(total, 1.0 / with_edges as f32))
}
