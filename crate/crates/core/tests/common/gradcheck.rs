//! Central finite-difference gradient oracle over an f64 reference forward.

use topo_core::numerics::Tensor;

pub const STEP: f64 = 1e-3;
pub const KINK_STEP: f64 = 1e-6;
pub const FLOOR: f64 = 1e-3;
pub const SCALE_FLOOR: f64 = 1e-1;

#[derive(Debug, Clone)]
pub struct GradReport {
    /// Worst entry-wise relative error across all parameters.
    pub max_rel_err: f64,
    /// Parameter index and entry of the worst error.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub entries: usize,
    /// Entries re-differenced with the small step.
    pub kink_retries: usize,
    /// Denominator floor used.
    pub floor: f64,
}

pub fn rel_err(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

pub fn to_f64(params: &[Tensor]) -> Vec<Vec<f64>> {
    params
        .iter()
        .map(|t| t.data().iter().map(|&x| x as f64).collect())
        .collect()
}

fn central(work: &mut [Vec<f64>], p: usize, i: usize, h: f64, loss: &mut impl FnMut(&[Vec<f64>]) -> f64) -> f64 {
    let orig = work[p][i];
    work[p][i] = orig + h;
    let up = loss(work);
    work[p][i] = orig - h;
    let down = loss(work);
    work[p][i] = orig;
    (up - down) / (2.0 * h)
}

/// Compares f32 `analytic` gradients with central differences of the f64
/// reference `loss` evaluated at `params`.
///
/// Entry errors are relative, with the denominator floored at
/// `max(FLOOR, SCALE_FLOOR · max|numeric|)`. Round-off in an f32 entry is
/// proportional to the overall gradient scale rather than to the entry, and
/// batch norm over a channel with small batch variance amplifies it, so
/// entries far below the largest one are judged against that fraction of it.
pub fn check(params: &[Tensor], analytic: &[Tensor], loss: impl FnMut(&[Vec<f64>]) -> f64) -> GradReport {
    check_with(params, analytic, SCALE_FLOOR, loss)
}

/// [`check`] with only the absolute floor, for single primitives.
pub fn check_strict(params: &[Tensor], analytic: &[Tensor], loss: impl FnMut(&[Vec<f64>]) -> f64) -> GradReport {
    check_with(params, analytic, 0.0, loss)
}

fn check_with(
    params: &[Tensor],
    analytic: &[Tensor],
    scale_floor: f64,
    mut loss: impl FnMut(&[Vec<f64>]) -> f64,
) -> GradReport {
    let mut work = to_f64(params);
    let numeric: Vec<Vec<f64>> = (0..work.len())
        .map(|p| {
            (0..work[p].len())
                .map(|i| central(&mut work, p, i, STEP, &mut loss))
                .collect()
        })
        .collect();
    let scale = numeric.iter().flatten().fold(0.0f64, |m, &x| m.max(x.abs()));
    let floor = FLOOR.max(scale_floor * scale);
    let mut report = GradReport {
        max_rel_err: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        entries: 0,
        kink_retries: 0,
        floor,
    };
    for p in 0..work.len() {
        for i in 0..work[p].len() {
            let a = analytic[p].data()[i] as f64;
            let mut n = numeric[p][i];
            let mut e = rel_err(a, n, floor);
            if e >= 1e-4 {
                n = central(&mut work, p, i, KINK_STEP, &mut loss);
                e = rel_err(a, n, floor);
                report.kink_retries += 1;
            }
            report.entries += 1;
            if e > report.max_rel_err {
                report.max_rel_err = e;
                report.worst = (p, i);
                report.analytic = a;
                report.numeric = n;
            }
        }
    }
    report
}
