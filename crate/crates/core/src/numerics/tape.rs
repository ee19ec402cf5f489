use super::batch_norm::{BatchMoments, BatchNormStats, NormMode};
use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f32),
    AddScalar(Var),
    Relu(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    Softplus(Var),
    AddRow(Var, Var),
    MulCol(Var, Var),
    MulScalar(Var, Var),
    Gather(Var, Vec<usize>),
    SegmentSum(Var, Vec<usize>),
    Sum(Var),
    Mean(Var),
    Transpose(Var),
    Reshape(Var),
    ConcatCols(Var, Var),
    L2NormalizeRows {
        input: Var,
        norms: Vec<f32>,
        eps: f32,
    },
    LogSoftmaxRows(Var),
    PickPerRow(Var, Vec<usize>),
    BatchNorm {
        input: Var,
        gamma: Var,
        beta: Var,
        normalized: Vec<f32>,
        inv_std: Vec<f32>,
        batch_stats: bool,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    tracked: bool,
}

/// Reverse-mode gradient tape.
///
/// Every operation appends a node whose inputs were recorded earlier, so the
/// node list is already in topological order. A node is *tracked* when it is
/// a parameter leaf or depends on one; untracked nodes (constants and
/// everything computed only from constants) never receive gradients.
///
/// One tape is meant to live for a single forward/backward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Gradient of `var`, or zeros shaped like `like` when nothing flowed to it.
    pub fn get_or_zeros(&self, var: Var, like: &Tensor) -> Tensor {
        self.get(var).cloned().unwrap_or_else(|| like.same_shape_zeros())
    }
}

fn rows_cols(shape: &[usize]) -> (usize, usize) {
    match shape.len() {
        0 => (1, 1),
        1 => (shape[0], 1),
        _ => (shape[0], shape[1..].iter().product()),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a leaf that receives a gradient.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Records a detached leaf.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    pub fn is_tracked(&self, var: Var) -> bool {
        self.nodes[var.0].tracked
    }

    fn push(&mut self, value: Tensor, op: Op, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].tracked)
    }

    fn data(&self, var: Var) -> &[f32] {
        self.nodes[var.0].value.data()
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f32) -> f32) -> Var {
        let value = self.value(a).map(f);
        let tracked = self.tracked(&[a]);
        self.push(value, op, tracked)
    }

    fn binary_same_shape(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        op: Op,
        f: impl Fn(f32, f32) -> f32,
    ) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::shape(name, va.shape(), vb.shape()));
        }
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(value, op, tracked))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::shape("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.data(a), false, self.data(b), false, &mut out, 0.0);
        let value = Tensor::new(vec![m, n], out)?;
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), tracked))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("add", a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("sub", a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("mul", a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, c: f32) -> Var {
        self.unary(a, Op::Scale(a, c), |x| x * c)
    }

    pub fn add_scalar(&mut self, a: Var, c: f32) -> Var {
        self.unary(a, Op::AddScalar(a), |x| x + c)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Op::Exp(a), f32::exp)
    }

    /// Natural logarithm; every input must be strictly positive.
    pub fn log(&mut self, a: Var) -> Result<Var> {
        if let Some(&bad) = self.data(a).iter().find(|&&x| !(x > 0.0)) {
            return Err(Error::Domain {
                op: "log",
                message: format!("non-positive input {bad}"),
            });
        }
        Ok(self.unary(a, Op::Log(a), f32::ln))
    }

    /// `ln(1 + e^x)`, computed stably.
    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, Op::Softplus(a), softplus)
    }

    /// Adds a length-`d` row to every row of an `n×d` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (n, d) = rows_cols(self.shape(a));
        if self.value(row).len() != d {
            return Err(Error::shape("add_row", self.shape(a), self.shape(row)));
        }
        let r = self.data(row).to_vec();
        let mut out = self.data(a).to_vec();
        for i in 0..n {
            for (x, &b) in out[i * d..(i + 1) * d].iter_mut().zip(&r) {
                *x += b;
            }
        }
        let value = Tensor::new(self.shape(a).to_vec(), out)?;
        let tracked = self.tracked(&[a, row]);
        Ok(self.push(value, Op::AddRow(a, row), tracked))
    }

    /// Multiplies row `i` of `a` by `col[i]`.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var> {
        let (n, d) = rows_cols(self.shape(a));
        if self.value(col).len() != n {
            return Err(Error::shape("mul_col", self.shape(a), self.shape(col)));
        }
        let c = self.data(col);
        let mut out = self.data(a).to_vec();
        for i in 0..n {
            let s = c[i];
            out[i * d..(i + 1) * d].iter_mut().for_each(|x| *x *= s);
        }
        let value = Tensor::new(self.shape(a).to_vec(), out)?;
        let tracked = self.tracked(&[a, col]);
        Ok(self.push(value, Op::MulCol(a, col), tracked))
    }

    /// Multiplies every entry of `a` by the single value held in `s`.
    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Result<Var> {
        if self.value(s).len() != 1 {
            return Err(Error::shape("mul_scalar", self.shape(a), self.shape(s)));
        }
        let c = self.data(s)[0];
        let value = self.value(a).map(|x| x * c);
        let tracked = self.tracked(&[a, s]);
        Ok(self.push(value, Op::MulScalar(a, s), tracked))
    }

    /// Selects rows of `a`; output row `r` is input row `indices[r]`.
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let (n, d) = rows_cols(&shape);
        let src = self.data(a);
        let mut out = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            if i >= n {
                return Err(Error::Index {
                    op: "gather_rows",
                    index: i,
                    bound: n,
                });
            }
            out.extend_from_slice(&src[i * d..(i + 1) * d]);
        }
        let mut out_shape = shape;
        if out_shape.is_empty() {
            out_shape.push(1);
        }
        out_shape[0] = indices.len();
        let value = Tensor::new(out_shape, out)?;
        let tracked = self.tracked(&[a]);
        Ok(self.push(value, Op::Gather(a, indices.to_vec()), tracked))
    }

    /// Sums rows sharing a segment id. Empty segments produce zero rows.
    pub fn segment_sum(&mut self, a: Var, segment_ids: &[usize], num_segments: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let (n, d) = rows_cols(&shape);
        if segment_ids.len() != n {
            return Err(Error::shape("segment_sum", &shape, &[segment_ids.len()]));
        }
        let src = self.data(a);
        let mut out = vec![0.0; num_segments * d];
        for (r, &id) in segment_ids.iter().enumerate() {
            if id >= num_segments {
                return Err(Error::Index {
                    op: "segment_sum",
                    index: id,
                    bound: num_segments,
                });
            }
            for (o, &x) in out[id * d..(id + 1) * d].iter_mut().zip(&src[r * d..(r + 1) * d]) {
                *o += x;
            }
        }
        let mut out_shape = shape;
        if out_shape.is_empty() {
            out_shape.push(1);
        }
        out_shape[0] = num_segments;
        let value = Tensor::new(out_shape, out)?;
        let tracked = self.tracked(&[a]);
        Ok(self.push(value, Op::SegmentSum(a, segment_ids.to_vec()), tracked))
    }

    /// Same data under a new shape with the same element count.
    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).clone().reshape(shape.to_vec())?;
        let tracked = self.tracked(&[a]);
        Ok(self.push(value, Op::Reshape(a), tracked))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        let tracked = self.tracked(&[a]);
        self.push(value, Op::Sum(a), tracked)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let value = Tensor::scalar(t.sum() / t.len().max(1) as f32);
        let tracked = self.tracked(&[a]);
        self.push(value, Op::Mean(a), tracked)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        let tracked = self.tracked(&[a]);
        self.push(value, Op::Transpose(a), tracked)
    }

    /// Horizontal concatenation of two matrices with equal row counts.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, p) = rows_cols(self.shape(a));
        let (n2, q) = rows_cols(self.shape(b));
        if n != n2 {
            return Err(Error::shape("concat_cols", self.shape(a), self.shape(b)));
        }
        let (da, db) = (self.data(a), self.data(b));
        let mut out = Vec::with_capacity(n * (p + q));
        for i in 0..n {
            out.extend_from_slice(&da[i * p..(i + 1) * p]);
            out.extend_from_slice(&db[i * q..(i + 1) * q]);
        }
        let value = Tensor::new(vec![n, p + q], out)?;
        let tracked = self.tracked(&[a, b]);
        Ok(self.push(value, Op::ConcatCols(a, b), tracked))
    }

    /// Scales each row to unit Euclidean norm; rows with norm below `eps`
    /// are divided by `eps` instead.
    pub fn l2_normalize_rows(&mut self, a: Var, eps: f32) -> Var {
        let (n, d) = rows_cols(self.shape(a));
        let src = self.data(a);
        let mut out = src.to_vec();
        let mut norms = Vec::with_capacity(n);
        for i in 0..n {
            let row = &mut out[i * d..(i + 1) * d];
            let norm = row.iter().map(|x| x * x).sum::<f32>().sqrt();
            let denom = norm.max(eps);
            row.iter_mut().for_each(|x| *x /= denom);
            norms.push(norm);
        }
        let value = Tensor::new(self.shape(a).to_vec(), out).expect("shape preserved");
        let tracked = self.tracked(&[a]);
        self.push(value, Op::L2NormalizeRows { input: a, norms, eps }, tracked)
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let (n, d) = rows_cols(self.shape(a));
        let mut out = self.data(a).to_vec();
        for i in 0..n {
            let row = &mut out[i * d..(i + 1) * d];
            let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f32>().ln();
            row.iter_mut().for_each(|x| *x -= lse);
        }
        let value = Tensor::new(self.shape(a).to_vec(), out).expect("shape preserved");
        let tracked = self.tracked(&[a]);
        self.push(value, Op::LogSoftmaxRows(a), tracked)
    }

    /// Picks entry `(i, columns[i])` of each row, giving a length-`n` vector.
    pub fn pick_per_row(&mut self, a: Var, columns: &[usize]) -> Result<Var> {
        let (n, d) = rows_cols(self.shape(a));
        if columns.len() != n {
            return Err(Error::shape("pick_per_row", self.shape(a), &[columns.len()]));
        }
        let src = self.data(a);
        let mut out = Vec::with_capacity(n);
        for (i, &c) in columns.iter().enumerate() {
            if c >= d {
                return Err(Error::Index {
                    op: "pick_per_row",
                    index: c,
                    bound: d,
                });
            }
            out.push(src[i * d + c]);
        }
        let value = Tensor::vector(out);
        let tracked = self.tracked(&[a]);
        Ok(self.push(value, Op::PickPerRow(a, columns.to_vec()), tracked))
    }

    /// Batch normalization over the rows of an `n×d` matrix.
    ///
    /// In training mode the batch moments are used and returned so the
    /// caller can fold them into the running statistics; inference mode uses
    /// the running statistics held in `stats`.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        stats: &BatchNormStats,
        mode: NormMode,
    ) -> Result<(Var, Option<BatchMoments>)> {
        let (n, d) = rows_cols(self.shape(x));
        if stats.channels() != d || self.value(gamma).len() != d || self.value(beta).len() != d {
            return Err(Error::shape("batch_norm", self.shape(x), &[stats.channels()]));
        }
        if n == 0 {
            return Err(Error::Contract("batch_norm on an empty batch".into()));
        }
        let src = self.data(x);
        let eps = stats.eps();
        let (mean, var, moments) = match mode {
            NormMode::Training => {
                let mut mean = vec![0.0f32; d];
                for i in 0..n {
                    for (m, &v) in mean.iter_mut().zip(&src[i * d..(i + 1) * d]) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n as f32);
                let mut var = vec![0.0f32; d];
                for i in 0..n {
                    for ((s, &v), &m) in var.iter_mut().zip(&src[i * d..(i + 1) * d]).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
                var.iter_mut().for_each(|s| *s /= n as f32);
                let moments = BatchMoments {
                    mean: mean.clone(),
                    var: var.clone(),
                    count: n,
                };
                (mean, var, Some(moments))
            }
            NormMode::Inference => (stats.running_mean().to_vec(), stats.running_var().to_vec(), None),
        };
        let inv_std: Vec<f32> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let (g, b) = (self.data(gamma), self.data(beta));
        let mut normalized = vec![0.0; n * d];
        let mut out = vec![0.0; n * d];
        for i in 0..n {
            for j in 0..d {
                let idx = i * d + j;
                let xh = (src[idx] - mean[j]) * inv_std[j];
                normalized[idx] = xh;
                out[idx] = g[j] * xh + b[j];
            }
        }
        let value = Tensor::new(self.shape(x).to_vec(), out)?;
        let tracked = self.tracked(&[x, gamma, beta]);
        let var_out = self.push(
            value,
            Op::BatchNorm {
                input: x,
                gamma,
                beta,
                normalized,
                inv_std,
                batch_stats: matches!(mode, NormMode::Training),
            },
            tracked,
        );
        Ok((var_out, moments))
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let loss_value = self.value(loss);
        if loss_value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                loss_value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f32>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.tracked {
                continue;
            }
            let Some(dy) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &dy, &mut grads);
            grads[idx] = Some(dy);
        }
        let grads = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, node)| {
                g.filter(|_| node.tracked)
                    .map(|g| Tensor::new(node.value.shape().to_vec(), g).expect("gradient shape"))
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn propagate(&self, idx: usize, dy: &[f32], grads: &mut [Option<Vec<f32>>]) {
        let node = &self.nodes[idx];
        let y = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = rows_cols(self.shape(*a));
                let n = self.shape(*b)[1];
                if self.nodes[a.0].tracked {
                    let ga = grad_slot(grads, *a, m * k);
                    gemm(m, n, k, dy, false, self.data(*b), true, ga, 1.0);
                }
                if self.nodes[b.0].tracked {
                    let gb = grad_slot(grads, *b, k * n);
                    gemm(k, m, n, self.data(*a), true, dy, false, gb, 1.0);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, dy.iter().copied());
                self.accumulate(grads, *b, dy.iter().copied());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, dy.iter().copied());
                self.accumulate(grads, *b, dy.iter().map(|g| -g));
            }
            Op::Mul(a, b) => {
                let (xa, xb) = (self.data(*a), self.data(*b));
                self.accumulate(grads, *a, dy.iter().zip(xb).map(|(g, v)| g * v));
                self.accumulate(grads, *b, dy.iter().zip(xa).map(|(g, v)| g * v));
            }
            Op::Scale(a, c) => self.accumulate(grads, *a, dy.iter().map(|g| g * c)),
            Op::AddScalar(a) => self.accumulate(grads, *a, dy.iter().copied()),
            Op::Relu(a) => {
                let x = self.data(*a);
                self.accumulate(
                    grads,
                    *a,
                    dy.iter().zip(x).map(|(g, &v)| if v > 0.0 { *g } else { 0.0 }),
                );
            }
            Op::Sigmoid(a) => self.accumulate(grads, *a, dy.iter().zip(y).map(|(g, s)| g * s * (1.0 - s))),
            Op::Exp(a) => self.accumulate(grads, *a, dy.iter().zip(y).map(|(g, e)| g * e)),
            Op::Log(a) => {
                let x = self.data(*a);
                self.accumulate(grads, *a, dy.iter().zip(x).map(|(g, v)| g / v));
            }
            Op::Softplus(a) => {
                let x = self.data(*a);
                self.accumulate(grads, *a, dy.iter().zip(x).map(|(g, &v)| g * sigmoid(v)));
            }
            Op::AddRow(a, row) => {
                self.accumulate(grads, *a, dy.iter().copied());
                if self.nodes[row.0].tracked {
                    let d = self.value(*row).len();
                    let g = grad_slot(grads, *row, d);
                    for chunk in dy.chunks(d) {
                        g.iter_mut().zip(chunk).for_each(|(o, v)| *o += v);
                    }
                }
            }
            Op::MulCol(a, col) => {
                let (n, d) = rows_cols(self.shape(*a));
                let c = self.data(*col);
                if self.nodes[a.0].tracked {
                    let g = grad_slot(grads, *a, n * d);
                    for i in 0..n {
                        for j in 0..d {
                            g[i * d + j] += dy[i * d + j] * c[i];
                        }
                    }
                }
                if self.nodes[col.0].tracked {
                    let x = self.data(*a);
                    let g = grad_slot(grads, *col, n);
                    for i in 0..n {
                        g[i] += dy[i * d..(i + 1) * d]
                            .iter()
                            .zip(&x[i * d..(i + 1) * d])
                            .map(|(u, v)| u * v)
                            .sum::<f32>();
                    }
                }
            }
            Op::MulScalar(a, s) => {
                let c = self.data(*s)[0];
                self.accumulate(grads, *a, dy.iter().map(|g| g * c));
                if self.nodes[s.0].tracked {
                    let x = self.data(*a);
                    let total: f32 = dy.iter().zip(x).map(|(g, v)| g * v).sum();
                    grad_slot(grads, *s, 1)[0] += total;
                }
            }
            Op::Gather(a, indices) => {
                if self.nodes[a.0].tracked {
                    let (n, d) = rows_cols(self.shape(*a));
                    let g = grad_slot(grads, *a, n * d);
                    for (r, &i) in indices.iter().enumerate() {
                        for (o, v) in g[i * d..(i + 1) * d].iter_mut().zip(&dy[r * d..(r + 1) * d]) {
                            *o += v;
                        }
                    }
                }
            }
            Op::SegmentSum(a, ids) => {
                if self.nodes[a.0].tracked {
                    let (n, d) = rows_cols(self.shape(*a));
                    let g = grad_slot(grads, *a, n * d);
                    for (r, &id) in ids.iter().enumerate() {
                        for (o, v) in g[r * d..(r + 1) * d].iter_mut().zip(&dy[id * d..(id + 1) * d]) {
                            *o += v;
                        }
                    }
                }
            }
            Op::Reshape(a) => self.accumulate(grads, *a, dy.iter().copied()),
            Op::Sum(a) => {
                let n = self.value(*a).len();
                self.accumulate(grads, *a, std::iter::repeat(dy[0]).take(n));
            }
            Op::Mean(a) => {
                let n = self.value(*a).len();
                let g = dy[0] / n.max(1) as f32;
                self.accumulate(grads, *a, std::iter::repeat(g).take(n));
            }
            Op::Transpose(a) => {
                // y is c×r for an r×c input.
                let (r, c) = rows_cols(self.shape(*a));
                if self.nodes[a.0].tracked {
                    let g = grad_slot(grads, *a, r * c);
                    for i in 0..r {
                        for j in 0..c {
                            g[i * c + j] += dy[j * r + i];
                        }
                    }
                }
            }
            Op::ConcatCols(a, b) => {
                let (n, p) = rows_cols(self.shape(*a));
                let q = rows_cols(self.shape(*b)).1;
                let w = p + q;
                if self.nodes[a.0].tracked {
                    let g = grad_slot(grads, *a, n * p);
                    for i in 0..n {
                        for (o, v) in g[i * p..(i + 1) * p].iter_mut().zip(&dy[i * w..i * w + p]) {
                            *o += v;
                        }
                    }
                }
                if self.nodes[b.0].tracked {
                    let g = grad_slot(grads, *b, n * q);
                    for i in 0..n {
                        for (o, v) in g[i * q..(i + 1) * q].iter_mut().zip(&dy[i * w + p..(i + 1) * w]) {
                            *o += v;
                        }
                    }
                }
            }
            Op::L2NormalizeRows { input, norms, eps } => {
                if self.nodes[input.0].tracked {
                    let (n, d) = rows_cols(self.shape(*input));
                    let g = grad_slot(grads, *input, n * d);
                    for i in 0..n {
                        let yr = &y[i * d..(i + 1) * d];
                        let dr = &dy[i * d..(i + 1) * d];
                        let gr = &mut g[i * d..(i + 1) * d];
                        if norms[i] >= *eps {
                            let dot: f32 = yr.iter().zip(dr).map(|(a, b)| a * b).sum();
                            for j in 0..d {
                                gr[j] += (dr[j] - yr[j] * dot) / norms[i];
                            }
                        } else {
                            for j in 0..d {
                                gr[j] += dr[j] / eps;
                            }
                        }
                    }
                }
            }
            Op::LogSoftmaxRows(a) => {
                if self.nodes[a.0].tracked {
                    let (n, d) = rows_cols(self.shape(*a));
                    let g = grad_slot(grads, *a, n * d);
                    for i in 0..n {
                        let dr = &dy[i * d..(i + 1) * d];
                        let total: f32 = dr.iter().sum();
                        for j in 0..d {
                            g[i * d + j] += dr[j] - y[i * d + j].exp() * total;
                        }
                    }
                }
            }
            Op::PickPerRow(a, columns) => {
                if self.nodes[a.0].tracked {
                    let (n, d) = rows_cols(self.shape(*a));
                    let g = grad_slot(grads, *a, n * d);
                    for (i, &c) in columns.iter().enumerate() {
                        g[i * d + c] += dy[i];
                    }
                }
            }
            Op::BatchNorm {
                input,
                gamma,
                beta,
                normalized,
                inv_std,
                batch_stats,
            } => {
                let (n, d) = rows_cols(self.shape(*input));
                let mut dbeta = vec![0.0f32; d];
                let mut dgamma = vec![0.0f32; d];
                for i in 0..n {
                    for j in 0..d {
                        dbeta[j] += dy[i * d + j];
                        dgamma[j] += dy[i * d + j] * normalized[i * d + j];
                    }
                }
                if self.nodes[input.0].tracked {
                    let gm = self.data(*gamma);
                    let g = grad_slot(grads, *input, n * d);
                    let nf = n as f32;
                    for i in 0..n {
                        for j in 0..d {
                            let idx = i * d + j;
                            let dxhat = dy[idx] * gm[j];
                            g[idx] += if *batch_stats {
                                // Σ dxhat = γ·dβ, Σ dxhat·xhat = γ·dγ
                                inv_std[j] / nf * (nf * dxhat - gm[j] * dbeta[j] - normalized[idx] * gm[j] * dgamma[j])
                            } else {
                                dxhat * inv_std[j]
                            };
                        }
                    }
                }
                self.accumulate(grads, *gamma, dgamma.into_iter());
                self.accumulate(grads, *beta, dbeta.into_iter());
            }
        }
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f32>>], target: Var, values: impl Iterator<Item = f32>) {
        if !self.nodes[target.0].tracked {
            return;
        }
        let len = self.nodes[target.0].value.len();
        let g = grad_slot(grads, target, len);
        g.iter_mut().zip(values).for_each(|(o, v)| *o += v);
    }
}

fn grad_slot(grads: &mut [Option<Vec<f32>>], target: Var, len: usize) -> &mut [f32] {
    grads[target.0].get_or_insert_with(|| vec![0.0; len])
}

pub(crate) fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f32) -> f32 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[Vec<f32>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_identity_and_dot() {
        let mut tape = Tape::new();
        let i = tape.constant(mat(&[vec![1.0, 0.0], vec![0.0, 1.0]]));
        let x = tape.constant(mat(&[vec![3.0], vec![4.0]]));
        let y = tape.matmul(i, x).unwrap();
        assert_eq!(tape.value(y).data(), &[3.0, 4.0]);

        let a = tape.constant(mat(&[vec![1.0, 2.0]]));
        let b = tape.constant(mat(&[vec![3.0], vec![4.0]]));
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[11.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[2, 3]));
        let err = tape.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
        assert_eq!(err.kind(), "shape");
    }

    #[test]
    fn pointwise_values() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![-1.0, 0.0, 2.0]));
        let r = tape.relu(x);
        assert_eq!(tape.value(r).data(), &[0.0, 0.0, 2.0]);
        let z = tape.constant(Tensor::vector(vec![0.0]));
        let s = tape.sigmoid(z);
        assert_eq!(tape.value(s).data(), &[0.5]);
        assert_eq!(tape.log(x).unwrap_err().kind(), "domain");
        let y = tape.constant(Tensor::vector(vec![1.0, 2.0]));
        assert_eq!(tape.add(x, y).unwrap_err().kind(), "shape");
    }

    #[test]
    fn segment_sum_values_and_errors() {
        let mut tape = Tape::new();
        let v = tape.constant(mat(&[vec![1.0], vec![2.0], vec![3.0]]));
        let s = tape.segment_sum(v, &[0, 0, 1], 2).unwrap();
        assert_eq!(tape.value(s).data(), &[3.0, 3.0]);
        let p = tape.segment_sum(v, &[2, 0, 1], 3).unwrap();
        assert_eq!(tape.value(p).data(), &[2.0, 3.0, 1.0]);
        let empty = tape.segment_sum(v, &[0, 0, 0], 3).unwrap();
        assert_eq!(tape.value(empty).data(), &[6.0, 0.0, 0.0]);
        assert_eq!(tape.segment_sum(v, &[0, 5, 1], 2).unwrap_err().kind(), "index");
    }

    #[test]
    fn backward_linear_and_quadratic() {
        let mut tape = Tape::new();
        let p = tape.param(Tensor::vector(vec![0.5, -2.0, 3.0]));
        let loss = tape.sum(p);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(p).unwrap().data(), &[1.0, 1.0, 1.0]);
        assert_eq!(g.get(loss).unwrap().data(), &[1.0]);

        let mut tape = Tape::new();
        let p = tape.param(Tensor::vector(vec![0.5, -2.0, 3.0]));
        let sq = tape.mul(p, p).unwrap();
        let loss = tape.sum(sq);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(p).unwrap().data(), &[1.0, -4.0, 6.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut tape = Tape::new();
        let p = tape.param(Tensor::vector(vec![1.0, 2.0]));
        assert_eq!(tape.backward(p).unwrap_err().kind(), "contract");
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::vector(vec![1.0, 2.0]));
        let p = tape.param(Tensor::vector(vec![3.0, 4.0]));
        let prod = tape.mul(c, p).unwrap();
        let loss = tape.sum(prod);
        let g = tape.backward(loss).unwrap();
        assert!(g.get(c).is_none());
        assert_eq!(g.get(p).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn sigmoid_derivative_at_zero() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![0.0]));
        let s = tape.sigmoid(x);
        let loss = tape.sum(s);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.25]);
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(100.0) - 100.0).abs() < 1e-4);
        assert!(softplus(-100.0) >= 0.0);
        assert!((softplus(0.0) - 2f32.ln()).abs() < 1e-7);
    }
}
