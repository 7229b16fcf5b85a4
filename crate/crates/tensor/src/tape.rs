//! Reverse-mode automatic differentiation over 2-D `f64` matrices.
//!
//! A [`Tape`] records every operation in creation order, which is already a
//! topological order, so the backward sweep is a single reverse pass.

use std::sync::Arc;

use ndarray::{s, Array2, Axis, Zip};
use rand::Rng;

use crate::error::TensorError;
use crate::sparse::SparseMatrix;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Pointwise nonlinearities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    /// Slope 0.01 below zero.
    LeakyRelu,
    Identity,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Sparse {
        mat: Arc<SparseMatrix>,
        x: Var,
        transpose: bool,
    },
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Scale(Var, f64),
    Mask(Var, Array2<f64>),
    Concat(Vec<Var>),
    MeanRows(Var),
    SumAll(Var),
    Gather(Var, Arc<Vec<usize>>),
    ScatterAdd(Var, Arc<Vec<usize>>),
    RowScale(Var, Var),
    SegmentSoftmax(Var, Arc<Vec<usize>>),
    CrossEntropy {
        logits: Var,
        rows: Arc<Vec<usize>>,
        probs: Array2<f64>,
        labels: Arc<Vec<usize>>,
    },
    Mse(Var, Arc<Array2<f64>>),
}

struct Node {
    value: Array2<f64>,
    op: Op,
    requires_grad: bool,
    grad: Option<Array2<f64>>,
}

/// A computation graph confined to one worker.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

type Result<T> = std::result::Result<T, TensorError>;

fn check_same(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(TensorError::ShapeMismatch { op, left: a, right: b })
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

    fn push(&mut self, value: Array2<f64>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Records a leaf that does not receive gradients.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Records a leaf whose gradient is accumulated by [`Tape::backward`].
    pub fn variable(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// Accumulated gradient of a leaf (or of any node after backward).
    pub fn grad(&self, v: Var) -> Option<&Array2<f64>> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                left: sa,
                right: sb,
            });
        }
        let value = self.value(a).dot(self.value(b));
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    /// `mat · x`, or `matᵀ · x` when `transpose` is set.
    pub fn sparse_matmul(&mut self, mat: Arc<SparseMatrix>, x: Var, transpose: bool) -> Result<Var> {
        let value = if transpose {
            mat.mul_dense_transposed(self.value(x).view())?
        } else {
            mat.mul_dense(self.value(x).view())?
        };
        let rg = self.rg(&[x]);
        Ok(self.push(value, Op::Sparse { mat, x, transpose }, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        check_same("add", self.shape(a), self.shape(b))?;
        let value = self.value(a) + self.value(b);
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        check_same("sub", self.shape(a), self.shape(b))?;
        let value = self.value(a) - self.value(b);
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::Sub(a, b), rg))
    }

    /// Adds a `1 × d` row vector to every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (sx, sr) = (self.shape(x), self.shape(row));
        if sr.0 != 1 || sr.1 != sx.1 {
            return Err(TensorError::ShapeMismatch {
                op: "add_row",
                left: sx,
                right: sr,
            });
        }
        let value = self.value(x) + self.value(row);
        let rg = self.rg(&[x, row]);
        Ok(self.push(value, Op::AddRow(x, row), rg))
    }

    /// `x · w + b` with `b` a `1 × out` row.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let y = self.matmul(x, w)?;
        match b {
            Some(b) => self.add_row(y, b),
            None => Ok(y),
        }
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).mapv(|v| v.max(0.0));
        let rg = self.rg(&[x]);
        self.push(value, Op::Relu(x), rg)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let value = self.value(x).mapv(|v| if v > 0.0 { v } else { slope * v });
        let rg = self.rg(&[x]);
        self.push(value, Op::LeakyRelu(x, slope), rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).mapv(|v| 1.0 / (1.0 + (-v).exp()));
        let rg = self.rg(&[x]);
        self.push(value, Op::Sigmoid(x), rg)
    }

    pub fn pointwise(&mut self, x: Var, act: Activation) -> Var {
        match act {
            Activation::Relu => self.relu(x),
            Activation::LeakyRelu => self.leaky_relu(x, 0.01),
            Activation::Identity => x,
        }
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let value = self.value(x) * c;
        let rg = self.rg(&[x]);
        self.push(value, Op::Scale(x, c), rg)
    }

    /// Inverted dropout. Identity when not training or when `p == 0`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, training: bool, rng: &mut R) -> Var {
        if !training || p <= 0.0 {
            return x;
        }
        let keep = 1.0 - p;
        let (n, d) = self.shape(x);
        let mask = Array2::from_shape_simple_fn((n, d), || if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 });
        let value = self.value(x) * &mask;
        let rg = self.rg(&[x]);
        self.push(value, Op::Mask(x, mask), rg)
    }

    pub fn concat_cols(&mut self, xs: &[Var]) -> Result<Var> {
        let first = *xs.first().ok_or(TensorError::EmptyConcat)?;
        let rows = self.shape(first).0;
        for &x in xs {
            if self.shape(x).0 != rows {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_cols",
                    left: self.shape(first),
                    right: self.shape(x),
                });
            }
        }
        let views: Vec<_> = xs.iter().map(|x| self.value(*x).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("row counts checked");
        let rg = self.rg(xs);
        Ok(self.push(value, Op::Concat(xs.to_vec()), rg))
    }

    /// `(n, d) → (1, d)`.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let (n, d) = self.shape(x);
        let value = if n == 0 {
            Array2::zeros((1, d))
        } else {
            self.value(x).sum_axis(Axis(0)).insert_axis(Axis(0)) / n as f64
        };
        let rg = self.rg(&[x]);
        self.push(value, Op::MeanRows(x), rg)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(x).sum());
        let rg = self.rg(&[x]);
        self.push(value, Op::SumAll(x), rg)
    }

    /// Row `k` of the output is row `idx[k]` of `x`.
    pub fn gather_rows(&mut self, x: Var, idx: Arc<Vec<usize>>) -> Result<Var> {
        let (n, d) = self.shape(x);
        let mut value = Array2::zeros((idx.len(), d));
        for (k, &i) in idx.iter().enumerate() {
            if i >= n {
                return Err(TensorError::GatherOutOfBounds { index: i, len: n });
            }
            value.row_mut(k).assign(&self.value(x).row(i));
        }
        let rg = self.rg(&[x]);
        Ok(self.push(value, Op::Gather(x, idx), rg))
    }

    /// Row `idx[k]` of the `(n_out, d)` output accumulates row `k` of `x`.
    pub fn scatter_add_rows(&mut self, x: Var, idx: Arc<Vec<usize>>, n_out: usize) -> Result<Var> {
        let (n, d) = self.shape(x);
        if idx.len() != n {
            return Err(TensorError::ShapeMismatch {
                op: "scatter_add_rows",
                left: (idx.len(), 1),
                right: (n, d),
            });
        }
        let mut value = Array2::zeros((n_out, d));
        for (k, &i) in idx.iter().enumerate() {
            if i >= n_out {
                return Err(TensorError::GatherOutOfBounds { index: i, len: n_out });
            }
            value.row_mut(i).scaled_add(1.0, &self.value(x).row(k));
        }
        let rg = self.rg(&[x]);
        Ok(self.push(value, Op::ScatterAdd(x, idx), rg))
    }

    /// Multiplies row `k` of `x` by the scalar `w[k, 0]`.
    pub fn row_scale(&mut self, x: Var, w: Var) -> Result<Var> {
        let (sx, sw) = (self.shape(x), self.shape(w));
        if sw != (sx.0, 1) {
            return Err(TensorError::ShapeMismatch {
                op: "row_scale",
                left: sx,
                right: sw,
            });
        }
        let value = self.value(x) * self.value(w);
        let rg = self.rg(&[x, w]);
        Ok(self.push(value, Op::RowScale(x, w), rg))
    }

    /// Softmax of a column of scores within groups: entries sharing `segment[k]`
    /// are normalized together.
    pub fn segment_softmax(&mut self, scores: Var, segment: Arc<Vec<usize>>) -> Result<Var> {
        let (n, d) = self.shape(scores);
        if d != 1 || segment.len() != n {
            return Err(TensorError::ShapeMismatch {
                op: "segment_softmax",
                left: (n, d),
                right: (segment.len(), 1),
            });
        }
        let n_seg = segment.iter().max().map_or(0, |m| m + 1);
        let s = self.value(scores);
        let mut max = vec![f64::NEG_INFINITY; n_seg];
        for (k, &g) in segment.iter().enumerate() {
            max[g] = max[g].max(s[[k, 0]]);
        }
        let mut value = Array2::zeros((n, 1));
        let mut denom = vec![0.0; n_seg];
        for (k, &g) in segment.iter().enumerate() {
            let e = (s[[k, 0]] - max[g]).exp();
            value[[k, 0]] = e;
            denom[g] += e;
        }
        for (k, &g) in segment.iter().enumerate() {
            value[[k, 0]] /= denom[g];
        }
        let rg = self.rg(&[scores]);
        Ok(self.push(value, Op::SegmentSoftmax(scores, segment), rg))
    }

    /// Mean softmax cross-entropy over the selected rows of `logits`.
    pub fn cross_entropy(&mut self, logits: Var, rows: Arc<Vec<usize>>, labels: Arc<Vec<usize>>) -> Result<Var> {
        if rows.is_empty() {
            return Err(TensorError::EmptyMask);
        }
        let (n, c) = self.shape(logits);
        if labels.len() != rows.len() {
            return Err(TensorError::ShapeMismatch {
                op: "cross_entropy",
                left: (rows.len(), 1),
                right: (labels.len(), 1),
            });
        }
        let z = self.value(logits);
        let mut probs = Array2::zeros((rows.len(), c));
        let mut loss = 0.0;
        for (k, (&r, &y)) in rows.iter().zip(labels.iter()).enumerate() {
            if r >= n {
                return Err(TensorError::GatherOutOfBounds { index: r, len: n });
            }
            if y >= c {
                return Err(TensorError::LabelOutOfRange { label: y, classes: c });
            }
            let row = z.row(r);
            let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            loss += lse - row[y];
            for j in 0..c {
                probs[[k, j]] = (row[j] - lse).exp();
            }
        }
        let value = Array2::from_elem((1, 1), loss / rows.len() as f64);
        let rg = self.rg(&[logits]);
        Ok(self.push(
            value,
            Op::CrossEntropy {
                logits,
                rows,
                probs,
                labels,
            },
            rg,
        ))
    }

    /// Mean squared error against a constant target.
    pub fn mse(&mut self, pred: Var, target: Arc<Array2<f64>>) -> Result<Var> {
        check_same("mse", self.shape(pred), target.dim())?;
        let diff = self.value(pred) - target.as_ref();
        let count = diff.len().max(1) as f64;
        let value = Array2::from_elem((1, 1), diff.mapv(|v| v * v).sum() / count);
        let rg = self.rg(&[pred]);
        Ok(self.push(value, Op::Mse(pred, target), rg))
    }

    /// Back-propagates from a scalar `loss`, adding into the stored gradient of
    /// every node that requires one. Calling twice without
    /// [`Tape::zero_grads`] accumulates.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(TensorError::NonScalarLoss(shape));
        }
        let mut adj: Vec<Option<Array2<f64>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(Array2::ones((1, 1)));
        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            self.propagate(idx, &g, &mut adj);
            let node = &mut self.nodes[idx];
            match &mut node.grad {
                Some(acc) => *acc += &g,
                None => node.grad = Some(g),
            }
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &Array2<f64>, adj: &mut [Option<Array2<f64>>]) {
        let mut send = |v: Var, contrib: Array2<f64>| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut adj[v.0] {
                Some(acc) => *acc += &contrib,
                slot @ None => *slot = Some(contrib),
            }
        };
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                send(*a, g.dot(&self.value(*b).t()));
                send(*b, self.value(*a).t().dot(g));
            }
            Op::Sparse { mat, x, transpose } => {
                let gx = if *transpose {
                    mat.mul_dense(g.view())
                } else {
                    mat.mul_dense_transposed(g.view())
                };
                send(*x, gx.expect("shapes fixed at forward time"));
            }
            Op::Add(a, b) => {
                send(*a, g.clone());
                send(*b, g.clone());
            }
            Op::Sub(a, b) => {
                send(*a, g.clone());
                send(*b, -g);
            }
            Op::AddRow(x, row) => {
                send(*x, g.clone());
                send(*row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            Op::Relu(x) => {
                let mut gx = g.clone();
                Zip::from(&mut gx).and(self.value(*x)).for_each(|d, &v| {
                    if v <= 0.0 {
                        *d = 0.0
                    }
                });
                send(*x, gx);
            }
            Op::LeakyRelu(x, slope) => {
                let mut gx = g.clone();
                Zip::from(&mut gx).and(self.value(*x)).for_each(|d, &v| {
                    if v <= 0.0 {
                        *d *= slope
                    }
                });
                send(*x, gx);
            }
            Op::Sigmoid(x) => {
                let mut gx = g.clone();
                Zip::from(&mut gx)
                    .and(&node.value)
                    .for_each(|d, &y| *d *= y * (1.0 - y));
                send(*x, gx);
            }
            Op::Scale(x, c) => send(*x, g * *c),
            Op::Mask(x, mask) => send(*x, g * mask),
            Op::Concat(xs) => {
                let mut start = 0;
                for &x in xs {
                    let w = self.shape(x).1;
                    send(x, g.slice(s![.., start..start + w]).to_owned());
                    start += w;
                }
            }
            Op::MeanRows(x) => {
                let (n, d) = self.shape(*x);
                let row = g.row(0).to_owned() / n.max(1) as f64;
                send(*x, row.broadcast((n, d)).expect("row broadcast").to_owned());
            }
            Op::SumAll(x) => {
                send(*x, Array2::from_elem(self.shape(*x), g[[0, 0]]));
            }
            Op::Gather(x, idx) => {
                let mut gx = Array2::zeros(self.shape(*x));
                for (k, &i) in idx.iter().enumerate() {
                    gx.row_mut(i).scaled_add(1.0, &g.row(k));
                }
                send(*x, gx);
            }
            Op::ScatterAdd(x, idx) => {
                let mut gx = Array2::zeros(self.shape(*x));
                for (k, &i) in idx.iter().enumerate() {
                    gx.row_mut(k).assign(&g.row(i));
                }
                send(*x, gx);
            }
            Op::RowScale(x, w) => {
                send(*x, g * self.value(*w));
                let gw = (g * self.value(*x)).sum_axis(Axis(1)).insert_axis(Axis(1));
                send(*w, gw);
            }
            Op::SegmentSoftmax(scores, segment) => {
                let y = &node.value;
                let n_seg = segment.iter().max().map_or(0, |m| m + 1);
                let mut dot = vec![0.0; n_seg];
                for (k, &s) in segment.iter().enumerate() {
                    dot[s] += g[[k, 0]] * y[[k, 0]];
                }
                let mut gs = Array2::zeros(y.dim());
                for (k, &s) in segment.iter().enumerate() {
                    gs[[k, 0]] = y[[k, 0]] * (g[[k, 0]] - dot[s]);
                }
                send(*scores, gs);
            }
            Op::CrossEntropy {
                logits,
                rows,
                probs,
                labels,
            } => {
                let scale = g[[0, 0]] / rows.len() as f64;
                let mut gl = Array2::zeros(self.shape(*logits));
                for (k, (&r, &y)) in rows.iter().zip(labels.iter()).enumerate() {
                    let mut row = gl.row_mut(r);
                    row.scaled_add(scale, &probs.row(k));
                    row[y] -= scale;
                }
                send(*logits, gl);
            }
            Op::Mse(pred, target) => {
                let diff = self.value(*pred) - target.as_ref();
                let count = diff.len().max(1) as f64;
                send(*pred, diff * (2.0 * g[[0, 0]] / count));
            }
        }
    }
}
