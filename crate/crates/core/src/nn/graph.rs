//! Reverse-mode automatic differentiation over 2-D `f64` arrays.
//!
//! A [`Graph`] is a tape built fresh for every forward pass. Vectors are
//! represented as `1 x d` rows. Parameters are pulled in from a
//! [`ParamStore`] on first use and their gradients are collected by
//! [`Graph::backward`].

use std::collections::HashMap;

use ndarray::{concatenate, s, Array2, Axis, Zip};

use super::params::{ParamId, ParamStore};

pub type Mat = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Log(Var),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    NormalizeRows(Var, Vec<f64>),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    MaxRows(Var, Vec<usize>),
    Pick(Var, Vec<(usize, usize)>),
    Sum(Var),
    MaskFill(Var, Vec<(usize, usize)>),
    MeanRows(Var),
    Repeat(Var),
}

struct Node {
    value: Mat,
    op: Op,
    needs_grad: bool,
}

pub struct Graph<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
    track: bool,
}

/// Gradients of a scalar with respect to every node of a graph.
pub struct Grads {
    per_node: Vec<Option<Mat>>,
    params: Vec<(ParamId, Var)>,
}

impl Grads {
    pub fn wrt(&self, v: Var) -> Option<&Mat> {
        self.per_node[v.0].as_ref()
    }

    /// Parameter gradients, in order of first use during the forward pass.
    pub fn params(&self) -> impl Iterator<Item = (ParamId, &Mat)> + '_ {
        self.params
            .iter()
            .filter_map(move |&(id, v)| self.per_node[v.0].as_ref().map(|g| (id, g)))
    }

    /// Adds the parameter gradients into a dense per-parameter buffer.
    pub fn accumulate_into(&self, buffer: &mut [Mat]) {
        for (id, g) in self.params() {
            buffer[id.index()] += g;
        }
    }
}

fn softmax_rows(x: &Mat) -> Mat {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let z = row.sum();
        row.mapv_inplace(|v| v / z);
    }
    out
}

fn log_softmax_rows(x: &Mat) -> Mat {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

impl<'a> Graph<'a> {
    /// A graph that records operations for backpropagation.
    pub fn new(store: &'a ParamStore) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
            params: HashMap::new(),
            track: true,
        }
    }

    /// A graph for forward evaluation only; nothing requires gradients.
    pub fn inference(store: &'a ParamStore) -> Self {
        Graph {
            track: false,
            ..Graph::new(store)
        }
    }

    pub fn store(&self) -> &'a ParamStore {
        self.store
    }

    fn push(&mut self, value: Mat, op: Op, parents: &[Var]) -> Var {
        let needs_grad = self.track && parents.iter().any(|p| self.nodes[p.0].needs_grad);
        let op = if needs_grad { op } else { Op::Leaf };
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// Scalar value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// A constant that never receives gradient.
    pub fn constant(&mut self, value: Mat) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// A leaf that receives gradient (used for inputs under test).
    pub fn input(&mut self, value: Mat) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: self.track,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.input(self.store.value(id).clone());
        self.params.insert(id, v);
        v
    }

    /// Cuts the gradient path while keeping the value.
    pub fn detach(&mut self, a: Var) -> Var {
        let v = self.value(a).clone();
        self.constant(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.ncols(), vb.nrows(), "matmul: {:?} x {:?}", va.dim(), vb.dim());
        let out = va.dot(vb);
        self.push(out, Op::MatMul(a, b), &[a, b])
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).t().to_owned();
        self.push(out, Op::Transpose(a), &[a])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add shape mismatch");
        let out = self.value(a) + self.value(b);
        self.push(out, Op::Add(a, b), &[a, b])
    }

    /// `a (m x n) + row (1 x n)`, broadcasting the row.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.shape(row), (1, self.shape(a).1), "add_row shape mismatch");
        let out = self.value(a) + self.value(row);
        self.push(out, Op::AddRow(a, row), &[a, row])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "sub shape mismatch");
        let out = self.value(a) - self.value(b);
        self.push(out, Op::Sub(a, b), &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul shape mismatch");
        let out = self.value(a) * self.value(b);
        self.push(out, Op::Mul(a, b), &[a, b])
    }

    /// `a (m x n) * row (1 x n)` element-wise, broadcasting the row.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.shape(row), (1, self.shape(a).1), "mul_row shape mismatch");
        let out = self.value(a) * self.value(row);
        self.push(out, Op::MulRow(a, row), &[a, row])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a) * c;
        self.push(out, Op::Scale(a, c), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(|v| v.max(0.0));
        self.push(out, Op::Relu(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(|v| 1.0 / (1.0 + (-v).exp()));
        self.push(out, Op::Sigmoid(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(f64::tanh);
        self.push(out, Op::Tanh(a), &[a])
    }

    pub fn log(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(f64::ln);
        self.push(out, Op::Log(a), &[a])
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let out = softmax_rows(self.value(a));
        self.push(out, Op::SoftmaxRows(a), &[a])
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let out = log_softmax_rows(self.value(a));
        self.push(out, Op::LogSoftmaxRows(a), &[a])
    }

    /// Per-row standardization `(x - mean) / sqrt(var + eps)`.
    pub fn normalize_rows(&mut self, a: Var, eps: f64) -> Var {
        let x = self.value(a);
        let mut out = x.clone();
        let mut inv_std = Vec::with_capacity(x.nrows());
        for mut row in out.rows_mut() {
            let n = row.len() as f64;
            let mean = row.sum() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let is = 1.0 / (var + eps).sqrt();
            row.mapv_inplace(|v| (v - mean) * is);
            inv_std.push(is);
        }
        self.push(out, Op::NormalizeRows(a, inv_std), &[a])
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let out = concatenate(Axis(0), &views).expect("concat_rows column mismatch");
        self.push(out, Op::ConcatRows(parts.to_vec()), parts)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let out = concatenate(Axis(1), &views).expect("concat_cols row mismatch");
        self.push(out, Op::ConcatCols(parts.to_vec()), parts)
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let out = self.value(a).slice(s![start..start + len, ..]).to_owned();
        self.push(out, Op::SliceRows(a, start), &[a])
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let out = self.value(a).slice(s![.., start..start + len]).to_owned();
        self.push(out, Op::SliceCols(a, start), &[a])
    }

    /// Rows `indices` of `a`, in order (repeats allowed).
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Var {
        let out = self.value(a).select(Axis(0), indices);
        self.push(out, Op::GatherRows(a, indices.to_vec()), &[a])
    }

    /// Element-wise maximum over rows, giving a `1 x n` row.
    pub fn max_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut arg = vec![0usize; x.ncols()];
        let mut out = Mat::from_elem((1, x.ncols()), f64::NEG_INFINITY);
        for (r, row) in x.rows().into_iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v > out[[0, c]] {
                    out[[0, c]] = v;
                    arg[c] = r;
                }
            }
        }
        self.push(out, Op::MaxRows(a, arg), &[a])
    }

    /// Mean over rows, giving a `1 x n` row.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let out = self
            .value(a)
            .mean_axis(Axis(0))
            .expect("mean of empty matrix")
            .insert_axis(Axis(0));
        self.push(out, Op::MeanRows(a), &[a])
    }

    /// Stacks a `1 x n` row `times` times.
    pub fn repeat_rows(&mut self, row: Var, times: usize) -> Var {
        let v = self.value(row);
        assert_eq!(v.nrows(), 1, "repeat_rows expects a row");
        let out = v.broadcast((times, v.ncols())).expect("broadcast").to_owned();
        self.push(out, Op::Repeat(row), &[row])
    }

    /// Selected entries as a `1 x k` row.
    pub fn pick(&mut self, a: Var, positions: &[(usize, usize)]) -> Var {
        let x = self.value(a);
        let out = Mat::from_shape_fn((1, positions.len()), |(_, k)| x[positions[k]]);
        self.push(out, Op::Pick(a, positions.to_vec()), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Mat::from_elem((1, 1), self.value(a).sum());
        self.push(out, Op::Sum(a), &[a])
    }

    /// Replaces the listed entries with -inf; they receive no gradient.
    pub fn mask_fill(&mut self, a: Var, positions: &[(usize, usize)]) -> Var {
        let mut out = self.value(a).clone();
        for &p in positions {
            out[p] = f64::NEG_INFINITY;
        }
        self.push(out, Op::MaskFill(a, positions.to_vec()), &[a])
    }

    /// Backpropagates from a `1 x 1` node.
    pub fn backward(&self, loss: Var) -> Grads {
        assert_eq!(self.shape(loss), (1, 1), "backward needs a scalar");
        let mut grads: Vec<Option<Mat>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Mat::ones((1, 1)));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            // intermediate gradients are not kept once propagated
            let Some(g) = grads[idx].take() else { continue };
            let y = &node.value;
            let mut send = |v: Var, d: Mat| {
                if !self.nodes[v.0].needs_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(acc) => *acc += &d,
                    slot @ None => *slot = Some(d),
                }
            };
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    send(*a, g.dot(&vb.t()));
                    send(*b, va.t().dot(&g));
                }
                Op::Transpose(a) => send(*a, g.t().to_owned()),
                Op::Add(a, b) => {
                    send(*a, g.clone());
                    send(*b, g.clone());
                }
                Op::AddRow(a, r) => {
                    send(*r, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    send(*a, g.clone());
                }
                Op::Sub(a, b) => {
                    send(*b, -&g);
                    send(*a, g.clone());
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    send(*a, &g * vb);
                    send(*b, &g * va);
                }
                Op::MulRow(a, r) => {
                    let (va, vr) = (&self.nodes[a.0].value, &self.nodes[r.0].value);
                    send(*r, (&g * va).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    send(*a, &g * vr);
                }
                Op::Scale(a, c) => send(*a, &g * *c),
                Op::Relu(a) => {
                    let x = &self.nodes[a.0].value;
                    let mut d = g.clone();
                    Zip::from(&mut d).and(x).for_each(|d, &x| {
                        if x <= 0.0 {
                            *d = 0.0
                        }
                    });
                    send(*a, d);
                }
                Op::Sigmoid(a) => send(*a, &g * &y.mapv(|s| s * (1.0 - s))),
                Op::Tanh(a) => send(*a, &g * &y.mapv(|t| 1.0 - t * t)),
                Op::Log(a) => send(*a, &g / &self.nodes[a.0].value),
                Op::SoftmaxRows(a) => {
                    let mut d = &g * y;
                    for (mut drow, yrow) in d.rows_mut().into_iter().zip(y.rows()) {
                        let dot = drow.sum();
                        Zip::from(&mut drow).and(&yrow).for_each(|d, &p| *d -= p * dot);
                    }
                    send(*a, d);
                }
                Op::LogSoftmaxRows(a) => {
                    let mut d = g.clone();
                    for (mut drow, yrow) in d.rows_mut().into_iter().zip(y.rows()) {
                        let total = drow.sum();
                        Zip::from(&mut drow)
                            .and(&yrow)
                            .for_each(|d, &ly| *d -= ly.exp() * total);
                    }
                    send(*a, d);
                }
                Op::NormalizeRows(a, inv_std) => {
                    let mut d = g.clone();
                    let n = y.ncols() as f64;
                    for ((mut drow, yrow), &is) in d.rows_mut().into_iter().zip(y.rows()).zip(inv_std) {
                        let mean_g = drow.sum() / n;
                        let mean_gy = drow.iter().zip(yrow.iter()).map(|(a, b)| a * b).sum::<f64>() / n;
                        Zip::from(&mut drow)
                            .and(&yrow)
                            .for_each(|d, &yv| *d = is * (*d - mean_g - yv * mean_gy));
                    }
                    send(*a, d);
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let rows = self.nodes[p.0].value.nrows();
                        send(*p, g.slice(s![offset..offset + rows, ..]).to_owned());
                        offset += rows;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let cols = self.nodes[p.0].value.ncols();
                        send(*p, g.slice(s![.., offset..offset + cols]).to_owned());
                        offset += cols;
                    }
                }
                Op::SliceRows(a, start) => {
                    let mut d = Mat::zeros(self.nodes[a.0].value.dim());
                    d.slice_mut(s![*start..*start + g.nrows(), ..]).assign(&g);
                    send(*a, d);
                }
                Op::SliceCols(a, start) => {
                    let mut d = Mat::zeros(self.nodes[a.0].value.dim());
                    d.slice_mut(s![.., *start..*start + g.ncols()]).assign(&g);
                    send(*a, d);
                }
                Op::GatherRows(a, idx) => {
                    let mut d = Mat::zeros(self.nodes[a.0].value.dim());
                    for (k, &r) in idx.iter().enumerate() {
                        let mut row = d.row_mut(r);
                        row += &g.row(k);
                    }
                    send(*a, d);
                }
                Op::MaxRows(a, arg) => {
                    let mut d = Mat::zeros(self.nodes[a.0].value.dim());
                    for (c, &r) in arg.iter().enumerate() {
                        d[[r, c]] = g[[0, c]];
                    }
                    send(*a, d);
                }
                Op::MeanRows(a) => {
                    let rows = self.nodes[a.0].value.nrows();
                    let d = g.broadcast((rows, g.ncols())).expect("broadcast").to_owned() / rows as f64;
                    send(*a, d);
                }
                Op::Repeat(r) => send(*r, g.sum_axis(Axis(0)).insert_axis(Axis(0))),
                Op::Pick(a, pos) => {
                    let mut d = Mat::zeros(self.nodes[a.0].value.dim());
                    for (k, &p) in pos.iter().enumerate() {
                        d[p] += g[[0, k]];
                    }
                    send(*a, d);
                }
                Op::Sum(a) => {
                    let d = Mat::from_elem(self.nodes[a.0].value.dim(), g[[0, 0]]);
                    send(*a, d);
                }
                Op::MaskFill(a, pos) => {
                    let mut d = g.clone();
                    for &p in pos {
                        d[p] = 0.0;
                    }
                    send(*a, d);
                }
            }
        }

        let mut params: Vec<(ParamId, Var)> = self.params.iter().map(|(&id, &v)| (id, v)).collect();
        params.sort_by_key(|&(_, v)| v.0);
        Grads {
            per_node: grads,
            params,
        }
    }
}
