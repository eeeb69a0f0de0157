//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation in creation order, which is already a
//! topological order of the computation. [`Graph::backward`] walks the tape
//! once in reverse, routing gradients to operands and finally accumulating
//! them into the trainable entries of a [`ParamStore`].
//!
//! Gradients accumulate across calls: call [`ParamStore::zero_grads`] between
//! optimizer steps.

use super::{DiffError, ParamId, ParamStore, Tensor};
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Deliberate backward-rule corruption, used to prove that the gradient
/// checker notices a broken rule.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Fault {
    /// Multiply the tanh derivative by the given factor.
    TanhGradScale(f64),
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    Embed { param: ParamId, ids: Vec<usize> },
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    RowSoftmax(Var),
    RowLogSoftmax(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    ColMax { input: Var, argmax: Vec<usize> },
    Unfold { input: Var, width: usize },
    Gather { input: Var, index: Vec<usize> },
    LnClamped { input: Var, eps: f64 },
    Sum(Var),
    Mean(Var),
    Mask { input: Var, keep: Vec<bool> },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    fault: Option<Fault>,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> DiffError {
    DiffError::Shape { op, left: a.shape(), right: b.shape() }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    #[doc(hidden)]
    pub fn with_fault(fault: Fault) -> Self {
        Graph { nodes: Vec::new(), fault: Some(fault) }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A leaf that never receives gradients.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// A leaf bound to a stored parameter; gradients flow back to the store
    /// when the parameter is trainable.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let p = store.get(id);
        self.push(p.value.clone(), Op::Param(id), p.trainable())
    }

    /// Rows of an embedding parameter selected by token id, `[ids.len() × dim]`.
    pub fn embed(&mut self, store: &ParamStore, id: ParamId, ids: &[usize]) -> Result<Var, DiffError> {
        let p = store.get(id);
        if ids.is_empty() {
            return Err(DiffError::Empty("embedding lookup"));
        }
        let dim = p.value.cols();
        let mut out = Tensor::zeros(ids.len(), dim);
        for (r, &tok) in ids.iter().enumerate() {
            if tok >= p.value.rows() {
                return Err(DiffError::Index { op: "embed", index: tok, len: p.value.rows() });
            }
            out.row_mut(r).copy_from_slice(p.value.row(tok));
        }
        Ok(self.push(out, Op::Embed { param: id, ids: ids.to_vec() }, p.trainable()))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols() != bv.rows() {
            return Err(shape_err("matmul", av, bv));
        }
        let out = av.matmul(bv);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    /// `a · bᵀ` without materialising the transpose.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols() != bv.cols() {
            return Err(shape_err("matmul_nt", av, bv));
        }
        let out = av.matmul_nt(bv);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::MatMulNt(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        let rg = self.rg(&[a]);
        self.push(out, Op::Transpose(a), rg)
    }

    fn zip_same(&self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor, DiffError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err(op, av, bv));
        }
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect();
        Ok(Tensor::from_vec(av.rows(), av.cols(), data))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let out = self.zip_same("add", a, b, |x, y| x + y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let out = self.zip_same("sub", a, b, |x, y| x - y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    /// Element-wise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let out = self.zip_same("mul", a, b, |x, y| x * y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    /// Adds a `1 × cols` row vector to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, DiffError> {
        let (av, rv) = (self.value(a), self.value(row));
        if rv.rows() != 1 || rv.cols() != av.cols() {
            return Err(shape_err("add_row", av, rv));
        }
        let mut out = av.clone();
        for r in 0..out.rows() {
            for (o, &b) in out.row_mut(r).iter_mut().zip(rv.data()) {
                *o += b;
            }
        }
        let rg = self.rg(&[a, row]);
        Ok(self.push(out, Op::AddRow(a, row), rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| x * c);
        let rg = self.rg(&[a]);
        self.push(out, Op::Scale(a, c), rg)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| x + c);
        let rg = self.rg(&[a]);
        self.push(out, Op::AddScalar(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        let rg = self.rg(&[a]);
        self.push(out, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        let rg = self.rg(&[a]);
        self.push(out, Op::Tanh(a), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        let rg = self.rg(&[a]);
        self.push(out, Op::Relu(a), rg)
    }

    /// Softmax along each row, stabilised by subtracting the row max.
    /// `-inf` entries are allowed (they receive probability 0) as long as
    /// every row keeps at least one finite entry.
    pub fn row_softmax(&mut self, a: Var) -> Result<Var, DiffError> {
        let av = self.value(a);
        let mut out = av.clone();
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() {
                return Err(DiffError::DegenerateRow { op: "row_softmax", row: r });
            }
            let mut sum = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                sum += *x;
            }
            for x in row.iter_mut() {
                *x /= sum;
            }
        }
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::RowSoftmax(a), rg))
    }

    pub fn row_log_softmax(&mut self, a: Var) -> Result<Var, DiffError> {
        let av = self.value(a);
        let mut out = av.clone();
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() {
                return Err(DiffError::DegenerateRow { op: "row_log_softmax", row: r });
            }
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            for x in row.iter_mut() {
                *x -= lse;
            }
        }
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::RowLogSoftmax(a), rg))
    }

    /// Concatenation along the last axis (columns).
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, DiffError> {
        let first = *parts.first().ok_or(DiffError::Empty("concat_cols"))?;
        let rows = self.value(first).rows();
        let mut total = 0;
        for &p in parts {
            let pv = self.value(p);
            if pv.rows() != rows {
                return Err(shape_err("concat_cols", self.value(first), pv));
            }
            total += pv.cols();
        }
        let mut out = Tensor::zeros(rows, total);
        for r in 0..rows {
            let mut off = 0;
            for &p in parts {
                let pv = self.value(p);
                out.row_mut(r)[off..off + pv.cols()].copy_from_slice(pv.row(r));
                off += pv.cols();
            }
        }
        let rg = self.rg(parts);
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), rg))
    }

    /// Stacks inputs with equal column counts on top of each other.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, DiffError> {
        let first = *parts.first().ok_or(DiffError::Empty("concat_rows"))?;
        let cols = self.value(first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let pv = self.value(p);
            if pv.cols() != cols {
                return Err(shape_err("concat_rows", self.value(first), pv));
            }
            data.extend_from_slice(pv.data());
            rows += pv.rows();
        }
        let rg = self.rg(parts);
        Ok(self.push(Tensor::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()), rg))
    }

    /// Max over the row (time) axis for every column, `[len × c] → [1 × c]`.
    /// Ties resolve to the lowest row index; the gradient goes to that row only.
    pub fn max_over_time(&mut self, a: Var) -> Result<Var, DiffError> {
        let av = self.value(a);
        if av.rows() == 0 {
            return Err(DiffError::Empty("max_over_time"));
        }
        let mut argmax = vec![0usize; av.cols()];
        let mut out = Tensor::zeros(1, av.cols());
        for c in 0..av.cols() {
            let mut best = av.get(0, c);
            for r in 1..av.rows() {
                let v = av.get(r, c);
                if v > best {
                    best = v;
                    argmax[c] = r;
                }
            }
            out.set(0, c, best);
        }
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::ColMax { input: a, argmax }, rg))
    }

    /// Sliding windows of `width` consecutive rows flattened into one row,
    /// `[len × d] → [(len' − width + 1) × (width·d)]`, where inputs shorter
    /// than `width` are zero-padded to `len' = width`.
    pub fn unfold(&mut self, a: Var, width: usize) -> Result<Var, DiffError> {
        if width == 0 {
            return Err(DiffError::Empty("unfold width"));
        }
        let av = self.value(a);
        if av.rows() == 0 {
            return Err(DiffError::Empty("unfold"));
        }
        let d = av.cols();
        let len = av.rows().max(width);
        let windows = len - width + 1;
        let mut out = Tensor::zeros(windows, width * d);
        for w in 0..windows {
            let orow = out.row_mut(w);
            for j in 0..width {
                let src = w + j;
                if src < av.rows() {
                    orow[j * d..(j + 1) * d].copy_from_slice(av.row(src));
                }
            }
        }
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::Unfold { input: a, width }, rg))
    }

    /// Picks entries by flat row-major index into a `1 × index.len()` row.
    pub fn gather(&mut self, a: Var, index: &[usize]) -> Result<Var, DiffError> {
        let av = self.value(a);
        let mut data = Vec::with_capacity(index.len());
        for &i in index {
            if i >= av.len() {
                return Err(DiffError::Index { op: "gather", index: i, len: av.len() });
            }
            data.push(av.data()[i]);
        }
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::row_vector(data), Op::Gather { input: a, index: index.to_vec() }, rg))
    }

    /// `ln(max(x, eps))`; the clamped region has zero gradient.
    pub fn ln_clamped(&mut self, a: Var, eps: f64) -> Var {
        let out = self.value(a).map(|x| x.max(eps).ln());
        let rg = self.rg(&[a]);
        self.push(out, Op::LnClamped { input: a, eps }, rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.rg(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var, DiffError> {
        let av = self.value(a);
        if av.is_empty() {
            return Err(DiffError::Empty("mean"));
        }
        let s = av.data().iter().sum::<f64>() / av.len() as f64;
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::scalar(s), Op::Mean(a), rg))
    }

    /// Replaces entries whose `keep` flag is false with `-inf`.
    pub fn mask(&mut self, a: Var, keep: Vec<bool>) -> Result<Var, DiffError> {
        let av = self.value(a);
        if keep.len() != av.len() {
            return Err(DiffError::Shape { op: "mask", left: av.shape(), right: (1, keep.len()) });
        }
        let mut out = av.clone();
        for (x, &k) in out.data_mut().iter_mut().zip(&keep) {
            if !k {
                *x = f64::NEG_INFINITY;
            }
        }
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::Mask { input: a, keep }, rg))
    }

    /// Hash of every discrete choice the forward pass made: max-pool
    /// winners, ReLU signs, masks, gathered indices and clamp activity. Two
    /// evaluations with equal signatures lie on the same smooth piece.
    pub fn branch_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for (i, node) in self.nodes.iter().enumerate() {
            match &node.op {
                Op::ColMax { argmax, .. } => (i, argmax).hash(&mut h),
                Op::Relu(a) => {
                    i.hash(&mut h);
                    for &x in self.nodes[a.0].value.data() {
                        (x > 0.0).hash(&mut h);
                    }
                }
                Op::Mask { keep, .. } => (i, keep).hash(&mut h),
                Op::Gather { index, .. } => (i, index).hash(&mut h),
                Op::LnClamped { input, eps } => {
                    i.hash(&mut h);
                    for &x in self.nodes[input.0].value.data() {
                        (x < *eps).hash(&mut h);
                    }
                }
                _ => {}
            }
        }
        h.finish()
    }

    /// Reverse pass from a scalar root. Gradients of trainable parameters are
    /// added to `store` (not overwritten).
    pub fn backward(&self, root: Var, store: &mut ParamStore) -> Result<(), DiffError> {
        let rv = self.value(root);
        if rv.len() != 1 {
            return Err(DiffError::NonScalarRoot(rv.shape()));
        }
        if !self.nodes[root.0].requires_grad {
            return Ok(());
        }
        let mut grads: Vec<Option<Tensor>> = (0..=root.0).map(|_| None).collect();
        grads[root.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            self.route(node, &g, &mut grads, store);
        }
        Ok(())
    }

    fn acc(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match grads[v.0].as_mut() {
            Some(existing) => existing.add_assign(&g),
            None => grads[v.0] = Some(g),
        }
    }

    /// Like [`Self::acc`] but builds the contribution lazily.
    fn acc_with(&self, grads: &mut [Option<Tensor>], v: Var, f: impl FnOnce() -> Tensor) {
        if self.nodes[v.0].requires_grad {
            let g = f();
            self.acc(grads, v, g);
        }
    }

    fn route(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>], store: &mut ParamStore) {
        match &node.op {
            Op::Constant => {}
            Op::Param(id) => {
                if let Some(pg) = store.get_mut(*id).grad.as_mut() {
                    pg.add_assign(g);
                }
            }
            Op::Embed { param, ids } => {
                if let Some(pg) = store.get_mut(*param).grad.as_mut() {
                    for (r, &tok) in ids.iter().enumerate() {
                        for (dst, &src) in pg.row_mut(tok).iter_mut().zip(g.row(r)) {
                            *dst += src;
                        }
                    }
                }
            }
            Op::MatMul(a, b) => {
                let (a, b) = (*a, *b);
                self.acc_with(grads, a, || g.matmul_nt(self.value(b)));
                self.acc_with(grads, b, || self.value(a).matmul_tn(g));
            }
            Op::MatMulNt(a, b) => {
                // out = A Bᵀ: dA = g B, dB = gᵀ A
                let (a, b) = (*a, *b);
                self.acc_with(grads, a, || g.matmul(self.value(b)));
                self.acc_with(grads, b, || g.matmul_tn(self.value(a)));
            }
            Op::Transpose(a) => self.acc(grads, *a, g.transpose()),
            Op::Add(a, b) => {
                self.acc(grads, *a, g.clone());
                self.acc(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.acc(grads, *a, g.clone());
                self.acc_with(grads, *b, || g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (a, b) = (*a, *b);
                self.acc_with(grads, a, || hadamard(g, self.value(b)));
                self.acc_with(grads, b, || hadamard(g, self.value(a)));
            }
            Op::AddRow(a, row) => {
                self.acc(grads, *a, g.clone());
                self.acc_with(grads, *row, || {
                    let mut s = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, &x) in s.data_mut().iter_mut().zip(g.row(r)) {
                            *o += x;
                        }
                    }
                    s
                });
            }
            Op::Scale(a, c) => {
                let c = *c;
                self.acc_with(grads, *a, || g.map(|x| x * c));
            }
            Op::AddScalar(a) => self.acc(grads, *a, g.clone()),
            Op::Sigmoid(a) => {
                let y = &node.value;
                self.acc_with(grads, *a, || zip_map(g, y, |gi, yi| gi * yi * (1.0 - yi)));
            }
            Op::Tanh(a) => {
                let y = &node.value;
                let k = match self.fault {
                    Some(Fault::TanhGradScale(k)) => k,
                    None => 1.0,
                };
                self.acc_with(grads, *a, || zip_map(g, y, |gi, yi| k * gi * (1.0 - yi * yi)));
            }
            Op::Relu(a) => {
                let x = self.value(*a);
                self.acc_with(grads, *a, || zip_map(g, x, |gi, xi| if xi > 0.0 { gi } else { 0.0 }));
            }
            Op::RowSoftmax(a) => {
                let y = &node.value;
                self.acc_with(grads, *a, || {
                    let mut out = Tensor::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for ((o, &yi), &gi) in out.row_mut(r).iter_mut().zip(yr).zip(gr) {
                            *o = yi * (gi - dot);
                        }
                    }
                    out
                });
            }
            Op::RowLogSoftmax(a) => {
                let y = &node.value;
                self.acc_with(grads, *a, || {
                    let mut out = Tensor::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let gsum: f64 = gr.iter().sum();
                        for ((o, &yi), &gi) in out.row_mut(r).iter_mut().zip(yr).zip(gr) {
                            *o = gi - yi.exp() * gsum;
                        }
                    }
                    out
                });
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let c = self.value(p).cols();
                    self.acc_with(grads, p, || {
                        let mut out = Tensor::zeros(g.rows(), c);
                        for r in 0..g.rows() {
                            out.row_mut(r).copy_from_slice(&g.row(r)[off..off + c]);
                        }
                        out
                    });
                    off += c;
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let (r, c) = self.shape(p);
                    self.acc_with(grads, p, || Tensor::from_vec(r, c, g.data()[off * c..(off + r) * c].to_vec()));
                    off += r;
                }
            }
            Op::ColMax { input, argmax } => {
                let (r, c) = self.shape(*input);
                self.acc_with(grads, *input, || {
                    let mut out = Tensor::zeros(r, c);
                    for (col, &row) in argmax.iter().enumerate() {
                        out.set(row, col, g.get(0, col));
                    }
                    out
                });
            }
            Op::Unfold { input, width } => {
                let (r, d) = self.shape(*input);
                let width = *width;
                self.acc_with(grads, *input, || {
                    let mut out = Tensor::zeros(r, d);
                    for w in 0..g.rows() {
                        let grow = g.row(w);
                        for j in 0..width {
                            let dst = w + j;
                            if dst < r {
                                for (o, &x) in out.row_mut(dst).iter_mut().zip(&grow[j * d..(j + 1) * d]) {
                                    *o += x;
                                }
                            }
                        }
                    }
                    out
                });
            }
            Op::Gather { input, index } => {
                let (r, c) = self.shape(*input);
                self.acc_with(grads, *input, || {
                    let mut out = Tensor::zeros(r, c);
                    for (k, &i) in index.iter().enumerate() {
                        out.data_mut()[i] += g.data()[k];
                    }
                    out
                });
            }
            Op::LnClamped { input, eps } => {
                let x = self.value(*input);
                let eps = *eps;
                self.acc_with(grads, *input, || zip_map(g, x, |gi, xi| if xi > eps { gi / xi } else { 0.0 }));
            }
            Op::Sum(a) => {
                let (r, c) = self.shape(*a);
                self.acc(grads, *a, Tensor::filled(r, c, g.item()));
            }
            Op::Mean(a) => {
                let (r, c) = self.shape(*a);
                self.acc(grads, *a, Tensor::filled(r, c, g.item() / (r * c) as f64));
            }
            Op::Mask { input, keep } => {
                self.acc_with(grads, *input, || {
                    let mut out = g.clone();
                    for (x, &k) in out.data_mut().iter_mut().zip(keep) {
                        if !k {
                            *x = 0.0;
                        }
                    }
                    out
                });
            }
        }
    }
}

fn hadamard(a: &Tensor, b: &Tensor) -> Tensor {
    zip_map(a, b, |x, y| x * y)
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_vec(a.rows(), a.cols(), data)
}
