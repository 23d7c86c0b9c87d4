use std::collections::BTreeMap;
use std::sync::Arc;

use super::array::{masked_softmax_slice, NumArray};
use super::store::ParamStore;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Val(usize);

#[derive(Debug)]
enum Op {
    Leaf { param: Option<String> },
    Add(Val, Val),
    Sub(Val, Val),
    Mul(Val, Val),
    Scale(Val, f64),
    MatVec(Val, Val),
    Dot(Val, Val),
    Concat(Val, Val),
    Slice { src: Val, start: usize, len: usize },
    Row { src: Val, index: usize },
    Pick { src: Val, index: usize },
    Sigmoid(Val),
    Tanh(Val),
    LeakyRelu(Val, f64),
    Elu(Val),
    Ln(Val),
    Sum(Val),
    StackScalars(Vec<Val>),
    WeightedSum { weights: Val, items: Vec<Val> },
    MaskedSoftmax { logits: Val, support: Vec<bool> },
    LogSoftmaxPick { logits: Val, support: Vec<bool>, index: usize },
}

struct Node {
    value: Arc<NumArray>,
    op: Op,
}

/// Recorded forward computation; reverse walk produces gradients.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Per-node gradients produced by [`Tape::backward`].
pub struct Gradients {
    by_node: Vec<Option<NumArray>>,
}

impl Gradients {
    pub fn get(&self, v: Val) -> Option<&NumArray> {
        self.by_node[v.0].as_ref()
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

    pub fn value(&self, v: Val) -> &NumArray {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: NumArray, op: Op) -> Val {
        self.nodes.push(Node { value: Arc::new(value), op });
        Val(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: NumArray) -> Val {
        self.push(value, Op::Leaf { param: None })
    }

    pub fn leaf_shared(&mut self, value: Arc<NumArray>) -> Val {
        self.nodes.push(Node { value, op: Op::Leaf { param: None } });
        Val(self.nodes.len() - 1)
    }

    pub fn scalar(&mut self, v: f64) -> Val {
        self.leaf(NumArray::scalar(v))
    }

    /// Shares a named parameter from the store; gradients accumulate under its name.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Val> {
        let arr = store.shared(name)?;
        self.nodes.push(Node { value: arr, op: Op::Leaf { param: Some(name.to_string()) } });
        Ok(Val(self.nodes.len() - 1))
    }

    pub fn add(&mut self, a: Val, b: Val) -> Val {
        let mut out = (*self.nodes[a.0].value).clone();
        out.add_scaled(&self.nodes[b.0].value, 1.0);
        self.push(out, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Val, b: Val) -> Val {
        let mut out = (*self.nodes[a.0].value).clone();
        out.add_scaled(&self.nodes[b.0].value, -1.0);
        self.push(out, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Val, b: Val) -> Val {
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        debug_assert_eq!(av.shape(), bv.shape());
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let out = NumArray::new(av.shape().to_vec(), data).expect("mul shape");
        self.push(out, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Val, c: f64) -> Val {
        let av = &self.nodes[a.0].value;
        let data = av.data().iter().map(|x| c * x).collect();
        let out = NumArray::new(av.shape().to_vec(), data).expect("scale shape");
        self.push(out, Op::Scale(a, c))
    }

    /// `w[m x n] * x[n] -> [m]`
    pub fn matvec(&mut self, w: Val, x: Val) -> Val {
        let wv = &self.nodes[w.0].value;
        let xv = &self.nodes[x.0].value;
        let out = NumArray::vector(wv.matvec(xv.data()));
        self.push(out, Op::MatVec(w, x))
    }

    pub fn dot(&mut self, a: Val, b: Val) -> Val {
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        let out = NumArray::scalar(super::array::dot(av.data(), bv.data()));
        self.push(out, Op::Dot(a, b))
    }

    pub fn concat(&mut self, a: Val, b: Val) -> Val {
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        let mut data = Vec::with_capacity(av.len() + bv.len());
        data.extend_from_slice(av.data());
        data.extend_from_slice(bv.data());
        self.push(NumArray::vector(data), Op::Concat(a, b))
    }

    pub fn slice(&mut self, src: Val, start: usize, len: usize) -> Val {
        let sv = &self.nodes[src.0].value;
        let out = NumArray::vector(sv.data()[start..start + len].to_vec());
        self.push(out, Op::Slice { src, start, len })
    }

    /// Row of a rank-2 value; the embedding-lookup primitive. Gradient flows
    /// only into the selected row.
    pub fn row(&mut self, src: Val, index: usize) -> Result<Val> {
        let sv = &self.nodes[src.0].value;
        if index >= sv.rows() {
            return Err(Error::IndexOutOfRange { index, len: sv.rows() });
        }
        let out = NumArray::vector(sv.row(index).to_vec());
        Ok(self.push(out, Op::Row { src, index }))
    }

    pub fn pick(&mut self, src: Val, index: usize) -> Result<Val> {
        let sv = &self.nodes[src.0].value;
        if index >= sv.len() {
            return Err(Error::IndexOutOfRange { index, len: sv.len() });
        }
        let out = NumArray::scalar(sv.data()[index]);
        Ok(self.push(out, Op::Pick { src, index }))
    }

    fn unary(&mut self, a: Val, f: impl Fn(f64) -> f64, op: Op) -> Val {
        let av = &self.nodes[a.0].value;
        let data = av.data().iter().map(|&x| f(x)).collect();
        let out = NumArray::new(av.shape().to_vec(), data).expect("unary shape");
        self.push(out, op)
    }

    pub fn sigmoid(&mut self, a: Val) -> Val {
        self.unary(a, super::array::sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Val) -> Val {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn leaky_relu(&mut self, a: Val, alpha: f64) -> Val {
        self.unary(a, |x| if x > 0.0 { x } else { alpha * x }, Op::LeakyRelu(a, alpha))
    }

    pub fn elu(&mut self, a: Val) -> Val {
        self.unary(a, |x| if x > 0.0 { x } else { x.exp() - 1.0 }, Op::Elu(a))
    }

    pub fn ln(&mut self, a: Val) -> Val {
        self.unary(a, f64::ln, Op::Ln(a))
    }

    pub fn sum(&mut self, a: Val) -> Val {
        let s: f64 = self.nodes[a.0].value.data().iter().sum();
        self.push(NumArray::scalar(s), Op::Sum(a))
    }

    pub fn stack_scalars(&mut self, items: &[Val]) -> Val {
        let data: Vec<f64> = items.iter().map(|v| self.nodes[v.0].value.as_scalar()).collect();
        self.push(NumArray::vector(data), Op::StackScalars(items.to_vec()))
    }

    /// `sum_k weights[k] * items[k]` where items are equal-length vectors.
    pub fn weighted_sum(&mut self, weights: Val, items: &[Val]) -> Val {
        let wv = self.nodes[weights.0].value.clone();
        debug_assert_eq!(wv.len(), items.len());
        let d = self.nodes[items[0].0].value.len();
        let mut out = vec![0.0; d];
        for (k, item) in items.iter().enumerate() {
            let iv = &self.nodes[item.0].value;
            let w = wv.data()[k];
            for (o, x) in out.iter_mut().zip(iv.data()) {
                *o += w * x;
            }
        }
        self.push(NumArray::vector(out), Op::WeightedSum { weights, items: items.to_vec() })
    }

    /// Softmax restricted to `support`; non-support entries are exactly 0.
    pub fn masked_softmax(&mut self, logits: Val, support: &[bool]) -> Result<Val> {
        let lv = &self.nodes[logits.0].value;
        let out = NumArray::vector(masked_softmax_slice(lv.data(), support)?);
        Ok(self.push(out, Op::MaskedSoftmax { logits, support: support.to_vec() }))
    }

    /// log softmax(logits over support)[index] as a scalar; `index` must be in support.
    pub fn log_softmax_pick(&mut self, logits: Val, support: &[bool], index: usize) -> Result<Val> {
        if !support.get(index).copied().unwrap_or(false) {
            return Err(Error::IndexOutOfRange { index, len: support.len() });
        }
        let lv = self.nodes[logits.0].value.data();
        let mut max = f64::NEG_INFINITY;
        for (l, &m) in lv.iter().zip(support) {
            if m && *l > max {
                max = *l;
            }
        }
        if max == f64::NEG_INFINITY {
            return Err(Error::NoCandidate);
        }
        let mut denom = 0.0;
        for (l, &m) in lv.iter().zip(support) {
            if m {
                denom += (l - max).exp();
            }
        }
        let logp = lv[index] - max - denom.ln();
        Ok(self.push(
            NumArray::scalar(logp),
            Op::LogSoftmaxPick { logits, support: support.to_vec(), index },
        ))
    }

    /// Reverse pass from a scalar loss node.
    pub fn backward(&self, loss: Val) -> Result<Gradients> {
        let lv = &self.nodes[loss.0].value;
        if lv.len() != 1 {
            return Err(Error::ShapeMismatch {
                expected: "scalar loss".into(),
                got: format!("{:?}", lv.shape()),
            });
        }
        if !lv.as_scalar().is_finite() {
            return Err(Error::Numeric(format!("non-finite loss {}", lv.as_scalar())));
        }
        let mut grads: Vec<Option<NumArray>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(NumArray::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(up) = grads[idx].take() else { continue };
            self.propagate(idx, &up, &mut grads);
            grads[idx] = Some(up);
        }
        Ok(Gradients { by_node: grads })
    }

    fn grad_slot<'a>(
        &self,
        grads: &'a mut [Option<NumArray>],
        v: Val,
    ) -> &'a mut NumArray {
        let slot = &mut grads[v.0];
        if slot.is_none() {
            *slot = Some(NumArray::zeros(self.nodes[v.0].value.shape().to_vec()));
        }
        slot.as_mut().unwrap()
    }

    fn propagate(&self, idx: usize, up: &NumArray, grads: &mut [Option<NumArray>]) {
        match &self.nodes[idx].op {
            Op::Leaf { .. } => {}
            Op::Add(a, b) => {
                self.grad_slot(grads, *a).add_scaled(up, 1.0);
                self.grad_slot(grads, *b).add_scaled(up, 1.0);
            }
            Op::Sub(a, b) => {
                self.grad_slot(grads, *a).add_scaled(up, 1.0);
                self.grad_slot(grads, *b).add_scaled(up, -1.0);
            }
            Op::Mul(a, b) => {
                let av = self.nodes[a.0].value.clone();
                let bv = self.nodes[b.0].value.clone();
                {
                    let ga = self.grad_slot(grads, *a);
                    for ((g, u), y) in ga.data_mut().iter_mut().zip(up.data()).zip(bv.data()) {
                        *g += u * y;
                    }
                }
                let gb = self.grad_slot(grads, *b);
                for ((g, u), x) in gb.data_mut().iter_mut().zip(up.data()).zip(av.data()) {
                    *g += u * x;
                }
            }
            Op::Scale(a, c) => {
                self.grad_slot(grads, *a).add_scaled(up, *c);
            }
            Op::MatVec(w, x) => {
                let wv = self.nodes[w.0].value.clone();
                let xv = self.nodes[x.0].value.clone();
                let (m, n) = (wv.rows(), wv.cols());
                {
                    let gw = self.grad_slot(grads, *w);
                    for i in 0..m {
                        let u = up.data()[i];
                        if u == 0.0 {
                            continue;
                        }
                        let row = gw.row_mut(i);
                        for (g, v) in row.iter_mut().zip(xv.data()) {
                            *g += u * v;
                        }
                    }
                }
                let gx = self.grad_slot(grads, *x);
                for i in 0..m {
                    let u = up.data()[i];
                    if u == 0.0 {
                        continue;
                    }
                    let row = wv.row(i);
                    for j in 0..n {
                        gx.data_mut()[j] += u * row[j];
                    }
                }
            }
            Op::Dot(a, b) => {
                let u = up.as_scalar();
                let av = self.nodes[a.0].value.clone();
                let bv = self.nodes[b.0].value.clone();
                self.grad_slot(grads, *a).add_scaled(&bv, u);
                self.grad_slot(grads, *b).add_scaled(&av, u);
            }
            Op::Concat(a, b) => {
                let alen = self.nodes[a.0].value.len();
                {
                    let ga = self.grad_slot(grads, *a);
                    for (g, u) in ga.data_mut().iter_mut().zip(&up.data()[..alen]) {
                        *g += u;
                    }
                }
                let gb = self.grad_slot(grads, *b);
                for (g, u) in gb.data_mut().iter_mut().zip(&up.data()[alen..]) {
                    *g += u;
                }
            }
            Op::Slice { src, start, len } => {
                let gs = self.grad_slot(grads, *src);
                for (g, u) in gs.data_mut()[*start..start + len].iter_mut().zip(up.data()) {
                    *g += u;
                }
            }
            Op::Row { src, index } => {
                let gs = self.grad_slot(grads, *src);
                let row = gs.row_mut(*index);
                for (g, u) in row.iter_mut().zip(up.data()) {
                    *g += u;
                }
            }
            Op::Pick { src, index } => {
                let u = up.as_scalar();
                self.grad_slot(grads, *src).data_mut()[*index] += u;
            }
            Op::Sigmoid(a) => {
                let y = self.nodes[idx].value.clone();
                let ga = self.grad_slot(grads, *a);
                for ((g, u), y) in ga.data_mut().iter_mut().zip(up.data()).zip(y.data()) {
                    *g += u * y * (1.0 - y);
                }
            }
            Op::Tanh(a) => {
                let y = self.nodes[idx].value.clone();
                let ga = self.grad_slot(grads, *a);
                for ((g, u), y) in ga.data_mut().iter_mut().zip(up.data()).zip(y.data()) {
                    *g += u * (1.0 - y * y);
                }
            }
            Op::LeakyRelu(a, alpha) => {
                let xv = self.nodes[a.0].value.clone();
                let ga = self.grad_slot(grads, *a);
                for ((g, u), x) in ga.data_mut().iter_mut().zip(up.data()).zip(xv.data()) {
                    *g += u * if *x > 0.0 { 1.0 } else { *alpha };
                }
            }
            Op::Elu(a) => {
                let xv = self.nodes[a.0].value.clone();
                let yv = self.nodes[idx].value.clone();
                let ga = self.grad_slot(grads, *a);
                for (((g, u), x), y) in
                    ga.data_mut().iter_mut().zip(up.data()).zip(xv.data()).zip(yv.data())
                {
                    *g += u * if *x > 0.0 { 1.0 } else { y + 1.0 };
                }
            }
            Op::Ln(a) => {
                let xv = self.nodes[a.0].value.clone();
                let ga = self.grad_slot(grads, *a);
                for ((g, u), x) in ga.data_mut().iter_mut().zip(up.data()).zip(xv.data()) {
                    *g += u / x;
                }
            }
            Op::Sum(a) => {
                let u = up.as_scalar();
                let ga = self.grad_slot(grads, *a);
                for g in ga.data_mut() {
                    *g += u;
                }
            }
            Op::StackScalars(items) => {
                for (k, item) in items.iter().enumerate() {
                    let u = up.data()[k];
                    self.grad_slot(grads, *item).data_mut()[0] += u;
                }
            }
            Op::WeightedSum { weights, items } => {
                let wv = self.nodes[weights.0].value.clone();
                for (k, item) in items.iter().enumerate() {
                    let iv = self.nodes[item.0].value.clone();
                    self.grad_slot(grads, *weights).data_mut()[k] +=
                        super::array::dot(up.data(), iv.data());
                    self.grad_slot(grads, *item).add_scaled(up, wv.data()[k]);
                }
            }
            Op::MaskedSoftmax { logits, support } => {
                let y = self.nodes[idx].value.clone();
                let mut inner = 0.0;
                for k in 0..y.len() {
                    if support[k] {
                        inner += up.data()[k] * y.data()[k];
                    }
                }
                let gl = self.grad_slot(grads, *logits);
                for k in 0..y.len() {
                    if support[k] {
                        gl.data_mut()[k] += y.data()[k] * (up.data()[k] - inner);
                    }
                }
            }
            Op::LogSoftmaxPick { logits, support, index } => {
                let u = up.as_scalar();
                let lv = self.nodes[logits.0].value.clone();
                let p = masked_softmax_slice(lv.data(), support).expect("support checked");
                let gl = self.grad_slot(grads, *logits);
                for k in 0..p.len() {
                    if support[k] {
                        let delta = if k == *index { 1.0 } else { 0.0 };
                        gl.data_mut()[k] += u * (delta - p[k]);
                    }
                }
            }
        }
    }

    /// Accumulates parameter-leaf gradients into a name-keyed map.
    pub fn param_grads(&self, grads: &Gradients) -> BTreeMap<String, NumArray> {
        let mut out = BTreeMap::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            if let Op::Leaf { param: Some(name) } = &node.op {
                if let Some(g) = &grads.by_node[idx] {
                    out.entry(name.clone())
                        .and_modify(|acc: &mut NumArray| acc.add_scaled(g, 1.0))
                        .or_insert_with(|| g.clone());
                }
            }
        }
        out
    }
}
