use rand::Rng;

use super::array::{dot, sigmoid, NumArray};
use super::store::ParamStore;
use super::tape::{Tape, Val};
use crate::error::{Error, Result};

/// Negative slope of the leaky ReLU used for graph-attention logits.
pub const GAT_LEAKY_SLOPE: f64 = 0.2;

/// Row lookup with index validation; gradient flows only into that row.
pub fn embedding_lookup_tape(t: &mut Tape, table: Val, index: usize) -> Result<Val> {
    t.row(table, index)
}

pub fn embedding_lookup_infer(table: &NumArray, index: usize) -> Result<Vec<f64>> {
    if index >= table.rows() {
        return Err(Error::IndexOutOfRange { index, len: table.rows() });
    }
    Ok(table.row(index).to_vec())
}

/// Gated recurrent cell: fused weight `w [4H x (D+H)]`, bias `b [4H]`.
/// Gate layout along rows: input, forget, output, candidate.
#[derive(Debug, Clone)]
pub struct LstmSpec {
    pub prefix: String,
    pub input_dim: usize,
    pub hidden: usize,
}

impl LstmSpec {
    pub fn new(prefix: &str, input_dim: usize, hidden: usize) -> Self {
        Self { prefix: prefix.to_string(), input_dim, hidden }
    }

    fn w_name(&self) -> String {
        format!("{}.w", self.prefix)
    }

    fn b_name(&self) -> String {
        format!("{}.b", self.prefix)
    }

    pub fn init_params(&self, store: &mut ParamStore, rng: &mut impl Rng) {
        let rows = 4 * self.hidden;
        let cols = self.input_dim + self.hidden;
        store.insert(&self.w_name(), NumArray::xavier(rows, cols, rng));
        // forget-gate bias starts at 1
        let mut b = vec![0.0; rows];
        for v in b.iter_mut().take(2 * self.hidden).skip(self.hidden) {
            *v = 1.0;
        }
        store.insert(&self.b_name(), NumArray::vector(b));
    }

    pub fn vals(&self, t: &mut Tape, store: &ParamStore) -> Result<(Val, Val)> {
        Ok((t.param(store, &self.w_name())?, t.param(store, &self.b_name())?))
    }

    pub fn zero_state(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; self.hidden], vec![0.0; self.hidden])
    }

    pub fn step_tape(
        &self,
        t: &mut Tape,
        w: Val,
        b: Val,
        x: Val,
        h_prev: Val,
        c_prev: Val,
    ) -> (Val, Val) {
        let hn = self.hidden;
        let xh = t.concat(x, h_prev);
        let zlin = t.matvec(w, xh);
        let z = t.add(zlin, b);
        let zi = t.slice(z, 0, hn);
        let zf = t.slice(z, hn, hn);
        let zo = t.slice(z, 2 * hn, hn);
        let zg = t.slice(z, 3 * hn, hn);
        let i = t.sigmoid(zi);
        let f = t.sigmoid(zf);
        let o = t.sigmoid(zo);
        let g = t.tanh(zg);
        let fc = t.mul(f, c_prev);
        let ig = t.mul(i, g);
        let c = t.add(fc, ig);
        let ct = t.tanh(c);
        let h = t.mul(o, ct);
        (h, c)
    }

    pub fn step_infer(
        &self,
        store: &ParamStore,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.input_dim || h_prev.len() != self.hidden || c_prev.len() != self.hidden {
            return Err(Error::ShapeMismatch {
                expected: format!("x[{}], h[{}], c[{}]", self.input_dim, self.hidden, self.hidden),
                got: format!("x[{}], h[{}], c[{}]", x.len(), h_prev.len(), c_prev.len()),
            });
        }
        let w = store.arr(&self.w_name())?;
        let b = store.arr(&self.b_name())?;
        let mut xh = Vec::with_capacity(x.len() + h_prev.len());
        xh.extend_from_slice(x);
        xh.extend_from_slice(h_prev);
        let mut z = w.matvec(&xh);
        for (zv, bv) in z.iter_mut().zip(b.data()) {
            *zv += bv;
        }
        let hn = self.hidden;
        let mut h = vec![0.0; hn];
        let mut c = vec![0.0; hn];
        for k in 0..hn {
            let i = sigmoid(z[k]);
            let f = sigmoid(z[hn + k]);
            let o = sigmoid(z[2 * hn + k]);
            let g = z[3 * hn + k].tanh();
            c[k] = f * c_prev[k] + i * g;
            h[k] = o * c[k].tanh();
        }
        Ok((h, c))
    }
}

/// Dot-product attention of the last state against the whole sequence:
/// returns `sum_k softmax_k(h_i . h_k) h_k`.
pub fn dot_attention_tape(t: &mut Tape, states: &[Val]) -> Result<Val> {
    if states.is_empty() {
        return Err(Error::EmptyInput("attention over empty sequence".into()));
    }
    let last = *states.last().unwrap();
    let logits: Vec<Val> = states.iter().map(|&s| t.dot(last, s)).collect();
    let logits = t.stack_scalars(&logits);
    let support = vec![true; states.len()];
    let weights = t.masked_softmax(logits, &support)?;
    Ok(t.weighted_sum(weights, states))
}

pub fn dot_attention_infer(states: &[Vec<f64>]) -> Result<Vec<f64>> {
    if states.is_empty() {
        return Err(Error::EmptyInput("attention over empty sequence".into()));
    }
    let last = states.last().unwrap();
    let logits: Vec<f64> = states.iter().map(|s| dot(last, s)).collect();
    let support = vec![true; states.len()];
    let weights = super::array::masked_softmax_slice(&logits, &support)?;
    let mut out = vec![0.0; last.len()];
    for (w, s) in weights.iter().zip(states) {
        for (o, v) in out.iter_mut().zip(s) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// One graph-attention layer. Each node aggregates linearly transformed
/// features over its in-neighborhood (self-loop expected in `neighbors`),
/// attention-weighted, followed by an ELU.
#[derive(Debug, Clone)]
pub struct GatSpec {
    pub prefix: String,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl GatSpec {
    pub fn new(prefix: &str, input_dim: usize, output_dim: usize) -> Self {
        Self { prefix: prefix.to_string(), input_dim, output_dim }
    }

    fn w_name(&self) -> String {
        format!("{}.w", self.prefix)
    }

    fn a_src_name(&self) -> String {
        format!("{}.a_src", self.prefix)
    }

    fn a_dst_name(&self) -> String {
        format!("{}.a_dst", self.prefix)
    }

    pub fn init_params(&self, store: &mut ParamStore, rng: &mut impl Rng) {
        store.insert(&self.w_name(), NumArray::xavier(self.output_dim, self.input_dim, rng));
        let bound = (3.0 / self.output_dim as f64).sqrt();
        let a = |rng: &mut dyn rand::RngCore| {
            NumArray::vector((0..self.output_dim).map(|_| rng.gen_range(-bound..bound)).collect())
        };
        store.insert(&self.a_dst_name(), a(rng));
        store.insert(&self.a_src_name(), a(rng));
    }

    pub fn vals(&self, t: &mut Tape, store: &ParamStore) -> Result<(Val, Val, Val)> {
        Ok((
            t.param(store, &self.w_name())?,
            t.param(store, &self.a_dst_name())?,
            t.param(store, &self.a_src_name())?,
        ))
    }

    /// Tape forward over per-node feature vals. `neighbors[i]` lists source
    /// node indices (including `i` itself for the self-loop).
    pub fn layer_tape(
        &self,
        t: &mut Tape,
        w: Val,
        a_dst: Val,
        a_src: Val,
        feats: &[Val],
        neighbors: &[Vec<usize>],
        node_ids: &[u64],
    ) -> Result<Vec<Val>> {
        let transformed: Vec<Val> = feats.iter().map(|&f| t.matvec(w, f)).collect();
        let dst_score: Vec<Val> = transformed.iter().map(|&v| t.dot(a_dst, v)).collect();
        let src_score: Vec<Val> = transformed.iter().map(|&v| t.dot(a_src, v)).collect();
        let mut out = Vec::with_capacity(feats.len());
        for (i, nbrs) in neighbors.iter().enumerate() {
            if nbrs.is_empty() {
                return Err(Error::IsolatedNode(node_ids[i]));
            }
            let logits: Vec<Val> = nbrs
                .iter()
                .map(|&j| {
                    let s = t.add(dst_score[i], src_score[j]);
                    t.leaky_relu(s, GAT_LEAKY_SLOPE)
                })
                .collect();
            let logits = t.stack_scalars(&logits);
            let support = vec![true; nbrs.len()];
            let weights = t.masked_softmax(logits, &support)?;
            let items: Vec<Val> = nbrs.iter().map(|&j| transformed[j]).collect();
            let agg = t.weighted_sum(weights, &items);
            out.push(t.elu(agg));
        }
        Ok(out)
    }

    pub fn layer_infer(
        &self,
        store: &ParamStore,
        feats: &NumArray,
        neighbors: &[Vec<usize>],
        node_ids: &[u64],
    ) -> Result<NumArray> {
        if feats.cols() != self.input_dim {
            return Err(Error::ShapeMismatch {
                expected: format!("features of width {}", self.input_dim),
                got: format!("{}", feats.cols()),
            });
        }
        let w = store.arr(&self.w_name())?;
        let a_dst = store.arr(&self.a_dst_name())?;
        let a_src = store.arr(&self.a_src_name())?;
        let n = feats.rows();
        let d = self.output_dim;
        let mut transformed = Vec::with_capacity(n);
        let mut dst_score = vec![0.0; n];
        let mut src_score = vec![0.0; n];
        for i in 0..n {
            let tv = w.matvec(feats.row(i));
            dst_score[i] = dot(a_dst.data(), &tv);
            src_score[i] = dot(a_src.data(), &tv);
            transformed.push(tv);
        }
        let mut out = NumArray::zeros(vec![n, d]);
        for (i, nbrs) in neighbors.iter().enumerate() {
            let weights = self.attention_row(i, nbrs, &dst_score, &src_score, node_ids)?;
            let row = out.row_mut(i);
            for (wgt, &j) in weights.iter().zip(nbrs) {
                for (o, v) in row.iter_mut().zip(&transformed[j]) {
                    *o += wgt * v;
                }
            }
            for o in row.iter_mut() {
                *o = if *o > 0.0 { *o } else { o.exp() - 1.0 };
            }
        }
        Ok(out)
    }

    /// Attention weights of one node's neighborhood (sums to 1).
    pub fn attention_row(
        &self,
        i: usize,
        nbrs: &[usize],
        dst_score: &[f64],
        src_score: &[f64],
        node_ids: &[u64],
    ) -> Result<Vec<f64>> {
        if nbrs.is_empty() {
            return Err(Error::IsolatedNode(node_ids[i]));
        }
        let logits: Vec<f64> = nbrs
            .iter()
            .map(|&j| {
                let s = dst_score[i] + src_score[j];
                if s > 0.0 {
                    s
                } else {
                    GAT_LEAKY_SLOPE * s
                }
            })
            .collect();
        let support = vec![true; nbrs.len()];
        super::array::masked_softmax_slice(&logits, &support)
    }
}

/// How the final MLP layer is activated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutAct {
    Linear,
    Sigmoid,
}

/// Fully connected network with tanh hidden layers.
#[derive(Debug, Clone)]
pub struct MlpSpec {
    pub prefix: String,
    pub dims: Vec<usize>,
    pub out_act: OutAct,
}

impl MlpSpec {
    pub fn new(prefix: &str, dims: Vec<usize>, out_act: OutAct) -> Self {
        debug_assert!(dims.len() >= 2);
        Self { prefix: prefix.to_string(), dims, out_act }
    }

    fn w_name(&self, layer: usize) -> String {
        format!("{}.w{layer}", self.prefix)
    }

    fn b_name(&self, layer: usize) -> String {
        format!("{}.b{layer}", self.prefix)
    }

    pub fn layer_count(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn init_params(&self, store: &mut ParamStore, rng: &mut impl Rng) {
        for l in 0..self.layer_count() {
            store.insert(&self.w_name(l), NumArray::xavier(self.dims[l + 1], self.dims[l], rng));
            store.insert(&self.b_name(l), NumArray::vector(vec![0.0; self.dims[l + 1]]));
        }
    }

    pub fn vals(&self, t: &mut Tape, store: &ParamStore) -> Result<Vec<(Val, Val)>> {
        (0..self.layer_count())
            .map(|l| Ok((t.param(store, &self.w_name(l))?, t.param(store, &self.b_name(l))?)))
            .collect()
    }

    pub fn forward_tape(&self, t: &mut Tape, layers: &[(Val, Val)], input: Val) -> Result<Val> {
        if t.value(input).len() != self.dims[0] {
            return Err(Error::ShapeMismatch {
                expected: format!("input[{}]", self.dims[0]),
                got: format!("{}", t.value(input).len()),
            });
        }
        let mut x = input;
        for (l, &(w, b)) in layers.iter().enumerate() {
            let z = t.matvec(w, x);
            let z = t.add(z, b);
            x = if l + 1 < layers.len() {
                t.tanh(z)
            } else {
                match self.out_act {
                    OutAct::Linear => z,
                    OutAct::Sigmoid => t.sigmoid(z),
                }
            };
        }
        Ok(x)
    }

    pub fn forward_infer(&self, store: &ParamStore, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.dims[0] {
            return Err(Error::ShapeMismatch {
                expected: format!("input[{}]", self.dims[0]),
                got: format!("{}", input.len()),
            });
        }
        let mut x = input.to_vec();
        for l in 0..self.layer_count() {
            let w = store.arr(&self.w_name(l))?;
            let b = store.arr(&self.b_name(l))?;
            let mut z = w.matvec(&x);
            for (zv, bv) in z.iter_mut().zip(b.data()) {
                *zv += bv;
            }
            if l + 1 < self.layer_count() {
                z.iter_mut().for_each(|v| *v = v.tanh());
            } else if self.out_act == OutAct::Sigmoid {
                z.iter_mut().for_each(|v| *v = sigmoid(*v));
            }
            x = z;
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn embedding_lookup_returns_requested_row() {
        let table = NumArray::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(embedding_lookup_infer(&table, 1).unwrap(), vec![4.0, 5.0, 6.0]);
        assert!(embedding_lookup_infer(&table, 2).is_err());
    }

    #[test]
    fn lstm_zero_params_zero_input_gives_zero_hidden() {
        let spec = LstmSpec::new("cell", 3, 4);
        let mut store = ParamStore::new();
        store.insert("cell.w", NumArray::zeros(vec![16, 7]));
        store.insert("cell.b", NumArray::vector(vec![0.0; 16]));
        let (h0, c0) = spec.zero_state();
        let (h, _c) = spec.step_infer(&store, &[0.0; 3], &h0, &c0).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lstm_hidden_bounded_by_one() {
        let spec = LstmSpec::new("cell", 5, 6);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        spec.init_params(&mut store, &mut rng);
        let (mut h, mut c) = spec.zero_state();
        for step in 0..50 {
            let x: Vec<f64> =
                (0..5).map(|k| ((step * 7 + k) as f64 * 0.77).sin() * 3.0).collect();
            let (h2, c2) = spec.step_infer(&store, &x, &h, &c).unwrap();
            h = h2;
            c = c2;
            assert!(h.iter().all(|&v| v.abs() < 1.0 && v.is_finite()));
        }
    }

    #[test]
    fn lstm_shape_mismatch_is_error() {
        let spec = LstmSpec::new("cell", 3, 4);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        spec.init_params(&mut store, &mut rng);
        let (h0, c0) = spec.zero_state();
        assert!(matches!(
            spec.step_infer(&store, &[0.0; 2], &h0, &c0),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn lstm_tape_matches_infer() {
        let spec = LstmSpec::new("cell", 3, 4);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        spec.init_params(&mut store, &mut rng);
        let x = vec![0.3, -1.2, 0.5];
        let (h0, c0) = spec.zero_state();
        let (hi, ci) = spec.step_infer(&store, &x, &h0, &c0).unwrap();

        let mut t = Tape::new();
        let (w, b) = spec.vals(&mut t, &store).unwrap();
        let xv = t.leaf(NumArray::vector(x));
        let hv = t.leaf(NumArray::vector(h0));
        let cv = t.leaf(NumArray::vector(c0));
        let (ht, ct) = spec.step_tape(&mut t, w, b, xv, hv, cv);
        for (a, b) in hi.iter().zip(t.value(ht).data()) {
            assert!((a - b).abs() < 1e-15);
        }
        for (a, b) in ci.iter().zip(t.value(ct).data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn attention_single_state_is_identity() {
        let s = vec![vec![0.4, -0.7, 2.0]];
        assert_eq!(dot_attention_infer(&s).unwrap(), s[0]);
    }

    #[test]
    fn attention_identical_states_returns_that_state() {
        let s = vec![vec![1.5, -2.0], vec![1.5, -2.0]];
        assert_eq!(dot_attention_infer(&s).unwrap(), s[0]);
    }

    #[test]
    fn attention_hand_computed_two_by_two() {
        // states (1,0),(0,1): logits are dot((0,1),(1,0))=0 and dot((0,1),(0,1))=1,
        // weights (1, e)/(1+e) applied to the states.
        let s = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let out = dot_attention_infer(&s).unwrap();
        let e = 1.0_f64.exp();
        let w0 = 1.0 / (1.0 + e);
        let w1 = e / (1.0 + e);
        assert!((out[0] - w0).abs() < 1e-15);
        assert!((out[1] - w1).abs() < 1e-15);
    }

    #[test]
    fn attention_empty_is_error() {
        assert!(dot_attention_infer(&[]).is_err());
    }

    #[test]
    fn attention_tape_matches_infer() {
        let states = vec![vec![0.2, 0.9], vec![-0.4, 0.1], vec![0.7, -0.3]];
        let infer = dot_attention_infer(&states).unwrap();
        let mut t = Tape::new();
        let vals: Vec<Val> =
            states.iter().map(|s| t.leaf(NumArray::vector(s.clone()))).collect();
        let out = dot_attention_tape(&mut t, &vals).unwrap();
        for (a, b) in infer.iter().zip(t.value(out).data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn gat_single_node_self_loop_is_activated_transform() {
        let spec = GatSpec::new("gat0", 2, 2);
        let mut store = ParamStore::new();
        store.insert("gat0.w", NumArray::matrix(2, 2, vec![1.0, 0.0, 0.0, -2.0]).unwrap());
        store.insert("gat0.a_dst", NumArray::vector(vec![0.3, 0.3]));
        store.insert("gat0.a_src", NumArray::vector(vec![-0.1, 0.2]));
        let feats = NumArray::matrix(1, 2, vec![0.5, 0.25]).unwrap();
        let out = spec.layer_infer(&store, &feats, &[vec![0]], &[7]).unwrap();
        // W*f = (0.5, -0.5); elu keeps positives, maps -0.5 to exp(-0.5)-1
        assert!((out.at(0, 0) - 0.5).abs() < 1e-15);
        assert!((out.at(0, 1) - ((-0.5_f64).exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn gat_isolated_node_is_error() {
        let spec = GatSpec::new("gat0", 2, 2);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        spec.init_params(&mut store, &mut rng);
        let feats = NumArray::matrix(2, 2, vec![0.0; 4]).unwrap();
        let res = spec.layer_infer(&store, &feats, &[vec![0], vec![]], &[10, 11]);
        assert!(matches!(res, Err(Error::IsolatedNode(11))));
    }

    #[test]
    fn gat_attention_rows_sum_to_one() {
        let spec = GatSpec::new("gat0", 3, 4);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        spec.init_params(&mut store, &mut rng);
        let n = 5;
        let feats = NumArray::new(
            vec![n, 3],
            (0..n * 3).map(|k| (k as f64 * 0.31).cos()).collect(),
        )
        .unwrap();
        let neighbors: Vec<Vec<usize>> =
            (0..n).map(|i| vec![i, (i + 1) % n, (i + 2) % n]).collect();
        let w = store.arr("gat0.w").unwrap();
        let a_dst = store.arr("gat0.a_dst").unwrap();
        let a_src = store.arr("gat0.a_src").unwrap();
        let mut dst = vec![0.0; n];
        let mut src = vec![0.0; n];
        for i in 0..n {
            let tv = w.matvec(feats.row(i));
            dst[i] = dot(a_dst.data(), &tv);
            src[i] = dot(a_src.data(), &tv);
        }
        let ids: Vec<u64> = (0..n as u64).collect();
        for i in 0..n {
            let weights = spec.attention_row(i, &neighbors[i], &dst, &src, &ids).unwrap();
            let sum: f64 = weights.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gat_tape_matches_infer() {
        let spec = GatSpec::new("gat0", 2, 3);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        spec.init_params(&mut store, &mut rng);
        let feats = NumArray::matrix(3, 2, vec![0.1, 0.9, -0.4, 0.2, 0.6, -0.8]).unwrap();
        let neighbors = vec![vec![0, 1], vec![1, 0, 2], vec![2, 1]];
        let ids = vec![0, 1, 2];
        let infer = spec.layer_infer(&store, &feats, &neighbors, &ids).unwrap();

        let mut t = Tape::new();
        let (w, a_dst, a_src) = spec.vals(&mut t, &store).unwrap();
        let fvals: Vec<Val> =
            (0..3).map(|i| t.leaf(NumArray::vector(feats.row(i).to_vec()))).collect();
        let out = spec.layer_tape(&mut t, w, a_dst, a_src, &fvals, &neighbors, &ids).unwrap();
        for (i, v) in out.iter().enumerate() {
            for (a, b) in infer.row(i).iter().zip(t.value(*v).data()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn mlp_identity_passthrough() {
        let spec = MlpSpec::new("m", vec![3, 3], OutAct::Linear);
        let mut store = ParamStore::new();
        store.insert(
            "m.w0",
            NumArray::matrix(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap(),
        );
        store.insert("m.b0", NumArray::vector(vec![0.0; 3]));
        let x = vec![0.7, -4.0, 2.5];
        assert_eq!(spec.forward_infer(&store, &x).unwrap(), x);
    }

    #[test]
    fn mlp_sigmoid_output_in_unit_interval() {
        let spec = MlpSpec::new("m", vec![4, 6, 1], OutAct::Sigmoid);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        spec.init_params(&mut store, &mut rng);
        for k in 0..20 {
            let x: Vec<f64> = (0..4).map(|j| ((k * 4 + j) as f64 - 40.0) * 25.0).collect();
            let y = spec.forward_infer(&store, &x).unwrap();
            assert!(y[0] > 0.0 && y[0] < 1.0);
        }
    }

    #[test]
    fn mlp_rejects_bad_input_width() {
        let spec = MlpSpec::new("m", vec![4, 1], OutAct::Sigmoid);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        spec.init_params(&mut store, &mut rng);
        assert!(spec.forward_infer(&store, &[1.0; 3]).is_err());
    }
}
