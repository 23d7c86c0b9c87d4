//! The movement policy behind generation: an observed cost `g` over the
//! traversed prefix (embedding + recurrent encoding + dot attention + a
//! topologically masked output layer) and an expected cost `h` toward the
//! destination (graph-attention road representations + an estimator MLP).
//! Candidates are scored by `f = g + h` and the next-step distribution is
//! the masked softmax over open successors.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numkernel::{
    dot_attention_infer, masked_softmax_slice, GatSpec, LstmSpec, MlpSpec, NumArray, OutAct,
    ParamStore,
};
use crate::roadnet::{ContextEncoder, RoadNetwork, SegmentId};
use crate::traj::{STPoint, Trajectory};

/// Minute-of-day slots: 1..=1440 on weekdays, 1441..=2880 on weekends.
pub const TIME_SLOTS: usize = 2880;

const SECS_PER_DAY: f64 = 86_400.0;

/// Maps a timestamp to its slot in 1..=2880 under the given UTC offset.
/// Weekday timestamps land in 1..=1440 by minute of day, weekend timestamps
/// in 1441..=2880.
pub fn encode_time(timestamp: f64, tz_offset_secs: i64) -> u32 {
    let local = timestamp + tz_offset_secs as f64;
    let day = (local / SECS_PER_DAY).floor();
    // day 0 (1970-01-01) was a Thursday; weekday 0 = Monday
    let weekday = ((day as i64) + 3).rem_euclid(7);
    let minute = (((local - day * SECS_PER_DAY) / 60.0).floor() as i64).clamp(0, 1439) as u32;
    if weekday < 5 {
        minute + 1
    } else {
        minute + 1441
    }
}

/// Canonical timestamp for a slot: Monday 1970-01-05 for weekday slots,
/// Saturday 1970-01-03 for weekend slots, at the slot's minute.
pub fn slot_to_timestamp(slot: u32, tz_offset_secs: i64) -> f64 {
    debug_assert!((1..=TIME_SLOTS as u32).contains(&slot));
    let (day, minute) = if slot <= 1440 { (4.0, slot - 1) } else { (2.0, slot - 1441) };
    day * SECS_PER_DAY + minute as f64 * 60.0 - tz_offset_secs as f64
}

/// Model-shape configuration. Values are configuration, not constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDims {
    pub d_seg: usize,
    pub d_time: usize,
    pub hidden: usize,
    pub d_s: usize,
    /// graph-attention iterations; 0 leaves representations at the context vectors
    pub z: usize,
    pub mlp_hidden: usize,
    /// ablation: force h to 0 so f = g
    pub disable_h: bool,
    pub tz_offset_secs: i64,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            d_seg: 64,
            d_time: 16,
            hidden: 128,
            d_s: 32,
            z: 2,
            mlp_hidden: 64,
            disable_h: false,
            tz_offset_secs: 0,
        }
    }
}

impl ModelDims {
    /// Small shapes for fast tests and demos.
    pub fn tiny() -> Self {
        Self { d_seg: 16, d_time: 4, hidden: 32, d_s: 8, z: 1, mlp_hidden: 16, ..Self::default() }
    }
}

struct StateNode {
    hidden: Vec<f64>,
    parent: Option<Arc<StateNode>>,
}

/// Incremental sequential state of a partial trajectory: the recurrent cell
/// state plus the chain of hidden states needed by the attention step.
/// Cloning shares the chain.
#[derive(Clone)]
pub struct PolicyState {
    node: Arc<StateNode>,
    cell: Vec<f64>,
    depth: usize,
    last_segment: SegmentId,
}

impl PolicyState {
    pub fn last_segment(&self) -> SegmentId {
        self.last_segment
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    fn hidden_chain(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(self.depth);
        let mut cur = Some(&self.node);
        while let Some(n) = cur {
            out.push(&n.hidden);
            cur = n.parent.as_ref();
        }
        out.reverse();
        out
    }
}

/// Per-candidate observed and expected costs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCost {
    pub g: f64,
    pub h: f64,
}

impl StepCost {
    pub fn f(&self) -> f64 {
        self.g + self.h
    }
}

/// Anything that can drive the generation engines: scores the open successors
/// of a partial trajectory, given the destination.
pub trait MovementPolicy {
    type State: Clone;

    fn start(&self, net: &RoadNetwork, p: &STPoint) -> Result<Self::State>;

    fn advance(&self, net: &RoadNetwork, state: &Self::State, p: &STPoint) -> Result<Self::State>;

    /// Costs for every open successor of the state's last segment, sorted by
    /// segment id. Errors with `DeadEnd` when there is no open successor.
    fn step_costs(
        &self,
        net: &RoadNetwork,
        state: &Self::State,
        dest: SegmentId,
    ) -> Result<Vec<(SegmentId, StepCost)>>;
}

pub fn prob_to_cost(p: f64) -> f64 {
    -(p.max(1e-300)).ln()
}

/// The neural movement policy.
pub struct PolicyModel {
    dims: ModelDims,
    n_segments: usize,
    net_hash: u64,
    ctx: Arc<NumArray>,
    ctx_dim: usize,
    /// in-neighbors including the self-loop, per segment index
    neighbors: Vec<Vec<usize>>,
    node_ids: Vec<u64>,
    /// bounding-box diagonal in meters, normalizes the distance feature of h
    dist_scale: f64,
    lstm: LstmSpec,
    gats: Vec<GatSpec>,
    mlp: MlpSpec,
    params: ParamStore,
    reps_cache: RwLock<Option<(u64, Arc<NumArray>)>>,
}

impl PolicyModel {
    pub fn new(net: &RoadNetwork, dims: ModelDims, seed: u64) -> Result<Self> {
        let encoder = ContextEncoder::new(net);
        let ctx = Arc::new(encoder.matrix(net)?);
        let ctx_dim = encoder.dim();
        let mut neighbors = Vec::with_capacity(net.len());
        for i in 0..net.len() {
            let mut nbrs = vec![i];
            nbrs.extend_from_slice(net.predecessor_indices(i));
            nbrs.sort_unstable();
            nbrs.dedup();
            neighbors.push(nbrs);
        }
        let node_ids: Vec<u64> = net.segments().iter().map(|s| s.id).collect();

        let mut lat = (f64::INFINITY, f64::NEG_INFINITY);
        let mut lon = (f64::INFINITY, f64::NEG_INFINITY);
        for s in net.segments() {
            lat = (lat.0.min(s.midpoint.0), lat.1.max(s.midpoint.0));
            lon = (lon.0.min(s.midpoint.1), lon.1.max(s.midpoint.1));
        }
        let diag = crate::roadnet::haversine_distance((lat.0, lon.0), (lat.1, lon.1))?;
        let dist_scale = if diag > 0.0 { diag } else { 1.0 };

        let lstm = LstmSpec::new("g_lstm", dims.d_seg + dims.d_time, dims.hidden);
        let mut gats = Vec::with_capacity(dims.z);
        for k in 0..dims.z {
            let input = if k == 0 { ctx_dim } else { dims.d_s };
            gats.push(GatSpec::new(&format!("h_gat{k}"), input, dims.d_s));
        }
        let rep_dim = if dims.z == 0 { ctx_dim } else { dims.d_s };
        let mlp = MlpSpec::new(
            "h_mlp",
            vec![2 * rep_dim + 1, dims.mlp_hidden, 1],
            OutAct::Sigmoid,
        );

        let mut params = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        params.insert("g_seg_embed", NumArray::xavier(net.len(), dims.d_seg, &mut rng));
        params.insert("g_time_embed", NumArray::xavier(TIME_SLOTS, dims.d_time, &mut rng));
        lstm.init_params(&mut params, &mut rng);
        params.insert("g_out", NumArray::xavier(net.len(), dims.hidden, &mut rng));
        for gat in &gats {
            gat.init_params(&mut params, &mut rng);
        }
        mlp.init_params(&mut params, &mut rng);

        Ok(Self {
            dims,
            n_segments: net.len(),
            net_hash: net.topology_hash(),
            ctx,
            ctx_dim,
            neighbors,
            node_ids,
            dist_scale,
            lstm,
            gats,
            mlp,
            params,
            reps_cache: RwLock::new(None),
        })
    }

    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn net_hash(&self) -> u64 {
        self.net_hash
    }

    pub fn lstm_spec(&self) -> &LstmSpec {
        &self.lstm
    }

    pub fn gat_specs(&self) -> &[GatSpec] {
        &self.gats
    }

    pub fn mlp_spec(&self) -> &MlpSpec {
        &self.mlp
    }

    pub fn context_matrix(&self) -> &Arc<NumArray> {
        &self.ctx
    }

    pub fn ctx_dim(&self) -> usize {
        self.ctx_dim
    }

    /// Width of the road-representation rows fed to the estimator MLP.
    pub fn rep_dim(&self) -> usize {
        if self.dims.z == 0 {
            self.ctx_dim
        } else {
            self.dims.d_s
        }
    }

    pub fn neighbors(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    pub fn node_ids(&self) -> &[u64] {
        &self.node_ids
    }

    pub fn dist_scale(&self) -> f64 {
        self.dist_scale
    }

    /// Copy-on-write snapshot of the full parameter set.
    pub fn snapshot_params(&self) -> ParamStore {
        self.params.clone()
    }

    pub fn restore_params(&mut self, params: ParamStore) {
        self.params = params;
    }

    /// Embedded point: segment embedding concatenated with the time-slot embedding.
    pub fn embed_point(&self, net: &RoadNetwork, p: &STPoint) -> Result<Vec<f64>> {
        let idx = net.index_of(p.segment)?;
        let seg = self.params.arr("g_seg_embed")?;
        let time = self.params.arr("g_time_embed")?;
        let slot = encode_time(p.timestamp, self.dims.tz_offset_secs) as usize - 1;
        let mut out = Vec::with_capacity(self.dims.d_seg + self.dims.d_time);
        out.extend_from_slice(seg.row(idx));
        out.extend_from_slice(time.row(slot));
        Ok(out)
    }

    pub fn state_start(&self, net: &RoadNetwork, p: &STPoint) -> Result<PolicyState> {
        let x = self.embed_point(net, p)?;
        let (h0, c0) = self.lstm.zero_state();
        let (h, c) = self.lstm.step_infer(&self.params, &x, &h0, &c0)?;
        Ok(PolicyState {
            node: Arc::new(StateNode { hidden: h, parent: None }),
            cell: c,
            depth: 1,
            last_segment: p.segment,
        })
    }

    pub fn state_advance(
        &self,
        net: &RoadNetwork,
        state: &PolicyState,
        p: &STPoint,
    ) -> Result<PolicyState> {
        let x = self.embed_point(net, p)?;
        let (h, c) = self.lstm.step_infer(&self.params, &x, &state.node.hidden, &state.cell)?;
        Ok(PolicyState {
            node: Arc::new(StateNode { hidden: h, parent: Some(Arc::clone(&state.node)) }),
            cell: c,
            depth: state.depth + 1,
            last_segment: p.segment,
        })
    }

    /// Attention-enhanced moving state over the whole hidden chain.
    pub(crate) fn enhanced_state(&self, state: &PolicyState) -> Result<Vec<f64>> {
        let chain = state.hidden_chain();
        let states: Vec<Vec<f64>> = chain.iter().map(|h| h.to_vec()).collect();
        dot_attention_infer(&states)
    }

    fn fold_prefix(&self, net: &RoadNetwork, prefix: &Trajectory) -> Result<PolicyState> {
        let mut st = self.state_start(net, prefix.first())?;
        for p in &prefix.points()[1..] {
            st = self.state_advance(net, &st, p)?;
        }
        Ok(st)
    }

    /// Next-step probabilities over the open successors of the state's last
    /// segment, sorted by id; exactly the nonzero entries of the masked
    /// softmax. Errors with `DeadEnd` when no successor is open.
    pub fn step_distribution(
        &self,
        net: &RoadNetwork,
        state: &PolicyState,
    ) -> Result<Vec<(SegmentId, f64)>> {
        let succ = net.open_successors(state.last_segment)?;
        if succ.is_empty() {
            return Err(Error::DeadEnd(state.last_segment));
        }
        let enhanced = self.enhanced_state(state)?;
        let out = self.params.arr("g_out")?;
        let logits: Vec<f64> = succ
            .iter()
            .map(|&s| {
                let idx = net.index_of(s)?;
                Ok(crate::numkernel::dot(out.row(idx), &enhanced))
            })
            .collect::<Result<_>>()?;
        let support = vec![true; succ.len()];
        let probs = masked_softmax_slice(&logits, &support)?;
        Ok(succ.into_iter().zip(probs).collect())
    }

    /// Probabilities over open successors given a whole prefix trajectory.
    pub fn observed_distribution(
        &self,
        net: &RoadNetwork,
        prefix: &Trajectory,
    ) -> Result<Vec<(SegmentId, f64)>> {
        let st = self.fold_prefix(net, prefix)?;
        self.step_distribution(net, &st)
    }

    /// The full masked softmax over every segment of the network: probability
    /// is bitwise 0 for every non-successor of the prefix's last segment.
    /// Indexed by network segment index.
    pub fn observed_distribution_full(
        &self,
        net: &RoadNetwork,
        prefix: &Trajectory,
    ) -> Result<Vec<f64>> {
        let st = self.fold_prefix(net, prefix)?;
        let enhanced = self.enhanced_state(&st)?;
        let out = self.params.arr("g_out")?;
        let logits = out.matvec(&enhanced);
        let mut support = vec![false; self.n_segments];
        for s in net.open_successors(st.last_segment)? {
            support[net.index_of(s)?] = true;
        }
        masked_softmax_slice(&logits, &support)
    }

    /// Observed cost of a candidate: negative log of its conditional
    /// probability. Masked candidates signal `InfeasibleCandidate`.
    pub fn observed_cost_g(
        &self,
        net: &RoadNetwork,
        prefix: &Trajectory,
        candidate: SegmentId,
    ) -> Result<f64> {
        let dist = self.observed_distribution(net, prefix)?;
        dist.iter()
            .find(|(s, _)| *s == candidate)
            .map(|(_, p)| prob_to_cost(*p))
            .ok_or(Error::InfeasibleCandidate(candidate))
    }

    /// Graph-attention road representations, `z` update iterations from the
    /// context vectors. Cached until parameters change.
    pub fn road_representations(&self, net: &RoadNetwork) -> Result<Arc<NumArray>> {
        let version = self.params.version();
        if let Some((v, reps)) = self.reps_cache.read().unwrap().as_ref() {
            if *v == version {
                return Ok(Arc::clone(reps));
            }
        }
        if net.len() != self.n_segments {
            return Err(Error::ShapeMismatch {
                expected: format!("{} segments", self.n_segments),
                got: format!("{}", net.len()),
            });
        }
        let mut reps = (*self.ctx).clone();
        for gat in &self.gats {
            reps = gat.layer_infer(&self.params, &reps, &self.neighbors, &self.node_ids)?;
        }
        let reps = Arc::new(reps);
        *self.reps_cache.write().unwrap() = Some((version, Arc::clone(&reps)));
        Ok(reps)
    }

    /// P(candidate leads to dest) from the estimator MLP over the two road
    /// representations and their normalized spherical distance.
    pub fn dest_probability(
        &self,
        net: &RoadNetwork,
        candidate: SegmentId,
        dest: SegmentId,
    ) -> Result<f64> {
        let reps = self.road_representations(net)?;
        let ci = net.index_of(candidate)?;
        let di = net.index_of(dest)?;
        let d = crate::roadnet::haversine_distance(
            net.segment_at(ci).midpoint,
            net.segment_at(di).midpoint,
        )?;
        let mut input = Vec::with_capacity(self.mlp.dims[0]);
        input.extend_from_slice(reps.row(ci));
        input.extend_from_slice(reps.row(di));
        input.push(d / self.dist_scale);
        let out = self.mlp.forward_infer(&self.params, &input)?;
        Ok(out[0])
    }

    /// Expected cost toward the destination; 0 under the `disable_h` ablation.
    pub fn expected_cost_h(
        &self,
        net: &RoadNetwork,
        candidate: SegmentId,
        dest: SegmentId,
    ) -> Result<f64> {
        if self.dims.disable_h {
            net.index_of(candidate)?;
            net.index_of(dest)?;
            return Ok(0.0);
        }
        Ok(prob_to_cost(self.dest_probability(net, candidate, dest)?))
    }

    /// `f = g + h` exactly.
    pub fn total_cost_f(
        &self,
        net: &RoadNetwork,
        prefix: &Trajectory,
        candidate: SegmentId,
        dest: SegmentId,
    ) -> Result<f64> {
        let g = self.observed_cost_g(net, prefix, candidate)?;
        let h = self.expected_cost_h(net, candidate, dest)?;
        Ok(g + h)
    }

    /// Checkpoint with a self-describing metadata header.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut meta = BTreeMap::new();
        meta.insert("kind".into(), "policy".into());
        meta.insert("net_hash".into(), self.net_hash.to_string());
        meta.insert("d_seg".into(), self.dims.d_seg.to_string());
        meta.insert("d_time".into(), self.dims.d_time.to_string());
        meta.insert("hidden".into(), self.dims.hidden.to_string());
        meta.insert("d_s".into(), self.dims.d_s.to_string());
        meta.insert("z".into(), self.dims.z.to_string());
        meta.insert("mlp_hidden".into(), self.dims.mlp_hidden.to_string());
        meta.insert("disable_h".into(), (self.dims.disable_h as u8).to_string());
        meta.insert("tz_offset_secs".into(), self.dims.tz_offset_secs.to_string());
        self.params.save(path, &meta)
    }

    pub fn load(path: &std::path::Path, net: &RoadNetwork) -> Result<Self> {
        let (params, meta) = ParamStore::load(path)?;
        let get = |k: &str| -> Result<&String> {
            meta.get(k).ok_or_else(|| Error::Checkpoint(format!("missing meta key '{k}'")))
        };
        if get("kind")? != "policy" {
            return Err(Error::Checkpoint(format!("expected a policy checkpoint, got {}", get("kind")?)));
        }
        let hash: u64 = get("net_hash")?
            .parse()
            .map_err(|_| Error::Checkpoint("bad net_hash".into()))?;
        if hash != net.topology_hash() {
            return Err(Error::Checkpoint(
                "checkpoint was trained on a different network".into(),
            ));
        }
        let parse = |k: &str| -> Result<usize> {
            get(k)?.parse().map_err(|_| Error::Checkpoint(format!("bad meta value for '{k}'")))
        };
        let dims = ModelDims {
            d_seg: parse("d_seg")?,
            d_time: parse("d_time")?,
            hidden: parse("hidden")?,
            d_s: parse("d_s")?,
            z: parse("z")?,
            mlp_hidden: parse("mlp_hidden")?,
            disable_h: parse("disable_h")? != 0,
            tz_offset_secs: get("tz_offset_secs")?
                .parse()
                .map_err(|_| Error::Checkpoint("bad tz_offset_secs".into()))?,
        };
        let mut model = Self::new(net, dims, 0)?;
        model.params = params;
        Ok(model)
    }
}

impl MovementPolicy for PolicyModel {
    type State = PolicyState;

    fn start(&self, net: &RoadNetwork, p: &STPoint) -> Result<PolicyState> {
        self.state_start(net, p)
    }

    fn advance(&self, net: &RoadNetwork, state: &PolicyState, p: &STPoint) -> Result<PolicyState> {
        self.state_advance(net, state, p)
    }

    fn step_costs(
        &self,
        net: &RoadNetwork,
        state: &PolicyState,
        dest: SegmentId,
    ) -> Result<Vec<(SegmentId, StepCost)>> {
        let dist = self.step_distribution(net, state)?;
        dist.into_iter()
            .map(|(seg, p)| {
                let h = self.expected_cost_h(net, seg, dest)?;
                Ok((seg, StepCost { g: prob_to_cost(p), h }))
            })
            .collect()
    }
}
