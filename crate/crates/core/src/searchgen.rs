//! Trajectory generation engines: OD-matrix sampling, best-first search
//! generation with rollback, the stochastic sampling baseline, skeleton
//! mapping through boundary segments, and the two-stage region-then-road
//! process. All engines only ever emit continuous, closure-free trajectories.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::generator::{encode_time, slot_to_timestamp, MovementPolicy, PolicyModel, StepCost};
use crate::numkernel::masked_softmax_slice;
use crate::regions::{BoundarySets, Partition};
use crate::roadnet::{RoadNetwork, SegmentId};
use crate::traj::{STPoint, Trajectory};

/// Width of an OD start-slot bucket over the 2880-slot clock.
pub const OD_BUCKET_MINUTES: u32 = 30;

pub fn bucket_of_slot(slot: u32) -> u32 {
    (slot - 1) / OD_BUCKET_MINUTES
}

/// Empirical counts over (origin, destination, start-slot bucket).
#[derive(Debug, Clone, PartialEq)]
pub struct OdMatrix {
    counts: BTreeMap<(SegmentId, SegmentId, u32), u64>,
    total: u64,
    tz_offset_secs: i64,
}

impl OdMatrix {
    pub fn build(corpus: &[Trajectory], tz_offset_secs: i64) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut counts: BTreeMap<(SegmentId, SegmentId, u32), u64> = BTreeMap::new();
        for t in corpus {
            let slot = encode_time(t.first().timestamp, tz_offset_secs);
            let key = (t.origin(), t.destination(), bucket_of_slot(slot));
            *counts.entry(key).or_insert(0) += 1;
        }
        let total = counts.values().sum();
        Ok(Self { counts, total, tz_offset_secs })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &BTreeMap<(SegmentId, SegmentId, u32), u64> {
        &self.counts
    }

    /// Samples a key proportionally to its count, then a start timestamp
    /// uniformly over the bucket's slots.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<(SegmentId, SegmentId, f64)> {
        if self.counts.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut pick = rng.gen_range(0..self.total);
        for (&(o, d, bucket), &c) in &self.counts {
            if pick < c {
                let slot = bucket * OD_BUCKET_MINUTES + 1 + rng.gen_range(0..OD_BUCKET_MINUTES);
                return Ok((o, d, slot_to_timestamp(slot, self.tz_offset_secs)));
            }
            pick -= c;
        }
        unreachable!("total matches the sum of counts")
    }
}

#[derive(Debug, Clone)]
pub struct SearchLimits {
    pub max_expansions: usize,
    /// record popped accumulated costs (test instrumentation)
    pub collect_popped: bool,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self { max_expansions: 50_000, collect_popped: false }
    }
}

impl SearchLimits {
    pub fn budget(max_expansions: usize) -> Self {
        Self { max_expansions, ..Self::default() }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SearchStats {
    pub expansions: usize,
    pub popped_costs: Option<Vec<f64>>,
}

struct PathNode {
    point: STPoint,
    parent: Option<Arc<PathNode>>,
}

fn rebuild(tail: &Arc<PathNode>) -> Trajectory {
    let mut points = Vec::new();
    let mut cur = Some(tail);
    while let Some(n) = cur {
        points.push(n.point);
        cur = n.parent.as_ref();
    }
    points.reverse();
    Trajectory::new(points).expect("search paths have monotone timestamps")
}

struct SearchNode<S> {
    cost: f64,
    hops: usize,
    tail: Arc<PathNode>,
    state: S,
}

impl<S> SearchNode<S> {
    fn last(&self) -> SegmentId {
        self.tail.point.segment
    }
}

impl<S> PartialEq for SearchNode<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp_key() == other.cmp_key()
    }
}

impl<S> Eq for SearchNode<S> {}

impl<S> SearchNode<S> {
    fn cmp_key(&self) -> (f64, usize, SegmentId) {
        (self.cost, self.hops, self.last())
    }
}

impl<S> Ord for SearchNode<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert for least-cost-first, tie-breaking
        // by fewer hops then smaller segment id for deterministic replay
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.hops.cmp(&self.hops))
            .then_with(|| other.last().cmp(&self.last()))
    }
}

impl<S> PartialOrd for SearchNode<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn advance_time(net: &RoadNetwork, t: f64, next: SegmentId) -> Result<f64> {
    Ok(t + net.segment(next)?.travel_seconds())
}

/// Best-first search over partial trajectories ordered by accumulated
/// per-step `f = g + h`. Expanding pops the least-cost node and extends it by
/// its open successors; the search ends when a popped node sits on the
/// destination, so earlier mistakes are rolled back rather than committed.
///
/// Nodes are pruned per last segment: a path is only queued when it reaches
/// its segment strictly cheaper than any path seen there before.
pub fn astar_generate<P: MovementPolicy>(
    policy: &P,
    net: &RoadNetwork,
    l_s: SegmentId,
    l_d: SegmentId,
    t_s: f64,
    limits: &SearchLimits,
) -> Result<(Trajectory, SearchStats)> {
    astar_in_scope(policy, net, None, l_s, l_d, t_s, limits)
}

fn astar_in_scope<P: MovementPolicy>(
    policy: &P,
    net: &RoadNetwork,
    allowed: Option<&HashSet<SegmentId>>,
    l_s: SegmentId,
    l_d: SegmentId,
    t_s: f64,
    limits: &SearchLimits,
) -> Result<(Trajectory, SearchStats)> {
    net.index_of(l_s)?;
    net.index_of(l_d)?;
    if net.is_closed(l_s) || net.is_closed(l_d) {
        return Err(Error::Unreachable { from: l_s, to: l_d });
    }
    let mut stats = SearchStats {
        expansions: 0,
        popped_costs: limits.collect_popped.then(Vec::new),
    };
    let root_point = STPoint::new(l_s, t_s);
    if l_s == l_d {
        return Ok((Trajectory::single(l_s, t_s), stats));
    }
    let root = SearchNode {
        cost: 0.0,
        hops: 0,
        tail: Arc::new(PathNode { point: root_point, parent: None }),
        state: policy.start(net, &root_point)?,
    };
    let mut best: HashMap<SegmentId, f64> = HashMap::new();
    best.insert(l_s, 0.0);
    let mut heap = BinaryHeap::new();
    heap.push(root);

    while let Some(node) = heap.pop() {
        if let Some(&b) = best.get(&node.last()) {
            if node.cost > b {
                continue; // stale entry superseded by a cheaper path
            }
        }
        stats.expansions += 1;
        if let Some(popped) = stats.popped_costs.as_mut() {
            popped.push(node.cost);
        }
        if node.last() == l_d {
            return Ok((rebuild(&node.tail), stats));
        }
        if stats.expansions >= limits.max_expansions {
            return Err(Error::SearchBudget {
                expanded: stats.expansions,
                from: l_s,
                to: l_d,
            });
        }
        let costs = match policy.step_costs(net, &node.state, l_d) {
            Ok(c) => c,
            Err(Error::DeadEnd(_)) => continue,
            Err(e) => return Err(e),
        };
        for (seg, cost) in costs {
            if let Some(allow) = allowed {
                if !allow.contains(&seg) {
                    continue;
                }
            }
            let child_cost = node.cost + cost.f();
            match best.get(&seg) {
                Some(&b) if child_cost >= b => continue,
                _ => {}
            }
            best.insert(seg, child_cost);
            let t = advance_time(net, node.tail.point.timestamp, seg)?;
            let point = STPoint::new(seg, t);
            heap.push(SearchNode {
                cost: child_cost,
                hops: node.hops + 1,
                tail: Arc::new(PathNode { point, parent: Some(Arc::clone(&node.tail)) }),
                state: policy.advance(net, &node.state, &point)?,
            });
        }
    }
    Err(Error::Unreachable { from: l_s, to: l_d })
}

/// One stochastically generated trajectory with its per-step sampling record.
#[derive(Debug, Clone)]
pub struct GenSample {
    pub traj: Trajectory,
    pub reached: bool,
    pub dest: SegmentId,
    /// log-probability of each sampled step under the sampling distribution
    pub step_logps: Vec<f64>,
}

/// The sampling baseline: iteratively draws the next segment from the
/// destination-conditioned step distribution (softmax over `-f` among open
/// successors) until the destination is reached or `max_steps` expire. Dead
/// ends return a flagged partial trajectory.
pub fn stochastic_generate<P: MovementPolicy>(
    policy: &P,
    net: &RoadNetwork,
    l_s: SegmentId,
    l_d: SegmentId,
    t_s: f64,
    max_steps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<GenSample> {
    net.index_of(l_s)?;
    net.index_of(l_d)?;
    if net.is_closed(l_s) || net.is_closed(l_d) {
        return Err(Error::Unreachable { from: l_s, to: l_d });
    }
    let mut traj = Trajectory::single(l_s, t_s);
    let mut logps = Vec::new();
    if l_s == l_d {
        return Ok(GenSample { traj, reached: true, dest: l_d, step_logps: logps });
    }
    let mut state = policy.start(net, traj.first())?;
    for _ in 0..max_steps {
        let costs = match policy.step_costs(net, &state, l_d) {
            Ok(c) => c,
            Err(Error::DeadEnd(_)) => {
                return Ok(GenSample { traj, reached: false, dest: l_d, step_logps: logps })
            }
            Err(e) => return Err(e),
        };
        let (seg, logp) = sample_step(&costs, rng)?;
        let t = advance_time(net, traj.last().timestamp, seg)?;
        let point = STPoint::new(seg, t);
        traj.push(point);
        logps.push(logp);
        if seg == l_d {
            return Ok(GenSample { traj, reached: true, dest: l_d, step_logps: logps });
        }
        state = policy.advance(net, &state, &point)?;
    }
    Ok(GenSample { traj, reached: false, dest: l_d, step_logps: logps })
}

/// Draws one candidate from `softmax(-f)`; returns it with its log-probability.
fn sample_step(
    costs: &[(SegmentId, StepCost)],
    rng: &mut ChaCha8Rng,
) -> Result<(SegmentId, f64)> {
    let logits: Vec<f64> = costs.iter().map(|(_, c)| -c.f()).collect();
    let support = vec![true; costs.len()];
    let probs = masked_softmax_slice(&logits, &support)?;
    let draw = rng.gen::<f64>();
    let mut acc = 0.0;
    let mut chosen = costs.len() - 1;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if draw < acc {
            chosen = i;
            break;
        }
    }
    Ok((costs[chosen].0, probs[chosen].max(1e-300).ln()))
}

/// Maps a regional trajectory to a road-segment skeleton: the origin, one
/// boundary entry segment per region transition (sampled by historical visit
/// frequency, zero counts smoothed to stay selectable), then the destination.
pub fn map_regional_trajectory(
    regional: &Trajectory,
    l_s: SegmentId,
    l_d: SegmentId,
    boundaries: &BoundarySets,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<SegmentId>> {
    let mut skeleton = vec![l_s];
    let regions = regional.points();
    for w in regions.windows(2) {
        let from = w[0].segment as u32;
        let to = w[1].segment as u32;
        let entries = boundaries
            .get(from, to)
            .filter(|e| !e.is_empty())
            .ok_or(Error::EmptyBoundary { from, to })?;
        let weights: Vec<u64> = entries.iter().map(|&(_, c)| c.max(1)).collect();
        let total: u64 = weights.iter().sum();
        let mut pick = rng.gen_range(0..total);
        let mut chosen = entries.len() - 1;
        for (i, &w) in weights.iter().enumerate() {
            if pick < w {
                chosen = i;
                break;
            }
            pick -= w;
        }
        skeleton.push(entries[chosen].0);
    }
    skeleton.push(l_d);
    Ok(skeleton)
}

/// Expansion budgets of the two stages.
#[derive(Debug, Clone)]
pub struct TwoStageBudgets {
    pub region_expansions: usize,
    pub leg_expansions: usize,
}

impl Default for TwoStageBudgets {
    fn default() -> Self {
        Self { region_expansions: 10_000, leg_expansions: 20_000 }
    }
}

/// Region-then-road generation: a region-level best-first search plans the
/// regional trajectory, the skeleton is mapped through boundary segments, and
/// each consecutive skeleton pair is completed by a road-level search
/// restricted to the two regions that leg bridges (plus its endpoints).
pub fn two_stage_generate(
    road_model: &PolicyModel,
    region_model: &PolicyModel,
    net: &RoadNetwork,
    region_net: &RoadNetwork,
    partition: &Partition,
    boundaries: &BoundarySets,
    l_s: SegmentId,
    l_d: SegmentId,
    t_s: f64,
    budgets: &TwoStageBudgets,
    rng: &mut ChaCha8Rng,
) -> Result<(Trajectory, SearchStats)> {
    let r_s = partition.region_of(net, l_s)?;
    let r_d = partition.region_of(net, l_d)?;
    let mut stats = SearchStats::default();

    let skeleton = if r_s == r_d {
        vec![l_s, l_d]
    } else {
        let (regional, region_stats) = astar_generate(
            region_model,
            region_net,
            r_s as u64,
            r_d as u64,
            t_s,
            &SearchLimits::budget(budgets.region_expansions),
        )
        .map_err(|e| Error::TwoStage { leg: "region stage".into(), source: Box::new(e) })?;
        stats.expansions += region_stats.expansions;
        map_regional_trajectory(&regional, l_s, l_d, boundaries, rng)
            .map_err(|e| Error::TwoStage { leg: "skeleton mapping".into(), source: Box::new(e) })?
    };

    // members per region, for leg scoping
    let mut members: Vec<Vec<SegmentId>> = vec![Vec::new(); partition.k()];
    for (idx, seg) in net.segments().iter().enumerate() {
        members[partition.region_of_index(idx) as usize].push(seg.id);
    }

    let mut out = Trajectory::single(l_s, t_s);
    for (i, pair) in skeleton.windows(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        if a == b {
            continue;
        }
        let mut allowed: HashSet<SegmentId> = HashSet::new();
        for r in [partition.region_of(net, a)?, partition.region_of(net, b)?] {
            allowed.extend(members[r as usize].iter().copied());
        }
        allowed.insert(a);
        allowed.insert(b);
        let (leg, leg_stats) = astar_in_scope(
            road_model,
            net,
            Some(&allowed),
            a,
            b,
            out.last().timestamp,
            &SearchLimits::budget(budgets.leg_expansions),
        )
        .map_err(|e| Error::TwoStage {
            leg: format!("leg {i} ({a} -> {b})"),
            source: Box::new(e),
        })?;
        stats.expansions += leg_stats.expansions;
        // drop the duplicated junction point shared with the previous leg
        for p in &leg.points()[1..] {
            out.push(*p);
        }
    }
    debug_assert!(out.is_continuous(net));
    debug_assert_eq!(out.od(), (l_s, l_d));
    Ok((out, stats))
}

/// Uniform test policy: every open successor gets probability `1 / fanout`
/// regardless of the actual branching, and `h` is identically zero. Under it
/// the accumulated cost is `hops * ln(fanout)` and best-first search
/// degenerates to a shortest-hop search.
#[derive(Debug, Clone)]
pub struct UniformPolicy {
    pub fanout: usize,
}

#[derive(Debug, Clone)]
pub struct UniformState {
    last: SegmentId,
}

impl MovementPolicy for UniformPolicy {
    type State = UniformState;

    fn start(&self, net: &RoadNetwork, p: &STPoint) -> Result<UniformState> {
        net.index_of(p.segment)?;
        Ok(UniformState { last: p.segment })
    }

    fn advance(&self, _net: &RoadNetwork, _state: &UniformState, p: &STPoint) -> Result<UniformState> {
        Ok(UniformState { last: p.segment })
    }

    fn step_costs(
        &self,
        net: &RoadNetwork,
        state: &UniformState,
        _dest: SegmentId,
    ) -> Result<Vec<(SegmentId, StepCost)>> {
        let succ = net.open_successors(state.last)?;
        if succ.is_empty() {
            return Err(Error::DeadEnd(state.last));
        }
        let g = (self.fanout as f64).ln();
        Ok(succ.into_iter().map(|s| (s, StepCost { g, h: 0.0 })).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::ModelDims;
    use crate::regions::{boundary_sets, partition_network, region_network};
    use crate::roadnet::synth_grid;
    use rand::SeedableRng;

    const T0: f64 = 4.0 * 86_400.0; // Monday 00:00

    fn traj(points: &[(u64, f64)]) -> Trajectory {
        Trajectory::new(points.iter().map(|&(s, t)| STPoint::new(s, t)).collect()).unwrap()
    }

    #[test]
    fn od_matrix_counts_and_conservation() {
        let single = OdMatrix::build(&[traj(&[(0, T0), (1, T0 + 9.0)])], 0).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single.total(), 1);

        let two = OdMatrix::build(
            &[traj(&[(0, T0), (1, T0 + 9.0)]), traj(&[(0, T0 + 60.0), (1, T0 + 70.0)])],
            0,
        )
        .unwrap();
        assert_eq!(two.len(), 1, "same OD and bucket collapse to one key");
        assert_eq!(two.counts().values().next(), Some(&2));

        let corpus: Vec<Trajectory> =
            (0..7).map(|i| traj(&[(i, T0), (i + 1, T0 + 5.0)])).collect();
        let od = OdMatrix::build(&corpus, 0).unwrap();
        assert_eq!(od.total(), corpus.len() as u64, "counts conserve the corpus size");
    }

    #[test]
    fn od_matrix_empty_corpus_is_error() {
        assert!(matches!(OdMatrix::build(&[], 0), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn od_sampling_single_key_and_determinism() {
        let od = OdMatrix::build(&[traj(&[(3, T0), (5, T0 + 9.0)])], 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (o, d, t) = od.sample(&mut rng).unwrap();
            assert_eq!((o, d), (3, 5));
            let slot = encode_time(t, 0);
            assert_eq!(bucket_of_slot(slot), bucket_of_slot(encode_time(T0, 0)));
        }
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            assert_eq!(od.sample(&mut r1).unwrap(), od.sample(&mut r2).unwrap());
        }
    }

    #[test]
    fn od_sampling_ratio_matches_counts() {
        // counts 3:1; chi-square over 10k draws must stay under the
        // p = 0.01 critical value for one degree of freedom (6.635)
        let corpus = vec![
            traj(&[(0, T0), (1, T0 + 5.0)]),
            traj(&[(0, T0 + 10.0), (1, T0 + 15.0)]),
            traj(&[(0, T0 + 20.0), (1, T0 + 25.0)]),
            traj(&[(7, T0), (8, T0 + 5.0)]),
        ];
        let od = OdMatrix::build(&corpus, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut first = 0u64;
        let n = 10_000;
        for _ in 0..n {
            let (o, _, _) = od.sample(&mut rng).unwrap();
            if o == 0 {
                first += 1;
            }
        }
        let e1 = n as f64 * 0.75;
        let e2 = n as f64 * 0.25;
        let o1 = first as f64;
        let o2 = (n - first) as f64;
        let chi2 = (o1 - e1).powi(2) / e1 + (o2 - e2).powi(2) / e2;
        assert!(chi2 < 6.635, "chi2 {chi2}");
    }

    #[test]
    fn astar_trivial_and_uniform_matches_bfs() {
        let net = synth_grid(6, 6, 0.0, 3).unwrap();
        let policy = UniformPolicy { fanout: 4 };
        let ids: Vec<u64> = net.segments().iter().map(|s| s.id).collect();

        let (t, _) = astar_generate(&policy, &net, ids[0], ids[0], T0, &SearchLimits::default())
            .unwrap();
        assert_eq!(t.len(), 1, "l_s = l_d gives a single-point trajectory");

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..40 {
            let a = ids[rng.gen_range(0..ids.len())];
            let b = ids[rng.gen_range(0..ids.len())];
            if a == b {
                continue;
            }
            let hops = net.hops_to(b).unwrap()[net.index_of(a).unwrap()];
            let (t, stats) =
                astar_generate(&policy, &net, a, b, T0, &SearchLimits::default()).unwrap();
            assert_eq!(t.len() - 1, hops, "uniform cost must find a minimum-hop path");
            assert!(t.is_continuous(&net));
            assert!(stats.expansions > 0);
        }
    }

    #[test]
    fn astar_popped_costs_nondecreasing() {
        let net = synth_grid(5, 5, 0.0, 9).unwrap();
        let policy = UniformPolicy { fanout: 4 };
        let ids: Vec<u64> = net.segments().iter().map(|s| s.id).collect();
        let limits = SearchLimits { max_expansions: 50_000, collect_popped: true };
        let (_, stats) =
            astar_generate(&policy, &net, ids[0], ids[ids.len() - 1], T0, &limits).unwrap();
        let popped = stats.popped_costs.unwrap();
        assert!(popped.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn astar_budget_and_unreachable_errors() {
        let net = synth_grid(5, 5, 0.0, 3).unwrap();
        let policy = UniformPolicy { fanout: 4 };
        let ids: Vec<u64> = net.segments().iter().map(|s| s.id).collect();
        assert!(matches!(
            astar_generate(&policy, &net, ids[0], ids[ids.len() - 1], T0, &SearchLimits::budget(3)),
            Err(Error::SearchBudget { .. })
        ));

        // closing every successor of the origin disconnects it
        let succ = net.open_successors(ids[0]).unwrap();
        let view = net.with_closures(&succ).unwrap();
        assert!(matches!(
            astar_generate(&policy, &view, ids[0], ids[ids.len() - 1], T0, &SearchLimits::default()),
            Err(Error::Unreachable { .. })
        ));

        // closed endpoints surface as unreachable up front
        let view2 = net.with_closures(&[ids[0]]).unwrap();
        assert!(matches!(
            astar_generate(&policy, &view2, ids[0], ids[5], T0, &SearchLimits::default()),
            Err(Error::Unreachable { .. })
        ));
    }

    #[test]
    fn closed_segments_never_appear_in_outputs() {
        let net = synth_grid(5, 5, 0.0, 31).unwrap();
        let ids: Vec<u64> = net.segments().iter().map(|s| s.id).collect();
        let closed: Vec<u64> = ids.iter().copied().filter(|&i| i % 7 == 3).collect();
        let view = net.with_closures(&closed).unwrap();
        let policy = UniformPolicy { fanout: 4 };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let open: Vec<u64> =
            ids.iter().copied().filter(|i| !view.is_closed(*i)).collect();
        let mut generated = 0;
        for _ in 0..30 {
            let a = open[rng.gen_range(0..open.len())];
            let b = open[rng.gen_range(0..open.len())];
            if let Ok((t, _)) = astar_generate(&policy, &view, a, b, T0, &SearchLimits::default())
            {
                assert!(!t.visits_any_closed(&view));
                assert!(t.is_continuous(&view));
                generated += 1;
            }
        }
        assert!(generated > 0);
    }

    #[test]
    fn stochastic_corridor_reaches_and_is_reproducible() {
        // corridor 0 -> 1 -> 2 -> 3
        let segments: Vec<crate::roadnet::RoadSegment> = (0..4)
            .map(|i| crate::roadnet::RoadSegment {
                id: i,
                length: 100.0,
                width: 8.0,
                max_speed: 36.0,
                lanes: 1,
                road_type: 0,
                midpoint: (39.9, 116.3 + i as f64 * 0.001),
            })
            .collect();
        let net = RoadNetwork::new(segments, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let policy = UniformPolicy { fanout: 1 };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = stochastic_generate(&policy, &net, 0, 3, T0, 50, &mut rng).unwrap();
        assert!(s.reached);
        assert_eq!(s.traj.len(), 4);
        assert_eq!(s.step_logps, vec![0.0, 0.0, 0.0], "forced moves have log-probability 0");

        // dead end: corridor end has no successor
        let mut rng2 = ChaCha8Rng::seed_from_u64(4);
        let s2 = stochastic_generate(&policy, &net, 2, 0, T0, 50, &mut rng2).unwrap();
        assert!(!s2.reached, "cannot reach backwards; partial is flagged");

        let run = |seed: u64| {
            let net = synth_grid(4, 4, 0.0, 5).unwrap();
            let ids: Vec<u64> = net.segments().iter().map(|s| s.id).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            stochastic_generate(
                &UniformPolicy { fanout: 4 },
                &net,
                ids[0],
                ids[ids.len() - 1],
                T0,
                64,
                &mut rng,
            )
            .unwrap()
            .traj
        };
        assert_eq!(run(11), run(11), "fixed seed reproduces the draw sequence");
    }

    #[test]
    fn skeleton_mapping_lengths_and_ratio() {
        let net = synth_grid(4, 4, 0.0, 6).unwrap();
        let p = partition_network(&net, 2, 0.3, 3).unwrap();
        let b = boundary_sets(&net, &p, &[]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);

        // n = 1: no transitions, skeleton is origin and destination
        let regional = Trajectory::single(0, T0);
        let sk = map_regional_trajectory(&regional, 10, 20, &b, &mut rng).unwrap();
        assert_eq!(sk, vec![10, 20]);

        // n = 3 inserts two boundary segments
        let pair = b.pairs().next().map(|(&(a, c), _)| (a, c)).unwrap();
        let regional3 = traj(&[
            (pair.0 as u64, T0),
            (pair.1 as u64, T0 + 10.0),
            (pair.0 as u64, T0 + 20.0),
        ]);
        let sk3 = map_regional_trajectory(&regional3, 10, 20, &b, &mut rng).unwrap();
        assert_eq!(sk3.len(), 4);

        // missing pair is a mapping error
        let empty = BoundarySets::default();
        assert!(matches!(
            map_regional_trajectory(&regional3, 10, 20, &empty, &mut rng),
            Err(Error::EmptyBoundary { .. })
        ));
    }

    #[test]
    fn boundary_sampling_follows_smoothed_counts() {
        // counts (9, 1): zero-count smoothing leaves positive counts alone,
        // so draws follow 9:1; chi-square at p = 0.01, one degree of freedom
        let net = synth_grid(2, 2, 0.0, 1).unwrap();
        let seg_a = net.segments()[0].id;
        let seg_b = net.segments()[1].id;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        std::fs::write(&path, format!("0,1,{seg_a},9\n0,1,{seg_b},1\n")).unwrap();
        let b = BoundarySets::load(&path, &net).unwrap();
        let regional = traj(&[(0, T0), (1, T0 + 5.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut hits_a = 0u64;
        let n = 10_000;
        for _ in 0..n {
            let sk = map_regional_trajectory(&regional, 99, 98, &b, &mut rng).unwrap();
            if sk[1] == seg_a {
                hits_a += 1;
            }
        }
        let e1 = n as f64 * 0.9;
        let e2 = n as f64 * 0.1;
        let chi2 = (hits_a as f64 - e1).powi(2) / e1 + ((n - hits_a) as f64 - e2).powi(2) / e2;
        assert!(chi2 < 6.635, "chi2 {chi2}, hits {hits_a}");
    }

    #[test]
    fn two_stage_endpoints_and_continuity() {
        let net = synth_grid(6, 6, 0.0, 13).unwrap();
        let p = partition_network(&net, 4, 0.1, 5).unwrap();
        let b = boundary_sets(&net, &p, &[]).unwrap();
        let rn = region_network(&net, &p, &b).unwrap();
        let road_model = PolicyModel::new(&net, ModelDims::tiny(), 1).unwrap();
        let region_model = PolicyModel::new(&rn, ModelDims::tiny(), 2).unwrap();
        let ids: Vec<u64> = net.segments().iter().map(|s| s.id).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut cross_region_seen = false;
        for trial in 0..25 {
            let a = ids[(trial * 7) % ids.len()];
            let d = ids[(trial * 13 + 40) % ids.len()];
            let (t, stats) = two_stage_generate(
                &road_model,
                &region_model,
                &net,
                &rn,
                &p,
                &b,
                a,
                d,
                T0,
                &TwoStageBudgets::default(),
                &mut rng,
            )
            .unwrap();
            assert_eq!(t.od(), (a, d), "output endpoints are always the task OD");
            assert!(t.is_continuous(&net));
            assert!(stats.expansions > 0 || a == d);
            if p.region_of(&net, a).unwrap() != p.region_of(&net, d).unwrap() {
                cross_region_seen = true;
            }
        }
        assert!(cross_region_seen);
    }
}
