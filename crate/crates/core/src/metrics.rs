//! Evaluation suite: macro pattern similarity (travel distance, radius of
//! gyration, location frequency, OD flow, compared by Jensen-Shannon
//! divergence, base 2) and micro per-OD distances (Hausdorff, DTW, EDR).

use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::roadnet::{haversine_distance, RoadNetwork, SegmentId};
use crate::traj::Trajectory;

/// Discrete distribution over ordered labels, probabilities summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<K: Ord + Clone> {
    items: Vec<(K, f64)>,
}

impl<K: Ord + Clone> Distribution<K> {
    pub fn from_counts(counts: BTreeMap<K, f64>) -> Result<Self> {
        let total: f64 = counts.values().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::InvalidArgument(format!("bad distribution mass {total}")));
        }
        if counts.values().any(|&c| c < 0.0) {
            return Err(Error::InvalidArgument("negative count".into()));
        }
        Ok(Self { items: counts.into_iter().map(|(k, c)| (k, c / total)).collect() })
    }

    pub fn items(&self) -> &[(K, f64)] {
        &self.items
    }

    pub fn total_mass(&self) -> f64 {
        self.items.iter().map(|(_, p)| p).sum()
    }

    pub fn prob(&self, key: &K) -> f64 {
        self.items
            .binary_search_by(|(k, _)| k.cmp(key))
            .map(|i| self.items[i].1)
            .unwrap_or(0.0)
    }

    /// Jensen-Shannon divergence, logarithm base 2, over the union support.
    /// 0 for identical distributions, exactly 1 for disjoint supports.
    pub fn jsd(&self, other: &Self) -> f64 {
        let mut acc = 0.0;
        let (mut i, mut j) = (0, 0);
        let mut term = |p: f64, q: f64| {
            let m = 0.5 * (p + q);
            if p > 0.0 {
                acc += 0.5 * p * (p / m).log2();
            }
            if q > 0.0 {
                acc += 0.5 * q * (q / m).log2();
            }
        };
        while i < self.items.len() || j < other.items.len() {
            match (self.items.get(i), other.items.get(j)) {
                (Some((ka, pa)), Some((kb, pb))) => match ka.cmp(kb) {
                    std::cmp::Ordering::Less => {
                        term(*pa, 0.0);
                        i += 1;
                    }
                    std::cmp::Ordering::Greater => {
                        term(0.0, *pb);
                        j += 1;
                    }
                    std::cmp::Ordering::Equal => {
                        term(*pa, *pb);
                        i += 1;
                        j += 1;
                    }
                },
                (Some((_, pa)), None) => {
                    term(*pa, 0.0);
                    i += 1;
                }
                (None, Some((_, pb))) => {
                    term(0.0, *pb);
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        acc
    }
}

/// Sum of segment lengths over the trajectory's points.
pub fn travel_distance(t: &Trajectory, net: &RoadNetwork) -> Result<f64> {
    let mut sum = 0.0;
    for p in t.points() {
        sum += net.segment(p.segment)?.length;
    }
    Ok(sum)
}

/// Root-mean-square haversine distance of visited segment midpoints from
/// their arithmetic-mean centroid.
pub fn radius_of_gyration(t: &Trajectory, net: &RoadNetwork) -> Result<f64> {
    let mut lat = 0.0;
    let mut lon = 0.0;
    for p in t.points() {
        let m = net.segment(p.segment)?.midpoint;
        lat += m.0;
        lon += m.1;
    }
    let n = t.len() as f64;
    let centroid = (lat / n, lon / n);
    let mut acc = 0.0;
    for p in t.points() {
        let d = haversine_distance(net.segment(p.segment)?.midpoint, centroid)?;
        acc += d * d;
    }
    Ok((acc / n).sqrt())
}

/// Visit counts per segment over the whole set, normalized.
pub fn location_frequency(
    set: &[Trajectory],
    net: &RoadNetwork,
) -> Result<Distribution<SegmentId>> {
    if set.is_empty() {
        return Err(Error::EmptyInput("location_frequency over empty set".into()));
    }
    let mut counts: BTreeMap<SegmentId, f64> = BTreeMap::new();
    for t in set {
        for p in t.points() {
            if !net.contains(p.segment) {
                return Err(Error::MissingSegment(p.segment));
            }
            *counts.entry(p.segment).or_insert(0.0) += 1.0;
        }
    }
    Distribution::from_counts(counts)
}

/// (origin, destination) pair counts, normalized.
pub fn od_flow(set: &[Trajectory]) -> Result<Distribution<(SegmentId, SegmentId)>> {
    if set.is_empty() {
        return Err(Error::EmptyInput("od_flow over empty set".into()));
    }
    let mut counts: BTreeMap<(SegmentId, SegmentId), f64> = BTreeMap::new();
    for t in set {
        *counts.entry(t.od()).or_insert(0.0) += 1.0;
    }
    Distribution::from_counts(counts)
}

fn midpoints(t: &Trajectory, net: &RoadNetwork) -> Result<Vec<(f64, f64)>> {
    t.points().iter().map(|p| Ok(net.segment(p.segment)?.midpoint)).collect()
}

/// Classic dynamic-time-warping distance with haversine point costs between
/// segment midpoints, boundary-matched alignment.
pub fn dtw(t1: &Trajectory, t2: &Trajectory, net: &RoadNetwork) -> Result<f64> {
    if t1.is_empty() || t2.is_empty() {
        return Err(Error::EmptyInput("dtw over empty trajectory".into()));
    }
    let a = midpoints(t1, net)?;
    let b = midpoints(t2, net)?;
    let (n, m) = (a.len(), b.len());
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let cost = haversine_distance(a[i - 1], b[j - 1])?;
            cur[j] = cost + prev[j].min(cur[j - 1]).min(prev[j - 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

/// Symmetric Hausdorff distance over segment midpoints.
pub fn hausdorff(t1: &Trajectory, t2: &Trajectory, net: &RoadNetwork) -> Result<f64> {
    if t1.is_empty() || t2.is_empty() {
        return Err(Error::EmptyInput("hausdorff over empty trajectory".into()));
    }
    let a = midpoints(t1, net)?;
    let b = midpoints(t2, net)?;
    let directed = |from: &[(f64, f64)], to: &[(f64, f64)]| -> Result<f64> {
        let mut worst = 0.0_f64;
        for p in from {
            let mut best = f64::INFINITY;
            for q in to {
                best = best.min(haversine_distance(*p, *q)?);
            }
            worst = worst.max(best);
        }
        Ok(worst)
    };
    Ok(directed(&a, &b)?.max(directed(&b, &a)?))
}

/// Edit distance on real sequence: match predicate is identical segment id,
/// insert/delete/substitute cost 1, normalized by the longer length.
pub fn edr(t1: &Trajectory, t2: &Trajectory) -> Result<f64> {
    if t1.is_empty() || t2.is_empty() {
        return Err(Error::EmptyInput("edr over empty trajectory".into()));
    }
    let a: Vec<SegmentId> = t1.points().iter().map(|p| p.segment).collect();
    let b: Vec<SegmentId> = t2.points().iter().map(|p| p.segment).collect();
    let (n, m) = (a.len(), b.len());
    let mut prev: Vec<f64> = (0..=m).map(|j| j as f64).collect();
    let mut cur = vec![0.0; m + 1];
    for i in 1..=n {
        cur[0] = i as f64;
        for j in 1..=m {
            let subcost = if a[i - 1] == b[j - 1] { 0.0 } else { 1.0 };
            cur[j] = (prev[j - 1] + subcost).min(prev[j] + 1.0).min(cur[j - 1] + 1.0);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m] / n.max(m) as f64)
}

/// Fixed-width histogram with edges from a reference sample; out-of-range
/// values clamp into the edge bins.
pub struct Histogram {
    lo: f64,
    hi: f64,
    bins: usize,
}

impl Histogram {
    pub fn from_reference(values: &[f64], bins: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("histogram reference".into()));
        }
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { lo, hi, bins: bins.max(1) })
    }

    pub fn bin(&self, v: f64) -> usize {
        if self.hi <= self.lo {
            return 0;
        }
        let t = (v - self.lo) / (self.hi - self.lo);
        ((t * self.bins as f64).floor() as i64).clamp(0, self.bins as i64 - 1) as usize
    }

    pub fn distribution(&self, values: &[f64]) -> Result<Distribution<usize>> {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for &v in values {
            *counts.entry(self.bin(v)).or_insert(0.0) += 1.0;
        }
        Distribution::from_counts(counts)
    }
}

/// Macro JSDs, micro distance means, and bookkeeping counters.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub distance_jsd: f64,
    pub radius_jsd: f64,
    pub location_jsd: f64,
    pub odflow_jsd: f64,
    pub hausdorff_mean: f64,
    pub dtw_mean: f64,
    pub edr_mean: f64,
    pub micro_pairs: usize,
    pub micro_skipped: usize,
    pub micro_requested: usize,
    pub real_count: usize,
    pub generated_count: usize,
    pub histogram_bins: usize,
    pub seed: u64,
}

pub const EVAL_CSV_HEADER: &str = "distance_jsd,radius_jsd,location_jsd,odflow_jsd,\
hausdorff_mean,dtw_mean,edr_mean,micro_pairs,micro_skipped,micro_requested,\
real_count,generated_count,histogram_bins,seed";

impl EvalReport {
    pub fn to_csv(&self) -> String {
        format!(
            "{}\n{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            EVAL_CSV_HEADER,
            self.distance_jsd,
            self.radius_jsd,
            self.location_jsd,
            self.odflow_jsd,
            self.hausdorff_mean,
            self.dtw_mean,
            self.edr_mean,
            self.micro_pairs,
            self.micro_skipped,
            self.micro_requested,
            self.real_count,
            self.generated_count,
            self.histogram_bins,
            self.seed
        )
    }

    pub fn to_text(&self) -> String {
        format!(
            "macro similarity (Jensen-Shannon divergence, base 2; 0 = identical)\n\
             \x20 travel distance    {:.6}\n\
             \x20 radius of gyration {:.6}\n\
             \x20 location frequency {:.6}\n\
             \x20 od flow            {:.6}\n\
             micro similarity (meters / normalized; mean over OD-matched pairs)\n\
             \x20 hausdorff          {:.3}\n\
             \x20 dtw                {:.3}\n\
             \x20 edr                {:.4}\n\
             samples: {} matched pairs, {} skipped (no same-OD real trajectory), {} requested\n\
             sets: {} real, {} generated; {} histogram bins; seed {}\n",
            self.distance_jsd,
            self.radius_jsd,
            self.location_jsd,
            self.odflow_jsd,
            self.hausdorff_mean,
            self.dtw_mean,
            self.edr_mean,
            self.micro_pairs,
            self.micro_skipped,
            self.micro_requested,
            self.real_count,
            self.generated_count,
            self.histogram_bins,
            self.seed
        )
    }

    pub fn write_files(&self, text_path: &Path, csv_path: &Path) -> Result<()> {
        std::fs::write(text_path, self.to_text())?;
        std::fs::write(csv_path, self.to_csv())?;
        Ok(())
    }
}

/// Macro JSDs over the four pattern distributions plus micro distances over
/// an OD-matched sample. Micro pairs use the minimum distance when several
/// real trajectories share the OD; unmatched ODs are skipped and counted.
pub fn evaluate(
    real: &[Trajectory],
    generated: &[Trajectory],
    net: &RoadNetwork,
    micro_sample: usize,
    bins: usize,
    seed: u64,
) -> Result<EvalReport> {
    if real.is_empty() || generated.is_empty() {
        return Err(Error::EmptyInput("evaluate needs non-empty sets".into()));
    }

    let dist_of = |set: &[Trajectory]| -> Result<Vec<f64>> {
        set.iter().map(|t| travel_distance(t, net)).collect()
    };
    let radius_of = |set: &[Trajectory]| -> Result<Vec<f64>> {
        set.iter().map(|t| radius_of_gyration(t, net)).collect()
    };
    let real_distances = dist_of(real)?;
    let gen_distances = dist_of(generated)?;
    let hist_d = Histogram::from_reference(&real_distances, bins)?;
    let distance_jsd = hist_d.distribution(&real_distances)?.jsd(&hist_d.distribution(&gen_distances)?);

    let real_radius = radius_of(real)?;
    let gen_radius = radius_of(generated)?;
    let hist_r = Histogram::from_reference(&real_radius, bins)?;
    let radius_jsd = hist_r.distribution(&real_radius)?.jsd(&hist_r.distribution(&gen_radius)?);

    let location_jsd = location_frequency(real, net)?.jsd(&location_frequency(generated, net)?);
    let odflow_jsd = od_flow(real)?.jsd(&od_flow(generated)?);

    // micro: sample generated trajectories, match real by OD
    let mut by_od: BTreeMap<(SegmentId, SegmentId), Vec<&Trajectory>> = BTreeMap::new();
    for t in real {
        by_od.entry(t.od()).or_default().push(t);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..generated.len()).collect();
    order.shuffle(&mut rng);
    let take = micro_sample.min(generated.len());
    let mut hs = 0.0;
    let mut dt = 0.0;
    let mut ed = 0.0;
    let mut pairs = 0usize;
    let mut skipped = 0usize;
    for &gi in order.iter().take(take) {
        let g = &generated[gi];
        match by_od.get(&g.od()) {
            None => skipped += 1,
            Some(reals) => {
                let mut best_h = f64::INFINITY;
                let mut best_d = f64::INFINITY;
                let mut best_e = f64::INFINITY;
                for r in reals {
                    best_h = best_h.min(hausdorff(g, r, net)?);
                    best_d = best_d.min(dtw(g, r, net)?);
                    best_e = best_e.min(edr(g, r)?);
                }
                hs += best_h;
                dt += best_d;
                ed += best_e;
                pairs += 1;
            }
        }
    }
    let denom = pairs.max(1) as f64;
    Ok(EvalReport {
        distance_jsd,
        radius_jsd,
        location_jsd,
        odflow_jsd,
        hausdorff_mean: hs / denom,
        dtw_mean: dt / denom,
        edr_mean: ed / denom,
        micro_pairs: pairs,
        micro_skipped: skipped,
        micro_requested: micro_sample,
        real_count: real.len(),
        generated_count: generated.len(),
        histogram_bins: bins,
        seed,
    })
}

/// Normalized per-segment visit frequency as CSV rows (`segment_id,frequency`),
/// for external heat-map plotting.
pub fn write_heatmap_csv(path: &Path, set: &[Trajectory], net: &RoadNetwork) -> Result<()> {
    let dist = location_frequency(set, net)?;
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "segment_id,frequency")?;
    for (seg, p) in dist.items() {
        writeln!(w, "{seg},{p}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roadnet::{synth_grid, RoadSegment};
    use crate::traj::STPoint;

    fn traj(points: &[(u64, f64)]) -> Trajectory {
        Trajectory::new(points.iter().map(|&(s, t)| STPoint::new(s, t)).collect()).unwrap()
    }

    fn line_net(n: usize, spacing_m: f64) -> RoadNetwork {
        // n segments along the equator, `spacing_m` apart
        let deg = spacing_m / (2.0 * std::f64::consts::PI * crate::roadnet::EARTH_RADIUS_M / 360.0);
        let segments: Vec<RoadSegment> = (0..n)
            .map(|i| RoadSegment {
                id: i as u64,
                length: 100.0 + i as f64,
                width: 8.0,
                max_speed: 50.0,
                lanes: 1,
                road_type: 0,
                midpoint: (0.0, i as f64 * deg),
            })
            .collect();
        let edges: Vec<(u64, u64)> = (0..n as u64 - 1).map(|i| (i, i + 1)).collect();
        RoadNetwork::new(segments, &edges).unwrap()
    }

    #[test]
    fn travel_distance_sums_lengths() {
        let net = line_net(3, 100.0);
        assert_eq!(travel_distance(&traj(&[(0, 0.0)]), &net).unwrap(), 100.0);
        assert_eq!(travel_distance(&traj(&[(0, 0.0), (1, 1.0)]), &net).unwrap(), 201.0);
    }

    #[test]
    fn travel_distance_is_permutation_invariant() {
        let net = line_net(4, 100.0);
        let a = travel_distance(&traj(&[(0, 0.0), (1, 1.0), (2, 2.0)]), &net).unwrap();
        let b = travel_distance(&traj(&[(2, 0.0), (0, 1.0), (1, 2.0)]), &net).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn radius_of_single_point_is_zero() {
        let net = line_net(2, 100.0);
        assert_eq!(radius_of_gyration(&traj(&[(0, 0.0)]), &net).unwrap(), 0.0);
        // identical points: centroid averaging leaves sub-nanometer noise
        assert!(radius_of_gyration(&traj(&[(1, 0.0), (1, 5.0), (1, 9.0)]), &net).unwrap() < 1e-9);
    }

    #[test]
    fn radius_of_two_points_is_half_separation() {
        let net = line_net(2, 500.0);
        let d = haversine_distance(
            net.segment(0).unwrap().midpoint,
            net.segment(1).unwrap().midpoint,
        )
        .unwrap();
        let r = radius_of_gyration(&traj(&[(0, 0.0), (1, 1.0)]), &net).unwrap();
        assert!((r - d / 2.0).abs() / (d / 2.0) < 1e-3, "r={r}, d/2={}", d / 2.0);
    }

    #[test]
    fn metrics_ignore_timestamps() {
        let net = line_net(3, 100.0);
        let a = traj(&[(0, 0.0), (1, 1.0), (2, 2.0)]);
        let b = traj(&[(0, 1000.0), (1, 2000.0), (2, 9000.0)]);
        assert_eq!(travel_distance(&a, &net).unwrap(), travel_distance(&b, &net).unwrap());
        assert_eq!(
            radius_of_gyration(&a, &net).unwrap(),
            radius_of_gyration(&b, &net).unwrap()
        );
    }

    #[test]
    fn location_frequency_uniform_over_distinct_segments() {
        let net = line_net(3, 100.0);
        let d = location_frequency(&[traj(&[(0, 0.0), (1, 1.0), (2, 2.0)])], &net).unwrap();
        for (_, p) in d.items() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn location_frequency_invariant_under_duplication() {
        let net = line_net(3, 100.0);
        let set = vec![traj(&[(0, 0.0), (1, 1.0)]), traj(&[(1, 0.0), (2, 1.0)])];
        let doubled: Vec<Trajectory> = set.iter().chain(set.iter()).cloned().collect();
        assert_eq!(
            location_frequency(&set, &net).unwrap(),
            location_frequency(&doubled, &net).unwrap()
        );
    }

    #[test]
    fn od_flow_point_mass_and_split() {
        let set = vec![traj(&[(0, 0.0), (1, 1.0)]), traj(&[(0, 0.0), (1, 1.0)])];
        let d = od_flow(&set).unwrap();
        assert_eq!(d.prob(&(0, 1)), 1.0);
        let set2 = vec![traj(&[(0, 0.0), (1, 1.0)]), traj(&[(1, 0.0), (2, 1.0)])];
        let d2 = od_flow(&set2).unwrap();
        assert_eq!(d2.prob(&(0, 1)), 0.5);
        assert_eq!(d2.prob(&(1, 2)), 0.5);
    }

    #[test]
    fn jsd_identity_zero_disjoint_one() {
        let p = Distribution::from_counts(BTreeMap::from([(0u64, 2.0), (1, 3.0)])).unwrap();
        assert!(p.jsd(&p).abs() < 1e-12);
        let q = Distribution::from_counts(BTreeMap::from([(2u64, 1.0), (3, 1.0)])).unwrap();
        assert_eq!(p.jsd(&q), 1.0);
    }

    #[test]
    fn jsd_direct_evaluation() {
        // p=(1,0), q=(0.5,0.5) -> 0.3113 in base 2
        let p = Distribution::from_counts(BTreeMap::from([(0u64, 1.0)])).unwrap();
        let q = Distribution::from_counts(BTreeMap::from([(0u64, 0.5), (1, 0.5)])).unwrap();
        let expected = 0.5 * (4.0_f64 / 3.0).log2()
            + 0.5 * (0.5 * (2.0_f64 / 3.0).log2() + 0.5 * 2.0_f64.log2());
        assert!((p.jsd(&q) - expected).abs() < 1e-15);
        assert!((p.jsd(&q) - 0.3113).abs() < 1e-4);
    }

    #[test]
    fn dtw_of_identical_is_zero_and_symmetric() {
        let net = line_net(4, 150.0);
        let a = traj(&[(0, 0.0), (1, 1.0), (3, 2.0)]);
        let b = traj(&[(0, 0.0), (2, 1.0)]);
        assert_eq!(dtw(&a, &a, &net).unwrap(), 0.0);
        assert_eq!(dtw(&a, &b, &net).unwrap(), dtw(&b, &a, &net).unwrap());
    }

    #[test]
    fn hausdorff_subset_has_zero_directed_component() {
        let net = line_net(4, 150.0);
        let small = traj(&[(1, 0.0), (2, 1.0)]);
        let big = traj(&[(0, 0.0), (1, 1.0), (2, 2.0), (3, 3.0)]);
        // directed(small -> big) = 0, so the symmetric distance equals directed(big -> small)
        let d = hausdorff(&small, &big, &net).unwrap();
        let gap = haversine_distance(
            net.segment(0).unwrap().midpoint,
            net.segment(1).unwrap().midpoint,
        )
        .unwrap();
        assert!((d - gap).abs() < 1e-9);
    }

    #[test]
    fn edr_examples() {
        let a = traj(&[(0, 0.0), (1, 1.0), (2, 2.0)]);
        assert_eq!(edr(&a, &a).unwrap(), 0.0);
        let b = traj(&[(5, 0.0), (6, 1.0), (7, 2.0)]);
        assert_eq!(edr(&a, &b).unwrap(), 1.0);
        // "a,b,c" vs "a,c" -> one deletion / max(3,2)
        let c = traj(&[(0, 0.0), (2, 1.0)]);
        assert!((edr(&a, &c).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn evaluate_self_comparison_is_all_zero() {
        let net = synth_grid(3, 3, 0.0, 5).unwrap();
        let s0 = net.segments()[0].id;
        let s1 = net.open_successors(s0).unwrap()[0];
        let s2 = net.open_successors(s1).unwrap()[0];
        let set = vec![traj(&[(s0, 0.0), (s1, 10.0)]), traj(&[(s1, 0.0), (s2, 10.0)])];
        let r = evaluate(&set, &set, &net, 10, 100, 7).unwrap();
        assert!(r.distance_jsd.abs() < 1e-12);
        assert!(r.radius_jsd.abs() < 1e-12);
        assert!(r.location_jsd.abs() < 1e-12);
        assert!(r.odflow_jsd.abs() < 1e-12);
        assert_eq!(r.hausdorff_mean, 0.0);
        assert_eq!(r.dtw_mean, 0.0);
        assert_eq!(r.edr_mean, 0.0);
        assert_eq!(r.micro_pairs, 2, "sample clamps to available trajectories");
        assert_eq!(r.micro_skipped, 0);
    }

    #[test]
    fn evaluate_skips_unmatched_ods() {
        let net = line_net(4, 100.0);
        let real = vec![traj(&[(0, 0.0), (1, 1.0)])];
        let generated = vec![traj(&[(0, 0.0), (1, 1.0)]), traj(&[(2, 0.0), (3, 1.0)])];
        let r = evaluate(&real, &generated, &net, 10, 50, 3).unwrap();
        assert_eq!(r.micro_pairs, 1);
        assert_eq!(r.micro_skipped, 1);
    }

    #[test]
    fn evaluate_is_deterministic_under_seed() {
        let net = synth_grid(3, 3, 0.0, 5).unwrap();
        let s0 = net.segments()[0].id;
        let s1 = net.open_successors(s0).unwrap()[0];
        let set = vec![traj(&[(s0, 0.0), (s1, 10.0)])];
        let a = evaluate(&set, &set, &net, 1, 100, 42).unwrap();
        let b = evaluate(&set, &set, &net, 1, 100, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn histogram_clamps_out_of_range() {
        let h = Histogram::from_reference(&[0.0, 10.0], 10).unwrap();
        assert_eq!(h.bin(-5.0), 0);
        assert_eq!(h.bin(50.0), 9);
        assert_eq!(h.bin(0.0), 0);
        assert_eq!(h.bin(9.999), 9);
    }
}
