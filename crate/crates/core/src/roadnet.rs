//! Road-network graph model: attributed segments, directed segment-to-segment
//! adjacency, geometry, context-vector encoding, synthetic grids, and the
//! line-oriented network file format.
//!
//! The graph is segment-centric: nodes are road segments and edges are
//! permitted transitions; intersections are implicit.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numkernel::NumArray;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

pub type SegmentId = u64;

#[derive(Debug, Clone, PartialEq)]
pub struct RoadSegment {
    pub id: SegmentId,
    /// meters, > 0
    pub length: f64,
    /// meters, > 0
    pub width: f64,
    /// km/h, > 0
    pub max_speed: f64,
    pub lanes: u32,
    pub road_type: u32,
    /// (latitude, longitude) of the segment midpoint, degrees
    pub midpoint: (f64, f64),
}

impl RoadSegment {
    fn validate(&self) -> Result<()> {
        let (lat, lon) = self.midpoint;
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::InvalidCoordinate { lat, lon });
        }
        for (name, v) in [("length", self.length), ("width", self.width), ("max_speed", self.max_speed)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "segment {}: {name} must be finite and positive, got {v}",
                    self.id
                )));
            }
        }
        if self.lanes == 0 {
            return Err(Error::InvalidArgument(format!("segment {}: lanes must be >= 1", self.id)));
        }
        Ok(())
    }

    /// Seconds to traverse at the speed limit.
    pub fn travel_seconds(&self) -> f64 {
        self.length / (self.max_speed * 1000.0 / 3600.0)
    }
}

/// Great-circle distance in meters between two (lat, lon) points.
pub fn haversine_distance(a: (f64, f64), b: (f64, f64)) -> Result<f64> {
    for (lat, lon) in [a, b] {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::InvalidCoordinate { lat, lon });
        }
    }
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let s = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    Ok(2.0 * EARTH_RADIUS_M * s.sqrt().asin())
}

struct NetworkCore {
    /// sorted by id
    segments: Vec<RoadSegment>,
    index_of: HashMap<SegmentId, usize>,
    /// successor indices per segment index, sorted
    successors: Vec<Vec<usize>>,
    /// predecessor indices per segment index, sorted
    predecessors: Vec<Vec<usize>>,
}

/// Immutable directed road network. Cloning is cheap; closures produce a
/// derived view sharing the same core.
#[derive(Clone)]
pub struct RoadNetwork {
    core: Arc<NetworkCore>,
    closed: Arc<HashSet<SegmentId>>,
}

impl std::fmt::Debug for RoadNetwork {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RoadNetwork")
            .field("segments", &self.core.segments.len())
            .field("closed", &self.closed.len())
            .finish()
    }
}

impl RoadNetwork {
    pub fn new(mut segments: Vec<RoadSegment>, edges: &[(SegmentId, SegmentId)]) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::EmptyInput("network with no segments".into()));
        }
        segments.sort_by_key(|s| s.id);
        let mut index_of = HashMap::with_capacity(segments.len());
        for (i, seg) in segments.iter().enumerate() {
            seg.validate()?;
            if index_of.insert(seg.id, i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate segment id {}", seg.id)));
            }
        }
        let mut successors = vec![Vec::new(); segments.len()];
        let mut predecessors = vec![Vec::new(); segments.len()];
        for &(from, to) in edges {
            let fi = *index_of.get(&from).ok_or(Error::ReferentialIntegrity {
                id: from,
                context: "edge source".into(),
            })?;
            let ti = *index_of.get(&to).ok_or(Error::ReferentialIntegrity {
                id: to,
                context: "edge target".into(),
            })?;
            successors[fi].push(ti);
            predecessors[ti].push(fi);
        }
        for list in successors.iter_mut().chain(predecessors.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self {
            core: Arc::new(NetworkCore { segments, index_of, successors, predecessors }),
            closed: Arc::new(HashSet::new()),
        })
    }

    pub fn len(&self) -> usize {
        self.core.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.core.segments.is_empty()
    }

    pub fn segments(&self) -> &[RoadSegment] {
        &self.core.segments
    }

    pub fn contains(&self, id: SegmentId) -> bool {
        self.core.index_of.contains_key(&id)
    }

    pub fn index_of(&self, id: SegmentId) -> Result<usize> {
        self.core.index_of.get(&id).copied().ok_or(Error::MissingSegment(id))
    }

    pub fn segment(&self, id: SegmentId) -> Result<&RoadSegment> {
        Ok(&self.core.segments[self.index_of(id)?])
    }

    pub fn segment_at(&self, index: usize) -> &RoadSegment {
        &self.core.segments[index]
    }

    pub fn id_at(&self, index: usize) -> SegmentId {
        self.core.segments[index].id
    }

    pub fn closed(&self) -> &HashSet<SegmentId> {
        &self.closed
    }

    pub fn is_closed(&self, id: SegmentId) -> bool {
        self.closed.contains(&id)
    }

    /// Derived view with the given segments marked unreachable. The base
    /// network is untouched; closures accumulate.
    pub fn with_closures(&self, ids: &[SegmentId]) -> Result<Self> {
        let mut closed = (*self.closed).clone();
        for &id in ids {
            if !self.contains(id) {
                return Err(Error::MissingSegment(id));
            }
            closed.insert(id);
        }
        Ok(Self { core: Arc::clone(&self.core), closed: Arc::new(closed) })
    }

    /// All successors in the base topology, ignoring closures.
    pub fn successors_all(&self, id: SegmentId) -> Result<impl Iterator<Item = SegmentId> + '_> {
        let idx = self.index_of(id)?;
        Ok(self.core.successors[idx].iter().map(|&i| self.core.segments[i].id))
    }

    /// Successors excluding closed segments, sorted by id.
    pub fn open_successors(&self, id: SegmentId) -> Result<Vec<SegmentId>> {
        let idx = self.index_of(id)?;
        Ok(self.core.successors[idx]
            .iter()
            .map(|&i| self.core.segments[i].id)
            .filter(|s| !self.closed.contains(s))
            .collect())
    }

    pub fn successor_indices(&self, index: usize) -> &[usize] {
        &self.core.successors[index]
    }

    pub fn predecessor_indices(&self, index: usize) -> &[usize] {
        &self.core.predecessors[index]
    }

    pub fn is_adjacent(&self, from: SegmentId, to: SegmentId) -> bool {
        match (self.index_of(from), self.index_of(to)) {
            (Ok(fi), Ok(ti)) => self.core.successors[fi].binary_search(&ti).is_ok(),
            _ => false,
        }
    }

    /// Stable FNV-1a hash over segment ids, attributes, and adjacency;
    /// recorded in checkpoints to catch network/model mismatches.
    pub fn topology_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for seg in &self.core.segments {
            eat(&seg.id.to_le_bytes());
            eat(&seg.length.to_bits().to_le_bytes());
            eat(&seg.midpoint.0.to_bits().to_le_bytes());
            eat(&seg.midpoint.1.to_bits().to_le_bytes());
        }
        for succ in &self.core.successors {
            for &s in succ {
                eat(&(s as u64).to_le_bytes());
            }
            eat(&[0xff]);
        }
        h
    }

    /// Hop distances from every segment to `dest` along reversed edges
    /// (base topology). `usize::MAX` marks unreachable.
    pub fn hops_to(&self, dest: SegmentId) -> Result<Vec<usize>> {
        let di = self.index_of(dest)?;
        let mut dist = vec![usize::MAX; self.len()];
        dist[di] = 0;
        let mut queue = std::collections::VecDeque::from([di]);
        while let Some(u) = queue.pop_front() {
            for &p in &self.core.predecessors[u] {
                if dist[p] == usize::MAX {
                    dist[p] = dist[u] + 1;
                    queue.push_back(p);
                }
            }
        }
        Ok(dist)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        writeln!(w, "#segments")?;
        for s in &self.core.segments {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                s.id, s.length, s.width, s.max_speed, s.lanes, s.road_type, s.midpoint.0, s.midpoint.1
            )?;
        }
        writeln!(w, "#edges")?;
        for (fi, succ) in self.core.successors.iter().enumerate() {
            for &ti in succ {
                writeln!(w, "{},{}", self.core.segments[fi].id, self.core.segments[ti].id)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

enum LoadSection {
    None,
    Segments,
    Edges,
}

/// Loads a network from the line-oriented text format: a `#segments` section
/// of `id,length,width,max_speed,lanes,road_type,lat,lon` lines followed by a
/// `#edges` section of `from_id,to_id` lines. `;` starts a comment.
pub fn load_network(path: &Path) -> Result<RoadNetwork> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let pathstr = path.display().to_string();
    let mut section = LoadSection::None;
    let mut segments = Vec::new();
    let mut edges = Vec::new();

    let perr = |line: usize, msg: String| Error::Parse { path: pathstr.clone(), line, msg };

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.split(';').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line {
            "#segments" => {
                section = LoadSection::Segments;
                continue;
            }
            "#edges" => {
                section = LoadSection::Edges;
                continue;
            }
            _ => {}
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match section {
            LoadSection::None => {
                return Err(perr(lineno, "data before a #segments/#edges header".into()));
            }
            LoadSection::Segments => {
                if fields.len() != 8 {
                    return Err(perr(lineno, format!("expected 8 fields, got {}", fields.len())));
                }
                let field = |i: usize, name: &str| -> Result<f64> {
                    fields[i]
                        .parse::<f64>()
                        .map_err(|_| perr(lineno, format!("bad {name} '{}'", fields[i])))
                };
                let id = fields[0]
                    .parse::<u64>()
                    .map_err(|_| perr(lineno, format!("bad id '{}'", fields[0])))?;
                let lanes = fields[4]
                    .parse::<u32>()
                    .map_err(|_| perr(lineno, format!("bad lanes '{}'", fields[4])))?;
                let road_type = fields[5]
                    .parse::<u32>()
                    .map_err(|_| perr(lineno, format!("bad road_type '{}'", fields[5])))?;
                segments.push(RoadSegment {
                    id,
                    length: field(1, "length")?,
                    width: field(2, "width")?,
                    max_speed: field(3, "max_speed")?,
                    lanes,
                    road_type,
                    midpoint: (field(6, "lat")?, field(7, "lon")?),
                });
            }
            LoadSection::Edges => {
                if fields.len() != 2 {
                    return Err(perr(lineno, format!("expected 2 fields, got {}", fields.len())));
                }
                let from = fields[0]
                    .parse::<u64>()
                    .map_err(|_| perr(lineno, format!("bad from_id '{}'", fields[0])))?;
                let to = fields[1]
                    .parse::<u64>()
                    .map_err(|_| perr(lineno, format!("bad to_id '{}'", fields[1])))?;
                edges.push((from, to));
            }
        }
    }
    RoadNetwork::new(segments, &edges)
}

/// Synthetic grid of `rows x cols` intersections with one directed segment per
/// street block and direction. A seeded fraction of blocks is one-way.
/// Attributes are drawn deterministically from the seed.
pub fn synth_grid(rows: usize, cols: usize, one_way_fraction: f64, seed: u64) -> Result<RoadNetwork> {
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid needs rows, cols >= 2, got {rows}x{cols}"
        )));
    }
    if !(0.0..=1.0).contains(&one_way_fraction) {
        return Err(Error::InvalidArgument(format!(
            "one_way_fraction must be in [0,1], got {one_way_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base_lat = 39.90;
    let base_lon = 116.30;
    let step = 0.001; // about 111 m of latitude
    let coord = |r: usize, c: usize| (base_lat + r as f64 * step, base_lon + c as f64 * step);

    let speeds = [30.0, 40.0, 50.0, 60.0, 80.0];
    let mut segments = Vec::new();
    let mut edges = Vec::new();
    // (intersection -> departing segment ids) for adjacency construction
    let mut departing: BTreeMap<(usize, usize), Vec<(SegmentId, (usize, usize))>> = BTreeMap::new();
    let mut arriving: Vec<(SegmentId, (usize, usize))> = Vec::new();
    let mut next_id: SegmentId = 0;

    let add_block = |a: (usize, usize),
                         b: (usize, usize),
                         rng: &mut ChaCha8Rng,
                         segments: &mut Vec<RoadSegment>,
                         departing: &mut BTreeMap<(usize, usize), Vec<(SegmentId, (usize, usize))>>,
                         arriving: &mut Vec<(SegmentId, (usize, usize))>,
                         next_id: &mut SegmentId|
     -> Result<()> {
        let pa = coord(a.0, a.1);
        let pb = coord(b.0, b.1);
        let length = haversine_distance(pa, pb)?;
        let midpoint = ((pa.0 + pb.0) / 2.0, (pa.1 + pb.1) / 2.0);
        let width = 5.0 + rng.gen::<f64>() * 15.0;
        let max_speed = speeds[rng.gen_range(0..speeds.len())];
        let lanes = rng.gen_range(1..=3u32);
        let road_type = rng.gen_range(0..5u32);
        let one_way = rng.gen::<f64>() < one_way_fraction;
        let mut dirs = vec![(a, b)];
        if !one_way {
            dirs.push((b, a));
        } else if rng.gen::<bool>() {
            dirs[0] = (b, a);
        }
        for (from, to) in dirs {
            let id = *next_id;
            *next_id += 1;
            segments.push(RoadSegment { id, length, width, max_speed, lanes, road_type, midpoint });
            departing.entry(from).or_default().push((id, to));
            arriving.push((id, to));
        }
        Ok(())
    };

    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                add_block((r, c), (r, c + 1), &mut rng, &mut segments, &mut departing, &mut arriving, &mut next_id)?;
            }
            if r + 1 < rows {
                add_block((r, c), (r + 1, c), &mut rng, &mut segments, &mut departing, &mut arriving, &mut next_id)?;
            }
        }
    }

    // segment (a->b) connects to every segment departing from b
    for (id, to) in &arriving {
        if let Some(next) = departing.get(to) {
            for (nid, _) in next {
                edges.push((*id, *nid));
            }
        }
    }
    RoadNetwork::new(segments, &edges)
}

/// Per-network context-vector encoder: min-max normalized continuous
/// attributes, one-hot lanes and road type, min-max normalized midpoint.
/// Attributes that are constant across the network normalize to 0.
pub struct ContextEncoder {
    lane_values: Vec<u32>,
    type_values: Vec<u32>,
    ranges: [(f64, f64); 5], // length, width, max_speed, lat, lon
}

impl ContextEncoder {
    pub fn new(net: &RoadNetwork) -> Self {
        let mut lane_values: Vec<u32> = net.segments().iter().map(|s| s.lanes).collect();
        lane_values.sort_unstable();
        lane_values.dedup();
        let mut type_values: Vec<u32> = net.segments().iter().map(|s| s.road_type).collect();
        type_values.sort_unstable();
        type_values.dedup();
        let mut ranges = [(f64::INFINITY, f64::NEG_INFINITY); 5];
        for s in net.segments() {
            for (slot, v) in [s.length, s.width, s.max_speed, s.midpoint.0, s.midpoint.1]
                .into_iter()
                .enumerate()
            {
                ranges[slot].0 = ranges[slot].0.min(v);
                ranges[slot].1 = ranges[slot].1.max(v);
            }
        }
        Self { lane_values, type_values, ranges }
    }

    pub fn dim(&self) -> usize {
        5 + self.lane_values.len() + self.type_values.len()
    }

    fn norm(&self, slot: usize, v: f64) -> f64 {
        let (lo, hi) = self.ranges[slot];
        if hi > lo {
            (v - lo) / (hi - lo)
        } else {
            0.0
        }
    }

    pub fn encode(&self, net: &RoadNetwork, id: SegmentId) -> Result<Vec<f64>> {
        let s = net.segment(id)?;
        let mut v = Vec::with_capacity(self.dim());
        v.push(self.norm(0, s.length));
        v.push(self.norm(1, s.width));
        v.push(self.norm(2, s.max_speed));
        for &lane in &self.lane_values {
            v.push(if lane == s.lanes { 1.0 } else { 0.0 });
        }
        for &ty in &self.type_values {
            v.push(if ty == s.road_type { 1.0 } else { 0.0 });
        }
        v.push(self.norm(3, s.midpoint.0));
        v.push(self.norm(4, s.midpoint.1));
        Ok(v)
    }

    /// All context vectors stacked as a `|L| x dim` matrix in index order.
    pub fn matrix(&self, net: &RoadNetwork) -> Result<NumArray> {
        let mut data = Vec::with_capacity(net.len() * self.dim());
        for seg in net.segments() {
            data.extend(self.encode(net, seg.id)?);
        }
        NumArray::new(vec![net.len(), self.dim()], data)
    }
}

/// Convenience wrapper building the encoder per call; callers on a hot path
/// should hold a [`ContextEncoder`].
pub fn context_vector(net: &RoadNetwork, id: SegmentId) -> Result<Vec<f64>> {
    ContextEncoder::new(net).encode(net, id)
}
