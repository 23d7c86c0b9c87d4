//! Spatial-temporal trajectories: ordered (segment, timestamp) points, the
//! continuity predicate, and the line-oriented trajectory file format
//! (`id seg@t seg@t ...`, optional trailing `partial` marker).

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::roadnet::{RoadNetwork, SegmentId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct STPoint {
    pub segment: SegmentId,
    /// seconds since epoch
    pub timestamp: f64,
}

impl STPoint {
    pub fn new(segment: SegmentId, timestamp: f64) -> Self {
        Self { segment, timestamp }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    points: Vec<STPoint>,
}

impl Trajectory {
    /// Non-empty, finite, non-decreasing timestamps. Continuity is not
    /// required here; arbitrary input may be discontinuous.
    pub fn new(points: Vec<STPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("trajectory with no points".into()));
        }
        for w in points.windows(2) {
            if !(w[0].timestamp <= w[1].timestamp) {
                return Err(Error::InvalidArgument(format!(
                    "timestamps must be non-decreasing: {} then {}",
                    w[0].timestamp, w[1].timestamp
                )));
            }
        }
        if points.iter().any(|p| !p.timestamp.is_finite()) {
            return Err(Error::InvalidArgument("non-finite timestamp".into()));
        }
        Ok(Self { points })
    }

    pub fn single(segment: SegmentId, timestamp: f64) -> Self {
        Self { points: vec![STPoint::new(segment, timestamp)] }
    }

    pub fn points(&self) -> &[STPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> &STPoint {
        &self.points[0]
    }

    pub fn last(&self) -> &STPoint {
        self.points.last().unwrap()
    }

    pub fn origin(&self) -> SegmentId {
        self.first().segment
    }

    pub fn destination(&self) -> SegmentId {
        self.last().segment
    }

    pub fn od(&self) -> (SegmentId, SegmentId) {
        (self.origin(), self.destination())
    }

    /// Appends a point; the caller guarantees timestamp monotonicity.
    pub fn push(&mut self, p: STPoint) {
        debug_assert!(p.timestamp >= self.last().timestamp);
        self.points.push(p);
    }

    pub fn prefix(&self, len: usize) -> Trajectory {
        debug_assert!(len >= 1 && len <= self.points.len());
        Trajectory { points: self.points[..len].to_vec() }
    }

    /// True when every consecutive segment pair is adjacent in the network.
    pub fn is_continuous(&self, net: &RoadNetwork) -> bool {
        self.points
            .windows(2)
            .all(|w| net.is_adjacent(w[0].segment, w[1].segment))
    }

    pub fn visits_any_closed(&self, net: &RoadNetwork) -> bool {
        self.points.iter().any(|p| net.is_closed(p.segment))
    }

    /// Segments with consecutive duplicates collapsed (used by the loop filter).
    pub fn has_repeated_segment(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.points.iter().any(|p| !seen.insert(p.segment))
    }
}

/// One record of a trajectory file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajRecord {
    pub id: u64,
    pub traj: Trajectory,
    pub partial: bool,
}

pub fn write_trajectories(path: &Path, records: &[TrajRecord]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    for rec in records {
        write!(w, "{}", rec.id)?;
        for p in rec.traj.points() {
            write!(w, " {}@{:.3}", p.segment, p.timestamp)?;
        }
        if rec.partial {
            write!(w, " partial")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectories(path: &Path) -> Result<Vec<TrajRecord>> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let pathstr = path.display().to_string();
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.split(';').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let perr = |msg: String| Error::Parse { path: pathstr.clone(), line: lineno, msg };
        let mut tokens = line.split_whitespace();
        let id = tokens
            .next()
            .unwrap()
            .parse::<u64>()
            .map_err(|_| perr("bad trajectory id".into()))?;
        let mut points = Vec::new();
        let mut partial = false;
        for tok in tokens {
            if tok == "partial" {
                partial = true;
                continue;
            }
            let (seg, ts) = tok
                .split_once('@')
                .ok_or_else(|| perr(format!("expected seg@timestamp, got '{tok}'")))?;
            let segment = seg
                .parse::<u64>()
                .map_err(|_| perr(format!("bad segment id '{seg}'")))?;
            let timestamp = ts
                .parse::<f64>()
                .map_err(|_| perr(format!("bad timestamp '{ts}'")))?;
            points.push(STPoint::new(segment, timestamp));
        }
        let traj = Trajectory::new(points).map_err(|e| perr(e.to_string()))?;
        out.push(TrajRecord { id, traj, partial });
    }
    Ok(out)
}

/// Validates corpus records against a network: every segment exists.
pub fn validate_against(records: &[TrajRecord], net: &RoadNetwork) -> Result<()> {
    for rec in records {
        for p in rec.traj.points() {
            if !net.contains(p.segment) {
                return Err(Error::ReferentialIntegrity {
                    id: p.segment,
                    context: format!("trajectory {}", rec.id),
                });
            }
        }
    }
    Ok(())
}

/// Corpus preprocessing: drops trajectories shorter than 5 segments and
/// trajectories that revisit a segment.
pub fn preprocess_corpus(records: Vec<TrajRecord>) -> Vec<TrajRecord> {
    records
        .into_iter()
        .filter(|r| r.traj.len() >= 5 && !r.traj.has_repeated_segment())
        .collect()
}
