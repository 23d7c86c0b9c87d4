//! Desk-scale laboratory for continuous trajectory generation on road
//! networks: a search-hypothesis neural movement policy, adversarial rewards,
//! partition-guided two-stage generation, and a macro/micro evaluation suite.

pub mod error;
pub mod generator;
pub mod metrics;
pub mod numkernel;
pub mod regions;
pub mod roadnet;
pub mod searchgen;
pub mod traj;

pub use error::{Error, Result};
pub use roadnet::{haversine_distance, load_network, synth_grid, RoadNetwork, RoadSegment, SegmentId};
pub use traj::{STPoint, TrajRecord, Trajectory};
