//! Trust-based assured distributed data fusion for multi-agent aerial
//! surveillance.
//!
//! Each simulated UAV detects ground objects with a downward camera, tracks
//! them locally, exchanges tracks with agents in radio range and fuses them
//! with covariance intersection. Beta-distributed trust in every peer and
//! every fused track is estimated from cross-agent consistency and used to
//! weight fusion and flag suspect tracks.

pub mod assignment;
pub mod attack;
pub mod ddf;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod ids;
pub mod metrics;
pub mod network;
pub mod par;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod tracking;
pub mod trust;

pub use error::{Error, Result};
pub use ids::{AgentId, TrackId};
