//! Model-free triage of agent trajectories.
//!
//! Parse trajectories, run lexical and structural signal detectors, sample
//! review sets, and compute review statistics.

pub mod analysis;
pub mod annotation;
pub mod canon;
pub mod signals;
pub mod stats;
pub mod synth;
pub mod textmatch;
pub mod trajectory;
pub mod triage;

pub use signals::{Category, SignalInstance};
pub use trajectory::{Message, Role, Trajectory};
pub use triage::{build_report, build_reports, DetectorConfig, SampleSet, SignalReport, Strategy, TriageConfig};
