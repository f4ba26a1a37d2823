//! Shared fixtures for the pipeline benchmarks.

use sigtriage_core::synth::planted_pool;
use sigtriage_core::trajectory::median_user_turns;
use sigtriage_core::{build_reports, DetectorConfig, SignalReport, Trajectory};

/// The 500-trajectory planted pool with a detector config tuned to it.
pub fn planted(seed: u64) -> (Vec<Trajectory>, DetectorConfig) {
    let (pool, _) = planted_pool(seed);
    let mut cfg = DetectorConfig::default();
    cfg.interaction.baseline_user_turns = median_user_turns(&pool);
    (pool, cfg)
}

pub fn planted_with_reports(seed: u64) -> (Vec<Trajectory>, Vec<SignalReport>) {
    let (pool, cfg) = planted(seed);
    let reports = build_reports(&pool, &cfg);
    (pool, reports)
}
