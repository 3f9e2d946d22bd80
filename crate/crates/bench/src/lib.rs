//! Shared fixtures for the benchmarks.

use nvheat::engine::{CycleConfig, EngineMode};
use nvheat::nv_model::RateConstants;

/// Default engine point: Ω = 1.6 rad/µs, duty 1/3, action 0.05.
pub fn engine_point(mode: EngineMode) -> CycleConfig {
    CycleConfig::from_action(0.05, 1.6, 1.0 / 3.0, 0.41, 0.76, mode).expect("valid defaults")
}

pub fn rates() -> RateConstants {
    RateConstants::default()
}
