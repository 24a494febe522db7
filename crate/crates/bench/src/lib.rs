//! Criterion benchmarks for the simulation engine; see `benches/engine.rs`.

use casimir_core::scenario::{bundled, Scenario};

/// A bundled scenario with a shorter time grid so one iteration stays cheap.
pub fn short_scenario(name: &str, n_points: usize) -> Scenario {
    let mut s = bundled(name).expect("bundled scenario");
    s.times.n_points = n_points;
    s
}
