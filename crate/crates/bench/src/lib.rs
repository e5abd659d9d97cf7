//! Inputs shared by the benchmarks.

use rftwin_core::twin::{synthesize_kpi, KpiBatch};
use rftwin_core::{fixtures, Scenario};

/// The demo scenario at the given grid resolution.
pub fn demo_at(resolution_m: f64) -> Scenario {
    let mut s = fixtures::demo();
    s.grid_resolution_m = resolution_m;
    s
}

/// A full-day KPI batch for the demo scenario.
pub fn demo_kpi(seed: u64) -> KpiBatch {
    let s = fixtures::demo();
    synthesize_kpi(&s, s.twin.duration_s, s.twin.dt_s, seed)
        .expect("demo twin run")
        .batch
}

/// Deterministic pseudo-random 2-D points in [-1, 1)^2.
pub fn points(n: usize) -> Vec<Vec<f64>> {
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    (0..n).map(|_| vec![next(), next()]).collect()
}
