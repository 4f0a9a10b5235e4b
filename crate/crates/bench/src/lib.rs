//! Fixtures shared by the benchmarks.

use hosmc_core::presets;
use hosmc_core::{ControllerKind, ScenarioConfig};

/// Deterministic spread of measurement vectors around the reference initial state.
pub fn sample_states(count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| {
            let a = 0.5 + k as f64 * 0.37;
            vec![0.1 * a.sin(), a.cos(), 3.0 * (1.3 * a).sin() + 0.01]
        })
        .collect()
}

/// Reference scenario shortened to `horizon` seconds.
pub fn short_scenario(kind: ControllerKind, horizon: f64) -> ScenarioConfig {
    let mut cfg = presets::reference_scenario(kind);
    cfg.horizon = horizon;
    cfg
}
