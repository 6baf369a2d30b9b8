//! Fixtures shared by the benchmarks.

use dess_core::experiment::{Condition, TrialConfig};
use dess_core::{make_layered_controller, make_optimal_controller, LayeredController, LayeredParams, LoopParams, QuantizedController};

/// Optimal single-loop controller at total delay `t` ticks and rate `r`.
pub fn single_loop(t: i64, r: f64) -> QuantizedController {
    make_optimal_controller(&LoopParams::with_total_delay(t, r).expect("valid loop"), 1.0).expect("controller")
}

/// The two-layer controller used throughout the examples: a one-bit reflex
/// behind ten ticks of internal delay, a five-bit planner with five ticks of warning.
pub fn reference_layered() -> LayeredController {
    let reflex = LoopParams::new(1, 10, 0, 1.0).expect("reflex");
    let planning = LoopParams::new(0, 0, 5, 5.0).expect("planning");
    let lp = LayeredParams::new(reflex, planning, 1.0).expect("layered");
    make_layered_controller(&lp, 1.0, 1.0).expect("controller")
}

pub fn combined_trial(seed: u64) -> TrialConfig {
    TrialConfig::new(format!("bench-{seed}"), Condition::Both, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        let _ = single_loop(-4, 3.0);
        let _ = reference_layered();
        assert!(combined_trial(1).validate().is_ok());
    }
}
