//! Composition optimizer: choose component delays and rates under the
//! component speed/accuracy laws so that the system error bound is smallest.

pub mod dess;
pub mod golden;
pub mod single;

pub use dess::{
    compare_layered, dess_tradeoff_curve, optimize_layered, DessComparison, LayerMode, LayeredOptimum,
    LayeredProblem, TradeoffConfig, TradeoffCurve,
};
pub use single::{optimize_single_loop, sweep_regimes, RegimePoint};
