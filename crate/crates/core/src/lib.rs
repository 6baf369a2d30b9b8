//! Speed/accuracy tradeoffs in delayed, rate-limited control loops.
//!
//! The scalar plant `x(t+1) = x(t) + w(t) + u(t)` is driven by a disturbance
//! `w` and a controller that sees the world late (delay) and through a narrow
//! pipe (rate). This crate evaluates the closed-form error bounds for such
//! loops, builds controllers that meet them, searches for worst-case
//! disturbances, optimizes how delay and rate are split between components,
//! and runs the trail-following driving experiment with a simulated pilot or
//! a live player.

pub mod acceptance;
pub mod adversary;
pub mod bounds;
pub mod channels;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod figures;
pub mod optimize;
pub mod session;

pub use bounds::{
    layered_bound, stochastic_bound, worst_case_bound, ErrorDecomposition, LayeredBound, LayeredParams,
};
pub use channels::{ComponentBudget, DelayLine, Encoding, LoopParams, RateSchedule, UniformQuantizer};
pub use control::{
    make_layered_controller, make_optimal_controller, make_pilot, LayeredController, Pilot, PilotModel,
    QuantizedController,
};
pub use dynamics::{
    run_closed_loop, step_plant, Channel, ControlCommand, Controller, DisturbanceSample, DisturbanceSource,
    Observation, PlantState, Schedule, SimConfig, Trajectory, TrajectoryRecord, TICK_SECONDS,
};
pub use error::{Error, Result};
