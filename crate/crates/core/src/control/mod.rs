//! Controllers: the bound-achieving interval quantizer, the two-layer
//! reflex/planning controller and a simulated human pilot.

pub mod layered;
pub mod pilot;
pub mod quantized;

pub use layered::{make_layered_controller, LayeredController};
pub use pilot::{make_pilot, Pilot, PilotModel};
pub use quantized::{make_optimal_controller, InformationPattern, QuantizedController, Tap};
