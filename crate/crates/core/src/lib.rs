//! Simulation models for a 915 MHz RF energy-harvesting receive chain:
//! matching network, Schottky voltage doubler, load-side power point
//! tracking, the boost-converter power manager and the free-space link.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod error;
pub mod link;
pub mod matching;
pub mod mpp;
pub mod network;
pub mod pmic;
pub mod rectifier;
pub mod units;

pub use error::{CalibrationError, LinkError, MatchError, MppError, NetworkError, PmicError, SolverError, UnitError};
pub use matching::{PiMatchDesign, QConfig};
pub use network::{Cascade, ElementKind, LumpedElement, Placement};
pub use pmic::{PmicConfig, PmicState, SimulationTrace};
pub use rectifier::{DiodeModel, RectifierCircuit, SteadyStateSolution};
pub use units::{ComplexImpedance, Frequency, PowerLevel};
