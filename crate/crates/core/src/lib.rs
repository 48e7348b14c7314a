//! Self-refocusing soft pulses for coupled qubit chains: pulse shapes,
//! perturbative propagation, sequence-order classification and pulse design.

pub mod bathframe;
pub mod error;
pub mod matcore;
pub mod numfmt;
pub mod optimize;
pub mod propagate;
pub mod pulseshape;
pub mod sequences;
pub mod spinmodel;
pub mod tables;

pub use error::{PulseError, Result};
pub use matcore::{CMatrix, C64};
pub use pulseshape::PulseShape;
pub use sequences::{parse_sequence, PulseSchedule, Sequence};
pub use spinmodel::{ChainModel, ClusterSpec, Parity};
