//! Qubit states, channels and measurement.

mod channel;
mod frame;
mod state;

pub use channel::{apply_channel, average_fidelity, NoiseModel, QubitChannel};
pub use frame::{Frame, FRAME_COUNT};
pub use state::{
    measure_against, projector_of, random_mixed_state, random_pure_state, Axis, DensityMatrix, Qubit, QubitPair,
    StateLabel,
};

use thiserror::Error;

use crate::linalg::LinalgError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantumError {
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("trace is {0}, expected 1")]
    BadTrace(f64),
    #[error("matrix has negative eigenvalue {0:.3e}")]
    NotPositive(f64),
    #[error("Kraus operators are not trace preserving (deviation {0:.3e})")]
    NotTracePreserving(f64),
    #[error("parameter {name} = {value} out of range")]
    BadParameter { name: &'static str, value: f64 },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}
