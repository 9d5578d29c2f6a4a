//! Optimal unambiguous discrimination of mixed quantum states.
//!
//! The optimum is computed as a semidefinite program over the block Gram
//! matrix of the states' ensembles. Closed-form upper bounds come from
//! canonical (paired) vectors of two states.

pub mod bounds;
pub mod canonical;
pub mod error;
pub mod fixtures;
pub mod format;
pub mod gram;
pub mod numerics;
pub mod random;
pub mod sdp;
pub mod statemodel;
pub mod sweep;
pub mod synthesis;

pub use error::{Error, Result};
pub use numerics::{ComplexMatrix, C64};
pub use statemodel::{DensityMatrix, Ensemble, UDProblem};
