//! Weak values, two-state vectors and measurement models for pre- and
//! post-selected quantum systems.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod decoherence;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod probe;
pub mod random;
pub mod tol;
pub mod two_state;
pub mod weak;

pub use error::{Error, Result};
pub use linalg::{c, CMatrix, CVector, DensityOp, QOperator, QState, C64};

/// Library version, recorded in CLI metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
