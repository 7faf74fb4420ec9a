//! Phase-space representation of a truncated harmonic-oscillator Fock space.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classrep;
pub mod dequant;
pub mod displacement;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod frame;
pub mod grid;
pub mod io;
pub mod linalg;

pub use error::{PhaseError, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
