//! Simulation library for Mpemba-accelerated qubit reset: Liouvillian
//! construction and spectral analysis, entangling-gate coherence
//! delocalization, Markovian / non-Markovian / finite-temperature noise
//! models, and speedup / robustness metrics.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod haar;
pub mod linalg;
pub mod liouvillian;
pub mod models;
pub mod protocol;
pub mod state;

pub use error::{Error, Result};
