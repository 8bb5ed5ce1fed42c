//! Simulation of coherent-population-oscillation light storage in a Λ-type
//! atomic vapor: steady state, linear response and eigenquadrature
//! propagation, nonperturbative Maxwell–Bloch storage sequences, populariton
//! diagnostics and storage-efficiency sweeps.

pub mod bloch;
pub mod config;
pub mod error;
pub mod linear_response;
pub mod maxwell_bloch;
pub mod medium;
pub mod populariton;
pub mod protocol;
pub mod pulse;
pub mod quadrature;
pub mod steady_state;
pub mod validation;

pub use error::{ConfigError, NumericError, ParamError};
pub use medium::{cpo_linewidth, AtomicMedium, UnitSystem};
