//! Hybrid observers for continuous-time LTI plants whose output is measured
//! only at aperiodic sampling instants.
//!
//! The library covers the full workflow:
//!
//! - [`model`] — plant/observer/timing data types and the hybrid error system
//!   (flow matrix, jump matrix, timer state).
//! - [`lmi`] — canonicalization of affine matrix-inequality problems with
//!   symmetric matrix variables into conic standard form, plus a pluggable
//!   semidefinite-programming backend (Clarabel by default).
//! - [`lyapunov`] — clock-dependent quadratic Lyapunov certificates: assembly
//!   of the flow/jump inequality matrices, certificate search for fixed gains,
//!   sector bounds, and the jump-contraction factor.
//! - [`synthesis`] — guaranteed-cost observer design: the convexified design
//!   inequalities, the trace + gain-norm objective, gain recovery, and a grid
//!   search over the two scalar tuning parameters.
//! - [`simulator`] — exact (matrix-exponential) simulation of the hybrid
//!   system on hybrid time domains, cost evaluation, Lyapunov monotonicity
//!   checks, and exponential-envelope fitting.
//!
//! Matrices are dense (`nalgebra::DMatrix<f64>`) throughout: problem sizes in
//! this domain are tiny (a handful of states), so dense storage is both the
//! simplest and the most accurate choice.

pub mod error;
pub mod lmi;
pub mod lyapunov;
pub mod model;
pub mod simulator;
pub mod synthesis;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
