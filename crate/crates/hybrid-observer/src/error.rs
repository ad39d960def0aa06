//! Crate-wide error type.
//!
//! Infeasibility of a certificate search or a design problem is *not* an
//! error — it is a structured outcome (see `lyapunov::VerifyOutcome` and
//! `synthesis::DesignOutcome`). Errors are reserved for invalid inputs,
//! solver breakdowns, and numerical failures.

use thiserror::Error;

/// Errors reported by the modeling, analysis, design, and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A matrix block has the wrong shape. `block` names the offending
    /// block in the caller's vocabulary (e.g. "L", "Fmat top-left").
    #[error("dimension mismatch in {block}: expected {expected_rows}x{expected_cols}, got {got_rows}x{got_cols}")]
    DimensionMismatch {
        block: String,
        expected_rows: usize,
        expected_cols: usize,
        got_rows: usize,
        got_cols: usize,
    },

    /// A scalar argument violates its domain (sign, range, ordering).
    #[error("invalid argument {arg}: {reason}")]
    InvalidArgument { arg: &'static str, reason: String },

    /// The timer value lies outside the admissible range [0, T2].
    #[error("timer value {tau} outside [0, {t2}]: state is not in the flow or jump set")]
    TimerOutOfRange { tau: f64, t2: f64 },

    /// A matrix that must be symmetric positive definite is not.
    #[error("{what} is not positive definite: min eigenvalue {min_eig:.3e} (threshold {threshold:.3e})")]
    NotPositiveDefinite {
        what: String,
        min_eig: f64,
        threshold: f64,
    },

    /// A matrix inequality that must hold does not. Carries the offending
    /// eigenvalue for diagnosis.
    #[error("{what} violated: offending eigenvalue {eigenvalue:.6e}")]
    InequalityViolated { what: String, eigenvalue: f64 },

    /// A matrix required to be invertible is numerically singular.
    #[error("{what} is near-singular: condition number estimate {condition:.3e}")]
    NearSingular { what: String, condition: f64 },

    /// A constraint handed to the canonicalizer is not affine in the
    /// declared variables.
    #[error("constraint '{constraint}' is not affine in the declared variables (probe residual {residual:.3e})")]
    NonAffineConstraint { constraint: String, residual: f64 },

    /// A problem referenced an undeclared variable or redeclared a name.
    #[error("problem structure error: {0}")]
    ProblemStructure(String),

    /// The conic backend failed (iteration limit, numerical breakdown) or
    /// its answer did not survive post-validation.
    #[error("numerical failure: {reason}\nsolver diagnostics: {diagnostics}")]
    NumericalFailure { reason: String, diagnostics: String },

    /// A simulation produced a non-finite state.
    #[error("non-finite state while flowing over [{t_start}, {t_end}] (jump index {jump_index})")]
    NonFiniteState {
        t_start: f64,
        t_end: f64,
        jump_index: usize,
    },

    /// The sampling sequence does not cover the requested horizon.
    #[error("sampling sequence ends at {last_sample} but the horizon is {horizon}")]
    SequenceTooShort { last_sample: f64, horizon: f64 },

    /// The requested fit is undefined for the given arc.
    #[error("envelope fit undefined: {reason}")]
    EnvelopeUndefined { reason: String },
}

impl Error {
    /// Convenience constructor for shape errors.
    pub fn dim(block: impl Into<String>, expected: (usize, usize), got: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            block: block.into(),
            expected_rows: expected.0,
            expected_cols: expected.1,
            got_rows: got.0,
            got_cols: got.1,
        }
    }
}
