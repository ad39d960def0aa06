//! Pinned tolerances and population sizes for the acceptance gate.
//! Changing any value changes what the suite certifies; they are frozen
//! here on purpose and referenced from every criterion.

use std::time::Duration;

/// Relative tolerance on reproduced trace(P1) values.
pub const TRACE_REL: f64 = 0.01;

/// Relative elementwise tolerance on reproduced gain entries.
pub const GAIN_REL: f64 = 0.05;

/// Magnitude floor for the unconstrained reference case's gains.
pub const UNCONSTRAINED_GAIN_FLOOR: f64 = 1e3;

/// Wall-clock budget for one reference design solve.
pub const DESIGN_RUNTIME_BUDGET: Duration = Duration::from_secs(5);

/// Number of randomized observable plants in the design sweep.
pub const SOUNDNESS_PLANTS: usize = 50;

/// Number of random pairs for the flow-derivative identity.
pub const GRADIENT_PAIRS: usize = 200;

/// Relative error bound for the flow-derivative identity.
pub const GRADIENT_REL: f64 = 1e-6;

/// Central-difference step for the flow-derivative identity.
pub const GRADIENT_STEP: f64 = 1e-5;

/// Points of the τ grid for the vertex-convexity sweep.
pub const CONVEXITY_GRID: usize = 100;

/// Number of random instances for the jump-matrix sign equivalence.
pub const SIGN_INSTANCES: usize = 200;

/// Zero band (scaled by 1 + ‖P1‖) for eigenvalue sign comparisons.
pub const SIGN_TOL: f64 = 1e-9;

/// Number of randomized dual-representation scenarios.
pub const FIDELITY_SCENARIOS: usize = 20;

/// Relative agreement bound between the two state representations.
pub const FIDELITY_REL: f64 = 1e-10;

/// Number of randomized sequences for the cost-bound sweep.
pub const COST_TRIALS: usize = 50;

/// Horizon of each cost-bound trial.
pub const COST_HORIZON: f64 = 50.0;
