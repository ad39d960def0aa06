//! Default conic backend: the Clarabel interior-point solver.
//!
//! Clarabel consumes the standard form `min ½xᵀPx + qᵀx  s.t.  Ax + s = b,
//! s ∈ K` with PSD cones in svec (scaled upper-triangle) packing — the same
//! packing this module's canonicalizer emits, so the adapter only reshapes
//! the dense rows into compressed sparse columns.
//!
//! Each call constructs a fresh solver instance; there is no shared state,
//! so concurrent independent solves are safe.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{ConeSpec, ConicProblem, RawSolution, RawStatus, SdpBackend};
use crate::error::Error;
use crate::Result;

/// The built-in Clarabel backend (stateless).
pub struct ClarabelBackend;

impl SdpBackend for ClarabelBackend {
    fn name(&self) -> &'static str {
        "clarabel"
    }

    fn solve_conic(&self, prob: &ConicProblem) -> Result<RawSolution> {
        let m = prob.a_rows.len();
        let n = prob.num_vars;

        // Dense rows → CSC columns.
        let mut colptr = Vec::with_capacity(n + 1);
        let mut rowval = Vec::new();
        let mut nzval = Vec::new();
        colptr.push(0usize);
        for j in 0..n {
            for (i, row) in prob.a_rows.iter().enumerate() {
                let v = row[j];
                if v != 0.0 {
                    rowval.push(i);
                    nzval.push(v);
                }
            }
            colptr.push(rowval.len());
        }
        let a = CscMatrix::new(m, n, colptr, rowval, nzval);
        let p = CscMatrix::<f64>::zeros((n, n));

        let cones: Vec<SupportedConeT<f64>> = prob
            .cones
            .iter()
            .map(|c| match c {
                ConeSpec::Zero(k) => SupportedConeT::ZeroConeT(*k),
                ConeSpec::PsdTriangle(d) => SupportedConeT::PSDTriangleConeT(*d),
            })
            .collect();

        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(prob.max_iterations)
            .tol_gap_abs(prob.tolerance)
            .tol_gap_rel(prob.tolerance)
            .tol_feas(prob.tolerance)
            .build()
            .map_err(|e| Error::NumericalFailure {
                reason: "invalid solver settings".into(),
                diagnostics: format!("{e:?}"),
            })?;

        let mut solver =
            DefaultSolver::new(&p, &prob.q, &a, &prob.b, &cones, settings).map_err(|e| {
                Error::NumericalFailure {
                    reason: "solver setup rejected the problem data".into(),
                    diagnostics: format!("{e:?}"),
                }
            })?;
        solver.solve();

        let status = match solver.solution.status {
            SolverStatus::Solved => RawStatus::Solved,
            SolverStatus::AlmostSolved => RawStatus::AlmostSolved,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                RawStatus::PrimalInfeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                RawStatus::DualInfeasible
            }
            other => RawStatus::Failed(format!("{other:?}")),
        };

        Ok(RawSolution {
            status,
            x: solver.solution.x.clone(),
            objective: solver.solution.obj_val,
            iterations: solver.info.iterations,
        })
    }
}
