//! Guaranteed-cost observer design: the convexified design inequalities,
//! the trace + gain-norm objective, gain recovery, and a grid search over
//! the two scalar tuning parameters (δ, η).
//!
//! With the substitutions Y = P1L, X = P2(CL+H), Z = P1F the analysis
//! inequalities become LMIs in (P1, P2, X, Y, Z) jointly with the gains.
//! The design solves
//!
//! ```text
//! minimize    trace(P1) + α1γ1 + α2γ2
//! subject to  R_i ≺ 0  (i = 1, 2)             (flow, both μ vertices)
//!             [[−P1+Q_J, P1−CᵀZᵀ], [•, −e^{δT1}P1]] ⪯ 0   (jump)
//!             [[P1, Y], [•, γ1·I]] ≻ 0         (only when α1 > 0)
//!             [[P1, Z], [•, γ2·I]] ≻ 0         (only when α2 > 0)
//!             P1 ≻ 0,  P2 ≻ 0
//! ```
//!
//! where
//!
//! ```text
//! R_i = [ He(P1A−YC) + δP1 + μ̃_i·Q_F     Y + μ_i(P2CA−XC)ᵀ ]
//!       [ •                              μ_i·He(X) − δP2    ]
//! ```
//!
//! with μ1 = η, μ2 = (1+η)e^{δT2} − 1, μ̃1 = 1, μ̃2 = e^{δT2}. Gains are
//! recovered as L = P1⁻¹Y, H = P2⁻¹X − CP1⁻¹Y, F = P1⁻¹Z, and every
//! result is re-verified against the analysis inequalities at the returned
//! (P1, P2) before it is accepted.
//!
//! The cost interpretation: a feasible design certifies, for any solution
//! from an initial state ξ, that the accumulated flow cost ∫ εᵀQ_Fε plus
//! jump cost Σ εᵀQ_Jε is bounded by V(ξ) — in particular by ξεᵀP1ξε when
//! the initial predictor error is zero. The γ blocks bound the gains:
//! LᵀP1L ⪯ γ1·I and FᵀP1F ⪯ γ2·I, so α1, α2 trade estimation performance
//! against gain magnitude.
//!
//! δ and η enter the inequalities nonlinearly, so they are fixed per solve;
//! [`grid_search`] scans a (by default logarithmically spaced) grid and
//! keeps the best feasible objective.

use nalgebra::DMatrix;

use crate::error::Error;
use crate::lmi::{self, ConstraintSense, LmiProblem, SolveOptions, SolveStatus};
use crate::lyapunov::{self, CertificateReport, LyapunovCertificate};
use crate::model::{HybridState, ObserverGains, PlantModel, TimingBounds};
use crate::Result;

/// Gate below which a quadratic weight or recovered certificate matrix is
/// considered numerically singular: λmin ≤ ratio·λmax.
const SINGULAR_RATIO: f64 = 1e-12;

fn he(x: &DMatrix<f64>) -> DMatrix<f64> {
    x + x.transpose()
}

fn lambda_max(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

fn lambda_min(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Cost weights and gain-norm trade-off coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignWeights {
    qf: DMatrix<f64>,
    qj: DMatrix<f64>,
    alpha1: f64,
    alpha2: f64,
}

impl DesignWeights {
    /// Builds design weights, enforcing Q_F ≻ 0, Q_J ≻ 0 (symmetric) and
    /// α1, α2 ≥ 0. α1 = α2 = 0 means unconstrained gains (no γ blocks).
    pub fn new(qf: DMatrix<f64>, qj: DMatrix<f64>, alpha1: f64, alpha2: f64) -> Result<Self> {
        for (name, m) in [("Q_F", &qf), ("Q_J", &qj)] {
            if m.nrows() != m.ncols() || m.nrows() == 0 {
                return Err(Error::dim(name, (m.nrows().max(1), m.nrows().max(1)), m.shape()));
            }
            let asym = (m - m.transpose()).norm();
            if asym > 1e-9 * (1.0 + m.norm()) {
                return Err(Error::InvalidArgument {
                    arg: "weights",
                    reason: format!("{name} is not symmetric (asymmetry {asym:.3e})"),
                });
            }
            let (lmin, lmax) = (lambda_min(m), lambda_max(m));
            if !(lmin > 0.0 && lmin > SINGULAR_RATIO * lmax) {
                return Err(Error::NotPositiveDefinite {
                    what: name.to_string(),
                    min_eig: lmin,
                    threshold: SINGULAR_RATIO * lmax,
                });
            }
        }
        for (name, v) in [("alpha1", alpha1), ("alpha2", alpha2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument {
                    arg: "weights",
                    reason: format!("{name} must be nonnegative and finite, got {v}"),
                });
            }
        }
        Ok(Self { qf, qj, alpha1, alpha2 })
    }

    /// The default cost pair Q_F = I, Q_J = 0.01·I at state dimension
    /// `nz`, with the given trade-off coefficients.
    pub fn with_default_costs(nz: usize, alpha1: f64, alpha2: f64) -> Result<Self> {
        Self::new(
            DMatrix::identity(nz, nz),
            DMatrix::identity(nz, nz) * 0.01,
            alpha1,
            alpha2,
        )
    }

    /// Flow cost weight Q_F.
    pub fn qf(&self) -> &DMatrix<f64> {
        &self.qf
    }

    /// Jump cost weight Q_J.
    pub fn qj(&self) -> &DMatrix<f64> {
        &self.qj
    }

    /// Flow-gain trade-off coefficient α1.
    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    /// Jump-gain trade-off coefficient α2.
    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }
}

/// The raw decision variables of a solved design, before gain recovery.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDesignVariables {
    /// Y = P1·L.
    pub y: DMatrix<f64>,
    /// X = P2·(CL + H).
    pub x: DMatrix<f64>,
    /// Z = P1·F.
    pub z: DMatrix<f64>,
    /// Flow-gain bound (present iff α1 > 0): LᵀP1L ⪯ γ1·I.
    pub gamma1: Option<f64>,
    /// Jump-gain bound (present iff α2 > 0): FᵀP1F ⪯ γ2·I.
    pub gamma2: Option<f64>,
}

/// A successful design: gains, the certifying (P1, P2, δ, η), the raw
/// variables, the achieved objective, and the re-verification report.
#[derive(Debug, Clone)]
pub struct DesignResult {
    /// Recovered observer gains.
    pub gains: ObserverGains,
    /// The certificate produced by the design (same P1, P2 the raw
    /// variables were computed with).
    pub certificate: LyapunovCertificate,
    /// Raw decision variables.
    pub raw: RawDesignVariables,
    /// Objective value trace(P1) + α1γ1 + α2γ2.
    pub objective: f64,
    /// Eigenvalue re-verification of the analysis inequalities at the
    /// returned certificate.
    pub report: CertificateReport,
}

impl DesignResult {
    /// The certified cost bound at an initial state ξ:
    /// `e^{−δξτ}·ξεᵀP1ξε + (1+η−e^{−δξτ})·ξθ̃ᵀP2ξθ̃` (the certificate's V
    /// at ξ). The accumulated trajectory cost from ξ never exceeds this.
    pub fn cost_bound(&self, initial: &HybridState) -> Result<f64> {
        lyapunov::evaluate_V(&self.certificate, initial)
    }
}

/// Outcome of a design solve at fixed (δ, η).
pub enum DesignOutcome {
    /// The optimization succeeded and re-verified.
    Optimal(Box<DesignResult>),
    /// The design LMIs are infeasible at this (δ, η).
    Infeasible {
        /// Backend diagnostics for the infeasibility certificate.
        diagnostics: String,
    },
}

/// Vertex weights (μ_i, μ̃_i) for i ∈ {1, 2}.
fn vertex_weights(delta: f64, eta: f64, t2: f64, vertex: usize) -> Result<(f64, f64)> {
    match vertex {
        1 => Ok((eta, 1.0)),
        2 => {
            let e = (delta * t2).exp();
            Ok(((1.0 + eta) * e - 1.0, e))
        }
        other => Err(Error::InvalidArgument {
            arg: "vertex",
            reason: format!("vertex index must be 1 or 2, got {other}"),
        }),
    }
}

/// Flow design-matrix formula shared by [`assemble_R`] and the LMI
/// closures.
#[allow(clippy::too_many_arguments)]
fn r_from_parts(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    p1: &DMatrix<f64>,
    p2: &DMatrix<f64>,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    qf: &DMatrix<f64>,
    delta: f64,
    mu: f64,
    mu_tilde: f64,
) -> DMatrix<f64> {
    let nz = a.nrows();
    let ny = c.nrows();
    let n = nz + ny;
    let mut r = DMatrix::zeros(n, n);
    r.view_mut((0, 0), (nz, nz))
        .copy_from(&(he(&(p1 * a - y * c)) + p1 * delta + qf * mu_tilde));
    let off = y + (p2 * c * a - x * c).transpose() * mu;
    r.view_mut((0, nz), (nz, ny)).copy_from(&off);
    r.view_mut((nz, 0), (ny, nz)).copy_from(&off.transpose());
    r.view_mut((nz, nz), (ny, ny))
        .copy_from(&(he(x) * mu - p2 * delta));
    (&r + r.transpose()) * 0.5
}

/// Jump design-matrix formula shared by [`assemble_design_jump_lmi`] and
/// the LMI closures.
fn design_jump_from_parts(
    c: &DMatrix<f64>,
    p1: &DMatrix<f64>,
    z: &DMatrix<f64>,
    qj: &DMatrix<f64>,
    delta: f64,
    t1: f64,
) -> DMatrix<f64> {
    let nz = p1.nrows();
    let n = 2 * nz;
    let mut m = DMatrix::zeros(n, n);
    m.view_mut((0, 0), (nz, nz)).copy_from(&(qj - p1));
    let off = p1 - c.transpose() * z.transpose();
    m.view_mut((0, nz), (nz, nz)).copy_from(&off);
    m.view_mut((nz, 0), (nz, nz)).copy_from(&off.transpose());
    m.view_mut((nz, nz), (nz, nz))
        .copy_from(&(p1 * (-(delta * t1).exp())));
    (&m + m.transpose()) * 0.5
}

/// Assembles the flow design matrix R_i at vertex `vertex` ∈ {1, 2} for
/// explicit variable values. The result is exactly symmetric.
#[allow(non_snake_case, clippy::too_many_arguments)]
pub fn assemble_R(
    plant: &PlantModel,
    p1: &DMatrix<f64>,
    p2: &DMatrix<f64>,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    delta: f64,
    weights: &DesignWeights,
    vertex: usize,
    timing: &TimingBounds,
    eta: f64,
) -> Result<DMatrix<f64>> {
    let (nz, ny) = (plant.nz(), plant.ny());
    if p1.shape() != (nz, nz) {
        return Err(Error::dim("P1", (nz, nz), p1.shape()));
    }
    if p2.shape() != (ny, ny) {
        return Err(Error::dim("P2", (ny, ny), p2.shape()));
    }
    if x.shape() != (ny, ny) {
        return Err(Error::dim("X", (ny, ny), x.shape()));
    }
    if y.shape() != (nz, ny) {
        return Err(Error::dim("Y", (nz, ny), y.shape()));
    }
    if weights.qf().shape() != (nz, nz) {
        return Err(Error::dim("Q_F", (nz, nz), weights.qf().shape()));
    }
    let (mu, mu_tilde) = vertex_weights(delta, eta, timing.t2(), vertex)?;
    Ok(r_from_parts(
        plant.a(),
        plant.c(),
        p1,
        p2,
        x,
        y,
        weights.qf(),
        delta,
        mu,
        mu_tilde,
    ))
}

/// Assembles the jump design matrix
/// `[[−P1+Q_J, P1−CᵀZᵀ], [•, −e^{δT1}P1]]` (2n_z square, exactly
/// symmetric). With Q_J → 0 and Z = P1F it reduces to the analysis jump
/// matrix.
pub fn assemble_design_jump_lmi(
    plant: &PlantModel,
    p1: &DMatrix<f64>,
    z: &DMatrix<f64>,
    qj: &DMatrix<f64>,
    delta: f64,
    timing: &TimingBounds,
) -> Result<DMatrix<f64>> {
    let (nz, ny) = (plant.nz(), plant.ny());
    if p1.shape() != (nz, nz) {
        return Err(Error::dim("P1", (nz, nz), p1.shape()));
    }
    if z.shape() != (nz, ny) {
        return Err(Error::dim("Z", (nz, ny), z.shape()));
    }
    if qj.shape() != (nz, nz) {
        return Err(Error::dim("Q_J", (nz, nz), qj.shape()));
    }
    Ok(design_jump_from_parts(
        plant.c(),
        p1,
        z,
        qj,
        delta,
        timing.t1(),
    ))
}

/// Recovers the observer gains from a solved design:
/// L = P1⁻¹Y, H = P2⁻¹X − CP1⁻¹Y, F = P1⁻¹Z.
///
/// P1 and P2 must be comfortably invertible; the recovered gains are
/// checked to satisfy the defining relations to relative precision 1e−10.
pub fn recover_gains(
    plant: &PlantModel,
    p1: &DMatrix<f64>,
    p2: &DMatrix<f64>,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    z: &DMatrix<f64>,
) -> Result<ObserverGains> {
    let (nz, ny) = (plant.nz(), plant.ny());
    if p1.shape() != (nz, nz) {
        return Err(Error::dim("P1", (nz, nz), p1.shape()));
    }
    if p2.shape() != (ny, ny) {
        return Err(Error::dim("P2", (ny, ny), p2.shape()));
    }
    if x.shape() != (ny, ny) {
        return Err(Error::dim("X", (ny, ny), x.shape()));
    }
    if y.shape() != (nz, ny) {
        return Err(Error::dim("Y", (nz, ny), y.shape()));
    }
    if z.shape() != (nz, ny) {
        return Err(Error::dim("Z", (nz, ny), z.shape()));
    }
    for (name, m) in [("P1", p1), ("P2", p2)] {
        let (lmin, lmax) = (lambda_min(m), lambda_max(m));
        if !(lmin > 0.0 && lmin > SINGULAR_RATIO * lmax.max(1.0)) {
            return Err(Error::NearSingular {
                what: name.to_string(),
                condition: if lmin > 0.0 { lmax / lmin } else { f64::INFINITY },
            });
        }
    }

    let p1_chol = p1
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NearSingular {
            what: "P1 (Cholesky)".into(),
            condition: lambda_max(p1) / lambda_min(p1),
        })?;
    let p2_chol = p2
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NearSingular {
            what: "P2 (Cholesky)".into(),
            condition: lambda_max(p2) / lambda_min(p2),
        })?;

    let l = p1_chol.solve(y);
    let f = p1_chol.solve(z);
    let h = p2_chol.solve(x) - plant.c() * &l;

    // The defining relations must close to high relative precision;
    // failure signals a near-singular or badly scaled solve.
    let checks = [
        ("P1·L = Y", (p1 * &l - y).norm(), 1.0 + y.norm() + p1.norm() * l.norm()),
        (
            "P2·(H + CL) = X",
            (p2 * (&h + plant.c() * &l) - x).norm(),
            1.0 + x.norm() + p2.norm() * (h.norm() + plant.c().norm() * l.norm()),
        ),
        ("P1·F = Z", (p1 * &f - z).norm(), 1.0 + z.norm() + p1.norm() * f.norm()),
    ];
    for (what, residual, scale) in checks {
        if residual > 1e-10 * scale {
            return Err(Error::NumericalFailure {
                reason: format!("gain recovery residual too large for {what}: {residual:.3e} (scale {scale:.3e})"),
                diagnostics: String::new(),
            });
        }
    }

    ObserverGains::new(plant, l, h, f)
}

/// Solves the guaranteed-cost design at fixed (δ, η).
///
/// On success the recovered gains and the certificate are re-verified
/// against the analysis inequalities (vertex matrices negative definite,
/// jump matrix negative semidefinite at the returned (P1, P2)); a solution
/// that fails that re-verification is reported as a numerical failure, not
/// silently returned. Infeasibility is a structured outcome.
pub fn design_optimal(
    plant: &PlantModel,
    timing: &TimingBounds,
    weights: &DesignWeights,
    delta: f64,
    eta: f64,
) -> Result<DesignOutcome> {
    design_optimal_with_options(plant, timing, weights, delta, eta, &SolveOptions::default())
}

/// [`design_optimal`] with explicit solver options.
pub fn design_optimal_with_options(
    plant: &PlantModel,
    timing: &TimingBounds,
    weights: &DesignWeights,
    delta: f64,
    eta: f64,
    options: &SolveOptions,
) -> Result<DesignOutcome> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidArgument {
            arg: "delta",
            reason: format!("must be positive and finite, got {delta}"),
        });
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidArgument {
            arg: "eta",
            reason: format!("must be positive and finite, got {eta}"),
        });
    }
    let (nz, ny) = (plant.nz(), plant.ny());
    if weights.qf().shape() != (nz, nz) {
        return Err(Error::dim("Q_F", (nz, nz), weights.qf().shape()));
    }
    if weights.qj().shape() != (nz, nz) {
        return Err(Error::dim("Q_J", (nz, nz), weights.qj().shape()));
    }

    let with_gamma1 = weights.alpha1() > 0.0;
    let with_gamma2 = weights.alpha2() > 0.0;
    let t1 = timing.t1();

    let mut problem = LmiProblem::new();
    problem.add_symmetric("P1", nz)?;
    problem.add_symmetric("P2", ny)?;
    problem.add_full("Y", nz, ny)?;
    problem.add_full("X", ny, ny)?;
    problem.add_full("Z", nz, ny)?;
    if with_gamma1 {
        problem.add_scalar("gamma1")?;
    }
    if with_gamma2 {
        problem.add_scalar("gamma2")?;
    }

    for vertex in [1usize, 2] {
        let (mu, mu_tilde) = vertex_weights(delta, eta, timing.t2(), vertex)?;
        let (a, c, qf) = (plant.a().clone(), plant.c().clone(), weights.qf().clone());
        problem.add_constraint(
            &format!("flow design vertex {vertex}"),
            ConstraintSense::NegativeDefinite,
            move |asg| {
                r_from_parts(
                    &a, &c, &asg["P1"], &asg["P2"], &asg["X"], &asg["Y"], &qf, delta, mu, mu_tilde,
                )
            },
        );
    }
    {
        let (c, qj) = (plant.c().clone(), weights.qj().clone());
        problem.add_constraint("jump design", ConstraintSense::NegativeSemidefinite, move |asg| {
            design_jump_from_parts(&c, &asg["P1"], &asg["Z"], &qj, delta, t1)
        });
    }
    problem.add_constraint("P1 positive definite", ConstraintSense::PositiveDefinite, |asg| {
        asg["P1"].clone()
    });
    problem.add_constraint("P2 positive definite", ConstraintSense::PositiveDefinite, |asg| {
        asg["P2"].clone()
    });
    if with_gamma1 {
        problem.add_constraint("flow gain bound", ConstraintSense::PositiveDefinite, move |asg| {
            gamma_block(&asg["P1"], &asg["Y"], asg["gamma1"][(0, 0)])
        });
    }
    if with_gamma2 {
        problem.add_constraint("jump gain bound", ConstraintSense::PositiveDefinite, move |asg| {
            gamma_block(&asg["P1"], &asg["Z"], asg["gamma2"][(0, 0)])
        });
    }
    let (a1, a2) = (weights.alpha1(), weights.alpha2());
    problem.set_objective(move |asg| {
        let mut obj = asg["P1"].trace();
        if with_gamma1 {
            obj += a1 * asg["gamma1"][(0, 0)];
        }
        if with_gamma2 {
            obj += a2 * asg["gamma2"][(0, 0)];
        }
        obj
    });

    let outcome = lmi::solve(&problem, options)?;
    match outcome.status {
        SolveStatus::Optimal | SolveStatus::Feasible => {
            let p1 = outcome.assignments["P1"].clone();
            let p2 = outcome.assignments["P2"].clone();
            let x = outcome.assignments["X"].clone();
            let y = outcome.assignments["Y"].clone();
            let z = outcome.assignments["Z"].clone();
            let gamma1 = with_gamma1.then(|| outcome.assignments["gamma1"][(0, 0)]);
            let gamma2 = with_gamma2.then(|| outcome.assignments["gamma2"][(0, 0)]);

            let gains = recover_gains(plant, &p1, &p2, &x, &y, &z)?;
            let certificate = LyapunovCertificate::new(p1, p2, delta, eta)?;
            let report = lyapunov::report_for(plant, &gains, timing, &certificate)?;
            if !report.feasible {
                return Err(Error::NumericalFailure {
                    reason: format!(
                        "design re-verification failed at the returned (P1, P2): vertex eigs \
                         {:.6e}, {:.6e}; jump eig {:.6e} (margin too small)",
                        report.flow_vertex_eigs[0], report.flow_vertex_eigs[1], report.jump_eig
                    ),
                    diagnostics: outcome.solver_diagnostics,
                });
            }
            let objective = outcome.objective_value.ok_or_else(|| Error::NumericalFailure {
                reason: "solver returned no objective value for an optimization problem".into(),
                diagnostics: outcome.solver_diagnostics.clone(),
            })?;
            Ok(DesignOutcome::Optimal(Box::new(DesignResult {
                gains,
                certificate,
                raw: RawDesignVariables { y, x, z, gamma1, gamma2 },
                objective,
                report,
            })))
        }
        SolveStatus::Infeasible => Ok(DesignOutcome::Infeasible {
            diagnostics: outcome.solver_diagnostics,
        }),
        SolveStatus::NumericalFailure => Err(Error::NumericalFailure {
            reason: "design optimization did not converge".into(),
            diagnostics: outcome.solver_diagnostics,
        }),
    }
}

/// Builds the gain-bound block [[P1, W], [Wᵀ, γ·I]].
fn gamma_block(p1: &DMatrix<f64>, w: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    let nz = p1.nrows();
    let ny = w.ncols();
    let n = nz + ny;
    let mut m = DMatrix::zeros(n, n);
    m.view_mut((0, 0), (nz, nz)).copy_from(p1);
    m.view_mut((0, nz), (nz, ny)).copy_from(w);
    m.view_mut((nz, 0), (ny, nz)).copy_from(&w.transpose());
    m.view_mut((nz, nz), (ny, ny))
        .copy_from(&(DMatrix::identity(ny, ny) * gamma));
    m
}

/// Checks the gain-norm bounds LᵀP1L ⪯ γ1·I and FᵀP1F ⪯ γ2·I (the Schur
/// complements of the design's γ blocks) by eigenvalues, within a small
/// numerical slack. Blocks whose γ was not part of the design (α = 0) are
/// vacuously satisfied.
pub fn gain_norm_constraints_hold(result: &DesignResult) -> bool {
    let p1 = result.certificate.p1();
    let slack = 1e-7 * (1.0 + p1.norm());
    let mut ok = true;
    if let Some(g1) = result.raw.gamma1 {
        let l = result.gains.l();
        let m = l.transpose() * p1 * l - DMatrix::identity(l.ncols(), l.ncols()) * g1;
        ok &= lambda_max(&m) <= slack * (1.0 + g1.abs());
    }
    if let Some(g2) = result.raw.gamma2 {
        let f = result.gains.f();
        let m = f.transpose() * p1 * f - DMatrix::identity(f.ncols(), f.ncols()) * g2;
        ok &= lambda_max(&m) <= slack * (1.0 + g2.abs());
    }
    ok
}

/// Status of one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridStatus {
    /// Solved and re-verified.
    Optimal,
    /// Design LMIs infeasible.
    Infeasible,
    /// Solver breakdown or failed re-verification.
    NumericalFailure,
}

/// One row of the grid report.
#[derive(Debug, Clone)]
pub struct GridRow {
    /// Clock decay rate at this point.
    pub delta: f64,
    /// Offset at this point.
    pub eta: f64,
    /// Outcome.
    pub status: GridStatus,
    /// Objective when optimal.
    pub objective: Option<f64>,
}

/// Result of a (δ, η) grid search: the best feasible design (if any) and
/// the full per-point table.
pub struct GridSearchOutcome {
    /// Best feasible design; `None` when every point failed.
    pub best: Option<Box<DesignResult>>,
    /// Per-point outcomes, in scan order (δ outer, η inner, as given).
    pub rows: Vec<GridRow>,
}

/// Default δ grid: 12 logarithmically spaced points in [1e−3, 1].
pub fn default_delta_grid() -> Vec<f64> {
    log_spaced(1e-3, 1.0, 12)
}

/// Default η grid: 8 logarithmically spaced points in [1e−6, 1e−1].
pub fn default_eta_grid() -> Vec<f64> {
    log_spaced(1e-6, 1e-1, 8)
}

/// n points logarithmically spaced over [lo, hi], inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && n >= 2, "log grid needs 0 < lo <= hi and n >= 2");
    let (llo, lhi) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(llo + (lhi - llo) * i as f64 / (n - 1) as f64))
        .collect()
}

/// Runs [`design_optimal`] at every (δ, η) grid point and returns the
/// feasible point with the smallest objective plus the full table.
///
/// Numerical failures at individual points are recorded in the table and
/// do not abort the scan. The winner is deterministic regardless of scan
/// order: ties on the objective break toward smaller δ, then smaller η.
pub fn grid_search(
    plant: &PlantModel,
    timing: &TimingBounds,
    weights: &DesignWeights,
    delta_grid: &[f64],
    eta_grid: &[f64],
) -> Result<GridSearchOutcome> {
    grid_search_with_options(plant, timing, weights, delta_grid, eta_grid, &SolveOptions::default())
}

/// [`grid_search`] with explicit solver options.
pub fn grid_search_with_options(
    plant: &PlantModel,
    timing: &TimingBounds,
    weights: &DesignWeights,
    delta_grid: &[f64],
    eta_grid: &[f64],
    options: &SolveOptions,
) -> Result<GridSearchOutcome> {
    if delta_grid.is_empty() || eta_grid.is_empty() {
        return Err(Error::InvalidArgument {
            arg: "grid",
            reason: "delta and eta grids must be non-empty".into(),
        });
    }
    for (name, grid) in [("delta_grid", delta_grid), ("eta_grid", eta_grid)] {
        if grid.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument {
                arg: "grid",
                reason: format!("{name} must contain only positive finite values"),
            });
        }
    }

    let mut rows = Vec::with_capacity(delta_grid.len() * eta_grid.len());
    let mut best: Option<(f64, f64, f64, Box<DesignResult>)> = None;
    for &delta in delta_grid {
        for &eta in eta_grid {
            match design_optimal_with_options(plant, timing, weights, delta, eta, options) {
                Ok(DesignOutcome::Optimal(result)) => {
                    let objective = result.objective;
                    rows.push(GridRow {
                        delta,
                        eta,
                        status: GridStatus::Optimal,
                        objective: Some(objective),
                    });
                    let better = match &best {
                        None => true,
                        Some((b_obj, b_delta, b_eta, _)) => {
                            objective < *b_obj
                                || (objective == *b_obj
                                    && (delta, eta) < (*b_delta, *b_eta))
                        }
                    };
                    if better {
                        best = Some((objective, delta, eta, result));
                    }
                }
                Ok(DesignOutcome::Infeasible { .. }) => {
                    rows.push(GridRow { delta, eta, status: GridStatus::Infeasible, objective: None });
                }
                Err(Error::NumericalFailure { .. }) => {
                    rows.push(GridRow { delta, eta, status: GridStatus::NumericalFailure, objective: None });
                }
                Err(other) => return Err(other),
            }
        }
    }
    Ok(GridSearchOutcome {
        best: best.map(|(_, _, _, r)| r),
        rows,
    })
}
