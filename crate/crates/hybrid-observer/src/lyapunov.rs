//! Clock-dependent quadratic Lyapunov certificates for the hybrid error
//! system: assembly of the flow/jump inequality matrices, certificate
//! search for fixed gains, sector bounds, and the jump-contraction factor.
//!
//! The certificate is the pair of quadratic forms
//!
//! ```text
//! V(ε, θ̃, τ) = e^{−δτ}·εᵀP1ε + (1 + η − e^{−δτ})·θ̃ᵀP2θ̃
//! ```
//!
//! with P1 ≻ 0, P2 ≻ 0 and scalars δ > 0, η > 0. Along flows the
//! directional derivative equals `e^{−δτ}·ξᵀ M(μ(τ)) ξ` with
//! ξ = (ε, θ̃) and μ(τ) = (1+η)e^{δτ} − 1, where
//!
//! ```text
//! M(μ) = [ He(P1(A−LC)) + δP1        P1L + μ(CA−CLC−HC)ᵀP2 ]
//!        [ •                         μHe(P2(CL+H)) − δP2    ]
//! ```
//!
//! Because M is affine in μ and τ ∈ [0, T2], negative definiteness at the
//! two vertex values μ1 = η and μ2 = (1+η)e^{δT2} − 1 implies it on the
//! whole interval. Across jumps, non-positivity of
//!
//! ```text
//! [ −P1            P1 − CᵀFᵀP1 ]
//! [ •              −e^{δT1}P1  ]
//! ```
//!
//! is (by Schur complement) equivalent to
//! Q ≔ e^{−δT1}(I−FC)ᵀP1(I−FC) − P1 ⪯ 0, which yields a jump contraction
//! V⁺ ≤ (1−ϖ_d)·V with ϖ_d ∈ [0, |λmax(Q)|/λmax(P1)] ∩ [0, 1).
//!
//! For fixed gains the two vertex conditions plus the jump condition are
//! LMIs in (P1, P2); [`verify_gains`] solves that feasibility problem at a
//! caller-fixed (δ, η). The search over (δ, η) lives in the synthesis
//! module, not here.

use nalgebra::DMatrix;

use crate::error::Error;
use crate::lmi::{self, ConstraintSense, LmiProblem, SolveOptions, SolveStatus};
use crate::model::{HybridState, ObserverGains, PlantModel, TimingBounds};
use crate::Result;

/// Positive-definiteness gate for certificate matrices: λmin ≥ `PD_RATIO`·λmax.
const PD_RATIO: f64 = 1e-8;

/// Scale coefficient of the numerical-zero slack used when classifying the
/// non-strict jump inequality (matches the strictness margin coefficient).
const ZERO_SLACK_COEFF: f64 = 1e-7;

/// He(X) = X + Xᵀ.
fn he(x: &DMatrix<f64>) -> DMatrix<f64> {
    x + x.transpose()
}

/// Largest eigenvalue of a symmetric matrix (symmetrized defensively).
fn lambda_max(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest eigenvalue of a symmetric matrix.
fn lambda_min(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// A clock-dependent quadratic certificate (P1, P2, δ, η).
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovCertificate {
    p1: DMatrix<f64>,
    p2: DMatrix<f64>,
    delta: f64,
    eta: f64,
}

impl LyapunovCertificate {
    /// Builds a certificate, enforcing symmetry and positive definiteness
    /// of P1, P2 (λmin ≥ 1e−8·λmax) and positivity of δ, η.
    pub fn new(p1: DMatrix<f64>, p2: DMatrix<f64>, delta: f64, eta: f64) -> Result<Self> {
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
        for (name, m) in [("P1", &p1), ("P2", &p2)] {
            if m.nrows() != m.ncols() || m.nrows() == 0 {
                return Err(Error::dim(name, (m.nrows().max(1), m.nrows().max(1)), m.shape()));
            }
            let asym = (m - m.transpose()).norm();
            if asym > 1e-9 * (1.0 + m.norm()) {
                return Err(Error::InvalidArgument {
                    arg: "certificate",
                    reason: format!("{name} is not symmetric (asymmetry {asym:.3e})"),
                });
            }
            let (lmin, lmax) = (lambda_min(m), lambda_max(m));
            let threshold = PD_RATIO * lmax.max(0.0);
            if !(lmin > 0.0 && lmin >= threshold) {
                return Err(Error::NotPositiveDefinite {
                    what: name.to_string(),
                    min_eig: lmin,
                    threshold,
                });
            }
        }
        // Store exactly symmetric copies so downstream assembly is clean.
        let p1 = (&p1 + p1.transpose()) * 0.5;
        let p2 = (&p2 + p2.transpose()) * 0.5;
        Ok(Self { p1, p2, delta, eta })
    }

    /// Quadratic weight P1 on the estimation error (n_z×n_z).
    pub fn p1(&self) -> &DMatrix<f64> {
        &self.p1
    }

    /// Quadratic weight P2 on the predictor error (n_y×n_y).
    pub fn p2(&self) -> &DMatrix<f64> {
        &self.p2
    }

    /// Clock decay rate δ.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Offset η keeping the θ̃ weight positive at τ = 0.
    pub fn eta(&self) -> f64 {
        self.eta
    }
}

/// Sector bounds sandwiching V between quadratics in (|ε|, |θ̃|):
/// α1|ε|² ≤ V1 ≤ α2|ε|² and ω1|θ̃|² ≤ V2 ≤ ω2|θ̃|².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorBounds {
    /// α1 = e^{−δT2}·λmin(P1).
    pub alpha1: f64,
    /// α2 = λmax(P1).
    pub alpha2: f64,
    /// ω1 = η·λmin(P2).
    pub omega1: f64,
    /// ω2 = (1 − e^{−δT2} + η)·λmax(P2).
    pub omega2: f64,
}

/// Jump contraction factor ϖ_d ∈ [0, 1) and the implied per-jump decay
/// rate χ_d = −½·ln(1−ϖ_d).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpContraction {
    /// Contraction factor: V⁺ ≤ (1−ϖ_d)·V at jumps.
    pub varpi_d: f64,
    /// Exponential jump rate implied by ϖ_d.
    pub chi_d: f64,
}

/// Eigenvalue summary of a certificate check at fixed gains.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    /// λmax of M(μ1) and M(μ2); both must be < 0.
    pub flow_vertex_eigs: [f64; 2],
    /// λmax of the jump block matrix; must be ≤ 0 (within numerical slack).
    pub jump_eig: f64,
    /// Jump contraction factor.
    pub varpi_d: f64,
    /// Sector bounds of V.
    pub sector: SectorBounds,
    /// True iff both vertex eigenvalues are < 0 and the jump eigenvalue is
    /// ≤ 0 within the numerical-zero slack.
    pub feasible: bool,
}

/// Outcome of a certificate search at fixed (δ, η).
pub enum VerifyOutcome {
    /// A certificate was found; the report re-verifies it.
    Feasible(Box<(LyapunovCertificate, CertificateReport)>),
    /// No certificate exists at this (δ, η) (solver infeasibility is an
    /// answer here, not an error).
    Infeasible {
        /// Backend diagnostics for the infeasibility certificate.
        diagnostics: String,
    },
}

/// Flow-matrix formula shared by [`assemble_M`] and the LMI closures:
/// builds M(μ) from explicit parts without requiring a validated
/// certificate.
fn m_from_parts(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    l: &DMatrix<f64>,
    h: &DMatrix<f64>,
    p1: &DMatrix<f64>,
    p2: &DMatrix<f64>,
    delta: f64,
    mu: f64,
) -> DMatrix<f64> {
    let nz = a.nrows();
    let ny = c.nrows();
    let n = nz + ny;
    let alc = a - l * c; // A − LC
    let bottom_flow = c * &alc - h * c; // CA − CLC − HC
    let clh = c * l + h; // CL + H

    let mut m = DMatrix::zeros(n, n);
    m.view_mut((0, 0), (nz, nz))
        .copy_from(&(he(&(p1 * &alc)) + p1 * delta));
    let off = p1 * l + bottom_flow.transpose() * p2 * mu;
    m.view_mut((0, nz), (nz, ny)).copy_from(&off);
    m.view_mut((nz, 0), (ny, nz)).copy_from(&off.transpose());
    m.view_mut((nz, nz), (ny, ny))
        .copy_from(&(he(&(p2 * &clh)) * mu - p2 * delta));
    // Exact symmetry by construction; symmetrize to erase rounding.
    (&m + m.transpose()) * 0.5
}

/// Jump-matrix formula shared by [`assemble_jump_lmi`] and the LMI
/// closures.
fn jump_from_parts(
    c: &DMatrix<f64>,
    f: &DMatrix<f64>,
    p1: &DMatrix<f64>,
    delta: f64,
    t1: f64,
) -> DMatrix<f64> {
    let nz = p1.nrows();
    let n = 2 * nz;
    let mut m = DMatrix::zeros(n, n);
    m.view_mut((0, 0), (nz, nz)).copy_from(&(p1 * -1.0));
    let off = p1 - c.transpose() * f.transpose() * p1;
    m.view_mut((0, nz), (nz, nz)).copy_from(&off);
    m.view_mut((nz, 0), (nz, nz)).copy_from(&off.transpose());
    m.view_mut((nz, nz), (nz, nz))
        .copy_from(&(p1 * (-(delta * t1).exp())));
    (&m + m.transpose()) * 0.5
}

/// Assembles the flow LMI matrix M(μ) for given plant, gains, and
/// certificate. The result is exactly symmetric.
#[allow(non_snake_case)]
pub fn assemble_M(
    plant: &PlantModel,
    gains: &ObserverGains,
    cert: &LyapunovCertificate,
    mu: f64,
) -> Result<DMatrix<f64>> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::InvalidArgument {
            arg: "mu",
            reason: format!("must be nonnegative and finite, got {mu}"),
        });
    }
    let (nz, ny) = (plant.nz(), plant.ny());
    if gains.l().shape() != (nz, ny) {
        return Err(Error::dim("L", (nz, ny), gains.l().shape()));
    }
    if cert.p1().nrows() != nz {
        return Err(Error::dim("P1", (nz, nz), cert.p1().shape()));
    }
    if cert.p2().nrows() != ny {
        return Err(Error::dim("P2", (ny, ny), cert.p2().shape()));
    }
    Ok(m_from_parts(
        plant.a(),
        plant.c(),
        gains.l(),
        gains.h(),
        cert.p1(),
        cert.p2(),
        cert.delta(),
        mu,
    ))
}

/// The vertex values (μ1, μ2) of μ(τ) = (1+η)e^{δτ} − 1 over τ ∈ [0, T2]:
/// μ1 = η and μ2 = (1+η)e^{δT2} − 1, with μ1 ≤ μ2.
pub fn vertex_mus(cert: &LyapunovCertificate, timing: &TimingBounds) -> (f64, f64) {
    let mu1 = cert.eta();
    let mu2 = (1.0 + cert.eta()) * (cert.delta() * timing.t2()).exp() - 1.0;
    (mu1, mu2)
}

/// Assembles the jump LMI block matrix
/// `[[−P1, P1−CᵀFᵀP1], [•, −e^{δT1}P1]]` (2n_z square, exactly symmetric).
pub fn assemble_jump_lmi(
    plant: &PlantModel,
    f: &DMatrix<f64>,
    cert: &LyapunovCertificate,
    timing: &TimingBounds,
) -> Result<DMatrix<f64>> {
    let (nz, ny) = (plant.nz(), plant.ny());
    if f.shape() != (nz, ny) {
        return Err(Error::dim("F", (nz, ny), f.shape()));
    }
    if cert.p1().nrows() != nz {
        return Err(Error::dim("P1", (nz, nz), cert.p1().shape()));
    }
    Ok(jump_from_parts(
        plant.c(),
        f,
        cert.p1(),
        cert.delta(),
        timing.t1(),
    ))
}

/// Evaluates the vertex/jump eigenvalue checks of an explicit certificate
/// at fixed gains, without a solver call.
///
/// This is the re-verification primitive: `verify_gains` uses it to report
/// on the certificate it found, and the design layer uses it to confirm
/// that a synthesized certificate also certifies the recovered gains.
pub fn report_for(
    plant: &PlantModel,
    gains: &ObserverGains,
    timing: &TimingBounds,
    cert: &LyapunovCertificate,
) -> Result<CertificateReport> {
    let (mu1, mu2) = vertex_mus(cert, timing);
    let e1 = lambda_max(&assemble_M(plant, gains, cert, mu1)?);
    let e2 = lambda_max(&assemble_M(plant, gains, cert, mu2)?);
    let jump = assemble_jump_lmi(plant, gains.f(), cert, timing)?;
    let jump_eig = lambda_max(&jump);
    let sector = sector_bounds(cert, timing);
    let zero_slack = ZERO_SLACK_COEFF * (1.0 + cert.p1().norm());
    let feasible = e1 < 0.0 && e2 < 0.0 && jump_eig <= zero_slack;
    let varpi_d = if feasible {
        compute_varpi_d(plant, gains.f(), cert, timing)?.varpi_d
    } else {
        0.0
    };
    Ok(CertificateReport {
        flow_vertex_eigs: [e1, e2],
        jump_eig,
        varpi_d,
        sector,
        feasible,
    })
}

/// Searches for a certificate (P1, P2) at fixed (δ, η) by solving the LMI
/// feasibility problem: both vertex flow matrices strictly negative
/// definite, the jump matrix negative semidefinite, P1 and P2 positive
/// definite, under the scale normalization
/// `trace(P1) + trace(P2) = n_z + n_y` (the inequalities are homogeneous
/// in (P1, P2), so the normalization removes the free scaling direction
/// without excluding any certificate).
///
/// Infeasibility is a structured outcome, not an error; solver breakdowns
/// are errors.
pub fn verify_gains(
    plant: &PlantModel,
    gains: &ObserverGains,
    timing: &TimingBounds,
    delta: f64,
    eta: f64,
) -> Result<VerifyOutcome> {
    verify_gains_with_options(plant, gains, timing, delta, eta, &SolveOptions::default())
}

/// [`verify_gains`] with explicit solver options.
pub fn verify_gains_with_options(
    plant: &PlantModel,
    gains: &ObserverGains,
    timing: &TimingBounds,
    delta: f64,
    eta: f64,
    options: &SolveOptions,
) -> Result<VerifyOutcome> {
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
    if gains.l().shape() != (nz, ny) || gains.h().shape() != (ny, ny) || gains.f().shape() != (nz, ny)
    {
        return Err(Error::dim("gains", (nz, ny), gains.l().shape()));
    }

    let mu1 = eta;
    let mu2 = (1.0 + eta) * (delta * timing.t2()).exp() - 1.0;
    let t1 = timing.t1();

    let mut problem = LmiProblem::new();
    problem.add_symmetric("P1", nz)?;
    problem.add_symmetric("P2", ny)?;

    for (label, mu) in [("flow vertex 1", mu1), ("flow vertex 2", mu2)] {
        let (a, c) = (plant.a().clone(), plant.c().clone());
        let (l, h) = (gains.l().clone(), gains.h().clone());
        problem.add_constraint(label, ConstraintSense::NegativeDefinite, move |asg| {
            m_from_parts(&a, &c, &l, &h, &asg["P1"], &asg["P2"], delta, mu)
        });
    }
    {
        let c = plant.c().clone();
        let f = gains.f().clone();
        problem.add_constraint("jump", ConstraintSense::NegativeSemidefinite, move |asg| {
            jump_from_parts(&c, &f, &asg["P1"], delta, t1)
        });
    }
    problem.add_constraint("P1 positive definite", ConstraintSense::PositiveDefinite, |asg| {
        asg["P1"].clone()
    });
    problem.add_constraint("P2 positive definite", ConstraintSense::PositiveDefinite, |asg| {
        asg["P2"].clone()
    });
    let total = (nz + ny) as f64;
    problem.add_equality("trace normalization", move |asg| {
        asg["P1"].trace() + asg["P2"].trace() - total
    });

    let outcome = lmi::solve(&problem, options)?;
    match outcome.status {
        SolveStatus::Feasible | SolveStatus::Optimal => {
            let p1 = outcome.assignments["P1"].clone();
            let p2 = outcome.assignments["P2"].clone();
            let cert = LyapunovCertificate::new(p1, p2, delta, eta)?;
            let report = report_for(plant, gains, timing, &cert)?;
            if !report.feasible {
                return Err(Error::NumericalFailure {
                    reason: format!(
                        "solver accepted a certificate that fails re-verification \
                         (vertex eigs {:.3e}, {:.3e}; jump eig {:.3e})",
                        report.flow_vertex_eigs[0], report.flow_vertex_eigs[1], report.jump_eig
                    ),
                    diagnostics: outcome.solver_diagnostics,
                });
            }
            Ok(VerifyOutcome::Feasible(Box::new((cert, report))))
        }
        SolveStatus::Infeasible => Ok(VerifyOutcome::Infeasible {
            diagnostics: outcome.solver_diagnostics,
        }),
        SolveStatus::NumericalFailure => Err(Error::NumericalFailure {
            reason: "certificate search did not converge".into(),
            diagnostics: outcome.solver_diagnostics,
        }),
    }
}

/// Evaluates V(ε, θ̃, τ) = e^{−δτ}εᵀP1ε + (1+η−e^{−δτ})θ̃ᵀP2θ̃.
#[allow(non_snake_case)]
pub fn evaluate_V(cert: &LyapunovCertificate, x: &HybridState) -> Result<f64> {
    if !(0.0..=x.t2).contains(&x.tau) {
        return Err(Error::TimerOutOfRange { tau: x.tau, t2: x.t2 });
    }
    let nz = cert.p1().nrows();
    let ny = cert.p2().nrows();
    if x.eps.len() != nz {
        return Err(Error::dim("eps", (nz, 1), (x.eps.len(), 1)));
    }
    if x.theta_tilde.len() != ny {
        return Err(Error::dim("theta_tilde", (ny, 1), (x.theta_tilde.len(), 1)));
    }
    let decay = (-cert.delta() * x.tau).exp();
    let v1 = (x.eps.transpose() * cert.p1() * &x.eps)[(0, 0)];
    let v2 = (x.theta_tilde.transpose() * cert.p2() * &x.theta_tilde)[(0, 0)];
    Ok(decay * v1 + (1.0 + cert.eta() - decay) * v2)
}

/// The sector bounds α1, α2, ω1, ω2 sandwiching the two pieces of V over
/// τ ∈ [0, T2].
pub fn sector_bounds(cert: &LyapunovCertificate, timing: &TimingBounds) -> SectorBounds {
    let decay_t2 = (-cert.delta() * timing.t2()).exp();
    SectorBounds {
        alpha1: decay_t2 * lambda_min(cert.p1()),
        alpha2: lambda_max(cert.p1()),
        omega1: cert.eta() * lambda_min(cert.p2()),
        omega2: (1.0 - decay_t2 + cert.eta()) * lambda_max(cert.p2()),
    }
}

/// Computes the jump contraction ϖ_d from
/// Q = e^{−δT1}(I−FC)ᵀP1(I−FC) − P1 (which must be ⪯ 0):
/// ϖ_d = min(|λmax(Q)|/λmax(P1), 1−guard) and χ_d = −½ln(1−ϖ_d).
pub fn compute_varpi_d(
    plant: &PlantModel,
    f: &DMatrix<f64>,
    cert: &LyapunovCertificate,
    timing: &TimingBounds,
) -> Result<JumpContraction> {
    let (nz, ny) = (plant.nz(), plant.ny());
    if f.shape() != (nz, ny) {
        return Err(Error::dim("F", (nz, ny), f.shape()));
    }
    if cert.p1().nrows() != nz {
        return Err(Error::dim("P1", (nz, nz), cert.p1().shape()));
    }
    let ifc = DMatrix::identity(nz, nz) - f * plant.c();
    let q = ifc.transpose() * cert.p1() * &ifc * (-cert.delta() * timing.t1()).exp() - cert.p1();
    let q = (&q + q.transpose()) * 0.5;
    let lmax_q = lambda_max(&q);
    let zero_slack = ZERO_SLACK_COEFF * (1.0 + cert.p1().norm());
    if lmax_q > zero_slack {
        return Err(Error::InequalityViolated {
            what: "jump contraction precondition Q ⪯ 0".into(),
            eigenvalue: lmax_q,
        });
    }
    let alpha2 = lambda_max(cert.p1());
    // Clamp at zero in case λmax(Q) sits in the (+) numerical slack band.
    let ratio = (lmax_q.abs() / alpha2).max(0.0);
    let varpi_d = ratio.min(1.0 - 1e-12);
    let chi_d = -0.5 * (1.0 - varpi_d).ln();
    Ok(JumpContraction { varpi_d, chi_d })
}
