//! Plant, observer, timing, and error-dynamics data types, and the assembly
//! of the hybrid error system.
//!
//! The plant is an autonomous LTI system ż = Az with sampled output
//! y(t_k) = Cz(t_k), where consecutive sampling instants satisfy
//! T1 ≤ t_{k+1} − t_k ≤ T2. The observer holds a state estimate ẑ and an
//! output predictor θ; between samples it flows with
//!
//! ```text
//! ẑ̇ = Aẑ + Lθ,    θ̇ = Hθ,
//! ```
//!
//! and at a sample it jumps with
//!
//! ```text
//! ẑ⁺ = ẑ + F(y − Cẑ),    θ⁺ = (I − CF)(y − Cẑ).
//! ```
//!
//! In the error coordinates ε ≔ z − ẑ (estimation error) and
//! θ̃ ≔ Cε − θ (predictor error) the dynamics are linear:
//! flow ẋ = 𝖥x and jump x⁺ = 𝖦x with x = (ε, θ̃) and
//!
//! ```text
//! 𝖥 = [ A − LC              L      ]      𝖦 = [ I − FC   0 ]
//!     [ CA − CLC − HC       CL + H ]          [ 0        0 ]
//! ```
//!
//! A countdown timer τ (τ̇ = −1 on flows, reset into [T1, T2] at jumps)
//! completes the hybrid state; jumps are enabled exactly when τ = 0.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::Result;

/// Autonomous LTI plant ż = Az with output map y = Cz.
///
/// `A` is n_z×n_z (1/time units), `C` is n_y×n_z (dimensionless).
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    a: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl PlantModel {
    /// Builds a plant, checking that `A` is square, `C` has matching column
    /// count, and both dimensions are at least 1.
    pub fn new(a: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        if a.nrows() == 0 || a.nrows() != a.ncols() {
            return Err(Error::dim("A", (a.nrows(), a.nrows()), (a.nrows(), a.ncols())));
        }
        if c.nrows() == 0 || c.ncols() != a.nrows() {
            return Err(Error::dim("C", (c.nrows().max(1), a.nrows()), (c.nrows(), c.ncols())));
        }
        if a.iter().any(|v| !v.is_finite()) || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument {
                arg: "plant",
                reason: "A and C must have finite entries".into(),
            });
        }
        Ok(Self { a, c })
    }

    /// State dimension n_z.
    pub fn nz(&self) -> usize {
        self.a.nrows()
    }

    /// Output dimension n_y.
    pub fn ny(&self) -> usize {
        self.c.nrows()
    }

    /// State matrix A (n_z×n_z).
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Output map C (n_y×n_z).
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
}

/// Bounds 0 < T1 ≤ T2 on consecutive inter-sample gaps.
///
/// Strict positivity of T1 rules out Zeno sampling sequences (infinitely
/// many samples in finite time).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingBounds {
    t1: f64,
    t2: f64,
}

impl TimingBounds {
    /// Builds timing bounds, enforcing 0 < T1 ≤ T2 and finiteness.
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        if !t1.is_finite() || !t2.is_finite() || t1 <= 0.0 || t1 > t2 {
            return Err(Error::InvalidArgument {
                arg: "timing",
                reason: format!("need 0 < T1 <= T2, got T1 = {t1}, T2 = {t2}"),
            });
        }
        Ok(Self { t1, t2 })
    }

    /// Minimum inter-sample gap T1.
    pub fn t1(&self) -> f64 {
        self.t1
    }

    /// Maximum inter-sample gap T2.
    pub fn t2(&self) -> f64 {
        self.t2
    }
}

/// Observer gains: flow injection `L` (n_z×n_y), predictor dynamics `H`
/// (n_y×n_y), jump injection `F` (n_z×n_y).
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverGains {
    l: DMatrix<f64>,
    h: DMatrix<f64>,
    f: DMatrix<f64>,
}

impl ObserverGains {
    /// Builds a gain set, checking every block against the plant dimensions.
    pub fn new(plant: &PlantModel, l: DMatrix<f64>, h: DMatrix<f64>, f: DMatrix<f64>) -> Result<Self> {
        let (nz, ny) = (plant.nz(), plant.ny());
        if l.shape() != (nz, ny) {
            return Err(Error::dim("L", (nz, ny), l.shape()));
        }
        if h.shape() != (ny, ny) {
            return Err(Error::dim("H", (ny, ny), h.shape()));
        }
        if f.shape() != (nz, ny) {
            return Err(Error::dim("F", (nz, ny), f.shape()));
        }
        for (name, m) in [("L", &l), ("H", &h), ("F", &f)] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument {
                    arg: "gains",
                    reason: format!("{name} must have finite entries"),
                });
            }
        }
        Ok(Self { l, h, f })
    }

    /// All-zero gains (the observer then runs as an open-loop copy of the
    /// plant and ignores samples entirely).
    pub fn zero(plant: &PlantModel) -> Self {
        let (nz, ny) = (plant.nz(), plant.ny());
        Self {
            l: DMatrix::zeros(nz, ny),
            h: DMatrix::zeros(ny, ny),
            f: DMatrix::zeros(nz, ny),
        }
    }

    /// Flow injection gain L.
    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Predictor dynamics gain H.
    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    /// Jump injection gain F.
    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }
}

/// Flow and jump matrices of the error system in the (ε, θ̃) coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorDynamics {
    /// Flow matrix 𝖥, (n_z+n_y)×(n_z+n_y).
    pub fmat: DMatrix<f64>,
    /// Jump matrix 𝖦, (n_z+n_y)×(n_z+n_y). Its bottom n_y rows and its
    /// top-right n_z×n_y block are identically zero: a jump resets the
    /// predictor error to zero and leaves it decoupled from ε.
    pub gmat: DMatrix<f64>,
}

/// Assembles the error-system flow and jump matrices
///
/// ```text
/// 𝖥 = [ A − LC          L      ]      𝖦 = [ I − FC   0 ]
///     [ CA − CLC − HC   CL + H ]          [ 0        0 ]
/// ```
///
/// with block dimensions (n_z, n_y).
pub fn build_error_dynamics(plant: &PlantModel, gains: &ObserverGains) -> Result<ErrorDynamics> {
    let (nz, ny) = (plant.nz(), plant.ny());
    let n = nz + ny;
    // Revalidate shapes: a gain set constructed against one plant may be
    // paired with another of different size.
    if gains.l().shape() != (nz, ny) {
        return Err(Error::dim("L", (nz, ny), gains.l().shape()));
    }
    if gains.h().shape() != (ny, ny) {
        return Err(Error::dim("H", (ny, ny), gains.h().shape()));
    }
    if gains.f().shape() != (nz, ny) {
        return Err(Error::dim("F", (nz, ny), gains.f().shape()));
    }

    let a = plant.a();
    let c = plant.c();
    let (l, h, f) = (gains.l(), gains.h(), gains.f());

    let mut fmat = DMatrix::zeros(n, n);
    // Top-left: A − LC. Top-right: L.
    fmat.view_mut((0, 0), (nz, nz)).copy_from(&(a - l * c));
    fmat.view_mut((0, nz), (nz, ny)).copy_from(l);
    // Bottom-left: CA − CLC − HC = C(A − LC) − HC. Bottom-right: CL + H.
    fmat.view_mut((nz, 0), (ny, nz))
        .copy_from(&(c * (a - l * c) - h * c));
    fmat.view_mut((nz, nz), (ny, ny)).copy_from(&(c * l + h));

    let mut gmat = DMatrix::zeros(n, n);
    gmat.view_mut((0, 0), (nz, nz))
        .copy_from(&(DMatrix::identity(nz, nz) - f * c));

    Ok(ErrorDynamics { fmat, gmat })
}

/// Hybrid state (ε, θ̃, τ) of the error system.
///
/// `tau` is the countdown timer: it decreases with unit rate along flows and
/// is reset into [T1, T2] at jumps; jumps are enabled exactly at τ = 0. The
/// upper bound `t2` is recorded at construction so later range checks do not
/// need the timing bounds again.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    /// Estimation error ε ∈ ℝ^{n_z}.
    pub eps: DVector<f64>,
    /// Predictor error θ̃ ∈ ℝ^{n_y}.
    pub theta_tilde: DVector<f64>,
    /// Timer value, in [0, T2].
    pub tau: f64,
    /// The timer upper bound T2 this state was validated against.
    pub t2: f64,
}

impl HybridState {
    /// Builds a hybrid state, enforcing τ ∈ [0, T2].
    pub fn new(
        eps: DVector<f64>,
        theta_tilde: DVector<f64>,
        tau: f64,
        timing: &TimingBounds,
    ) -> Result<Self> {
        if !(0.0..=timing.t2()).contains(&tau) {
            return Err(Error::TimerOutOfRange {
                tau,
                t2: timing.t2(),
            });
        }
        Ok(Self {
            eps,
            theta_tilde,
            tau,
            t2: timing.t2(),
        })
    }
}

/// Distance of a hybrid state to the attractor {ε = 0, θ̃ = 0} × [0, T2]:
/// `sqrt(|ε|² + |θ̃|²)`. The timer contributes nothing because it already
/// lies in [0, T2].
pub fn distance_to_attractor(x: &HybridState) -> Result<f64> {
    if !(0.0..=x.t2).contains(&x.tau) {
        return Err(Error::TimerOutOfRange { tau: x.tau, t2: x.t2 });
    }
    Ok((x.eps.norm_squared() + x.theta_tilde.norm_squared()).sqrt())
}
