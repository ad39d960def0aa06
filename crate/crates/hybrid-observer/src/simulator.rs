//! Hybrid-system simulation on hybrid time domains: sampling-sequence
//! generation, exact flow integration, cost evaluation, and empirical
//! stability diagnostics.
//!
//! A solution is a hybrid arc defined on a union of intervals
//! [t_j, t_{j+1}] × {j}: the state flows under the LTI dynamics while the
//! countdown timer τ runs to zero (τ̇ = −1), and jumps when τ = 0, at
//! which point the timer is reset to the gap until the next sample. The
//! sampling instants satisfy 0 ≤ t1 ≤ T2 and T1 ≤ t_{k+1} − t_k ≤ T2.
//!
//! Two state representations are supported and must agree: the error
//! coordinates (ε, θ̃) flowing under the closed-loop error matrix, and the
//! physical plant/observer pair (z, ẑ, θ). Flows are integrated exactly —
//! every recorded point is `expm(M·(t−t_start))·x_start` from its flow
//! interval's start state, so the dense-output grid affects which instants
//! are recorded but never the accuracy of any recorded state. A compact
//! adaptive Runge–Kutta integrator is provided purely to cross-validate
//! the matrix-exponential flow.
//!
//! On top of simulation the module evaluates the quadratic cost
//! ∫ εᵀQ_Fε dt + Σ εᵀQ_Jε (flow integral by adaptive quadrature on the
//! exact flow, jump sum over pre-jump states), fits a decay envelope
//! |φ(t,j)| ≤ k·e^{−λ(t+j)}·|φ(0,0)| to the recorded distances, and
//! checks monotonicity of a certificate's Lyapunov function along the arc.

use nalgebra::{DMatrix, DVector};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::lyapunov::{self, LyapunovCertificate};
use crate::model::{build_error_dynamics, HybridState, ObserverGains, PlantModel, TimingBounds};
use crate::synthesis::DesignWeights;
use crate::Result;

/// Relative slack for validating sampling gaps against the timing bounds,
/// absorbing the rounding of gap arithmetic.
const GAP_SLACK: f64 = 1e-9;

/// Strictly increasing sampling instants compatible with a pair of
/// timing bounds: 0 ≤ t1 ≤ T2 and T1 ≤ t_{k+1} − t_k ≤ T2.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSequence {
    times: Vec<f64>,
    timing: TimingBounds,
}

impl SamplingSequence {
    /// Validates and wraps an explicit list of sampling instants.
    pub fn new(times: Vec<f64>, timing: TimingBounds) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidArgument {
                arg: "times",
                reason: "sampling sequence must contain at least one instant".into(),
            });
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument {
                arg: "times",
                reason: "sampling instants must be finite".into(),
            });
        }
        let slack = GAP_SLACK * timing.t2().max(1.0);
        let first = times[0];
        if !(-slack..=timing.t2() + slack).contains(&first) {
            return Err(Error::InvalidArgument {
                arg: "times",
                reason: format!(
                    "first sampling instant must lie in [0, T2] = [0, {}], got {first}",
                    timing.t2()
                ),
            });
        }
        for (k, pair) in times.windows(2).enumerate() {
            let gap = pair[1] - pair[0];
            if !(timing.t1() - slack..=timing.t2() + slack).contains(&gap) {
                return Err(Error::InvalidArgument {
                    arg: "times",
                    reason: format!(
                        "gap t_{} − t_{} = {gap} outside [T1, T2] = [{}, {}]",
                        k + 2,
                        k + 1,
                        timing.t1(),
                        timing.t2()
                    ),
                });
            }
        }
        Ok(Self { times, timing })
    }

    /// The sampling instants, strictly increasing.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// The timing bounds the sequence was validated against.
    pub fn timing(&self) -> TimingBounds {
        self.timing
    }
}

/// How to generate a sampling sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplingPolicy {
    /// t_k = k·period; the period must lie in [T1, T2].
    Periodic {
        /// Constant inter-sample gap.
        period: f64,
    },
    /// First instant uniform on [0, T2], then independent gaps uniform on
    /// [T1, T2]; deterministic for a given seed.
    UniformRandom {
        /// Seed for the reproducible generator.
        seed: u64,
    },
    /// First instant at t = 0 (the timer starts expired), then each gap
    /// follows the sinusoidal reset law
    /// `((T2−T1)/2)·sin(t_k) + (T2+T1)/2` evaluated at the jump time.
    Sinusoidal,
    /// Use the given instants verbatim (still validated).
    Explicit {
        /// Sampling instants.
        times: Vec<f64>,
    },
}

/// Generates a sampling sequence under `policy` that covers `[0, horizon]`
/// (the last instant is ≥ horizon, so a simulation over the horizon never
/// outruns it).
pub fn generate_sampling(
    policy: &SamplingPolicy,
    timing: &TimingBounds,
    horizon: f64,
) -> Result<SamplingSequence> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidArgument {
            arg: "horizon",
            reason: format!("must be positive and finite, got {horizon}"),
        });
    }
    let times = match policy {
        SamplingPolicy::Periodic { period } => {
            let p = *period;
            if !(p >= timing.t1() && p <= timing.t2()) {
                return Err(Error::InvalidArgument {
                    arg: "policy",
                    reason: format!(
                        "periodic sampling period {p} outside [T1, T2] = [{}, {}]",
                        timing.t1(),
                        timing.t2()
                    ),
                });
            }
            let mut times = vec![p];
            while *times.last().expect("non-empty") < horizon {
                times.push(times.last().expect("non-empty") + p);
            }
            times
        }
        SamplingPolicy::UniformRandom { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let first = Uniform::new_inclusive(0.0, timing.t2());
            let gap = Uniform::new_inclusive(timing.t1(), timing.t2());
            let mut times = vec![first.sample(&mut rng)];
            while *times.last().expect("non-empty") < horizon {
                let t = times.last().expect("non-empty") + gap.sample(&mut rng);
                times.push(t);
            }
            times
        }
        SamplingPolicy::Sinusoidal => {
            let half_span = (timing.t2() - timing.t1()) / 2.0;
            let mid = (timing.t2() + timing.t1()) / 2.0;
            let mut times = vec![0.0];
            while *times.last().expect("non-empty") < horizon {
                let t = *times.last().expect("non-empty");
                times.push(t + half_span * t.sin() + mid);
            }
            times
        }
        SamplingPolicy::Explicit { times } => times.clone(),
    };
    let sequence = SamplingSequence::new(times, *timing)?;
    if *sequence.times().last().expect("non-empty") < horizon {
        return Err(Error::SequenceTooShort {
            last_sample: *sequence.times().last().expect("non-empty"),
            horizon,
        });
    }
    Ok(sequence)
}

/// Which state representation an arc was simulated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcKind {
    /// Error coordinates (ε, θ̃) under the closed-loop error dynamics.
    ErrorCoords,
    /// Physical plant/observer pair (z, ẑ, θ).
    PlantObserver,
}

/// Physical-coordinate snapshot, present on arcs simulated as the
/// plant/observer pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalState {
    /// Plant state z.
    pub z: DVector<f64>,
    /// Observer state ẑ.
    pub z_hat: DVector<f64>,
    /// Output predictor θ.
    pub theta: DVector<f64>,
}

/// One recorded dense-output point of a hybrid arc.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcPoint {
    /// Ordinary time.
    pub t: f64,
    /// Jump counter.
    pub j: usize,
    /// Estimation error ε = z − ẑ.
    pub eps: DVector<f64>,
    /// Predictor error θ̃ = Cε − θ.
    pub theta_tilde: DVector<f64>,
    /// Timer value.
    pub tau: f64,
    /// Physical coordinates when the arc carries them.
    pub physical: Option<PhysicalState>,
}

impl ArcPoint {
    /// Euclidean distance to the attractor:
    /// `sqrt(|ε|² + |θ̃|²)` (the timer component contributes nothing).
    pub fn distance_to_attractor(&self) -> f64 {
        (self.eps.norm_squared() + self.theta_tilde.norm_squared()).sqrt()
    }
}

/// One flow interval [t_start, t_end] × {j} with its dense output.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowInterval {
    /// Jump counter during this interval.
    pub j: usize,
    /// Left endpoint.
    pub t_start: f64,
    /// Right endpoint (equal to `t_start` for a degenerate interval, e.g.
    /// when the timer starts expired).
    pub t_end: f64,
    /// Recorded points, endpoints included, times nondecreasing. The
    /// first point is the interval's exact start state.
    pub points: Vec<ArcPoint>,
}

/// One jump event: the pre-jump state at (t, j) and the post-jump state
/// at (t, j+1).
#[derive(Debug, Clone, PartialEq)]
pub struct JumpEvent {
    /// Jump time.
    pub t: f64,
    /// Jump counter before the jump (the post-jump counter is `j + 1`).
    pub j: usize,
    /// State immediately before the jump.
    pub pre: ArcPoint,
    /// State immediately after the jump (θ̃⁺ = 0 by construction).
    pub post: ArcPoint,
}

/// A simulated hybrid arc: flow intervals with dense output, jump events,
/// and the exact flow matrix that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridArc {
    /// Which representation the raw states use.
    pub kind: ArcKind,
    /// Flow intervals in domain order.
    pub intervals: Vec<FlowInterval>,
    /// Jump events in domain order.
    pub jumps: Vec<JumpEvent>,
    /// The raw-state flow matrix (error matrix for [`ArcKind::ErrorCoords`],
    /// block-diagonal plant/observer matrix for
    /// [`ArcKind::PlantObserver`]).
    pub flow: DMatrix<f64>,
    timing: TimingBounds,
    /// Maps a raw state vector to ε.
    eps_selector: DMatrix<f64>,
}

impl HybridArc {
    /// The timing bounds the arc was simulated under.
    pub fn timing(&self) -> TimingBounds {
        self.timing
    }

    /// All recorded points in domain order.
    pub fn points(&self) -> impl Iterator<Item = &ArcPoint> {
        self.intervals.iter().flat_map(|iv| iv.points.iter())
    }

    /// The initial point φ(0, 0).
    pub fn initial_point(&self) -> &ArcPoint {
        &self.intervals[0].points[0]
    }

    /// The last recorded point.
    pub fn final_point(&self) -> &ArcPoint {
        self.intervals
            .last()
            .expect("arc has at least one interval")
            .points
            .last()
            .expect("interval has at least one point")
    }

    /// Builds an arc from externally recorded points (one degenerate
    /// interval per point, no jumps). The result supports the
    /// point-based diagnostics ([`fit_ges_envelope`],
    /// [`check_lyapunov_monotonicity`]) but not cost evaluation, which
    /// needs the generating flow.
    pub fn from_recorded_points(points: Vec<ArcPoint>, timing: TimingBounds) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument {
                arg: "points",
                reason: "an arc needs at least one recorded point".into(),
            });
        }
        let nz = points[0].eps.len();
        let ny = points[0].theta_tilde.len();
        let intervals = points
            .into_iter()
            .map(|p| FlowInterval { j: p.j, t_start: p.t, t_end: p.t, points: vec![p] })
            .collect();
        Ok(Self {
            kind: ArcKind::ErrorCoords,
            intervals,
            jumps: Vec::new(),
            flow: DMatrix::zeros(0, 0),
            timing,
            eps_selector: eps_selector_error(nz, ny),
        })
    }
}

/// Initial condition for a simulation, in either representation; the arc
/// inherits the representation.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Start from error coordinates (ε0, θ̃0) and timer τ0.
    ErrorCoords {
        /// Initial estimation error.
        eps0: DVector<f64>,
        /// Initial predictor error.
        theta_tilde0: DVector<f64>,
        /// Initial timer value; must equal the first sampling instant.
        tau0: f64,
    },
    /// Start from physical states (z0, ẑ0, θ0) and timer τ0.
    PlantObserver {
        /// Initial plant state.
        z0: DVector<f64>,
        /// Initial observer state.
        z_hat0: DVector<f64>,
        /// Initial predictor value.
        theta0: DVector<f64>,
        /// Initial timer value; must equal the first sampling instant.
        tau0: f64,
    },
}

impl InitialCondition {
    fn tau0(&self) -> f64 {
        match self {
            Self::ErrorCoords { tau0, .. } | Self::PlantObserver { tau0, .. } => *tau0,
        }
    }
}

/// Simulation tuning knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulateOptions {
    /// Dense-output points recorded per flow interval (≥ 2 except on
    /// degenerate intervals). Affects only which instants are recorded,
    /// never the accuracy of any recorded state.
    pub points_per_interval: usize,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self { points_per_interval: 200 }
    }
}

/// ε = [I 0]·(ε; θ̃).
fn eps_selector_error(nz: usize, ny: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(nz, nz + ny);
    s.view_mut((0, 0), (nz, nz)).copy_from(&DMatrix::identity(nz, nz));
    s
}

/// ε = [I −I 0]·(z; ẑ; θ).
fn eps_selector_physical(nz: usize, ny: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(nz, 2 * nz + ny);
    s.view_mut((0, 0), (nz, nz)).copy_from(&DMatrix::identity(nz, nz));
    s.view_mut((0, nz), (nz, nz))
        .copy_from(&(DMatrix::identity(nz, nz) * -1.0));
    s
}

/// Simulates the hybrid system over `[0, horizon]` with default options.
///
/// Flows are exact (matrix exponential per interval from the interval's
/// start state); jumps apply the error-coordinate reset
/// ε⁺ = (I−FC)ε, θ̃⁺ = 0 — equivalently the physical update
/// ẑ⁺ = ẑ + F(y−Cẑ), θ⁺ = (I−CF)(y−Cẑ) — and reset the timer to the gap
/// until the next sample. The initial timer must match the first sampling
/// instant (τ0 = t1; τ0 = 0 makes the first event a jump at t = 0).
pub fn simulate(
    plant: &PlantModel,
    gains: &ObserverGains,
    init: &InitialCondition,
    sampling: &SamplingSequence,
    horizon: f64,
) -> Result<HybridArc> {
    simulate_with_options(plant, gains, init, sampling, horizon, &SimulateOptions::default())
}

/// [`simulate`] with explicit options.
pub fn simulate_with_options(
    plant: &PlantModel,
    gains: &ObserverGains,
    init: &InitialCondition,
    sampling: &SamplingSequence,
    horizon: f64,
    options: &SimulateOptions,
) -> Result<HybridArc> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidArgument {
            arg: "horizon",
            reason: format!("must be positive and finite, got {horizon}"),
        });
    }
    let times = sampling.times();
    let last = *times.last().expect("sequence is non-empty");
    if last < horizon {
        return Err(Error::SequenceTooShort { last_sample: last, horizon });
    }
    let timing = sampling.timing();
    let tau0 = init.tau0();
    if !(tau0.is_finite() && (0.0..=timing.t2() + GAP_SLACK).contains(&tau0)) {
        return Err(Error::TimerOutOfRange { tau: tau0, t2: timing.t2() });
    }
    if (tau0 - times[0]).abs() > 1e-9 * timing.t2().max(1.0) {
        return Err(Error::InvalidArgument {
            arg: "init",
            reason: format!(
                "initial timer {tau0} must equal the first sampling instant {}",
                times[0]
            ),
        });
    }

    let (nz, ny) = (plant.nz(), plant.ny());
    let dynamics = build_error_dynamics(plant, gains)?;

    // Representation-specific raw state, flow matrix, and linear jump map.
    let (kind, mut x, flow, jump_map, eps_selector) = match init {
        InitialCondition::ErrorCoords { eps0, theta_tilde0, tau0: _ } => {
            if eps0.len() != nz {
                return Err(Error::dim("eps0", (nz, 1), (eps0.len(), 1)));
            }
            if theta_tilde0.len() != ny {
                return Err(Error::dim("theta_tilde0", (ny, 1), (theta_tilde0.len(), 1)));
            }
            let mut x = DVector::zeros(nz + ny);
            x.rows_mut(0, nz).copy_from(eps0);
            x.rows_mut(nz, ny).copy_from(theta_tilde0);
            (
                ArcKind::ErrorCoords,
                x,
                dynamics.fmat.clone(),
                dynamics.gmat.clone(),
                eps_selector_error(nz, ny),
            )
        }
        InitialCondition::PlantObserver { z0, z_hat0, theta0, tau0: _ } => {
            if z0.len() != nz {
                return Err(Error::dim("z0", (nz, 1), (z0.len(), 1)));
            }
            if z_hat0.len() != nz {
                return Err(Error::dim("z_hat0", (nz, 1), (z_hat0.len(), 1)));
            }
            if theta0.len() != ny {
                return Err(Error::dim("theta0", (ny, 1), (theta0.len(), 1)));
            }
            let n = 2 * nz + ny;
            let mut x = DVector::zeros(n);
            x.rows_mut(0, nz).copy_from(z0);
            x.rows_mut(nz, nz).copy_from(z_hat0);
            x.rows_mut(2 * nz, ny).copy_from(theta0);

            // ż = Az, ẑ̇ = Aẑ + Lθ, θ̇ = Hθ.
            let mut flow = DMatrix::zeros(n, n);
            flow.view_mut((0, 0), (nz, nz)).copy_from(plant.a());
            flow.view_mut((nz, nz), (nz, nz)).copy_from(plant.a());
            flow.view_mut((nz, 2 * nz), (nz, ny)).copy_from(gains.l());
            flow.view_mut((2 * nz, 2 * nz), (ny, ny)).copy_from(gains.h());

            // z⁺ = z; ẑ⁺ = FC·z + (I−FC)·ẑ; θ⁺ = (I−CF)C·(z − ẑ).
            let fc = gains.f() * plant.c();
            let icf_c = (DMatrix::identity(ny, ny) - plant.c() * gains.f()) * plant.c();
            let mut jump = DMatrix::zeros(n, n);
            jump.view_mut((0, 0), (nz, nz))
                .copy_from(&DMatrix::identity(nz, nz));
            jump.view_mut((nz, 0), (nz, nz)).copy_from(&fc);
            jump.view_mut((nz, nz), (nz, nz))
                .copy_from(&(DMatrix::identity(nz, nz) - &fc));
            jump.view_mut((2 * nz, 0), (ny, nz)).copy_from(&icf_c);
            jump.view_mut((2 * nz, nz), (ny, nz)).copy_from(&(-&icf_c));
            (ArcKind::PlantObserver, x, flow, jump, eps_selector_physical(nz, ny))
        }
    };

    let record = |x: &DVector<f64>, t: f64, j: usize, tau: f64| -> ArcPoint {
        match kind {
            ArcKind::ErrorCoords => ArcPoint {
                t,
                j,
                eps: x.rows(0, nz).into_owned(),
                theta_tilde: x.rows(nz, ny).into_owned(),
                tau,
                physical: None,
            },
            ArcKind::PlantObserver => {
                let z = x.rows(0, nz).into_owned();
                let z_hat = x.rows(nz, nz).into_owned();
                let theta = x.rows(2 * nz, ny).into_owned();
                let eps = &z - &z_hat;
                let theta_tilde = plant.c() * &eps - &theta;
                ArcPoint {
                    t,
                    j,
                    eps,
                    theta_tilde,
                    tau,
                    physical: Some(PhysicalState { z, z_hat, theta }),
                }
            }
        }
    };

    let npts = options.points_per_interval.max(2);
    let mut intervals = Vec::new();
    let mut jumps = Vec::new();
    let mut j = 0usize;
    let mut t_prev = 0.0f64;
    let mut k = 0usize; // index of the next sampling instant

    loop {
        let t_next_sample = times[k];
        let t_end = t_next_sample.min(horizon);

        // Dense output over [t_prev, t_end]; every point is the exact
        // flow of the interval's start state.
        let mut points = Vec::new();
        if t_end <= t_prev {
            points.push(record(&x, t_prev, j, t_next_sample - t_prev));
        } else {
            for i in 0..npts {
                let t = t_prev + (t_end - t_prev) * i as f64 / (npts - 1) as f64;
                let xi = if i == 0 {
                    x.clone()
                } else {
                    (&flow * (t - t_prev)).exp() * &x
                };
                if xi.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteState { t_start: t_prev, t_end, jump_index: j });
                }
                points.push(record(&xi, t, j, t_next_sample - t));
            }
        }
        let end_state = if t_end <= t_prev {
            x.clone()
        } else {
            (&flow * (t_end - t_prev)).exp() * &x
        };
        intervals.push(FlowInterval { j, t_start: t_prev, t_end, points });

        if t_next_sample < horizon {
            // Jump at the sample instant; the timer resets to the gap
            // until the next sample (which exists because the sequence
            // covers the horizon).
            let pre = record(&end_state, t_next_sample, j, 0.0);
            let x_post = &jump_map * &end_state;
            if x_post.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState {
                    t_start: t_next_sample,
                    t_end: t_next_sample,
                    jump_index: j + 1,
                });
            }
            let next_gap = times[k + 1] - t_next_sample;
            let post = record(&x_post, t_next_sample, j + 1, next_gap);
            jumps.push(JumpEvent { t: t_next_sample, j, pre, post });
            x = x_post;
            j += 1;
            t_prev = t_next_sample;
            k += 1;
        } else {
            break;
        }
    }

    Ok(HybridArc { kind, intervals, jumps, flow, timing, eps_selector })
}

/// Cost of a simulated arc: flow integral, jump sum, and the quadrature
/// error estimate of the flow part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEvaluation {
    /// ∫ εᵀQ_Fε over ordinary time.
    pub flow_cost: f64,
    /// Σ εᵀQ_Jε over pre-jump states.
    pub jump_cost: f64,
    /// flow_cost + jump_cost.
    pub total: f64,
    /// Accumulated adaptive-quadrature error estimate.
    pub quadrature_error_estimate: f64,
}

/// Evaluates the quadratic cost along an arc: adaptive Simpson quadrature
/// of εᵀQ_Fε on each flow interval (using the exact flow, not the
/// recorded grid), plus εᵀQ_Jε summed over the pre-jump states of every
/// jump.
pub fn evaluate_cost(arc: &HybridArc, weights: &DesignWeights) -> Result<CostEvaluation> {
    let nz = arc.eps_selector.nrows();
    if weights.qf().shape() != (nz, nz) {
        return Err(Error::dim("Q_F", (nz, nz), weights.qf().shape()));
    }
    if weights.qj().shape() != (nz, nz) {
        return Err(Error::dim("Q_J", (nz, nz), weights.qj().shape()));
    }
    if arc.flow.nrows() == 0 && arc.intervals.iter().any(|iv| iv.t_end > iv.t_start) {
        return Err(Error::InvalidArgument {
            arg: "arc",
            reason: "cost evaluation needs the generating flow; this arc carries recorded \
                     points only"
                .into(),
        });
    }

    let mut flow_cost = 0.0;
    let mut err_estimate = 0.0;
    for interval in &arc.intervals {
        let len = interval.t_end - interval.t_start;
        if len <= 0.0 {
            continue;
        }
        let x0 = raw_state(arc, &interval.points[0])?;
        // Integrand g(s) = ε(s)ᵀ Q_F ε(s) with ε(s) = S·e^{Ms}·x0.
        let g = |s: f64| -> f64 {
            let xs = if s == 0.0 { x0.clone() } else { (&arc.flow * s).exp() * &x0 };
            let eps = &arc.eps_selector * xs;
            (eps.transpose() * weights.qf() * &eps)[(0, 0)]
        };
        let scale = 1.0 + g(0.0).abs() * len;
        let (value, err) = adaptive_simpson(&g, 0.0, len, 1e-12 * scale);
        flow_cost += value;
        err_estimate += err;
    }

    let mut jump_cost = 0.0;
    for jump in &arc.jumps {
        jump_cost += (jump.pre.eps.transpose() * weights.qj() * &jump.pre.eps)[(0, 0)];
    }

    Ok(CostEvaluation {
        flow_cost,
        jump_cost,
        total: flow_cost + jump_cost,
        quadrature_error_estimate: err_estimate,
    })
}

/// Reconstructs the raw state vector of a point in the arc's
/// representation.
fn raw_state(arc: &HybridArc, point: &ArcPoint) -> Result<DVector<f64>> {
    match arc.kind {
        ArcKind::ErrorCoords => {
            let (nz, ny) = (point.eps.len(), point.theta_tilde.len());
            let mut x = DVector::zeros(nz + ny);
            x.rows_mut(0, nz).copy_from(&point.eps);
            x.rows_mut(nz, ny).copy_from(&point.theta_tilde);
            Ok(x)
        }
        ArcKind::PlantObserver => {
            let phys = point.physical.as_ref().ok_or_else(|| Error::InvalidArgument {
                arg: "arc",
                reason: "plant/observer arc point lacks physical coordinates".into(),
            })?;
            let (nz, ny) = (phys.z.len(), phys.theta.len());
            let mut x = DVector::zeros(2 * nz + ny);
            x.rows_mut(0, nz).copy_from(&phys.z);
            x.rows_mut(nz, nz).copy_from(&phys.z_hat);
            x.rows_mut(2 * nz, ny).copy_from(&phys.theta);
            Ok(x)
        }
    }
}

/// Adaptive Simpson quadrature of `g` over [a, b] returning (integral,
/// error estimate).
fn adaptive_simpson(g: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        g: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> (f64, f64) {
        let m = (a + b) / 2.0;
        let lm = (a + m) / 2.0;
        let rm = (m + b) / 2.0;
        let flm = g(lm);
        let frm = g(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            (left + right + delta / 15.0, delta.abs() / 15.0)
        } else {
            let (lv, le) = recurse(g, a, m, fa, flm, fm, left, tol / 2.0, depth - 1);
            let (rv, re) = recurse(g, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
            (lv + rv, le + re)
        }
    }
    let fa = g(a);
    let m = (a + b) / 2.0;
    let fm = g(m);
    let fb = g(b);
    let whole = simpson(fa, fm, fb, b - a);
    recurse(g, a, b, fa, fm, fb, whole, tol, 24)
}

/// Fitted exponential-decay envelope of the distance to the attractor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GesEnvelope {
    /// Overshoot coefficient (≥ 1 by construction).
    pub k: f64,
    /// Decay rate in hybrid time t + j (0 when the fit found no decay).
    pub lambda: f64,
    /// Whether the fitted rate is strictly positive.
    pub decaying: bool,
}

/// Fits the tightest envelope `|φ(t,j)| ≤ k·e^{−λ(t+j)}·|φ(0,0)|` to the
/// recorded distances: λ from a least-squares fit of ln distance against
/// t + j (clamped at 0), then k as the smallest coefficient making the
/// bound hold at every recorded point.
pub fn fit_ges_envelope(arc: &HybridArc) -> Result<GesEnvelope> {
    let d0 = arc.initial_point().distance_to_attractor();
    if d0 <= 0.0 {
        return Err(Error::EnvelopeUndefined {
            reason: "the arc starts on the attractor (zero initial distance)".into(),
        });
    }

    let mut ss = Vec::new();
    let mut lnd = Vec::new();
    for p in arc.points() {
        let d = p.distance_to_attractor();
        if d > 0.0 {
            ss.push(p.t + p.j as f64);
            lnd.push(d.ln());
        }
    }
    let lambda = if ss.len() >= 2 {
        let slope = least_squares_slope(&ss, &lnd);
        (-slope).max(0.0)
    } else {
        0.0
    };

    let mut k = 1.0f64;
    for p in arc.points() {
        let d = p.distance_to_attractor();
        let s = p.t + p.j as f64;
        k = k.max(d * (lambda * s).exp() / d0);
    }
    Ok(GesEnvelope { k, lambda, decaying: lambda > 0.0 })
}

/// Slope of the least-squares line through (x, y).
fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// Location and size of a Lyapunov-monotonicity violation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityViolation {
    /// Time of the violating step.
    pub t: f64,
    /// Jump counter of the violating step.
    pub j: usize,
    /// V before the step.
    pub v_before: f64,
    /// V after the step.
    pub v_after: f64,
    /// Whether the step was a jump (otherwise a flow step).
    pub at_jump: bool,
}

/// Result of checking a certificate's Lyapunov function along an arc.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    /// V non-increasing along every flow interval (within slack).
    pub flow_monotone: bool,
    /// V non-increasing across every jump (within slack).
    pub jumps_monotone: bool,
    /// Every violating step.
    pub violations: Vec<MonotonicityViolation>,
    /// Fitted continuous decay rate from ln V ≈ ln V0 − 2χ̂_c·t − 2χ̂_d·j.
    pub chi_c_hat: f64,
    /// Fitted discrete decay rate.
    pub chi_d_hat: f64,
    /// V at the first recorded point.
    pub v_initial: f64,
    /// V at the last recorded point.
    pub v_final: f64,
}

impl MonotonicityReport {
    /// True when V was non-increasing along flows and across jumps.
    pub fn monotone(&self) -> bool {
        self.flow_monotone && self.jumps_monotone
    }
}

/// Relative slack for per-step monotonicity comparisons.
const MONOTONE_REL_SLACK: f64 = 1e-9;

/// Evaluates the certificate's V along the arc and checks that it never
/// increases: per consecutive recorded pair within each flow interval,
/// and across every jump. Also least-squares fits
/// ln V ≈ ln V0 − 2χ̂_c·t − 2χ̂_d·j for empirical decay rates.
///
/// The certificate must be one that is feasible for the gains the arc was
/// simulated with; the check itself is purely empirical.
pub fn check_lyapunov_monotonicity(
    arc: &HybridArc,
    cert: &LyapunovCertificate,
) -> Result<MonotonicityReport> {
    let v_at = |p: &ArcPoint| -> Result<f64> {
        let state = HybridState::new(
            p.eps.clone(),
            p.theta_tilde.clone(),
            p.tau.clamp(0.0, arc.timing.t2()),
            &arc.timing,
        )?;
        lyapunov::evaluate_V(cert, &state)
    };

    let mut violations = Vec::new();
    let mut flow_monotone = true;
    let mut jumps_monotone = true;

    for interval in &arc.intervals {
        let mut prev: Option<f64> = None;
        for p in &interval.points {
            let v = v_at(p)?;
            if let Some(v_prev) = prev {
                if v > v_prev + MONOTONE_REL_SLACK * v_prev.abs().max(1e-300) {
                    flow_monotone = false;
                    violations.push(MonotonicityViolation {
                        t: p.t,
                        j: p.j,
                        v_before: v_prev,
                        v_after: v,
                        at_jump: false,
                    });
                }
            }
            prev = Some(v);
        }
    }
    for jump in &arc.jumps {
        let v_pre = v_at(&jump.pre)?;
        let v_post = v_at(&jump.post)?;
        if v_post > v_pre + MONOTONE_REL_SLACK * v_pre.abs().max(1e-300) {
            jumps_monotone = false;
            violations.push(MonotonicityViolation {
                t: jump.t,
                j: jump.j,
                v_before: v_pre,
                v_after: v_post,
                at_jump: true,
            });
        }
    }

    // Two-regressor least squares for the empirical rates.
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for p in arc.points() {
        let v = v_at(p)?;
        if v > 1e-300 {
            rows.push([1.0, p.t, p.j as f64]);
            rhs.push(v.ln());
        }
    }
    let (chi_c_hat, chi_d_hat) = if rows.len() >= 3 {
        let x = DMatrix::from_fn(rows.len(), 3, |r, c| rows[r][c]);
        let y = DVector::from_vec(rhs);
        let beta = x
            .svd(true, true)
            .solve(&y, 1e-12)
            .map_err(|e| Error::NumericalFailure {
                reason: format!("least-squares fit of ln V failed: {e}"),
                diagnostics: String::new(),
            })?;
        (-beta[1] / 2.0, -beta[2] / 2.0)
    } else {
        (0.0, 0.0)
    };

    let v_initial = v_at(arc.initial_point())?;
    let v_final = v_at(arc.final_point())?;
    Ok(MonotonicityReport {
        flow_monotone,
        jumps_monotone,
        violations,
        chi_c_hat,
        chi_d_hat,
        v_initial,
        v_final,
    })
}

/// Integrates ẋ = M·x over [0, len] with an adaptive Dormand–Prince 5(4)
/// scheme. Exists purely to cross-validate the matrix-exponential flow;
/// the simulator itself never calls it.
pub fn flow_rk_reference(m: &DMatrix<f64>, x0: &DVector<f64>, len: f64, rel_tol: f64) -> DVector<f64> {
    assert!(len >= 0.0 && rel_tol > 0.0, "length must be nonnegative and tolerance positive");
    if len == 0.0 {
        return x0.clone();
    }
    // Dormand–Prince coefficients (the classic 7-stage pair).
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    let mut x = x0.clone();
    let mut t = 0.0;
    let mut h = len / 16.0;
    while t < len {
        h = h.min(len - t);
        let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
        k.push(m * &x);
        for s in 0..6 {
            let mut xs = x.clone();
            for (i, ki) in k.iter().enumerate() {
                if A[s][i] != 0.0 {
                    xs += ki * (A[s][i] * h);
                }
            }
            k.push(m * xs);
        }
        let mut x5 = x.clone();
        let mut x4 = x.clone();
        for (i, ki) in k.iter().enumerate() {
            if B5[i] != 0.0 {
                x5 += ki * (B5[i] * h);
            }
            if B4[i] != 0.0 {
                x4 += ki * (B4[i] * h);
            }
        }
        let err = (&x5 - &x4).norm();
        let scale = rel_tol * x5.norm().max(1e-30);
        if err <= scale || h <= len * 1e-14 {
            t += h;
            x = x5;
        }
        let factor = if err > 0.0 { 0.9 * (scale / err).powf(0.2) } else { 4.0 };
        h *= factor.clamp(0.1, 4.0);
    }
    x
}

/// Renders the dense-output table as comma-separated text: one row per
/// recorded point with columns t, j, ε components, θ̃ components, τ, the
/// distance to the attractor, and (when a certificate is supplied) V.
/// Floating-point values carry 17 significant digits.
pub fn export_points_csv(arc: &HybridArc, cert: Option<&LyapunovCertificate>) -> Result<String> {
    let nz = arc.initial_point().eps.len();
    let ny = arc.initial_point().theta_tilde.len();
    let mut out = String::new();
    out.push('t');
    out.push_str(",j");
    for i in 1..=nz {
        out.push_str(&format!(",eps_{i}"));
    }
    for i in 1..=ny {
        out.push_str(&format!(",theta_tilde_{i}"));
    }
    out.push_str(",tau,dist_to_attractor");
    if cert.is_some() {
        out.push_str(",V");
    }
    out.push('\n');
    for p in arc.points() {
        out.push_str(&format!("{:.16e},{}", p.t, p.j));
        for v in p.eps.iter().chain(p.theta_tilde.iter()) {
            out.push_str(&format!(",{v:.16e}"));
        }
        out.push_str(&format!(",{:.16e},{:.16e}", p.tau, p.distance_to_attractor()));
        if let Some(cert) = cert {
            let state = HybridState::new(
                p.eps.clone(),
                p.theta_tilde.clone(),
                p.tau.clamp(0.0, arc.timing.t2()),
                &arc.timing,
            )?;
            out.push_str(&format!(",{:.16e}", lyapunov::evaluate_V(cert, &state)?));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Renders the jump-event table as comma-separated text: one row per jump
/// with the pre- and post-jump ε and θ̃ components. Floating-point values
/// carry 17 significant digits.
pub fn export_jumps_csv(arc: &HybridArc) -> Result<String> {
    let nz = arc.initial_point().eps.len();
    let ny = arc.initial_point().theta_tilde.len();
    let mut out = String::new();
    out.push_str("t,j_pre,j_post");
    for prefix in ["pre", "post"] {
        for i in 1..=nz {
            out.push_str(&format!(",{prefix}_eps_{i}"));
        }
        for i in 1..=ny {
            out.push_str(&format!(",{prefix}_theta_tilde_{i}"));
        }
    }
    out.push_str(",tau_post\n");
    for jump in &arc.jumps {
        out.push_str(&format!("{:.16e},{},{}", jump.t, jump.j, jump.j + 1));
        for v in jump.pre.eps.iter().chain(jump.pre.theta_tilde.iter()) {
            out.push_str(&format!(",{v:.16e}"));
        }
        for v in jump.post.eps.iter().chain(jump.post.theta_tilde.iter()) {
            out.push_str(&format!(",{v:.16e}"));
        }
        out.push_str(&format!(",{:.16e}\n", jump.post.tau));
    }
    Ok(out)
}
