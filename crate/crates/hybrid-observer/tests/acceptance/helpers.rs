//! Shared fixtures for the acceptance gate: the benchmark plant, the
//! built-in reference design cases and gain sets, the benchmark
//! simulation scenario, deterministic random plant generation, and the
//! randomized design sweep shared between criteria.

use std::sync::OnceLock;

use hybrid_observer::model::{ObserverGains, PlantModel, TimingBounds};
use hybrid_observer::simulator::{
    generate_sampling, InitialCondition, SamplingPolicy, SamplingSequence,
};
use hybrid_observer::synthesis::{design_optimal, DesignOutcome, DesignResult, DesignWeights};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tolerances;

/// Decay rate used throughout the benchmark runs.
pub const BENCH_DELTA: f64 = 0.03;

/// Timer offset used throughout the benchmark runs.
pub const BENCH_ETA: f64 = 1e-4;

/// Horizon of the benchmark simulation scenario.
pub const BENCH_HORIZON: f64 = 15.0;

/// The lightly unstable oscillator benchmark and its sampling bounds.
pub fn benchmark() -> (PlantModel, TimingBounds) {
    let plant = PlantModel::new(
        DMatrix::from_row_slice(2, 2, &[0.2, -1.01, 1.0, 0.0]),
        DMatrix::from_row_slice(1, 2, &[0.5, -1.0]),
    )
    .expect("benchmark plant is well formed");
    let timing = TimingBounds::new(0.5, 1.1).expect("benchmark timing is well formed");
    (plant, timing)
}

/// One reference design case: its trade-off weights and the recorded
/// outputs the design is expected to reproduce.
pub struct ReferenceDesign {
    pub alpha1: f64,
    pub alpha2: f64,
    pub trace_p1: f64,
    pub l: [f64; 2],
    pub f: [f64; 2],
    pub h: f64,
}

/// Looks up a reference design case by its roman-numeral label.
pub fn design_case(label: &str) -> ReferenceDesign {
    match label {
        "i" => ReferenceDesign {
            alpha1: 0.0,
            alpha2: 0.0,
            trace_p1: 353.8,
            l: [10877.0, -98807.0],
            f: [0.104, -0.948],
            h: -104_250.0,
        },
        "ii" => ReferenceDesign {
            alpha1: 100.0,
            alpha2: 0.1,
            trace_p1: 354.7,
            l: [3.68, -24.47],
            f: [0.104, -0.948],
            h: -25.93,
        },
        "iii" => ReferenceDesign {
            alpha1: 100.0,
            alpha2: 1.0,
            trace_p1: 357.1,
            l: [3.68, -24.47],
            f: [0.040, -0.364],
            h: -11.47,
        },
        other => panic!("unknown reference design case {other:?}"),
    }
}

/// Reference gain sets for the simulation comparisons: the fully bounded
/// design's gains ("iii") plus the two jump-only variants ("iv", "v").
pub fn reference_gains(label: &str, plant: &PlantModel) -> ObserverGains {
    let (l, h, f): ([f64; 2], f64, [f64; 2]) = match label {
        "iii" => ([3.68, -24.47], -11.47, [0.040, -0.364]),
        "iv" => ([0.0, 0.0], 0.0, [0.097, -0.905]),
        "v" => ([0.0, 0.0], 0.0, [0.183, -0.333]),
        other => panic!("unknown reference gain set {other:?}"),
    };
    ObserverGains::new(
        plant,
        DMatrix::from_column_slice(2, 1, &l),
        DMatrix::from_element(1, 1, h),
        DMatrix::from_column_slice(2, 1, &f),
    )
    .expect("reference gains are well formed")
}

/// The benchmark simulation scenario: sinusoidally modulated sampling
/// gaps over 15 s, started from a timer that fires immediately, with the
/// plant at [10, 0], the observer at rest, and a held output of 5.
pub fn benchmark_scenario(timing: &TimingBounds) -> (SamplingSequence, InitialCondition) {
    let sampling = generate_sampling(&SamplingPolicy::Sinusoidal, timing, BENCH_HORIZON)
        .expect("sinusoidal sampling covers the benchmark horizon");
    let init = InitialCondition::PlantObserver {
        z0: DVector::from_column_slice(&[10.0, 0.0]),
        z_hat0: DVector::zeros(2),
        theta0: DVector::from_element(1, 5.0),
        tau0: 0.0,
    };
    (sampling, init)
}

/// Draws an observable plant with 2–4 states and 1–2 outputs. Entries
/// are uniform in [-1, 1] with the state matrix shifted by -1.2·I so
/// that randomized designs mostly succeed; non-observable draws are
/// rejected and retried.
pub fn random_observable_plant(rng: &mut ChaCha8Rng) -> PlantModel {
    loop {
        let nz = rng.gen_range(2..=4usize);
        let ny = rng.gen_range(1..=2usize.min(nz));
        let mut a = DMatrix::from_fn(nz, nz, |_, _| rng.gen_range(-1.0..1.0));
        a -= DMatrix::<f64>::identity(nz, nz) * 1.2;
        let c = DMatrix::from_fn(ny, nz, |_, _| rng.gen_range(-1.0..1.0));
        if is_observable(&a, &c) {
            return PlantModel::new(a, c).expect("generated plant is well formed");
        }
    }
}

/// Rank test on the stacked observability matrix [C; CA; …; CA^(n-1)].
fn is_observable(a: &DMatrix<f64>, c: &DMatrix<f64>) -> bool {
    let nz = a.nrows();
    let ny = c.nrows();
    let mut stacked = DMatrix::<f64>::zeros(ny * nz, nz);
    let mut block = c.clone();
    for k in 0..nz {
        stacked.view_mut((k * ny, 0), (ny, nz)).copy_from(&block);
        block = &block * a;
    }
    let eps = 1e-8 * (1.0 + stacked.norm());
    stacked.rank(eps) == nz
}

/// Sampling bounds used for the randomized design sweep.
pub fn sweep_timing() -> TimingBounds {
    TimingBounds::new(0.1, 0.3).expect("sweep timing is well formed")
}

/// Decay rate used for the randomized design sweep.
pub const SWEEP_DELTA: f64 = 0.05;

/// Timer offset used for the randomized design sweep.
pub const SWEEP_ETA: f64 = 1e-3;

/// One successful randomized design, kept for the soundness and
/// convexity criteria.
pub struct SweptDesign {
    pub index: usize,
    pub plant: PlantModel,
    pub timing: TimingBounds,
    pub result: DesignResult,
}

static SWEEP: OnceLock<Vec<SweptDesign>> = OnceLock::new();

/// Runs the unconstrained design on `SOUNDNESS_PLANTS` deterministically
/// generated observable plants and keeps the successes. Built once and
/// shared between the criteria that consume it.
pub fn swept_designs() -> &'static [SweptDesign] {
    SWEEP.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0xACCE97);
        let timing = sweep_timing();
        let mut kept = Vec::new();
        for index in 0..tolerances::SOUNDNESS_PLANTS {
            let plant = random_observable_plant(&mut rng);
            let weights = DesignWeights::with_default_costs(plant.nz(), 0.0, 0.0)
                .expect("default weights are well formed");
            match design_optimal(&plant, &timing, &weights, SWEEP_DELTA, SWEEP_ETA) {
                Ok(DesignOutcome::Optimal(result)) => kept.push(SweptDesign {
                    index,
                    plant,
                    timing: timing.clone(),
                    result: *result,
                }),
                Ok(DesignOutcome::Infeasible { .. }) | Err(_) => {}
            }
        }
        kept
    })
}
