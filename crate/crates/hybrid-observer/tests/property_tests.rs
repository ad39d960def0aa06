//! Property tests for structural invariants: the jump reset, sampling gap
//! bounds, scalarization round-trips, the Lyapunov sector sandwich, the
//! clock parameter's range, vertex convexity, and grid-invariance of the
//! exact simulation.

use hybrid_observer::lmi::{descalarize, scalarize, svec, unsvec, LmiProblem};
use hybrid_observer::lyapunov::{
    assemble_M, evaluate_V, sector_bounds, vertex_mus, LyapunovCertificate,
};
use hybrid_observer::model::{
    build_error_dynamics, HybridState, ObserverGains, PlantModel, TimingBounds,
};
use hybrid_observer::simulator::{
    generate_sampling, simulate_with_options, InitialCondition, SamplingPolicy, SimulateOptions,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Strategy for a vector of `n` finite values in [−3, 3].
fn entries(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, n)
}

/// Builds an n×n positive-definite matrix RᵀR + 0.1·I from raw entries.
fn pd_from(raw: &[f64], n: usize) -> DMatrix<f64> {
    let r = DMatrix::from_column_slice(n, n, raw);
    r.transpose() * r + DMatrix::identity(n, n) * 0.1
}

fn lambda_max(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

proptest! {
    /// The jump map always factors as ε⁺ = (I−FC)ε, θ̃⁺ = 0: its top-left
    /// block is I−FC, and every other block is identically zero.
    #[test]
    fn jump_map_always_resets_the_predictor_error(
        a_raw in entries(9),
        c_raw in entries(3),
        l_raw in entries(3),
        h in -3.0..3.0f64,
        f_raw in entries(3),
    ) {
        let plant = PlantModel::new(
            DMatrix::from_column_slice(3, 3, &a_raw),
            DMatrix::from_column_slice(1, 3, &c_raw),
        ).unwrap();
        let gains = ObserverGains::new(
            &plant,
            DMatrix::from_column_slice(3, 1, &l_raw),
            DMatrix::from_element(1, 1, h),
            DMatrix::from_column_slice(3, 1, &f_raw),
        ).unwrap();
        let dyn_ = build_error_dynamics(&plant, &gains).unwrap();

        let ifc = DMatrix::identity(3, 3) - gains.f() * plant.c();
        prop_assert!((dyn_.gmat.view((0, 0), (3, 3)) - ifc).norm() <= 1e-13 * (1.0 + gains.f().norm() * plant.c().norm()));
        prop_assert_eq!(dyn_.gmat.view((0, 3), (3, 1)).norm(), 0.0);
        prop_assert_eq!(dyn_.gmat.view((3, 0), (1, 4)).norm(), 0.0);
    }

    /// Generated sampling sequences always respect the gap bounds and
    /// cover the horizon.
    #[test]
    fn random_sampling_respects_gap_bounds(seed in any::<u64>()) {
        let timing = TimingBounds::new(0.4, 0.9).unwrap();
        let seq = generate_sampling(&SamplingPolicy::UniformRandom { seed }, &timing, 8.0).unwrap();
        let times = seq.times();
        prop_assert!(times[0] >= 0.0 && times[0] <= 0.9);
        for w in times.windows(2) {
            let gap = w[1] - w[0];
            prop_assert!((0.4..=0.9).contains(&gap), "gap {} outside bounds", gap);
        }
        prop_assert!(*times.last().unwrap() >= 8.0);
    }

    /// svec/unsvec is an exact round-trip and preserves the Frobenius norm.
    #[test]
    fn svec_round_trips_and_is_isometric(raw in entries(16)) {
        let r = DMatrix::from_column_slice(4, 4, &raw);
        let m = (&r + r.transpose()) * 0.5;
        let v = svec(&m);
        prop_assert_eq!(v.len(), 10);
        let back = unsvec(&v, 4);
        prop_assert!((&back - &m).norm() <= 1e-14 * (1.0 + m.norm()));
        let vnorm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((vnorm - m.norm()).abs() <= 1e-12 * (1.0 + m.norm()));
    }

    /// Scalarization round-trips every variable kind.
    #[test]
    fn scalarize_round_trips(p_raw in entries(9), y_raw in entries(6), g in -5.0..5.0f64) {
        let mut problem = LmiProblem::new();
        problem.add_symmetric("P", 3).unwrap();
        problem.add_full("Y", 3, 2).unwrap();
        problem.add_scalar("g").unwrap();

        let r = DMatrix::from_column_slice(3, 3, &p_raw);
        let mut asg = problem.zero_assignment();
        asg.insert("P".into(), (&r + r.transpose()) * 0.5);
        asg.insert("Y".into(), DMatrix::from_column_slice(3, 2, &y_raw));
        asg.insert("g".into(), DMatrix::from_element(1, 1, g));

        let x = scalarize(&problem, &asg).unwrap();
        prop_assert_eq!(x.len(), 6 + 6 + 1);
        let back = descalarize(&problem, &x).unwrap();
        for name in ["P", "Y", "g"] {
            prop_assert!((&back[name] - &asg[name]).norm() <= 1e-13 * (1.0 + asg[name].norm()));
        }
    }

    /// The sector sandwich α1|ε|² + ω1|θ̃|² ≤ V ≤ α2|ε|² + ω2|θ̃|² holds at
    /// every admissible timer value.
    #[test]
    fn lyapunov_value_stays_inside_the_sector(
        p1_raw in entries(4),
        p2_raw in entries(1),
        eps_raw in entries(2),
        tt in -3.0..3.0f64,
        tau_frac in 0.0..1.0f64,
        delta in 0.05..1.5f64,
        eta in 0.001..0.5f64,
    ) {
        let timing = TimingBounds::new(0.3, 0.9).unwrap();
        let cert = LyapunovCertificate::new(
            pd_from(&p1_raw, 2),
            pd_from(&p2_raw, 1),
            delta,
            eta,
        ).unwrap();
        let x = HybridState::new(
            DVector::from_column_slice(&eps_raw),
            DVector::from_element(1, tt),
            tau_frac * 0.9,
            &timing,
        ).unwrap();

        let v = evaluate_V(&cert, &x).unwrap();
        let s = sector_bounds(&cert, &timing);
        let eps_sq = x.eps.norm_squared();
        let tt_sq = x.theta_tilde.norm_squared();
        let slack = 1e-9 * (1.0 + v.abs());
        prop_assert!(s.alpha1 * eps_sq + s.omega1 * tt_sq <= v + slack);
        prop_assert!(v <= s.alpha2 * eps_sq + s.omega2 * tt_sq + slack);
    }

    /// μ(τ) = (1+η)e^{δτ} − 1 stays inside [μ1, μ2] for τ ∈ [0, T2].
    #[test]
    fn clock_parameter_stays_inside_its_vertices(
        tau_frac in 0.0..1.0f64,
        delta in 0.01..2.0f64,
        eta in 1e-6..1.0f64,
    ) {
        let timing = TimingBounds::new(0.3, 0.9).unwrap();
        let cert = LyapunovCertificate::new(
            DMatrix::identity(1, 1),
            DMatrix::identity(1, 1),
            delta,
            eta,
        ).unwrap();
        let (mu1, mu2) = vertex_mus(&cert, &timing);
        prop_assert!(mu1 <= mu2);
        let mu = (1.0 + eta) * (delta * tau_frac * 0.9).exp() - 1.0;
        prop_assert!(mu >= mu1 - 1e-12 && mu <= mu2 + 1e-12, "mu {} outside [{}, {}]", mu, mu1, mu2);
    }

    /// M(μ) is affine in μ, so λmax over the μ segment is attained at a
    /// vertex: every interior μ(τ) satisfies
    /// λmax(M(μ)) ≤ max(λmax(M(μ1)), λmax(M(μ2))) + slack.
    #[test]
    fn interior_flow_matrices_are_dominated_by_the_vertices(
        a_raw in entries(4),
        c_raw in entries(2),
        l_raw in entries(2),
        h in -2.0..2.0f64,
        p1_raw in entries(4),
        p2_raw in entries(1),
        tau_frac in 0.0..1.0f64,
    ) {
        let plant = PlantModel::new(
            DMatrix::from_column_slice(2, 2, &a_raw),
            DMatrix::from_column_slice(1, 2, &c_raw),
        ).unwrap();
        let gains = ObserverGains::new(
            &plant,
            DMatrix::from_column_slice(2, 1, &l_raw),
            DMatrix::from_element(1, 1, h),
            DMatrix::zeros(2, 1),
        ).unwrap();
        let timing = TimingBounds::new(0.3, 0.9).unwrap();
        let cert = LyapunovCertificate::new(
            pd_from(&p1_raw, 2),
            pd_from(&p2_raw, 1),
            0.4,
            0.05,
        ).unwrap();

        let (mu1, mu2) = vertex_mus(&cert, &timing);
        let mu = (1.0 + 0.05) * (0.4 * tau_frac * 0.9).exp() - 1.0;
        let vmax = lambda_max(&assemble_M(&plant, &gains, &cert, mu1).unwrap())
            .max(lambda_max(&assemble_M(&plant, &gains, &cert, mu2).unwrap()));
        let interior = lambda_max(&assemble_M(&plant, &gains, &cert, mu).unwrap());
        prop_assert!(interior <= vmax + 1e-9 * (1.0 + vmax.abs()),
            "interior {} exceeds vertex max {}", interior, vmax);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Recorded states never depend on the dense-output resolution.
    #[test]
    fn simulation_is_grid_invariant(
        seed in any::<u64>(),
        ppi in 2usize..40,
        eps_raw in entries(2),
        tt in -2.0..2.0f64,
    ) {
        let plant = PlantModel::new(
            DMatrix::from_row_slice(2, 2, &[-0.5, 1.0, -1.0, -0.2]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.5]),
        ).unwrap();
        let gains = ObserverGains::new(
            &plant,
            DMatrix::from_row_slice(2, 1, &[0.3, -0.1]),
            DMatrix::from_element(1, 1, -0.7),
            DMatrix::from_row_slice(2, 1, &[0.4, 0.2]),
        ).unwrap();
        let timing = TimingBounds::new(0.3, 0.7).unwrap();
        let sampling = generate_sampling(
            &SamplingPolicy::UniformRandom { seed },
            &timing,
            3.0,
        ).unwrap();
        let init = InitialCondition::ErrorCoords {
            eps0: DVector::from_column_slice(&eps_raw),
            theta_tilde0: DVector::from_element(1, tt),
            tau0: sampling.times()[0],
        };

        let a = simulate_with_options(&plant, &gains, &init, &sampling, 3.0,
            &SimulateOptions { points_per_interval: ppi }).unwrap();
        let b = simulate_with_options(&plant, &gains, &init, &sampling, 3.0,
            &SimulateOptions { points_per_interval: 200 }).unwrap();

        prop_assert_eq!(a.final_point().eps.clone(), b.final_point().eps.clone());
        prop_assert_eq!(a.final_point().theta_tilde.clone(), b.final_point().theta_tilde.clone());
        prop_assert_eq!(a.jumps.len(), b.jumps.len());
        for (ja, jb) in a.jumps.iter().zip(&b.jumps) {
            prop_assert_eq!(ja.pre.eps.clone(), jb.pre.eps.clone());
            prop_assert_eq!(ja.post.eps.clone(), jb.post.eps.clone());
            // The predictor error is exactly zero after every jump.
            prop_assert_eq!(ja.post.theta_tilde.norm(), 0.0);
        }
    }
}
