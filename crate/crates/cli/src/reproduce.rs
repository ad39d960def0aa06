//! The `reproduce` command: runs the built-in second-order benchmark end
//! to end — three guaranteed-cost designs with increasing gain penalties,
//! certificate searches for the published gain sets, and simulations
//! under the sinusoidal sampling policy — then prints pass/fail lines
//! against the expected values and tolerances.
//!
//! The benchmark data is fixed in code so the command needs no input:
//! an oscillator-like second-order plant with one sampled output,
//! gaps in [0.5, 1.1], design parameters δ = 0.03, η = 1e−4, cost
//! weights Q_F = I, Q_J = 0.01·I, and the initial condition
//! z(0,0) = [10, 0]ᵀ, ẑ(0,0) = 0, θ(0,0) = 5, τ(0,0) = 0. Everything is
//! deterministic, so repeated runs produce byte-identical files.

use nalgebra::{DMatrix, DVector};

use hybrid_observer::lyapunov::{self, LyapunovCertificate, VerifyOutcome};
use hybrid_observer::model::{ObserverGains, PlantModel, TimingBounds};
use hybrid_observer::simulator::{self, HybridArc, InitialCondition, SamplingPolicy};
use hybrid_observer::synthesis::{self, DesignOutcome, DesignResult, DesignWeights};

use crate::commands::{emit_summary, summarize_arc, write_file, CommonArgs};
use crate::config::{
    InitialSection, PlantSection, ProblemConfig, SimulationSection, TimingSection,
};
use crate::error::CliError;
use crate::report::{self, TomlWriter};

/// Relative tolerance on the reproduced trace(P1).
const TRACE_REL_TOL: f64 = 0.01;
/// Relative tolerance on reproduced gain entries.
const GAIN_REL_TOL: f64 = 0.05;
/// Magnitude floor for the unconstrained case's gains.
const GAIN_MAGNITUDE_FLOOR: f64 = 1e3;
/// Design parameters of the benchmark.
const DELTA: f64 = 0.03;
const ETA: f64 = 1e-4;
/// Simulation horizon in seconds.
const HORIZON: f64 = 15.0;

fn benchmark_plant() -> (PlantModel, TimingBounds) {
    let a = DMatrix::from_row_slice(2, 2, &[0.2, -1.01, 1.0, 0.0]);
    let c = DMatrix::from_row_slice(1, 2, &[0.5, -1.0]);
    (
        PlantModel::new(a, c).expect("benchmark plant is valid"),
        TimingBounds::new(0.5, 1.1).expect("benchmark timing is valid"),
    )
}

/// Reference values for one design case.
struct DesignCase {
    name: &'static str,
    alpha1: f64,
    alpha2: f64,
    trace: f64,
    l: [f64; 2],
    f: [f64; 2],
    h: f64,
    /// Check gains only for magnitude ≥ 1e3 (the unconstrained design's
    /// exact values are solver-sensitive).
    magnitude_only: bool,
}

const DESIGN_CASES: [DesignCase; 3] = [
    DesignCase {
        name: "i",
        alpha1: 0.0,
        alpha2: 0.0,
        trace: 353.8,
        l: [10877.0, -98807.0],
        f: [0.104, -0.948],
        h: -104250.0,
        magnitude_only: true,
    },
    DesignCase {
        name: "ii",
        alpha1: 100.0,
        alpha2: 0.1,
        trace: 354.7,
        l: [3.68, -24.47],
        f: [0.104, -0.948],
        h: -25.93,
        magnitude_only: false,
    },
    DesignCase {
        name: "iii",
        alpha1: 100.0,
        alpha2: 1.0,
        trace: 357.1,
        l: [3.68, -24.47],
        f: [0.040, -0.364],
        h: -11.47,
        magnitude_only: false,
    },
];

/// Published gain sets exercised by verification and simulation.
struct GainCase {
    name: &'static str,
    l: [f64; 2],
    f: [f64; 2],
    h: f64,
}

const GAIN_CASES: [GainCase; 3] = [
    GainCase { name: "iii", l: [3.68, -24.47], f: [0.040, -0.364], h: -11.47 },
    GainCase { name: "iv", l: [0.0, 0.0], f: [0.097, -0.905], h: 0.0 },
    GainCase { name: "v", l: [0.0, 0.0], f: [0.183, -0.333], h: 0.0 },
];

fn gains_from(case: &GainCase, plant: &PlantModel) -> ObserverGains {
    ObserverGains::new(
        plant,
        DMatrix::from_column_slice(2, 1, &case.l),
        DMatrix::from_element(1, 1, case.h),
        DMatrix::from_column_slice(2, 1, &case.f),
    )
    .expect("benchmark gains are valid")
}

/// One pass/fail check, printed and recorded in the report.
struct Check {
    name: String,
    pass: bool,
    detail: String,
}

/// One pipeline stage and how it ended.
struct Stage {
    name: String,
    error: Option<CliError>,
}

fn rel_err(achieved: f64, reference: f64) -> f64 {
    (achieved - reference).abs() / reference.abs().max(f64::MIN_POSITIVE)
}

/// The benchmark's config document, also written out so any stage can be
/// re-run by hand through the ordinary verbs.
fn builtin_config() -> ProblemConfig {
    ProblemConfig {
        plant: PlantSection {
            a: vec![vec![0.2, -1.01], vec![1.0, 0.0]],
            c: vec![vec![0.5, -1.0]],
        },
        timing: TimingSection { t1: 0.5, t2: 1.1 },
        design: Some(crate::config::DesignSection {
            q_f: None,
            q_j: None,
            alpha1: 100.0,
            alpha2: 1.0,
            delta: Some(DELTA),
            eta: Some(ETA),
            delta_grid: None,
            eta_grid: None,
        }),
        simulation: Some(SimulationSection {
            horizon: HORIZON,
            policy: "sinusoidal".into(),
            period: None,
            seed: None,
            times: None,
            points_per_interval: None,
            initial: InitialSection {
                kind: "plant-observer".into(),
                tau0: Some(0.0),
                z0: Some(vec![10.0, 0.0]),
                z_hat0: Some(vec![0.0, 0.0]),
                theta0: Some(vec![5.0]),
                eps0: None,
                theta_tilde0: None,
            },
        }),
    }
}

/// `reproduce`: run the full benchmark, write the side-by-side table and
/// trajectory files, print pass/fail lines, and exit nonzero naming the
/// first failed stage.
pub fn cmd_reproduce(args: &CommonArgs) -> Result<(), CliError> {
    let dir = args.out_dir()?;
    let options = args.solve_options();
    let (plant, timing) = benchmark_plant();

    let mut stages: Vec<Stage> = Vec::new();
    let mut checks: Vec<Check> = Vec::new();
    let mut w = TomlWriter::new();
    report::emit_tool_header(&mut w);
    w.table("outcome");
    w.str("command", "reproduce");
    w.table("tolerances");
    w.float("trace_rel_tol", TRACE_REL_TOL);
    w.float("gain_rel_tol", GAIN_REL_TOL);
    w.float("gain_magnitude_floor", GAIN_MAGNITUDE_FLOOR);
    w.table("parameters");
    w.float("delta", DELTA);
    w.float("eta", ETA);
    w.float("horizon", HORIZON);

    // Stage 1: the three designs, compared against the expected table.
    let mut design_results: Vec<Option<Box<DesignResult>>> = Vec::new();
    for case in &DESIGN_CASES {
        let stage_name = format!("design case {}", case.name);
        let weights = DesignWeights::with_default_costs(plant.nz(), case.alpha1, case.alpha2)
            .expect("benchmark weights are valid");
        w.array_table("table.cases");
        w.str("case", case.name);
        w.float("alpha1", case.alpha1);
        w.float("alpha2", case.alpha2);
        w.float("reference_trace", case.trace);
        w.float_list("reference_l", &case.l);
        w.float_list("reference_f", &case.f);
        w.float("reference_h", case.h);
        match synthesis::design_optimal_with_options(&plant, &timing, &weights, DELTA, ETA, &options)
        {
            Ok(DesignOutcome::Optimal(result)) => {
                let trace = result.certificate.p1().trace();
                w.str("status", "optimal");
                w.float("achieved_trace", trace);
                w.matrix("achieved_l", result.gains.l());
                w.matrix("achieved_f", result.gains.f());
                w.matrix("achieved_h", result.gains.h());
                w.float("objective", result.objective);
                let trace_pass = rel_err(trace, case.trace) <= TRACE_REL_TOL;
                checks.push(Check {
                    name: format!("case {} trace", case.name),
                    pass: trace_pass,
                    detail: format!(
                        "achieved {trace:.4}, expected {:.4} within {TRACE_REL_TOL:.0e} relative",
                        case.trace
                    ),
                });
                let gains_pass = if case.magnitude_only {
                    let l = result.gains.l();
                    let h = result.gains.h();
                    l.iter().all(|v| v.abs() >= GAIN_MAGNITUDE_FLOOR)
                        && h.iter().all(|v| v.abs() >= GAIN_MAGNITUDE_FLOOR)
                } else {
                    let l = result.gains.l();
                    let f = result.gains.f();
                    let h = result.gains.h();
                    (0..2).all(|i| rel_err(l[(i, 0)], case.l[i]) <= GAIN_REL_TOL)
                        && (0..2).all(|i| rel_err(f[(i, 0)], case.f[i]) <= GAIN_REL_TOL)
                        && rel_err(h[(0, 0)], case.h) <= GAIN_REL_TOL
                };
                checks.push(Check {
                    name: format!("case {} gains", case.name),
                    pass: gains_pass,
                    detail: if case.magnitude_only {
                        format!("all flow-gain magnitudes ≥ {GAIN_MAGNITUDE_FLOOR:.0e}")
                    } else {
                        format!("elementwise within {GAIN_REL_TOL:.0e} relative")
                    },
                });
                write_file(
                    &dir,
                    &format!("gains_case_{}.toml", case.name),
                    &report::render_gains_file(&result.gains, Some(&result.certificate)),
                )?;
                let stage_error = if trace_pass && gains_pass {
                    None
                } else {
                    Some(CliError::Infeasible(format!(
                        "case {} did not reproduce the expected values",
                        case.name
                    )))
                };
                stages.push(Stage { name: stage_name, error: stage_error });
                design_results.push(Some(result));
            }
            Ok(DesignOutcome::Infeasible { diagnostics }) => {
                w.str("status", "infeasible");
                w.str("diagnostics", &diagnostics);
                checks.push(Check {
                    name: format!("case {} trace", case.name),
                    pass: false,
                    detail: "design LMIs reported infeasible".into(),
                });
                stages.push(Stage {
                    name: stage_name,
                    error: Some(CliError::Infeasible(format!(
                        "design LMIs infeasible at delta = {DELTA}, eta = {ETA}"
                    ))),
                });
                design_results.push(None);
            }
            Err(e) => {
                let cli = CliError::from_lib(e);
                w.str("status", "numerical-failure");
                w.str("message", &cli.to_string());
                checks.push(Check {
                    name: format!("case {} trace", case.name),
                    pass: false,
                    detail: format!("design failed: {cli}"),
                });
                stages.push(Stage { name: stage_name, error: Some(cli) });
                design_results.push(None);
            }
        }
    }

    // Stage 2: certificate searches for the published gain sets at the
    // benchmark (δ, η). Found/not-found is reported without a
    // ground-truth claim; only solver breakdowns fail the stage.
    let mut case_iii_cert: Option<LyapunovCertificate> =
        design_results[2].as_ref().map(|r| r.certificate.clone());
    for case in &GAIN_CASES {
        let stage_name = format!("verify case {}", case.name);
        let gains = gains_from(case, &plant);
        w.array_table("verification.cases");
        w.str("case", case.name);
        w.float("delta", DELTA);
        w.float("eta", ETA);
        match lyapunov::verify_gains_with_options(&plant, &gains, &timing, DELTA, ETA, &options) {
            Ok(VerifyOutcome::Feasible(found)) => {
                let (cert, cert_report) = *found;
                w.str("status", "feasible");
                w.float("flow_vertex_eig_1", cert_report.flow_vertex_eigs[0]);
                w.float("flow_vertex_eig_2", cert_report.flow_vertex_eigs[1]);
                w.float("jump_eig", cert_report.jump_eig);
                if case.name == "iii" && case_iii_cert.is_none() {
                    case_iii_cert = Some(cert);
                }
                stages.push(Stage { name: stage_name, error: None });
            }
            Ok(VerifyOutcome::Infeasible { .. }) => {
                w.str("status", "infeasible");
                stages.push(Stage { name: stage_name, error: None });
            }
            Err(e) => {
                let cli = CliError::from_lib(e);
                w.str("status", "numerical-failure");
                w.str("message", &cli.to_string());
                stages.push(Stage { name: stage_name, error: Some(cli) });
            }
        }
    }

    // Stage 3: simulate the published gain sets under the sinusoidal
    // policy from the benchmark initial condition.
    let policy = SamplingPolicy::Sinusoidal;
    let sequence = simulator::generate_sampling(&policy, &timing, HORIZON)
        .map_err(CliError::from_lib)?;
    let init = InitialCondition::PlantObserver {
        z0: DVector::from_column_slice(&[10.0, 0.0]),
        z_hat0: DVector::zeros(2),
        theta0: DVector::from_element(1, 5.0),
        tau0: 0.0,
    };
    let cost_weights = DesignWeights::with_default_costs(plant.nz(), 0.0, 0.0)
        .expect("benchmark weights are valid");

    let mut arcs: Vec<Option<HybridArc>> = Vec::new();
    let mut lambdas: Vec<Option<f64>> = Vec::new();
    for case in &GAIN_CASES {
        let stage_name = format!("simulate case {}", case.name);
        // Prefer this run's own design gains for case iii when available,
        // falling back to the published values.
        let gains = if case.name == "iii" {
            design_results[2]
                .as_ref()
                .map(|r| r.gains.clone())
                .unwrap_or_else(|| gains_from(case, &plant))
        } else {
            gains_from(case, &plant)
        };
        let cert = if case.name == "iii" { case_iii_cert.as_ref() } else { None };
        match simulator::simulate(&plant, &gains, &init, &sequence, HORIZON) {
            Ok(arc) => {
                let summary = summarize_arc(&arc, &cost_weights, cert)?;
                write_file(
                    &dir,
                    &format!("arc_points_case_{}.csv", case.name),
                    &simulator::export_points_csv(&arc, cert).map_err(CliError::from_lib)?,
                )?;
                write_file(
                    &dir,
                    &format!("arc_jumps_case_{}.csv", case.name),
                    &simulator::export_jumps_csv(&arc).map_err(CliError::from_lib)?,
                )?;
                emit_summary(&mut w, &format!("simulation.case_{}.", case.name), &summary);
                lambdas.push(summary.envelope.as_ref().map(|e| e.lambda));
                if case.name == "iii" {
                    if let Some(mono) = &summary.monotonicity {
                        checks.push(Check {
                            name: "case iii V monotonicity".into(),
                            pass: mono.monotone(),
                            detail: format!(
                                "flow monotone: {}, jumps monotone: {}, violations: {} \
                                 (relative slack 1e-9)",
                                mono.flow_monotone,
                                mono.jumps_monotone,
                                mono.violations.len()
                            ),
                        });
                    } else {
                        checks.push(Check {
                            name: "case iii V monotonicity".into(),
                            pass: false,
                            detail: "no feasible certificate available to evaluate V".into(),
                        });
                    }
                }
                arcs.push(Some(arc));
                stages.push(Stage { name: stage_name, error: None });
            }
            Err(e) => {
                let cli = CliError::from_lib(e);
                w.table(&format!("simulation.case_{}", case.name));
                w.str("status", "failed");
                w.str("message", &cli.to_string());
                arcs.push(None);
                lambdas.push(None);
                stages.push(Stage { name: stage_name, error: Some(cli) });
            }
        }
    }

    // Stage 4: cross-case comparisons.
    w.table("comparisons");
    let lambda_pass = match (lambdas[0], lambdas[2]) {
        (Some(iii), Some(v)) => {
            w.float("lambda_case_iii", iii);
            w.float("lambda_case_v", v);
            iii > 0.0 && v < iii
        }
        _ => false,
    };
    checks.push(Check {
        name: "decay-rate ordering".into(),
        pass: lambda_pass,
        detail: "fitted lambda: case iii > 0 and case v strictly smaller".into(),
    });

    let jump_pass = match (&arcs[0], &arcs[1]) {
        (Some(iii), Some(iv)) => {
            let n = iii.jumps.len().min(iv.jumps.len());
            let mut all_smaller = n > 0;
            let mut max_iii: f64 = 0.0;
            let mut max_iv: f64 = 0.0;
            for k in 0..n {
                let d3 = (iii.jumps[k].post.eps[1] - iii.jumps[k].pre.eps[1]).abs();
                let d4 = (iv.jumps[k].post.eps[1] - iv.jumps[k].pre.eps[1]).abs();
                max_iii = max_iii.max(d3);
                max_iv = max_iv.max(d4);
                if d3 >= d4 {
                    all_smaller = false;
                }
            }
            w.float("max_jump_eps2_case_iii", max_iii);
            w.float("max_jump_eps2_case_iv", max_iv);
            all_smaller
        }
        _ => false,
    };
    checks.push(Check {
        name: "jump-size ordering".into(),
        pass: jump_pass,
        detail: "per matched jump, |Δε2| for case iii strictly below case iv".into(),
    });

    // Emit checks, print pass/fail lines, and settle the exit status.
    for check in &checks {
        w.array_table("checks");
        w.str("name", &check.name);
        w.bool("pass", check.pass);
        w.str("detail", &check.detail);
        println!(
            "[{}] {}: {}",
            if check.pass { "PASS" } else { "FAIL" },
            check.name,
            check.detail
        );
    }
    let failed_stage = stages.iter().find(|s| s.error.is_some());
    w.table("stages");
    w.int("total", stages.len() as i64);
    w.int(
        "failed",
        stages.iter().filter(|s| s.error.is_some()).count() as i64,
    );
    if let Some(stage) = failed_stage {
        w.str("first_failed", &stage.name);
    }
    write_file(&dir, "report.toml", &w.finish())?;
    {
        let mut cw = TomlWriter::new();
        report::emit_config(&mut cw, &builtin_config(), "");
        write_file(&dir, "config_case_iii.toml", &cw.finish())?;
    }

    match stages.into_iter().find(|s| s.error.is_some()) {
        Some(stage) => {
            let error = stage.error.expect("filtered on is_some");
            Err(match error {
                CliError::Infeasible(msg) => {
                    CliError::Infeasible(format!("stage '{}' failed: {msg}", stage.name))
                }
                CliError::Numerical(msg) => {
                    CliError::Numerical(format!("stage '{}' failed: {msg}", stage.name))
                }
                other => other,
            })
        }
        None if checks.iter().any(|c| !c.pass) => Err(CliError::Infeasible(
            "one or more reproduction checks failed; see report.toml".into(),
        )),
        None => Ok(()),
    }
}
