//! The `design`, `verify`, and `simulate` commands: thin orchestration
//! over the library, writing structured-text reports and data files.

use std::path::{Path, PathBuf};

use hybrid_observer::lmi::SolveOptions;
use hybrid_observer::lyapunov::{self, CertificateReport, LyapunovCertificate, VerifyOutcome};
use hybrid_observer::model::HybridState;
use hybrid_observer::simulator::{
    self, CostEvaluation, GesEnvelope, HybridArc, MonotonicityReport,
};
use hybrid_observer::synthesis::{self, DesignOutcome, DesignResult, GridStatus};
use hybrid_observer::Error as LibError;

use crate::config::{GainsFile, ProblemConfig};
use crate::error::CliError;
use crate::report::{self, TomlWriter};

/// Flags shared by every verb (each verb uses the subset it needs).
#[derive(Debug, clap::Args)]
pub struct CommonArgs {
    /// Problem configuration file (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Gains file (TOML).
    #[arg(long, value_name = "PATH")]
    pub gains: Option<PathBuf>,

    /// Output directory for reports and data files (default: current
    /// directory).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Seed override for randomized sampling policies.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,

    /// Clock decay rate δ override (single-point runs).
    #[arg(long, value_name = "X")]
    pub delta: Option<f64>,

    /// Offset η override (single-point runs).
    #[arg(long, value_name = "X")]
    pub eta: Option<f64>,

    /// Scan a (δ, η) grid instead of a single point.
    #[arg(long)]
    pub grid: bool,

    /// Interior-point solver tolerance.
    #[arg(long, value_name = "X")]
    pub tolerance: Option<f64>,
}

impl CommonArgs {
    fn config_path(&self) -> Result<&Path, CliError> {
        self.config
            .as_deref()
            .ok_or_else(|| CliError::Usage("this command needs --config PATH".into()))
    }

    fn gains_path(&self) -> Result<&Path, CliError> {
        self.gains
            .as_deref()
            .ok_or_else(|| CliError::Usage("this command needs --gains PATH".into()))
    }

    /// Solver options with the optional tolerance override applied.
    pub fn solve_options(&self) -> SolveOptions {
        let mut options = SolveOptions::default();
        if let Some(tol) = self.tolerance {
            options.tolerance = tol;
        }
        options
    }

    /// The output directory, created if needed.
    pub fn out_dir(&self) -> Result<PathBuf, CliError> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(dir)
    }
}

/// Writes `content` to `dir/name`.
pub fn write_file(dir: &Path, name: &str, content: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| CliError::io(&path, e))
}

/// Grid values for one axis: a command-line point override wins, then an
/// explicit config grid, then the default grid.
fn grid_values(
    override_point: Option<f64>,
    config_grid: &Option<Vec<f64>>,
    default: fn() -> Vec<f64>,
) -> Vec<f64> {
    if let Some(v) = override_point {
        vec![v]
    } else if let Some(g) = config_grid {
        g.clone()
    } else {
        default()
    }
}

fn grid_status_label(status: GridStatus) -> &'static str {
    match status {
        GridStatus::Optimal => "optimal",
        GridStatus::Infeasible => "infeasible",
        GridStatus::NumericalFailure => "numerical-failure",
    }
}

/// Emits the `[margins]` table of a certificate report.
pub fn emit_margins(w: &mut TomlWriter, report: &CertificateReport) {
    w.table("margins");
    w.float("flow_vertex_eig_1", report.flow_vertex_eigs[0]);
    w.float("flow_vertex_eig_2", report.flow_vertex_eigs[1]);
    w.float("jump_eig", report.jump_eig);
    w.float("varpi_d", report.varpi_d);
    w.float("chi_d", -0.5 * (1.0 - report.varpi_d).ln());
    w.bool("feasible", report.feasible);
    w.float("sector_alpha1", report.sector.alpha1);
    w.float("sector_alpha2", report.sector.alpha2);
    w.float("sector_omega1", report.sector.omega1);
    w.float("sector_omega2", report.sector.omega2);
}

/// Emits the `[solver]` table with the effective settings.
fn emit_solver_settings(w: &mut TomlWriter, options: &SolveOptions, diagnostics: Option<&str>) {
    w.table("solver");
    w.float("tolerance", options.tolerance);
    w.float("strict_margin_coeff", options.strict_margin_coeff);
    w.int("max_iterations", options.max_iterations as i64);
    if let Some(d) = diagnostics {
        w.str("diagnostics", d);
    }
}

/// Emits the result blocks of a successful design (objective, gains,
/// certificate, margins).
fn emit_design_result(w: &mut TomlWriter, result: &DesignResult) {
    w.table("objective");
    w.float("value", result.objective);
    w.float("trace_p1", result.certificate.p1().trace());
    if let Some(g) = result.raw.gamma1 {
        w.float("gamma1", g);
    }
    if let Some(g) = result.raw.gamma2 {
        w.float("gamma2", g);
    }
    w.table("gains");
    w.matrix("l", result.gains.l());
    w.matrix("h", result.gains.h());
    w.matrix("f", result.gains.f());
    report::emit_certificate(w, &result.certificate, "certificate");
    emit_margins(w, &result.report);
}

/// `design`: solve the guaranteed-cost LMIs (single point or grid), write
/// `report.toml`, `gains.toml`, and `config_echo.toml`.
pub fn cmd_design(args: &CommonArgs) -> Result<(), CliError> {
    let config = ProblemConfig::load(args.config_path()?)?;
    let plant = config.plant()?;
    let timing = config.timing()?;
    let design = config.design()?.clone();
    let weights = config.weights(&plant)?;
    let options = args.solve_options();
    let dir = args.out_dir()?;

    let grid_mode = args.grid || design.delta_grid.is_some() || design.eta_grid.is_some();

    let mut w = TomlWriter::new();
    report::emit_tool_header(&mut w);

    if grid_mode {
        let delta_grid =
            grid_values(args.delta, &design.delta_grid, synthesis::default_delta_grid);
        let eta_grid = grid_values(args.eta, &design.eta_grid, synthesis::default_eta_grid);
        let outcome = synthesis::grid_search_with_options(
            &plant, &timing, &weights, &delta_grid, &eta_grid, &options,
        )
        .map_err(CliError::from_lib)?;

        w.table("outcome");
        w.str("command", "design");
        w.str("mode", "grid");
        let status = if outcome.best.is_some() { "optimal" } else { "infeasible" };
        w.str("status", status);
        w.int("exit_code", if outcome.best.is_some() { 0 } else { 2 });
        report::emit_config(&mut w, &config, "config.");
        emit_solver_settings(&mut w, &options, None);
        if let Some(best) = &outcome.best {
            w.table("grid");
            w.float("best_delta", best.certificate.delta());
            w.float("best_eta", best.certificate.eta());
            emit_design_result(&mut w, best);
            write_file(
                &dir,
                "gains.toml",
                &report::render_gains_file(&best.gains, Some(&best.certificate)),
            )?;
        }
        for row in &outcome.rows {
            w.array_table("grid.rows");
            w.float("delta", row.delta);
            w.float("eta", row.eta);
            w.str("status", grid_status_label(row.status));
            if let Some(obj) = row.objective {
                w.float("objective", obj);
            }
        }
        write_file(&dir, "report.toml", &w.finish())?;
        write_echo(&dir, &config)?;
        match outcome.best {
            Some(_) => Ok(()),
            None => Err(CliError::Infeasible(
                "no grid point produced a feasible design; see report.toml for the table".into(),
            )),
        }
    } else {
        let delta = args.delta.or(design.delta).ok_or_else(|| {
            CliError::Config("design needs design.delta (or --delta), or grid mode".into())
        })?;
        let eta = args.eta.or(design.eta).ok_or_else(|| {
            CliError::Config("design needs design.eta (or --eta), or grid mode".into())
        })?;

        let solve =
            synthesis::design_optimal_with_options(&plant, &timing, &weights, delta, eta, &options);
        w.table("outcome");
        w.str("command", "design");
        w.str("mode", "single");
        match solve {
            Ok(DesignOutcome::Optimal(result)) => {
                w.str("status", "optimal");
                w.int("exit_code", 0);
                w.float("delta", delta);
                w.float("eta", eta);
                report::emit_config(&mut w, &config, "config.");
                emit_solver_settings(&mut w, &options, None);
                emit_design_result(&mut w, &result);
                write_file(
                    &dir,
                    "gains.toml",
                    &report::render_gains_file(&result.gains, Some(&result.certificate)),
                )?;
                write_file(&dir, "report.toml", &w.finish())?;
                write_echo(&dir, &config)?;
                Ok(())
            }
            Ok(DesignOutcome::Infeasible { diagnostics }) => {
                w.str("status", "infeasible");
                w.int("exit_code", 2);
                w.float("delta", delta);
                w.float("eta", eta);
                report::emit_config(&mut w, &config, "config.");
                emit_solver_settings(&mut w, &options, Some(&diagnostics));
                write_file(&dir, "report.toml", &w.finish())?;
                write_echo(&dir, &config)?;
                Err(CliError::Infeasible(format!(
                    "design LMIs infeasible at delta = {delta}, eta = {eta}"
                )))
            }
            Err(e) => {
                let cli = CliError::from_lib(e);
                w.str("status", "numerical-failure");
                w.int("exit_code", i64::from(cli.exit_code()));
                w.float("delta", delta);
                w.float("eta", eta);
                w.str("message", &cli.to_string());
                report::emit_config(&mut w, &config, "config.");
                emit_solver_settings(&mut w, &options, None);
                write_file(&dir, "report.toml", &w.finish())?;
                write_echo(&dir, &config)?;
                Err(cli)
            }
        }
    }
}

fn write_echo(dir: &Path, config: &ProblemConfig) -> Result<(), CliError> {
    let mut w = TomlWriter::new();
    report::emit_config(&mut w, config, "");
    write_file(dir, "config_echo.toml", &w.finish())
}

/// Per-point outcome of a verification scan.
struct VerifyRow {
    delta: f64,
    eta: f64,
    status: &'static str,
    margin: Option<f64>,
}

/// `verify`: search for a stability certificate at fixed gains across a
/// (δ, η) point or grid; report the best-margin certificate found.
pub fn cmd_verify(args: &CommonArgs) -> Result<(), CliError> {
    let config = ProblemConfig::load(args.config_path()?)?;
    let plant = config.plant()?;
    let timing = config.timing()?;
    let gains_file = GainsFile::load(args.gains_path()?)?;
    let gains = gains_file.to_gains(&plant)?;
    let options = args.solve_options();
    let dir = args.out_dir()?;

    let design = config.design.clone();
    let scalar_delta = args.delta.or(design.as_ref().and_then(|d| d.delta));
    let scalar_eta = args.eta.or(design.as_ref().and_then(|d| d.eta));
    let has_config_grid = design
        .as_ref()
        .map(|d| d.delta_grid.is_some() || d.eta_grid.is_some())
        .unwrap_or(false);
    let single_point = !args.grid && !has_config_grid && scalar_delta.is_some() && scalar_eta.is_some();

    let (delta_values, eta_values) = if single_point {
        (
            vec![scalar_delta.expect("checked above")],
            vec![scalar_eta.expect("checked above")],
        )
    } else {
        (
            grid_values(
                args.delta,
                &design.as_ref().and_then(|d| d.delta_grid.clone()),
                synthesis::default_delta_grid,
            ),
            grid_values(
                args.eta,
                &design.as_ref().and_then(|d| d.eta_grid.clone()),
                synthesis::default_eta_grid,
            ),
        )
    };

    let mut rows: Vec<VerifyRow> = Vec::new();
    let mut best: Option<(f64, f64, f64, Box<(LyapunovCertificate, CertificateReport)>)> = None;
    for &delta in &delta_values {
        for &eta in &eta_values {
            match lyapunov::verify_gains_with_options(&plant, &gains, &timing, delta, eta, &options)
            {
                Ok(VerifyOutcome::Feasible(found)) => {
                    let report = &found.1;
                    let margin = -report.flow_vertex_eigs[0]
                        .max(report.flow_vertex_eigs[1])
                        .max(report.jump_eig);
                    rows.push(VerifyRow { delta, eta, status: "feasible", margin: Some(margin) });
                    let better = match &best {
                        None => true,
                        Some((b_margin, b_delta, b_eta, _)) => {
                            margin > *b_margin
                                || (margin == *b_margin && (delta, eta) < (*b_delta, *b_eta))
                        }
                    };
                    if better {
                        best = Some((margin, delta, eta, found));
                    }
                }
                Ok(VerifyOutcome::Infeasible { .. }) => {
                    rows.push(VerifyRow { delta, eta, status: "infeasible", margin: None });
                }
                Err(LibError::NumericalFailure { .. }) => {
                    rows.push(VerifyRow { delta, eta, status: "numerical-failure", margin: None });
                }
                Err(other) => return Err(CliError::from_lib(other)),
            }
        }
    }

    let mut w = TomlWriter::new();
    report::emit_tool_header(&mut w);
    w.table("outcome");
    w.str("command", "verify");
    let status = if best.is_some() {
        "feasible"
    } else if rows.iter().all(|r| r.status == "infeasible") {
        "infeasible"
    } else {
        "numerical-failure"
    };
    w.str("status", status);
    w.int(
        "exit_code",
        match status {
            "feasible" => 0,
            "infeasible" => 2,
            _ => 3,
        },
    );
    report::emit_config(&mut w, &config, "config.");
    w.table("gains");
    w.matrix("l", gains.l());
    w.matrix("h", gains.h());
    w.matrix("f", gains.f());
    emit_solver_settings(&mut w, &options, None);
    if let Some((margin, delta, eta, found)) = &best {
        let (cert, cert_report) = found.as_ref();
        w.table("best");
        w.float("delta", *delta);
        w.float("eta", *eta);
        w.float("margin", *margin);
        report::emit_certificate(&mut w, cert, "certificate");
        emit_margins(&mut w, cert_report);
        write_file(
            &dir,
            "gains_certified.toml",
            &report::render_gains_file(&gains, Some(cert)),
        )?;
    }
    for row in &rows {
        w.array_table("verification.rows");
        w.float("delta", row.delta);
        w.float("eta", row.eta);
        w.str("status", row.status);
        if let Some(m) = row.margin {
            w.float("margin", m);
        }
    }
    write_file(&dir, "report.toml", &w.finish())?;
    write_echo(&dir, &config)?;

    match status {
        "feasible" => Ok(()),
        "infeasible" => Err(CliError::Infeasible(
            "no (delta, eta) point yielded a certificate for these gains".into(),
        )),
        _ => Err(CliError::Numerical(
            "certificate search broke down at one or more grid points; see report.toml".into(),
        )),
    }
}

/// Summary blocks shared by `simulate` and the benchmark driver.
pub struct SimulationSummary {
    /// Fitted decay envelope, when the initial distance is nonzero.
    pub envelope: Option<GesEnvelope>,
    /// Evaluated cost.
    pub cost: CostEvaluation,
    /// Monotonicity report, when a certificate was supplied.
    pub monotonicity: Option<MonotonicityReport>,
    /// V(ξ0), when a certificate was supplied.
    pub v_initial: Option<f64>,
    /// ε0ᵀP1ε0 (the cost bound for zero initial predictor error).
    pub p1_quadratic: Option<f64>,
}

/// Runs the post-simulation diagnostics shared by `simulate` and
/// `reproduce`.
pub fn summarize_arc(
    arc: &HybridArc,
    weights: &hybrid_observer::synthesis::DesignWeights,
    cert: Option<&LyapunovCertificate>,
) -> Result<SimulationSummary, CliError> {
    let cost = simulator::evaluate_cost(arc, weights).map_err(CliError::from_lib)?;
    let envelope = match simulator::fit_ges_envelope(arc) {
        Ok(env) => Some(env),
        Err(LibError::EnvelopeUndefined { .. }) => None,
        Err(e) => return Err(CliError::from_lib(e)),
    };
    let (monotonicity, v_initial, p1_quadratic) = match cert {
        Some(cert) => {
            let mono =
                simulator::check_lyapunov_monotonicity(arc, cert).map_err(CliError::from_lib)?;
            let p0 = arc.initial_point();
            let state0 = HybridState::new(
                p0.eps.clone(),
                p0.theta_tilde.clone(),
                p0.tau.clamp(0.0, arc.timing().t2()),
                &arc.timing(),
            )
            .map_err(CliError::from_lib)?;
            let v0 = lyapunov::evaluate_V(cert, &state0).map_err(CliError::from_lib)?;
            let quad = (p0.eps.transpose() * cert.p1() * &p0.eps)[(0, 0)];
            (Some(mono), Some(v0), Some(quad))
        }
        None => (None, None, None),
    };
    Ok(SimulationSummary { envelope, cost, monotonicity, v_initial, p1_quadratic })
}

/// Emits the summary blocks under `prefix` (e.g. `""` or `"cases.iii."`).
pub fn emit_summary(w: &mut TomlWriter, prefix: &str, summary: &SimulationSummary) {
    w.table(&format!("{prefix}envelope"));
    match &summary.envelope {
        Some(env) => {
            w.bool("defined", true);
            w.float("k", env.k);
            w.float("lambda", env.lambda);
            w.bool("decaying", env.decaying);
        }
        None => {
            w.bool("defined", false);
            w.str("reason", "zero initial distance to the attractor");
        }
    }

    w.table(&format!("{prefix}cost"));
    w.float("flow_cost", summary.cost.flow_cost);
    w.float("jump_cost", summary.cost.jump_cost);
    w.float("total", summary.cost.total);
    w.float("quadrature_error_estimate", summary.cost.quadrature_error_estimate);
    if let (Some(v0), Some(quad)) = (summary.v_initial, summary.p1_quadratic) {
        w.float("bound_v_initial", v0);
        w.float("bound_p1_quadratic", quad);
        w.bool("within_v_bound", summary.cost.total <= v0);
        w.bool("within_p1_bound", summary.cost.total <= quad);
    }

    if let Some(mono) = &summary.monotonicity {
        w.table(&format!("{prefix}lyapunov"));
        w.bool("flow_monotone", mono.flow_monotone);
        w.bool("jumps_monotone", mono.jumps_monotone);
        w.int("violations", mono.violations.len() as i64);
        w.float("relative_slack", 1e-9);
        w.float("chi_c_hat", mono.chi_c_hat);
        w.float("chi_d_hat", mono.chi_d_hat);
        w.float("v_initial", mono.v_initial);
        w.float("v_final", mono.v_final);
    }
}

/// `simulate`: generate the sampling sequence, simulate the hybrid
/// system over the horizon, export the arc and a summary report.
pub fn cmd_simulate(args: &CommonArgs) -> Result<(), CliError> {
    let config = ProblemConfig::load(args.config_path()?)?;
    let plant = config.plant()?;
    let timing = config.timing()?;
    let simulation = config.simulation()?.clone();
    let gains_file = GainsFile::load(args.gains_path()?)?;
    let gains = gains_file.to_gains(&plant)?;
    let cert = gains_file.to_certificate()?;
    let weights = config.weights(&plant)?;
    let dir = args.out_dir()?;

    let policy = simulation.policy(args.seed)?;
    let sequence = simulator::generate_sampling(&policy, &timing, simulation.horizon)
        .map_err(CliError::from_lib)?;
    let init = simulation.initial(&plant, sequence.times()[0])?;
    let arc = simulator::simulate_with_options(
        &plant,
        &gains,
        &init,
        &sequence,
        simulation.horizon,
        &simulation.simulate_options(),
    )
    .map_err(CliError::from_lib)?;
    let summary = summarize_arc(&arc, &weights, cert.as_ref())?;

    let points_csv =
        simulator::export_points_csv(&arc, cert.as_ref()).map_err(CliError::from_lib)?;
    let jumps_csv = simulator::export_jumps_csv(&arc).map_err(CliError::from_lib)?;
    write_file(&dir, "arc_points.csv", &points_csv)?;
    write_file(&dir, "arc_jumps.csv", &jumps_csv)?;

    let mut w = TomlWriter::new();
    report::emit_tool_header(&mut w);
    w.table("outcome");
    w.str("command", "simulate");
    w.str("status", "ok");
    w.int("exit_code", 0);
    report::emit_config(&mut w, &config, "config.");
    w.table("gains");
    w.matrix("l", gains.l());
    w.matrix("h", gains.h());
    w.matrix("f", gains.f());
    if let Some(cert) = &cert {
        report::emit_certificate(&mut w, cert, "certificate");
    }
    w.table("sampling");
    w.int("num_samples", sequence.times().len() as i64);
    w.float("first", sequence.times()[0]);
    w.float("last", *sequence.times().last().expect("non-empty"));
    w.table("domain");
    w.int("num_jumps", arc.jumps.len() as i64);
    w.float("final_time", arc.final_point().t);
    w.int("final_jump_count", arc.final_point().j as i64);
    emit_summary(&mut w, "", &summary);
    write_file(&dir, "report.toml", &w.finish())?;
    write_echo(&dir, &config)?;
    Ok(())
}
