//! Report and gains-file emission: hand-rendered TOML with every
//! floating-point value at 17 significant digits, so repeated runs with
//! identical inputs produce byte-identical files (no timestamps, no
//! locale- or platform-dependent formatting).

use nalgebra::DMatrix;

use hybrid_observer::lyapunov::LyapunovCertificate;
use hybrid_observer::model::ObserverGains;

use crate::config::{DesignSection, ProblemConfig, SimulationSection};

/// Formats a float with 17 significant digits (round-trip safe).
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Incremental TOML document writer.
pub struct TomlWriter {
    out: String,
}

impl Default for TomlWriter {
    fn default() -> Self {
        Self::new()
    }
}

impl TomlWriter {
    /// Starts an empty document.
    pub fn new() -> Self {
        Self { out: String::new() }
    }

    /// The finished document.
    pub fn finish(self) -> String {
        self.out
    }

    /// Opens a `[path]` table.
    pub fn table(&mut self, path: &str) {
        if !self.out.is_empty() {
            self.out.push('\n');
        }
        self.out.push_str(&format!("[{path}]\n"));
    }

    /// Opens a `[[path]]` array-of-tables element.
    pub fn array_table(&mut self, path: &str) {
        if !self.out.is_empty() {
            self.out.push('\n');
        }
        self.out.push_str(&format!("[[{path}]]\n"));
    }

    /// Writes `key = "value"` with escaping.
    pub fn str(&mut self, key: &str, value: &str) {
        let escaped = value
            .replace('\\', "\\\\")
            .replace('"', "\\\"")
            .replace('\n', "\\n")
            .replace('\r', "\\r")
            .replace('\t', "\\t");
        self.out.push_str(&format!("{key} = \"{escaped}\"\n"));
    }

    /// Writes `key = <float>` at 17 significant digits.
    pub fn float(&mut self, key: &str, v: f64) {
        self.out.push_str(&format!("{key} = {}\n", fmt_float(v)));
    }

    /// Writes `key = <integer>`.
    pub fn int(&mut self, key: &str, v: i64) {
        self.out.push_str(&format!("{key} = {v}\n"));
    }

    /// Writes `key = true|false`.
    pub fn bool(&mut self, key: &str, v: bool) {
        self.out.push_str(&format!("{key} = {v}\n"));
    }

    /// Writes `key = [a, b, …]` of floats.
    pub fn float_list(&mut self, key: &str, values: &[f64]) {
        let items: Vec<String> = values.iter().map(|v| fmt_float(*v)).collect();
        self.out.push_str(&format!("{key} = [{}]\n", items.join(", ")));
    }

    /// Writes `key = [[…], …]` as nested row-major arrays.
    pub fn matrix(&mut self, key: &str, m: &DMatrix<f64>) {
        let rows: Vec<String> = (0..m.nrows())
            .map(|i| {
                let cols: Vec<String> = (0..m.ncols()).map(|j| fmt_float(m[(i, j)])).collect();
                format!("[{}]", cols.join(", "))
            })
            .collect();
        self.out.push_str(&format!("{key} = [{}]\n", rows.join(", ")));
    }

    /// Writes nested row-major arrays from raw rows.
    pub fn matrix_rows(&mut self, key: &str, rows: &[Vec<f64>]) {
        let rendered: Vec<String> = rows
            .iter()
            .map(|r| {
                let cols: Vec<String> = r.iter().map(|v| fmt_float(*v)).collect();
                format!("[{}]", cols.join(", "))
            })
            .collect();
        self.out.push_str(&format!("{key} = [{}]\n", rendered.join(", ")));
    }
}

/// Emits the `[tool]` header common to every report.
pub fn emit_tool_header(w: &mut TomlWriter) {
    w.table("tool");
    w.str("name", env!("CARGO_PKG_NAME"));
    w.str("version", env!("CARGO_PKG_VERSION"));
}

/// Emits a config document (the echo). With `prefix = ""` the result is
/// itself a loadable config file; inside a report use `prefix = "config."`.
pub fn emit_config(w: &mut TomlWriter, config: &ProblemConfig, prefix: &str) {
    w.table(&format!("{prefix}plant"));
    w.matrix_rows("a", &config.plant.a);
    w.matrix_rows("c", &config.plant.c);

    w.table(&format!("{prefix}timing"));
    w.float("t1", config.timing.t1);
    w.float("t2", config.timing.t2);

    if let Some(design) = &config.design {
        emit_design_section(w, design, prefix);
    }
    if let Some(simulation) = &config.simulation {
        emit_simulation_section(w, simulation, prefix);
    }
}

fn emit_design_section(w: &mut TomlWriter, design: &DesignSection, prefix: &str) {
    w.table(&format!("{prefix}design"));
    if let Some(qf) = &design.q_f {
        w.matrix_rows("q_f", qf);
    }
    if let Some(qj) = &design.q_j {
        w.matrix_rows("q_j", qj);
    }
    w.float("alpha1", design.alpha1);
    w.float("alpha2", design.alpha2);
    if let Some(v) = design.delta {
        w.float("delta", v);
    }
    if let Some(v) = design.eta {
        w.float("eta", v);
    }
    if let Some(g) = &design.delta_grid {
        w.float_list("delta_grid", g);
    }
    if let Some(g) = &design.eta_grid {
        w.float_list("eta_grid", g);
    }
}

fn emit_simulation_section(w: &mut TomlWriter, simulation: &SimulationSection, prefix: &str) {
    w.table(&format!("{prefix}simulation"));
    w.float("horizon", simulation.horizon);
    w.str("policy", &simulation.policy);
    if let Some(v) = simulation.period {
        w.float("period", v);
    }
    if let Some(v) = simulation.seed {
        w.int("seed", v as i64);
    }
    if let Some(times) = &simulation.times {
        w.float_list("times", times);
    }
    if let Some(n) = simulation.points_per_interval {
        w.int("points_per_interval", n as i64);
    }

    w.table(&format!("{prefix}simulation.initial"));
    let init = &simulation.initial;
    w.str("kind", &init.kind);
    if let Some(v) = init.tau0 {
        w.float("tau0", v);
    }
    if let Some(v) = &init.z0 {
        w.float_list("z0", v);
    }
    if let Some(v) = &init.z_hat0 {
        w.float_list("z_hat0", v);
    }
    if let Some(v) = &init.theta0 {
        w.float_list("theta0", v);
    }
    if let Some(v) = &init.eps0 {
        w.float_list("eps0", v);
    }
    if let Some(v) = &init.theta_tilde0 {
        w.float_list("theta_tilde0", v);
    }
}

/// Renders a standalone gains file (loadable by `--gains`), optionally
/// embedding the certificate that produced the gains.
pub fn render_gains_file(gains: &ObserverGains, cert: Option<&LyapunovCertificate>) -> String {
    let mut w = TomlWriter::new();
    w.table("gains");
    w.matrix("l", gains.l());
    w.matrix("h", gains.h());
    w.matrix("f", gains.f());
    if let Some(cert) = cert {
        emit_certificate(&mut w, cert, "certificate");
    }
    w.finish()
}

/// Emits a `[path]` table with the certificate data.
pub fn emit_certificate(w: &mut TomlWriter, cert: &LyapunovCertificate, path: &str) {
    w.table(path);
    w.float("delta", cert.delta());
    w.float("eta", cert.eta());
    w.matrix("p1", cert.p1());
    w.matrix("p2", cert.p2());
}
