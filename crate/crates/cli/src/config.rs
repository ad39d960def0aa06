//! Configuration and gains files: hand-editable TOML documents with
//! matrices as nested row-major arrays. Unknown fields are rejected, and
//! every matrix is dimension-checked against the plant before use.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use hybrid_observer::model::{ObserverGains, PlantModel, TimingBounds};
use hybrid_observer::simulator::{InitialCondition, SamplingPolicy, SimulateOptions};
use hybrid_observer::synthesis::DesignWeights;

use crate::error::CliError;

/// Top-level problem description.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// Plant matrices.
    pub plant: PlantSection,
    /// Inter-sample timing bounds.
    pub timing: TimingSection,
    /// Design weights and tuning parameters (needed by `design` and, for
    /// the grid, `verify`).
    pub design: Option<DesignSection>,
    /// Simulation scenario (needed by `simulate`).
    pub simulation: Option<SimulationSection>,
}

/// `[plant]`: continuous-time dynamics and sampled output map.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    /// State matrix A, row-major.
    pub a: Vec<Vec<f64>>,
    /// Output matrix C, row-major.
    pub c: Vec<Vec<f64>>,
}

/// `[timing]`: bounds on inter-sample gaps.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TimingSection {
    /// Minimum gap T1 > 0.
    pub t1: f64,
    /// Maximum gap T2 ≥ T1.
    pub t2: f64,
}

/// `[design]`: cost weights, gain trade-offs, and the (δ, η) point or
/// grids.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    /// Flow cost weight Q_F (default: identity).
    pub q_f: Option<Vec<Vec<f64>>>,
    /// Jump cost weight Q_J (default: 0.01·identity).
    pub q_j: Option<Vec<Vec<f64>>>,
    /// Flow-gain trade-off α1 (default 0).
    #[serde(default)]
    pub alpha1: f64,
    /// Jump-gain trade-off α2 (default 0).
    #[serde(default)]
    pub alpha2: f64,
    /// Clock decay rate δ for a single-point run.
    pub delta: Option<f64>,
    /// Offset η for a single-point run.
    pub eta: Option<f64>,
    /// Explicit δ grid (switches to grid mode).
    pub delta_grid: Option<Vec<f64>>,
    /// Explicit η grid (switches to grid mode).
    pub eta_grid: Option<Vec<f64>>,
}

/// `[simulation]`: scenario description.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    /// Simulation horizon in seconds.
    pub horizon: f64,
    /// Sampling policy: one of `periodic`, `uniform-random`,
    /// `sinusoidal`, `explicit`.
    pub policy: String,
    /// Period for the periodic policy.
    pub period: Option<f64>,
    /// Seed for the uniform-random policy.
    pub seed: Option<u64>,
    /// Instants for the explicit policy.
    pub times: Option<Vec<f64>>,
    /// Dense-output points per flow interval (default 200).
    pub points_per_interval: Option<usize>,
    /// Initial condition.
    pub initial: InitialSection,
}

/// `[simulation.initial]`: initial condition in either representation.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// `plant-observer` or `error-coords`.
    pub kind: String,
    /// Initial timer value; must equal the first sampling instant, and
    /// defaults to it when omitted (useful for randomized policies whose
    /// first instant is not known in advance).
    pub tau0: Option<f64>,
    /// Plant state z(0,0) (plant-observer only).
    pub z0: Option<Vec<f64>>,
    /// Observer state ẑ(0,0) (plant-observer only).
    pub z_hat0: Option<Vec<f64>>,
    /// Predictor θ(0,0) (plant-observer only).
    pub theta0: Option<Vec<f64>>,
    /// Estimation error ε(0,0) (error-coords only).
    pub eps0: Option<Vec<f64>>,
    /// Predictor error θ̃(0,0) (error-coords only).
    pub theta_tilde0: Option<Vec<f64>>,
}

/// A gains file: the three observer gains plus, optionally, the
/// certificate that produced or validates them.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GainsFile {
    /// Gain matrices.
    pub gains: GainsSection,
    /// Optional stability certificate.
    pub certificate: Option<CertificateSection>,
}

/// `[gains]`: observer gain matrices, row-major.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    /// Flow injection gain L (n_z × n_y).
    pub l: Vec<Vec<f64>>,
    /// Predictor gain H (n_y × n_y).
    pub h: Vec<Vec<f64>>,
    /// Jump correction gain F (n_z × n_y).
    pub f: Vec<Vec<f64>>,
}

/// `[certificate]`: clock-dependent Lyapunov certificate data.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CertificateSection {
    /// Clock decay rate δ.
    pub delta: f64,
    /// Offset η.
    pub eta: f64,
    /// ε-block weight P1, row-major.
    pub p1: Vec<Vec<f64>>,
    /// θ̃-block weight P2, row-major.
    pub p2: Vec<Vec<f64>>,
}

/// Reads and parses a TOML file into `T`, surfacing the parser's message
/// (which names the offending field and location).
fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Parse {
        path: path.display().to_string(),
        reason: e.to_string().trim_end().replace('\n', " "),
    })
}

/// Converts nested row-major arrays to a matrix, enforcing a rectangular,
/// non-empty shape.
pub fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(CliError::Config(format!("matrix {name} must be non-empty")));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::Config(format!("matrix {name} has ragged rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn vector_from(name: &str, v: &[f64], expected: usize) -> Result<DVector<f64>, CliError> {
    if v.len() != expected {
        return Err(CliError::Config(format!(
            "vector {name} must have {expected} entries, got {}",
            v.len()
        )));
    }
    Ok(DVector::from_column_slice(v))
}

impl ProblemConfig {
    /// Loads a config file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        load_toml(path)
    }

    /// The validated plant.
    pub fn plant(&self) -> Result<PlantModel, CliError> {
        let a = matrix_from_rows("plant.a", &self.plant.a)?;
        let c = matrix_from_rows("plant.c", &self.plant.c)?;
        PlantModel::new(a, c).map_err(CliError::from_lib)
    }

    /// The validated timing bounds.
    pub fn timing(&self) -> Result<TimingBounds, CliError> {
        TimingBounds::new(self.timing.t1, self.timing.t2).map_err(CliError::from_lib)
    }

    /// The design section, or a usage error naming it.
    pub fn design(&self) -> Result<&DesignSection, CliError> {
        self.design
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a [design] section".into()))
    }

    /// The simulation section, or a usage error naming it.
    pub fn simulation(&self) -> Result<&SimulationSection, CliError> {
        self.simulation
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a [simulation] section".into()))
    }

    /// Design weights with defaults filled in (Q_F = I, Q_J = 0.01·I),
    /// dimension-checked against the plant. Without a `[design]` section
    /// the defaults with α1 = α2 = 0 are returned.
    pub fn weights(&self, plant: &PlantModel) -> Result<DesignWeights, CliError> {
        let nz = plant.nz();
        let Some(design) = self.design.as_ref() else {
            return DesignWeights::with_default_costs(nz, 0.0, 0.0).map_err(CliError::from_lib);
        };
        let qf = match &design.q_f {
            Some(rows) => matrix_from_rows("design.q_f", rows)?,
            None => DMatrix::identity(nz, nz),
        };
        let qj = match &design.q_j {
            Some(rows) => matrix_from_rows("design.q_j", rows)?,
            None => DMatrix::identity(nz, nz) * 0.01,
        };
        DesignWeights::new(qf, qj, design.alpha1, design.alpha2).map_err(CliError::from_lib)
    }
}

impl SimulationSection {
    /// The sampling policy, with an optional seed override from the
    /// command line.
    pub fn policy(&self, seed_override: Option<u64>) -> Result<SamplingPolicy, CliError> {
        match self.policy.as_str() {
            "periodic" => {
                let period = self.period.ok_or_else(|| {
                    CliError::Config("policy 'periodic' needs simulation.period".into())
                })?;
                Ok(SamplingPolicy::Periodic { period })
            }
            "uniform-random" => {
                let seed = seed_override.or(self.seed).ok_or_else(|| {
                    CliError::Config(
                        "policy 'uniform-random' needs simulation.seed (or --seed)".into(),
                    )
                })?;
                Ok(SamplingPolicy::UniformRandom { seed })
            }
            "sinusoidal" => Ok(SamplingPolicy::Sinusoidal),
            "explicit" => {
                let times = self.times.clone().ok_or_else(|| {
                    CliError::Config("policy 'explicit' needs simulation.times".into())
                })?;
                Ok(SamplingPolicy::Explicit { times })
            }
            other => Err(CliError::Config(format!(
                "unknown sampling policy '{other}' (expected periodic, uniform-random, \
                 sinusoidal, or explicit)"
            ))),
        }
    }

    /// The initial condition, dimension-checked against the plant. The
    /// timer starts at `default_tau0` (the first sampling instant) when
    /// the config does not pin it.
    pub fn initial(
        &self,
        plant: &PlantModel,
        default_tau0: f64,
    ) -> Result<InitialCondition, CliError> {
        let (nz, ny) = (plant.nz(), plant.ny());
        let init = &self.initial;
        let tau0 = init.tau0.unwrap_or(default_tau0);
        let forbid = |field: &str, present: bool| -> Result<(), CliError> {
            if present {
                Err(CliError::Config(format!(
                    "initial kind '{}' does not take field {field}",
                    init.kind
                )))
            } else {
                Ok(())
            }
        };
        match init.kind.as_str() {
            "plant-observer" => {
                forbid("eps0", init.eps0.is_some())?;
                forbid("theta_tilde0", init.theta_tilde0.is_some())?;
                let z0 = init.z0.as_ref().ok_or_else(|| {
                    CliError::Config("initial kind 'plant-observer' needs z0".into())
                })?;
                let z_hat0 = init.z_hat0.as_ref().ok_or_else(|| {
                    CliError::Config("initial kind 'plant-observer' needs z_hat0".into())
                })?;
                let theta0 = init.theta0.as_ref().ok_or_else(|| {
                    CliError::Config("initial kind 'plant-observer' needs theta0".into())
                })?;
                Ok(InitialCondition::PlantObserver {
                    z0: vector_from("initial.z0", z0, nz)?,
                    z_hat0: vector_from("initial.z_hat0", z_hat0, nz)?,
                    theta0: vector_from("initial.theta0", theta0, ny)?,
                    tau0,
                })
            }
            "error-coords" => {
                forbid("z0", init.z0.is_some())?;
                forbid("z_hat0", init.z_hat0.is_some())?;
                forbid("theta0", init.theta0.is_some())?;
                let eps0 = init.eps0.as_ref().ok_or_else(|| {
                    CliError::Config("initial kind 'error-coords' needs eps0".into())
                })?;
                let theta_tilde0 = init.theta_tilde0.as_ref().ok_or_else(|| {
                    CliError::Config("initial kind 'error-coords' needs theta_tilde0".into())
                })?;
                Ok(InitialCondition::ErrorCoords {
                    eps0: vector_from("initial.eps0", eps0, nz)?,
                    theta_tilde0: vector_from("initial.theta_tilde0", theta_tilde0, ny)?,
                    tau0,
                })
            }
            other => Err(CliError::Config(format!(
                "unknown initial kind '{other}' (expected plant-observer or error-coords)"
            ))),
        }
    }

    /// Simulation options (dense-output density).
    pub fn simulate_options(&self) -> SimulateOptions {
        let mut options = SimulateOptions::default();
        if let Some(n) = self.points_per_interval {
            options.points_per_interval = n;
        }
        options
    }
}

impl GainsFile {
    /// Loads a gains file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        load_toml(path)
    }

    /// The validated gains for `plant`.
    pub fn to_gains(&self, plant: &PlantModel) -> Result<ObserverGains, CliError> {
        let l = matrix_from_rows("gains.l", &self.gains.l)?;
        let h = matrix_from_rows("gains.h", &self.gains.h)?;
        let f = matrix_from_rows("gains.f", &self.gains.f)?;
        ObserverGains::new(plant, l, h, f).map_err(CliError::from_lib)
    }

    /// The embedded certificate, when present and valid.
    pub fn to_certificate(
        &self,
    ) -> Result<Option<hybrid_observer::lyapunov::LyapunovCertificate>, CliError> {
        let Some(cert) = self.certificate.as_ref() else {
            return Ok(None);
        };
        let p1 = matrix_from_rows("certificate.p1", &cert.p1)?;
        let p2 = matrix_from_rows("certificate.p2", &cert.p2)?;
        hybrid_observer::lyapunov::LyapunovCertificate::new(p1, p2, cert.delta, cert.eta)
            .map(Some)
            .map_err(CliError::from_lib)
    }
}
