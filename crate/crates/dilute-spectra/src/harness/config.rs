//! Experiment configuration: JSON schema, validation, and cell expansion.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{EntryDistribution, ModelParams};
use crate::rng::{mix, stream};
use crate::spectral::DENSE_GUARD;

/// What a run verifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Sample,
    Spectrum,
    Ladder,
    TailS1,
    TailSn,
    Concentration,
    VerifyAll,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Sample => "sample",
            Mode::Spectrum => "spectrum",
            Mode::Ladder => "ladder",
            Mode::TailS1 => "tail-s1",
            Mode::TailSn => "tail-sn",
            Mode::Concentration => "concentration",
            Mode::VerifyAll => "verify-all",
        }
    }
}

/// Entry-law spec as written in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistSpec {
    Gaussian {
        #[serde(default)]
        delta: f64,
    },
    Rademacher {
        #[serde(default)]
        delta: f64,
    },
    SymmetricPareto {
        tail_exponent: f64,
        #[serde(default)]
        delta: f64,
    },
    TwoPoint {
        prob: f64,
        #[serde(default)]
        delta: f64,
    },
}

impl DistSpec {
    pub fn build(&self) -> Result<EntryDistribution> {
        match *self {
            DistSpec::Gaussian { delta } => EntryDistribution::gaussian(delta),
            DistSpec::Rademacher { delta } => EntryDistribution::rademacher(delta),
            DistSpec::SymmetricPareto { tail_exponent, delta } => {
                EntryDistribution::symmetric_pareto(tail_exponent, delta)
            }
            DistSpec::TwoPoint { prob, delta } => EntryDistribution::two_point(prob, delta),
        }
    }

    pub fn delta(&self) -> f64 {
        match *self {
            DistSpec::Gaussian { delta }
            | DistSpec::Rademacher { delta }
            | DistSpec::SymmetricPareto { delta, .. }
            | DistSpec::TwoPoint { delta, .. } => delta,
        }
    }
}

fn default_y() -> f64 {
    0.5
}

fn default_trunc_a() -> f64 {
    1.0
}

fn default_dist() -> DistSpec {
    DistSpec::Gaussian { delta: 4.0 }
}

/// Ensemble parameters as configured (per-cell N and p may come from the
/// sweep instead).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub n_rows: Option<usize>,
    #[serde(default = "default_y")]
    pub y: f64,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default = "default_dist")]
    pub dist: DistSpec,
    #[serde(default = "default_trunc_a")]
    pub trunc_a: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self { n_rows: None, y: default_y(), p: None, dist: default_dist(), trunc_a: default_trunc_a() }
    }
}

/// p-schedule across the N-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PSchedule {
    FixedP { p: f64 },
    /// p = B (ln N)^alpha / N, clamped to (0, 1] with a warning.
    NpLogPower { b: f64, alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub grid: Vec<usize>,
    pub p_rule: PSchedule,
}

fn default_k() -> f64 {
    10.0
}
fn default_tau() -> f64 {
    0.05
}
fn default_rho() -> f64 {
    0.3
}
fn default_delta0() -> f64 {
    0.1
}
fn default_epsilon() -> f64 {
    0.5
}

/// Event thresholds and geometry parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default = "default_k")]
    pub k: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_delta0")]
    pub delta0: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            k: default_k(),
            tau: default_tau(),
            rho: default_rho(),
            delta0: default_delta0(),
            epsilon: default_epsilon(),
        }
    }
}

fn default_trials() -> usize {
    200
}

/// One verification campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub mode: Mode,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub thresholds: Thresholds,
    pub output_path: String,
}

/// One expanded grid cell with its derived seed lineage.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSpec {
    pub index: usize,
    pub n_rows: usize,
    pub n_cols: usize,
    pub p: f64,
    /// mix(master_seed, mix(CELL, index)); trials derive from this.
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Stable hash of the canonical (struct-ordered) serialization.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let hash = Sha256::digest(canonical.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Default N-grid when neither a sweep nor an explicit N is given:
    /// dense-oracle feasible sizes with meaningful intervals.
    fn default_grid(&self) -> Vec<usize> {
        match self.mode {
            // the dense oracle guard excludes 4096 x 2048
            Mode::TailSn => vec![512, 1024, 2048],
            _ => vec![512, 1024, 2048, 4096],
        }
    }

    fn default_p_rule(&self) -> PSchedule {
        match self.mode {
            Mode::TailS1 => {
                // Np >= B log^{3/(2 kappa)} N
                let delta = self.model.dist.delta();
                let alpha = if delta > 0.0 {
                    let kappa = delta / (2.0 * (4.0 + delta));
                    3.0 / (2.0 * kappa)
                } else {
                    6.0
                };
                PSchedule::NpLogPower { b: 25.0, alpha }
            }
            Mode::TailSn | Mode::Ladder => PSchedule::NpLogPower { b: 25.0, alpha: 2.0 },
            _ => PSchedule::FixedP { p: self.model.p.unwrap_or(0.1) },
        }
    }

    /// Expand grid cells, clamping the p-schedule into (0, 1] with warnings.
    pub fn cells(&self) -> Result<(Vec<CellSpec>, Vec<String>)> {
        let mut warnings = Vec::new();
        let (grid, rule) = match &self.sweep {
            Some(sweep) => {
                if sweep.grid.is_empty() {
                    return Err(Error::InvalidParameter {
                        field: "sweep.grid",
                        message: "grid must be nonempty".into(),
                    });
                }
                if sweep.grid.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidParameter {
                        field: "sweep.grid",
                        message: "grid must be strictly increasing".into(),
                    });
                }
                (sweep.grid.clone(), sweep.p_rule.clone())
            }
            None => match self.model.n_rows {
                Some(n) => (
                    vec![n],
                    PSchedule::FixedP {
                        p: self.model.p.ok_or(Error::InvalidParameter {
                            field: "model.p",
                            message: "p required when a single N is given without a sweep".into(),
                        })?,
                    },
                ),
                None => (self.default_grid(), self.default_p_rule()),
            },
        };

        if !(self.model.y > 0.0 && self.model.y < 1.0) {
            return Err(Error::InvalidParameter {
                field: "model.y",
                message: format!("need y in (0,1), got {}", self.model.y),
            });
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter {
                field: "trials",
                message: "need at least one trial".into(),
            });
        }

        let mut cells = Vec::with_capacity(grid.len());
        for (index, &n_rows) in grid.iter().enumerate() {
            let n_cols = ((n_rows as f64 * self.model.y).floor() as usize)
                .clamp(1, n_rows.saturating_sub(1));
            let p = match &rule {
                PSchedule::FixedP { p } => {
                    if !(*p > 0.0 && *p <= 1.0) {
                        return Err(Error::InvalidParameter {
                            field: "p",
                            message: format!("need p in (0,1] in every cell, got {p}"),
                        });
                    }
                    *p
                }
                PSchedule::NpLogPower { b, alpha } => {
                    let raw = b * (n_rows as f64).ln().powf(*alpha) / n_rows as f64;
                    if raw > 1.0 {
                        warnings.push(format!(
                            "cell {index} (N = {n_rows}): schedule p = {raw:.4} clamped to 1"
                        ));
                        1.0
                    } else if raw <= 0.0 {
                        return Err(Error::InvalidParameter {
                            field: "sweep.p_rule",
                            message: format!("schedule yields p = {raw} at N = {n_rows}"),
                        });
                    } else {
                        raw
                    }
                }
            };
            if self.mode == Mode::TailSn && n_rows * n_cols > DENSE_GUARD {
                return Err(Error::SizeGuard { rows: n_rows, cols: n_cols, limit: DENSE_GUARD });
            }
            cells.push(CellSpec {
                index,
                n_rows,
                n_cols,
                p,
                seed: mix(self.master_seed, mix(stream::CELL, index as u64)),
            });
        }
        Ok((cells, warnings))
    }

    /// Materialize the ensemble parameters for one cell.
    pub fn cell_params(&self, cell: &CellSpec) -> Result<ModelParams> {
        ModelParams::new(
            cell.n_rows,
            cell.n_cols,
            cell.p,
            self.model.dist.build()?,
            self.model.trunc_a,
        )
    }
}
