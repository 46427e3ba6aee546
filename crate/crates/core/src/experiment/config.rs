use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datagen::{MixtureSpec, SplitSpec};
use crate::ensemble::{EnsembleConfig, KSchedule, WeightMode};
use crate::error::{Error, Result};
use crate::ingest::CsvSchema;
use crate::kernels::{KernelFamily, KernelSpec};
use crate::regression::{SolverParams, WeakTreatment};

use super::report::ReportFormat;

/// Point count from which a single repetition is run by default.
pub const LARGE_N: usize = 100_000;
pub const DEFAULT_REPETITIONS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Low-rank co-association Laplacian with weak labels.
    WsrLrcm,
    /// Dense kernel Laplacian; weak labels per [`KernelSettings::treat_weak_as`].
    SsrRbfDense,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::WsrLrcm => "wsr_lrcm",
            Method::SsrRbfDense => "ssr_rbf_dense",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wsr_lrcm" => Ok(Method::WsrLrcm),
            "ssr_rbf_dense" => Ok(Method::SsrRbfDense),
            other => Err(Error::Config(format!(
                "unknown method {other:?} (expected wsr_lrcm or ssr_rbf_dense)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic {
        n: usize,
        #[serde(default)]
        mixture: MixtureSpec,
    },
    Csv {
        path: PathBuf,
        schema: CsvSchema,
    },
}

/// Ensemble settings; the clustering seed is derived per repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSettings {
    pub runs: usize,
    pub k_schedule: KSchedule,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub weight_mode: WeightMode,
}

fn default_max_iters() -> usize {
    100
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        Self {
            runs: 10,
            k_schedule: KSchedule::Constant { k: 2 },
            max_iters: default_max_iters(),
            weight_mode: WeightMode::Uniform,
        }
    }
}

impl EnsembleSettings {
    pub fn with_seed(&self, seed: u64) -> EnsembleConfig {
        EnsembleConfig {
            runs: self.runs,
            k_schedule: self.k_schedule,
            max_iters: self.max_iters,
            seed,
            weight_mode: self.weight_mode,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSettings {
    pub family: KernelFamily,
    pub length_scale: f64,
    #[serde(default = "unit")]
    pub variance: f64,
    #[serde(default)]
    pub treat_weak_as: WeakTreatment,
}

fn unit() -> f64 {
    1.0
}

impl KernelSettings {
    pub fn gaussian(length_scale: f64) -> Self {
        Self {
            family: KernelFamily::GaussianRbf,
            length_scale,
            variance: 1.0,
            treat_weak_as: WeakTreatment::Unlabeled,
        }
    }

    pub fn spec(&self) -> KernelSpec {
        KernelSpec {
            family: self.family,
            length_scale: self.length_scale,
            variance: self.variance,
        }
    }
}

impl Default for KernelSettings {
    fn default() -> Self {
        Self::gaussian(6.6)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningGrid {
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
}

fn default_folds() -> usize {
    5
}

impl TuningGrid {
    pub fn new(betas: Vec<f64>, gammas: Vec<f64>) -> Self {
        Self {
            betas,
            gammas,
            cv_folds: default_folds(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.betas.is_empty() || self.gammas.is_empty() {
            return Err(Error::Config("tuning grid needs at least one beta and one gamma".into()));
        }
        if let Some(v) = self.betas.iter().chain(&self.gammas).find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("grid values must be > 0, got {v}")));
        }
        if self.cv_folds < 2 {
            return Err(Error::Config(format!("cv_folds must be >= 2, got {}", self.cv_folds)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: ReportFormat,
}

/// Everything one experiment needs. Read from and echoed as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Defaults to 40, or 1 when `n >= 100000`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<usize>,
    pub method: Method,
    pub data: DataSource,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub ensemble: EnsembleSettings,
    #[serde(default)]
    pub kernel: KernelSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuning: Option<TuningGrid>,
    #[serde(default)]
    pub output: OutputSettings,
}

impl ExperimentConfig {
    /// Example 1a: `d = 8`, `σ_X = 2`, `K = 2` in all 10 runs, `ℓ = 6.6` for
    /// the kernel baseline, `β = γ = 0.001`.
    pub fn example_1a(n: usize, sigma_eps: f64, delta: f64, method: Method) -> Self {
        Self {
            seed: 0,
            repetitions: None,
            method,
            data: DataSource::Synthetic {
                n,
                mixture: MixtureSpec::example_1a(sigma_eps),
            },
            split: SplitSpec::with_delta(delta),
            solver: SolverParams::default(),
            ensemble: EnsembleSettings::default(),
            kernel: KernelSettings::gaussian(6.6),
            tuning: None,
            output: OutputSettings::default(),
        }
    }

    /// Example 1b: `σ_X = 3`, two uniform noise features, `K_l = 2 + l`,
    /// `ℓ = 1.85`.
    pub fn example_1b(n: usize, sigma_eps: f64, delta: f64, method: Method) -> Self {
        Self {
            data: DataSource::Synthetic {
                n,
                mixture: MixtureSpec::example_1b(sigma_eps),
            },
            ensemble: EnsembleSettings {
                k_schedule: KSchedule::Incrementing { base: 2 },
                ..EnsembleSettings::default()
            },
            kernel: KernelSettings::gaussian(1.85),
            ..Self::example_1a(n, sigma_eps, delta, method)
        }
    }

    /// Gas-turbine emissions: 1% labeled and 10% weak of all points,
    /// `K_l = 100 + l`, standardized features.
    pub fn gas_turbine(path: PathBuf, method: Method) -> Self {
        Self {
            data: DataSource::Csv {
                path,
                schema: CsvSchema::gas_turbine(),
            },
            split: SplitSpec {
                labeled_fraction: 0.01,
                weak_fraction: 0.10,
                ..SplitSpec::default()
            },
            ensemble: EnsembleSettings {
                k_schedule: KSchedule::Incrementing { base: 100 },
                ..EnsembleSettings::default()
            },
            kernel: KernelSettings::gaussian(3.0),
            ..Self::example_1a(0, 0.0, 0.1, method)
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Number of repetitions for a dataset of `n` points.
    pub fn resolved_repetitions(&self, n: usize) -> usize {
        self.repetitions
            .unwrap_or(if n >= LARGE_N { 1 } else { DEFAULT_REPETITIONS })
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == Some(0) {
            return Err(Error::Config("repetitions must be >= 1".into()));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config(format!("seed must be <= {}", i64::MAX)));
        }
        if let DataSource::Synthetic { n, mixture } = &self.data {
            mixture.validate()?;
            if *n < 2 {
                return Err(Error::Config(format!("synthetic n must be >= 2, got {n}")));
            }
        }
        self.split.validate()?;
        self.solver.validate()?;
        self.ensemble.with_seed(0).validate()?;
        self.kernel.spec().validate()?;
        if let Some(grid) = &self.tuning {
            grid.validate()?;
        }
        Ok(())
    }
}
