//! Experiment configuration.
//!
//! Configs are JSON objects of the form
//! `{"seed": 7, "output_dir": "out", "experiment": {"kind": "meanfield", ...}}`.
//! Unknown keys are rejected at every level. The config hash is the SHA-256 of
//! the canonical serialization of the `experiment` object, so the seed and the
//! output directory can change without changing the hash.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::meanfield::{Dynamics, FitWindow, Scheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Meanfield(MeanfieldConfig),
    DoubleWellSample(DoubleWellConfig),
    GpUnivariate(GpUnivariateConfig),
    GpMultivariate(GpMultivariateConfig),
    GpNongaussian(GpNonGaussianConfig),
    FiniteVerify(FiniteVerifyConfig),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Meanfield(_) => "meanfield",
            Experiment::DoubleWellSample(_) => "double_well_sample",
            Experiment::GpUnivariate(_) => "gp_univariate",
            Experiment::GpMultivariate(_) => "gp_multivariate",
            Experiment::GpNongaussian(_) => "gp_nongaussian",
            Experiment::FiniteVerify(_) => "finite_verify",
        }
    }

    pub const KINDS: [&'static str; 6] = [
        "meanfield",
        "double_well_sample",
        "gp_univariate",
        "gp_multivariate",
        "gp_nongaussian",
        "finite_verify",
    ];

    /// A runnable config for `kind` with the reference parameter values.
    pub fn template(kind: &str) -> Option<Self> {
        Some(match kind {
            "meanfield" => Experiment::Meanfield(MeanfieldConfig::default()),
            "double_well_sample" => Experiment::DoubleWellSample(DoubleWellConfig::default()),
            "gp_univariate" => Experiment::GpUnivariate(GpUnivariateConfig::default()),
            "gp_multivariate" => Experiment::GpMultivariate(GpMultivariateConfig::default()),
            "gp_nongaussian" => Experiment::GpNongaussian(GpNonGaussianConfig::default()),
            "finite_verify" => Experiment::FiniteVerify(FiniteVerifyConfig::default()),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lower: -2.0,
            upper: 2.0,
            points: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanfieldConfig {
    pub beta: f64,
    /// Standard deviation of the Gaussian proposal kernel.
    pub sigma: f64,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_dynamics")]
    pub dynamics: Dynamics,
    #[serde(default)]
    pub scheme: Scheme,
    /// Write a trajectory row every `stride` steps.
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub fit_window: FitWindow,
}

fn default_dynamics() -> Dynamics {
    Dynamics::Nonlinear
}

fn one() -> usize {
    1
}

impl Default for MeanfieldConfig {
    fn default() -> Self {
        Self {
            beta: 5.0,
            sigma: 0.0125,
            dt: 0.01,
            t_end: 25.0,
            grid: GridSpec::default(),
            dynamics: Dynamics::Nonlinear,
            scheme: Scheme::ForwardEuler,
            stride: 10,
            snapshot_times: vec![0.0, 2.5, 7.5, 22.5],
            fit_window: FitWindow::Tail,
        }
    }
}

/// Starting positions of the walkers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// Every walker at the same point.
    Point { x: Vec<f64> },
    /// Independent uniform draws from an axis-aligned box.
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl InitSpec {
    pub fn dim(&self) -> usize {
        match self {
            InitSpec::Point { x } => x.len(),
            InitSpec::Box { lower, .. } => lower.len(),
        }
    }

    fn validate(&self, field: &str, dim: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::config(field, m));
        match self {
            InitSpec::Point { x } => {
                if x.len() != dim {
                    return bad(&format!("point must have {dim} coordinates"));
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return bad("point must be finite");
                }
            }
            InitSpec::Box { lower, upper } => {
                if lower.len() != dim || upper.len() != dim {
                    return bad(&format!("box bounds must have {dim} coordinates"));
                }
                if lower.iter().zip(upper).any(|(a, b)| !(a.is_finite() && b.is_finite() && a <= b)) {
                    return bad("box needs finite lower <= upper in every coordinate");
                }
            }
        }
        Ok(())
    }
}

/// Common ensemble-run settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub n_walkers: usize,
    /// Number of walker moves (interacting moves for the subset sampler).
    pub steps: usize,
    #[serde(default = "default_window_constant")]
    pub window_constant: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
}

fn default_window_constant() -> f64 {
    crate::diagnostics::DEFAULT_WINDOW_CONSTANT
}

fn default_burn_in() -> f64 {
    crate::diagnostics::DEFAULT_BURN_IN
}

impl RunSpec {
    pub fn new(n_walkers: usize, steps: usize) -> Self {
        Self {
            n_walkers,
            steps,
            window_constant: default_window_constant(),
            burn_in: default_burn_in(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_walkers == 0 {
            return Err(Error::config("run.n_walkers", "must be at least 1"));
        }
        if self.steps == 0 {
            return Err(Error::config("run.steps", "must be at least 1"));
        }
        if !(self.window_constant > 0.0) {
            return Err(Error::config("run.window_constant", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(Error::config("run.burn_in", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoubleWellConfig {
    pub beta: f64,
    pub proposal_std: f64,
    pub run: RunSpec,
    pub init: InitSpec,
}

impl Default for DoubleWellConfig {
    fn default() -> Self {
        Self {
            beta: 5.0,
            proposal_std: 0.25,
            run: RunSpec::new(50, 100_000),
            init: InitSpec::Point {
                x: vec![-std::f64::consts::FRAC_1_SQRT_2],
            },
        }
    }
}

/// Synthetic regression data drawn from its own seed, independent of the
/// sampler seed, so that runs with different ensembles share one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub seed: u64,
    pub size: usize,
}

impl DatasetSpec {
    fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::config("dataset.size", "must be at least 1"));
        }
        Ok(())
    }
}

fn hyper_box() -> InitSpec {
    InitSpec::Box {
        lower: vec![0.1; 3],
        upper: vec![2.0; 3],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpUnivariateConfig {
    pub dataset: DatasetSpec,
    /// Isotropic variance of the Gaussian proposal.
    pub proposal_variance: f64,
    pub run: RunSpec,
    #[serde(default = "hyper_box")]
    pub init: InitSpec,
}

impl Default for GpUnivariateConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec { seed: 2024, size: 40 },
            proposal_variance: 0.01,
            run: RunSpec::new(50, 1_000_000),
            init: hyper_box(),
        }
    }
}

/// Proposal variances per parameter block of `(alpha, Z, sigma)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockVariances {
    pub alpha: f64,
    pub z: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpMultivariateConfig {
    /// Input dimension `n`.
    pub input_dim: usize,
    pub dataset: DatasetSpec,
    pub proposal_variances: BlockVariances,
    pub run: RunSpec,
    /// Defaults to `alpha, c_i, sigma` in `[0.1, 2]` and `z_ij` in `[-1, 1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitSpec>,
}

impl Default for GpMultivariateConfig {
    fn default() -> Self {
        Self {
            input_dim: 3,
            dataset: DatasetSpec { seed: 2024, size: 40 },
            proposal_variances: BlockVariances {
                alpha: 0.1,
                z: 0.01,
                sigma: 0.01,
            },
            run: RunSpec::new(50, 1_000_000),
            init: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpNonGaussianConfig {
    pub dataset: DatasetSpec,
    /// Diagonal proposal variances for `(alpha, rho, sigma)`.
    pub theta_variances: [f64; 3],
    /// Isotropic proposal variance for the whitened noise.
    pub w_variance: f64,
    /// Independent `w` moves per walker between interacting moves.
    pub n_inner: usize,
    pub run: RunSpec,
    /// Initial `theta`; `w` starts at zero.
    #[serde(default = "hyper_box")]
    pub init: InitSpec,
}

impl Default for GpNonGaussianConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec { seed: 2024, size: 40 },
            theta_variances: [0.001, 0.001, 0.0001],
            w_variance: 0.001,
            n_inner: 30,
            run: RunSpec::new(60, 100_000),
            init: hyper_box(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteVerifyConfig {
    /// Random instances for the spectral and variance-ratio checks.
    pub instances: usize,
    /// Instances draw `S` uniformly from `2..=max_states`.
    pub max_states: usize,
    /// Random instances for the exact-stationarity check.
    pub stationarity_instances: usize,
    /// Stationarity instances draw `N` uniformly from `1..=max_walkers`.
    pub max_walkers: usize,
}

impl Default for FiniteVerifyConfig {
    fn default() -> Self {
        Self {
            instances: 1000,
            max_states: 6,
            stationarity_instances: 200,
            max_walkers: 3,
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, "must be a positive finite number"))
    }
}

impl ExperimentConfig {
    pub fn new(seed: u64, experiment: Experiment) -> Self {
        Self {
            seed,
            output_dir: None,
            experiment,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::config("<root>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the compact serialization of the experiment parameters.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&self.experiment).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        match &self.experiment {
            Experiment::Meanfield(c) => {
                positive("experiment.beta", c.beta)?;
                positive("experiment.sigma", c.sigma)?;
                positive("experiment.dt", c.dt)?;
                if !(c.t_end.is_finite() && c.t_end >= 0.0) {
                    return Err(Error::config("experiment.t_end", "must be finite and >= 0"));
                }
                if !(c.grid.lower < c.grid.upper) || !c.grid.lower.is_finite() || !c.grid.upper.is_finite() {
                    return Err(Error::config("experiment.grid", "need finite lower < upper"));
                }
                if c.grid.points < 2 {
                    return Err(Error::config("experiment.grid.points", "must be at least 2"));
                }
                if c.stride == 0 {
                    return Err(Error::config("experiment.stride", "must be at least 1"));
                }
                if c.snapshot_times.iter().any(|t| !t.is_finite() || *t < 0.0) {
                    return Err(Error::config("experiment.snapshot_times", "must be finite and >= 0"));
                }
                if let FitWindow::Span { start, end } = c.fit_window {
                    if !(start < end) {
                        return Err(Error::config("experiment.fit_window", "need start < end"));
                    }
                }
            }
            Experiment::DoubleWellSample(c) => {
                positive("experiment.beta", c.beta)?;
                positive("experiment.proposal_std", c.proposal_std)?;
                c.run.validate()?;
                c.init.validate("experiment.init", 1)?;
            }
            Experiment::GpUnivariate(c) => {
                c.dataset.validate()?;
                positive("experiment.proposal_variance", c.proposal_variance)?;
                c.run.validate()?;
                c.init.validate("experiment.init", 3)?;
            }
            Experiment::GpMultivariate(c) => {
                if c.input_dim == 0 {
                    return Err(Error::config("experiment.input_dim", "must be at least 1"));
                }
                c.dataset.validate()?;
                positive("experiment.proposal_variances.alpha", c.proposal_variances.alpha)?;
                positive("experiment.proposal_variances.z", c.proposal_variances.z)?;
                positive("experiment.proposal_variances.sigma", c.proposal_variances.sigma)?;
                c.run.validate()?;
                if let Some(init) = &c.init {
                    let dim = crate::targets::GpMultivariateTarget::param_dim(c.input_dim);
                    init.validate("experiment.init", dim)?;
                }
            }
            Experiment::GpNongaussian(c) => {
                c.dataset.validate()?;
                for (k, v) in c.theta_variances.iter().enumerate() {
                    positive(&format!("experiment.theta_variances[{k}]"), *v)?;
                }
                positive("experiment.w_variance", c.w_variance)?;
                if c.n_inner == 0 {
                    return Err(Error::config("experiment.n_inner", "must be at least 1"));
                }
                c.run.validate()?;
                c.init.validate("experiment.init", 3)?;
            }
            Experiment::FiniteVerify(c) => {
                if c.max_states < 2 {
                    return Err(Error::config("experiment.max_states", "must be at least 2"));
                }
                if c.max_walkers == 0 {
                    return Err(Error::config("experiment.max_walkers", "must be at least 1"));
                }
                let worst = (c.max_states.min(4) as f64).powi(c.max_walkers as i32);
                if worst > crate::analysis::MAX_ENUMERATED_STATES as f64 {
                    return Err(Error::config("experiment.max_walkers", "ensemble too large to enumerate"));
                }
            }
        }
        Ok(())
    }
}
