//! Runners behind the command-line tool. Each returns its artifacts in memory
//! so that callers decide where (or whether) to write them.

use rand::{Rng, RngCore};
use serde::Serialize;

use crate::analysis::{
    exact_ensemble_transition_matrix, interacting_stage_matrix, jacobian_spectrum_check, product_distribution,
    random_density, stationarity_error, sweep_stage_matrix, variance_ratio_bound_check, FiniteInstance,
    FiniteProductInstance,
};
use crate::config::{
    DatasetSpec, DoubleWellConfig, Experiment, ExperimentConfig, FiniteVerifyConfig, GpMultivariateConfig,
    GpNonGaussianConfig, GpUnivariateConfig, InitSpec, MeanfieldConfig, RunSpec,
};
use crate::diagnostics::{run_statistics, RunRecord, RunStatistics, StatisticsOptions};
use crate::error::{Error, Result};
use crate::kernel::{GaussianKernel, TransitionKernel};
use crate::meanfield::{
    build_grid_kernel, double_well_density, double_well_initial, euler_integrate, fit_decay_rate,
    metropolize_kernel, DecayFit, Dynamics, Grid, IntegrationOptions, Trajectory,
};
use crate::output::{json_with_provenance, record_csv, snapshots_csv, trajectory_csv, with_header};
use crate::rng::{seeded, SeededRng};
use crate::sampler::{ensemble_step, WalkerEnsemble};
use crate::subset::{alternating_step, SplitEnsemble};
use crate::targets::{
    generate_synthetic_data, DoubleWellTarget, GpDataset, GpMultivariateTarget, GpNonGaussianTarget,
    GpUnivariateTarget, SplitTarget, TargetDensity,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub artifacts: Vec<Artifact>,
    /// The summary artifact, parsed.
    pub summary: serde_json::Value,
}

impl ExperimentOutput {
    pub fn artifact(&self, name: &str) -> Option<&str> {
        self.artifacts
            .iter()
            .find(|a| a.name == name)
            .map(|a| a.contents.as_str())
    }
}

fn artifact(name: &str, contents: String) -> Artifact {
    Artifact {
        name: name.into(),
        contents,
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let hash = cfg.hash();
    let seed = cfg.seed;
    let (artifacts, summary_name) = match &cfg.experiment {
        Experiment::Meanfield(c) => (meanfield_artifacts(c, &hash, seed)?, "summary.json"),
        Experiment::DoubleWellSample(c) => (double_well_artifacts(c, &hash, seed)?, "summary.json"),
        Experiment::GpUnivariate(c) => (gp_univariate_artifacts(c, &hash, seed)?, "summary.json"),
        Experiment::GpMultivariate(c) => (gp_multivariate_artifacts(c, &hash, seed)?, "summary.json"),
        Experiment::GpNongaussian(c) => (gp_nongaussian_artifacts(c, &hash, seed)?, "summary.json"),
        Experiment::FiniteVerify(c) => (finite_verify_artifacts(c, &hash, seed)?, "verify.json"),
    };
    let text = artifacts
        .iter()
        .find(|a| a.name == summary_name)
        .map(|a| a.contents.as_str())
        .expect("every runner emits a summary");
    let summary = serde_json::from_str(text)?;
    Ok(ExperimentOutput { artifacts, summary })
}

// ---------------------------------------------------------------- mean field

#[derive(Debug, Clone, Serialize)]
pub struct MeanfieldSummary {
    pub kind: &'static str,
    pub steps: usize,
    pub t_end: f64,
    pub final_e: Option<f64>,
    pub final_chi2: f64,
    pub min_rho: f64,
    pub max_mass_defect: f64,
    pub e_fit: Option<DecayFit>,
    pub e_fit_error: Option<String>,
    pub chi2_fit: Option<DecayFit>,
    pub chi2_fit_error: Option<String>,
}

/// Integrates the double-well dynamics described by `c`.
pub fn meanfield_trajectory(c: &MeanfieldConfig) -> Result<(Grid, Trajectory)> {
    let grid = Grid::new(c.grid.lower, c.grid.upper, c.grid.points)?;
    let pi = double_well_density(&grid, c.beta)?;
    let rho0 = double_well_initial(&grid, c.beta)?;
    let q = build_grid_kernel(&grid, c.sigma)?;
    let kernel = match c.dynamics {
        Dynamics::Nonlinear => q,
        Dynamics::Linear => metropolize_kernel(&q, &pi)?,
    };
    let opts = IntegrationOptions {
        dt: c.dt,
        t_end: c.t_end,
        stride: c.stride,
        snapshot_times: c.snapshot_times.clone(),
        scheme: c.scheme,
    };
    let traj = euler_integrate(c.dynamics, &rho0, &pi, &kernel, &opts)?;
    Ok((grid, traj))
}

fn split_fit(r: Result<DecayFit>) -> (Option<DecayFit>, Option<String>) {
    match r {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    }
}

fn meanfield_artifacts(c: &MeanfieldConfig, hash: &str, seed: u64) -> Result<Vec<Artifact>> {
    let (grid, traj) = meanfield_trajectory(c)?;
    let times = traj.times();
    let (e_fit, e_fit_error) = split_fit(fit_decay_rate(&times, &traj.e_series(), c.fit_window));
    let (chi2_fit, chi2_fit_error) = split_fit(fit_decay_rate(&times, &traj.chi2_series(), c.fit_window));
    let last = traj.rows.last().expect("trajectory has a first row");
    let summary = MeanfieldSummary {
        kind: "meanfield",
        steps: traj.steps,
        t_end: last.t,
        final_e: last.e,
        final_chi2: last.chi2,
        min_rho: traj.rows.iter().map(|r| r.min_rho).fold(f64::INFINITY, f64::min),
        max_mass_defect: traj.max_mass_defect,
        e_fit,
        e_fit_error,
        chi2_fit,
        chi2_fit_error,
    };
    let mut out = vec![artifact("trajectory.csv", trajectory_csv(&traj, hash, seed))];
    if !traj.snapshots.is_empty() {
        out.push(artifact("snapshots.csv", snapshots_csv(&traj, &grid, hash, seed)));
    }
    out.push(artifact("summary.json", json_with_provenance(&summary, hash, seed)?));
    Ok(out)
}

// ------------------------------------------------------------------ samplers

pub fn initial_walkers<R: Rng + ?Sized>(init: &InitSpec, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    match init {
        InitSpec::Point { x } => vec![x.clone(); n],
        InitSpec::Box { lower, upper } => (0..n)
            .map(|_| {
                lower
                    .iter()
                    .zip(upper)
                    .map(|(a, b)| if a == b { *a } else { rng.random_range(*a..*b) })
                    .collect()
            })
            .collect(),
    }
}

/// Index of the walker the next step will clone, read from a copy of the
/// stream so the run itself is unaffected.
fn peek_clone_index(rng: &SeededRng, n: usize) -> usize {
    rng.clone().random_range(0..n)
}

/// Runs `steps` full ensemble steps, recording coordinate `tracked`.
/// `observe` sees the ensemble after every step.
#[allow(clippy::too_many_arguments)]
pub fn drive_ensemble<T, K>(
    ens: &mut WalkerEnsemble,
    target: &T,
    kernel: &K,
    steps: usize,
    tracked: usize,
    rng: &mut SeededRng,
    record: &mut RunRecord,
    mut observe: impl FnMut(usize, &WalkerEnsemble),
) -> Result<()>
where
    T: TargetDensity + ?Sized,
    K: TransitionKernel,
{
    for k in 0..steps {
        let j = peek_clone_index(rng, ens.len());
        let cloned = ens.walker(j)[tracked];
        let outcome = ensemble_step(ens, target, kernel, rng)?;
        debug_assert_eq!(outcome.clone_index, j);
        record.push(ens.coordinate_mean(tracked), cloned, &outcome);
        observe(k, ens);
    }
    Ok(())
}

/// One complete ensemble run: initial walkers, steps, statistics.
pub fn sample_run<T, K>(
    target: &T,
    kernel: &K,
    init: &InitSpec,
    run: &RunSpec,
    tracked: usize,
    hash: &str,
    seed: u64,
) -> Result<(RunRecord, RunStatistics)>
where
    T: TargetDensity + ?Sized,
    K: TransitionKernel,
{
    let mut rng = seeded(seed);
    let walkers = initial_walkers(init, run.n_walkers, &mut rng);
    let mut ens = WalkerEnsemble::new(&walkers, target, kernel)?;
    let mut record = RunRecord::new(run.n_walkers, seed, hash).with_capacity(run.steps);
    drive_ensemble(&mut ens, target, kernel, run.steps, tracked, &mut rng, &mut record, |_, _| {})?;
    let stats = run_statistics(&record, &stats_options(run))?;
    Ok((record, stats))
}

fn stats_options(run: &RunSpec) -> StatisticsOptions {
    StatisticsOptions {
        window_constant: run.window_constant,
        burn_in: run.burn_in,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SamplerSummary {
    pub kind: &'static str,
    /// Name of the coordinate whose ensemble mean is tracked.
    pub tracked: &'static str,
    #[serde(flatten)]
    pub stats: RunStatistics,
    /// Acceptance rate of the independent inner moves, when there are any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_acceptance: Option<f64>,
}

fn sampler_artifacts(
    record: &RunRecord,
    summary: &SamplerSummary,
    dataset: Option<&GpDataset>,
    hash: &str,
    seed: u64,
) -> Result<Vec<Artifact>> {
    let mut out = vec![artifact("record.csv", record_csv(record))];
    if let Some(d) = dataset {
        out.push(artifact("dataset.csv", with_header(&d.to_csv(), hash, seed)));
    }
    out.push(artifact("summary.json", json_with_provenance(summary, hash, seed)?));
    Ok(out)
}

fn double_well_artifacts(c: &DoubleWellConfig, hash: &str, seed: u64) -> Result<Vec<Artifact>> {
    let target = DoubleWellTarget::new(c.beta).ok_or_else(|| Error::config("experiment.beta", "must be positive"))?;
    let kernel = GaussianKernel::isotropic(1, c.proposal_std * c.proposal_std)?;
    let (record, stats) = sample_run(&target, &kernel, &c.init, &c.run, 0, hash, seed)?;
    let summary = SamplerSummary {
        kind: "double_well_sample",
        tracked: "x",
        stats,
        inner_acceptance: None,
    };
    sampler_artifacts(&record, &summary, None, hash, seed)
}

/// The synthetic regression data for input dimension `n`.
pub fn synthetic_dataset(spec: &DatasetSpec, n: usize) -> Result<GpDataset> {
    generate_synthetic_data(n, spec.size, &mut seeded(spec.seed))
}

fn gp_univariate_artifacts(c: &GpUnivariateConfig, hash: &str, seed: u64) -> Result<Vec<Artifact>> {
    let data = synthetic_dataset(&c.dataset, 1)?;
    let target = GpUnivariateTarget { data };
    let kernel = GaussianKernel::isotropic(3, c.proposal_variance)?;
    let (record, stats) = sample_run(&target, &kernel, &c.init, &c.run, 1, hash, seed)?;
    let summary = SamplerSummary {
        kind: "gp_univariate",
        tracked: "rho",
        stats,
        inner_acceptance: None,
    };
    sampler_artifacts(&record, &summary, Some(&target.data), hash, seed)
}

/// `(alpha, Z packed row-major lower, sigma)` variances from the block values.
pub fn multivariate_variances(c: &GpMultivariateConfig) -> Vec<f64> {
    let dim = GpMultivariateTarget::param_dim(c.input_dim);
    let mut v = vec![c.proposal_variances.z; dim];
    v[0] = c.proposal_variances.alpha;
    v[dim - 1] = c.proposal_variances.sigma;
    v
}

/// Positive entries (`alpha`, the diagonal `c_i`, `sigma`) in `[0.1, 2]`,
/// off-diagonal `z_ij` in `[-1, 1]`.
pub fn multivariate_default_init(n: usize) -> InitSpec {
    let mut lower = vec![0.1];
    let mut upper = vec![2.0];
    for i in 0..n {
        for j in 0..=i {
            if i == j {
                lower.push(0.1);
                upper.push(2.0);
            } else {
                lower.push(-1.0);
                upper.push(1.0);
            }
        }
    }
    lower.push(0.1);
    upper.push(2.0);
    InitSpec::Box { lower, upper }
}

fn gp_multivariate_artifacts(c: &GpMultivariateConfig, hash: &str, seed: u64) -> Result<Vec<Artifact>> {
    let data = synthetic_dataset(&c.dataset, c.input_dim)?;
    let target = GpMultivariateTarget { data };
    let kernel = GaussianKernel::diagonal(multivariate_variances(c))?;
    let init = c.init.clone().unwrap_or_else(|| multivariate_default_init(c.input_dim));
    let (record, stats) = sample_run(&target, &kernel, &init, &c.run, 1, hash, seed)?;
    let summary = SamplerSummary {
        kind: "gp_multivariate",
        tracked: "c1",
        stats,
        inner_acceptance: None,
    };
    sampler_artifacts(&record, &summary, Some(&target.data), hash, seed)
}

/// Runs the subset sampler with `theta` interacting and `w` independent.
pub fn nongaussian_run(c: &GpNonGaussianConfig, hash: &str, seed: u64) -> Result<(GpDataset, RunRecord, RunStatistics, f64)> {
    let data = synthetic_dataset(&c.dataset, 1)?;
    let target = GpNonGaussianTarget { data };
    let u_kernel = GaussianKernel::diagonal(c.theta_variances.to_vec())?;
    let v_kernel = GaussianKernel::isotropic(target.v_dim(), c.w_variance)?;
    let mut rng = seeded(seed);
    let n = c.run.n_walkers;
    let u0 = initial_walkers(&c.init, n, &mut rng);
    let v0 = vec![vec![0.0; target.v_dim()]; n];
    let mut ens = SplitEnsemble::new(&u0, &v0, &target, &u_kernel)?;
    let mut record = RunRecord::new(n, seed, hash).with_capacity(c.run.steps);
    for _ in 0..c.run.steps {
        let j = peek_clone_index(&rng, n);
        let cloned = ens.u_walker(j)[1];
        let outcome = alternating_step(&mut ens, &target, &u_kernel, &v_kernel, c.n_inner, &mut rng)?;
        record.push(ens.u_coordinate_mean(1), cloned, &outcome);
    }
    let stats = run_statistics(&record, &stats_options(&c.run))?;
    let (proposed, accepted) = ens.inner_counts();
    let inner = if proposed == 0 { 0.0 } else { accepted as f64 / proposed as f64 };
    Ok((target.data, record, stats, inner))
}

fn gp_nongaussian_artifacts(c: &GpNonGaussianConfig, hash: &str, seed: u64) -> Result<Vec<Artifact>> {
    let (data, record, stats, inner) = nongaussian_run(c, hash, seed)?;
    let summary = SamplerSummary {
        kind: "gp_nongaussian",
        tracked: "rho",
        stats,
        inner_acceptance: Some(inner),
    };
    sampler_artifacts(&record, &summary, Some(&data), hash, seed)
}

// -------------------------------------------------------------- verification

#[derive(Debug, Clone, Serialize)]
pub struct InstanceReport {
    pub instance_seed: u64,
    pub states: usize,
    pub eigenvalues: Vec<f64>,
    pub max_imag: f64,
    pub alpha: f64,
    pub bound: f64,
    pub pass: bool,
    /// Largest `|lambda + 1|` after Metropolizing the kernel.
    pub metropolized_deviation: f64,
    pub variance_ratio: f64,
    pub variance_bound: f64,
    pub variance_pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StationarityReport {
    pub instance_seed: u64,
    pub states: usize,
    pub walkers: usize,
    pub error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub kind: &'static str,
    pub spectral_pass: bool,
    pub metropolized_pass: bool,
    pub variance_pass: bool,
    pub stationarity_pass: bool,
    pub subset_stationarity_pass: bool,
    pub pass: bool,
    pub max_stationarity_error: f64,
    pub max_subset_stationarity_error: f64,
    pub instances: Vec<InstanceReport>,
    pub stationarity: Vec<StationarityReport>,
}

pub const STATIONARITY_TOLERANCE: f64 = 1e-12;
pub const METROPOLIZED_TOLERANCE: f64 = 1e-10;

/// Spectral, variance-ratio and Metropolized checks on one random instance.
pub fn verify_instance(instance_seed: u64, max_states: usize) -> Result<InstanceReport> {
    let mut rng = seeded(instance_seed);
    let states = rng.random_range(2..=max_states);
    let inst = FiniteInstance::random(states, &mut rng)?;
    let spec = jacobian_spectrum_check(&inst);
    let metro = jacobian_spectrum_check(&inst.metropolized());
    let metropolized_deviation = metro.eigenvalues.iter().map(|l| (l + 1.0).abs()).fold(0.0, f64::max);
    let rho = random_density(states, &mut rng);
    let var = variance_ratio_bound_check(&inst, &rho)?;
    Ok(InstanceReport {
        instance_seed,
        states,
        eigenvalues: spec.eigenvalues,
        max_imag: spec.max_imag,
        alpha: spec.alpha,
        bound: spec.bound,
        pass: spec.pass,
        metropolized_deviation,
        variance_ratio: var.ratio,
        variance_bound: var.bound,
        variance_pass: var.pass,
    })
}

/// `max |Pi P - Pi|` for the enumerated ensemble chain of a random instance.
pub fn verify_stationarity(instance_seed: u64, max_states: usize, max_walkers: usize) -> Result<StationarityReport> {
    let mut rng = seeded(instance_seed);
    let states = rng.random_range(2..=max_states);
    let walkers = rng.random_range(1..=max_walkers);
    let inst = FiniteInstance::random(states, &mut rng)?;
    let p = exact_ensemble_transition_matrix(&inst, walkers)?;
    let error = stationarity_error(&p, &product_distribution(inst.pi(), walkers)?);
    Ok(StationarityReport {
        instance_seed,
        states,
        walkers,
        error,
        pass: error < STATIONARITY_TOLERANCE,
    })
}

/// Stationarity of both subset-sampler stages on a random 2x2 product space.
pub fn verify_subset_stationarity(instance_seed: u64) -> Result<f64> {
    let mut rng = seeded(instance_seed);
    let inst = FiniteProductInstance::random(2, 2, &mut rng)?;
    let dist = product_distribution(&inst.walker_distribution(), 2)?;
    let a = stationarity_error(&interacting_stage_matrix(&inst, 2)?, &dist);
    let b = stationarity_error(&sweep_stage_matrix(&inst, 2, 3)?, &dist);
    Ok(a.max(b))
}

pub fn finite_verify(c: &FiniteVerifyConfig, seed: u64) -> Result<VerifyReport> {
    let mut master = seeded(seed);
    let instances = (0..c.instances)
        .map(|_| verify_instance(master.next_u64(), c.max_states))
        .collect::<Result<Vec<_>>>()?;
    let stat_states = c.max_states.min(4);
    let stationarity = (0..c.stationarity_instances)
        .map(|_| verify_stationarity(master.next_u64(), stat_states, c.max_walkers))
        .collect::<Result<Vec<_>>>()?;
    let subset_errors = (0..10)
        .map(|_| verify_subset_stationarity(master.next_u64()))
        .collect::<Result<Vec<_>>>()?;
    let max_subset = subset_errors.iter().copied().fold(0.0, f64::max);
    let spectral_pass = instances.iter().all(|r| r.pass);
    let metropolized_pass = instances
        .iter()
        .all(|r| r.metropolized_deviation < METROPOLIZED_TOLERANCE);
    let variance_pass = instances.iter().all(|r| r.variance_pass);
    let stationarity_pass = stationarity.iter().all(|r| r.pass);
    let subset_stationarity_pass = max_subset < STATIONARITY_TOLERANCE;
    Ok(VerifyReport {
        kind: "finite_verify",
        spectral_pass,
        metropolized_pass,
        variance_pass,
        stationarity_pass,
        subset_stationarity_pass,
        pass: spectral_pass && metropolized_pass && variance_pass && stationarity_pass && subset_stationarity_pass,
        max_stationarity_error: stationarity.iter().map(|r| r.error).fold(0.0, f64::max),
        max_subset_stationarity_error: max_subset,
        instances,
        stationarity,
    })
}

fn finite_verify_artifacts(c: &FiniteVerifyConfig, hash: &str, seed: u64) -> Result<Vec<Artifact>> {
    let report = finite_verify(c, seed)?;
    Ok(vec![artifact("verify.json", json_with_provenance(&report, hash, seed)?)])
}

// ----------------------------------------------------------------------- iat

/// Statistics of a run-record CSV produced by [`run_experiment`].
pub fn iat_from_csv(text: &str, n_walkers: usize, opts: &StatisticsOptions) -> Result<RunStatistics> {
    if n_walkers == 0 {
        return Err(Error::config("n_walkers", "must be at least 1"));
    }
    let record = crate::output::parse_record_csv(text, n_walkers)?;
    run_statistics(&record, opts)
}
