//! Integrated autocorrelation times and acceptance / teleport rates.
//!
//! One step is one attempted walker move. The IAT of the ensemble-mean series
//! is divided by `N` so that `N` non-interacting walkers score the same as a
//! single chain.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::StepOutcome;

pub const DEFAULT_WINDOW_CONSTANT: f64 = 5.0;
pub const DEFAULT_BURN_IN: f64 = 0.1;
pub const MIN_SERIES_LEN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IatResult {
    pub tau: f64,
    pub window: usize,
    pub normalized_tau: f64,
}

impl IatResult {
    pub fn per_walker(self, n_walkers: usize) -> Self {
        Self {
            normalized_tau: self.tau / n_walkers as f64,
            ..self
        }
    }
}

/// Normalized autocorrelation `c_k / c_0` of the mean-removed series for
/// every lag, via a zero-padded FFT.
pub fn autocorrelation(series: &[f64]) -> Vec<f64> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    buf.iter_mut().for_each(|c| *c = Complex::new(c.norm_sqr(), 0.0));
    planner.plan_fft_inverse(len).process(&mut buf);
    let c0 = buf[0].re;
    buf[..n].iter().map(|c| c.re / c0).collect()
}

/// Windowed estimate `tau(W) = 1 + 2 sum_{k=1}^W rho_k` with the smallest `W`
/// such that `W >= c tau(W)`.
pub fn integrated_autocorrelation_time(series: &[f64], window_constant: f64) -> Result<IatResult> {
    if series.len() < MIN_SERIES_LEN {
        return Err(Error::invalid(format!(
            "IAT needs at least {MIN_SERIES_LEN} samples, got {}",
            series.len()
        )));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("IAT series contains non-finite values"));
    }
    let first = series[0];
    if series.iter().all(|x| *x == first) {
        return Err(Error::invalid("IAT is undefined for a constant series"));
    }
    if !(window_constant > 0.0) {
        return Err(Error::invalid("window constant must be positive"));
    }
    let rho = autocorrelation(series);
    let limit = series.len() / 2;
    let mut tau = 1.0;
    for (w, r) in rho.iter().enumerate().take(limit).skip(1) {
        tau += 2.0 * r;
        if w as f64 >= window_constant * tau {
            return Ok(IatResult {
                tau,
                window: w,
                normalized_tau: tau,
            });
        }
    }
    Err(Error::WindowNotConverged { limit })
}

/// Per-step history of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    pub n_walkers: usize,
    pub seed: u64,
    pub config_hash: String,
    /// Ensemble average of the tracked coordinate after each step.
    pub ensemble_mean: Vec<f64>,
    /// Tracked coordinate of the cloned walker before each step.
    pub cloned_value: Vec<f64>,
    pub accepted: Vec<bool>,
    pub teleported: Vec<bool>,
}

impl RunRecord {
    pub fn new(n_walkers: usize, seed: u64, config_hash: impl Into<String>) -> Self {
        Self {
            n_walkers,
            seed,
            config_hash: config_hash.into(),
            ..Self::default()
        }
    }

    pub fn with_capacity(mut self, steps: usize) -> Self {
        self.ensemble_mean.reserve(steps);
        self.cloned_value.reserve(steps);
        self.accepted.reserve(steps);
        self.teleported.reserve(steps);
        self
    }

    pub fn push(&mut self, ensemble_mean: f64, cloned_value: f64, outcome: &StepOutcome) {
        self.push_raw(ensemble_mean, cloned_value, outcome.accepted, outcome.teleported);
    }

    pub fn push_raw(&mut self, ensemble_mean: f64, cloned_value: f64, accepted: bool, teleported: bool) {
        self.ensemble_mean.push(ensemble_mean);
        self.cloned_value.push(cloned_value);
        self.accepted.push(accepted);
        self.teleported.push(teleported);
    }

    pub fn steps(&self) -> usize {
        self.accepted.len()
    }

    pub fn acceptances(&self) -> usize {
        self.accepted.iter().filter(|a| **a).count()
    }

    pub fn teleports_proposed(&self) -> usize {
        self.teleported.iter().filter(|t| **t).count()
    }

    pub fn teleports_accepted(&self) -> usize {
        self.accepted
            .iter()
            .zip(&self.teleported)
            .filter(|(a, t)| **a && **t)
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatisticsOptions {
    pub window_constant: f64,
    /// Fraction of the series discarded before the IAT estimate.
    pub burn_in: f64,
}

impl Default for StatisticsOptions {
    fn default() -> Self {
        Self {
            window_constant: DEFAULT_WINDOW_CONSTANT,
            burn_in: DEFAULT_BURN_IN,
        }
    }
}

/// Summary of a run; field names follow the JSON summary schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStatistics {
    #[serde(rename = "A")]
    pub acceptance_rate: f64,
    /// Binomial standard error of `A`.
    #[serde(rename = "A_stderr")]
    pub acceptance_stderr: f64,
    /// Headline teleport rate: `i != j` among all proposals.
    #[serde(rename = "T_proposed")]
    pub teleport_proposed: f64,
    #[serde(rename = "T_accepted")]
    pub teleport_accepted: f64,
    pub tau: Option<f64>,
    pub normalized_tau: Option<f64>,
    pub window: Option<usize>,
    /// Why the IAT is missing, when it is.
    pub iat_error: Option<String>,
    pub steps: usize,
    pub n_walkers: usize,
    pub burn_in_steps: usize,
    pub window_constant: f64,
}

pub fn run_statistics(record: &RunRecord, opts: &StatisticsOptions) -> Result<RunStatistics> {
    let steps = record.steps();
    if steps == 0 || record.n_walkers == 0 {
        return Err(Error::invalid("run record is empty"));
    }
    if !(0.0..1.0).contains(&opts.burn_in) {
        return Err(Error::invalid("burn-in fraction must lie in [0, 1)"));
    }
    let a = record.acceptances() as f64 / steps as f64;
    let burn = (opts.burn_in * steps as f64).floor() as usize;
    let (tau, normalized_tau, window, iat_error) =
        match integrated_autocorrelation_time(&record.ensemble_mean[burn..], opts.window_constant) {
            Ok(r) => {
                let r = r.per_walker(record.n_walkers);
                (Some(r.tau), Some(r.normalized_tau), Some(r.window), None)
            }
            Err(e) => (None, None, None, Some(e.to_string())),
        };
    Ok(RunStatistics {
        acceptance_rate: a,
        acceptance_stderr: (a * (1.0 - a) / steps as f64).sqrt(),
        teleport_proposed: record.teleports_proposed() as f64 / steps as f64,
        teleport_accepted: record.teleports_accepted() as f64 / steps as f64,
        tau,
        normalized_tau,
        window,
        iat_error,
        steps,
        n_walkers: record.n_walkers,
        burn_in_steps: burn,
        window_constant: opts.window_constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn short_and_constant_series_are_rejected() {
        assert!(integrated_autocorrelation_time(&[1.0; 50], 5.0).is_err());
        assert!(integrated_autocorrelation_time(&[1.0; 500], 5.0).is_err());
    }

    #[test]
    fn autocorrelation_of_alternating_series() {
        let s: Vec<f64> = (0..1000).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let r = autocorrelation(&s);
        assert!((r[0] - 1.0).abs() < 1e-12);
        assert!((r[1] + 999.0 / 1000.0).abs() < 1e-12);
    }

    #[test]
    fn affine_invariance() {
        let mut rng = seeded(3);
        let mut x = 0.0;
        let s: Vec<f64> = (0..20_000)
            .map(|_| {
                x = 0.8 * x + rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect();
        let t: Vec<f64> = s.iter().map(|v| -3.5 * v + 12.0).collect();
        let a = integrated_autocorrelation_time(&s, 5.0).unwrap();
        let b = integrated_autocorrelation_time(&t, 5.0).unwrap();
        assert_eq!(a.window, b.window);
        assert!((a.tau - b.tau).abs() < 1e-9 * a.tau);
    }

    #[test]
    fn short_correlated_chain_does_not_converge() {
        let s: Vec<f64> = (0..200).map(|k| (k as f64 / 150.0).sin()).collect();
        assert!(matches!(
            integrated_autocorrelation_time(&s, 5.0),
            Err(Error::WindowNotConverged { .. })
        ));
    }

    #[test]
    fn single_walker_never_teleports() {
        let mut rec = RunRecord::new(1, 0, "h");
        for k in 0..200 {
            rec.push_raw(k as f64, 0.0, k % 3 == 0, false);
        }
        let st = run_statistics(&rec, &StatisticsOptions::default()).unwrap();
        assert_eq!(st.teleport_proposed, 0.0);
        assert_eq!(st.teleport_accepted, 0.0);
    }

    #[test]
    fn all_rejected_run() {
        let mut rec = RunRecord::new(4, 0, "h");
        for k in 0..200 {
            rec.push_raw((k as f64).sin(), 0.0, false, k % 2 == 0);
        }
        let st = run_statistics(&rec, &StatisticsOptions::default()).unwrap();
        assert_eq!(st.acceptance_rate, 0.0);
        assert_eq!(st.teleport_accepted, 0.0);
        assert_eq!(st.teleport_proposed, 0.5);
        assert!(rec.teleports_accepted() <= rec.acceptances());
    }
}
