//! Browser demo. Three operations, each returning JSON:
//!
//! - mean-field relaxation of the double well, interacting versus Metropolis;
//! - an ensemble run on the double well with a histogram of cloned walkers;
//! - the Jacobian spectrum of a random finite instance.
//!
//! The plain functions are usable (and tested) natively; the `wasm_bindgen`
//! wrappers only serialize.

use serde::Serialize;
use teleport_core::analysis::{jacobian_spectrum_check, FiniteInstance, SpectrumReport};
use teleport_core::config::{DoubleWellConfig, InitSpec, MeanfieldConfig, RunSpec};
use teleport_core::diagnostics::RunStatistics;
use teleport_core::experiments::{meanfield_trajectory, sample_run};
use teleport_core::meanfield::{Dynamics, Scheme};
use teleport_core::rng::seeded;
use teleport_core::targets::DoubleWellTarget;
use teleport_core::{GaussianKernel, Result};
use wasm_bindgen::prelude::*;

/// Points plotted per curve; longer runs are thinned.
const MAX_POINTS: usize = 400;

#[derive(Debug, Serialize)]
pub struct Curve {
    pub t: Vec<f64>,
    pub e: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct MeanfieldComparison {
    pub x: Vec<f64>,
    pub target: Vec<f64>,
    pub nonlinear: Curve,
    pub linear: Curve,
    pub nonlinear_final: Vec<f64>,
    pub linear_final: Vec<f64>,
}

fn curve(cfg: &MeanfieldConfig) -> Result<(Curve, Vec<f64>, Vec<f64>)> {
    let (grid, traj) = meanfield_trajectory(cfg)?;
    let t = traj.times();
    let e = traj.e_series();
    let x = grid.nodes();
    Ok((Curve { t, e }, x, traj.final_density.values().to_vec()))
}

/// E(t) for both dynamics from the two-bump initial condition.
pub fn meanfield_comparison(beta: f64, sigma: f64, t_end: f64, points: usize) -> Result<MeanfieldComparison> {
    let dt = 0.01;
    let steps = (t_end / dt).ceil() as usize;
    let base = MeanfieldConfig {
        beta,
        sigma,
        dt,
        t_end,
        grid: teleport_core::config::GridSpec {
            lower: -2.0,
            upper: 2.0,
            points,
        },
        stride: (steps / MAX_POINTS).max(1),
        snapshot_times: vec![],
        // positivity preserving, so any slider setting stays stable
        scheme: Scheme::LinearlyImplicitEuler,
        ..MeanfieldConfig::default()
    };
    let (nonlinear, x, nonlinear_final) = curve(&base)?;
    let (linear, _, linear_final) = curve(&MeanfieldConfig {
        dynamics: Dynamics::Linear,
        ..base.clone()
    })?;
    let grid = teleport_core::meanfield::Grid::new(-2.0, 2.0, points)?;
    let target = teleport_core::meanfield::double_well_density(&grid, beta)?.values().to_vec();
    Ok(MeanfieldComparison {
        x,
        target,
        nonlinear,
        linear,
        nonlinear_final,
        linear_final,
    })
}

#[derive(Debug, Serialize)]
pub struct SampleSummary {
    pub stats: RunStatistics,
    /// Histogram bin edges over `[-1.5, 1.5]`.
    pub edges: Vec<f64>,
    /// Normalized histogram of the cloned walker's position.
    pub density: Vec<f64>,
    /// Fraction of cloned-walker samples with `x > 0`.
    pub right_fraction: f64,
}

/// All walkers start in the left well.
pub fn sample_double_well(beta: f64, proposal_std: f64, n_walkers: usize, steps: usize, seed: u64) -> Result<SampleSummary> {
    let cfg = DoubleWellConfig {
        beta,
        proposal_std,
        run: RunSpec::new(n_walkers, steps),
        init: InitSpec::Point {
            x: vec![-std::f64::consts::FRAC_1_SQRT_2],
        },
    };
    let target = DoubleWellTarget::new(beta)
        .ok_or_else(|| teleport_core::Error::InvalidArgument("beta must be positive".into()))?;
    let kernel = GaussianKernel::isotropic(1, proposal_std * proposal_std)?;
    let (record, stats) = sample_run(&target, &kernel, &cfg.init, &cfg.run, 0, "demo", seed)?;
    let bins = 60;
    let (lo, hi) = (-1.5, 1.5);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    let burn = stats.burn_in_steps;
    let samples = &record.cloned_value[burn..];
    for x in samples {
        let k = ((x - lo) / width).floor();
        if k >= 0.0 && (k as usize) < bins {
            counts[k as usize] += 1;
        }
    }
    let total = samples.len().max(1) as f64;
    Ok(SampleSummary {
        edges: (0..=bins).map(|k| lo + k as f64 * width).collect(),
        density: counts.iter().map(|c| *c as f64 / (total * width)).collect(),
        right_fraction: samples.iter().filter(|x| **x > 0.0).count() as f64 / total,
        stats,
    })
}

#[derive(Debug, Serialize)]
pub struct SpectrumDemo {
    pub pi: Vec<f64>,
    pub report: SpectrumReport,
    pub metropolized: SpectrumReport,
}

pub fn finite_spectrum(states: usize, seed: u64) -> Result<SpectrumDemo> {
    let inst = FiniteInstance::random(states, &mut seeded(seed))?;
    Ok(SpectrumDemo {
        pi: inst.pi().to_vec(),
        report: jacobian_spectrum_check(&inst),
        metropolized: jacobian_spectrum_check(&inst.metropolized()),
    })
}

fn to_js<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
        .and_then(|v| serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string())))
}

#[wasm_bindgen(js_name = meanfieldComparison)]
pub fn meanfield_comparison_js(beta: f64, sigma: f64, t_end: f64, points: usize) -> std::result::Result<String, JsValue> {
    to_js(meanfield_comparison(beta, sigma, t_end, points))
}

#[wasm_bindgen(js_name = sampleDoubleWell)]
pub fn sample_double_well_js(
    beta: f64,
    proposal_std: f64,
    n_walkers: usize,
    steps: usize,
    seed: u64,
) -> std::result::Result<String, JsValue> {
    to_js(sample_double_well(beta, proposal_std, n_walkers, steps, seed))
}

#[wasm_bindgen(js_name = finiteSpectrum)]
pub fn finite_spectrum_js(states: usize, seed: u64) -> std::result::Result<String, JsValue> {
    to_js(finite_spectrum(states, seed))
}
