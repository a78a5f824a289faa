//! Squared-exponential Gaussian-process models for hyperparameter inference.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

use super::bartlett::{bartlett_log_prior, packed_len, BartlettMatrix};
use super::dist::{half_cauchy_log_pdf, student_t_log_pdf};
use super::linalg::{cholesky, cholesky_jittered};
use super::{SplitTarget, TargetDensity};
use crate::error::{Error, Result};

/// Scale of the half-Cauchy prior on every positive hyperparameter.
pub const PRIOR_SCALE: f64 = 3.0;
/// Degrees of freedom of the Student-t noise model.
pub const NONGAUSSIAN_DOF: f64 = 2.0;
const BASE_JITTER: f64 = 1e-10;

/// Regression data: `m` inputs in `R^n` and `m` scalar observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpDataset {
    n: usize,
    inputs: Vec<f64>,
    y: Vec<f64>,
}

impl GpDataset {
    /// `inputs` is row-major `m x n`.
    pub fn new(n: usize, inputs: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if n == 0 || y.is_empty() || inputs.len() != n * y.len() {
            return Err(Error::invalid("dataset needs n >= 1, m >= 1 and m*n inputs"));
        }
        if inputs.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset values must be finite"));
        }
        Ok(Self { n, inputs, y })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.n..(i + 1) * self.n]
    }

    pub fn observations(&self) -> &[f64] {
        &self.y
    }

    /// Same data with every input shifted by `offset` (all coordinates).
    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            n: self.n,
            inputs: self.inputs.iter().map(|x| x + offset).collect(),
            y: self.y.clone(),
        }
    }

    /// Reorders observations so that row `k` of the result is row `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut inputs = Vec::with_capacity(self.inputs.len());
        for &p in perm {
            inputs.extend_from_slice(self.input(p));
        }
        Self {
            n: self.n,
            inputs,
            y: perm.iter().map(|&p| self.y[p]).collect(),
        }
    }

    /// CSV with header `index,x_1,..,x_n,y`; reals use 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index");
        for j in 1..=self.n {
            write!(out, ",x_{j}").unwrap();
        }
        out.push_str(",y\n");
        for i in 0..self.len() {
            write!(out, "{i}").unwrap();
            for x in self.input(i) {
                write!(out, ",{x:.16e}").unwrap();
            }
            writeln!(out, ",{:.16e}", self.y[i]).unwrap();
        }
        out
    }

    /// Parses the format written by [`GpDataset::to_csv`]; `#` lines are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid("dataset CSV is empty"))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 3 || cols[0] != "index" || cols[cols.len() - 1] != "y" {
            return Err(Error::invalid(format!("unexpected dataset header `{header}`")));
        }
        let n = cols.len() - 2;
        let (mut inputs, mut y) = (Vec::new(), Vec::new());
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != n + 2 {
                return Err(Error::invalid(format!("dataset row {row} has {} fields", fields.len())));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::invalid(format!("dataset row {row}: {e}")))
            };
            for f in &fields[1..=n] {
                inputs.push(parse(f)?);
            }
            y.push(parse(fields[n + 1])?);
        }
        Self::new(n, inputs, y)
    }
}

/// Length-scale parameterization of the squared-exponential kernel.
#[derive(Debug, Clone, Copy)]
pub enum KernelMetric<'a> {
    /// `exp(-|x1 - x2|^2 / rho^2)`
    LengthScale(f64),
    /// `exp(-(x1 - x2)^T Z Z^T (x1 - x2))`
    Factor(&'a BartlettMatrix),
}

/// `K[i][j] = alpha^2 exp(-d(x_i, x_j))` under the given metric.
pub fn se_kernel_matrix(data: &GpDataset, alpha: f64, metric: KernelMetric<'_>) -> DMatrix<f64> {
    let m = data.len();
    let a2 = alpha * alpha;
    let mut k = DMatrix::zeros(m, m);
    let mut diff = vec![0.0; data.dim()];
    for i in 0..m {
        k[(i, i)] = a2;
        for j in 0..i {
            for ((d, a), b) in diff.iter_mut().zip(data.input(i)).zip(data.input(j)) {
                *d = a - b;
            }
            let q = match metric {
                KernelMetric::LengthScale(rho) => {
                    diff.iter().map(|d| d * d).sum::<f64>() / (rho * rho)
                }
                KernelMetric::Factor(z) => z.quadratic_form(&diff),
            };
            let v = a2 * (-q).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// `theta = (alpha, rho, sigma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpUnivariateHyper {
    pub alpha: f64,
    pub rho: f64,
    pub sigma: f64,
}

impl GpUnivariateHyper {
    pub fn from_slice(theta: &[f64]) -> Self {
        Self {
            alpha: theta[0],
            rho: theta[1],
            sigma: theta[2],
        }
    }

    pub fn in_support(&self) -> bool {
        self.alpha > 0.0 && self.rho > 0.0 && self.sigma > 0.0
    }

    pub fn log_prior(&self) -> f64 {
        half_cauchy_log_pdf(self.alpha, PRIOR_SCALE)
            + half_cauchy_log_pdf(self.rho, PRIOR_SCALE)
            + half_cauchy_log_pdf(self.sigma, PRIOR_SCALE)
    }
}

/// Hyperparameters of either Gaussian-noise model.
#[derive(Debug, Clone, PartialEq)]
pub enum GpHyper {
    Univariate(GpUnivariateHyper),
    Multivariate {
        alpha: f64,
        z: BartlettMatrix,
        sigma: f64,
    },
}

impl GpHyper {
    fn parts(&self) -> (f64, KernelMetric<'_>, f64) {
        match self {
            GpHyper::Univariate(h) => (h.alpha, KernelMetric::LengthScale(h.rho), h.sigma),
            GpHyper::Multivariate { alpha, z, sigma } => (*alpha, KernelMetric::Factor(z), *sigma),
        }
    }

    fn log_prior(&self) -> f64 {
        match self {
            GpHyper::Univariate(h) => h.log_prior(),
            GpHyper::Multivariate { alpha, z, sigma } => {
                half_cauchy_log_pdf(*alpha, PRIOR_SCALE)
                    + half_cauchy_log_pdf(*sigma, PRIOR_SCALE)
                    + bartlett_log_prior(z)
            }
        }
    }
}

/// `log p(theta | y)` for Gaussian observation noise, including every
/// normalizing constant of prior and likelihood.
pub fn gp_gaussian_logpost(theta: &GpHyper, data: &GpDataset) -> Result<f64> {
    let log_prior = theta.log_prior();
    if log_prior == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let (alpha, metric, sigma) = theta.parts();
    let mut k = se_kernel_matrix(data, alpha, metric);
    let s2 = sigma * sigma;
    for i in 0..data.len() {
        k[(i, i)] += s2;
    }
    let factor = match cholesky(k.clone()) {
        Some(f) => f,
        // sigma^2 can fall below round-off of a numerically low-rank K
        None => cholesky_jittered(&k, BASE_JITTER)?,
    };
    let mut a = nalgebra::DVector::from_column_slice(data.observations());
    factor.lower.solve_lower_triangular_mut(&mut a);
    let m = data.len() as f64;
    Ok(-0.5 * factor.log_det() - 0.5 * a.norm_squared() - 0.5 * m * (2.0 * PI).ln() + log_prior)
}

/// Posterior over `(alpha, rho, sigma)` with Gaussian noise and half-Cauchy priors.
#[derive(Debug, Clone)]
pub struct GpUnivariateTarget {
    pub data: GpDataset,
}

impl TargetDensity for GpUnivariateTarget {
    fn dim(&self) -> usize {
        3
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        // A kernel that cannot be factored even with jitter is treated as
        // outside the support so the sampler rejects it.
        gp_gaussian_logpost(&GpHyper::Univariate(GpUnivariateHyper::from_slice(x)), &self.data)
            .unwrap_or(f64::NEG_INFINITY)
    }
}

/// Posterior over `(alpha, Z, sigma)` packed as `[alpha, Z (row-major lower), sigma]`.
#[derive(Debug, Clone)]
pub struct GpMultivariateTarget {
    pub data: GpDataset,
}

impl GpMultivariateTarget {
    pub fn param_dim(n: usize) -> usize {
        packed_len(n) + 2
    }

    pub fn unpack(&self, x: &[f64]) -> GpHyper {
        let n = self.data.dim();
        let p = packed_len(n);
        GpHyper::Multivariate {
            alpha: x[0],
            z: BartlettMatrix::from_packed(n, &x[1..1 + p]),
            sigma: x[1 + p],
        }
    }
}

impl TargetDensity for GpMultivariateTarget {
    fn dim(&self) -> usize {
        Self::param_dim(self.data.dim())
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        gp_gaussian_logpost(&self.unpack(x), &self.data).unwrap_or(f64::NEG_INFINITY)
    }
}

/// Hyperparameters plus whitened noise `w`, with `eps = y + K^(1/2) w`.
#[derive(Debug, Clone, PartialEq)]
pub struct WhitenedState {
    pub theta: GpUnivariateHyper,
    pub w: Vec<f64>,
}

fn noise_from_whitened(lower: &DMatrix<f64>, y: &[f64], w: &[f64], eps: &mut [f64]) {
    let m = y.len();
    for i in 0..m {
        let mut s = y[i];
        for j in 0..=i {
            s += lower[(i, j)] * w[j];
        }
        eps[i] = s;
    }
}

fn nongaussian_value(log_prior: f64, sigma: f64, w: &[f64], eps: &[f64]) -> f64 {
    let w2: f64 = w.iter().map(|v| v * v).sum();
    let lik: f64 = eps
        .iter()
        .map(|e| student_t_log_pdf(*e, NONGAUSSIAN_DOF, sigma))
        .sum();
    -0.5 * w2 + log_prior + lik
}

fn kernel_factor(theta: &GpUnivariateHyper, data: &GpDataset) -> Result<DMatrix<f64>> {
    let k = se_kernel_matrix(data, theta.alpha, KernelMetric::LengthScale(theta.rho));
    Ok(cholesky_jittered(&k, BASE_JITTER)?.lower)
}

/// `-|w|^2/2 + log p(theta) + sum_i log t_2(eps_i; sigma)`.
pub fn gp_nongaussian_logpost(state: &WhitenedState, data: &GpDataset) -> Result<f64> {
    if state.w.len() != data.len() {
        return Err(Error::invalid("whitened noise length must equal the data count"));
    }
    if !state.theta.in_support() {
        return Ok(f64::NEG_INFINITY);
    }
    let lower = kernel_factor(&state.theta, data)?;
    let mut eps = vec![0.0; data.len()];
    noise_from_whitened(&lower, data.observations(), &state.w, &mut eps);
    Ok(nongaussian_value(state.theta.log_prior(), state.theta.sigma, &state.w, &eps))
}

/// Gradient of [`gp_nongaussian_logpost`] with respect to `w`.
pub fn gp_nongaussian_grad_w(state: &WhitenedState, data: &GpDataset) -> Result<Vec<f64>> {
    if state.w.len() != data.len() || !state.theta.in_support() {
        return Err(Error::invalid("gradient needs theta in support and |w| = m"));
    }
    let lower = kernel_factor(&state.theta, data)?;
    let m = data.len();
    let mut eps = vec![0.0; m];
    noise_from_whitened(&lower, data.observations(), &state.w, &mut eps);
    let s2 = state.theta.sigma * state.theta.sigma;
    let score: Vec<f64> = eps
        .iter()
        .map(|e| -(NONGAUSSIAN_DOF + 1.0) * e / (NONGAUSSIAN_DOF * s2 + e * e))
        .collect();
    // -w + L^T score
    Ok((0..m)
        .map(|j| -state.w[j] + (j..m).map(|i| lower[(i, j)] * score[i]).sum::<f64>())
        .collect())
}

/// Student-t noise model in whitened coordinates, split as `u = theta`, `v = w`.
#[derive(Debug, Clone)]
pub struct GpNonGaussianTarget {
    pub data: GpDataset,
}

/// Per-`theta` work shared by every `w`: the kernel factor and the prior.
#[derive(Debug, Clone)]
pub struct NonGaussianConditioned {
    lower: DMatrix<f64>,
    log_prior: f64,
    sigma: f64,
}

impl SplitTarget for GpNonGaussianTarget {
    type Conditioned = NonGaussianConditioned;

    fn u_dim(&self) -> usize {
        3
    }

    fn v_dim(&self) -> usize {
        self.data.len()
    }

    fn condition(&self, u: &[f64]) -> Option<NonGaussianConditioned> {
        let theta = GpUnivariateHyper::from_slice(u);
        if !theta.in_support() {
            return None;
        }
        let lower = kernel_factor(&theta, &self.data).ok()?;
        Some(NonGaussianConditioned {
            lower,
            log_prior: theta.log_prior(),
            sigma: theta.sigma,
        })
    }

    fn log_density_given(&self, c: &NonGaussianConditioned, _u: &[f64], v: &[f64]) -> f64 {
        let mut eps = vec![0.0; v.len()];
        noise_from_whitened(&c.lower, self.data.observations(), v, &mut eps);
        nongaussian_value(c.log_prior, c.sigma, v, &eps)
    }
}

fn f_true_coord(x: f64) -> f64 {
    0.3 + 0.4 * x + 0.5 * (2.7 * x).sin() + 1.1 / (1.0 + x * x)
}

/// Regression function used to synthesize data; a product over coordinates.
pub fn f_true(x: &[f64]) -> f64 {
    x.iter().map(|v| f_true_coord(*v)).product()
}

fn noise_sd(x: f64) -> f64 {
    if x.abs() < 1.5 {
        0.125
    } else {
        1.25
    }
}

/// `x_i ~ N(0, I_n)`, `y_i = f_true(x_i) + sum_j delta_ij` with heavier noise
/// for coordinates beyond `|x| >= 1.5`.
pub fn generate_synthetic_data<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<GpDataset> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("synthetic data needs n >= 1 and m >= 1"));
    }
    let mut inputs = Vec::with_capacity(n * m);
    let mut y = Vec::with_capacity(m);
    for _ in 0..m {
        let start = inputs.len();
        for _ in 0..n {
            inputs.push(rng.sample::<f64, _>(StandardNormal));
        }
        let x = &inputs[start..];
        let mut delta = 0.0;
        for &xj in x {
            let e: f64 = rng.sample(StandardNormal);
            delta += noise_sd(xj) * e;
        }
        y.push(f_true(x) + delta);
    }
    GpDataset::new(n, inputs, y)
}
