//! Proposal kernels `q(y | x)` that can be both sampled and evaluated.

use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// A Markov transition density on fixed-length real vectors.
pub trait TransitionKernel {
    fn dim(&self) -> usize;

    /// `log q(y | x)`.
    fn log_density(&self, y: &[f64], x: &[f64]) -> f64;

    /// Draws `y ~ q(. | x)` into `out`.
    fn sample<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R, out: &mut [f64]);

    /// Whether `q(y | x) == q(x | y)` holds identically.
    fn is_symmetric(&self) -> bool {
        false
    }

    fn density(&self, y: &[f64], x: &[f64]) -> f64 {
        self.log_density(y, x).exp()
    }
}

/// Gaussian random-walk kernel `N(x, diag(variances))`.
///
/// A zero variance degenerates to a point mass: sampling returns `x` in that
/// coordinate and the density is `+inf` on the diagonal and `0` elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    variances: Vec<f64>,
    std_devs: Vec<f64>,
    log_norm: f64,
}

impl GaussianKernel {
    pub fn isotropic(dim: usize, variance: f64) -> Result<Self> {
        Self::diagonal(vec![variance; dim])
    }

    pub fn diagonal(variances: Vec<f64>) -> Result<Self> {
        if variances.is_empty() {
            return Err(Error::invalid("Gaussian kernel needs at least one dimension"));
        }
        if variances.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("kernel variances must be finite and >= 0"));
        }
        let log_norm = -0.5 * variances.iter().map(|v| (2.0 * PI * v).ln()).sum::<f64>();
        let std_devs = variances.iter().map(|v| v.sqrt()).collect();
        Ok(Self {
            variances,
            std_devs,
            log_norm,
        })
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }
}

impl TransitionKernel for GaussianKernel {
    fn dim(&self) -> usize {
        self.variances.len()
    }

    fn log_density(&self, y: &[f64], x: &[f64]) -> f64 {
        let mut quad = 0.0;
        for ((yi, xi), v) in y.iter().zip(x).zip(&self.variances) {
            let d = yi - xi;
            if *v == 0.0 {
                if d != 0.0 {
                    return f64::NEG_INFINITY;
                }
                continue;
            }
            quad += d * d / v;
        }
        self.log_norm - 0.5 * quad
    }

    fn sample<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R, out: &mut [f64]) {
        for ((o, xi), s) in out.iter_mut().zip(x).zip(&self.std_devs) {
            let e: f64 = rng.sample(StandardNormal);
            *o = xi + s * e;
        }
    }

    fn is_symmetric(&self) -> bool {
        true
    }
}

/// Tabulated kernel on the integer-coded state space `{0, .., S-1}`.
///
/// States are one-element vectors holding the state index as an `f64`.
/// `table[to * S + from] = q(to | from)`; every column sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteKernel {
    states: usize,
    table: Vec<f64>,
}

impl FiniteKernel {
    /// Builds a kernel from a column-stochastic matrix `q[to][from]`.
    pub fn from_columns(q: Vec<Vec<f64>>) -> Result<Self> {
        let s = q.len();
        if s == 0 || q.iter().any(|row| row.len() != s) {
            return Err(Error::invalid("finite kernel must be a non-empty square matrix"));
        }
        let table: Vec<f64> = q.into_iter().flatten().collect();
        if table.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("finite kernel entries must be finite and >= 0"));
        }
        for from in 0..s {
            let col: f64 = (0..s).map(|to| table[to * s + from]).sum();
            if (col - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!(
                    "finite kernel column {from} sums to {col}, expected 1"
                )));
            }
        }
        Ok(Self { states: s, table })
    }

    /// Independence kernel `q(y | x) = p(y)`.
    pub fn independent(p: &[f64]) -> Result<Self> {
        let s = p.len();
        Self::from_columns((0..s).map(|to| vec![p[to]; s]).collect())
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn prob(&self, to: usize, from: usize) -> f64 {
        self.table[to * self.states + from]
    }

    /// Dense copy as `q[to][from]`.
    pub fn to_columns(&self) -> Vec<Vec<f64>> {
        (0..self.states)
            .map(|to| (0..self.states).map(|from| self.prob(to, from)).collect())
            .collect()
    }
}

/// Reads the integer state index out of a one-element state vector.
pub fn state_index(x: &[f64]) -> usize {
    debug_assert!(x.len() == 1 && x[0] >= 0.0 && x[0].fract() == 0.0);
    x[0] as usize
}

impl TransitionKernel for FiniteKernel {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, y: &[f64], x: &[f64]) -> f64 {
        self.prob(state_index(y), state_index(x)).ln()
    }

    fn sample<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R, out: &mut [f64]) {
        let from = state_index(x);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = self.states - 1;
        for to in 0..self.states {
            acc += self.prob(to, from);
            if u < acc {
                chosen = to;
                break;
            }
        }
        // Skip zero-probability trailing states if rounding left u >= acc.
        while self.prob(chosen, from) == 0.0 && chosen > 0 {
            chosen -= 1;
        }
        out[0] = chosen as f64;
    }

    fn is_symmetric(&self) -> bool {
        (0..self.states).all(|a| (0..a).all(|b| self.prob(a, b) == self.prob(b, a)))
    }
}
