use super::TargetDensity;
use crate::error::{Error, Result};
use crate::kernel::state_index;

/// Tabulated target on `{0, .., S-1}`; states are one-element vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteTarget {
    log_p: Vec<f64>,
}

impl FiniteTarget {
    /// `p` need not be normalized but must be strictly positive.
    pub fn new(p: &[f64]) -> Result<Self> {
        if p.is_empty() || p.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("finite target needs strictly positive entries"));
        }
        Ok(Self {
            log_p: p.iter().map(|v| v.ln()).collect(),
        })
    }

    pub fn states(&self) -> usize {
        self.log_p.len()
    }
}

impl TargetDensity for FiniteTarget {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.log_p[state_index(x)]
    }
}

/// Tabulated target on `{0..S1} x {0..S2}`; states are `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteProductTarget {
    s2: usize,
    log_p: Vec<f64>,
}

impl FiniteProductTarget {
    /// `p[a][b]`, strictly positive.
    pub fn new(p: &[Vec<f64>]) -> Result<Self> {
        let s2 = p.first().map_or(0, |r| r.len());
        if s2 == 0 || p.iter().any(|r| r.len() != s2) {
            return Err(Error::invalid("product target must be a non-empty rectangle"));
        }
        if p.iter().flatten().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("product target needs strictly positive entries"));
        }
        Ok(Self {
            s2,
            log_p: p.iter().flatten().map(|v| v.ln()).collect(),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.log_p.len() / self.s2, self.s2)
    }
}

impl TargetDensity for FiniteProductTarget {
    fn dim(&self) -> usize {
        2
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let a = state_index(&x[..1]);
        let b = state_index(&x[1..2]);
        self.log_p[a * self.s2 + b]
    }
}
