//! Target log-densities: the double well, the Gaussian-process hyperparameter
//! posteriors, and tabulated finite-state targets, together with the priors
//! and the dense linear algebra they need.

mod bartlett;
mod dist;
mod double_well;
mod finite;
mod gp;
mod linalg;

pub use bartlett::{bartlett_log_prior, BartlettMatrix};
pub use dist::{
    chi_log_pdf, dist_log_pdf, half_cauchy_log_pdf, standard_normal_log_pdf, student_t_log_pdf,
    Family,
};
pub use double_well::{double_well_log, DoubleWellTarget};
pub use finite::{FiniteProductTarget, FiniteTarget};
pub use gp::{
    f_true, generate_synthetic_data, gp_gaussian_logpost, gp_nongaussian_grad_w,
    gp_nongaussian_logpost, se_kernel_matrix, GpDataset, GpHyper, GpMultivariateTarget,
    GpNonGaussianTarget, GpUnivariateHyper, GpUnivariateTarget, KernelMetric, WhitenedState,
    NONGAUSSIAN_DOF, PRIOR_SCALE,
};
pub use linalg::{cholesky, cholesky_jittered, CholeskyFactor, JITTER_CEILING};

/// Unnormalized log-density `log pi(x)`; returns `-inf` outside the support.
pub trait TargetDensity {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[f64]) -> f64;
}

impl<T: TargetDensity + ?Sized> TargetDensity for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        (**self).log_density(x)
    }
}

/// A target on a product space `X1 x X2` with state `(u, v)`.
///
/// `condition` precomputes everything that depends on `u` alone, so that
/// evaluating `pi(u, v)` for many `v` (or `pi(z, v_l)` for every walker `l`)
/// does not repeat that work.
pub trait SplitTarget {
    type Conditioned;

    fn u_dim(&self) -> usize;
    fn v_dim(&self) -> usize;

    /// `None` when `pi(u, .)` vanishes identically.
    fn condition(&self, u: &[f64]) -> Option<Self::Conditioned>;

    fn log_density_given(&self, cond: &Self::Conditioned, u: &[f64], v: &[f64]) -> f64;

    fn log_density(&self, u: &[f64], v: &[f64]) -> f64 {
        match self.condition(u) {
            Some(c) => self.log_density_given(&c, u, v),
            None => f64::NEG_INFINITY,
        }
    }
}

/// Views an ordinary target on `R^(du + dv)` as a split target, with `u` the
/// leading `du` coordinates.
#[derive(Debug, Clone)]
pub struct SplitAt<T> {
    pub target: T,
    pub u_dim: usize,
}

impl<T: TargetDensity> SplitAt<T> {
    pub fn new(target: T, u_dim: usize) -> Self {
        assert!(u_dim <= target.dim());
        Self { target, u_dim }
    }
}

impl<T: TargetDensity> SplitTarget for SplitAt<T> {
    type Conditioned = ();

    fn u_dim(&self) -> usize {
        self.u_dim
    }

    fn v_dim(&self) -> usize {
        self.target.dim() - self.u_dim
    }

    fn condition(&self, _u: &[f64]) -> Option<()> {
        Some(())
    }

    fn log_density_given(&self, _: &(), u: &[f64], v: &[f64]) -> f64 {
        if v.is_empty() {
            return self.target.log_density(u);
        }
        let mut x = Vec::with_capacity(u.len() + v.len());
        x.extend_from_slice(u);
        x.extend_from_slice(v);
        self.target.log_density(&x)
    }
}
