use statrs::function::gamma::ln_gamma;
use std::f64::consts::{LN_2, PI};

/// One-dimensional families used as priors and noise models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// Cauchy(0, scale) truncated to the positive reals.
    HalfCauchy { scale: f64 },
    /// Centered Student-t with `nu` degrees of freedom.
    StudentT { nu: f64, scale: f64 },
    StandardNormal,
    /// Chi distribution with `k` degrees of freedom.
    Chi { k: f64 },
}

pub fn dist_log_pdf(family: Family, x: f64) -> f64 {
    match family {
        Family::HalfCauchy { scale } => half_cauchy_log_pdf(x, scale),
        Family::StudentT { nu, scale } => student_t_log_pdf(x, nu, scale),
        Family::StandardNormal => standard_normal_log_pdf(x),
        Family::Chi { k } => chi_log_pdf(x, k),
    }
}

pub fn half_cauchy_log_pdf(x: f64, scale: f64) -> f64 {
    if !(x > 0.0) || !x.is_finite() {
        return f64::NEG_INFINITY;
    }
    let r = x / scale;
    (2.0 / (PI * scale)).ln() - r.mul_add(r, 1.0).ln()
}

pub fn student_t_log_pdf(x: f64, nu: f64, scale: f64) -> f64 {
    if !x.is_finite() {
        return f64::NEG_INFINITY;
    }
    let r = x / scale;
    ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln() - scale.ln()
        - 0.5 * (nu + 1.0) * (r * r / nu).ln_1p()
}

pub fn standard_normal_log_pdf(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * (2.0 * PI).ln()
}

pub fn chi_log_pdf(x: f64, k: f64) -> f64 {
    if !(x > 0.0) || !x.is_finite() {
        return f64::NEG_INFINITY;
    }
    (1.0 - 0.5 * k) * LN_2 - ln_gamma(0.5 * k) + (k - 1.0) * x.ln() - 0.5 * x * x
}
