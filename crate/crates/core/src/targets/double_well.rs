use super::TargetDensity;

/// `-beta (x^4 - x^2)`.
pub fn double_well_log(x: f64, beta: f64) -> f64 {
    let x2 = x * x;
    -beta * (x2 * x2 - x2)
}

/// The one-dimensional double well `pi(x) = exp(-beta (x^4 - x^2))`, modes at
/// `+-sqrt(1/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleWellTarget {
    beta: f64,
}

impl DoubleWellTarget {
    pub fn new(beta: f64) -> Option<Self> {
        (beta > 0.0 && beta.is_finite()).then_some(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl TargetDensity for DoubleWellTarget {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        double_well_log(x[0], self.beta)
    }
}
