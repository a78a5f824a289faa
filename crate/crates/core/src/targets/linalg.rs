use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest relative jitter `cholesky_jittered` tries before giving up.
pub const JITTER_CEILING: f64 = 1e-6;

/// Lower-triangular factor `L` with `L L^T = A + jitter_used * I`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    pub lower: DMatrix<f64>,
    /// Absolute amount added to the diagonal.
    pub jitter_used: f64,
}

impl CholeskyFactor {
    pub fn log_det(&self) -> f64 {
        2.0 * self.lower.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }
}

/// Plain Cholesky; `None` if `a` is not numerically positive definite.
pub fn cholesky(a: DMatrix<f64>) -> Option<CholeskyFactor> {
    a.cholesky().map(|c| CholeskyFactor {
        lower: c.unpack(),
        jitter_used: 0.0,
    })
}

/// Cholesky of `a + j * mean(diag a) * I`, with relative jitter `j` starting at
/// `base_jitter` and growing tenfold until the factorization succeeds or
/// exceeds [`JITTER_CEILING`].
pub fn cholesky_jittered(a: &DMatrix<f64>, base_jitter: f64) -> Result<CholeskyFactor> {
    let m = a.nrows();
    if m == 0 || a.ncols() != m {
        return Err(Error::invalid("cholesky_jittered needs a non-empty square matrix"));
    }
    let scale = a.diagonal().mean();
    let mut rel = base_jitter;
    while rel <= JITTER_CEILING * (1.0 + 1e-9) {
        let added = rel * scale;
        let mut shifted = a.clone();
        for i in 0..m {
            shifted[(i, i)] += added;
        }
        if let Some(c) = shifted.cholesky() {
            return Ok(CholeskyFactor {
                lower: c.unpack(),
                jitter_used: added,
            });
        }
        rel *= 10.0;
    }
    Err(Error::NotFactorizable {
        max_jitter: JITTER_CEILING,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_succeeds_on_first_attempt() {
        let f = cholesky_jittered(&DMatrix::identity(4, 4), 1e-10).unwrap();
        assert_eq!(f.jitter_used, 1e-10);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { (1.0f64 + 1e-10).sqrt() } else { 0.0 };
                assert!((f.lower[(i, j)] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let f = cholesky(a).unwrap();
        let expect = [2f64.sqrt(), 0.0, 1.0 / 2f64.sqrt(), 1.5f64.sqrt()];
        for (k, e) in expect.iter().enumerate() {
            assert!((f.lower[(k / 2, k % 2)] - e).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_one_needs_jitter() {
        let v = nalgebra::DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let a = &v * v.transpose();
        let f = cholesky_jittered(&a, 1e-10).unwrap();
        assert!(f.jitter_used > 0.0);
        let rebuilt = &f.lower * f.lower.transpose();
        for i in 0..3 {
            for j in 0..3 {
                let target = a[(i, j)] + if i == j { f.jitter_used } else { 0.0 };
                assert!((rebuilt[(i, j)] - target).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            cholesky_jittered(&a, 1e-10),
            Err(Error::NotFactorizable { .. })
        ));
    }
}
