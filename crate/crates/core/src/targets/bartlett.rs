use nalgebra::DMatrix;

use super::dist::{chi_log_pdf, standard_normal_log_pdf};

/// Lower-triangular Bartlett factor `Z` with positive diagonal `c_i` and free
/// strict-lower entries `z_ij`; `Z Z^T` is the kernel metric.
///
/// Parameters are packed row by row over the lower triangle:
/// `c_1, z_21, c_2, z_31, z_32, c_3, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct BartlettMatrix {
    n: usize,
    packed: Vec<f64>,
}

pub(crate) fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

fn packed_index(i: usize, j: usize) -> usize {
    debug_assert!(j <= i);
    i * (i + 1) / 2 + j
}

impl BartlettMatrix {
    pub fn from_packed(n: usize, packed: &[f64]) -> Self {
        assert_eq!(packed.len(), packed_len(n), "packed Bartlett length mismatch");
        Self {
            n,
            packed: packed.to_vec(),
        }
    }

    /// `scale * I`.
    pub fn scaled_identity(n: usize, scale: f64) -> Self {
        let mut packed = vec![0.0; packed_len(n)];
        for i in 0..n {
            packed[packed_index(i, i)] = scale;
        }
        Self { n, packed }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn packed(&self) -> &[f64] {
        &self.packed
    }

    /// Entry `(i, j)` (0-based); zero above the diagonal.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.packed[packed_index(i, j)]
        }
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.get(i, i)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// `|Z^T d|^2 = d^T Z Z^T d`.
    pub fn quadratic_form(&self, d: &[f64]) -> f64 {
        let mut total = 0.0;
        for col in 0..self.n {
            let mut s = 0.0;
            for row in col..self.n {
                s += self.get(row, col) * d[row];
            }
            total += s * s;
        }
        total
    }
}

/// Log-density of the Bartlett factor of a `W_n(I, n)` matrix:
/// `z_ij ~ N(0, 1)` below the diagonal, `c_i ~ chi(n - i + 1)` (1-based `i`).
pub fn bartlett_log_prior(z: &BartlettMatrix) -> f64 {
    let n = z.n;
    let mut total = 0.0;
    for i in 0..n {
        let c = z.diag(i);
        if !(c > 0.0) {
            return f64::NEG_INFINITY;
        }
        total += chi_log_pdf(c, (n - i) as f64);
        for j in 0..i {
            total += standard_normal_log_pdf(z.get(i, j));
        }
    }
    total
}
