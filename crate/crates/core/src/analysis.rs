//! Exact checks on finite state spaces.
//!
//! Ensemble transition matrices are built by enumerating every clone index,
//! proposal, deletion index and accept/reject outcome, reusing the sampler's
//! own weight and acceptance functions. Matrices are column-stochastic,
//! `P[to][from]`, so stationarity reads `P Pi = Pi`.

use nalgebra::{Complex, DMatrix, DVector, Schur, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::FiniteKernel;
use crate::meanfield::{
    euler_integrate, fit_decay_rate, DecayFit, Dynamics, FitWindow, Grid, GridDensity, GridKernel,
    IntegrationOptions,
};
use crate::sampler::{acceptance_probability, importance_weights, WalkerEnsemble};
use crate::subset::{subset_acceptance_probability, subset_weights, sweep_acceptance_probability, SplitEnsemble};
use crate::targets::{FiniteProductTarget, FiniteTarget, SplitAt};

/// Largest ensemble state space the enumerators accept.
pub const MAX_ENUMERATED_STATES: usize = 10_000;

/// A target and a strictly positive column-stochastic kernel on `S` states.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteInstance {
    pi: Vec<f64>,
    /// `q[to][from]`.
    q: Vec<Vec<f64>>,
}

impl FiniteInstance {
    pub fn new(pi: Vec<f64>, q: Vec<Vec<f64>>) -> Result<Self> {
        let s = pi.len();
        if s < 2 || q.len() != s || q.iter().any(|r| r.len() != s) {
            return Err(Error::invalid("need at least two states and a square kernel"));
        }
        if pi.iter().any(|p| !(*p > 0.0)) || (pi.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("pi must be strictly positive and sum to 1"));
        }
        if q.iter().flatten().any(|v| !(*v > 0.0)) {
            return Err(Error::invalid("the kernel must be strictly positive"));
        }
        for h in 0..s {
            let c: f64 = (0..s).map(|g| q[g][h]).sum();
            if (c - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("kernel column {h} sums to {c}")));
            }
        }
        Ok(Self { pi, q })
    }

    /// Random instance with entries drawn from `[0.05, 1)` before normalization.
    pub fn random<R: Rng + ?Sized>(states: usize, rng: &mut R) -> Result<Self> {
        let pi = random_density(states, rng);
        let mut q = vec![vec![0.0; states]; states];
        for h in 0..states {
            let col = random_density(states, rng);
            for g in 0..states {
                q[g][h] = col[g];
            }
        }
        Self::new(pi, q)
    }

    /// The kernel whose every column is `pi`.
    pub fn perfect(pi: Vec<f64>) -> Result<Self> {
        let q = pi.iter().map(|p| vec![*p; pi.len()]).collect();
        Self::new(pi, q)
    }

    pub fn states(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn q(&self) -> &[Vec<f64>] {
        &self.q
    }

    /// `(Q rho)_x = sum_y q[x][y] rho_y`.
    pub fn apply_q(&self, rho: &[f64]) -> Vec<f64> {
        self.q
            .iter()
            .map(|row| row.iter().zip(rho).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn q_pi(&self) -> Vec<f64> {
        self.apply_q(&self.pi)
    }

    /// `max_x pi(x) / (Q pi)(x)`.
    pub fn rate_bound(&self) -> f64 {
        self.pi
            .iter()
            .zip(self.q_pi())
            .map(|(p, qp)| p / qp)
            .fold(0.0, f64::max)
    }

    /// Same target with the Metropolis-corrected kernel.
    pub fn metropolized(&self) -> Self {
        let s = self.states();
        let mut q = vec![vec![0.0; s]; s];
        for h in 0..s {
            let mut off = 0.0;
            for g in 0..s {
                if g != h {
                    q[g][h] = self.q[g][h].min(self.pi[g] * self.q[h][g] / self.pi[h]);
                    off += q[g][h];
                }
            }
            q[h][h] = 1.0 - off;
        }
        Self {
            pi: self.pi.clone(),
            q,
        }
    }

    pub fn target(&self) -> FiniteTarget {
        FiniteTarget::new(&self.pi).expect("validated on construction")
    }

    pub fn kernel(&self) -> FiniteKernel {
        FiniteKernel::from_columns(self.q.clone()).expect("validated on construction")
    }

    pub fn grid_kernel(&self) -> GridKernel {
        GridKernel::from_dense(&self.q, 1.0).expect("validated on construction")
    }
}

/// Strictly positive probability vector with entries drawn from `[0.05, 1)`
/// before normalization.
pub fn random_density<R: Rng + ?Sized>(states: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..states).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Row-major `(x_1, .., x_N)` with `x_1` the least significant digit.
pub fn decode_ensemble(index: usize, states: usize, walkers: usize) -> Vec<usize> {
    let mut r = index;
    (0..walkers)
        .map(|_| {
            let d = r % states;
            r /= states;
            d
        })
        .collect()
}

pub fn encode_ensemble(digits: &[usize], states: usize) -> usize {
    digits.iter().rev().fold(0, |acc, d| acc * states + d)
}

fn ensemble_size(states: usize, walkers: usize) -> Result<usize> {
    let total = (0..walkers).try_fold(1usize, |acc, _| acc.checked_mul(states));
    match total {
        Some(t) if t <= MAX_ENUMERATED_STATES && walkers >= 1 => Ok(t),
        Some(t) => Err(Error::TooLarge {
            states: t,
            limit: MAX_ENUMERATED_STATES,
        }),
        None => Err(Error::TooLarge {
            states: usize::MAX,
            limit: MAX_ENUMERATED_STATES,
        }),
    }
}

/// Product measure `prod_k p(x_k)` over the enumerated ensemble states.
pub fn product_distribution(p: &[f64], walkers: usize) -> Result<Vec<f64>> {
    let total = ensemble_size(p.len(), walkers)?;
    Ok((0..total)
        .map(|idx| {
            decode_ensemble(idx, p.len(), walkers)
                .iter()
                .map(|d| p[*d])
                .product()
        })
        .collect())
}

/// `max_x |(P Pi)(x) - Pi(x)|`.
pub fn stationarity_error(p: &[Vec<f64>], dist: &[f64]) -> f64 {
    p.iter()
        .zip(dist)
        .map(|(row, d)| (row.iter().zip(dist).map(|(a, b)| a * b).sum::<f64>() - d).abs())
        .fold(0.0, f64::max)
}

/// Largest deviation of a column sum from 1.
pub fn column_sum_error(p: &[Vec<f64>]) -> f64 {
    let n = p.len();
    (0..n)
        .map(|h| ((0..n).map(|g| p[g][h]).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

fn state_points(digits: &[usize]) -> Vec<Vec<f64>> {
    digits.iter().map(|d| vec![*d as f64]).collect()
}

/// One-step matrix of the `N`-walker chain on `X^N`.
pub fn exact_ensemble_transition_matrix(inst: &FiniteInstance, walkers: usize) -> Result<Vec<Vec<f64>>> {
    let s = inst.states();
    let total = ensemble_size(s, walkers)?;
    let target = inst.target();
    let kernel = inst.kernel();
    let mut p = vec![vec![0.0; total]; total];
    let inv_n = 1.0 / walkers as f64;
    for from in 0..total {
        let digits = decode_ensemble(from, s, walkers);
        let ens = WalkerEnsemble::new(&state_points(&digits), &target, &kernel)?;
        for j in 0..walkers {
            for z in 0..s {
                let zp = [z as f64];
                let prop = inv_n * kernel.prob(z, digits[j]);
                let w = importance_weights(&ens, &zp, &kernel)?;
                for (i, wi) in w.weights.iter().enumerate() {
                    if *wi == 0.0 {
                        continue;
                    }
                    let a = acceptance_probability(&ens, i, &zp, &target, &kernel)?;
                    let mut next = digits.clone();
                    next[i] = z;
                    let to = encode_ensemble(&next, s);
                    p[to][from] += prop * wi * a;
                    p[from][from] += prop * wi * (1.0 - a);
                }
            }
        }
    }
    Ok(p)
}

/// Joint table on `X1 x X2` with kernels for each block; walker state `(a, b)`
/// is numbered `a + |X1| b`.
#[derive(Debug, Clone)]
pub struct FiniteProductInstance {
    pub joint: Vec<Vec<f64>>,
    pub u_kernel: FiniteKernel,
    pub v_kernel: FiniteKernel,
}

impl FiniteProductInstance {
    pub fn random<R: Rng + ?Sized>(u_states: usize, v_states: usize, rng: &mut R) -> Result<Self> {
        let flat = random_density(u_states * v_states, rng);
        let joint = (0..u_states)
            .map(|a| (0..v_states).map(|b| flat[a + u_states * b]).collect())
            .collect();
        let u = FiniteInstance::random(u_states, rng)?;
        let v = FiniteInstance::random(v_states, rng)?;
        Ok(Self {
            joint,
            u_kernel: u.kernel(),
            v_kernel: v.kernel(),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.joint.len(), self.joint[0].len())
    }

    /// Single-walker distribution in walker-state numbering.
    pub fn walker_distribution(&self) -> Vec<f64> {
        let (su, sv) = self.shape();
        (0..su * sv).map(|k| self.joint[k % su][k / su]).collect()
    }

    fn target(&self) -> Result<SplitAt<FiniteProductTarget>> {
        Ok(SplitAt::new(FiniteProductTarget::new(&self.joint)?, 1))
    }
}

/// One interacting-stage attempt on the `u`-block, enumerated.
pub fn interacting_stage_matrix(inst: &FiniteProductInstance, walkers: usize) -> Result<Vec<Vec<f64>>> {
    let (su, _) = inst.shape();
    let s = su * inst.shape().1;
    let total = ensemble_size(s, walkers)?;
    let target = inst.target()?;
    let kernel = &inst.u_kernel;
    let mut p = vec![vec![0.0; total]; total];
    let inv_n = 1.0 / walkers as f64;
    for from in 0..total {
        let digits = decode_ensemble(from, s, walkers);
        let us: Vec<Vec<f64>> = digits.iter().map(|d| vec![(d % su) as f64]).collect();
        let vs: Vec<Vec<f64>> = digits.iter().map(|d| vec![(d / su) as f64]).collect();
        let ens = SplitEnsemble::new(&us, &vs, &target, kernel)?;
        for j in 0..walkers {
            for z in 0..su {
                let zp = [z as f64];
                let prop = inv_n * kernel.prob(z, digits[j] % su);
                let w = subset_weights(&ens, &zp, &target, kernel)?;
                for (i, wi) in w.weights.iter().enumerate() {
                    if *wi == 0.0 {
                        continue;
                    }
                    let a = subset_acceptance_probability(&ens, i, &zp, &target, kernel)?;
                    let mut next = digits.clone();
                    next[i] = z + su * (digits[i] / su);
                    let to = encode_ensemble(&next, s);
                    p[to][from] += prop * wi * a;
                    p[from][from] += prop * wi * (1.0 - a);
                }
            }
        }
    }
    Ok(p)
}

/// `n_inner` Metropolis steps on every walker's `v`, enumerated.
pub fn sweep_stage_matrix(inst: &FiniteProductInstance, walkers: usize, n_inner: usize) -> Result<Vec<Vec<f64>>> {
    if n_inner == 0 {
        return Err(Error::invalid("n_inner must be at least 1"));
    }
    let (su, sv) = inst.shape();
    let s = su * sv;
    let total = ensemble_size(s, walkers)?;
    let target = inst.target()?;
    // single-walker v-moves for each fixed u
    let mut single = DMatrix::<f64>::zeros(s, s);
    for a in 0..su {
        let mut t = DMatrix::<f64>::zeros(sv, sv);
        for b in 0..sv {
            let mut stay = 1.0;
            for b2 in 0..sv {
                if b2 == b {
                    continue;
                }
                let acc = sweep_acceptance_probability(
                    &target,
                    &[a as f64],
                    &[b as f64],
                    &[b2 as f64],
                    &inst.v_kernel,
                );
                let m = inst.v_kernel.prob(b2, b) * acc;
                t[(b2, b)] = m;
                stay -= m;
            }
            t[(b, b)] = stay;
        }
        let mut power = DMatrix::<f64>::identity(sv, sv);
        for _ in 0..n_inner {
            power = &t * &power;
        }
        for b in 0..sv {
            for b2 in 0..sv {
                single[(a + su * b2, a + su * b)] = power[(b2, b)];
            }
        }
    }
    let mut p = vec![vec![0.0; total]; total];
    for from in 0..total {
        let fd = decode_ensemble(from, s, walkers);
        for (to, row) in p.iter_mut().enumerate() {
            let td = decode_ensemble(to, s, walkers);
            row[from] = fd.iter().zip(&td).map(|(f, t)| single[(*t, *f)]).product();
        }
    }
    Ok(p)
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

/// The linearization of the nonlinear dynamics at `pi`:
/// `J = Qpi (Qpi/pi)^T - diag(Qpi/pi) + Qpi 1^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMatrix {
    pub matrix: DMatrix<f64>,
    pi: Vec<f64>,
    q_pi: Vec<f64>,
}

/// Orthonormal basis (as columns) of the complement of `v`, taken from the
/// Householder reflection that maps `e_1` onto the direction of `v`.
pub fn complement_basis(v: &[f64]) -> DMatrix<f64> {
    let n = v.len();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut w = DVector::from_iterator(n, v.iter().map(|x| x / norm));
    let sign = if w[0] >= 0.0 { 1.0 } else { -1.0 };
    w[0] += sign;
    let ww = w.dot(&w);
    let h = DMatrix::<f64>::identity(n, n) - (&w * w.transpose()) * (2.0 / ww);
    h.columns(1, n - 1).into_owned()
}

pub fn jacobian(inst: &FiniteInstance) -> JacobianMatrix {
    let s = inst.states();
    let pi = inst.pi().to_vec();
    let q_pi = inst.q_pi();
    let matrix = DMatrix::from_fn(s, s, |x, y| {
        let diag = if x == y { q_pi[x] / pi[x] } else { 0.0 };
        q_pi[x] * q_pi[y] / pi[y] - diag + q_pi[x]
    });
    JacobianMatrix { matrix, pi, q_pi }
}

impl JacobianMatrix {
    pub fn apply(&self, eta: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(eta)).iter().copied().collect()
    }

    /// `J` on `{eta : sum eta = 0}` in an orthonormal basis of that hyperplane.
    pub fn restricted(&self) -> DMatrix<f64> {
        let b = complement_basis(&vec![1.0; self.pi.len()]);
        b.transpose() * &self.matrix * b
    }

    /// `D^-1 J D` with `D = diag(sqrt(pi))`, without the term that vanishes on
    /// `{f : sum f sqrt(pi) = 0}`, restricted to that hyperplane. Symmetric.
    pub fn symmetrized_restricted(&self) -> DMatrix<f64> {
        let s = self.pi.len();
        let sq: Vec<f64> = self.pi.iter().map(|p| p.sqrt()).collect();
        let m = DMatrix::from_fn(s, s, |x, y| {
            let diag = if x == y { self.q_pi[x] / self.pi[x] } else { 0.0 };
            self.q_pi[x] / sq[x] * self.q_pi[y] / sq[y] - diag
        });
        let b = complement_basis(&sq);
        let r = b.transpose() * m * &b;
        (&r + r.transpose()) * 0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Eigenvalues on the constraint hyperplane, ascending.
    pub eigenvalues: Vec<f64>,
    /// Largest `|imag|` among eigenvalues of the unsymmetrized restriction.
    pub max_imag: f64,
    /// Largest gap between the two routes' real parts.
    pub route_mismatch: f64,
    pub max_eigenvalue: f64,
    /// `-1 / max_eigenvalue`.
    pub alpha: f64,
    /// `max pi / Q pi`.
    pub bound: f64,
    pub pass: bool,
}

/// Eigenvalues of a general real matrix via a bounded Schur iteration.
/// Near-multiple eigenvalues (a Metropolized kernel gives exactly `-I`) can
/// make the unbounded iteration cycle, so a looser tolerance is tried before
/// giving up with NaN entries.
fn general_eigenvalues(m: DMatrix<f64>) -> Vec<Complex<f64>> {
    for eps in [f64::EPSILON, 1e-13] {
        if let Some(schur) = Schur::try_new(m.clone(), eps, 100_000) {
            return schur.complex_eigenvalues().iter().copied().collect();
        }
    }
    vec![Complex::new(f64::NAN, f64::NAN); m.nrows()]
}

pub fn jacobian_spectrum_check(inst: &FiniteInstance) -> SpectrumReport {
    let j = jacobian(inst);
    let sym = SymmetricEigen::new(j.symmetrized_restricted());
    let mut eigenvalues: Vec<f64> = sym.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let complex = general_eigenvalues(j.restricted());
    let max_imag = if complex.iter().all(|c| c.im.is_finite()) {
        complex.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    } else {
        f64::NAN
    };
    let mut re: Vec<f64> = complex.iter().map(|c| c.re).collect();
    re.sort_by(f64::total_cmp);
    let route_mismatch = re
        .iter()
        .zip(&eigenvalues)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let max_eigenvalue = eigenvalues.last().copied().unwrap_or(f64::NAN);
    let alpha = -1.0 / max_eigenvalue;
    let bound = inst.rate_bound();
    let pass = max_imag < 1e-10 && max_eigenvalue < 0.0 && alpha <= bound + 1e-10;
    SpectrumReport {
        eigenvalues,
        max_imag,
        route_mismatch,
        max_eigenvalue,
        alpha,
        bound,
        pass,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRatioReport {
    /// `Var_rho(pi / rho)`.
    pub var_rho: f64,
    /// `Var_{Q rho}(pi / rho)`.
    pub var_q_rho: f64,
    /// `var_rho / var_q_rho`, `NaN` when both vanish.
    pub ratio: f64,
    /// `max rho / Q rho`.
    pub bound: f64,
    /// `rho = pi`: both variances are zero.
    pub degenerate: bool,
    pub pass: bool,
}

fn weighted_variance(w: &[f64], f: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    let mean = w.iter().zip(f).map(|(a, b)| a * b).sum::<f64>() / total;
    w.iter().zip(f).map(|(a, b)| a * (b - mean).powi(2)).sum::<f64>() / total
}

pub fn variance_ratio_bound_check(inst: &FiniteInstance, rho: &[f64]) -> Result<VarianceRatioReport> {
    if rho.len() != inst.states() || rho.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::invalid("rho must be strictly positive on every state"));
    }
    let f: Vec<f64> = inst.pi().iter().zip(rho).map(|(p, r)| p / r).collect();
    let q_rho = inst.apply_q(rho);
    let var_rho = weighted_variance(rho, &f);
    let var_q_rho = weighted_variance(&q_rho, &f);
    let bound = rho.iter().zip(&q_rho).map(|(r, q)| r / q).fold(0.0, f64::max);
    let degenerate = var_q_rho == 0.0 && var_rho == 0.0;
    let pass = degenerate || (var_q_rho > 0.0 && var_rho <= (bound + 1e-12) * var_q_rho);
    Ok(VarianceRatioReport {
        var_rho,
        var_q_rho,
        ratio: if degenerate { f64::NAN } else { var_rho / var_q_rho },
        bound,
        degenerate,
        pass,
    })
}

/// Integrates the nonlinear dynamics on the finite space from `rho0` and fits
/// the decay rate of `chi^2(pi || rho_t)` over the tail window.
pub fn chi2_decay_rate(inst: &FiniteInstance, rho0: &[f64], dt: f64, t_end: f64) -> Result<DecayFit> {
    let grid = Grid::finite(inst.states())?;
    let pi = GridDensity::new(grid.clone(), inst.pi().to_vec())?;
    let rho = GridDensity::normalized(grid, rho0.to_vec())?;
    let traj = euler_integrate(
        Dynamics::Nonlinear,
        &rho,
        &pi,
        &inst.grid_kernel(),
        &IntegrationOptions::new(dt, t_end),
    )?;
    fit_decay_rate(&traj.times(), &traj.chi2_series(), FitWindow::Tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn single_walker_matrix_is_metropolis() {
        let mut rng = seeded(5);
        let inst = FiniteInstance::random(2, &mut rng).unwrap();
        let p = exact_ensemble_transition_matrix(&inst, 1).unwrap();
        let m = inst.metropolized();
        for g in 0..2 {
            for h in 0..2 {
                assert!((p[g][h] - m.q()[g][h]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn perfect_kernel_refreshes_one_walker_per_step() {
        let inst = FiniteInstance::perfect(vec![0.5, 0.3, 0.2]).unwrap();
        let p1 = exact_ensemble_transition_matrix(&inst, 1).unwrap();
        for row in 0..3 {
            for col in 0..3 {
                assert!((p1[row][col] - inst.pi()[row]).abs() < 1e-12);
            }
        }
        // N = 2: a uniformly chosen walker is redrawn from pi
        let p = exact_ensemble_transition_matrix(&inst, 2).unwrap();
        for from in 0..9 {
            let f = decode_ensemble(from, 3, 2);
            for to in 0..9 {
                let t = decode_ensemble(to, 3, 2);
                let keep0 = if t[0] == f[0] { inst.pi()[t[1]] } else { 0.0 };
                let keep1 = if t[1] == f[1] { inst.pi()[t[0]] } else { 0.0 };
                assert!((p[to][from] - 0.5 * (keep0 + keep1)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn enumeration_guard() {
        let inst = FiniteInstance::perfect(vec![0.25; 4]).unwrap();
        assert!(matches!(
            exact_ensemble_transition_matrix(&inst, 7),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn metropolized_jacobian_is_minus_identity() {
        let mut rng = seeded(8);
        let inst = FiniteInstance::random(5, &mut rng).unwrap().metropolized();
        let j = jacobian(&inst);
        for _ in 0..10 {
            let mut eta: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m = eta.iter().sum::<f64>() / 5.0;
            eta.iter_mut().for_each(|e| *e -= m);
            for (a, b) in j.apply(&eta).iter().zip(&eta) {
                assert!((a + b).abs() < 1e-12);
            }
        }
        let r = jacobian_spectrum_check(&inst);
        assert!(r.pass);
        assert!(r.eigenvalues.iter().all(|e| (e + 1.0).abs() < 1e-10));
    }

    #[test]
    fn two_state_eigenvalue_by_hand() {
        let mut rng = seeded(13);
        let inst = FiniteInstance::random(2, &mut rng).unwrap();
        // on eta = (1, -1): (J eta)_0 = q0 (q0/p0 - q1/p1) - q0/p0
        let (p, q) = (inst.pi(), inst.q_pi());
        let lambda = q[0] * (q[0] / p[0] - q[1] / p[1]) - q[0] / p[0];
        let r = jacobian_spectrum_check(&inst);
        assert_eq!(r.eigenvalues.len(), 1);
        assert!((r.eigenvalues[0] - lambda).abs() < 1e-12);
    }

    #[test]
    fn jacobian_preserves_the_constraint() {
        let mut rng = seeded(21);
        for _ in 0..100 {
            let inst = FiniteInstance::random(4, &mut rng).unwrap();
            let j = jacobian(&inst);
            let mut eta: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m = eta.iter().sum::<f64>() / 4.0;
            eta.iter_mut().for_each(|e| *e -= m);
            assert!(j.apply(&eta).iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_must_be_strictly_positive() {
        let q = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(FiniteInstance::new(vec![0.5, 0.5], q).is_err());
    }

    #[test]
    fn variance_ratio_cases() {
        let inst = FiniteInstance::perfect(vec![0.5, 0.3, 0.2]).unwrap();
        let fixed = variance_ratio_bound_check(&inst, &[0.5, 0.3, 0.2]).unwrap();
        assert!(fixed.degenerate && fixed.pass);
        let r = variance_ratio_bound_check(&inst, &[0.2, 0.2, 0.6]).unwrap();
        // Q rho = pi for the perfect kernel
        let f = [2.5, 1.5, 0.2 / 0.6];
        let var_pi = weighted_variance(&[0.5, 0.3, 0.2], &f);
        assert!((r.var_q_rho - var_pi).abs() < 1e-14);
        assert!(r.pass);
    }

    #[test]
    fn householder_basis_is_orthonormal_and_orthogonal() {
        let v = [0.3, -1.2, 0.5, 2.0];
        let b = complement_basis(&v);
        let g = b.transpose() * &b;
        assert!((g - DMatrix::<f64>::identity(3, 3)).abs().max() < 1e-14);
        let vt = DVector::from_column_slice(&v).transpose() * &b;
        assert!(vt.abs().max() < 1e-14);
    }
}
