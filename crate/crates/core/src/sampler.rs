//! The fully interacting ensemble step.
//!
//! One step on `x = (x_1, .., x_N)`:
//!
//! 1. pick `j` uniformly and draw `z ~ q(. | x_j)`;
//! 2. pick a walker `i` to delete with probability proportional to
//!    `[q(x_i | z) + sum_{k != i} q(x_i | x_k)] / pi(x_i)`;
//! 3. replace `x_i` by `z` with probability `min(1, Z(x, z) / Z(x', x_i))`,
//!    where `Z` is the sum of those numerators and `x'` is the proposed ensemble.
//!
//! The sums `sum_{k != i} q(x_i | x_k)` are cached per walker and updated in
//! `O(N)` after each accepted move, so a step costs `O(N)` kernel evaluations
//! and one target evaluation.

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::TransitionKernel;
use crate::rng::{log_add_exp, log_sum_exp};
use crate::targets::TargetDensity;

/// Full `O(N^2)` cache rebuild interval, in steps.
pub const DEFAULT_REBUILD_INTERVAL: u64 = 10_000;

/// An incremental update that cancels below this fraction of the pre-update
/// magnitude is recomputed directly.
const CANCELLATION_GUARD: f64 = 1e-3;

/// `N` walkers with cached log-densities and pairwise kernel sums.
#[derive(Debug, Clone)]
pub struct WalkerEnsemble {
    dim: usize,
    points: Vec<f64>,
    log_pi: Vec<f64>,
    kernel_sums: Vec<f64>,
    generation: u64,
    rebuild_interval: u64,
    since_rebuild: u64,
}

/// Normalized deletion weights for a proposed point `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightComputation {
    pub weights: Vec<f64>,
    /// `log Z(x, z)`; `Z` itself can leave the floating-point range.
    pub log_z: f64,
    /// `log` of each walker's numerator.
    pub log_numerators: Vec<f64>,
}

impl WeightComputation {
    pub fn z_value(&self) -> f64 {
        self.log_z.exp()
    }

    pub fn numerator(&self, i: usize) -> f64 {
        self.log_numerators[i].exp()
    }

    pub(crate) fn from_log_numerators(log_numerators: Vec<f64>) -> Result<Self> {
        if let Some(index) = log_numerators
            .iter()
            .position(|v| v.is_nan() || *v == f64::INFINITY)
        {
            return Err(Error::NonFiniteWeight { index });
        }
        let log_z = log_sum_exp(log_numerators.iter().copied());
        if log_z == f64::NEG_INFINITY {
            return Err(Error::DegenerateWeights);
        }
        let weights = log_numerators.iter().map(|l| (l - log_z).exp()).collect();
        Ok(Self {
            weights,
            log_z,
            log_numerators,
        })
    }

    /// Inverse-CDF draw with a single uniform.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        categorical_inverse_cdf(&self.weights, u)
    }
}

pub(crate) fn categorical_inverse_cdf(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the last partial sum
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1)
}

/// What happened in one ensemble step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub clone_index: usize,
    pub deletion_index: usize,
    pub proposed: Vec<f64>,
    pub accepted: bool,
    /// The deleted walker differs from the cloned one (counted at proposal time).
    pub teleported: bool,
    pub acceptance_probability: f64,
}

impl StepOutcome {
    pub(crate) fn auto_rejected(clone_index: usize, proposed: Vec<f64>) -> Self {
        Self {
            clone_index,
            deletion_index: clone_index,
            proposed,
            accepted: false,
            teleported: false,
            acceptance_probability: 0.0,
        }
    }
}

impl WalkerEnsemble {
    pub fn new<T, K>(walkers: &[Vec<f64>], target: &T, kernel: &K) -> Result<Self>
    where
        T: TargetDensity + ?Sized,
        K: TransitionKernel,
    {
        let dim = walkers.first().map(|w| w.len()).unwrap_or(0);
        if walkers.is_empty() || dim == 0 {
            return Err(Error::invalid("an ensemble needs at least one non-empty walker"));
        }
        if walkers.iter().any(|w| w.len() != dim) || kernel.dim() != dim || target.dim() != dim {
            return Err(Error::invalid("walker, target and kernel dimensions disagree"));
        }
        let points: Vec<f64> = walkers.iter().flatten().copied().collect();
        let log_pi: Vec<f64> = walkers.iter().map(|w| target.log_density(w)).collect();
        if let Some(i) = log_pi.iter().position(|l| !l.is_finite()) {
            return Err(Error::invalid(format!("walker {i} lies outside the target support")));
        }
        let mut ens = Self {
            dim,
            points,
            log_pi,
            kernel_sums: vec![0.0; walkers.len()],
            generation: 0,
            rebuild_interval: DEFAULT_REBUILD_INTERVAL,
            since_rebuild: 0,
        };
        ens.rebuild_caches(kernel);
        Ok(ens)
    }

    pub fn with_rebuild_interval(mut self, steps: u64) -> Self {
        self.rebuild_interval = steps.max(1);
        self
    }

    pub fn len(&self) -> usize {
        self.log_pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_pi.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn walker(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn walkers(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.walker(i).to_vec()).collect()
    }

    pub fn cached_log_pi(&self) -> &[f64] {
        &self.log_pi
    }

    pub fn cached_kernel_sums(&self) -> &[f64] {
        &self.kernel_sums
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Ensemble average of coordinate `coord`.
    pub fn coordinate_mean(&self, coord: usize) -> f64 {
        (0..self.len()).map(|i| self.walker(i)[coord]).sum::<f64>() / self.len() as f64
    }

    /// `sum_{k != i} q(x_i | x_k)` by the direct double loop.
    pub fn direct_kernel_sums<K: TransitionKernel>(&self, kernel: &K) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.direct_kernel_sum(i, kernel))
            .collect()
    }

    fn direct_kernel_sum<K: TransitionKernel>(&self, i: usize, kernel: &K) -> f64 {
        direct_kernel_sum(&self.points, self.dim, i, kernel)
    }

    pub fn rebuild_caches<K: TransitionKernel>(&mut self, kernel: &K) {
        self.kernel_sums = self.direct_kernel_sums(kernel);
        self.since_rebuild = 0;
    }

    /// `log q(x_l | z)` for every walker.
    fn log_q_to<K: TransitionKernel>(&self, z: &[f64], kernel: &K) -> Vec<f64> {
        (0..self.len())
            .map(|l| kernel.log_density(self.walker(l), z))
            .collect()
    }

    /// `log q(z | x_l)` for every walker, reusing `to` for symmetric kernels.
    fn log_q_from<K: TransitionKernel>(&self, z: &[f64], kernel: &K, to: &[f64]) -> Vec<f64> {
        if kernel.is_symmetric() {
            to.to_vec()
        } else {
            (0..self.len())
                .map(|l| kernel.log_density(z, self.walker(l)))
                .collect()
        }
    }

    fn forward_log_numerators(&self, log_q_to: &[f64]) -> Vec<f64> {
        log_q_to
            .iter()
            .zip(&self.kernel_sums)
            .zip(&self.log_pi)
            .map(|((lq, s), lp)| log_add_exp(s.ln(), *lq) - lp)
            .collect()
    }

    /// `log Z(x', x_i)` with `x'` the ensemble after replacing walker `i` by `z`.
    fn reverse_log_z(
        &self,
        i: usize,
        forward: &[f64],
        log_q_from: &[f64],
        log_pi_z: f64,
    ) -> f64 {
        // Walkers l != i keep their forward numerators: the old x_i moves into
        // the "proposed point" slot while z joins the ensemble.
        let replaced = log_sum_exp(log_q_from.iter().copied()) - log_pi_z;
        log_sum_exp(
            forward
                .iter()
                .enumerate()
                .map(|(l, v)| if l == i { replaced } else { *v }),
        )
    }

    /// Installs `z` at index `i` and patches the kernel-sum cache.
    fn install<K: TransitionKernel>(
        &mut self,
        i: usize,
        z: &[f64],
        log_pi_z: f64,
        log_q_to: &[f64],
        log_q_from: &[f64],
        kernel: &K,
    ) {
        replace_point(
            &mut self.points,
            self.dim,
            &mut self.kernel_sums,
            i,
            z,
            log_q_to,
            log_q_from,
            kernel,
        );
        self.log_pi[i] = log_pi_z;
    }

    fn finish_step<K: TransitionKernel>(&mut self, kernel: &K) {
        self.generation += 1;
        self.since_rebuild += 1;
        if self.since_rebuild >= self.rebuild_interval {
            self.rebuild_caches(kernel);
        }
    }
}

/// `sum_{k != i} q(p_i | p_k)` over the flat point array `points`.
pub(crate) fn direct_kernel_sum<K: TransitionKernel>(
    points: &[f64],
    dim: usize,
    i: usize,
    kernel: &K,
) -> f64 {
    let n = points.len() / dim;
    let xi = &points[i * dim..(i + 1) * dim];
    (0..n)
        .filter(|&k| k != i)
        .map(|k| kernel.density(xi, &points[k * dim..(k + 1) * dim]))
        .sum()
}

/// Replaces point `i` by `z` and updates every kernel sum in `O(N)`.
///
/// `log_q_to[k] = log q(p_k | z)` and `log_q_from[k] = log q(z | p_k)`.
/// Sums that lose most of their magnitude to cancellation are recomputed.
#[allow(clippy::too_many_arguments)]
pub(crate) fn replace_point<K: TransitionKernel>(
    points: &mut [f64],
    dim: usize,
    sums: &mut [f64],
    i: usize,
    z: &[f64],
    log_q_to: &[f64],
    log_q_from: &[f64],
    kernel: &K,
) {
    let old = points[i * dim..(i + 1) * dim].to_vec();
    let mut redo = Vec::new();
    for k in 0..sums.len() {
        if k == i {
            continue;
        }
        let added = log_q_to[k].exp();
        let removed = kernel.density(&points[k * dim..(k + 1) * dim], &old);
        let before = sums[k] + added;
        let after = before - removed;
        if after < CANCELLATION_GUARD * before || !after.is_finite() {
            redo.push(k);
        }
        sums[k] = after;
    }
    sums[i] = log_q_from
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != i)
        .map(|(_, l)| l.exp())
        .sum();
    points[i * dim..(i + 1) * dim].copy_from_slice(z);
    for k in redo {
        sums[k] = direct_kernel_sum(points, dim, k, kernel);
    }
}

/// Picks the walker to clone uniformly and moves the clone with the kernel.
pub fn propose_clone<K, R>(ens: &WalkerEnsemble, kernel: &K, rng: &mut R) -> (usize, Vec<f64>)
where
    K: TransitionKernel,
    R: Rng + ?Sized,
{
    let j = rng.random_range(0..ens.len());
    let mut z = vec![0.0; ens.dim()];
    kernel.sample(ens.walker(j), rng, &mut z);
    (j, z)
}

/// Deletion weights `w_i(x, z)` and their normalizer `Z(x, z)`.
pub fn importance_weights<K: TransitionKernel>(
    ens: &WalkerEnsemble,
    z: &[f64],
    kernel: &K,
) -> Result<WeightComputation> {
    let log_q_to = ens.log_q_to(z, kernel);
    WeightComputation::from_log_numerators(ens.forward_log_numerators(&log_q_to))
}

pub(crate) fn ratio_to_probability(log_forward: f64, log_reverse: f64) -> Result<f64> {
    if !log_forward.is_finite() || log_reverse.is_nan() || log_reverse == f64::NEG_INFINITY {
        return Err(Error::NonFiniteRatio {
            log_z_forward: log_forward,
            log_z_reverse: log_reverse,
        });
    }
    // log_reverse = +inf (z outside the support) gives probability 0
    Ok((log_forward - log_reverse).min(0.0).exp())
}

/// `min(1, Z(x, z) / Z(x', x_i))` for deleting walker `i` in favour of `z`.
pub fn acceptance_probability<T, K>(
    ens: &WalkerEnsemble,
    deletion_index: usize,
    z: &[f64],
    target: &T,
    kernel: &K,
) -> Result<f64>
where
    T: TargetDensity + ?Sized,
    K: TransitionKernel,
{
    if deletion_index >= ens.len() {
        return Err(Error::invalid(format!(
            "deletion index {deletion_index} out of range for {} walkers",
            ens.len()
        )));
    }
    let log_q_to = ens.log_q_to(z, kernel);
    let log_q_from = ens.log_q_from(z, kernel, &log_q_to);
    let forward = ens.forward_log_numerators(&log_q_to);
    let log_z = log_sum_exp(forward.iter().copied());
    let log_z_rev = ens.reverse_log_z(deletion_index, &forward, &log_q_from, target.log_density(z));
    ratio_to_probability(log_z, log_z_rev)
}

/// One full clone / delete / accept step.
///
/// A proposal outside the target support is rejected before the deletion
/// index is drawn, so it consumes no further randomness.
pub fn ensemble_step<T, K, R>(
    ens: &mut WalkerEnsemble,
    target: &T,
    kernel: &K,
    rng: &mut R,
) -> Result<StepOutcome>
where
    T: TargetDensity + ?Sized,
    K: TransitionKernel,
    R: Rng + ?Sized,
{
    let (j, z) = propose_clone(ens, kernel, rng);
    let log_pi_z = target.log_density(&z);
    if log_pi_z.is_nan() {
        return Err(Error::invalid("target log-density returned NaN"));
    }
    if log_pi_z == f64::NEG_INFINITY {
        ens.finish_step(kernel);
        return Ok(StepOutcome::auto_rejected(j, z));
    }

    let log_q_to = ens.log_q_to(&z, kernel);
    let weights = WeightComputation::from_log_numerators(ens.forward_log_numerators(&log_q_to))?;
    let i = weights.sample_index(rng);
    let log_q_from = ens.log_q_from(&z, kernel, &log_q_to);
    let log_z_rev = ens.reverse_log_z(i, &weights.log_numerators, &log_q_from, log_pi_z);
    let a = ratio_to_probability(weights.log_z, log_z_rev)?;
    let u: f64 = rng.random();
    let accepted = u < a;
    if accepted {
        ens.install(i, &z, log_pi_z, &log_q_to, &log_q_from, kernel);
    }
    ens.finish_step(kernel);
    Ok(StepOutcome {
        clone_index: j,
        deletion_index: i,
        proposed: z,
        accepted,
        teleported: i != j,
        acceptance_probability: a,
    })
}

/// Direct `log w_i`-numerators of the ensemble `points` for proposal `z`,
/// by the double loop and without any cache.
fn direct_log_numerators<T, K>(points: &[Vec<f64>], z: &[f64], target: &T, kernel: &K) -> Vec<f64>
where
    T: TargetDensity + ?Sized,
    K: TransitionKernel,
{
    (0..points.len())
        .map(|i| {
            let mut s = kernel.density(&points[i], z);
            for (k, xk) in points.iter().enumerate() {
                if k != i {
                    s += kernel.density(&points[i], xk);
                }
            }
            s.ln() - target.log_density(&points[i])
        })
        .collect()
}

/// Metropolis-Hastings ratio `Pi(x') Q(x | x') / (Pi(x) Q(x' | x))` evaluated
/// from the proposal likelihood
/// `Q(x' | x) = w_i(x, x'_i) (1/N) sum_k q(x'_i | x_k)`, without the
/// cancellations that reduce it to a ratio of normalizers.
///
/// Identical ensembles give 1.
pub fn full_mh_ratio_oracle<T, K>(
    current: &[Vec<f64>],
    proposed: &[Vec<f64>],
    target: &T,
    kernel: &K,
) -> Result<f64>
where
    T: TargetDensity + ?Sized,
    K: TransitionKernel,
{
    if current.len() != proposed.len() || current.is_empty() {
        return Err(Error::invalid("ensembles must be non-empty and of equal size"));
    }
    let diffs: Vec<usize> = (0..current.len())
        .filter(|&k| current[k] != proposed[k])
        .collect();
    let i = match diffs.as_slice() {
        [] => return Ok(1.0),
        [i] => *i,
        _ => return Err(Error::DiffersOnMultipleIndices { count: diffs.len() }),
    };
    let n = current.len() as f64;
    let z = &proposed[i];
    let x_i = &current[i];

    let log_proposal = |from: &[Vec<f64>], new_point: &[f64]| -> f64 {
        let nums = direct_log_numerators(from, new_point, target, kernel);
        let log_w = nums[i] - log_sum_exp(nums.iter().copied());
        let mixture: f64 = from.iter().map(|xk| kernel.density(new_point, xk)).sum::<f64>() / n;
        log_w + mixture.ln()
    };

    let log_ratio = target.log_density(z) - target.log_density(x_i) + log_proposal(proposed, x_i)
        - log_proposal(current, z);
    if log_ratio.is_nan() {
        return Err(Error::NonFiniteRatio {
            log_z_forward: f64::NAN,
            log_z_reverse: f64::NAN,
        });
    }
    Ok(log_ratio.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{FiniteKernel, GaussianKernel};
    use crate::rng::seeded;
    use crate::targets::{DoubleWellTarget, FiniteTarget};

    fn three_state() -> (FiniteTarget, FiniteKernel) {
        let target = FiniteTarget::new(&[0.5, 0.3, 0.2]).unwrap();
        let kernel = FiniteKernel::from_columns(vec![
            vec![0.6, 0.3, 0.1],
            vec![0.3, 0.4, 0.3],
            vec![0.1, 0.3, 0.6],
        ])
        .unwrap();
        (target, kernel)
    }

    fn s(i: usize) -> Vec<f64> {
        vec![i as f64]
    }

    #[test]
    fn single_walker_weight_is_one() {
        let t = DoubleWellTarget::new(5.0).unwrap();
        let k = GaussianKernel::isotropic(1, 0.04).unwrap();
        let ens = WalkerEnsemble::new(&[vec![0.3]], &t, &k).unwrap();
        for z in [-1.0, 0.0, 2.5] {
            let w = importance_weights(&ens, &[z], &k).unwrap();
            assert_eq!(w.weights, vec![1.0]);
        }
    }

    #[test]
    fn hand_evaluated_weights_three_states() {
        let (t, k) = three_state();
        // walkers (a, b), z = c
        let ens = WalkerEnsemble::new(&[s(0), s(1)], &t, &k).unwrap();
        let w = importance_weights(&ens, &s(2), &k).unwrap();
        // numerator_a = [q(a|c) + q(a|b)] / pi(a) = (0.1 + 0.3) / 0.5
        // numerator_b = [q(b|c) + q(b|a)] / pi(b) = (0.3 + 0.3) / 0.3
        let na = 0.4 / 0.5;
        let nb = 0.6 / 0.3;
        assert!((w.z_value() - (na + nb)).abs() < 1e-14);
        assert!((w.weights[0] - na / (na + nb)).abs() < 1e-14);
        assert!((w.weights[1] - nb / (na + nb)).abs() < 1e-14);
        let total: f64 = w.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for i in 0..2 {
            assert!((w.weights[i] * w.z_value() - w.numerator(i)).abs() < 1e-12 * w.numerator(i));
        }
    }

    #[test]
    fn single_walker_acceptance_is_metropolis_hastings() {
        let (t, k) = three_state();
        let ens = WalkerEnsemble::new(&[s(0)], &t, &k).unwrap();
        // min(1, pi(z) q(x|z) / (pi(x) q(z|x))) with x = a, z = c
        let expected = f64::min(1.0, 0.2 * 0.1 / (0.5 * 0.1));
        let a = acceptance_probability(&ens, 0, &s(2), &t, &k).unwrap();
        assert!((a - expected).abs() < 1e-14);
        let oracle = full_mh_ratio_oracle(&[s(0)], &[s(2)], &t, &k).unwrap();
        assert!((oracle - 0.2 * 0.1 / (0.5 * 0.1)).abs() < 1e-14);
    }

    #[test]
    fn identity_move_is_always_accepted() {
        let t = DoubleWellTarget::new(5.0).unwrap();
        let k = GaussianKernel::isotropic(1, 0.01).unwrap();
        let pts = vec![vec![-0.7], vec![0.1], vec![0.65]];
        let ens = WalkerEnsemble::new(&pts, &t, &k).unwrap();
        for i in 0..3 {
            let a = acceptance_probability(&ens, i, &pts[i], &t, &k).unwrap();
            assert!((a - 1.0).abs() < 1e-14);
        }
        assert_eq!(full_mh_ratio_oracle(&pts, &pts, &t, &k).unwrap(), 1.0);
    }

    #[test]
    fn oracle_rejects_multi_index_changes() {
        let (t, k) = three_state();
        let err = full_mh_ratio_oracle(&[s(0), s(1)], &[s(1), s(0)], &t, &k).unwrap_err();
        assert!(matches!(err, Error::DiffersOnMultipleIndices { count: 2 }));
    }

    #[test]
    fn deletion_index_out_of_range() {
        let (t, k) = three_state();
        let ens = WalkerEnsemble::new(&[s(0), s(1)], &t, &k).unwrap();
        assert!(acceptance_probability(&ens, 2, &s(0), &t, &k).is_err());
    }

    #[test]
    fn single_walker_always_clones_index_zero() {
        let t = DoubleWellTarget::new(1.0).unwrap();
        let k = GaussianKernel::isotropic(1, 0.1).unwrap();
        let ens = WalkerEnsemble::new(&[vec![0.2]], &t, &k).unwrap();
        let mut rng = seeded(1);
        for _ in 0..100 {
            assert_eq!(propose_clone(&ens, &k, &mut rng).0, 0);
        }
    }

    #[test]
    fn zero_width_kernel_proposes_the_clone() {
        let t = DoubleWellTarget::new(1.0).unwrap();
        let k = GaussianKernel::isotropic(1, 0.0).unwrap();
        let ens = WalkerEnsemble::new(&[vec![0.7]], &t, &k).unwrap();
        let (_, z) = propose_clone(&ens, &k, &mut seeded(2));
        assert_eq!(z, vec![0.7]);
    }

    #[test]
    fn identity_kernel_never_changes_the_ensemble() {
        let t = FiniteTarget::new(&[0.5, 0.3, 0.2]).unwrap();
        let k = FiniteKernel::from_columns(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let mut ens = WalkerEnsemble::new(&[s(0), s(1), s(2)], &t, &k).unwrap();
        let before = ens.walkers();
        let mut rng = seeded(4);
        for _ in 0..200 {
            let out = ensemble_step(&mut ens, &t, &k, &mut rng).unwrap();
            assert_eq!(out.proposed, before[out.clone_index]);
            assert!((out.acceptance_probability - 1.0).abs() < 1e-14);
            assert!(out.accepted);
            assert_eq!(out.deletion_index, out.clone_index);
        }
        assert_eq!(ens.walkers(), before);
    }

    #[test]
    fn proposals_outside_support_are_rejected_without_drawing() {
        struct PositiveHalf;
        impl TargetDensity for PositiveHalf {
            fn dim(&self) -> usize {
                1
            }
            fn log_density(&self, x: &[f64]) -> f64 {
                if x[0] > 0.0 {
                    -x[0]
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
        let k = GaussianKernel::isotropic(1, 1.0).unwrap();
        let mut ens = WalkerEnsemble::new(&[vec![0.01], vec![0.02]], &PositiveHalf, &k).unwrap();
        let mut rng = seeded(9);
        let mut rejected = 0;
        for _ in 0..500 {
            let out = ensemble_step(&mut ens, &PositiveHalf, &k, &mut rng).unwrap();
            if out.proposed[0] <= 0.0 {
                assert!(!out.accepted && !out.teleported);
                rejected += 1;
            }
            assert!(ens.cached_log_pi().iter().all(|l| l.is_finite()));
        }
        assert!(rejected > 0);
    }

    #[test]
    fn caches_track_direct_recomputation() {
        let t = DoubleWellTarget::new(5.0).unwrap();
        let k = GaussianKernel::isotropic(1, 0.0625).unwrap();
        let init: Vec<Vec<f64>> = (0..20).map(|i| vec![-1.0 + 0.1 * i as f64]).collect();
        let mut ens = WalkerEnsemble::new(&init, &t, &k)
            .unwrap()
            .with_rebuild_interval(u64::MAX);
        let mut rng = seeded(21);
        for _ in 0..10_000 {
            ensemble_step(&mut ens, &t, &k, &mut rng).unwrap();
        }
        let direct = ens.direct_kernel_sums(&k);
        for (c, d) in ens.cached_kernel_sums().iter().zip(&direct) {
            assert!((c - d).abs() <= 1e-8 * d.abs(), "{c} vs {d}");
        }
        for i in 0..ens.len() {
            let lp = t.log_density(ens.walker(i));
            assert!((ens.cached_log_pi()[i] - lp).abs() <= 1e-12 * lp.abs().max(1e-300));
        }
        assert_eq!(ens.generation(), 10_000);
    }
}
