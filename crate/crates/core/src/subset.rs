//! Interaction on a block of variables.
//!
//! The state of each walker is split as `(u, v)`. The interacting stage is the
//! clone / delete / accept step on the `u`-block, with the weight of walker `l`
//! multiplied by `pi(z, v_l) / pi(u_l, v_l)`. The independent stage runs
//! ordinary Metropolis-Hastings on each `v_i` with `u_i` held fixed. Only
//! interacting-stage attempts count as steps; inner-sweep work is tallied
//! separately.

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::TransitionKernel;
use crate::rng::{log_add_exp, log_sum_exp, substream};
use crate::sampler::{
    direct_kernel_sum, ratio_to_probability, replace_point, StepOutcome, WeightComputation,
    DEFAULT_REBUILD_INTERVAL,
};
use crate::targets::SplitTarget;

/// Deletion weights of the interacting stage; same layout as the fully
/// interacting case.
pub type SubsetWeightComputation = WeightComputation;

/// `N` walkers on `X1 x X2` with the per-walker conditioned target.
pub struct SplitEnsemble<C> {
    u_dim: usize,
    v_dim: usize,
    u_points: Vec<f64>,
    v_points: Vec<f64>,
    conds: Vec<C>,
    log_pi: Vec<f64>,
    kernel_sums: Vec<f64>,
    generation: u64,
    rebuild_interval: u64,
    since_rebuild: u64,
    inner_proposed: u64,
    inner_accepted: u64,
}

/// Per-walker tallies from one independent sweep.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SweepStats {
    pub proposed: Vec<u64>,
    pub accepted: Vec<u64>,
}

impl SweepStats {
    pub fn total_accepted(&self) -> u64 {
        self.accepted.iter().sum()
    }

    pub fn total_proposed(&self) -> u64 {
        self.proposed.iter().sum()
    }
}

impl<C> SplitEnsemble<C> {
    pub fn new<T, K>(u_walkers: &[Vec<f64>], v_walkers: &[Vec<f64>], target: &T, kernel: &K) -> Result<Self>
    where
        T: SplitTarget<Conditioned = C>,
        K: TransitionKernel,
    {
        let n = u_walkers.len();
        if n == 0 || v_walkers.len() != n {
            return Err(Error::invalid("need the same, non-zero number of u and v walkers"));
        }
        let (du, dv) = (target.u_dim(), target.v_dim());
        if du == 0 || kernel.dim() != du {
            return Err(Error::invalid("u-kernel dimension must match a non-empty u-block"));
        }
        if u_walkers.iter().any(|u| u.len() != du) || v_walkers.iter().any(|v| v.len() != dv) {
            return Err(Error::invalid("walker block sizes disagree with the target"));
        }
        let mut conds = Vec::with_capacity(n);
        let mut log_pi = Vec::with_capacity(n);
        for (i, (u, v)) in u_walkers.iter().zip(v_walkers).enumerate() {
            let c = target
                .condition(u)
                .ok_or_else(|| Error::invalid(format!("walker {i} lies outside the target support")))?;
            let lp = target.log_density_given(&c, u, v);
            if !lp.is_finite() {
                return Err(Error::invalid(format!("walker {i} lies outside the target support")));
            }
            conds.push(c);
            log_pi.push(lp);
        }
        let mut ens = Self {
            u_dim: du,
            v_dim: dv,
            u_points: u_walkers.iter().flatten().copied().collect(),
            v_points: v_walkers.iter().flatten().copied().collect(),
            conds,
            log_pi,
            kernel_sums: vec![0.0; n],
            generation: 0,
            rebuild_interval: DEFAULT_REBUILD_INTERVAL,
            since_rebuild: 0,
            inner_proposed: 0,
            inner_accepted: 0,
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

    pub fn u_dim(&self) -> usize {
        self.u_dim
    }

    pub fn v_dim(&self) -> usize {
        self.v_dim
    }

    pub fn u_walker(&self, i: usize) -> &[f64] {
        &self.u_points[i * self.u_dim..(i + 1) * self.u_dim]
    }

    pub fn v_walker(&self, i: usize) -> &[f64] {
        &self.v_points[i * self.v_dim..(i + 1) * self.v_dim]
    }

    pub fn u_walkers(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.u_walker(i).to_vec()).collect()
    }

    pub fn v_walkers(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.v_walker(i).to_vec()).collect()
    }

    pub fn cached_log_pi(&self) -> &[f64] {
        &self.log_pi
    }

    pub fn cached_u_kernel_sums(&self) -> &[f64] {
        &self.kernel_sums
    }

    /// Interacting-stage attempts so far.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Inner Metropolis proposals and acceptances summed over all sweeps.
    pub fn inner_counts(&self) -> (u64, u64) {
        (self.inner_proposed, self.inner_accepted)
    }

    /// Ensemble average of `u`-coordinate `coord`.
    pub fn u_coordinate_mean(&self, coord: usize) -> f64 {
        (0..self.len()).map(|i| self.u_walker(i)[coord]).sum::<f64>() / self.len() as f64
    }

    pub fn direct_u_kernel_sums<K: TransitionKernel>(&self, kernel: &K) -> Vec<f64> {
        (0..self.len())
            .map(|i| direct_kernel_sum(&self.u_points, self.u_dim, i, kernel))
            .collect()
    }

    pub fn rebuild_caches<K: TransitionKernel>(&mut self, kernel: &K) {
        self.kernel_sums = self.direct_u_kernel_sums(kernel);
        self.since_rebuild = 0;
    }

    fn finish_step<K: TransitionKernel>(&mut self, kernel: &K) {
        self.generation += 1;
        self.since_rebuild += 1;
        if self.since_rebuild >= self.rebuild_interval {
            self.rebuild_caches(kernel);
        }
    }
}

/// Everything the interacting stage needs about a proposed `z`.
struct Proposal<C> {
    cond: C,
    /// `log pi(z, v_l)` for every walker.
    log_pi_z: Vec<f64>,
    log_q_to: Vec<f64>,
    log_q_from: Vec<f64>,
    weights: WeightComputation,
}

impl<C> SplitEnsemble<C> {
    /// Weight factor applied to walker `l`; with an empty `v`-block it is a
    /// common constant and is dropped so the step coincides with the fully
    /// interacting one.
    fn factor(&self, log_value: f64) -> f64 {
        if self.v_dim == 0 {
            0.0
        } else {
            log_value
        }
    }

    /// `Ok(None)` when `pi(z, .)` vanishes at every walker's `v`.
    fn evaluate_proposal<T, K>(&self, z: &[f64], target: &T, kernel: &K) -> Result<Option<Proposal<C>>>
    where
        T: SplitTarget<Conditioned = C>,
        K: TransitionKernel,
    {
        let Some(cond) = target.condition(z) else {
            return Ok(None);
        };
        let n = self.len();
        let log_pi_z: Vec<f64> = (0..n)
            .map(|l| target.log_density_given(&cond, z, self.v_walker(l)))
            .collect();
        if log_pi_z.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("target log-density returned NaN"));
        }
        if log_pi_z.iter().all(|v| *v == f64::NEG_INFINITY) {
            return Ok(None);
        }
        let log_q_to: Vec<f64> = (0..n)
            .map(|l| kernel.log_density(self.u_walker(l), z))
            .collect();
        let log_q_from = if kernel.is_symmetric() {
            log_q_to.clone()
        } else {
            (0..n).map(|l| kernel.log_density(z, self.u_walker(l))).collect()
        };
        let numerators: Vec<f64> = (0..n)
            .map(|l| {
                log_add_exp(self.kernel_sums[l].ln(), log_q_to[l]) - self.log_pi[l]
                    + self.factor(log_pi_z[l])
            })
            .collect();
        let weights = WeightComputation::from_log_numerators(numerators)?;
        Ok(Some(Proposal {
            cond,
            log_pi_z,
            log_q_to,
            log_q_from,
            weights,
        }))
    }

    fn acceptance_for<T>(&self, i: usize, p: &Proposal<C>, target: &T) -> Result<f64>
    where
        T: SplitTarget<Conditioned = C>,
    {
        let ui = self.u_walker(i);
        let n = self.len();
        let log_z_rev = log_sum_exp((0..n).map(|l| {
            if l == i {
                log_sum_exp(p.log_q_from.iter().copied()) - p.log_pi_z[i] + self.factor(self.log_pi[i])
            } else {
                let g = self.factor(target.log_density_given(&self.conds[i], ui, self.v_walker(l)));
                log_add_exp(self.kernel_sums[l].ln(), p.log_q_to[l]) - self.log_pi[l] + g
            }
        }));
        let prefactor = self.factor(self.log_pi[i]) - self.factor(p.log_pi_z[i]);
        ratio_to_probability(p.weights.log_z + prefactor, log_z_rev)
    }
}

/// Deletion weights `w_{v,i}(u, z)`; `DegenerateWeights` if `pi(z, v_l)`
/// vanishes for every walker.
pub fn subset_weights<C, T, K>(ens: &SplitEnsemble<C>, z: &[f64], target: &T, kernel: &K) -> Result<SubsetWeightComputation>
where
    T: SplitTarget<Conditioned = C>,
    K: TransitionKernel,
{
    match ens.evaluate_proposal(z, target, kernel)? {
        Some(p) => Ok(p.weights),
        None => Err(Error::DegenerateWeights),
    }
}

/// Interacting-stage acceptance probability for deleting walker `i` in favour
/// of `z`; zero when `pi(z, v_i)` vanishes.
pub fn subset_acceptance_probability<C, T, K>(
    ens: &SplitEnsemble<C>,
    deletion_index: usize,
    z: &[f64],
    target: &T,
    kernel: &K,
) -> Result<f64>
where
    T: SplitTarget<Conditioned = C>,
    K: TransitionKernel,
{
    if deletion_index >= ens.len() {
        return Err(Error::invalid("deletion index out of range"));
    }
    match ens.evaluate_proposal(z, target, kernel)? {
        Some(p) if p.log_pi_z[deletion_index] > f64::NEG_INFINITY => {
            ens.acceptance_for(deletion_index, &p, target)
        }
        _ => Ok(0.0),
    }
}

/// One clone / delete / accept attempt on the `u`-block.
pub fn interacting_step<C, T, K, R>(ens: &mut SplitEnsemble<C>, target: &T, kernel: &K, rng: &mut R) -> Result<StepOutcome>
where
    T: SplitTarget<Conditioned = C>,
    K: TransitionKernel,
    R: Rng + ?Sized,
{
    let j = rng.random_range(0..ens.len());
    let mut z = vec![0.0; ens.u_dim];
    kernel.sample(ens.u_walker(j), rng, &mut z);
    let Some(p) = ens.evaluate_proposal(&z, target, kernel)? else {
        ens.finish_step(kernel);
        return Ok(StepOutcome::auto_rejected(j, z));
    };
    let i = p.weights.sample_index(rng);
    let a = ens.acceptance_for(i, &p, target)?;
    let u: f64 = rng.random();
    let accepted = u < a;
    if accepted {
        let du = ens.u_dim;
        replace_point(
            &mut ens.u_points,
            du,
            &mut ens.kernel_sums,
            i,
            &z,
            &p.log_q_to,
            &p.log_q_from,
            kernel,
        );
        ens.log_pi[i] = p.log_pi_z[i];
        ens.conds[i] = p.cond;
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

/// Metropolis-Hastings acceptance probability for moving `v` to `v_new` with
/// `u` fixed and proposal `r`.
pub fn sweep_acceptance_probability<T, K>(target: &T, u: &[f64], v: &[f64], v_new: &[f64], v_kernel: &K) -> f64
where
    T: SplitTarget,
    K: TransitionKernel,
{
    let Some(c) = target.condition(u) else {
        return 0.0;
    };
    let from = target.log_density_given(&c, u, v);
    let to = target.log_density_given(&c, u, v_new);
    mh_probability(from, to, v, v_new, v_kernel)
}

fn mh_probability<K: TransitionKernel>(from: f64, to: f64, v: &[f64], v_new: &[f64], v_kernel: &K) -> f64 {
    if to == f64::NEG_INFINITY || to.is_nan() {
        return 0.0;
    }
    let mut log_ratio = to - from;
    if !v_kernel.is_symmetric() {
        log_ratio += v_kernel.log_density(v, v_new) - v_kernel.log_density(v_new, v);
    }
    log_ratio.min(0.0).exp()
}

/// `n_inner` Metropolis steps on every `v_i`, each walker on its own
/// sub-stream keyed by one draw from `rng`. A no-op with an empty `v`-block.
pub fn independent_sweep<C, T, K, R>(
    ens: &mut SplitEnsemble<C>,
    target: &T,
    v_kernel: &K,
    n_inner: usize,
    rng: &mut R,
) -> Result<SweepStats>
where
    T: SplitTarget<Conditioned = C>,
    K: TransitionKernel,
    R: Rng + ?Sized,
{
    if n_inner == 0 {
        return Err(Error::invalid("n_inner must be at least 1"));
    }
    let n = ens.len();
    let mut stats = SweepStats {
        proposed: vec![0; n],
        accepted: vec![0; n],
    };
    let dv = ens.v_dim;
    if dv == 0 {
        return Ok(stats);
    }
    if v_kernel.dim() != dv {
        return Err(Error::invalid("v-kernel dimension must match the v-block"));
    }
    let key: u64 = rng.random();
    let mut v_new = vec![0.0; dv];
    for i in 0..n {
        let mut stream = substream(key, i as u64);
        let u = ens.u_points[i * ens.u_dim..(i + 1) * ens.u_dim].to_vec();
        for _ in 0..n_inner {
            let v = &ens.v_points[i * dv..(i + 1) * dv];
            v_kernel.sample(v, &mut stream, &mut v_new);
            let to = target.log_density_given(&ens.conds[i], &u, &v_new);
            if to.is_nan() {
                return Err(Error::invalid("target log-density returned NaN"));
            }
            let a = mh_probability(ens.log_pi[i], to, v, &v_new, v_kernel);
            let draw: f64 = stream.random();
            stats.proposed[i] += 1;
            if draw < a {
                ens.v_points[i * dv..(i + 1) * dv].copy_from_slice(&v_new);
                ens.log_pi[i] = to;
                stats.accepted[i] += 1;
            }
        }
    }
    ens.inner_proposed += stats.total_proposed();
    ens.inner_accepted += stats.total_accepted();
    Ok(stats)
}

/// One interacting attempt followed by one independent sweep.
pub fn alternating_step<C, T, KU, KV, R>(
    ens: &mut SplitEnsemble<C>,
    target: &T,
    u_kernel: &KU,
    v_kernel: &KV,
    n_inner: usize,
    rng: &mut R,
) -> Result<StepOutcome>
where
    T: SplitTarget<Conditioned = C>,
    KU: TransitionKernel,
    KV: TransitionKernel,
    R: Rng + ?Sized,
{
    if n_inner == 0 {
        return Err(Error::invalid("n_inner must be at least 1"));
    }
    let outcome = interacting_step(ens, target, u_kernel, rng)?;
    independent_sweep(ens, target, v_kernel, n_inner, rng)?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{FiniteKernel, GaussianKernel};
    use crate::rng::seeded;
    use crate::sampler::{acceptance_probability, ensemble_step, importance_weights, WalkerEnsemble};
    use crate::targets::{DoubleWellTarget, FiniteProductTarget, FiniteTarget, SplitAt};

    fn u_kernel() -> FiniteKernel {
        FiniteKernel::from_columns(vec![vec![0.7, 0.4], vec![0.3, 0.6]]).unwrap()
    }

    fn product_target() -> SplitAt<FiniteProductTarget> {
        SplitAt::new(
            FiniteProductTarget::new(&[vec![0.1, 0.3], vec![0.4, 0.2]]).unwrap(),
            1,
        )
    }

    #[test]
    fn hand_evaluated_subset_weights() {
        let t = product_target();
        let k = u_kernel();
        // walkers (u, v) = (0, 1), (1, 0); z = 1
        let ens = SplitEnsemble::new(&[vec![0.0], vec![1.0]], &[vec![1.0], vec![0.0]], &t, &k).unwrap();
        let w = subset_weights(&ens, &[1.0], &t, &k).unwrap();
        // numerator_0 = pi(1,1) [q(0|1) + q(0|1)] / pi(0,1) = 0.2 * 0.8 / 0.3
        // numerator_1 = pi(1,0) [q(1|1) + q(1|0)] / pi(1,0) = 0.6 + 0.3
        let n0 = 0.2 * 0.8 / 0.3;
        let n1 = 0.9;
        assert!((w.z_value() - (n0 + n1)).abs() < 1e-14);
        assert!((w.weights[0] - n0 / (n0 + n1)).abs() < 1e-14);
    }

    #[test]
    fn v_independent_target_matches_full_interaction() {
        struct Flat(FiniteTarget);
        impl SplitTarget for Flat {
            type Conditioned = ();
            fn u_dim(&self) -> usize {
                1
            }
            fn v_dim(&self) -> usize {
                1
            }
            fn condition(&self, _: &[f64]) -> Option<()> {
                Some(())
            }
            fn log_density_given(&self, _: &(), u: &[f64], _: &[f64]) -> f64 {
                use crate::targets::TargetDensity;
                self.0.log_density(u)
            }
        }
        let pi = FiniteTarget::new(&[0.5, 0.3, 0.2]).unwrap();
        let k = FiniteKernel::from_columns(vec![
            vec![0.6, 0.3, 0.1],
            vec![0.3, 0.4, 0.3],
            vec![0.1, 0.3, 0.6],
        ])
        .unwrap();
        let split = Flat(pi.clone());
        let us = vec![vec![0.0], vec![1.0], vec![1.0]];
        let vs = vec![vec![0.3], vec![-1.2], vec![7.0]];
        let sub = SplitEnsemble::new(&us, &vs, &split, &k).unwrap();
        let full = WalkerEnsemble::new(&us, &pi, &k).unwrap();
        for z in 0..3 {
            let z = [z as f64];
            let a = subset_weights(&sub, &z, &split, &k).unwrap();
            let b = importance_weights(&full, &z, &k).unwrap();
            for (x, y) in a.weights.iter().zip(&b.weights) {
                assert!((x - y).abs() < 1e-14);
            }
            for i in 0..3 {
                let a = subset_acceptance_probability(&sub, i, &z, &split, &k).unwrap();
                let b = acceptance_probability(&full, i, &z, &pi, &k).unwrap();
                assert!((a - b).abs() < 1e-13 * b.max(1e-300), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn identity_move_is_accepted() {
        let t = product_target();
        let k = u_kernel();
        let ens = SplitEnsemble::new(&[vec![0.0], vec![1.0]], &[vec![1.0], vec![0.0]], &t, &k).unwrap();
        for i in 0..2 {
            let a = subset_acceptance_probability(&ens, i, ens.u_walker(i), &t, &k).unwrap();
            assert!((a - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_inner_steps_is_rejected() {
        let t = product_target();
        let k = u_kernel();
        let mut ens = SplitEnsemble::new(&[vec![0.0]], &[vec![1.0]], &t, &k).unwrap();
        let mut rng = seeded(0);
        assert!(independent_sweep(&mut ens, &t, &k, 0, &mut rng).is_err());
        assert!(alternating_step(&mut ens, &t, &k, &k, 0, &mut rng).is_err());
    }

    #[test]
    fn empty_v_block_reproduces_the_full_step() {
        let target = DoubleWellTarget::new(5.0).unwrap();
        let split = SplitAt::new(&target, 1);
        let k = GaussianKernel::isotropic(1, 0.04).unwrap();
        let vk = GaussianKernel::isotropic(1, 1.0).unwrap();
        let init: Vec<Vec<f64>> = (0..7).map(|i| vec![-0.9 + 0.25 * i as f64]).collect();
        let empty = vec![Vec::new(); init.len()];
        let mut full = WalkerEnsemble::new(&init, &target, &k).unwrap();
        let mut sub = SplitEnsemble::new(&init, &empty, &split, &k).unwrap();
        let mut r1 = seeded(77);
        let mut r2 = seeded(77);
        for _ in 0..5000 {
            let a = ensemble_step(&mut full, &target, &k, &mut r1).unwrap();
            let b = alternating_step(&mut sub, &split, &k, &vk, 30, &mut r2).unwrap();
            assert_eq!(a, b);
        }
        assert_eq!(full.walkers(), sub.u_walkers());
    }

    #[test]
    fn flat_conditional_accepts_every_inner_move() {
        struct UOnly;
        impl SplitTarget for UOnly {
            type Conditioned = ();
            fn u_dim(&self) -> usize {
                1
            }
            fn v_dim(&self) -> usize {
                2
            }
            fn condition(&self, _: &[f64]) -> Option<()> {
                Some(())
            }
            fn log_density_given(&self, _: &(), u: &[f64], _: &[f64]) -> f64 {
                -u[0] * u[0]
            }
        }
        let k = GaussianKernel::isotropic(1, 0.1).unwrap();
        let vk = GaussianKernel::isotropic(2, 0.5).unwrap();
        let mut ens = SplitEnsemble::new(&[vec![0.0], vec![0.5]], &vec![vec![0.0, 0.0]; 2], &UOnly, &k).unwrap();
        let stats = independent_sweep(&mut ens, &UOnly, &vk, 1, &mut seeded(3)).unwrap();
        assert_eq!(stats.accepted, vec![1, 1]);
        assert_eq!(ens.inner_counts(), (2, 2));
    }
}
