//! Large-`N` density dynamics on a uniform 1-D grid.
//!
//! The nonlinear evolution is
//! `rho' = Q rho - (rho / pi) Q rho / Z_rho` with `Z_rho = int (Q rho / pi) rho dx`,
//! and the linear baseline is the Metropolized chain `rho' = Q~ rho - rho`.
//! Integrals use the node rule with weight `dx`. A grid with `dx = 1` over
//! `S` nodes doubles as a finite state space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::targets::double_well_log;

/// Tolerated undershoot below zero before the integrator aborts.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-8;

/// Kernel entries whose exponent falls below this are dropped; they sit
/// more than twenty orders of magnitude under the diagonal entry.
const KERNEL_EXPONENT_FLOOR: f64 = -50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    lower: f64,
    upper: f64,
    points: usize,
    dx: f64,
}

impl Grid {
    pub fn new(lower: f64, upper: f64, points: usize) -> Result<Self> {
        if points < 2 || !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::invalid("a grid needs at least two points on a finite interval"));
        }
        Ok(Self {
            lower,
            upper,
            points,
            dx: (upper - lower) / (points - 1) as f64,
        })
    }

    /// `states` nodes at `0, 1, .., states - 1` with unit spacing.
    pub fn finite(states: usize) -> Result<Self> {
        Self::new(0.0, states as f64 - 1.0, states)
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    /// Node `g`, built from the nearer end so that a symmetric interval has
    /// exactly mirrored nodes.
    pub fn node(&self, g: usize) -> f64 {
        let last = self.points - 1;
        if 2 * g == last {
            0.5 * (self.lower + self.upper)
        } else if 2 * g < last {
            self.lower + g as f64 * self.dx
        } else {
            self.upper - (last - g) as f64 * self.dx
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|g| self.node(g)).collect()
    }
}

/// Nodal values of a probability density.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    grid: Grid,
    values: Vec<f64>,
}

impl GridDensity {
    /// Takes the values as given; they must integrate to 1 within `1e-10`.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let d = Self::unchecked(grid, values)?;
        if (d.mass() - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!("density has mass {}", d.mass())));
        }
        Ok(d)
    }

    /// Rescales nonnegative values to unit mass.
    pub fn normalized(grid: Grid, mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid("density values must be finite and nonnegative"));
        }
        let mass: f64 = values.iter().sum::<f64>() * grid.dx;
        if mass <= 0.0 {
            return Err(Error::invalid("density has zero mass"));
        }
        values.iter_mut().for_each(|v| *v /= mass);
        Self::unchecked(grid, values)
    }

    /// Evaluates `exp(log_f)` at the nodes, shifted by the maximum, and normalizes.
    pub fn from_log_fn(grid: Grid, log_f: impl Fn(f64) -> f64) -> Result<Self> {
        let logs: Vec<f64> = grid.nodes().into_iter().map(log_f).collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::normalized(grid, logs.iter().map(|l| (l - max).exp()).collect())
    }

    fn unchecked(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid("density length must match the grid"));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `pi(x) ∝ exp(-beta (x^4 - x^2))` on the grid.
pub fn double_well_density(grid: &Grid, beta: f64) -> Result<GridDensity> {
    GridDensity::from_log_fn(grid.clone(), |x| double_well_log(x, beta))
}

/// Mixture placing 90% of the mass near `-sqrt(1/2)` and 10% near `+sqrt(1/2)`,
/// with exponent `10 beta (x -+ sqrt(1/2))^2`.
pub fn double_well_initial(grid: &Grid, beta: f64) -> Result<GridDensity> {
    let m = 0.5f64.sqrt();
    let values = grid
        .nodes()
        .into_iter()
        .map(|x| {
            0.9 * (-10.0 * beta * (x + m).powi(2)).exp() + 0.1 * (-10.0 * beta * (x - m).powi(2)).exp()
        })
        .collect();
    GridDensity::normalized(grid.clone(), values)
}

/// A column-stochastic operator `Q[to][from]` on a grid, stored as one
/// contiguous band per row: `Q rho (x_g) = sum_h Q[g][h] rho(x_h) dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridKernel {
    dx: f64,
    starts: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl GridKernel {
    /// From a dense `q[to][from]`; each column must integrate to 1 within `1e-12`.
    pub fn from_dense(q: &[Vec<f64>], dx: f64) -> Result<Self> {
        let n = q.len();
        if n == 0 || q.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("kernel matrix must be square"));
        }
        if q.iter().flatten().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid("kernel entries must be finite and nonnegative"));
        }
        let k = Self {
            dx,
            starts: vec![0; n],
            rows: q.to_vec(),
        };
        for (h, s) in k.column_masses().iter().enumerate() {
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("column {h} integrates to {s}")));
            }
        }
        Ok(k)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn get(&self, to: usize, from: usize) -> f64 {
        let s = self.starts[to];
        if from < s {
            return 0.0;
        }
        self.rows[to].get(from - s).copied().unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n).map(|g| (0..n).map(|h| self.get(g, h)).collect()).collect()
    }

    /// `sum_g Q[g][h] dx` for every column `h`.
    pub fn column_masses(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (g, row) in self.rows.iter().enumerate() {
            for (o, v) in row.iter().enumerate() {
                out[self.starts[g] + o] += v;
            }
        }
        out.iter_mut().for_each(|v| *v *= self.dx);
        out
    }

    pub fn apply_into(&self, rho: &[f64], out: &mut [f64]) {
        for (g, row) in self.rows.iter().enumerate() {
            let s = self.starts[g];
            let seg = &rho[s..s + row.len()];
            out[g] = self.dx * row.iter().zip(seg).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    pub fn apply(&self, rho: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.apply_into(rho, &mut out);
        out
    }
}

/// Gaussian proposal `Q[g][h] ∝ exp(-(x_g - x_h)^2 / (2 sigma^2))`, each column
/// renormalized on the grid so boundary truncation keeps unit mass.
pub fn build_grid_kernel(grid: &Grid, sigma: f64) -> Result<GridKernel> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid("sigma must be positive"));
    }
    let n = grid.len();
    let dx = grid.dx();
    let x = grid.nodes();
    let reach = ((-2.0 * KERNEL_EXPONENT_FLOOR).sqrt() * sigma / dx).ceil() as usize;
    let unnorm = |g: usize, h: usize| (-(x[g] - x[h]).powi(2) / (2.0 * sigma * sigma)).exp();
    let mut col_mass = vec![0.0; n];
    for (h, m) in col_mass.iter_mut().enumerate() {
        let lo = h.saturating_sub(reach);
        let hi = (h + reach).min(n - 1);
        *m = (lo..=hi).map(|g| unnorm(g, h)).sum::<f64>() * dx;
    }
    let mut starts = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for g in 0..n {
        let lo = g.saturating_sub(reach);
        let hi = (g + reach).min(n - 1);
        starts.push(lo);
        rows.push((lo..=hi).map(|h| unnorm(g, h) / col_mass[h]).collect());
    }
    Ok(GridKernel { dx, starts, rows })
}

/// Metropolis correction of `Q` for `pi`: off-diagonal entries become
/// `min(Q[g][h], pi_g Q[h][g] / pi_h)`; rejected mass stays on the diagonal.
pub fn metropolize_kernel(q: &GridKernel, pi: &GridDensity) -> Result<GridKernel> {
    let p = pi.values();
    if p.len() != q.len() || p.iter().any(|v| *v <= 0.0) {
        return Err(Error::invalid("pi must be strictly positive on the kernel's grid"));
    }
    let n = q.len();
    // rows of Q~ need the band of Q's row g and of Q's column g
    let mut col_lo = vec![usize::MAX; n];
    let mut col_hi = vec![0; n];
    for (g, row) in q.rows.iter().enumerate() {
        for (o, v) in row.iter().enumerate() {
            if *v > 0.0 {
                let h = q.starts[g] + o;
                col_lo[h] = col_lo[h].min(g);
                col_hi[h] = col_hi[h].max(g + 1);
            }
        }
    }
    let mut starts = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);
    for g in 0..n {
        let mut lo = q.starts[g].min(col_lo[g]);
        let mut hi = (q.starts[g] + q.rows[g].len()).max(col_hi[g]);
        lo = lo.min(g);
        hi = hi.max(g + 1);
        let row: Vec<f64> = (lo..hi)
            .map(|h| {
                if h == g {
                    0.0
                } else {
                    q.get(g, h).min(p[g] * q.get(h, g) / p[h])
                }
            })
            .collect();
        starts.push(lo);
        rows.push(row);
    }
    let mut out = GridKernel {
        dx: q.dx,
        starts,
        rows,
    };
    let off = out.column_masses();
    for (h, m) in off.iter().enumerate() {
        let s = out.starts[h];
        out.rows[h][h - s] = (1.0 - m) / q.dx;
    }
    Ok(out)
}

/// Right-hand side of the nonlinear dynamics and its normalizer `Z_rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearRhs {
    pub values: Vec<f64>,
    pub z: f64,
}

pub fn nonlinear_rhs(rho: &GridDensity, pi: &GridDensity, q: &GridKernel) -> Result<NonlinearRhs> {
    let r = rho.values();
    let p = pi.values();
    let qr = q.apply(r);
    let z = normalizer(r, p, &qr, q.dx);
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::NonFiniteRhs { z });
    }
    let values = (0..r.len())
        .map(|g| qr[g] - r[g] / p[g] * qr[g] / z)
        .collect();
    Ok(NonlinearRhs { values, z })
}

fn normalizer(r: &[f64], p: &[f64], qr: &[f64], dx: f64) -> f64 {
    r.iter()
        .zip(p)
        .zip(qr)
        .map(|((r, p), q)| q / p * r)
        .sum::<f64>()
        * dx
}

/// `Q~ rho - rho`.
pub fn linear_rhs(rho: &GridDensity, q_tilde: &GridKernel) -> Vec<f64> {
    let qr = q_tilde.apply(rho.values());
    qr.iter().zip(rho.values()).map(|(a, b)| a - b).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    Nonlinear,
    /// The Metropolized chain; integrate it with the Metropolized kernel.
    Linear,
}

/// Time stepping. Both dynamics have the form `rho' = G(rho) - L(rho) rho`
/// with a nonnegative gain `G` and loss rate `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// `rho + dt (G - L rho)`.
    #[default]
    ForwardEuler,
    /// `(rho + dt G) / (1 + dt L)`: first order and positivity preserving,
    /// for runs where `L` is too stiff at the grid edge for forward Euler.
    LinearlyImplicitEuler,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Record the observers every `stride` steps (and at the final step).
    pub stride: usize,
    pub snapshot_times: Vec<f64>,
    pub scheme: Scheme,
}

impl IntegrationOptions {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            stride: 1,
            snapshot_times: Vec::new(),
            scheme: Scheme::ForwardEuler,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    /// `None` when the grid does not straddle zero.
    pub e: Option<f64>,
    /// `chi^2(pi || rho_t)`.
    pub chi2: f64,
    pub min_rho: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    pub snapshots: Vec<Snapshot>,
    pub final_density: GridDensity,
    pub steps: usize,
    /// Largest `|mass - 1|` removed by the per-step projection.
    pub max_mass_defect: f64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn e_series(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.e.unwrap_or(f64::NAN)).collect()
    }

    pub fn chi2_series(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.chi2).collect()
    }
}

/// Integrates the chosen dynamics from `rho0`.
///
/// After each step the density is rescaled to unit mass. The exact flow
/// conserves mass, but off the unit-mass hyperplane the nonlinear dynamics
/// has an unstable direction that would otherwise amplify rounding error.
pub fn euler_integrate(
    dynamics: Dynamics,
    rho0: &GridDensity,
    pi: &GridDensity,
    kernel: &GridKernel,
    opts: &IntegrationOptions,
) -> Result<Trajectory> {
    if !(opts.dt > 0.0) || !(opts.t_end >= 0.0) || opts.stride == 0 {
        return Err(Error::invalid("need dt > 0, t_end >= 0 and stride >= 1"));
    }
    let n = rho0.values().len();
    if pi.values().len() != n || kernel.len() != n {
        return Err(Error::invalid("density, target and kernel sizes differ"));
    }
    if dynamics == Dynamics::Nonlinear && pi.values().iter().any(|v| *v <= 0.0) {
        return Err(Error::invalid("pi must be strictly positive"));
    }
    let grid = rho0.grid().clone();
    let dx = grid.dx();
    let p = pi.values();
    let steps = (opts.t_end / opts.dt).round() as usize;
    let mut snapshot_steps: Vec<(usize, f64)> = opts
        .snapshot_times
        .iter()
        .map(|t| ((t / opts.dt).round() as usize, *t))
        .collect();
    snapshot_steps.sort_by_key(|s| s.0);

    let mut rho = rho0.values().to_vec();
    let mut gain = vec![0.0; n];
    let mut rows = Vec::new();
    let mut snapshots = Vec::new();
    let mut max_defect = 0.0f64;

    let observe = |rho: &[f64], t: f64| -> TrajectoryRow {
        let d = GridDensity {
            grid: grid.clone(),
            values: rho.to_vec(),
        };
        TrajectoryRow {
            t,
            e: e_statistic(&d),
            chi2: chi2_divergence(pi, &d),
            min_rho: d.min(),
            mass: d.mass(),
        }
    };

    for k in 0..=steps {
        let t = k as f64 * opts.dt;
        if k % opts.stride == 0 || k == steps {
            rows.push(observe(&rho, t));
        }
        for (_, ts) in snapshot_steps.iter().filter(|s| s.0 == k) {
            snapshots.push(Snapshot {
                t: *ts,
                values: rho.clone(),
            });
        }
        if k == steps {
            break;
        }
        kernel.apply_into(&rho, &mut gain);
        let loss_scale = match dynamics {
            Dynamics::Nonlinear => {
                let z = normalizer(&rho, p, &gain, dx);
                if !(z > 0.0) || !z.is_finite() {
                    return Err(Error::NonFiniteRhs { z });
                }
                Some(z)
            }
            Dynamics::Linear => None,
        };
        for g in 0..n {
            let loss = match loss_scale {
                Some(z) => gain[g] / (p[g] * z),
                None => 1.0,
            };
            rho[g] = match opts.scheme {
                Scheme::ForwardEuler => rho[g] + opts.dt * (gain[g] - loss * rho[g]),
                Scheme::LinearlyImplicitEuler => (rho[g] + opts.dt * gain[g]) / (1.0 + opts.dt * loss),
            };
        }
        let min = rho.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -NEGATIVITY_TOLERANCE || min.is_nan() {
            return Err(Error::NegativityBreach {
                t: t + opts.dt,
                min,
            });
        }
        let mass = rho.iter().sum::<f64>() * dx;
        max_defect = max_defect.max((mass - 1.0).abs());
        rho.iter_mut().for_each(|v| *v /= mass);
    }
    Ok(Trajectory {
        rows,
        snapshots,
        final_density: GridDensity { grid, values: rho },
        steps,
        max_mass_defect: max_defect,
    })
}

/// `1/2 - int_0^inf rho dx`; a node at zero counts with half weight.
pub fn e_statistic(rho: &GridDensity) -> Option<f64> {
    let grid = rho.grid();
    let (a, b) = grid.bounds();
    if !(a < 0.0 && b > 0.0) {
        return None;
    }
    let mut right = 0.0;
    for (g, v) in rho.values().iter().enumerate() {
        let x = grid.node(g);
        if x > 0.0 {
            right += v;
        } else if x == 0.0 {
            right += 0.5 * v;
        }
    }
    Some(0.5 - right * grid.dx())
}

/// `chi^2(p || q) = int p^2 / q dx - 1`, evaluated as `int (p - q)^2 / q dx`
/// (equal for unit-mass arguments) so that small divergences keep their
/// relative accuracy. Infinite when `q` vanishes where `p` does not.
pub fn chi2_divergence(p: &GridDensity, q: &GridDensity) -> f64 {
    let mut s = 0.0;
    for (a, b) in p.values().iter().zip(q.values()) {
        if *b <= 0.0 {
            if *a == 0.0 {
                continue;
            }
            return f64::INFINITY;
        }
        s += (a - b) * (a - b) / b;
    }
    s * p.grid().dx()
}

/// Which samples enter the log-linear fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FitWindow {
    /// Values below `0.1 max` and above `100 eps max`.
    #[default]
    Tail,
    /// Positive values with `start <= t <= end`.
    Span { start: f64, end: f64 },
}

/// Minimum number of points in a decay fit.
pub const MIN_FIT_POINTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// `-slope` of `ln value` against `t`.
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
    pub t_first: f64,
    pub t_last: f64,
}

/// Least-squares fit of `ln value = intercept - rate t` over `window`.
pub fn fit_decay_rate(times: &[f64], values: &[f64], window: FitWindow) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::invalid("times and values differ in length"));
    }
    let max = values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let keep = |t: f64, v: f64| -> bool {
        if !(v > 0.0) || !v.is_finite() {
            return false;
        }
        match window {
            FitWindow::Tail => v < 0.1 * max && v > 100.0 * f64::EPSILON * max,
            FitWindow::Span { start, end } => t >= start && t <= end,
        }
    };
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, v)| keep(**t, **v))
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientWindow {
            found: pts.len(),
            required: MIN_FIT_POINTS,
        });
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if stt == 0.0 {
        return Err(Error::invalid("fit window has a single time"));
    }
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(DecayFit {
        rate: -slope,
        intercept,
        r_squared,
        points: pts.len(),
        t_first: pts.first().map(|p| p.0).unwrap_or(f64::NAN),
        t_last: pts.last().map(|p| p.0).unwrap_or(f64::NAN),
    })
}
