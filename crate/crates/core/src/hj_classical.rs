//! Characteristics of the Hamilton-Jacobi equation: rays ẋ = p/m,
//! ṗ = −∂V/∂x − λ∂U/∂x launched normal to the initial S surfaces, with
//! caustic detection from the spacing of neighboring rays.
//!
//! λ = 0 is the unsmoothed classical flow. λ = 1 with U taken from the
//! quantum evolution gives the Bohmian trajectories.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Boundary, Grid, Wavefunction};
use crate::interp;
use crate::madelung::{self, MadelungFields};
use crate::multiverse::DensityCdf;
use crate::stencil::{self, Extension};
use crate::tdse::Potential;

/// Neighbor-spacing ratio at or below which two rays count as crossed.
pub const J_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RayLaunch {
    /// inverse CDF of R² at (i + ½)/n_rays
    #[default]
    Quantile,
    /// evenly spaced cell centers across the non-node support
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayConfig {
    pub dt: f64,
    pub t_final: f64,
    pub n_rays: usize,
    pub launch: RayLaunch,
    /// keep a bundle every this many steps (the first and last are always kept)
    pub record_every: usize,
}

impl RayConfig {
    pub fn new(dt: f64, t_final: f64, n_rays: usize) -> Self {
        Self { dt, t_final, n_rays, launch: RayLaunch::Quantile, record_every: 1 }
    }

    fn validate(&self) -> Result<usize> {
        if self.n_rays < 16 {
            return Err(invalid("n_rays", format!("need at least 16 rays, got {}", self.n_rays)));
        }
        if self.record_every == 0 {
            return Err(invalid("record_every", "must be positive"));
        }
        crate::tdse::step_count(self.t_final, self.dt)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayBundle {
    pub time: f64,
    pub positions: Vec<f64>,
    pub momenta: Vec<f64>,
    /// (x[i+1] − x[i]) / (x[i+1](0) − x[i](0)); one entry per neighbor pair
    pub jacobian: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CausticReport {
    pub formed: bool,
    pub first_time: Option<f64>,
    pub location: Option<f64>,
    pub rays_involved: Option<(usize, usize)>,
}

impl CausticReport {
    fn none() -> Self {
        Self { formed: false, first_time: None, location: None, rays_involved: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayTrace {
    pub bundles: Vec<RayBundle>,
    pub caustic: CausticReport,
}

/// Launch positions and momenta p = ∂S/∂x. Errors if a ray starts within the
/// node mask.
pub fn launch(initial: &MadelungFields, n_rays: usize, how: RayLaunch) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = initial.grid();
    if grid.dimension() != 1 {
        return Err(Error::Dimension { expected: 1, found: grid.dimension() });
    }
    let positions: Vec<f64> = match how {
        RayLaunch::Quantile => {
            let density: Vec<f64> = initial.amplitude.iter().map(|r| r * r).collect();
            let cdf = DensityCdf::new(grid, &density)?;
            (0..n_rays).map(|i| cdf.inverse((i as f64 + 0.5) / n_rays as f64)).collect()
        }
        RayLaunch::Uniform => {
            let first = initial.node_mask.iter().position(|m| !m).ok_or(Error::AllNodes)?;
            let last = initial.node_mask.iter().rposition(|m| !m).ok_or(Error::AllNodes)?;
            let (a, b) = (grid.coordinate(first), grid.coordinate(last));
            (0..n_rays).map(|i| a + (b - a) * (i as f64 + 0.5) / n_rays as f64).collect()
        }
    };
    let grad = initial.action_gradient(0);
    let n = grid.points() as isize;
    let periodic = grid.boundary() == Boundary::Periodic;
    let on_node = |x: f64| {
        let k = ((x - grid.lower()) / grid.spacing()).round() as isize;
        let k = if periodic { k.rem_euclid(n) } else { k.clamp(0, n - 1) };
        initial.node_mask[k as usize] || grad[k as usize].is_none()
    };
    if let Some(&x) = positions.iter().find(|&&x| on_node(x)) {
        return Err(Error::LaunchOnNode { x });
    }
    let slope: Vec<f64> = grad.iter().map(|g| g.unwrap_or(0.0)).collect();
    let momenta = positions
        .iter()
        .map(|&x| interp::cubic(grid, &slope, x).ok_or(Error::OutsideGrid { x }))
        .collect::<Result<Vec<f64>>>()?;
    Ok((positions, momenta))
}

fn check_potential(v: &Potential) -> Result<()> {
    v.validate()?;
    match v {
        Potential::Custom { .. } | Potential::Barrier { .. } => {
            Err(invalid("potential", "rays need a differentiable closed-form potential"))
        }
        _ => Ok(()),
    }
}

/// Integrates the unsmoothed classical flow and scans every step for the
/// first neighbor crossing.
pub fn trace_classical(initial: &MadelungFields, v: &Potential, mass: f64, cfg: RayConfig) -> Result<RayTrace> {
    check_potential(v)?;
    trace(initial, mass, cfg, |x, t| Ok(-v.gradient(x, t, mass)))
}

/// ∂U/∂x snapshots of a quantum evolution, for interpolation at arbitrary
/// (x, t): cubic in space, linear in time.
#[derive(Debug, Clone)]
pub struct SmoothingHistory {
    grid: Grid,
    times: Vec<f64>,
    force: Vec<Vec<f64>>,
}

impl SmoothingHistory {
    /// Builds the history from wavefunction snapshots in time order.
    pub fn from_snapshots<'a>(snapshots: impl IntoIterator<Item = &'a Wavefunction>) -> Result<Self> {
        let mut out: Option<Self> = None;
        for psi in snapshots {
            let m = madelung::decompose(psi, madelung::DEFAULT_R_FLOOR)?;
            match &mut out {
                None => {
                    let mut h = Self { grid: *psi.grid(), times: Vec::new(), force: Vec::new() };
                    h.push(&m)?;
                    out = Some(h);
                }
                Some(h) => h.push(&m)?,
            }
        }
        out.ok_or_else(|| invalid("snapshots", "history is empty"))
    }

    pub fn empty(grid: Grid) -> Self {
        Self { grid, times: Vec::new(), force: Vec::new() }
    }

    /// Appends one snapshot; times must increase.
    pub fn push(&mut self, m: &MadelungFields) -> Result<()> {
        if m.grid() != &self.grid {
            return Err(Error::GridMismatch("snapshot grid differs from the history grid".into()));
        }
        if self.grid.dimension() != 1 {
            return Err(Error::Dimension { expected: 1, found: self.grid.dimension() });
        }
        if let Some(&last) = self.times.last() {
            if m.time <= last {
                return Err(invalid("snapshots", format!("times must increase, got {} after {last}", m.time)));
            }
        }
        let u = madelung::smoothing_potential(m, m.mass())?;
        self.times.push(m.time);
        self.force.push(gradient(&self.grid, &u.values));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        Some((*self.times.first()?, *self.times.last()?))
    }

    /// ∂U/∂x at (x, t).
    pub fn gradient_at(&self, x: f64, t: f64) -> Result<f64> {
        let (t0, t1) = self.span().ok_or(Error::HistoryGap { time: t })?;
        let slack = 1e-9 * (t1 - t0).abs().max(1.0);
        if t < t0 - slack || t > t1 + slack {
            return Err(Error::HistoryGap { time: t });
        }
        let j = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len().max(2) - 1);
        let eval = |k: usize| interp::cubic(&self.grid, &self.force[k], x).ok_or(Error::OutsideGrid { x });
        if self.times.len() == 1 {
            return eval(0);
        }
        let (ta, tb) = (self.times[j - 1], self.times[j]);
        let w = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
        Ok((1.0 - w) * eval(j - 1)? + w * eval(j)?)
    }
}

/// Fourth-order ∂/∂x of a smooth grid field; periodic grids wrap, Dirichlet
/// grids fall back to second-order one-sided differences in the last two
/// points at each end.
fn gradient(grid: &Grid, f: &[f64]) -> Vec<f64> {
    let h = grid.spacing();
    if grid.boundary() == Boundary::Periodic {
        return stencil::first_derivative(f, h, 4, Extension::Periodic);
    }
    let n = f.len();
    (0..n)
        .map(|k| match k {
            0 => (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h),
            _ if k == n - 1 => (3.0 * f[k] - 4.0 * f[k - 1] + f[k - 2]) / (2.0 * h),
            1 => (f[2] - f[0]) / (2.0 * h),
            _ if k == n - 2 => (f[k + 1] - f[k - 1]) / (2.0 * h),
            _ => (8.0 * (f[k + 1] - f[k - 1]) - (f[k + 2] - f[k - 2])) / (12.0 * h),
        })
        .collect()
}

/// Rays under −∂V/∂x − λ∂U/∂x, U interpolated from `history` (which must
/// cover the whole run). λ = 0 runs exactly the classical integrator.
pub fn trace_scaled(
    initial: &MadelungFields,
    v: &Potential,
    mass: f64,
    cfg: RayConfig,
    lambda: f64,
    history: &SmoothingHistory,
) -> Result<RayTrace> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(invalid("lambda", format!("must lie in [0, 1], got {lambda}")));
    }
    if history.grid != *initial.grid() {
        return Err(Error::GridMismatch("smoothing history grid differs from the launch grid".into()));
    }
    let (t0, t1) = history.span().ok_or(Error::HistoryGap { time: initial.time })?;
    let slack = 1e-9 * cfg.t_final.abs().max(1.0);
    if initial.time < t0 - slack {
        return Err(Error::HistoryGap { time: initial.time });
    }
    if initial.time + cfg.t_final > t1 + slack {
        return Err(Error::HistoryGap { time: t1 });
    }
    if lambda == 0.0 {
        return trace_classical(initial, v, mass, cfg);
    }
    check_potential(v)?;
    trace(initial, mass, cfg, |x, t| Ok(-v.gradient(x, t, mass) - lambda * history.gradient_at(x, t)?))
}

fn trace(
    initial: &MadelungFields,
    mass: f64,
    cfg: RayConfig,
    force: impl Fn(f64, f64) -> Result<f64> + Sync,
) -> Result<RayTrace> {
    if !(mass > 0.0) {
        return Err(invalid("mass", format!("must be positive, got {mass}")));
    }
    let steps = cfg.validate()?;
    let (x0, p0) = launch(initial, cfg.n_rays, cfg.launch)?;
    let t0 = initial.time;
    let dt = cfg.dt;
    let time = |k: usize| t0 + k as f64 * dt;

    // velocity Verlet per ray; every position is kept for the caustic scan,
    // momenta only at recorded steps
    let recorded = |k: usize| k.is_multiple_of(cfg.record_every) || k == steps;
    let rays: Vec<(Vec<f64>, Vec<f64>)> = x0
        .par_iter()
        .zip(&p0)
        .map(|(&x, &p)| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut xs = Vec::with_capacity(steps + 1);
            let mut ps = Vec::new();
            let (mut x, mut p) = (x, p);
            let mut f = force(x, time(0))?;
            xs.push(x);
            ps.push(p);
            for k in 1..=steps {
                let half = p + 0.5 * dt * f;
                x += dt * half / mass;
                f = force(x, time(k))?;
                p = half + 0.5 * dt * f;
                if !(x.is_finite() && p.is_finite()) {
                    return Err(Error::NonFinite { time: time(k) });
                }
                xs.push(x);
                if recorded(k) {
                    ps.push(p);
                }
            }
            Ok((xs, ps))
        })
        .collect::<Result<_>>()?;

    let spacing0: Vec<f64> = x0.windows(2).map(|w| w[1] - w[0]).collect();
    let jacobian_at = |k: usize| -> Vec<f64> {
        (0..rays.len() - 1).map(|i| (rays[i + 1].0[k] - rays[i].0[k]) / spacing0[i]).collect()
    };

    let mut caustic = CausticReport::none();
    for k in 0..=steps {
        let j = jacobian_at(k);
        let worst = j.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, &v)| (i, v));
        if let Some((i, v)) = worst {
            if v <= J_FLOOR {
                caustic = CausticReport {
                    formed: true,
                    first_time: Some(time(k)),
                    location: Some(0.5 * (rays[i].0[k] + rays[i + 1].0[k])),
                    rays_involved: Some((i, i + 1)),
                };
                break;
            }
        }
    }

    let mut bundles = Vec::new();
    let mut slot = 0;
    for k in (0..=steps).filter(|&k| recorded(k)) {
        bundles.push(RayBundle {
            time: time(k),
            positions: rays.iter().map(|r| r.0[k]).collect(),
            momenta: rays.iter().map(|r| r.1[slot]).collect(),
            jacobian: jacobian_at(k),
        });
        slot += 1;
    }
    Ok(RayTrace { bundles, caustic })
}

/// p²/2m + V(x, t) for every ray in the bundle.
pub fn ray_energies(bundle: &RayBundle, v: &Potential, mass: f64) -> Result<Vec<f64>> {
    check_potential(v)?;
    Ok(bundle.positions.iter().zip(&bundle.momenta).map(|(&x, &p)| p * p / (2.0 * mass) + v.at(x, bundle.time, mass)).collect())
}
