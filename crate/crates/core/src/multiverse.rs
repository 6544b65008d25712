//! Ensembles of universe trajectories carried by v = ∇S/m of the smoothed
//! evolution, and the check that their density follows R².
//!
//! One dimension only. Positions are kept on a continuous lift internally so
//! that ordering survives the periodic seam; recorded paths are wrapped back
//! into the box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Boundary, Grid};
use crate::interp;
use crate::madelung::{dilate, MadelungFields};

/// Cells around a node (in grid points) in which universes are frozen.
pub const QUARANTINE_RADIUS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// inverse CDF of R² at (i + ½)/count
    #[default]
    Quantile,
    /// inverse CDF of R² at seeded uniform draws, sorted
    Uniform,
}

/// Cumulative distribution of a grid density spread uniformly over each cell
/// [x_k − h/2, x_k + h/2].
#[derive(Debug, Clone)]
pub(crate) struct DensityCdf {
    start: f64,
    spacing: f64,
    length: f64,
    periodic: bool,
    cumulative: Vec<f64>,
}

impl DensityCdf {
    pub(crate) fn new(grid: &Grid, density: &[f64]) -> Result<Self> {
        if grid.dimension() != 1 {
            return Err(Error::Dimension { expected: 1, found: grid.dimension() });
        }
        if density.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(invalid("density", "must be finite and non-negative"));
        }
        let mut acc = crate::grid::Neumaier::default();
        let mut cumulative = Vec::with_capacity(density.len() + 1);
        cumulative.push(0.0);
        for d in density {
            acc.add(*d);
            cumulative.push(acc.total());
        }
        let total = acc.total();
        if total == 0.0 {
            return Err(Error::ZeroWavefunction);
        }
        let largest = density.iter().copied().fold(0.0, f64::max);
        if largest >= total * (1.0 - 1e-12) {
            return Err(Error::Degenerate("all probability sits in one grid cell".into()));
        }
        for c in &mut cumulative {
            *c /= total;
        }
        let h = grid.spacing();
        Ok(Self {
            start: grid.lower() - 0.5 * h,
            spacing: h,
            length: grid.length(),
            periodic: grid.boundary() == Boundary::Periodic,
            cumulative,
        })
    }

    pub(crate) fn inverse(&self, u: f64) -> f64 {
        let k = self.cumulative.partition_point(|&c| c <= u).clamp(1, self.cumulative.len() - 1) - 1;
        let (lo, hi) = (self.cumulative[k], self.cumulative[k + 1]);
        let frac = if hi > lo { ((u - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 };
        self.start + self.spacing * (k as f64 + frac)
    }

    pub(crate) fn at(&self, x: f64) -> f64 {
        let x = if self.periodic { self.start + (x - self.start).rem_euclid(self.length) } else { x };
        let cells = self.cumulative.len() - 1;
        let s = ((x - self.start) / self.spacing).clamp(0.0, cells as f64);
        let k = (s.floor() as usize).min(cells - 1);
        let (lo, hi) = (self.cumulative[k], self.cumulative[k + 1]);
        lo + (s - k as f64) * (hi - lo)
    }
}

/// Initial universe positions distributed as R² of `m`, in increasing order.
pub fn sample_initial(m: &MadelungFields, count: usize, sampling: Sampling, seed: u64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(invalid("count", "must be positive"));
    }
    let density: Vec<f64> = m.amplitude.iter().map(|r| r * r).collect();
    let cdf = DensityCdf::new(m.grid(), &density)?;
    let mut positions: Vec<f64> = match sampling {
        Sampling::Quantile => (0..count).map(|i| cdf.inverse((i as f64 + 0.5) / count as f64)).collect(),
        Sampling::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count).map(|_| cdf.inverse(rng.random::<f64>())).collect()
        }
    };
    positions.sort_by(f64::total_cmp);
    Ok(positions)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    grid: Grid,
    pub count: usize,
    pub sampling: Sampling,
    pub seed: u64,
    /// output times, one per recorded column of `paths`
    pub times: Vec<f64>,
    /// paths[i][j]: position of universe i at times[j]
    pub paths: Vec<Vec<f64>>,
    /// frozen near a node at least once
    pub flagged: Vec<bool>,
    /// left a Dirichlet box; its path stops at the last valid position
    pub aborted: Vec<bool>,
    /// output times at which the initial ordering was found broken
    pub order_violations: Vec<f64>,
    lifted: Vec<f64>,
}

impl TrajectoryEnsemble {
    /// Samples `count` universes from R² of `m` at time `m.time`.
    pub fn sample(m: &MadelungFields, count: usize, sampling: Sampling, seed: u64) -> Result<Self> {
        let positions = sample_initial(m, count, sampling, seed)?;
        Ok(Self::from_positions(*m.grid(), positions, m.time, sampling, seed))
    }

    fn from_positions(grid: Grid, positions: Vec<f64>, time: f64, sampling: Sampling, seed: u64) -> Self {
        let count = positions.len();
        let mut out = Self {
            grid,
            count,
            sampling,
            seed,
            times: vec![time],
            paths: vec![Vec::new(); count],
            flagged: vec![false; count],
            aborted: vec![false; count],
            order_violations: Vec::new(),
            lifted: positions,
        };
        out.record();
        out
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        *self.times.last().expect("ensemble always holds its initial time")
    }

    /// Current positions wrapped into the box.
    pub fn positions(&self) -> Vec<f64> {
        self.lifted.iter().map(|&x| self.wrap(x)).collect()
    }

    pub fn flagged_count(&self) -> usize {
        self.flagged.iter().zip(&self.aborted).filter(|(f, a)| **f || **a).count()
    }

    fn wrap(&self, x: f64) -> f64 {
        if self.grid.boundary() == Boundary::Periodic {
            let start = self.grid.lower() - 0.5 * self.grid.spacing();
            start + (x - start).rem_euclid(self.grid.length())
        } else {
            x
        }
    }

    fn record(&mut self) {
        for (path, &x) in self.paths.iter_mut().zip(&self.lifted) {
            let wrapped = if self.grid.boundary() == Boundary::Periodic {
                let start = self.grid.lower() - 0.5 * self.grid.spacing();
                start + (x - start).rem_euclid(self.grid.length())
            } else {
                x
            };
            path.push(wrapped);
        }
    }

    fn order_intact(&self) -> bool {
        let live: Vec<f64> = self.lifted.iter().zip(&self.aborted).filter(|(_, a)| !**a).map(|(x, _)| *x).collect();
        live.windows(2).all(|w| w[0] < w[1])
    }
}

/// v = (∂S/∂x)/m on the grid, plus the quarantine mask around nodes.
#[derive(Debug, Clone)]
struct VelocityFrame {
    time: f64,
    velocity: Vec<f64>,
    quarantine: Vec<bool>,
}

impl VelocityFrame {
    fn new(m: &MadelungFields, mass: f64) -> Result<Self> {
        let grid = m.grid();
        if grid.dimension() != 1 {
            return Err(Error::Dimension { expected: 1, found: grid.dimension() });
        }
        let grad = m.action_gradient(0);
        let undefined: Vec<bool> = grad.iter().map(|g| g.is_none()).collect();
        let quarantine = dilate(grid, &m.node_mask, &vec![false; grid.len()], QUARANTINE_RADIUS);
        let quarantine = quarantine.iter().zip(&undefined).map(|(a, b)| *a || *b).collect();
        let velocity = grad.iter().map(|g| g.unwrap_or(0.0) / mass).collect();
        Ok(Self { time: m.time, velocity, quarantine })
    }

    fn quarantined(&self, grid: &Grid, x: f64) -> bool {
        let n = grid.points() as isize;
        let k = ((x - grid.lower()) / grid.spacing()).round() as isize;
        let k = if grid.boundary() == Boundary::Periodic {
            k.rem_euclid(n)
        } else if (0..n).contains(&k) {
            k
        } else {
            return true;
        };
        self.quarantine[k as usize]
    }
}

enum Stage {
    Velocity(f64),
    Frozen,
    Outside,
}

/// Streams Madelung snapshots into an ensemble: each pushed snapshot
/// advances every universe by one RK4 step spanning the gap since the
/// previous snapshot, with velocities interpolated cubically in space and
/// linearly in time.
#[derive(Debug, Clone)]
pub struct Advection {
    ensemble: TrajectoryEnsemble,
    frame: VelocityFrame,
    mass: f64,
    dt: f64,
    record_stride: usize,
    pushed: usize,
}

impl Advection {
    pub fn new(ensemble: TrajectoryEnsemble, first: &MadelungFields, mass: f64, dt: f64) -> Result<Self> {
        if !(mass > 0.0) {
            return Err(invalid("mass", format!("must be positive, got {mass}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        if first.grid() != ensemble.grid() {
            return Err(Error::GridMismatch("history grid differs from the ensemble grid".into()));
        }
        if (first.time - ensemble.time()).abs() > 1e-9 * dt {
            return Err(Error::HistoryGap { time: ensemble.time() });
        }
        let frame = VelocityFrame::new(first, mass)?;
        Ok(Self { ensemble, frame, mass, dt, record_stride: 1, pushed: 0 })
    }

    /// Record positions only at every `stride`-th snapshot (the last one is
    /// always recorded by [`Advection::finish`]).
    pub fn with_record_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride.max(1);
        self
    }

    pub fn ensemble(&self) -> &TrajectoryEnsemble {
        &self.ensemble
    }

    pub fn push(&mut self, next: &MadelungFields) -> Result<()> {
        if next.grid() != self.ensemble.grid() {
            return Err(Error::GridMismatch("history grid differs from the ensemble grid".into()));
        }
        let gap = next.time - self.frame.time;
        if !(gap > 0.0) || gap > self.dt * (1.0 + 1e-9) {
            return Err(Error::HistoryGap { time: self.frame.time + self.dt.min(gap.abs()) });
        }
        let b = VelocityFrame::new(next, self.mass)?;
        let a = &self.frame;
        let grid = *self.ensemble.grid();
        let ens = &mut self.ensemble;

        let stage = |x: f64, w: f64| -> Stage {
            if a.quarantined(&grid, x) || b.quarantined(&grid, x) {
                return Stage::Frozen;
            }
            match (interp::cubic(&grid, &a.velocity, x), interp::cubic(&grid, &b.velocity, x)) {
                (Some(va), Some(vb)) => Stage::Velocity((1.0 - w) * va + w * vb),
                _ => Stage::Outside,
            }
        };
        let rk4 = |x: f64| -> Stage {
            let Stage::Velocity(k1) = stage(x, 0.0) else { return stage(x, 0.0) };
            let Stage::Velocity(k2) = stage(x + 0.5 * gap * k1, 0.5) else { return stage(x + 0.5 * gap * k1, 0.5) };
            let Stage::Velocity(k3) = stage(x + 0.5 * gap * k2, 0.5) else { return stage(x + 0.5 * gap * k2, 0.5) };
            let Stage::Velocity(k4) = stage(x + gap * k3, 1.0) else { return stage(x + gap * k3, 1.0) };
            Stage::Velocity(x + gap * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0)
        };

        ens.lifted
            .par_iter_mut()
            .zip(ens.flagged.par_iter_mut())
            .zip(ens.aborted.par_iter_mut())
            .for_each(|((x, flagged), aborted)| {
                if *aborted {
                    return;
                }
                match rk4(*x) {
                    Stage::Velocity(next) => *x = next,
                    Stage::Frozen => *flagged = true,
                    Stage::Outside => *aborted = true,
                }
            });

        self.frame = b;
        self.pushed += 1;
        if self.pushed.is_multiple_of(self.record_stride) {
            self.record(next.time);
        }
        Ok(())
    }

    fn record(&mut self, time: f64) {
        let ens = &mut self.ensemble;
        ens.times.push(time);
        ens.record();
        if !ens.order_intact() {
            ens.order_violations.push(time);
        }
    }

    pub fn finish(mut self) -> TrajectoryEnsemble {
        if !self.pushed.is_multiple_of(self.record_stride) {
            self.record(self.frame.time);
        }
        self.ensemble
    }
}

/// Advances `ensemble` through a complete history. Consecutive snapshots
/// must be at most `dt` apart and the first must match the ensemble time.
pub fn advect(ensemble: TrajectoryEnsemble, history: &[MadelungFields], mass: f64, dt: f64) -> Result<TrajectoryEnsemble> {
    let (first, rest) = history.split_first().ok_or(Error::HistoryGap { time: ensemble.time() })?;
    let mut adv = Advection::new(ensemble, first, mass, dt)?;
    for m in rest {
        adv.push(m)?;
    }
    Ok(adv.finish())
}

/// Kolmogorov–Smirnov distance between the current universe positions and
/// the normalized R² of `m`. Aborted paths are left out; more than 1% of
/// flagged or aborted paths is an error.
pub fn equivariance_check(ensemble: &TrajectoryEnsemble, m: &MadelungFields) -> Result<f64> {
    if ensemble.count < 1000 {
        return Err(invalid("ensemble", format!("need at least 1000 universes, got {}", ensemble.count)));
    }
    if m.grid() != ensemble.grid() {
        return Err(Error::GridMismatch("fields grid differs from the ensemble grid".into()));
    }
    if (m.time - ensemble.time()).abs() > 1e-9 * m.time.abs().max(1.0) {
        return Err(Error::HistoryGap { time: m.time });
    }
    let flagged = ensemble.flagged_count();
    if flagged * 100 > ensemble.count {
        return Err(Error::TooManyFlagged { flagged, count: ensemble.count });
    }
    let density: Vec<f64> = m.amplitude.iter().map(|r| r * r).collect();
    let cdf = DensityCdf::new(m.grid(), &density)?;
    let mut xs: Vec<f64> =
        ensemble.positions().into_iter().zip(&ensemble.aborted).filter(|(_, a)| !**a).map(|(x, _)| x).collect();
    xs.sort_by(f64::total_cmp);
    Ok(ks_distance(&xs, |x| cdf.at(x)))
}

/// sup |F_emp − F| over sorted samples.
pub(crate) fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
