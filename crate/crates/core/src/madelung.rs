//! Amplitude/action split ψ = R·exp(iS/ħ), the smoothing potential
//! U = −(ħ²/2m)∇²R/R, the continuity residual and exchange symmetry checks.

use std::collections::VecDeque;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::grid::{sum, Boundary, Grid, Wavefunction};
use crate::stencil::{self, Extension};

/// Relative amplitude below which a point is treated as a node.
pub const DEFAULT_R_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct MadelungFields {
    grid: Grid,
    /// R ≥ 0
    pub amplitude: Vec<f64>,
    /// S, unwrapped across neighboring non-node points
    pub action: Vec<f64>,
    /// true where R < r_floor·max R; S there is copied from the nearest
    /// non-node point
    pub node_mask: Vec<bool>,
    pub time: f64,
    hbar: f64,
    mass: f64,
}

impl MadelungFields {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn has_nodes(&self) -> bool {
        self.node_mask.iter().any(|&m| m)
    }

    /// R·exp(iS/ħ).
    pub fn recompose(&self) -> Wavefunction {
        let values = self
            .amplitude
            .iter()
            .zip(&self.action)
            .map(|(&r, &s)| Complex64::from_polar(r, s / self.hbar))
            .collect();
        let mut psi = Wavefunction::new(self.grid, values, self.hbar, self.mass)
            .expect("fields were built from a valid wavefunction");
        psi.time = self.time;
        psi
    }

    /// ∂S/∂x along one axis by second-order centered differences of the
    /// wrapped neighbor steps. `None` where the stencil leaves a Dirichlet box.
    pub fn action_gradient(&self, axis: usize) -> Vec<Option<f64>> {
        let mut out = vec![None; self.grid.len()];
        let h = self.grid.spacing();
        let periodic = self.grid.boundary() == Boundary::Periodic;
        for line in lines(&self.grid, axis) {
            let steps = wrapped_steps(&self.action, &line, self.hbar, periodic);
            let d = stencil::first_derivative_from_steps(&steps, line.len(), h, 2, periodic);
            for (&idx, v) in line.iter().zip(d) {
                out[idx] = v;
            }
        }
        out
    }
}

/// Decomposes ψ into R = |ψ| and an unwrapped action S.
///
/// Unwrapping is a flood fill from the largest-amplitude point: each newly
/// reached non-node neighbor takes the branch of ħ·arg ψ closest to the
/// point it was reached from. Disconnected non-node regions are seeded the
/// same way from their own maximum. Periodic seams are not crossed, so a
/// winding phase shows up as a jump across the seam only.
pub fn decompose(psi: &Wavefunction, r_floor: f64) -> Result<MadelungFields> {
    if !(r_floor > 0.0 && r_floor <= 1e-3) {
        return Err(invalid("r_floor", format!("must lie in (0, 1e-3], got {r_floor}")));
    }
    let grid = *psi.grid();
    let hbar = psi.hbar();
    let amplitude: Vec<f64> = psi.values().iter().map(|z| z.norm()).collect();
    let max_r = amplitude.iter().copied().fold(0.0, f64::max);
    if max_r == 0.0 {
        return Err(Error::ZeroWavefunction);
    }
    let node_mask: Vec<bool> = amplitude.iter().map(|&r| r < r_floor * max_r).collect();
    let phase: Vec<f64> = psi.values().iter().map(|z| z.arg()).collect();

    let mut action = vec![0.0; grid.len()];
    let mut visited = node_mask.clone();
    let mut seeds: Vec<usize> = (0..grid.len()).filter(|&i| !node_mask[i]).collect();
    seeds.sort_by(|&a, &b| amplitude[b].total_cmp(&amplitude[a]).then(a.cmp(&b)));
    let mut queue = VecDeque::new();
    for seed in seeds {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        action[seed] = hbar * phase[seed];
        queue.push_back(seed);
        while let Some(cur) = queue.pop_front() {
            let reference = action[cur] / hbar;
            for nb in grid.neighbors(cur, false) {
                if visited[nb] {
                    continue;
                }
                visited[nb] = true;
                let turns = ((reference - phase[nb]) / TAU).round();
                action[nb] = hbar * (phase[nb] + TAU * turns);
                queue.push_back(nb);
            }
        }
    }
    fill_from_nearest(&grid, &mut action, &node_mask);

    Ok(MadelungFields { grid, amplitude, action, node_mask, time: psi.time, hbar, mass: psi.mass() })
}

/// Overwrites masked entries with the value of the nearest unmasked point
/// (breadth-first, ties broken by index order).
fn fill_from_nearest(grid: &Grid, field: &mut [f64], mask: &[bool]) {
    let mut done: Vec<bool> = mask.iter().map(|m| !m).collect();
    let mut queue: VecDeque<usize> = (0..grid.len()).filter(|&i| done[i]).collect();
    while let Some(cur) = queue.pop_front() {
        for nb in grid.neighbors(cur, true) {
            if !done[nb] {
                done[nb] = true;
                field[nb] = field[cur];
                queue.push_back(nb);
            }
        }
    }
}

/// Flat indices of every line of the grid running along `axis`.
pub(crate) fn lines(grid: &Grid, axis: usize) -> Vec<Vec<usize>> {
    let n = grid.points();
    match (grid.dimension(), axis) {
        (1, _) => vec![(0..n).collect()],
        (_, 0) => (0..n).map(|j| (0..n).map(|i| i * n + j).collect()).collect(),
        _ => (0..n).map(|i| (0..n).map(|j| i * n + j).collect()).collect(),
    }
}

/// Consecutive differences of S along a line, each wrapped into (−πħ, πħ].
pub(crate) fn wrapped_steps(action: &[f64], line: &[usize], hbar: f64, periodic: bool) -> Vec<f64> {
    let n = line.len();
    let count = if periodic { n } else { n - 1 };
    (0..count)
        .map(|k| {
            let d = (action[line[(k + 1) % n]] - action[line[k]]) / hbar;
            hbar * wrap_phase(d)
        })
        .collect()
}

pub(crate) fn wrap_phase(d: f64) -> f64 {
    let w = d - TAU * (d / TAU).round();
    if w <= -PI { w + TAU } else { w }
}

/// Second-order Laplacian: periodic wrap, or one-sided second differences
/// at Dirichlet edges.
pub(crate) fn laplacian(grid: &Grid, field: &[f64]) -> Vec<f64> {
    let h = grid.spacing();
    let mut out = vec![0.0; field.len()];
    for axis in 0..grid.dimension() {
        for line in lines(grid, axis) {
            let f: Vec<f64> = line.iter().map(|&i| field[i]).collect();
            let d2 = match grid.boundary() {
                Boundary::Periodic => stencil::second_derivative(&f, h, 2, Extension::Periodic),
                Boundary::Dirichlet => {
                    let n = f.len();
                    let mut d: Vec<f64> = (0..n)
                        .map(|k| {
                            if k == 0 || k == n - 1 {
                                0.0
                            } else {
                                (f[k + 1] - 2.0 * f[k] + f[k - 1]) / (h * h)
                            }
                        })
                        .collect();
                    d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (h * h);
                    d[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / (h * h);
                    d
                }
            };
            for (&idx, v) in line.iter().zip(d2) {
                out[idx] += v;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingPotentialField {
    grid: Grid,
    pub values: Vec<f64>,
    /// true if any node point received a copied value
    pub regularized: bool,
}

impl SmoothingPotentialField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
}

/// U = −(ħ²/2m)·∇²R/R with the second-order Laplacian. Node points take the
/// value of the nearest non-node point.
pub fn smoothing_potential(m: &MadelungFields, mass: f64) -> Result<SmoothingPotentialField> {
    if !(mass > 0.0) {
        return Err(invalid("mass", format!("must be positive, got {mass}")));
    }
    if m.node_mask.iter().all(|&b| b) {
        return Err(Error::AllNodes);
    }
    let lap = laplacian(&m.grid, &m.amplitude);
    let coef = -m.hbar * m.hbar / (2.0 * mass);
    let mut values: Vec<f64> = lap
        .iter()
        .zip(&m.amplitude)
        .zip(&m.node_mask)
        .map(|((l, r), &node)| if node { 0.0 } else { coef * l / r })
        .collect();
    let regularized = m.has_nodes();
    fill_from_nearest(&m.grid, &mut values, &m.node_mask);
    Ok(SmoothingPotentialField { grid: m.grid, values, regularized })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityResidual {
    /// ∂R²/∂t + ∇·(R²∇S/m) at the midpoint time; zero at excluded points
    pub field: Vec<f64>,
    pub l2: f64,
    /// points skipped because their stencil touches a node or a wall
    pub excluded: usize,
}

/// Residual of the continuity equation between two snapshots `dt` apart,
/// centered in time (flux divergence averaged over both ends) and in space.
pub fn continuity_residual(
    m_t: &MadelungFields,
    m_t_plus: &MadelungFields,
    mass: f64,
    dt: f64,
) -> Result<ContinuityResidual> {
    if m_t.grid != m_t_plus.grid {
        return Err(Error::GridMismatch("continuity residual across different grids".into()));
    }
    if !(dt > 0.0) {
        return Err(invalid("dt", format!("must be positive, got {dt}")));
    }
    let gap = m_t_plus.time - m_t.time;
    if (gap - dt).abs() > 1e-9 * dt.max(1.0) {
        return Err(invalid("dt", format!("snapshots are {gap} apart, expected {dt}")));
    }
    let grid = m_t.grid;
    let h = grid.spacing();
    let periodic = grid.boundary() == Boundary::Periodic;

    let divergence = |m: &MadelungFields| -> Vec<Option<f64>> {
        let mut div = vec![Some(0.0); grid.len()];
        for axis in 0..grid.dimension() {
            let grad = m.action_gradient(axis);
            for line in lines(&grid, axis) {
                let flux: Vec<Option<f64>> =
                    line.iter().map(|&i| grad[i].map(|g| m.amplitude[i].powi(2) * g / mass)).collect();
                let n = line.len();
                for k in 0..n {
                    let (lo, hi) = if periodic {
                        ((k + n - 1) % n, (k + 1) % n)
                    } else if k == 0 || k == n - 1 {
                        div[line[k]] = None;
                        continue;
                    } else {
                        (k - 1, k + 1)
                    };
                    let d = match (flux[lo], flux[hi]) {
                        (Some(a), Some(b)) => Some((b - a) / (2.0 * h)),
                        _ => None,
                    };
                    let slot = &mut div[line[k]];
                    *slot = match (*slot, d) {
                        (Some(acc), Some(d)) => Some(acc + d),
                        _ => None,
                    };
                }
            }
        }
        div
    };

    let near_node = dilate(&grid, &m_t.node_mask, &m_t_plus.node_mask, 2);
    let div_a = divergence(m_t);
    let div_b = divergence(m_t_plus);
    let mut excluded = 0;
    let field: Vec<f64> = (0..grid.len())
        .map(|i| match (near_node[i], div_a[i], div_b[i]) {
            (false, Some(a), Some(b)) => {
                let drho = (m_t_plus.amplitude[i].powi(2) - m_t.amplitude[i].powi(2)) / dt;
                drho + 0.5 * (a + b)
            }
            _ => {
                excluded += 1;
                0.0
            }
        })
        .collect();
    let l2 = (sum(field.iter().map(|r| r * r)) * grid.cell_volume()).sqrt();
    Ok(ContinuityResidual { field, l2, excluded })
}

/// Points within `radius` lattice steps (along any single axis) of a masked
/// point in either mask.
pub(crate) fn dilate(grid: &Grid, a: &[bool], b: &[bool], radius: usize) -> Vec<bool> {
    let mut out: Vec<bool> = a.iter().zip(b).map(|(x, y)| *x || *y).collect();
    let seeds = out.clone();
    let n = grid.points() as isize;
    let periodic = grid.boundary() == Boundary::Periodic;
    for axis in 0..grid.dimension() {
        for line in lines(grid, axis) {
            for k in 0..n {
                if !seeds[line[k as usize]] {
                    continue;
                }
                for d in -(radius as isize)..=radius as isize {
                    let j = k + d;
                    let j = if periodic { j.rem_euclid(n) } else if (0..n).contains(&j) { j } else { continue };
                    out[line[j as usize]] = true;
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeDefect {
    /// ‖ψ(x1,x2) − ψ(x2,x1)‖/‖ψ‖
    pub symmetric: f64,
    /// ‖ψ(x1,x2) + ψ(x2,x1)‖/‖ψ‖
    pub antisymmetric: f64,
}

pub fn exchange_defect(psi2: &Wavefunction) -> Result<ExchangeDefect> {
    if psi2.grid().dimension() != 2 {
        return Err(invalid("grid", "exchange defect needs a square two-particle (2D) grid"));
    }
    let n = psi2.grid().points();
    let v = psi2.values();
    let norm = sum(v.iter().map(|z| z.norm_sqr())).sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroWavefunction);
    }
    let mut minus = 0.0;
    let mut plus = 0.0;
    for i in 0..n {
        for j in 0..n {
            let a = v[i * n + j];
            let b = v[j * n + i];
            minus += (a - b).norm_sqr();
            plus += (a + b).norm_sqr();
        }
    }
    Ok(ExchangeDefect { symmetric: minus.sqrt() / norm, antisymmetric: plus.sqrt() / norm })
}
