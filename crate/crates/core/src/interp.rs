//! Four-point (cubic Lagrange) interpolation of grid fields.

use crate::grid::{Boundary, Grid};

/// Interpolates a 1D field at `x`. Periodic grids wrap; Dirichlet grids
/// return `None` outside the stored points and shift the stencil inward at
/// the ends.
pub(crate) fn cubic(grid: &Grid, values: &[f64], x: f64) -> Option<f64> {
    let n = values.len();
    let h = grid.spacing();
    let periodic = grid.boundary() == Boundary::Periodic;
    let mut s = (x - grid.lower()) / h;
    if periodic {
        s = s.rem_euclid(n as f64);
    } else if !(0.0..=(n - 1) as f64).contains(&s) {
        return None;
    }
    let mut base = s.floor() as isize - 1;
    if !periodic {
        base = base.clamp(0, n as isize - 4);
    }
    let t = s - base as f64;
    // Lagrange basis on nodes 0,1,2,3 evaluated at t
    let w = [
        -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0,
        t * (t - 2.0) * (t - 3.0) / 2.0,
        -t * (t - 1.0) * (t - 3.0) / 2.0,
        t * (t - 1.0) * (t - 2.0) / 6.0,
    ];
    let mut acc = 0.0;
    for (j, wj) in w.iter().enumerate() {
        let idx = (base + j as isize).rem_euclid(n as isize) as usize;
        acc += wj * values[idx];
    }
    Some(acc)
}
