//! Analytic initial states sampled on a grid. Every constructor returns a
//! normalized wavefunction.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{Boundary, Grid, Wavefunction};

/// ψ ∝ exp(-(x-x0)²/4σ0² + i p0 x/ħ), so that Δx = σ0 and Δp = ħ/2σ0.
pub fn gaussian(grid: Grid, hbar: f64, mass: f64, sigma0: f64, x0: f64, p0: f64) -> Result<Wavefunction> {
    chirped_gaussian(grid, hbar, mass, sigma0, x0, p0, None)
}

/// Gaussian with an extra action −m(x−x0)²/(2 t_f): every classical ray
/// launched from it meets at x0 after time t_f.
pub fn chirped_gaussian(
    grid: Grid,
    hbar: f64,
    mass: f64,
    sigma0: f64,
    x0: f64,
    p0: f64,
    focus_time: Option<f64>,
) -> Result<Wavefunction> {
    if !(sigma0 > 0.0) {
        return Err(invalid("sigma0", format!("must be positive, got {sigma0}")));
    }
    if let Some(tf) = focus_time {
        if !(tf > 0.0) {
            return Err(invalid("focus_time", format!("must be positive, got {tf}")));
        }
    }
    Wavefunction::from_fn(grid, hbar, mass, |x| {
        let d = x[0] - x0;
        let chirp = focus_time.map_or(0.0, |tf| -mass * d * d / (2.0 * tf));
        let action = p0 * x[0] + chirp;
        Complex64::from_polar((-d * d / (4.0 * sigma0 * sigma0)).exp(), action / hbar)
    })?
    .normalized()
}

/// Constant-amplitude wave exp(i p0 x/ħ); p0 must fit the periodic box.
pub fn plane_wave(grid: Grid, hbar: f64, mass: f64, p0: f64) -> Result<Wavefunction> {
    if grid.boundary() != Boundary::Periodic {
        return Err(invalid("boundary", "plane waves need a periodic grid"));
    }
    let modes = p0 * grid.length() / (TAU * hbar);
    if (modes - modes.round()).abs() > 1e-9 {
        return Err(invalid(
            "p0",
            format!("{p0} is not commensurate with the box (needs a multiple of 2πħ/L)"),
        ));
    }
    // use the exact lattice phase so the field is exactly periodic
    let k = modes.round() * TAU / grid.length();
    Wavefunction::from_fn(grid, hbar, mass, |x| Complex64::from_polar(1.0, k * x[0]))?.normalized()
}

/// Harmonic-oscillator eigenfunction n for frequency ω, via the stable
/// three-term recurrence for Hermite functions.
pub fn harmonic_eigenstate(grid: Grid, hbar: f64, mass: f64, omega: f64, n: usize) -> Result<Wavefunction> {
    if !(omega > 0.0) {
        return Err(invalid("omega", format!("must be positive, got {omega}")));
    }
    let scale = (mass * omega / hbar).sqrt();
    Wavefunction::from_fn(grid, hbar, mass, |x| Complex64::new(hermite_function(n, scale * x[0]), 0.0))?
        .normalized()
}

pub(crate) fn hermite_function(n: usize, xi: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-0.5 * xi * xi).exp();
    for k in 0..n {
        let next = (2.0 / (k as f64 + 1.0)).sqrt() * xi * cur - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Particle-in-a-box state n ≥ 1 on a Dirichlet grid (walls at ±L/2).
pub fn box_eigenstate(grid: Grid, hbar: f64, mass: f64, n: usize) -> Result<Wavefunction> {
    if grid.boundary() != Boundary::Dirichlet {
        return Err(invalid("boundary", "box eigenstates need a Dirichlet grid"));
    }
    if n == 0 {
        return Err(invalid("n", "box quantum numbers start at 1"));
    }
    let l = grid.length();
    Wavefunction::from_fn(grid, hbar, mass, |x| {
        Complex64::new((n as f64 * PI * (x[0] + 0.5 * l) / l).sin(), 0.0)
    })?
    .normalized()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exchange {
    /// φa(x1)φb(x2)
    Product,
    /// φa(x1)φb(x2) + φb(x1)φa(x2)
    Symmetric,
    /// φa(x1)φb(x2) − φb(x1)φa(x2)
    Antisymmetric,
}

/// Two-particle state on a 2D grid built from single-particle states that
/// live on the matching 1D grid.
pub fn two_particle(grid: Grid, a: &Wavefunction, b: &Wavefunction, exchange: Exchange) -> Result<Wavefunction> {
    if grid.dimension() != 2 {
        return Err(invalid("grid", "two-particle states need a 2D grid"));
    }
    let line = Grid::new(1, grid.points(), grid.length(), grid.boundary())?;
    if *a.grid() != line || *b.grid() != line {
        return Err(crate::Error::GridMismatch("single-particle states must use the 2D grid's axis".into()));
    }
    let n = grid.points();
    let (fa, fb) = (a.values(), b.values());
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let direct = fa[i] * fb[j];
            let swapped = fb[i] * fa[j];
            values.push(match exchange {
                Exchange::Product => direct,
                Exchange::Symmetric => direct + swapped,
                Exchange::Antisymmetric => direct - swapped,
            });
        }
    }
    Wavefunction::new(grid, values, a.hbar(), a.mass())?.normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::inner_product;

    #[test]
    fn hermite_functions_are_orthonormal() {
        let g = Grid::spectral(1, 512, 30.0).unwrap();
        let states: Vec<_> = (0..5).map(|n| harmonic_eigenstate(g, 1.0, 1.0, 1.0, n).unwrap()).collect();
        for (i, a) in states.iter().enumerate() {
            for (j, b) in states.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((inner_product(a, b).unwrap().re - expect).abs() < 1e-12);
            }
        }
        // sample without renormalizing: the recurrence is already normalized
        let h = g.spacing();
        let raw: f64 = g.axis().iter().map(|&x| hermite_function(3, x).powi(2)).sum::<f64>() * h;
        assert!((raw - 1.0).abs() < 1e-12);
    }

    #[test]
    fn incommensurate_plane_wave_is_rejected() {
        let g = Grid::spectral(1, 64, 10.0).unwrap();
        assert!(plane_wave(g, 1.0, 1.0, 1.0).is_err());
        assert!(plane_wave(g, 1.0, 1.0, TAU / 10.0).is_ok());
    }

    #[test]
    fn antisymmetric_pair_vanishes_on_diagonal() {
        let line = Grid::spectral(1, 32, 12.0).unwrap();
        let plane = Grid::spectral(2, 32, 12.0).unwrap();
        let a = harmonic_eigenstate(line, 1.0, 1.0, 1.0, 0).unwrap();
        let b = harmonic_eigenstate(line, 1.0, 1.0, 1.0, 1).unwrap();
        let psi = two_particle(plane, &a, &b, Exchange::Antisymmetric).unwrap();
        for i in 0..32 {
            assert!(psi.values()[i * 32 + i].norm() < 1e-15);
        }
        assert!((psi.norm_sq() - 1.0).abs() < 1e-12);
    }
}
