//! Uniform lattices, complex wavefunctions on them, and the quadrature /
//! spectral observables every other module is checked against.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::{self, Spectral};
use crate::stencil::{self, Extension};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

/// Square lattice in one or two dimensions, centered on the origin.
///
/// Point `k` along an axis sits at `-length/2 + k·spacing`. For Dirichlet
/// grids the walls are at `-length/2` (point 0) and `+length/2` (one spacing
/// past the last stored point).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dimension: usize,
    points: usize,
    length: f64,
    boundary: Boundary,
}

impl Grid {
    pub fn new(dimension: usize, points: usize, length: f64, boundary: Boundary) -> Result<Self> {
        if dimension != 1 && dimension != 2 {
            return Err(invalid("dimension", format!("must be 1 or 2, got {dimension}")));
        }
        if points < 8 {
            return Err(invalid("points_per_axis", format!("must be at least 8, got {points}")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(invalid("box_length", format!("must be positive, got {length}")));
        }
        Ok(Grid { dimension, points, length, boundary })
    }

    /// Constructor for grids that will be stepped spectrally.
    pub fn spectral(dimension: usize, points: usize, length: f64) -> Result<Self> {
        let grid = Self::new(dimension, points, length, Boundary::Periodic)?;
        grid.ensure_spectral()?;
        Ok(grid)
    }

    pub fn ensure_spectral(&self) -> Result<()> {
        if self.boundary != Boundary::Periodic || !self.points.is_power_of_two() {
            return Err(Error::NotSpectral { points: self.points });
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Points along one axis.
    pub fn points(&self) -> usize {
        self.points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    /// Total number of lattice sites.
    pub fn len(&self) -> usize {
        self.points.pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of one site.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dimension as i32)
    }

    pub fn coordinate(&self, k: usize) -> f64 {
        -0.5 * self.length + k as f64 * self.spacing()
    }

    pub fn axis(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.coordinate(k)).collect()
    }

    pub fn lower(&self) -> f64 {
        -0.5 * self.length
    }

    pub fn upper(&self) -> f64 {
        0.5 * self.length
    }

    pub(crate) fn extension(&self) -> Extension {
        match self.boundary {
            Boundary::Periodic => Extension::Periodic,
            Boundary::Dirichlet => Extension::Odd,
        }
    }

    /// Lattice neighbors of a flat index. Periodic seams are included only
    /// when `wrap` is set.
    pub(crate) fn neighbors(&self, index: usize, wrap: bool) -> impl Iterator<Item = usize> + '_ {
        let n = self.points;
        let (i, j) = if self.dimension == 1 { (0, index) } else { (index / n, index % n) };
        let periodic = wrap && self.boundary == Boundary::Periodic;
        let step = move |c: usize, delta: isize| -> Option<usize> {
            let next = c as isize + delta;
            if next >= 0 && next < n as isize {
                Some(next as usize)
            } else if periodic {
                Some(next.rem_euclid(n as isize) as usize)
            } else {
                None
            }
        };
        let mut out = Vec::with_capacity(4);
        for d in [-1isize, 1] {
            if let Some(jj) = step(j, d) {
                out.push(if self.dimension == 1 { jj } else { i * n + jj });
            }
            if self.dimension == 2 {
                if let Some(ii) = step(i, d) {
                    out.push(ii * n + j);
                }
            }
        }
        out.into_iter()
    }
}

/// Complex amplitude on a grid, with the physical constants it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    grid: Grid,
    values: Vec<Complex64>,
    pub time: f64,
    hbar: f64,
    mass: f64,
}

impl Wavefunction {
    pub fn new(grid: Grid, values: Vec<Complex64>, hbar: f64, mass: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if !(hbar > 0.0) || !hbar.is_finite() {
            return Err(invalid("hbar", format!("must be positive, got {hbar}")));
        }
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(invalid("mass", format!("must be positive, got {mass}")));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { time: 0.0 });
        }
        Ok(Wavefunction { grid, values, time: 0.0, hbar, mass })
    }

    /// Samples `f(x)` (1D) or `f(x1, x2)` (2D, passed as a slice).
    pub fn from_fn(
        grid: Grid,
        hbar: f64,
        mass: f64,
        f: impl Fn(&[f64]) -> Complex64,
    ) -> Result<Self> {
        let axis = grid.axis();
        let values = match grid.dimension() {
            1 => axis.iter().map(|&x| f(&[x])).collect(),
            _ => axis
                .iter()
                .flat_map(|&x1| axis.iter().map(move |&x2| (x1, x2)))
                .map(|(x1, x2)| f(&[x1, x2]))
                .collect(),
        };
        Self::new(grid, values, hbar, mass)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Copy with new amplitudes, keeping grid, constants and time.
    pub fn with_values(&self, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), self.values.len());
        Wavefunction { values, ..self.clone() }
    }

    pub fn norm_sq(&self) -> f64 {
        sum(self.values.iter().map(|z| z.norm_sqr())) * self.grid.cell_volume()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm_sq().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroWavefunction);
        }
        let scale = 1.0 / norm;
        for z in &mut self.values {
            *z *= scale;
        }
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        self.with_values(self.values.iter().map(|z| z * c).collect())
    }

    pub fn probability(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    pub(crate) fn ensure_normalized(&self, tolerance: f64) -> Result<()> {
        let norm_sq = self.norm_sq();
        if (norm_sq - 1.0).abs() > tolerance {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(())
    }

    pub(crate) fn ensure_dimension(&self, expected: usize) -> Result<()> {
        if self.grid.dimension() != expected {
            return Err(Error::Dimension { expected, found: self.grid.dimension() });
        }
        Ok(())
    }

    /// dψ/dx in 1D: spectral on periodic grids, fourth-order central
    /// differences with odd continuation through the walls on Dirichlet grids.
    pub fn derivative(&self) -> Result<Vec<Complex64>> {
        self.ensure_dimension(1)?;
        Ok(match self.grid.boundary() {
            Boundary::Periodic => {
                let mut plan = Spectral::new(&self.grid);
                spectral::derivative_1d(&mut plan, self.grid.length(), &self.values)
            }
            Boundary::Dirichlet => {
                let h = self.grid.spacing();
                let re: Vec<f64> = self.values.iter().map(|z| z.re).collect();
                let im: Vec<f64> = self.values.iter().map(|z| z.im).collect();
                let dre = stencil::first_derivative(&re, h, 4, Extension::Odd);
                let dim = stencil::first_derivative(&im, h, 4, Extension::Odd);
                dre.into_iter().zip(dim).map(|(a, b)| Complex64::new(a, b)).collect()
            }
        })
    }
}

/// ⟨a|b⟩ = Σ conj(a)·b·h^d.
pub fn inner_product(a: &Wavefunction, b: &Wavefunction) -> Result<Complex64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch("inner product of fields on different grids".into()));
    }
    let mut re = Neumaier::default();
    let mut im = Neumaier::default();
    for (x, y) in a.values.iter().zip(&b.values) {
        let z = x.conj() * y;
        re.add(z.re);
        im.add(z.im);
    }
    Ok(Complex64::new(re.total(), im.total()) * a.grid.cell_volume())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub norm_sq: f64,
}

/// Position moments by quadrature, momentum moments from |ψ̂(k)|² with
/// p = ħk on periodic grids (fourth-order differences on Dirichlet grids).
pub fn observables(psi: &Wavefunction) -> Result<Observables> {
    psi.ensure_dimension(1)?;
    psi.ensure_normalized(1e-6)?;
    let grid = psi.grid();
    let h = grid.spacing();
    let hbar = psi.hbar();
    let norm_sq = psi.norm_sq();
    let rho = psi.probability();
    let axis = grid.axis();

    let mean_x = sum(axis.iter().zip(&rho).map(|(x, r)| x * r)) * h / norm_sq;
    let var_x = sum(axis.iter().zip(&rho).map(|(x, r)| (x - mean_x).powi(2) * r)) * h / norm_sq;

    let (mean_p, var_p) = match grid.boundary() {
        Boundary::Periodic => {
            let weights = momentum_density(psi);
            let k = spectral::wavenumbers(grid.points(), grid.length());
            let total = sum(weights.iter().copied());
            let mean_k = sum(k.iter().zip(&weights).map(|(k, w)| k * w)) / total;
            let var_k = sum(k.iter().zip(&weights).map(|(k, w)| (k - mean_k).powi(2) * w)) / total;
            (hbar * mean_k, hbar * hbar * var_k)
        }
        Boundary::Dirichlet => {
            let d = psi.derivative()?;
            let mean =
                hbar * sum(psi.values().iter().zip(&d).map(|(z, dz)| (z.conj() * dz).im)) * h / norm_sq;
            let p2 = hbar * hbar * sum(d.iter().map(|dz| dz.norm_sqr())) * h / norm_sq;
            (mean, (p2 - mean * mean).max(0.0))
        }
    };
    Ok(Observables { mean_x, mean_p, var_x: var_x.max(0.0), var_p, norm_sq })
}

/// Discrete momentum-space density |ψ̂_j|²·h/N in FFT order; sums to the
/// position-space norm (Parseval).
pub fn momentum_density(psi: &Wavefunction) -> Vec<f64> {
    let grid = psi.grid();
    let mut buf = psi.values().to_vec();
    Spectral::new(grid).forward(&mut buf);
    let weight = grid.cell_volume() / grid.len() as f64;
    buf.iter().map(|z| z.norm_sqr() * weight).collect()
}

/// Compensated (Neumaier) accumulator; fixes the rounding of grid-sized sums
/// independently of magnitude ordering.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Neumaier {
    sum: f64,
    c: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.c
    }
}

pub(crate) fn sum(iter: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Neumaier::default();
    for x in iter {
        acc.add(x);
    }
    acc.total()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn grid_examples() {
        let g = Grid::new(1, 256, 20.0, Boundary::Periodic).unwrap();
        assert_eq!(g.spacing(), 0.078125);
        let g = Grid::new(1, 8, 8.0, Boundary::Dirichlet).unwrap();
        assert_eq!((g.len(), g.spacing()), (8, 1.0));
        assert_eq!(g.coordinate(0), -4.0);
        let g = Grid::new(2, 64, 16.0, Boundary::Periodic).unwrap();
        assert_eq!(g.len(), 4096);
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(Grid::new(1, 4, 1.0, Boundary::Periodic).is_err());
        assert!(Grid::new(1, 64, 0.0, Boundary::Periodic).is_err());
        assert!(Grid::new(1, 64, -3.0, Boundary::Dirichlet).is_err());
        assert!(Grid::new(3, 64, 1.0, Boundary::Periodic).is_err());
        assert!(matches!(Grid::spectral(1, 96, 10.0), Err(Error::NotSpectral { points: 96 })));
        assert!(Grid::new(1, 96, 10.0, Boundary::Periodic).is_ok());
        let dirichlet = Grid::new(1, 64, 1.0, Boundary::Dirichlet).unwrap();
        assert!(dirichlet.ensure_spectral().is_err());
    }

    #[test]
    fn inner_product_examples() {
        let g = Grid::spectral(1, 256, 20.0).unwrap();
        let a = states::gaussian(g, 1.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(inner_product(&a, &a).unwrap().re, 1.0, epsilon = 1e-12);

        let b = a.scaled(Complex64::i());
        let z = inner_product(&a, &b).unwrap();
        assert!((z - Complex64::i()).norm() < 1e-12);

        let e0 = states::harmonic_eigenstate(g, 1.0, 1.0, 1.0, 0).unwrap();
        let e1 = states::harmonic_eigenstate(g, 1.0, 1.0, 1.0, 1).unwrap();
        assert!(inner_product(&e0, &e1).unwrap().norm() < 1e-10);

        let other = Grid::spectral(1, 128, 20.0).unwrap();
        let c = states::gaussian(other, 1.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        assert!(matches!(inner_product(&a, &c), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn gaussian_observables_match_closed_form() {
        // |ψ|² has standard deviation σ0 when ψ ∝ exp(-x²/4σ0²)
        let sigma0 = 1.0;
        let g = Grid::spectral(1, 512, 40.0).unwrap();
        let psi = states::gaussian(g, 1.0, 1.0, sigma0, 0.0, 0.0).unwrap();
        let obs = observables(&psi).unwrap();
        assert_relative_eq!(obs.var_x, sigma0 * sigma0, max_relative = 1e-12);
        assert_relative_eq!(obs.var_p, 1.0 / (4.0 * sigma0 * sigma0), max_relative = 1e-12);
        assert!(obs.mean_x.abs() < 1e-14 && obs.mean_p.abs() < 1e-14);
    }

    #[test]
    fn plane_wave_has_sharp_momentum() {
        let g = Grid::spectral(1, 128, 10.0).unwrap();
        let p0 = 3.0 * std::f64::consts::TAU / 10.0;
        let psi = states::plane_wave(g, 1.0, 1.0, p0).unwrap();
        let obs = observables(&psi).unwrap();
        assert_relative_eq!(obs.mean_p, p0, max_relative = 1e-12);
        assert!(obs.var_p < 1e-10);
    }

    #[test]
    fn dirichlet_box_ground_state_momentum() {
        let l = 1.0;
        let g = Grid::new(1, 512, l, Boundary::Dirichlet).unwrap();
        let psi = states::box_eigenstate(g, 1.0, 1.0, 1).unwrap();
        let obs = observables(&psi).unwrap();
        let pi = std::f64::consts::PI;
        assert_relative_eq!(obs.var_p, (pi / l).powi(2), max_relative = 1e-8);
        assert_relative_eq!(obs.var_x, l * l * (1.0 / 12.0 - 0.5 / (pi * pi)), max_relative = 1e-6);
        assert!(obs.mean_p.abs() < 1e-12);
    }

    #[test]
    fn observables_reject_unnormalized_input() {
        let g = Grid::spectral(1, 64, 10.0).unwrap();
        let psi = states::gaussian(g, 1.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        let doubled = psi.scaled(Complex64::new(2.0, 0.0));
        assert!(matches!(observables(&doubled), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn zero_field_cannot_be_normalized() {
        let g = Grid::spectral(1, 64, 10.0).unwrap();
        let mut psi = Wavefunction::new(g, vec![Complex64::default(); 64], 1.0, 1.0).unwrap();
        assert_eq!(psi.normalize(), Err(Error::ZeroWavefunction));
    }

    proptest! {
        #[test]
        fn parseval_and_phase_invariance(
            sigma in 0.5f64..2.0, x0 in -3.0f64..3.0, p0 in -2.0f64..2.0, theta in 0.0f64..6.3,
        ) {
            let g = Grid::spectral(1, 256, 40.0).unwrap();
            let psi = states::gaussian(g, 1.0, 1.0, sigma, x0, p0).unwrap();
            let momentum: f64 = sum(momentum_density(&psi));
            prop_assert!((momentum - psi.norm_sq()).abs() < 1e-12 * psi.norm_sq());

            let rotated = psi.scaled(Complex64::from_polar(1.0, theta));
            let a = observables(&psi).unwrap();
            let b = observables(&rotated).unwrap();
            prop_assert!((a.var_x - b.var_x).abs() < 1e-13 && (a.var_p - b.var_p).abs() < 1e-13);
            prop_assert!((a.mean_x - b.mean_x).abs() < 1e-13 && (a.mean_p - b.mean_p).abs() < 1e-13);
        }

        #[test]
        fn variances_are_translation_covariant(sigma in 0.5f64..2.0, p0 in -2.0f64..2.0, shift in 1usize..5) {
            let g = Grid::spectral(1, 256, 40.0).unwrap();
            let psi = states::gaussian(g, 1.0, 1.0, sigma, 0.0, p0).unwrap();
            let mut shifted = psi.values().to_vec();
            shifted.rotate_right(shift);
            let moved = psi.with_values(shifted);
            let a = observables(&psi).unwrap();
            let b = observables(&moved).unwrap();
            prop_assert!((a.var_x - b.var_x).abs() < 1e-10);
            prop_assert!((a.var_p - b.var_p).abs() < 1e-10);
            prop_assert!((b.mean_x - a.mean_x - shift as f64 * g.spacing()).abs() < 1e-10);
        }
    }
}
