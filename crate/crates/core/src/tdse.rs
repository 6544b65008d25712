//! Time stepping of iħ∂ψ/∂t = −(ħ²/2m)∇²ψ + Vψ.
//!
//! Two independent schemes are provided: Strang split-step with spectral
//! kinetic flow on periodic grids, and Crank–Nicolson with the three-point
//! (five-point in 2D) stencil Hamiltonian on either boundary type.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{sum, Boundary, Grid, Wavefunction};
use crate::spectral::{wavenumbers, Spectral};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    Free,
    /// ½mω²x²
    Harmonic { omega: f64 },
    /// −depth/√(x² + softening²)
    SoftCoulomb { depth: f64, softening: f64 },
    /// `height` for |x| < width/2
    Barrier { height: f64, width: f64 },
    /// ½·strength·x² while t < switch_off_time, zero afterwards
    FocusingLens { strength: f64, switch_off_time: f64 },
    /// Tabulated values on every grid point (row-major in 2D).
    Custom { values: Vec<f64> },
}

impl Potential {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be positive, got {v}")))
            }
        };
        match self {
            Potential::Free => Ok(()),
            Potential::Harmonic { omega } => positive("omega", *omega),
            Potential::SoftCoulomb { depth, softening } => {
                positive("depth", *depth)?;
                positive("softening", *softening)
            }
            Potential::Barrier { height, width } => {
                if !height.is_finite() {
                    return Err(invalid("height", "must be finite"));
                }
                positive("width", *width)
            }
            Potential::FocusingLens { strength, switch_off_time } => {
                positive("strength", *strength)?;
                positive("switch_off_time", *switch_off_time)
            }
            Potential::Custom { values } => {
                if values.iter().all(|v| v.is_finite()) {
                    Ok(())
                } else {
                    Err(invalid("values", "tabulated potential must be finite everywhere"))
                }
            }
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, Potential::FocusingLens { .. })
    }

    /// Single-particle value at position x and time t.
    pub fn at(&self, x: f64, t: f64, mass: f64) -> f64 {
        match *self {
            Potential::Free => 0.0,
            Potential::Harmonic { omega } => 0.5 * mass * omega * omega * x * x,
            Potential::SoftCoulomb { depth, softening } => -depth / (x * x + softening * softening).sqrt(),
            Potential::Barrier { height, width } => {
                if x.abs() < 0.5 * width {
                    height
                } else {
                    0.0
                }
            }
            Potential::FocusingLens { strength, switch_off_time } => {
                if t < switch_off_time {
                    0.5 * strength * x * x
                } else {
                    0.0
                }
            }
            Potential::Custom { .. } => panic!("tabulated potentials have no closed form"),
        }
    }

    /// dV/dx of the single-particle potential.
    pub fn gradient(&self, x: f64, t: f64, mass: f64) -> f64 {
        match *self {
            Potential::Free | Potential::Barrier { .. } => 0.0,
            Potential::Harmonic { omega } => mass * omega * omega * x,
            Potential::SoftCoulomb { depth, softening } => depth * x / (x * x + softening * softening).powf(1.5),
            Potential::FocusingLens { strength, switch_off_time } => {
                if t < switch_off_time {
                    strength * x
                } else {
                    0.0
                }
            }
            Potential::Custom { .. } => panic!("tabulated potentials have no closed form"),
        }
    }

    /// Values on every grid point. In 2D the closed-form kinds act on each
    /// particle: V(x1) + V(x2).
    pub fn evaluate(&self, grid: &Grid, mass: f64, t: f64) -> Result<Vec<f64>> {
        self.validate()?;
        if let Potential::Custom { values } = self {
            if values.len() != grid.len() {
                return Err(Error::GridMismatch(format!(
                    "tabulated potential has {} values for {} points",
                    values.len(),
                    grid.len()
                )));
            }
            return Ok(values.clone());
        }
        let line: Vec<f64> = grid.axis().iter().map(|&x| self.at(x, t, mass)).collect();
        Ok(match grid.dimension() {
            1 => line,
            _ => line.iter().flat_map(|a| line.iter().map(move |b| a + b)).collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    SplitStepSpectral,
    CrankNicolson,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub steps_per_output: usize,
}

impl PropagatorConfig {
    pub fn new(scheme: Scheme, dt: f64, steps_per_output: usize) -> Self {
        PropagatorConfig { scheme, dt, steps_per_output }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if self.steps_per_output == 0 {
            return Err(invalid("steps_per_output", "must be at least 1"));
        }
        if self.scheme == Scheme::SplitStepSpectral {
            grid.ensure_spectral()?;
        }
        Ok(())
    }
}

/// Stepper with cached FFT plans, kinetic phases and potential values.
pub struct Propagator {
    grid: Grid,
    cfg: PropagatorConfig,
    hbar: f64,
    mass: f64,
    potential: Potential,
    cached: Option<Vec<f64>>,
    spectral: Option<(Spectral, Vec<Complex64>)>,
}

impl Propagator {
    pub fn new(psi: &Wavefunction, potential: &Potential, cfg: PropagatorConfig) -> Result<Self> {
        let grid = *psi.grid();
        cfg.validate(&grid)?;
        potential.validate()?;
        let (hbar, mass) = (psi.hbar(), psi.mass());
        let spectral = match cfg.scheme {
            Scheme::SplitStepSpectral => {
                let k = wavenumbers(grid.points(), grid.length());
                let phase = |k2: f64| Complex64::from_polar(1.0, -hbar * k2 * cfg.dt / (2.0 * mass));
                let kinetic: Vec<Complex64> = match grid.dimension() {
                    1 => k.iter().map(|k| phase(k * k)).collect(),
                    _ => k.iter().flat_map(|a| k.iter().map(move |b| phase(a * a + b * b))).collect(),
                };
                Some((Spectral::new(&grid), kinetic))
            }
            Scheme::CrankNicolson => None,
        };
        let cached = if potential.is_time_dependent() {
            None
        } else {
            Some(potential.evaluate(&grid, mass, 0.0)?)
        };
        Ok(Propagator { grid, cfg, hbar, mass, potential: potential.clone(), cached, spectral })
    }

    pub fn config(&self) -> &PropagatorConfig {
        &self.cfg
    }

    fn potential_at(&self, t: f64) -> Result<Vec<f64>> {
        match &self.cached {
            Some(v) => Ok(v.clone()),
            None => self.potential.evaluate(&self.grid, self.mass, t),
        }
    }

    /// Advances `psi` by one dt in place. The potential is sampled at the
    /// midpoint of the step.
    pub fn advance(&mut self, psi: &mut Wavefunction) -> Result<()> {
        if *psi.grid() != self.grid {
            return Err(Error::GridMismatch("wavefunction does not match the propagator grid".into()));
        }
        let dt = self.cfg.dt;
        let v = self.potential_at(psi.time + 0.5 * dt)?;
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let ratio = dt * vmax / self.hbar;
        if ratio > 1.0 {
            return Err(Error::PhaseStepTooLarge { ratio });
        }
        let t_next = psi.time + dt;
        match self.cfg.scheme {
            Scheme::SplitStepSpectral => {
                let half: Vec<Complex64> =
                    v.iter().map(|&v| Complex64::from_polar(1.0, -v * dt / (2.0 * self.hbar))).collect();
                let (plan, kinetic) = self.spectral.as_mut().expect("split-step plans");
                let values = psi.values_mut();
                for (z, h) in values.iter_mut().zip(&half) {
                    *z *= h;
                }
                plan.forward(values);
                for (z, k) in values.iter_mut().zip(kinetic.iter()) {
                    *z *= k;
                }
                plan.inverse(values);
                for (z, h) in values.iter_mut().zip(&half) {
                    *z *= h;
                }
            }
            Scheme::CrankNicolson => {
                let next = crank_nicolson(&self.grid, psi.values(), &v, self.hbar, self.mass, dt);
                psi.values_mut().copy_from_slice(&next);
            }
        }
        psi.time = t_next;
        if psi.values().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { time: t_next });
        }
        Ok(())
    }
}

/// One step, without caching.
pub fn step(psi: &Wavefunction, v: &Potential, cfg: PropagatorConfig) -> Result<Wavefunction> {
    let mut out = psi.clone();
    Propagator::new(psi, v, cfg)?.advance(&mut out)?;
    Ok(out)
}

/// Steps from `psi.time` to `psi.time + t_final`, returning a snapshot at
/// the start, every `steps_per_output` steps and at the end. `observer` sees
/// each snapshot as it is taken.
pub fn propagate(
    psi: &Wavefunction,
    v: &Potential,
    cfg: PropagatorConfig,
    t_final: f64,
    mut observer: impl FnMut(&Wavefunction) -> Result<()>,
) -> Result<Vec<Wavefunction>> {
    let steps = step_count(t_final, cfg.dt)?;
    let mut prop = Propagator::new(psi, v, cfg)?;
    let t0 = psi.time;
    let mut cur = psi.clone();
    let mut out = Vec::with_capacity(steps / cfg.steps_per_output + 2);
    observer(&cur)?;
    out.push(cur.clone());
    for k in 1..=steps {
        prop.advance(&mut cur)?;
        // fixed time stamps, independent of accumulated rounding
        cur.time = t0 + k as f64 * cfg.dt;
        if k % cfg.steps_per_output == 0 || k == steps {
            observer(&cur)?;
            out.push(cur.clone());
        }
    }
    Ok(out)
}

/// Number of steps of `dt` that make up `t_final`; errors unless it divides
/// evenly (to 1e−9 relative).
pub fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(invalid("t_final", format!("must be non-negative, got {t_final}")));
    }
    if !(dt > 0.0) {
        return Err(invalid("dt", format!("must be positive, got {dt}")));
    }
    let steps = (t_final / dt).round();
    if (steps * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(invalid("t_final", format!("{t_final} is not a whole number of steps of {dt}")));
    }
    Ok(steps as usize)
}

/// ⟨H⟩/⟨ψ|ψ⟩ with the Hamiltonian each scheme actually conserves: spectral
/// kinetic energy for split-step, the stencil Hamiltonian for Crank–Nicolson.
pub fn energy(psi: &Wavefunction, v: &Potential, scheme: Scheme) -> Result<f64> {
    let grid = *psi.grid();
    let (hbar, mass) = (psi.hbar(), psi.mass());
    let vals = v.evaluate(&grid, mass, psi.time)?;
    let norm = psi.norm_sq();
    if norm == 0.0 {
        return Err(Error::ZeroWavefunction);
    }
    let dv = grid.cell_volume();
    let potential = sum(psi.values().iter().zip(&vals).map(|(z, v)| v * z.norm_sqr())) * dv;
    let kinetic = match scheme {
        Scheme::SplitStepSpectral => {
            grid.ensure_spectral()?;
            let mut buf = psi.values().to_vec();
            Spectral::new(&grid).forward(&mut buf);
            let k = wavenumbers(grid.points(), grid.length());
            let n = grid.points();
            let k2 = |idx: usize| match grid.dimension() {
                1 => k[idx] * k[idx],
                _ => k[idx / n].powi(2) + k[idx % n].powi(2),
            };
            let weight = dv / grid.len() as f64;
            hbar * hbar / (2.0 * mass) * sum(buf.iter().enumerate().map(|(i, z)| k2(i) * z.norm_sqr())) * weight
        }
        Scheme::CrankNicolson => {
            let zero = vec![0.0; grid.len()];
            let t = apply_hamiltonian(&grid, psi.values(), &zero, hbar, mass);
            sum(psi.values().iter().zip(&t).map(|(a, b)| (a.conj() * b).re)) * dv
        }
    };
    Ok((kinetic + potential) / norm)
}

/// Stencil Hamiltonian −(ħ²/2m)Δ_h + V. Dirichlet grids hold ψ = 0 at the
/// wall sites (index 0 on each axis) and beyond the last point.
pub(crate) fn apply_hamiltonian(
    grid: &Grid,
    psi: &[Complex64],
    v: &[f64],
    hbar: f64,
    mass: f64,
) -> Vec<Complex64> {
    let n = grid.points();
    let c = hbar * hbar / (2.0 * mass * grid.spacing().powi(2));
    let periodic = grid.boundary() == Boundary::Periodic;
    let wrap = |a: isize| {
        if periodic {
            Some(a.rem_euclid(n as isize) as usize)
        } else if a >= 1 && a < n as isize {
            Some(a as usize)
        } else {
            None
        }
    };
    let get = |idx: Option<usize>| idx.map_or(Complex64::default(), |i| psi[i]);
    let mut out = vec![Complex64::default(); psi.len()];
    match grid.dimension() {
        1 => {
            for k in 0..n {
                if !periodic && k == 0 {
                    continue;
                }
                let ki = k as isize;
                let lap = get(wrap(ki - 1)) - 2.0 * psi[k] + get(wrap(ki + 1));
                out[k] = -c * lap + v[k] * psi[k];
            }
        }
        _ => {
            for i in 0..n {
                for j in 0..n {
                    if !periodic && (i == 0 || j == 0) {
                        continue;
                    }
                    let (ii, jj) = (i as isize, j as isize);
                    let idx = i * n + j;
                    let at = |a: isize, b: isize| match (wrap(a), wrap(b)) {
                        (Some(a), Some(b)) => psi[a * n + b],
                        _ => Complex64::default(),
                    };
                    let lap = at(ii - 1, jj) + at(ii + 1, jj) + at(ii, jj - 1) + at(ii, jj + 1) - 4.0 * psi[idx];
                    out[idx] = -c * lap + v[idx] * psi[idx];
                }
            }
        }
    }
    out
}

fn crank_nicolson(grid: &Grid, psi: &[Complex64], v: &[f64], hbar: f64, mass: f64, dt: f64) -> Vec<Complex64> {
    let tau = Complex64::new(0.0, dt / (2.0 * hbar));
    let h_psi = apply_hamiltonian(grid, psi, v, hbar, mass);
    let rhs: Vec<Complex64> = psi.iter().zip(&h_psi).map(|(p, hp)| p - tau * hp).collect();
    match grid.dimension() {
        1 => {
            let n = grid.points();
            let c = hbar * hbar / (2.0 * mass * grid.spacing().powi(2));
            let off = -tau * c;
            let diag: Vec<Complex64> = v.iter().map(|&vk| 1.0 + tau * (2.0 * c + vk)).collect();
            match grid.boundary() {
                Boundary::Periodic => solve_cyclic(off, &diag, off, &rhs),
                Boundary::Dirichlet => {
                    let mut out = vec![Complex64::default(); n];
                    let inner = solve_tridiagonal(off, &diag[1..], off, &rhs[1..]);
                    out[1..].copy_from_slice(&inner);
                    out
                }
            }
        }
        _ => solve_normal_cg(grid, &rhs, psi, v, hbar, mass, tau),
    }
}

/// Thomas algorithm for constant off-diagonals.
fn solve_tridiagonal(sub: Complex64, diag: &[Complex64], sup: Complex64, rhs: &[Complex64]) -> Vec<Complex64> {
    let n = diag.len();
    let mut c = vec![Complex64::default(); n];
    let mut d = vec![Complex64::default(); n];
    c[0] = sup / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub * c[i - 1];
        c[i] = sup / m;
        d[i] = (rhs[i] - sub * d[i - 1]) / m;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    x
}

/// Periodic tridiagonal system via Sherman–Morrison.
fn solve_cyclic(sub: Complex64, diag: &[Complex64], sup: Complex64, rhs: &[Complex64]) -> Vec<Complex64> {
    let n = diag.len();
    // corners: A[0][n-1] = sub, A[n-1][0] = sup
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= sup * sub / gamma;
    let x = solve_tridiagonal(sub, &b, sup, rhs);
    let mut u = vec![Complex64::default(); n];
    u[0] = gamma;
    u[n - 1] = sup;
    let z = solve_tridiagonal(sub, &b, sup, &u);
    // v = (1, 0, ..., 0, sub/gamma)
    let vx = x[0] + sub / gamma * x[n - 1];
    let vz = z[0] + sub / gamma * z[n - 1];
    let factor = vx / (1.0 + vz);
    x.iter().zip(&z).map(|(xi, zi)| xi - factor * zi).collect()
}

/// Solves (1 + τH)x = b for imaginary τ through the Hermitian positive
/// definite normal equations (1 + |τ|²H²)x = (1 − τH)b by conjugate gradients.
fn solve_normal_cg(
    grid: &Grid,
    b: &[Complex64],
    guess: &[Complex64],
    v: &[f64],
    hbar: f64,
    mass: f64,
    tau: Complex64,
) -> Vec<Complex64> {
    let h = |x: &[Complex64]| apply_hamiltonian(grid, x, v, hbar, mass);
    let normal = |x: &[Complex64]| -> Vec<Complex64> {
        let hx = h(x);
        let hhx = h(&hx);
        x.iter().zip(&hhx).map(|(xi, hh)| xi + tau.norm_sqr() * hh).collect()
    };
    let dot = |a: &[Complex64], b: &[Complex64]| -> f64 { sum(a.iter().zip(b).map(|(x, y)| (x.conj() * y).re)) };
    let hb = h(b);
    let rhs: Vec<Complex64> = b.iter().zip(&hb).map(|(bi, hbi)| bi - tau * hbi).collect();
    let mut x = guess.to_vec();
    let ax = normal(&x);
    let mut r: Vec<Complex64> = rhs.iter().zip(&ax).map(|(a, b)| a - b).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = 1e-30 * dot(&rhs, &rhs).max(f64::MIN_POSITIVE);
    for _ in 0..10 * b.len() {
        if rr <= target {
            break;
        }
        let ap = normal(&p);
        let alpha = rr / dot(&p, &ap);
        for ((xi, ri), (pi, api)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&ap)) {
            *xi += alpha * pi;
            *ri -= alpha * api;
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner_product, observables};
    use crate::states;
    use std::f64::consts::TAU;

    fn cfg(scheme: Scheme, dt: f64) -> PropagatorConfig {
        PropagatorConfig::new(scheme, dt, 1)
    }

    #[test]
    fn free_plane_wave_advances_by_its_energy_phase() {
        let g = Grid::spectral(1, 128, 10.0).unwrap();
        let (hbar, mass, dt) = (1.2, 0.8, 0.05);
        let p0 = 4.0 * TAU * hbar / 10.0;
        let psi = states::plane_wave(g, hbar, mass, p0).unwrap();
        let next = step(&psi, &Potential::Free, cfg(Scheme::SplitStepSpectral, dt)).unwrap();
        let phase = Complex64::from_polar(1.0, -p0 * p0 / (2.0 * mass) * dt / hbar);
        for (a, b) in psi.values().iter().zip(next.values()) {
            assert!((a * phase - b).norm() < 1e-12);
        }
        assert!((next.time - dt).abs() < 1e-15);
    }

    #[test]
    fn harmonic_ground_state_is_stationary() {
        let g = Grid::spectral(1, 256, 20.0).unwrap();
        let psi = states::harmonic_eigenstate(g, 1.0, 1.0, 1.0, 0).unwrap();
        let v = Potential::Harmonic { omega: 1.0 };
        let out = propagate(&psi, &v, PropagatorConfig::new(Scheme::SplitStepSpectral, 1e-3, 1000), 1.0, |_| Ok(()))
            .unwrap();
        let overlap = inner_product(&psi, out.last().unwrap()).unwrap().norm();
        assert!((overlap - 1.0).abs() < 1e-6, "{overlap}");
    }

    #[test]
    fn free_gaussian_spreads_by_the_analytic_law() {
        let (hbar, mass, sigma0) = (1.0, 1.0, 1.0);
        let g = Grid::spectral(1, 1024, 80.0).unwrap();
        let psi = states::gaussian(g, hbar, mass, sigma0, 0.0, 0.0).unwrap();
        let t = 3.0;
        let out = propagate(&psi, &Potential::Free, PropagatorConfig::new(Scheme::SplitStepSpectral, 0.01, 300), t, |_| {
            Ok(())
        })
        .unwrap();
        let dx = observables(out.last().unwrap()).unwrap().var_x.sqrt();
        let expect = sigma0 * (1.0 + (hbar * t / (2.0 * mass * sigma0 * sigma0)).powi(2)).sqrt();
        assert!((dx / expect - 1.0).abs() < 1e-4, "{dx} vs {expect}");
    }

    #[test]
    fn zero_duration_returns_input() {
        let g = Grid::spectral(1, 64, 10.0).unwrap();
        let psi = states::gaussian(g, 1.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        let out = propagate(&psi, &Potential::Free, cfg(Scheme::CrankNicolson, 0.1), 0.0, |_| Ok(())).unwrap();
        assert_eq!(out, vec![psi]);
    }

    #[test]
    fn crank_nicolson_conserves_norm_and_stencil_energy() {
        for boundary in [Boundary::Periodic, Boundary::Dirichlet] {
            let g = Grid::new(1, 200, 20.0, boundary).unwrap();
            let psi = states::gaussian(g, 1.0, 1.0, 1.0, -1.0, 1.5).unwrap();
            let v = Potential::Harmonic { omega: 0.7 };
            let e0 = energy(&psi, &v, Scheme::CrankNicolson).unwrap();
            let out = propagate(&psi, &v, PropagatorConfig::new(Scheme::CrankNicolson, 0.01, 500), 5.0, |_| Ok(()))
                .unwrap();
            let last = out.last().unwrap();
            assert!((last.norm_sq() - 1.0).abs() < 1e-12);
            let e1 = energy(last, &v, Scheme::CrankNicolson).unwrap();
            assert!(((e1 - e0) / e0).abs() < 1e-12, "{boundary:?}: {e0} -> {e1}");
        }
    }

    #[test]
    fn crank_nicolson_2d_matches_product_of_1d_runs() {
        let line = Grid::new(1, 32, 12.0, Boundary::Periodic).unwrap();
        let plane = Grid::new(2, 32, 12.0, Boundary::Periodic).unwrap();
        let a = states::gaussian(line, 1.0, 1.0, 1.0, -0.5, 0.4).unwrap();
        let b = states::gaussian(line, 1.0, 1.0, 1.2, 0.8, -0.2).unwrap();
        let v = Potential::Harmonic { omega: 0.5 };
        let c = cfg(Scheme::CrankNicolson, 0.02);
        let a1 = step(&a, &v, c).unwrap();
        let b1 = step(&b, &v, c).unwrap();
        let pair = states::two_particle(plane, &a, &b, states::Exchange::Product).unwrap();
        let pair1 = step(&pair, &v, c).unwrap();
        // CN is not separable exactly: the cross term τ²H1H2 is second order in dt
        let expect = states::two_particle(plane, &a1, &b1, states::Exchange::Product).unwrap();
        let diff = pair1.values().iter().zip(expect.values()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
            * plane.spacing();
        assert!(diff < 1e-3, "{diff}");
        assert!((pair1.norm_sq() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn linearity() {
        let g = Grid::spectral(1, 128, 20.0).unwrap();
        let a = states::gaussian(g, 1.0, 1.0, 1.0, -2.0, 1.0).unwrap();
        let b = states::harmonic_eigenstate(g, 1.0, 1.0, 1.0, 2).unwrap();
        let (alpha, beta) = (Complex64::new(0.3, -0.7), Complex64::new(-1.1, 0.2));
        let combo = a.with_values(a.values().iter().zip(b.values()).map(|(x, y)| alpha * x + beta * y).collect());
        let v = Potential::SoftCoulomb { depth: 1.0, softening: 0.5 };
        for scheme in [Scheme::SplitStepSpectral, Scheme::CrankNicolson] {
            let c = cfg(scheme, 0.01);
            let (sa, sb, sc) = (step(&a, &v, c).unwrap(), step(&b, &v, c).unwrap(), step(&combo, &v, c).unwrap());
            for k in 0..g.len() {
                let lin = alpha * sa.values()[k] + beta * sb.values()[k];
                assert!((lin - sc.values()[k]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_configurations() {
        let dirichlet = Grid::new(1, 64, 10.0, Boundary::Dirichlet).unwrap();
        let psi = states::gaussian(dirichlet, 1.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            step(&psi, &Potential::Free, cfg(Scheme::SplitStepSpectral, 0.01)),
            Err(Error::NotSpectral { .. })
        ));
        assert!(step(&psi, &Potential::Free, cfg(Scheme::CrankNicolson, -0.01)).is_err());
        let big = Potential::Barrier { height: 1e4, width: 1.0 };
        assert!(matches!(
            step(&psi, &big, cfg(Scheme::CrankNicolson, 0.01)),
            Err(Error::PhaseStepTooLarge { .. })
        ));
        let wrong = Potential::Custom { values: vec![0.0; 3] };
        assert!(step(&psi, &wrong, cfg(Scheme::CrankNicolson, 0.01)).is_err());
        let nan = Potential::Custom { values: vec![f64::NAN; 64] };
        assert!(step(&psi, &nan, cfg(Scheme::CrankNicolson, 0.01)).is_err());
        assert!(step_count(1.0, 0.3).is_err());
        assert_eq!(step_count(1.0, 0.25).unwrap(), 4);
    }

    #[test]
    fn lens_switches_off() {
        let lens = Potential::FocusingLens { strength: 2.0, switch_off_time: 0.5 };
        assert_eq!(lens.at(1.0, 0.4, 1.0), 1.0);
        assert_eq!(lens.at(1.0, 0.5, 1.0), 0.0);
        assert!(lens.is_time_dependent());
    }
}
