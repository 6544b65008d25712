//! Position-momentum bound from the positivity of ∫|αxψ + ψ′|²dx, and the
//! split of ⟨p²⟩ into an action-gradient part and an amplitude-curvature part.
//!
//! Nothing here consumes ensemble or measurement data: every quantity is a
//! functional of a single wavefunction.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::grid::{observables, sum, Boundary, Grid, Wavefunction};
use crate::madelung::{self, dilate, lines, wrapped_steps, MadelungFields};
use crate::states;
use crate::stencil;

/// Stencil order for the derivatives of R and S in the H-J form.
const HJ_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Centering {
    /// ⟨x⟩ before centering
    pub shift_x: f64,
    /// ⟨p⟩ before centering
    pub shift_p: f64,
    /// true when either shift was significant and had to be removed
    pub applied: bool,
}

/// ψ moved to ⟨x⟩ = 0 (coordinate origin placed at ⟨x⟩) and ⟨p⟩ = 0 (phase
/// ramp exp(−i⟨p⟩x/ħ)), with its derivative.
#[derive(Debug, Clone)]
pub struct CenteredState {
    pub psi: Wavefunction,
    pub derivative: Vec<Complex64>,
    pub x: Vec<f64>,
    pub centering: Centering,
}

pub fn center(psi: &Wavefunction) -> Result<CenteredState> {
    let obs = observables(psi)?;
    let grid = *psi.grid();
    let hbar = psi.hbar();
    let (mean_x, mean_p) = (obs.mean_x, obs.mean_p);
    let applied = mean_x.abs() > 1e-12 * grid.length() || mean_p.abs() > 1e-12 * hbar / grid.spacing();
    let d = psi.derivative()?;
    let axis = grid.axis();
    let kappa = mean_p / hbar;
    let mut values = Vec::with_capacity(grid.len());
    let mut derivative = Vec::with_capacity(grid.len());
    for ((z, dz), &x) in psi.values().iter().zip(&d).zip(&axis) {
        let ramp = Complex64::from_polar(1.0, -kappa * x);
        values.push(ramp * z);
        // product rule keeps the spectral derivative exact even when the
        // ramp is not periodic on the box
        derivative.push(ramp * (dz - Complex64::new(0.0, kappa) * z));
    }
    let mut shifted = psi.with_values(values);
    shifted.time = psi.time;
    Ok(CenteredState {
        psi: shifted,
        derivative,
        x: axis.iter().map(|x| x - mean_x).collect(),
        centering: Centering { shift_x: mean_x, shift_p: mean_p, applied },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylValue {
    pub g: f64,
    pub centering: Centering,
}

fn weyl_sum(state: &CenteredState, alpha: f64) -> f64 {
    let h = state.psi.grid().spacing();
    sum(state
        .psi
        .values()
        .iter()
        .zip(&state.derivative)
        .zip(&state.x)
        .map(|((z, dz), x)| (alpha * x * z + dz).norm_sqr()))
        * h
}

/// g(α) = ∫|αxψ + dψ/dx|² dx on the centered state. Expands to
/// α²Δx² − α + Δp²/ħ².
pub fn weyl_functional(psi: &Wavefunction, alpha: f64) -> Result<WeylValue> {
    let state = center(psi)?;
    Ok(WeylValue { g: weyl_sum(&state, alpha), centering: state.centering })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylMinimum {
    pub alpha_star: f64,
    pub g_min: f64,
    pub dx2: f64,
    pub dp2: f64,
    /// √(Δx²Δp²)
    pub product: f64,
    pub centering: Centering,
}

/// Evaluates g at its stationary point α* = 1/(2Δx²) and checks both
/// g(α*) ≥ −1e−8 and ΔxΔp ≥ (ħ/2)(1 − 1e−6).
pub fn weyl_minimize(psi: &Wavefunction) -> Result<WeylMinimum> {
    let state = center(psi)?;
    weyl_minimize_centered(&state)
}

fn weyl_minimize_centered(state: &CenteredState) -> Result<WeylMinimum> {
    let grid = state.psi.grid();
    let h = grid.spacing();
    let dx2 = sum(state.psi.values().iter().zip(&state.x).map(|(z, x)| x * x * z.norm_sqr())) * h;
    if dx2 < h * h {
        return Err(invalid("psi", format!("Δx² = {dx2:.3e} is below the grid resolution h² = {:.3e}", h * h)));
    }
    let dp2 = observables(&state.psi)?.var_p;
    let alpha_star = 0.5 / dx2;
    let g_min = weyl_sum(state, alpha_star);
    let hbar = state.psi.hbar();
    let product = (dx2 * dp2).sqrt();
    if g_min < -1e-8 {
        return Err(Error::BoundViolated(format!("g(α*) = {g_min:.3e} < 0")));
    }
    if product < 0.5 * hbar * (1.0 - 1e-6) {
        return Err(Error::BoundViolated(format!("ΔxΔp = {product} < ħ/2 = {}", 0.5 * hbar)));
    }
    Ok(WeylMinimum { alpha_star, g_min, dx2, dp2, product, centering: state.centering })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HjDecomposition {
    /// ∫R²(∂S/∂x)² dx
    pub drift: f64,
    /// −ħ²∫R·R″ dx
    pub quantum: f64,
    /// ħ²∫(R′)² dx, the same quantity after integration by parts
    pub quantum_by_parts: f64,
    /// drift + quantum
    pub total: f64,
    /// fraction of the norm sitting on excluded points
    pub excluded_measure: f64,
}

/// ⟨p²⟩ written through R and S. The curvature term carries the sign that
/// reproduces ⟨p²⟩: −ħ²∫R·R″ = +ħ²∫(R′)².
///
/// Points whose eighth-order stencil reaches a node-masked point (or, on a
/// Dirichlet grid, beyond a wall for S) are left out and their share of the
/// norm is reported; more than 1% is an error.
pub fn hj_decomposition(m: &MadelungFields) -> Result<HjDecomposition> {
    let grid = *m.grid();
    if grid.dimension() != 1 {
        return Err(Error::Dimension { expected: 1, found: grid.dimension() });
    }
    let h = grid.spacing();
    let hbar = m.hbar();
    let n = grid.points();
    let periodic = grid.boundary() == Boundary::Periodic;
    let line = &lines(&grid, 0)[0];
    let steps = wrapped_steps(&m.action, line, hbar, periodic);
    let ds = stencil::first_derivative_from_steps(&steps, n, h, HJ_ORDER, periodic);
    let ext = grid.extension();
    let r = &m.amplitude;
    let dr = stencil::first_derivative(r, h, HJ_ORDER, ext);
    let d2r = stencil::second_derivative(r, h, HJ_ORDER, ext);

    let radius = stencil::radius(HJ_ORDER);
    let near_node = dilate(&grid, &m.node_mask, &m.node_mask, radius);
    let keep: Vec<bool> = (0..n).map(|k| !near_node[k] && ds[k].is_some()).collect();

    let total_norm = sum(r.iter().map(|x| x * x));
    let excluded = sum((0..n).filter(|&k| !keep[k]).map(|k| r[k] * r[k]));
    let excluded_measure = if total_norm > 0.0 { excluded / total_norm } else { 0.0 };
    if excluded_measure > 0.01 {
        return Err(Error::NodeMeasure { measure: excluded_measure });
    }

    let kept = || (0..n).filter(|&k| keep[k]);
    let drift = sum(kept().map(|k| r[k] * r[k] * ds[k].unwrap().powi(2))) * h;
    let quantum = -hbar * hbar * sum(kept().map(|k| r[k] * d2r[k])) * h;
    let quantum_by_parts = hbar * hbar * sum(kept().map(|k| dr[k] * dr[k])) * h;
    Ok(HjDecomposition { drift, quantum, quantum_by_parts, total: drift + quantum, excluded_measure })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyReport {
    pub dx2: f64,
    pub dp2_spectral: f64,
    pub dp2_hj: f64,
    pub hj_drift_term: f64,
    pub hj_quantum_term: f64,
    /// |−ħ²∫RR″ − ħ²∫R′²| relative to ⟨p²⟩
    pub parts_identity_gap: f64,
    pub excluded_measure: f64,
    pub product: f64,
    pub g_min_alpha: f64,
    pub g_min: f64,
    pub centering: Centering,
}

/// Centers ψ, minimizes the Weyl functional and decomposes ⟨p²⟩ of the
/// centered state through its Madelung fields.
pub fn uncertainty_report(psi: &Wavefunction) -> Result<UncertaintyReport> {
    let state = center(psi)?;
    let min = weyl_minimize_centered(&state)?;
    let fields = madelung::decompose(&state.psi, madelung::DEFAULT_R_FLOOR)?;
    let hj = hj_decomposition(&fields)?;
    let scale = min.dp2.abs().max(f64::MIN_POSITIVE);
    Ok(UncertaintyReport {
        dx2: min.dx2,
        dp2_spectral: min.dp2,
        dp2_hj: hj.total,
        hj_drift_term: hj.drift,
        hj_quantum_term: hj.quantum,
        parts_identity_gap: (hj.quantum - hj.quantum_by_parts).abs() / scale,
        excluded_measure: hj.excluded_measure,
        product: min.product,
        g_min_alpha: min.alpha_star,
        g_min: min.g_min,
        centering: min.centering,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaLimitRow {
    pub sigma: f64,
    pub dx2: f64,
    pub dp2: f64,
    pub hj_quantum_term: f64,
    pub product: f64,
}

/// Real Gaussians of shrinking width on a fixed grid. Widths must be
/// strictly decreasing and at least four grid spacings.
pub fn delta_limit_study(grid: Grid, hbar: f64, mass: f64, widths: &[f64]) -> Result<Vec<DeltaLimitRow>> {
    if widths.is_empty() {
        return Err(invalid("widths", "need at least one width"));
    }
    if widths.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("widths", "must be strictly decreasing"));
    }
    let floor = 4.0 * grid.spacing();
    if let Some(&w) = widths.iter().find(|&&w| w < floor) {
        return Err(invalid("widths", format!("σ = {w} is below the resolution floor 4h = {floor}")));
    }
    widths
        .iter()
        .map(|&sigma| {
            let psi = states::gaussian(grid, hbar, mass, sigma, 0.0, 0.0)?;
            let report = uncertainty_report(&psi)?;
            Ok(DeltaLimitRow {
                sigma,
                dx2: report.dx2,
                dp2: report.dp2_spectral,
                hj_quantum_term: report.hj_quantum_term,
                product: report.product,
            })
        })
        .collect()
}

/// Least-squares slope of log(quantum term) against log σ.
pub fn scaling_exponent(rows: &[DeltaLimitRow]) -> Result<f64> {
    if rows.len() < 2 {
        return Err(invalid("rows", "need at least two widths to fit an exponent"));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.sigma.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.hj_quantum_term.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
