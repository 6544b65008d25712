//! FFT plumbing shared by the observables, the split-step propagator and the
//! uncertainty functionals.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

/// Cached forward/inverse plans for one grid. Handles 1D and 2D (row-major,
/// axis 0 slowest) layouts.
pub struct Spectral {
    n: usize,
    dimension: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.points();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Spectral {
            n,
            dimension: grid.dimension(),
            forward,
            inverse,
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        let plan = Arc::clone(&self.forward);
        self.apply(&*plan, data);
    }

    /// Inverse transform including the 1/N factor, in place.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        let plan = Arc::clone(&self.inverse);
        self.apply(&*plan, data);
        let scale = 1.0 / data.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    fn apply(&mut self, plan: &dyn Fft<f64>, data: &mut [Complex64]) {
        let n = self.n;
        debug_assert_eq!(data.len(), n.pow(self.dimension as u32));
        // rows (last axis) are contiguous
        plan.process_with_scratch(data, &mut self.scratch);
        if self.dimension == 2 {
            let mut column = vec![Complex64::default(); n];
            for j in 0..n {
                for i in 0..n {
                    column[i] = data[i * n + j];
                }
                plan.process_with_scratch(&mut column, &mut self.scratch);
                for i in 0..n {
                    data[i * n + j] = column[i];
                }
            }
        }
    }
}

/// Angular wavenumbers in FFT order. The Nyquist mode is assigned to −π/h.
pub fn wavenumbers(points: usize, length: f64) -> Vec<f64> {
    let dk = TAU / length;
    let half = points / 2;
    (0..points)
        .map(|j| {
            if j < half {
                j as f64 * dk
            } else {
                (j as f64 - points as f64) * dk
            }
        })
        .collect()
}

/// d/dx of a 1D periodic field by multiplication with ik. The Nyquist mode is
/// zeroed so that real input stays real.
pub fn derivative_1d(spectral: &mut Spectral, length: f64, values: &[Complex64]) -> Vec<Complex64> {
    let n = values.len();
    let k = wavenumbers(n, length);
    let mut buf = values.to_vec();
    spectral.forward(&mut buf);
    for (j, z) in buf.iter_mut().enumerate() {
        if n.is_multiple_of(2) && j == n / 2 {
            *z = Complex64::default();
        } else {
            *z *= Complex64::new(0.0, k[j]);
        }
    }
    spectral.inverse(&mut buf);
    buf
}
