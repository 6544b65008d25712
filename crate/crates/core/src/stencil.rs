//! Central finite-difference stencils on uniform 1D lines.

/// How values beyond the ends of a line are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extension {
    Periodic,
    /// Walls at index 0 and at the virtual index n; the field is continued
    /// as an odd function about each wall.
    Odd,
}

pub fn at(f: &[f64], i: isize, ext: Extension) -> f64 {
    let n = f.len() as isize;
    match ext {
        Extension::Periodic => f[i.rem_euclid(n) as usize],
        Extension::Odd => {
            if i < 0 {
                -f[(-i) as usize]
            } else if i < n {
                f[i as usize]
            } else if i == n {
                0.0
            } else {
                -f[(2 * n - i) as usize]
            }
        }
    }
}

fn first_coefficients(order: usize) -> &'static [f64] {
    match order {
        2 => &[0.5],
        4 => &[2.0 / 3.0, -1.0 / 12.0],
        6 => &[3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0],
        8 => &[4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0],
        _ => panic!("unsupported stencil order {order}"),
    }
}

fn second_coefficients(order: usize) -> (f64, &'static [f64]) {
    match order {
        2 => (-2.0, &[1.0]),
        4 => (-5.0 / 2.0, &[4.0 / 3.0, -1.0 / 12.0]),
        6 => (-49.0 / 18.0, &[3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0]),
        8 => (-205.0 / 72.0, &[8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0]),
        _ => panic!("unsupported stencil order {order}"),
    }
}

/// Half-width of the central stencil of the given order.
pub fn radius(order: usize) -> usize {
    order / 2
}

pub fn first_derivative(f: &[f64], h: f64, order: usize, ext: Extension) -> Vec<f64> {
    let c = first_coefficients(order);
    (0..f.len() as isize)
        .map(|k| {
            let mut acc = 0.0;
            for (j, cj) in c.iter().enumerate() {
                let j = j as isize + 1;
                acc += cj * (at(f, k + j, ext) - at(f, k - j, ext));
            }
            acc / h
        })
        .collect()
}

pub fn second_derivative(f: &[f64], h: f64, order: usize, ext: Extension) -> Vec<f64> {
    let (c0, c) = second_coefficients(order);
    (0..f.len() as isize)
        .map(|k| {
            let mut acc = c0 * f[k as usize];
            for (j, cj) in c.iter().enumerate() {
                let j = j as isize + 1;
                acc += cj * (at(f, k + j, ext) + at(f, k - j, ext));
            }
            acc / (h * h)
        })
        .collect()
}

/// First derivative from a list of consecutive differences `d[k] = f[k+1] - f[k]`
/// (length n for periodic lines, n-1 otherwise). Used for phases, where the
/// differences have already been wrapped. Returns `None` where the stencil
/// leaves a non-periodic line.
pub fn first_derivative_from_steps(
    steps: &[f64],
    n: usize,
    h: f64,
    order: usize,
    periodic: bool,
) -> Vec<Option<f64>> {
    let c = first_coefficients(order);
    let r = c.len() as isize;
    let step = |i: isize| -> Option<f64> {
        if periodic {
            Some(steps[i.rem_euclid(n as isize) as usize])
        } else if i >= 0 && (i as usize) < steps.len() {
            Some(steps[i as usize])
        } else {
            None
        }
    };
    (0..n as isize)
        .map(|k| {
            // f[k+j] - f[k-j] = sum of steps k-j .. k+j-1
            let mut acc = 0.0;
            let mut window = 0.0;
            for j in 1..=r {
                window += step(k + j - 1)? + step(k - j)?;
                acc += c[(j - 1) as usize] * window;
            }
            Some(acc / h)
        })
        .collect()
}
