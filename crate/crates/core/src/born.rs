//! Branch counting for N repeated two-outcome measurements.
//!
//! Three routes to the same statistics are provided and cross-checked: the
//! explicit sum over all 2^N outcome sequences (small N), the binomial
//! collapse prob(r|N) = C(N,r)·p^r·q^(N−r), and moments obtained by applying
//! (p·d/dp)^m to the generating function (p+q)^N in exact arithmetic. A
//! seeded Monte Carlo over independent universes closes the loop.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::grid::sum;

/// Above this N the distribution is built in log space.
pub const LOG_SPACE_THRESHOLD: usize = 1000;
/// Largest N for which the 2^N sequences are enumerated.
pub const MAX_ENUMERATION: usize = 20;
pub const MAX_MEASUREMENTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStateWeights {
    p: f64,
    q: f64,
}

impl TwoStateWeights {
    /// Weights (p, 1−p) for amplitudes √p and √q.
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid("p", format!("must lie in [0, 1], got {p}")));
        }
        Ok(TwoStateWeights { p, q: 1.0 - p })
    }

    /// Explicit pair; must already satisfy p + q = 1.
    pub fn from_pair(p: f64, q: f64) -> Result<Self> {
        if p < 0.0 || q < 0.0 || (p + q - 1.0).abs() > 1e-12 {
            return Err(invalid("weights", format!("need p, q ≥ 0 with p + q = 1, got ({p}, {q})")));
        }
        Ok(TwoStateWeights { p, q })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn swapped(&self) -> Self {
        TwoStateWeights { p: self.q, q: self.p }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchDistribution {
    pub n: usize,
    /// prob(r|N) for r = 0..=N
    pub probs: Vec<f64>,
    pub mean_f: f64,
    pub var_f: f64,
    /// central moments of f = r/N of order 1..=4 (index 0 is order 1)
    pub central_moments: [f64; 4],
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > MAX_MEASUREMENTS {
        return Err(invalid("N", format!("must lie in 1..={MAX_MEASUREMENTS}, got {n}")));
    }
    Ok(())
}

/// prob(r|N) with moments of the frequency f = r/N summed from the table.
pub fn branch_distribution(w: TwoStateWeights, n: usize) -> Result<BranchDistribution> {
    check_n(n)?;
    let probs = if w.p == 0.0 || w.q == 0.0 {
        let mut probs = vec![0.0; n + 1];
        probs[if w.p == 0.0 { 0 } else { n }] = 1.0;
        probs
    } else if w.p > w.q {
        // tabulate with the smaller weight first so that p↔q is an exact reversal
        let mut probs = table(w.swapped(), n);
        probs.reverse();
        probs
    } else {
        table(w, n)
    };
    Ok(with_moments(n, probs))
}

fn table(w: TwoStateWeights, n: usize) -> Vec<f64> {
    if n <= LOG_SPACE_THRESHOLD {
        ratio_table(w, n)
    } else {
        log_space_table(w, n)
    }
}

/// Ratio recurrence outward from the mode; only the overall constant is
/// fixed by normalization, so no factorials are formed.
fn ratio_table(w: TwoStateWeights, n: usize) -> Vec<f64> {
    let mode = (((n + 1) as f64) * w.p).floor().min(n as f64) as usize;
    let odds = w.p / w.q;
    let mut probs = vec![0.0; n + 1];
    probs[mode] = 1.0;
    for r in mode..n {
        probs[r + 1] = probs[r] * (n - r) as f64 / (r + 1) as f64 * odds;
    }
    for r in (0..mode).rev() {
        probs[r] = probs[r + 1] * (r + 1) as f64 / (n - r) as f64 / odds;
    }
    let total = sum(probs.iter().copied());
    probs.iter().map(|x| x / total).collect()
}

fn log_space_table(w: TwoStateWeights, n: usize) -> Vec<f64> {
    let nf = n as f64;
    let ln_n_fact = libm::lgamma(nf + 1.0);
    let (lp, lq) = (w.p.ln(), w.q.ln());
    let logs: Vec<f64> = (0..=n)
        .map(|r| {
            let r = r as f64;
            ln_n_fact - libm::lgamma(r + 1.0) - libm::lgamma(nf - r + 1.0) + r * lp + (nf - r) * lq
        })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total = sum(scaled.iter().copied());
    scaled.iter().map(|x| x / total).collect()
}

fn with_moments(n: usize, probs: Vec<f64>) -> BranchDistribution {
    let nf = n as f64;
    let mean_f = sum(probs.iter().enumerate().map(|(r, p)| r as f64 / nf * p));
    let mut central_moments = [0.0; 4];
    for (order, slot) in central_moments.iter_mut().enumerate() {
        *slot = sum(probs.iter().enumerate().map(|(r, p)| (r as f64 / nf - mean_f).powi(order as i32 + 1) * p));
    }
    BranchDistribution { n, probs, mean_f, var_f: central_moments[1], central_moments }
}

/// prob(r|N) as the literal sum over all 2^N outcome sequences, each weighted
/// by p^(#up)·q^(#down).
pub fn enumerate_sequences(w: TwoStateWeights, n: usize) -> Result<Vec<f64>> {
    check_n(n)?;
    if n > MAX_ENUMERATION {
        return Err(invalid("N", format!("enumeration is limited to N ≤ {MAX_ENUMERATION}, got {n}")));
    }
    let mut probs = vec![0.0; n + 1];
    for sequence in 0u32..(1u32 << n) {
        let ups = sequence.count_ones() as usize;
        probs[ups] += w.p.powi(ups as i32) * w.q.powi((n - ups) as i32);
    }
    Ok(probs)
}

/// ⟨r^m⟩ as a polynomial in p: applies (p·d/dp) m times to (p+q)^N with q
/// held fixed, tracking terms c·p^j·(p+q)^(N−j), then sets p+q = 1.
/// Returns the coefficients c_j.
pub fn raw_moment_polynomial(n: usize, order: usize) -> Vec<BigInt> {
    // terms[j] = coefficient of p^j (p+q)^(N-j)
    let mut terms = vec![BigInt::one()];
    for _ in 0..order {
        let mut next = vec![BigInt::zero(); terms.len() + 1];
        for (j, c) in terms.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            // p d/dp [p^j (p+q)^(N-j)] = j p^j (p+q)^(N-j) + (N-j) p^(j+1) (p+q)^(N-j-1)
            next[j] += c * BigInt::from(j);
            if j < n {
                next[j + 1] += c * BigInt::from(n - j);
            }
        }
        terms = next;
    }
    terms
}

/// Central moment of f = r/N of the given order, exactly, for rational p.
pub fn central_moment_exact(p: &BigRational, n: usize, order: usize) -> Result<BigRational> {
    check_n(n)?;
    if order > 4 {
        return Err(Error::MomentOrder(order));
    }
    if p.is_negative() || *p > BigRational::one() {
        return Err(invalid("p", "must lie in [0, 1]"));
    }
    let raw = |k: usize| -> BigRational {
        let mut acc = BigRational::zero();
        let mut power = BigRational::one();
        for c in raw_moment_polynomial(n, k) {
            acc += BigRational::from_integer(c) * &power;
            power *= p;
        }
        acc
    };
    // E[(r − Np)^m] / N^m
    let np = p * BigRational::from_integer(BigInt::from(n));
    let mut total = BigRational::zero();
    for k in 0..=order {
        let binom = BigRational::from_integer(BigInt::from(binomial_u64(order, k)));
        let shift = pow(&(-np.clone()), order - k);
        total += binom * raw(k) * shift;
    }
    Ok(total / pow(&BigRational::from_integer(BigInt::from(n)), order))
}

fn pow(x: &BigRational, e: usize) -> BigRational {
    let mut out = BigRational::one();
    for _ in 0..e {
        out *= x;
    }
    out
}

fn binomial_u64(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Floating-point entry point: p is taken as the exact binary value of the
/// f64, the moment is computed exactly and rounded once.
pub fn moments_by_generating_function(w: TwoStateWeights, n: usize, order: usize) -> Result<f64> {
    let p = BigRational::from_float(w.p).ok_or_else(|| invalid("p", "not finite"))?;
    let exact = central_moment_exact(&p, n, order)?;
    Ok(exact.to_f64().unwrap_or(f64::NAN))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchingSimulation {
    /// universes that recorded r ups, r = 0..=N
    pub counts: Vec<u64>,
    pub mean_f: f64,
    pub var_f: f64,
    /// sup-distance between the empirical and exact CDFs of r
    pub ks_distance: f64,
}

/// Runs `n_universes` independent sequences of N measurements. Universe i
/// draws from its own ChaCha8 stream (stream id i) under `seed`, so results
/// do not depend on thread scheduling.
pub fn simulate_branching(w: TwoStateWeights, n: usize, n_universes: usize, seed: u64) -> Result<BranchingSimulation> {
    check_n(n)?;
    if n_universes < 1000 {
        return Err(invalid("n_universes", format!("must be at least 1000, got {n_universes}")));
    }
    let ups: Vec<usize> = (0..n_universes as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            (0..n).filter(|_| rng.random::<f64>() < w.p).count()
        })
        .collect();

    let mut counts = vec![0u64; n + 1];
    for &r in &ups {
        counts[r] += 1;
    }
    let nf = n as f64;
    let total = n_universes as f64;
    let mean_f = sum(ups.iter().map(|&r| r as f64 / nf)) / total;
    let var_f = sum(ups.iter().map(|&r| (r as f64 / nf - mean_f).powi(2))) / (total - 1.0);

    let exact = branch_distribution(w, n)?;
    let mut cdf_emp = 0.0;
    let mut cdf_exact = 0.0;
    let mut ks_distance: f64 = 0.0;
    for r in 0..=n {
        cdf_emp += counts[r] as f64 / total;
        cdf_exact += exact.probs[r];
        ks_distance = ks_distance.max((cdf_emp - cdf_exact).abs());
    }
    Ok(BranchingSimulation { counts, mean_f, var_f, ks_distance })
}

/// Σ prob(r|N) over |r/N − p| > ε.
pub fn tail_mass(w: TwoStateWeights, n: usize, epsilon: f64) -> Result<f64> {
    let d = branch_distribution(w, n)?;
    Ok(sum(d.probs.iter().enumerate().filter(|(r, _)| (*r as f64 / n as f64 - w.p).abs() > epsilon).map(|(_, p)| *p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(p: f64) -> TwoStateWeights {
        TwoStateWeights::new(p).unwrap()
    }

    #[test]
    fn fair_coin_pair() {
        let d = branch_distribution(w(0.5), 2).unwrap();
        assert_eq!(d.probs, vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn single_entry_against_direct_product() {
        // C(10,3)·0.3³·0.7⁷ written out as a plain product
        let direct = 120.0 * 0.3f64.powi(3) * 0.7f64.powi(7);
        let d = branch_distribution(w(0.3), 10).unwrap();
        assert!((d.probs[3] - direct).abs() < 1e-15);
        assert!((d.probs[3] - 0.266827932).abs() < 1e-9);
    }

    #[test]
    fn mean_frequency_is_p() {
        for (p, n) in [(0.3, 10), (0.71, 999), (0.2, 5000), (0.5, 1_000_000)] {
            let d = branch_distribution(w(p), n).unwrap();
            assert!((d.mean_f - p).abs() < 1e-12, "{p} {n}: {}", d.mean_f);
            assert!((sum(d.probs.iter().copied()) - 1.0).abs() < 1e-12);
            assert!(d.probs.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn log_space_agrees_with_ratio_route_at_threshold() {
        let a = ratio_table(w(0.37), 1000);
        let b = log_space_table(w(0.37), 1000);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-10 * x.max(1e-300) || (x - y).abs() < 1e-300);
        }
    }

    #[test]
    fn variance_is_pq_over_n_exactly() {
        let p = BigRational::new(BigInt::from(1), BigInt::from(3));
        for n in [1usize, 7, 40] {
            let m2 = central_moment_exact(&p, n, 2).unwrap();
            assert_eq!(m2, BigRational::new(BigInt::from(2), BigInt::from(9 * n as i64)));
            assert!(central_moment_exact(&p, n, 1).unwrap().is_zero());
        }
        assert_eq!(central_moment_exact(&p, 5, 5), Err(Error::MomentOrder(5)));
    }

    #[test]
    fn higher_moments_fall_faster() {
        let m2: Vec<f64> = [10, 100, 1000].iter().map(|&n| moments_by_generating_function(w(0.3), n, 2).unwrap()).collect();
        let m3: Vec<f64> = [10, 100, 1000].iter().map(|&n| moments_by_generating_function(w(0.3), n, 3).unwrap()).collect();
        for k in 0..2 {
            assert!((m2[k] / m2[k + 1] - 10.0).abs() < 1e-9);
            assert!((m3[k] / m3[k + 1] - 100.0).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_branch() {
        let s = simulate_branching(w(1.0), 25, 1000, 3).unwrap();
        assert_eq!(s.counts[25], 1000);
        assert_eq!(s.mean_f, 1.0);
        let s = simulate_branching(w(0.0), 25, 1000, 3).unwrap();
        assert_eq!(s.counts[0], 1000);
    }

    #[test]
    fn simulation_is_reproducible() {
        let a = simulate_branching(w(0.3), 50, 2000, 11).unwrap();
        let b = simulate_branching(w(0.3), 50, 2000, 11).unwrap();
        assert_eq!(a, b);
        let c = simulate_branching(w(0.3), 50, 2000, 12).unwrap();
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn invalid_parameters() {
        assert!(TwoStateWeights::new(1.5).is_err());
        assert!(TwoStateWeights::from_pair(0.3, 0.6).is_err());
        assert!(branch_distribution(w(0.3), 0).is_err());
        assert!(branch_distribution(w(0.3), MAX_MEASUREMENTS + 1).is_err());
        assert!(enumerate_sequences(w(0.3), 21).is_err());
        assert!(simulate_branching(w(0.3), 10, 999, 0).is_err());
    }

    #[test]
    fn tail_mass_shrinks_with_n() {
        let tails: Vec<f64> = [10, 100, 1000, 10_000].iter().map(|&n| tail_mass(w(0.3), n, 0.05).unwrap()).collect();
        assert!(tails.windows(2).all(|p| p[1] < p[0]), "{tails:?}");
    }

    proptest! {
        #[test]
        fn swapping_weights_reverses_the_table(p in 0.0f64..1.0, n in 1usize..300) {
            let a = branch_distribution(w(p), n).unwrap();
            let b = branch_distribution(w(p).swapped(), n).unwrap();
            for r in 0..=n {
                prop_assert_eq!(a.probs[r], b.probs[n - r]);
            }
        }

        #[test]
        fn enumeration_matches_collapse(p in 0.0f64..1.0, n in 1usize..14) {
            let e = enumerate_sequences(w(p), n).unwrap();
            let d = branch_distribution(w(p), n).unwrap();
            for r in 0..=n {
                prop_assert!((e[r] - d.probs[r]).abs() < 1e-12);
            }
        }
    }
}
