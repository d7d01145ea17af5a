//! Solver-quality benchmark on a geometric basis, power-law fitting, and a
//! synthetic correlated-Gaussian data generator.
//!
//! The benchmark reconstructs a uniform `z ∈ [0,1)` from `N_q` bits weighted
//! by `r^(-n)/R` with `R = Σ_{n≥1} r^(-n) = 1/(r-1)`. For `r = 2` this is
//! binary rounding and an ideal solver averages `2^-(N_q+2)` error.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::encoder::Dictionary;
use crate::error::{Error, Result};
use crate::qubo::BitCode;
use crate::solver::{derive_seed, Solver};
use crate::stats;

#[derive(Clone, Debug, PartialEq)]
pub struct GeometricBasis {
    r: f64,
    weights: Vec<f64>,
}

impl GeometricBasis {
    pub fn new(r: f64, n_q: usize) -> Result<Self> {
        if !(r > 1.0 && r.is_finite()) {
            return Err(Error::invalid(format!("geometric ratio must exceed 1, got {r}")));
        }
        if n_q == 0 {
            return Err(Error::invalid("n_q must be >= 1"));
        }
        let norm = 1.0 / (r - 1.0);
        let weights = (1..=n_q as i32).map(|n| r.powi(-n) / norm).collect();
        Ok(GeometricBasis { r, weights })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// `R = 1/(r-1)`.
    pub fn norm(&self) -> f64 {
        1.0 / (self.r - 1.0)
    }

    pub fn n_q(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// One-row dictionary whose columns are the weights.
    pub fn dictionary(&self) -> Dictionary {
        Dictionary::from_rows(1, self.n_q(), &self.weights).expect("weights are finite")
    }

    pub fn error(&self, z: f64, code: &BitCode) -> Result<f64> {
        if !(0.0..1.0).contains(&z) {
            return Err(Error::invalid(format!("z must lie in [0,1), got {z}")));
        }
        Error::check_len("code length", self.n_q(), code.len())?;
        let approx: f64 = code.ones().map(|n| self.weights[n]).sum();
        Ok((z - approx).abs())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchPoint {
    pub n_q: usize,
    pub mean: f64,
    /// Bootstrap error of the mean.
    pub stderr: f64,
    pub n_samples: usize,
}

/// Bootstrap resamples used for benchmark error bars.
const BENCH_RESAMPLES: usize = 500;

/// Per-sample absolute errors for `n_samples` uniform `z`, in draw order.
pub fn appendix_errors(
    r: f64,
    n_q: usize,
    n_samples: usize,
    solver: &Solver,
    seed: u64,
) -> Result<Vec<f64>> {
    let basis = GeometricBasis::new(r, n_q)?;
    let dict = basis.dictionary();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zs: Vec<f64> = (0..n_samples).map(|_| rng.random::<f64>()).collect();
    zs.par_iter()
        .enumerate()
        .map(|(k, &z)| {
            let solver = solver.reseeded(derive_seed(seed, k as u64));
            let code = dict.encode(&[z], &solver)?;
            basis.error(z, &code)
        })
        .collect()
}

pub fn run_appendix_bench(
    r: f64,
    n_q: usize,
    n_samples: usize,
    solver: &Solver,
    seed: u64,
) -> Result<BenchPoint> {
    if n_samples < 2 {
        return Err(Error::invalid("benchmark needs at least 2 samples"));
    }
    let errors = appendix_errors(r, n_q, n_samples, solver, seed)?;
    let mean = stats::pairwise_sum(&errors) / n_samples as f64;
    let stderr = stats::bootstrap_error(&errors, BENCH_RESAMPLES, derive_seed(seed, u64::MAX))?;
    Ok(BenchPoint {
        n_q,
        mean,
        stderr,
        n_samples,
    })
}

/// `avg_error ≈ a^(n_q + b)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub a: f64,
    pub b: f64,
    pub chi2_per_dof: f64,
}

impl PowerLawFit {
    pub fn predict(&self, n_q: f64) -> f64 {
        self.a.powf(n_q + self.b)
    }
}

/// Weighted least squares of `ln(err) = n_q·ln a + b·ln a` with log-space
/// weights `(err/σ)²`.
pub fn fit_power_law(points: &[(usize, f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::invalid("power-law fit needs at least 3 points"));
    }
    let mut s = [0.0_f64; 5]; // Σw, Σwx, Σwxx, Σwy, Σwxy
    let mut rows = Vec::with_capacity(points.len());
    for &(n_q, err, bar) in points {
        if !(err > 0.0 && bar > 0.0) {
            return Err(Error::invalid("errors and error bars must be positive"));
        }
        let x = n_q as f64;
        let y = err.ln();
        let sigma = bar / err;
        let w = 1.0 / (sigma * sigma);
        s[0] += w;
        s[1] += w * x;
        s[2] += w * x * x;
        s[3] += w * y;
        s[4] += w * x * y;
        rows.push((x, y, w));
    }
    let det = s[0] * s[2] - s[1] * s[1];
    if det.abs() <= f64::EPSILON * s[0] * s[2] {
        return Err(Error::invalid("power-law fit needs at least two distinct n_q"));
    }
    let slope = (s[0] * s[4] - s[1] * s[3]) / det;
    let intercept = (s[2] * s[3] - s[1] * s[4]) / det;
    let chi2: f64 = rows
        .iter()
        .map(|&(x, y, w)| w * (y - slope * x - intercept).powi(2))
        .sum();
    Ok(PowerLawFit {
        a: slope.exp(),
        b: intercept / slope,
        chi2_per_dof: chi2 / (points.len() - 2) as f64,
    })
}

/// `n × d` Gaussian rows with correlation `rho^|i-j|`, drawn through the
/// Cholesky factor of the correlation matrix.
pub fn gen_correlated(n: usize, d: usize, rho: f64, seed: u64) -> Result<DMatrix<f64>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::invalid(format!("rho must lie in [0,1), got {rho}")));
    }
    if n == 0 || d == 0 {
        return Err(Error::invalid("n and d must be >= 1"));
    }
    let corr = DMatrix::from_fn(d, d, |i, j| rho.powi(i.abs_diff(j) as i32));
    let lower = corr
        .cholesky()
        .ok_or_else(|| Error::invalid("correlation matrix is not positive definite"))?
        .l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(n, d);
    let mut g = DVector::zeros(d);
    for k in 0..n {
        for v in g.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let row = &lower * &g;
        for j in 0..d {
            out[(k, j)] = row[j];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_ones_code_reaches_top_of_range() {
        let basis = GeometricBasis::new(2.0, 6).unwrap();
        assert_eq!(basis.norm(), 1.0);
        let z = 1.0 - 2f64.powi(-6);
        let code = BitCode::from(vec![true; 6]);
        assert!(basis.error(z, &code).unwrap() < 1e-15);
        assert_eq!(basis.error(0.0, &BitCode::zeros(6)).unwrap(), 0.0);
    }

    #[test]
    fn three_bit_minimum_by_enumeration() {
        let basis = GeometricBasis::new(2.0, 3).unwrap();
        let code = BitCode::from(vec![false, true, false]);
        let e = basis.error(0.3, &code).unwrap();
        assert!((e - 0.05).abs() < 1e-15);
        let best = (0..8)
            .map(|v| basis.error(0.3, &BitCode::from_index(v, 3)).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(best, e);
    }

    #[test]
    fn weights_decrease_and_sum_below_one() {
        let basis = GeometricBasis::new(1.5, 20).unwrap();
        assert!(basis.weights().windows(2).all(|w| w[0] > w[1] && w[1] > 0.0));
        let total: f64 = basis.weights().iter().sum();
        assert!(total < 1.0);
        assert!((basis.norm() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn geometric_error_rejects_out_of_range_z() {
        let basis = GeometricBasis::new(2.0, 3).unwrap();
        assert!(basis.error(1.0, &BitCode::zeros(3)).is_err());
        assert!(basis.error(-0.1, &BitCode::zeros(3)).is_err());
        assert!(GeometricBasis::new(1.0, 3).is_err());
    }

    #[test]
    fn power_law_exact_model() {
        let pts: Vec<_> = (8..=20)
            .step_by(2)
            .map(|n| (n, 0.5f64.powi(n as i32 + 2), 0.01 * 0.5f64.powi(n as i32 + 2)))
            .collect();
        let fit = fit_power_law(&pts).unwrap();
        assert!((fit.a - 0.5).abs() < 1e-10);
        assert!((fit.b - 2.0).abs() < 1e-10);
        assert!(fit.chi2_per_dof < 1e-18);
    }

    #[test]
    fn power_law_noisy_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<_> = (8..=20)
            .step_by(2)
            .map(|n| {
                let truth = 0.514f64.powf(n as f64 + 1.01);
                let g: f64 = StandardNormal.sample(&mut rng);
                (n, truth * (1.0 + 0.01 * g), 0.01 * truth)
            })
            .collect();
        let fit = fit_power_law(&pts).unwrap();
        assert!((0.50..=0.53).contains(&fit.a), "a = {}", fit.a);
        assert!((0.7..=1.3).contains(&fit.b), "b = {}", fit.b);
    }

    #[test]
    fn power_law_rejects_bad_points() {
        assert!(fit_power_law(&[(1, 0.5, 0.1), (2, 0.25, 0.1)]).is_err());
        assert!(fit_power_law(&[(1, 0.5, 0.1), (2, 0.0, 0.1), (3, 0.1, 0.1)]).is_err());
    }

    #[test]
    fn correlated_generator_is_seeded() {
        let a = gen_correlated(50, 4, 0.5, 3).unwrap();
        let b = gen_correlated(50, 4, 0.5, 3).unwrap();
        assert_eq!(a, b);
        assert!(gen_correlated(10, 4, 1.0, 0).is_err());
    }
}
