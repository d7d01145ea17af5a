//! Estimators for analysing lossy-compressed statistical samples.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Pairwise (cascade) summation; the result depends only on the input
/// order, not on how the caller parallelised producing it.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if values.len() <= LEAF {
        values.iter().sum()
    } else {
        let (a, b) = values.split_at(values.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

pub fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// Unbiased (n-1) sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    pairwise_sum(&dev) / (values.len() as f64 - 1.0)
}

pub fn std_dev(values: &[f64]) -> f64 {
    variance(values).sqrt()
}

/// Per-component ratios `Var(X_i − X̃_i) / Var(X_i)`.
pub fn variance_ratios(original: &DMatrix<f64>, reconstructed: &DMatrix<f64>) -> Result<Vec<f64>> {
    Error::check_len("reconstruction rows", original.nrows(), reconstructed.nrows())?;
    Error::check_len("reconstruction columns", original.ncols(), reconstructed.ncols())?;
    if original.nrows() < 2 {
        return Err(Error::invalid("Q² needs at least 2 samples"));
    }
    (0..original.ncols())
        .map(|i| {
            let x: Vec<f64> = original.column(i).iter().copied().collect();
            let var_x = variance(&x);
            if var_x == 0.0 {
                return Err(Error::DegenerateComponent { component: i });
            }
            let diff: Vec<f64> = original
                .column(i)
                .iter()
                .zip(reconstructed.column(i).iter())
                .map(|(a, b)| a - b)
                .collect();
            Ok(variance(&diff) / var_x)
        })
        .collect()
}

/// Mean over components of the normalised residual variance.
pub fn q_squared(original: &DMatrix<f64>, reconstructed: &DMatrix<f64>) -> Result<f64> {
    let ratios = variance_ratios(original, reconstructed)?;
    Ok(mean(&ratios))
}

/// Which samples within each bin keep their original values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Selection {
    /// The first `M_bc` samples of every bin.
    First,
    /// `M_bc` samples spread evenly across every bin.
    Strided,
    /// Explicit global indices; each bin must contain exactly `M_bc`.
    Explicit(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BiasCorrectionPlan {
    pub n: usize,
    pub n_bc: usize,
    pub n_bin: usize,
    pub selection: Selection,
}

impl BiasCorrectionPlan {
    pub fn new(n: usize, n_bc: usize, n_bin: usize, selection: Selection) -> Result<Self> {
        let plan = BiasCorrectionPlan {
            n,
            n_bc,
            n_bin,
            selection,
        };
        plan.indices()?;
        Ok(plan)
    }

    pub fn bin_size(&self) -> usize {
        self.n / self.n_bin
    }

    pub fn bc_per_bin(&self) -> usize {
        self.n_bc / self.n_bin
    }

    /// Selected global indices, increasing.
    pub fn indices(&self) -> Result<Vec<usize>> {
        if self.n_bin == 0 {
            return Err(Error::Plan("n_bin must be >= 1".into()));
        }
        if self.n_bc > self.n {
            return Err(Error::Plan(format!("n_bc = {} exceeds n = {}", self.n_bc, self.n)));
        }
        if !self.n.is_multiple_of(self.n_bin) || !self.n_bc.is_multiple_of(self.n_bin) {
            return Err(Error::Plan(format!(
                "n_bin = {} must divide n = {} and n_bc = {}",
                self.n_bin, self.n, self.n_bc
            )));
        }
        let m = self.bin_size();
        let m_bc = self.bc_per_bin();
        match &self.selection {
            Selection::First => Ok((0..self.n_bin)
                .flat_map(|b| (0..m_bc).map(move |j| b * m + j))
                .collect()),
            Selection::Strided => Ok((0..self.n_bin)
                .flat_map(|b| (0..m_bc).map(move |j| b * m + j * m / m_bc))
                .collect()),
            Selection::Explicit(idx) => {
                if idx.len() != self.n_bc {
                    return Err(Error::Plan(format!(
                        "expected {} explicit indices, got {}",
                        self.n_bc,
                        idx.len()
                    )));
                }
                let mut sorted = idx.clone();
                sorted.sort_unstable();
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::Plan("explicit indices must be unique".into()));
                }
                if sorted.last().is_some_and(|&i| i >= self.n) {
                    return Err(Error::Plan("explicit index out of range".into()));
                }
                let mut per_bin = vec![0usize; self.n_bin];
                for &i in &sorted {
                    per_bin[i / m] += 1;
                }
                if per_bin.iter().any(|&c| c != m_bc) {
                    return Err(Error::Plan(format!(
                        "every bin must hold exactly {m_bc} selected indices"
                    )));
                }
                Ok(sorted)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub error: f64,
    pub n_bin: usize,
}

/// Per-bin estimates: mean of `f_tilde` over the bin plus the mean residual
/// `f_orig − f_tilde` over the bin's selected samples.
pub fn bias_corrected_bins(
    f_tilde: &[f64],
    f_orig: &[f64],
    plan: &BiasCorrectionPlan,
) -> Result<Vec<f64>> {
    let indices = plan.indices()?;
    Error::check_len("f_tilde length", plan.n, f_tilde.len())?;
    Error::check_len("f_orig length", indices.len(), f_orig.len())?;
    if f_tilde.iter().chain(f_orig).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("estimator inputs"));
    }
    let m = plan.bin_size();
    let m_bc = plan.bc_per_bin();
    let mut correction = vec![0.0; plan.n_bin];
    for (&k, &orig) in indices.iter().zip(f_orig) {
        correction[k / m] += orig - f_tilde[k];
    }
    Ok((0..plan.n_bin)
        .map(|b| {
            let sloppy = mean(&f_tilde[b * m..(b + 1) * m]);
            if m_bc == 0 {
                sloppy
            } else {
                sloppy + correction[b] / m_bc as f64
            }
        })
        .collect())
}

/// Bias-corrected mean with its binned standard error.
pub fn bias_corrected_mean(
    f_tilde: &[f64],
    f_orig: &[f64],
    plan: &BiasCorrectionPlan,
) -> Result<EstimateWithError> {
    let bins = bias_corrected_bins(f_tilde, f_orig, plan)?;
    Ok(binned_estimate(&bins))
}

/// Mean of bin values with error `stdev/√N_bin` (zero for a single bin).
pub fn binned_estimate(bins: &[f64]) -> EstimateWithError {
    let n_bin = bins.len();
    let error = if n_bin < 2 {
        0.0
    } else {
        std_dev(bins) / (n_bin as f64).sqrt()
    };
    EstimateWithError {
        value: mean(bins),
        error,
        n_bin,
    }
}

/// Predicted ratio of the bias-corrected to the uncompressed standard error.
pub fn error_increase_estimate(n: usize, n_bc: usize, q2: f64, alpha: f64) -> Result<f64> {
    if n_bc == 0 {
        return Err(Error::invalid("n_bc must be >= 1"));
    }
    if q2.is_nan() || q2 < 0.0 {
        return Err(Error::invalid("q2 must be >= 0"));
    }
    Ok(1.0 + alpha * (n as f64 / (2.0 * n_bc as f64)) * q2)
}

/// Standard deviation of seeded with-replacement resample means.
pub fn bootstrap_error(samples: &[f64], n_resamples: usize, seed: u64) -> Result<f64> {
    if samples.len() < 2 || n_resamples < 2 {
        return Err(Error::invalid("bootstrap needs >= 2 samples and >= 2 resamples"));
    }
    let n = samples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![0.0; n];
    let means: Vec<f64> = (0..n_resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = samples[rng.random_range(0..n)];
            }
            mean(&buf)
        })
        .collect();
    Ok(std_dev(&means))
}
