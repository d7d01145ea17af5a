//! The compressed dataset, its standardisation bookkeeping, and analytics
//! evaluated directly on the packed codes.

mod format;

pub use format::{read, read_bytes, write, write_bytes, FormatError, MAGIC, VERSION};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::codes::CodeMatrix;
use crate::encoder::Dictionary;
use crate::error::{Error, Result};
use crate::stats;

/// Per-component shift and scale: `z = (x − mean) / scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardization {
    pub fn identity(d: usize) -> Self {
        Standardization {
            means: vec![0.0; d],
            scales: vec![1.0; d],
        }
    }

    pub fn d(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, data: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(data.nrows(), data.ncols(), |k, i| {
            (data[(k, i)] - self.means[i]) / self.scales[i]
        })
    }

    pub fn invert(&self, data: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(data.nrows(), data.ncols(), |k, i| {
            data[(k, i)] * self.scales[i] + self.means[i]
        })
    }
}

/// Column-wise standardisation to sample mean 0 and unbiased standard
/// deviation 1.
pub fn standardize(data: &DMatrix<f64>) -> Result<(DMatrix<f64>, Standardization)> {
    if data.nrows() < 2 {
        return Err(Error::invalid("standardisation needs at least 2 samples"));
    }
    let mut means = Vec::with_capacity(data.ncols());
    let mut scales = Vec::with_capacity(data.ncols());
    for (i, col) in data.column_iter().enumerate() {
        let values: Vec<f64> = col.iter().copied().collect();
        let sd = stats::std_dev(&values);
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(Error::DegenerateComponent { component: i });
        }
        means.push(stats::mean(&values));
        scales.push(sd);
    }
    let st = Standardization { means, scales };
    Ok((st.apply(data), st))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompressedDataset {
    standardization: Standardization,
    stages: Vec<Dictionary>,
    codes: CodeMatrix,
    bc_indices: Vec<usize>,
    /// `N_bc × D`, original units.
    bc_samples: DMatrix<f64>,
}

impl CompressedDataset {
    pub fn new(
        standardization: Standardization,
        stages: Vec<Dictionary>,
        codes: CodeMatrix,
        bc_indices: Vec<usize>,
        bc_samples: DMatrix<f64>,
    ) -> Result<Self> {
        let d = standardization.d();
        if d == 0 {
            return Err(Error::invalid("dataset needs at least one component"));
        }
        Error::check_len("standardisation scales", d, standardization.scales.len())?;
        if standardization
            .scales
            .iter()
            .any(|s| !(*s > 0.0 && s.is_finite()))
            || standardization.means.iter().any(|m| !m.is_finite())
        {
            return Err(Error::invalid("scales must be positive and means finite"));
        }
        if stages.is_empty() {
            return Err(Error::invalid("dataset needs at least one stage"));
        }
        for s in &stages {
            Error::check_len("stage dictionary rows", d, s.d())?;
        }
        let n_q_total: usize = stages.iter().map(Dictionary::n_q).sum();
        Error::check_len("code width", n_q_total, codes.n_q())?;
        if bc_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("bc indices must be strictly increasing"));
        }
        if bc_indices.last().is_some_and(|&i| i >= codes.n()) {
            return Err(Error::invalid("bc index out of range"));
        }
        Error::check_len("bc sample rows", bc_indices.len(), bc_samples.nrows())?;
        if !bc_indices.is_empty() {
            Error::check_len("bc sample columns", d, bc_samples.ncols())?;
        }
        let bc_samples = if bc_indices.is_empty() {
            DMatrix::zeros(0, d)
        } else {
            bc_samples
        };
        Ok(CompressedDataset {
            standardization,
            stages,
            codes,
            bc_indices,
            bc_samples,
        })
    }

    pub fn d(&self) -> usize {
        self.standardization.d()
    }

    pub fn n(&self) -> usize {
        self.codes.n()
    }

    pub fn n_q_total(&self) -> usize {
        self.codes.n_q()
    }

    pub fn standardization(&self) -> &Standardization {
        &self.standardization
    }

    pub fn stages(&self) -> &[Dictionary] {
        &self.stages
    }

    pub fn stage_widths(&self) -> Vec<usize> {
        self.stages.iter().map(Dictionary::n_q).collect()
    }

    pub fn codes(&self) -> &CodeMatrix {
        &self.codes
    }

    pub fn bc_indices(&self) -> &[usize] {
        &self.bc_indices
    }

    pub fn bc_samples(&self) -> &DMatrix<f64> {
        &self.bc_samples
    }

    /// `N · n_q_total`.
    pub fn payload_bits(&self) -> u64 {
        (self.n() * self.n_q_total()) as u64
    }

    /// Size of the serialised file in bits (header, standardisation,
    /// dictionaries, codes, and retained samples).
    pub fn total_bits(&self) -> u64 {
        8 * format::encoded_len(self) as u64
    }

    /// Reconstruction in standardised units.
    pub fn decompress_standardized(&self) -> DMatrix<f64> {
        let widths = self.stage_widths();
        let blocks = self.codes.split(&widths).expect("widths match");
        let mut out = DMatrix::zeros(self.n(), self.d());
        for (dict, block) in self.stages.iter().zip(&blocks) {
            out += crate::learn::reconstruct_all(dict, block);
        }
        out
    }

    /// Reconstruction in original units. Rows at the bias-correction
    /// indices are reconstructions too, not the stored originals.
    pub fn decompress(&self) -> DMatrix<f64> {
        self.standardization.invert(&self.decompress_standardized())
    }

    /// `Σ_k X̃^(k)` from per-stage bit counts: `Σ_stage φ (Σ_k a^(k))`,
    /// then `N·mean + scale ⊙ Σ z`.
    pub fn compressed_sum(&self) -> Vec<f64> {
        let widths = self.stage_widths();
        let counts = self.codes.column_counts();
        let mut z_sum = vec![0.0; self.d()];
        let mut start = 0;
        for (dict, &w) in self.stages.iter().zip(&widths) {
            for j in 0..w {
                let c = counts[start + j] as f64;
                if c == 0.0 {
                    continue;
                }
                for (i, s) in z_sum.iter_mut().enumerate() {
                    *s += dict.phi()[(i, j)] * c;
                }
            }
            start += w;
        }
        let n = self.n() as f64;
        let st = &self.standardization;
        z_sum
            .iter()
            .enumerate()
            .map(|(i, s)| n * st.means[i] + st.scales[i] * s)
            .collect()
    }

    /// `Σ_k ‖φ a^(k)‖²` in standardised units from single-bit counts and
    /// pair counts. Single-stage datasets only.
    pub fn compressed_norm2_sum(&self) -> Result<f64> {
        if self.stages.len() != 1 {
            return Err(Error::Unsupported(format!(
                "norm-square sum needs a single-stage dataset, found {} stages",
                self.stages.len()
            )));
        }
        let phi = self.stages[0].phi();
        let q = self.n_q_total();
        let pairs = self.codes.pair_counts();
        let mut total = 0.0;
        for i in 0..self.d() {
            let mut row = 0.0;
            for j in 0..q {
                row += phi[(i, j)] * phi[(i, j)] * pairs[j * q + j] as f64;
            }
            for l in 0..q {
                for m in (l + 1)..q {
                    let c = pairs[l * q + m];
                    if c != 0 {
                        row += 2.0 * c as f64 * phi[(i, l)] * phi[(i, m)];
                    }
                }
            }
            total += row;
        }
        Ok(total)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompressionReport {
    pub n: usize,
    pub d: usize,
    pub n_q_total: usize,
    pub n_bc: usize,
    pub q2: f64,
    pub per_component_ratio: Vec<f64>,
    pub payload_bits: u64,
    pub total_bits: u64,
    /// `None` when no original samples are retained.
    pub predicted_error_increase: Option<f64>,
}

impl CompressionReport {
    pub fn new(dataset: &CompressedDataset, original: &DMatrix<f64>, alpha: f64) -> Result<Self> {
        Error::check_len("original rows", dataset.n(), original.nrows())?;
        Error::check_len("original columns", dataset.d(), original.ncols())?;
        let ratios = stats::variance_ratios(original, &dataset.decompress())?;
        let q2 = stats::mean(&ratios);
        let n_bc = dataset.bc_indices().len();
        let predicted = if n_bc == 0 {
            None
        } else {
            Some(stats::error_increase_estimate(dataset.n(), n_bc, q2, alpha)?)
        };
        Ok(CompressionReport {
            n: dataset.n(),
            d: dataset.d(),
            n_q_total: dataset.n_q_total(),
            n_bc,
            q2,
            per_component_ratio: ratios,
            payload_bits: dataset.payload_bits(),
            total_bits: dataset.total_bits(),
            predicted_error_increase: predicted,
        })
    }
}
