//! End-to-end compression: standardise, train (optionally boosted), and
//! package codes, dictionaries, and retained originals.

use nalgebra::DMatrix;

use crate::codec::{standardize, CompressedDataset};
use crate::codes::CodeMatrix;
use crate::error::{Error, Result};
use crate::learn::{boost, StageResult, TrainConfig};
use crate::stats::{self, BiasCorrectionPlan, EstimateWithError, Selection};

#[derive(Clone, Debug, PartialEq)]
pub struct CompressOptions {
    /// Bits per boosting stage; a single entry trains one dictionary.
    pub stages: Vec<usize>,
    pub train: TrainConfig,
    pub n_bc: usize,
    pub n_bin: usize,
    pub selection: Selection,
}

impl Default for CompressOptions {
    fn default() -> Self {
        CompressOptions {
            stages: vec![16],
            train: TrainConfig::default(),
            n_bc: 0,
            n_bin: 1,
            selection: Selection::First,
        }
    }
}

pub struct Compressed {
    pub dataset: CompressedDataset,
    pub stages: Vec<StageResult>,
}

pub fn compress(data: &DMatrix<f64>, opts: &CompressOptions) -> Result<Compressed> {
    let plan = BiasCorrectionPlan::new(data.nrows(), opts.n_bc, opts.n_bin, opts.selection.clone())?;
    let bc_indices = plan.indices()?;
    let (z, standardization) = standardize(data)?;
    let stages = boost(&z, &opts.stages, &opts.train)?;
    let blocks: Vec<&CodeMatrix> = stages.iter().map(|s| &s.codes).collect();
    let codes = CodeMatrix::hstack(&blocks)?;
    let bc_samples = DMatrix::from_fn(bc_indices.len(), data.ncols(), |r, i| data[(bc_indices[r], i)]);
    let dataset = CompressedDataset::new(
        standardization,
        stages.iter().map(|s| s.dictionary.clone()).collect(),
        codes,
        bc_indices,
        bc_samples,
    )?;
    Ok(Compressed { dataset, stages })
}

/// Largest bin count that divides `n` and `n_bc` and puts the same number
/// of retained indices in every bin.
pub fn infer_bins(n: usize, indices: &[usize]) -> Option<usize> {
    let n_bc = indices.len();
    if n_bc == 0 {
        return None;
    }
    (1..=n_bc).rev().find(|&b| {
        BiasCorrectionPlan::new(n, n_bc, b, Selection::Explicit(indices.to_vec())).is_ok()
    })
}

/// Bias-corrected mean of every component, using only what the compressed
/// dataset stores (`f` is the identity on each component).
pub fn bias_corrected_component_means(
    dataset: &CompressedDataset,
    n_bin: Option<usize>,
) -> Result<Vec<EstimateWithError>> {
    let indices = dataset.bc_indices().to_vec();
    let n_bin = match n_bin {
        Some(b) => b,
        None => infer_bins(dataset.n(), &indices)
            .ok_or_else(|| Error::Plan("dataset retains no original samples".into()))?,
    };
    let plan = BiasCorrectionPlan::new(dataset.n(), indices.len(), n_bin, Selection::Explicit(indices))?;
    let recon = dataset.decompress();
    (0..dataset.d())
        .map(|i| {
            let f_tilde: Vec<f64> = recon.column(i).iter().copied().collect();
            let f_orig: Vec<f64> = dataset.bc_samples().column(i).iter().copied().collect();
            stats::bias_corrected_mean(&f_tilde, &f_orig, &plan)
        })
        .collect()
}

/// Plain (uncorrected) component means of the reconstruction.
pub fn sloppy_component_means(dataset: &CompressedDataset) -> Vec<f64> {
    let recon = dataset.decompress();
    recon
        .column_iter()
        .map(|c| stats::mean(&c.iter().copied().collect::<Vec<_>>()))
        .collect()
}
