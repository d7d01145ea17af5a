//! Alternating optimisation of a shared dictionary and per-sample binary
//! codes, with residual boosting.
//!
//! Each epoch walks a seeded permutation of the samples in mini-batches.
//! Within a batch the codes are re-solved for the current dictionary, then
//! the dictionary moves a fraction `eta` toward the batch least-squares
//! solution. `eta` decays geometrically per epoch.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::codes::CodeMatrix;
use crate::encoder::Dictionary;
use crate::error::{Error, Result};
use crate::qubo::BitCode;
use crate::solver::{derive_seed, Solver};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub n_q: usize,
    pub batch_size: usize,
    pub eta0: f64,
    pub eta_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    pub element_bound: Option<f64>,
    pub solver: Solver,
    pub ridge_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_q: 16,
            batch_size: 50,
            eta0: 0.9,
            eta_decay: 0.8,
            epochs: 30,
            seed: 0,
            element_bound: None,
            solver: Solver::exact(),
            ridge_epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_q == 0 {
            return Err(Error::invalid("n_q must be >= 1"));
        }
        if !(self.eta0 > 0.0 && self.eta0 <= 1.0) {
            return Err(Error::invalid(format!("eta0 must lie in (0, 1], got {}", self.eta0)));
        }
        if !(self.eta_decay > 0.0 && self.eta_decay < 1.0) {
            return Err(Error::invalid(format!(
                "eta_decay must lie in (0, 1), got {}",
                self.eta_decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if let Some(b) = self.element_bound {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::invalid("element bound must be positive"));
            }
        }
        if !(self.ridge_epsilon > 0.0 && self.ridge_epsilon.is_finite()) {
            return Err(Error::invalid("ridge_epsilon must be positive"));
        }
        self.solver.validate()
    }

    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.eta0 * self.eta_decay.powi(epoch as i32)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageResult {
    pub dictionary: Dictionary,
    pub codes: CodeMatrix,
    /// Full-data mean squared error per element after each epoch.
    pub training_mse_history: Vec<f64>,
}

impl StageResult {
    /// `N × D` reconstruction of this stage alone.
    pub fn reconstruction(&self) -> DMatrix<f64> {
        reconstruct_all(&self.dictionary, &self.codes)
    }
}

pub fn reconstruct_all(dict: &Dictionary, codes: &CodeMatrix) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(codes.n(), dict.d());
    for k in 0..codes.n() {
        let row = dict.reconstruct(&codes.row(k)).expect("code width matches");
        for (j, v) in row.into_iter().enumerate() {
            out[(k, j)] = v;
        }
    }
    out
}

/// Uniform entries on `[-1/√n_q, 1/√n_q]`.
pub fn init_dictionary(d: usize, n_q: usize, seed: u64) -> Result<Dictionary> {
    if d == 0 || n_q == 0 {
        return Err(Error::invalid("dictionary dimensions must be >= 1"));
    }
    let scale = 1.0 / (n_q as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi = DMatrix::from_fn(d, n_q, |_, _| rng.random_range(-scale..=scale));
    Dictionary::new(phi, None)
}

/// Ridge least-squares dictionary for a fixed batch of codes:
/// `φ̃ = Xᵀ B (BᵀB + ε'I)⁻¹` with `B` the `N_b × N_q` code rows and
/// `ε' = ε·trace(BᵀB)/N_q` (or `ε` when the batch has no set bits).
pub fn solve_phi(
    batch_x: &DMatrix<f64>,
    batch_codes: &CodeMatrix,
    ridge_epsilon: f64,
) -> Result<Dictionary> {
    Error::check_len("batch rows", batch_x.nrows(), batch_codes.n())?;
    let n_q = batch_codes.n_q();
    let d = batch_x.ncols();
    let counts = batch_codes.pair_counts();
    let trace: u64 = (0..n_q).map(|j| counts[j * n_q + j]).sum();
    let ridge = if trace == 0 {
        ridge_epsilon
    } else {
        ridge_epsilon * trace as f64 / n_q as f64
    };
    let gram = DMatrix::from_fn(n_q, n_q, |l, m| {
        counts[l * n_q + m] as f64 + if l == m { ridge } else { 0.0 }
    });
    // Bᵀ X, accumulated over set bits only
    let mut rhs = DMatrix::zeros(n_q, d);
    for k in 0..batch_codes.n() {
        for j in batch_codes.row(k).ones() {
            for i in 0..d {
                rhs[(j, i)] += batch_x[(k, i)];
            }
        }
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::invalid("ridge normal equations are not positive definite"))?;
    let solution = chol.solve(&rhs);
    Dictionary::new(solution.transpose(), None)
}

/// `φ + eta (φ̃ − φ)`, clamped to the current dictionary's element bound.
pub fn update_phi(current: &Dictionary, candidate: &Dictionary, eta: f64) -> Result<Dictionary> {
    Error::check_len("candidate rows", current.d(), candidate.d())?;
    Error::check_len("candidate columns", current.n_q(), candidate.n_q())?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::invalid(format!("eta must lie in [0, 1], got {eta}")));
    }
    let mut phi = current.phi() + (candidate.phi() - current.phi()) * eta;
    if let Some(b) = current.element_bound() {
        phi.apply(|v| *v = v.clamp(-b, b));
    }
    Dictionary::new(phi, current.element_bound())
}

fn mean_squared_error(rows: &[Vec<f64>], dict: &Dictionary, codes: &[BitCode]) -> f64 {
    let errs: Vec<f64> = rows
        .par_iter()
        .zip(codes.par_iter())
        .map(|(x, a)| dict.squared_error(x, a).expect("shapes checked"))
        .collect();
    crate::stats::pairwise_sum(&errs) / (rows.len() * dict.d()) as f64
}

/// Solve each listed sample, keeping its previous code when that one is
/// strictly better under the current dictionary.
fn refresh_codes(
    rows: &[Vec<f64>],
    indices: &[usize],
    codes: &[BitCode],
    dict: &Dictionary,
    solver: &Solver,
    stream: u64,
) -> Result<Vec<BitCode>> {
    indices
        .par_iter()
        .map(|&k| {
            let x = &rows[k];
            let fresh = dict.encode(x, &solver.reseeded(derive_seed(stream, k as u64)))?;
            let cached = &codes[k];
            if dict.squared_error(x, cached)? < dict.squared_error(x, &fresh)? {
                Ok(cached.clone())
            } else {
                Ok(fresh)
            }
        })
        .collect()
}

pub fn train(dataset: &DMatrix<f64>, config: &TrainConfig) -> Result<StageResult> {
    config.validate()?;
    let n = dataset.nrows();
    let d = dataset.ncols();
    if n < config.batch_size {
        return Err(Error::invalid(format!(
            "dataset has {n} samples, fewer than batch size {}",
            config.batch_size
        )));
    }
    if d == 0 {
        return Err(Error::invalid("dataset has no components"));
    }
    if dataset.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training data"));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|k| dataset.row(k).iter().copied().collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut dict = init_dictionary(d, config.n_q, rng.random())?;
    if let Some(b) = config.element_bound {
        let mut phi = dict.phi().clone();
        phi.apply(|v| *v = v.clamp(-b, b));
        dict = Dictionary::new(phi, Some(b))?;
    }
    let mut codes: Vec<BitCode> = (0..n)
        .map(|_| (0..config.n_q).map(|_| rng.random::<bool>()).collect())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let eta = config.learning_rate(epoch);
        order.shuffle(&mut rng);
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let stream = derive_seed(config.seed, ((epoch as u64) << 32) | b as u64);
            let fresh = refresh_codes(&rows, batch, &codes, &dict, &config.solver, stream)?;
            for (&k, c) in batch.iter().zip(fresh) {
                codes[k] = c;
            }
            let batch_x = DMatrix::from_fn(batch.len(), d, |r, c| rows[batch[r]][c]);
            let batch_codes = CodeMatrix::from_codes(
                config.n_q,
                &batch.iter().map(|&k| codes[k].clone()).collect::<Vec<_>>(),
            )?;
            let candidate = solve_phi(&batch_x, &batch_codes, config.ridge_epsilon)?;
            dict = update_phi(&dict, &candidate, eta)?;
        }
        let mse = mean_squared_error(&rows, &dict, &codes);
        log::info!("epoch {epoch}: eta = {eta:.4}, mse = {mse:.6e}");
        history.push(mse);
    }

    let all: Vec<usize> = (0..n).collect();
    let stream = derive_seed(config.seed, u64::MAX);
    codes = refresh_codes(&rows, &all, &codes, &dict, &config.solver, stream)?;
    log::info!(
        "final encode: mse = {:.6e}",
        mean_squared_error(&rows, &dict, &codes)
    );

    Ok(StageResult {
        codes: CodeMatrix::from_codes(config.n_q, &codes)?,
        dictionary: dict,
        training_mse_history: history,
    })
}

/// Train stages in sequence, each on the residual left by the previous
/// ones. The combined reconstruction is the sum of stage reconstructions.
pub fn boost(
    dataset: &DMatrix<f64>,
    stage_nqs: &[usize],
    config: &TrainConfig,
) -> Result<Vec<StageResult>> {
    if stage_nqs.is_empty() || stage_nqs.contains(&0) {
        return Err(Error::invalid("boosting stages must be non-empty and >= 1 bit each"));
    }
    let mut residual = dataset.clone();
    let mut stages = Vec::with_capacity(stage_nqs.len());
    for (m, &n_q) in stage_nqs.iter().enumerate() {
        let seed = if m == 0 {
            config.seed
        } else {
            derive_seed(config.seed, m as u64)
        };
        let stage_config = TrainConfig {
            n_q,
            seed,
            ..config.clone()
        };
        log::info!("boosting stage {} of {} ({n_q} bits)", m + 1, stage_nqs.len());
        let stage = train(&residual, &stage_config)?;
        residual -= stage.reconstruction();
        stages.push(stage);
    }
    Ok(stages)
}

/// Sum of stage reconstructions.
pub fn combined_reconstruction(stages: &[StageResult]) -> Option<DMatrix<f64>> {
    let mut it = stages.iter();
    let first = it.next()?.reconstruction();
    Some(it.fold(first, |acc, s| acc + s.reconstruction()))
}
