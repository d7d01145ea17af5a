//! QUBO problems in the binary (0/1) variable convention.
//!
//! A problem is `offset + Σ_i linear_i a_i + Σ_{i<j} quadratic_ij a_i a_j`
//! over `a ∈ {0,1}^n`.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// A binary code, bit 0 first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct BitCode(Vec<bool>);

impl BitCode {
    pub fn zeros(len: usize) -> Self {
        BitCode(vec![false; len])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        BitCode(bits)
    }

    /// Code of length `len` whose bits are the binary digits of `value`,
    /// bit 0 least significant.
    pub fn from_index(value: u64, len: usize) -> Self {
        BitCode((0..len).map(|i| i < 64 && (value >> i) & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.0[i] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Indices of set bits in increasing order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    /// Compare as unsigned integers (bit 0 least significant). Codes of
    /// different length compare as if zero-extended.
    pub fn value_cmp(&self, other: &BitCode) -> Ordering {
        let n = self.len().max(other.len());
        for i in (0..n).rev() {
            let a = self.0.get(i).copied().unwrap_or(false);
            let b = other.0.get(i).copied().unwrap_or(false);
            match a.cmp(&b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        Ordering::Equal
    }

    pub fn concat(parts: &[BitCode]) -> BitCode {
        BitCode(parts.iter().flat_map(|c| c.0.iter().copied()).collect())
    }
}

impl From<Vec<bool>> for BitCode {
    fn from(bits: Vec<bool>) -> Self {
        BitCode(bits)
    }
}

impl FromIterator<bool> for BitCode {
    fn from_iter<T: IntoIterator<Item = bool>>(iter: T) -> Self {
        BitCode(iter.into_iter().collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuboProblem {
    n_vars: usize,
    linear: Vec<f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
    offset: f64,
}

impl QuboProblem {
    pub fn new(
        linear: Vec<f64>,
        quadratic: BTreeMap<(usize, usize), f64>,
        offset: f64,
    ) -> Result<Self> {
        let n_vars = linear.len();
        if n_vars == 0 {
            return Err(Error::invalid("a QUBO needs at least one variable"));
        }
        if !offset.is_finite() || linear.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("QUBO coefficients"));
        }
        for (&(i, j), c) in &quadratic {
            if !(i < j && j < n_vars) {
                return Err(Error::invalid(format!(
                    "quadratic key ({i}, {j}) must satisfy i < j < {n_vars}"
                )));
            }
            if !c.is_finite() {
                return Err(Error::NonFinite("QUBO coefficients"));
            }
        }
        Ok(QuboProblem {
            n_vars,
            linear,
            quadratic,
            offset,
        })
    }

    /// Build from `(i, j, value)` triples; keys are normalised so `i < j`
    /// and repeated pairs accumulate.
    pub fn from_terms(
        linear: Vec<f64>,
        terms: impl IntoIterator<Item = (usize, usize, f64)>,
        offset: f64,
    ) -> Result<Self> {
        let mut quadratic = BTreeMap::new();
        for (i, j, c) in terms {
            if i == j {
                return Err(Error::invalid(format!("diagonal coupling ({i}, {j})")));
            }
            *quadratic.entry((i.min(j), i.max(j))).or_insert(0.0) += c;
        }
        Self::new(linear, quadratic, offset)
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn quadratic(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.quadratic
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Largest absolute linear or quadratic coefficient (offset excluded).
    pub fn max_abs_coefficient(&self) -> f64 {
        self.linear
            .iter()
            .chain(self.quadratic.values())
            .fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    pub fn energy(&self, code: &BitCode) -> Result<f64> {
        Error::check_len("QUBO energy", self.n_vars, code.len())?;
        let mut e = self.offset;
        for (c, bit) in self.linear.iter().zip(code.iter()) {
            if bit {
                e += c;
            }
        }
        for (&(i, j), c) in &self.quadratic {
            if code.get(i) && code.get(j) {
                e += c;
            }
        }
        Ok(e)
    }

    /// Gaussian perturbation of every linear and quadratic coefficient,
    /// scaled by `relative_noise` times the largest coefficient magnitude.
    /// Emulates analog control error on annealer hardware.
    pub fn perturb(&self, relative_noise: f64, seed: u64) -> Result<QuboProblem> {
        if !(relative_noise >= 0.0 && relative_noise.is_finite()) {
            return Err(Error::invalid("relative_noise must be finite and >= 0"));
        }
        let scale = relative_noise * self.max_abs_coefficient();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut noise = || -> f64 {
            let g: f64 = StandardNormal.sample(&mut rng);
            scale * g
        };
        let linear = self.linear.iter().map(|c| c + noise()).collect();
        let quadratic = self
            .quadratic
            .iter()
            .map(|(&k, c)| (k, c + noise()))
            .collect();
        Ok(QuboProblem {
            n_vars: self.n_vars,
            linear,
            quadratic,
            offset: self.offset,
        })
    }

    pub(crate) fn dense(&self) -> DenseQubo {
        let n = self.n_vars;
        let mut coupling = vec![0.0; n * n];
        for (&(i, j), &c) in &self.quadratic {
            coupling[i * n + j] = c;
            coupling[j * n + i] = c;
        }
        DenseQubo {
            n,
            linear: self.linear.clone(),
            coupling,
            offset: self.offset,
        }
    }
}

/// Symmetric dense form used by the solvers (zero diagonal).
pub(crate) struct DenseQubo {
    pub n: usize,
    pub linear: Vec<f64>,
    pub coupling: Vec<f64>,
    pub offset: f64,
}

impl DenseQubo {
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.coupling[i * self.n..(i + 1) * self.n]
    }

    /// Exact energy and local fields `linear_i + Σ_j J_ij a_j` of `bits`.
    pub fn energy_and_fields(&self, bits: &[bool], fields: &mut [f64]) -> f64 {
        fields.copy_from_slice(&self.linear);
        let mut e = self.offset;
        for i in (0..self.n).filter(|&i| bits[i]) {
            e += self.linear[i];
            for (f, c) in fields.iter_mut().zip(self.row(i)) {
                *f += c;
            }
        }
        // each pair counted twice through the fields
        let mut pair = 0.0;
        for i in (0..self.n).filter(|&i| bits[i]) {
            pair += fields[i] - self.linear[i];
        }
        e + 0.5 * pair
    }
}
