//! Mapping between samples and binary codes for a fixed dictionary.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::qubo::{BitCode, QuboProblem};
use crate::solver::Solver;

/// The shared `D × N_q` basis. A sample is reconstructed as `phi · a`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    phi: DMatrix<f64>,
    element_bound: Option<f64>,
}

impl Dictionary {
    pub fn new(phi: DMatrix<f64>, element_bound: Option<f64>) -> Result<Self> {
        if phi.nrows() == 0 || phi.ncols() == 0 {
            return Err(Error::invalid("dictionary must be at least 1x1"));
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dictionary"));
        }
        if let Some(b) = element_bound {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::invalid("element bound must be positive"));
            }
            if phi.iter().any(|v| v.abs() > b) {
                return Err(Error::invalid(format!(
                    "dictionary entry exceeds element bound {b}"
                )));
            }
        }
        Ok(Dictionary { phi, element_bound })
    }

    pub fn from_rows(d: usize, n_q: usize, values: &[f64]) -> Result<Self> {
        Error::check_len("dictionary values", d * n_q, values.len())?;
        Self::new(DMatrix::from_row_slice(d, n_q, values), None)
    }

    pub fn d(&self) -> usize {
        self.phi.nrows()
    }

    pub fn n_q(&self) -> usize {
        self.phi.ncols()
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn element_bound(&self) -> Option<f64> {
        self.element_bound
    }

    /// QUBO whose energy at `a` equals `‖x − φa‖²`.
    pub fn build_qubo(&self, x: &[f64]) -> Result<QuboProblem> {
        Error::check_len("sample length", self.d(), x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample"));
        }
        let n_q = self.n_q();
        let xv = DVector::from_column_slice(x);
        let proj = self.phi.tr_mul(&xv);
        let gram = self.phi.tr_mul(&self.phi);
        let linear = (0..n_q).map(|i| gram[(i, i)] - 2.0 * proj[i]).collect();
        let mut quadratic = std::collections::BTreeMap::new();
        for i in 0..n_q {
            for j in (i + 1)..n_q {
                let c = 2.0 * gram[(i, j)];
                if c != 0.0 {
                    quadratic.insert((i, j), c);
                }
            }
        }
        QuboProblem::new(linear, quadratic, xv.norm_squared())
    }

    pub fn encode(&self, x: &[f64], solver: &Solver) -> Result<BitCode> {
        let problem = self.build_qubo(x)?;
        Ok(solver.solve(&problem)?.code)
    }

    pub fn reconstruct(&self, code: &BitCode) -> Result<Vec<f64>> {
        Error::check_len("code length", self.n_q(), code.len())?;
        let mut out = vec![0.0; self.d()];
        for j in code.ones() {
            for (o, v) in out.iter_mut().zip(self.phi.column(j).iter()) {
                *o += v;
            }
        }
        Ok(out)
    }

    /// `‖x − φa‖²`.
    pub fn squared_error(&self, x: &[f64], code: &BitCode) -> Result<f64> {
        Error::check_len("sample length", self.d(), x.len())?;
        let r = self.reconstruct(code)?;
        Ok(x.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::ExactSolver;

    fn brute_force(dict: &Dictionary, x: &[f64]) -> (u64, f64) {
        (0..1u64 << dict.n_q())
            .map(|v| {
                let c = BitCode::from_index(v, dict.n_q());
                (v, dict.squared_error(x, &c).unwrap())
            })
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    }

    #[test]
    fn identity_dictionary_qubo() {
        let dict = Dictionary::from_rows(2, 2, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        let q = dict.build_qubo(&[1.0, 0.0]).unwrap();
        assert_eq!(q.linear(), &[-1.0, 1.0]);
        assert!(q.quadratic().is_empty());
        assert_eq!(q.offset(), 1.0);
        let sol = ExactSolver::default().solve(&q).unwrap();
        assert_eq!(sol.code, BitCode::from(vec![true, false]));
        assert_eq!(sol.energy, 0.0);
        assert_eq!(brute_force(&dict, &[1.0, 0.0]), (1, 0.0));
    }

    #[test]
    fn upper_triangular_dictionary_qubo() {
        let dict = Dictionary::from_rows(2, 2, &[1.0, 1.0, 0.0, 1.0]).unwrap();
        let q = dict.build_qubo(&[1.0, 1.0]).unwrap();
        assert_eq!(q.linear(), &[-1.0, -2.0]);
        assert_eq!(q.quadratic().get(&(0, 1)), Some(&2.0));
        assert_eq!(q.offset(), 2.0);
        let code = dict.encode(&[1.0, 1.0], &Solver::exact()).unwrap();
        assert_eq!(code, BitCode::from(vec![false, true]));
        assert_eq!(brute_force(&dict, &[1.0, 1.0]), (2, 0.0));
        assert_eq!(dict.reconstruct(&code).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn zero_target_encodes_to_zero_code() {
        let dict = Dictionary::from_rows(2, 3, &[0.3, -0.2, 0.9, 1.1, 0.4, -0.7]).unwrap();
        let code = dict.encode(&[0.0, 0.0], &Solver::exact()).unwrap();
        assert_eq!(code, BitCode::zeros(3));
        assert_eq!(dict.reconstruct(&code).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn realizable_target_has_zero_error() {
        let dict = Dictionary::from_rows(3, 3, &[0.5, 1.0, -0.25, 0.0, 2.0, 1.5, 1.0, -1.0, 0.75])
            .unwrap();
        let target = BitCode::from(vec![true, false, true]);
        let x = dict.reconstruct(&target).unwrap();
        let code = dict.encode(&x, &Solver::exact()).unwrap();
        assert!(dict.squared_error(&x, &code).unwrap() < 1e-24);
    }

    #[test]
    fn dimension_errors() {
        let dict = Dictionary::from_rows(2, 2, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(dict.build_qubo(&[1.0]).is_err());
        assert!(dict.reconstruct(&BitCode::zeros(3)).is_err());
        assert!(dict.build_qubo(&[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn element_bound_is_checked() {
        let phi = DMatrix::from_row_slice(1, 2, &[0.5, 1.5]);
        assert!(Dictionary::new(phi.clone(), Some(1.0)).is_err());
        assert!(Dictionary::new(phi, Some(2.0)).is_ok());
    }
}
