//! Principal-component baseline: keep the first `n_z` projections.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Bits per stored float coefficient when comparing against binary codes.
pub const FLOAT_COEFFICIENT_BITS: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// `n_z × D`, orthonormal rows in descending eigenvalue order.
    pub components: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
}

impl PcaModel {
    pub fn n_z(&self) -> usize {
        self.components.nrows()
    }

    pub fn storage_bits_per_sample(&self) -> usize {
        FLOAT_COEFFICIENT_BITS * self.n_z()
    }
}

pub fn sample_covariance(data: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = data.nrows();
    let mean = data.row_mean().transpose();
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.tr_mul(&centered) / (n as f64 - 1.0);
    (mean, cov)
}

pub fn pca_fit(data: &DMatrix<f64>, n_z: usize) -> Result<PcaModel> {
    let d = data.ncols();
    if data.nrows() < 2 {
        return Err(Error::invalid("PCA needs at least 2 samples"));
    }
    if n_z == 0 || n_z > d {
        return Err(Error::invalid(format!("n_z must lie in 1..={d}, got {n_z}")));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("PCA input"));
    }
    let (mean, cov) = sample_covariance(data);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    // ties broken by index so the result is reproducible
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut components = DMatrix::zeros(n_z, d);
    let mut eigenvalues = DVector::zeros(n_z);
    for (r, &idx) in order.iter().take(n_z).enumerate() {
        let mut v = eig.eigenvectors.column(idx).into_owned();
        let pivot = v.iter().fold(0.0_f64, |m, x| if x.abs() > m.abs() { *x } else { m });
        if pivot < 0.0 {
            v = -v;
        }
        components.set_row(r, &v.transpose());
        eigenvalues[r] = eig.eigenvalues[idx];
    }
    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
    })
}

/// Project onto the retained components and map back.
pub fn pca_roundtrip(model: &PcaModel, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Error::check_len("PCA input columns", model.mean.len(), data.ncols())?;
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= model.mean.transpose();
    }
    let coeffs = &centered * model.components.transpose();
    let mut out = coeffs * &model.components;
    for mut row in out.row_iter_mut() {
        row += model.mean.transpose();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::gen_correlated;

    #[test]
    fn recovers_dominant_direction() {
        let n = 200;
        let data = DMatrix::from_fn(n, 2, |k, j| {
            let t = (k as f64 * 0.37).sin() * 3.0;
            let noise = 1e-4 * ((k * 7 + j * 3) as f64).cos();
            t + noise
        });
        let model = pca_fit(&data, 1).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((model.components[(0, 0)] - s).abs() < 1e-3);
        assert!((model.components[(0, 1)] - s).abs() < 1e-3);
    }

    #[test]
    fn full_basis_is_lossless_and_orthonormal() {
        let data = gen_correlated(100, 5, 0.0, 4).unwrap();
        let model = pca_fit(&data, 5).unwrap();
        let gram = &model.components * model.components.transpose();
        assert!((gram - DMatrix::identity(5, 5)).amax() < 1e-10);
        let back = pca_roundtrip(&model, &data).unwrap();
        assert!((back - &data).amax() < 1e-8);
        assert!(model.eigenvalues.as_slice().windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(model, pca_fit(&data, 5).unwrap());
    }

    #[test]
    fn rank_one_data_round_trips() {
        let dir = [1.0, -2.0, 0.5];
        let data = DMatrix::from_fn(30, 3, |k, j| 1.0 + (k as f64 - 14.5) * dir[j]);
        let model = pca_fit(&data, 1).unwrap();
        let back = pca_roundtrip(&model, &data).unwrap();
        assert!((back - &data).amax() < 1e-8);
    }

    #[test]
    fn orthogonal_components_project_to_mean() {
        let data = DMatrix::from_fn(10, 3, |k, j| if j == 0 { k as f64 } else { 2.0 });
        let mean = data.row_mean().transpose();
        let model = PcaModel {
            mean: mean.clone(),
            components: DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0]),
            eigenvalues: DVector::from_element(1, 0.0),
        };
        let back = pca_roundtrip(&model, &data).unwrap();
        for k in 0..10 {
            for j in 0..3 {
                assert!((back[(k, j)] - mean[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let data = DMatrix::zeros(1, 3);
        assert!(pca_fit(&data, 1).is_err());
        let data = gen_correlated(10, 3, 0.2, 1).unwrap();
        assert!(pca_fit(&data, 4).is_err());
        let model = pca_fit(&data, 2).unwrap();
        assert!(pca_roundtrip(&model, &DMatrix::zeros(2, 2)).is_err());
    }
}
