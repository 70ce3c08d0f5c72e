use serde::{Deserialize, Serialize};

use super::{mean_std, MlError};

/// Per-feature `(x - mean) / std`, with population std. Constant features
/// map to 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Result<Self, MlError> {
        let d = super::check_xy(x, x)?;
        let (means, stds) = (0..d)
            .map(|j| mean_std(&x.iter().map(|r| r[j]).collect::<Vec<_>>()))
            .unzip();
        Ok(Self { means, stds })
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&v, (&m, &s))| if s > 0.0 { (v - m) / s } else { 0.0 })
            .collect()
    }

    pub fn transform(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.transform_row(r)).collect()
    }

    /// Fit on a single column, e.g. regression targets.
    pub fn fit_column(values: &[f64]) -> Result<Self, MlError> {
        if values.is_empty() {
            return Err(MlError::EmptyInput);
        }
        let (m, s) = mean_std(values);
        Ok(Self {
            means: vec![m],
            stds: vec![s],
        })
    }

    /// Inverse of `transform` for a single-column scaler.
    pub fn inverse_scalar(&self, z: f64) -> f64 {
        if self.stds[0] > 0.0 {
            z * self.stds[0] + self.means[0]
        } else {
            self.means[0]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn two_point_column() {
        let s = Standardizer::fit(&[vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(s.means, vec![2.0]);
        assert_eq!(s.stds, vec![1.0]);
        assert_eq!(s.transform(&[vec![1.0], vec![3.0]]), vec![vec![-1.0], vec![1.0]]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let x = vec![vec![5.0]; 3];
        let s = Standardizer::fit(&x).unwrap();
        assert_eq!(s.transform(&x), vec![vec![0.0]; 3]);
    }

    #[test]
    fn empty_input() {
        assert_eq!(Standardizer::fit(&[]), Err(MlError::EmptyInput));
    }

    #[test]
    fn random_matrix_moments() {
        let mut rng = crate::rng::rng_for(3, 0);
        let x: Vec<Vec<f64>> = (0..500)
            .map(|_| vec![rng.gen_range(-50.0..200.0), rng.gen_range(0.0..1e-3)])
            .collect();
        let s = Standardizer::fit(&x).unwrap();
        let z = s.transform(&x);
        for j in 0..2 {
            let (m, sd) = mean_std(&z.iter().map(|r| r[j]).collect::<Vec<_>>());
            assert!(m.abs() < 1e-9, "mean {m}");
            assert!((sd - 1.0).abs() < 1e-9, "std {sd}");
        }
    }

    #[test]
    fn inverse_round_trip() {
        let s = Standardizer::fit_column(&[2.0, 4.0, 9.0]).unwrap();
        let z = s.transform_row(&[7.5])[0];
        assert!((s.inverse_scalar(z) - 7.5).abs() < 1e-12);
    }
}
