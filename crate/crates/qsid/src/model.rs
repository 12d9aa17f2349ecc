//! LTI model and quadratic cost data, with the JSON file format used by the
//! CLI and the FFI layer.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::{
    check_finite, controllability_rank, is_symmetric, lambda_min_sym, mat_from_row_major,
    row_major, sym_sqrt_pd, Mat,
};

/// Discrete-time model `x_{t+1} = A x_t + B u_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiModel {
    pub a: Mat,
    pub b: Mat,
}

impl LtiModel {
    pub fn new(a: Mat, b: Mat) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Shape(format!("A must be square, got {}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != a.nrows() {
            return Err(Error::Shape(format!(
                "B has {} rows but A is {0}x{0}; expected {1}",
                b.nrows(),
                a.nrows()
            )));
        }
        check_finite(&a, "A")?;
        check_finite(&b, "B")?;
        Ok(Self { a, b })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn is_controllable(&self) -> Result<bool> {
        Ok(controllability_rank(&self.a, &self.b)? == self.state_dim())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&text)?;
        file.into_model()
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, ModelFile::from_model(self).to_json_string()?)?;
        Ok(())
    }
}

/// On-disk schema: `{"n": .., "m": .., "A": row-major, "B": row-major}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
}

impl ModelFile {
    pub fn from_model(model: &LtiModel) -> Self {
        Self {
            n: model.state_dim(),
            m: model.input_dim(),
            a: row_major(&model.a),
            b: row_major(&model.b),
        }
    }

    pub fn into_model(self) -> Result<LtiModel> {
        let a = mat_from_row_major(self.n, self.n, &self.a)?;
        let b = mat_from_row_major(self.n, self.m, &self.b)?;
        LtiModel::new(a, b)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Stage-cost weights `Q > 0`, `R > 0`.
#[derive(Debug, Clone)]
pub struct CostWeights {
    pub q: Mat,
    pub r: Mat,
}

impl CostWeights {
    pub fn new(q: Mat, r: Mat) -> Result<Self> {
        for (name, m) in [("Q", &q), ("R", &r)] {
            if !m.is_square() {
                return Err(Error::Shape(format!("{name} must be square")));
            }
            if !is_symmetric(m, 1e-10) {
                return Err(Error::InvalidInput(format!("{name} is not symmetric")));
            }
            let lmin = lambda_min_sym(m);
            if lmin <= 0.0 {
                return Err(Error::NotPositiveDefinite { eigenvalue: lmin });
            }
        }
        Ok(Self { q, r })
    }

    pub fn identity(n: usize, m: usize) -> Self {
        Self { q: Mat::identity(n, n), r: Mat::identity(m, m) }
    }
}

/// Stacked factorization `C_c = [Q^{1/2}; 0]`, `D_cu = [0; R^{1/2}]`, so that
/// `C_c^T C_c = Q`, `D_cu^T D_cu = R` and `C_c^T D_cu = 0` by block structure.
#[derive(Debug, Clone)]
pub struct CostFactorization {
    pub c_c: Mat,
    pub d_cu: Mat,
}

pub fn factorize_cost(weights: &CostWeights) -> Result<CostFactorization> {
    let n = weights.q.nrows();
    let m = weights.r.nrows();
    let q_sqrt = sym_sqrt_pd(&weights.q)?;
    let r_sqrt = sym_sqrt_pd(&weights.r)?;
    let mut c_c = Mat::zeros(n + m, n);
    c_c.view_mut((0, 0), (n, n)).copy_from(&q_sqrt);
    let mut d_cu = Mat::zeros(n + m, m);
    d_cu.view_mut((n, 0), (m, m)).copy_from(&r_sqrt);
    Ok(CostFactorization { c_c, d_cu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    #[test]
    fn factorize_identity_weights() {
        let w = CostWeights::identity(2, 1);
        let f = factorize_cost(&w).unwrap();
        assert_eq!(f.c_c.shape(), (3, 2));
        assert_eq!(f.d_cu.shape(), (3, 1));
        assert_relative_eq!(f.c_c.view((0, 0), (2, 2)).into_owned(), Mat::identity(2, 2));
        assert_relative_eq!(f.d_cu[(2, 0)], 1.0);
        assert_relative_eq!(f.c_c.transpose() * &f.d_cu, Mat::zeros(2, 1));
    }

    #[test]
    fn factorize_diagonal_roots() {
        let w = CostWeights::new(
            Mat::from_diagonal(&DVector::from_vec(vec![4.0, 9.0])),
            Mat::from_diagonal(&DVector::from_vec(vec![16.0])),
        )
        .unwrap();
        let f = factorize_cost(&w).unwrap();
        assert_relative_eq!(f.c_c[(0, 0)], 2.0, max_relative = 1e-12);
        assert_relative_eq!(f.c_c[(1, 1)], 3.0, max_relative = 1e-12);
        assert_relative_eq!(f.d_cu[(2, 0)], 4.0, max_relative = 1e-12);
    }

    #[test]
    fn factorize_roundtrip_gram_blocks() {
        let q = Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let r = Mat::from_row_slice(1, 1, &[3.0]);
        let w = CostWeights::new(q.clone(), r.clone()).unwrap();
        let f = factorize_cost(&w).unwrap();
        assert_relative_eq!(f.c_c.transpose() * &f.c_c, q, epsilon = 1e-12);
        assert_relative_eq!(f.d_cu.transpose() * &f.d_cu, r, epsilon = 1e-12);
        assert_relative_eq!(f.c_c.transpose() * &f.d_cu, Mat::zeros(2, 1), epsilon = 1e-12);
    }

    #[test]
    fn cost_weights_reject_indefinite() {
        let q = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            CostWeights::new(q, Mat::identity(1, 1)),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn model_shape_checks() {
        assert!(LtiModel::new(Mat::zeros(2, 3), Mat::zeros(2, 1)).is_err());
        assert!(LtiModel::new(Mat::zeros(2, 2), Mat::zeros(3, 1)).is_err());
        assert!(LtiModel::new(Mat::identity(2, 2), Mat::zeros(2, 1)).is_ok());
    }

    #[test]
    fn model_json_roundtrip_is_byte_identical() {
        let model = LtiModel::new(
            Mat::from_row_slice(2, 2, &[0.9931, 0.0883, -0.1324, 0.7724]),
            Mat::from_row_slice(2, 1, &[0.0046, 0.0883]),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save_json(&path).unwrap();
        let first = std::fs::read(&path).unwrap();
        let reloaded = LtiModel::load_json(&path).unwrap();
        assert_eq!(reloaded, model);
        reloaded.save_json(&path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }
}
