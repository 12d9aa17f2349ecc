//! Dense matrix helpers shared by every stage of the pipeline.
//!
//! All matrices are `nalgebra::DMatrix<f64>`; row-major flattening is only
//! used at serialization boundaries.

use nalgebra::linalg::{Schur, SymmetricEigen, SVD};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative factor used for rank decisions; scaled by dimension and largest
/// eigen/singular value at each call site.
pub const RANK_REL_TOL: f64 = 1e-12;

/// Iteration cap for the iterative decompositions. Unbounded variants can
/// spin forever on the garbage a stalled conic solve hands back.
const DECOMP_MAX_ITER: usize = 4096;

fn bounded_svd(m: &Mat) -> Option<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    SVD::try_new(m.clone(), false, false, f64::EPSILON, DECOMP_MAX_ITER)
}

fn bounded_sym_eigen(m: Mat) -> Option<SymmetricEigen<f64, nalgebra::Dyn>> {
    SymmetricEigen::try_new(m, f64::EPSILON, DECOMP_MAX_ITER)
}

pub fn check_finite(m: &Mat, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} contains non-finite entries")))
    }
}

pub fn mat_from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Mat> {
    if data.len() != rows * cols {
        return Err(Error::Shape(format!(
            "expected {rows}x{cols} = {} entries, got {}",
            rows * cols,
            data.len()
        )));
    }
    Ok(Mat::from_row_slice(rows, cols, data))
}

pub fn row_major(m: &Mat) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Largest and smallest of the `min(rows, cols)` singular values.
pub fn svd_extremes(m: &Mat) -> Result<(f64, f64)> {
    check_finite(m, "matrix")?;
    let svd = bounded_svd(m)
        .ok_or_else(|| Error::SolverFailure("SVD iteration did not converge".into()))?;
    let sv = svd.singular_values;
    let max = sv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((max, min))
}

/// Largest singular value; falls back to the (never smaller) Frobenius norm
/// if the iteration fails to converge.
pub fn spectral_norm(m: &Mat) -> f64 {
    match bounded_svd(m) {
        Some(svd) => svd.singular_values.iter().copied().fold(0.0, f64::max),
        None => m.norm(),
    }
}

fn symmetrize(m: &Mat) -> Mat {
    0.5 * (m + m.transpose())
}

/// Eigenvalues of the symmetric part of `m`; `None` when the iteration does
/// not converge.
pub fn sym_eigenvalues(m: &Mat) -> Option<Vector> {
    bounded_sym_eigen(symmetrize(m)).map(|e| e.eigenvalues)
}

/// Largest eigenvalue of the symmetric part; `+inf` on a failed iteration so
/// that upper-bound checks fail safe.
pub fn lambda_max_sym(m: &Mat) -> f64 {
    match sym_eigenvalues(m) {
        Some(v) => v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        None => f64::INFINITY,
    }
}

/// Smallest eigenvalue of the symmetric part; `-inf` on a failed iteration so
/// that definiteness checks fail safe.
pub fn lambda_min_sym(m: &Mat) -> f64 {
    match sym_eigenvalues(m) {
        Some(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
        None => f64::NEG_INFINITY,
    }
}

pub fn is_symmetric(m: &Mat, rel_tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.norm().max(1e-12);
    (m - m.transpose()).norm() <= rel_tol * scale
}

/// `Y * W^{-1}` for symmetric positive-definite `W`, via eigendecomposition.
///
/// Fails with the offending smallest eigenvalue when `W` is singular to the
/// rank tolerance `dim * lambda_max * 1e-12`.
pub fn pinv_times(y: &Mat, w: &Mat) -> Result<Mat> {
    if !w.is_square() {
        return Err(Error::Shape(format!("W must be square, got {}x{}", w.nrows(), w.ncols())));
    }
    if y.ncols() != w.nrows() {
        return Err(Error::Shape(format!(
            "Y has {} columns but W is {}x{}",
            y.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    check_finite(y, "Y")?;
    check_finite(w, "W")?;
    if !is_symmetric(w, 1e-10) {
        return Err(Error::InvalidInput("W is not symmetric".into()));
    }
    let eig = bounded_sym_eigen(symmetrize(w))
        .ok_or_else(|| Error::SolverFailure("eigen iteration did not converge".into()))?;
    let lambda_max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lambda_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = (w.nrows() as f64) * lambda_max.max(0.0) * RANK_REL_TOL;
    if lambda_min <= tol {
        return Err(Error::RankDeficient { lambda_min, tol });
    }
    let inv_diag = Mat::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    Ok(y * &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose())
}

/// Symmetric positive-definite square root via eigendecomposition.
pub fn sym_sqrt_pd(m: &Mat) -> Result<Mat> {
    if !m.is_square() {
        return Err(Error::Shape("square matrix required for square root".into()));
    }
    if !is_symmetric(m, 1e-10) {
        return Err(Error::InvalidInput("matrix is not symmetric".into()));
    }
    let eig = bounded_sym_eigen(symmetrize(m))
        .ok_or_else(|| Error::SolverFailure("eigen iteration did not converge".into()))?;
    let lambda_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if lambda_min <= 0.0 {
        return Err(Error::NotPositiveDefinite { eigenvalue: lambda_min });
    }
    let sqrt_diag = Mat::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    Ok(&eig.eigenvectors * sqrt_diag * eig.eigenvectors.transpose())
}

/// Largest eigenvalue modulus of a square matrix.
pub fn spectral_radius(m: &Mat) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "spectral radius needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    check_finite(m, "matrix")?;
    let schur = Schur::try_new(m.clone(), f64::EPSILON, DECOMP_MAX_ITER)
        .ok_or_else(|| Error::SolverFailure("Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max))
}

/// Rank of `[B, AB, ..., A^{n-1}B]` with tolerance `n * sigma_max * 1e-12`.
pub fn controllability_rank(a: &Mat, b: &Mat) -> Result<usize> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(Error::Shape("A must be square".into()));
    }
    if b.nrows() != n {
        return Err(Error::Shape(format!("B has {} rows, expected {n}", b.nrows())));
    }
    let m = b.ncols();
    let mut ctrb = Mat::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        ctrb.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    let sv = bounded_svd(&ctrb)
        .ok_or_else(|| Error::SolverFailure("SVD iteration did not converge".into()))?
        .singular_values;
    let sigma_max = sv.iter().copied().fold(0.0, f64::max);
    let tol = (n as f64) * sigma_max * RANK_REL_TOL;
    Ok(sv.iter().filter(|&&s| s > tol).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn svd_extremes_identity() {
        let (max, min) = svd_extremes(&Mat::identity(3, 3)).unwrap();
        assert_relative_eq!(max, 1.0, max_relative = 1e-10);
        assert_relative_eq!(min, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn svd_extremes_wide_full_rank() {
        // diag(3, 2) with a zero column appended keeps both singular values.
        let m = Mat::from_row_slice(2, 3, &[3.0, 0.0, 0.0, 0.0, 2.0, 0.0]);
        let (max, min) = svd_extremes(&m).unwrap();
        assert_relative_eq!(max, 3.0, max_relative = 1e-10);
        assert_relative_eq!(min, 2.0, max_relative = 1e-10);
    }

    #[test]
    fn svd_extremes_rank_deficient_wide() {
        let m = Mat::from_row_slice(2, 3, &[3.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let (max, min) = svd_extremes(&m).unwrap();
        assert_relative_eq!(max, 3.0, max_relative = 1e-10);
        assert!(min.abs() < 1e-12);
    }

    #[test]
    fn svd_extremes_symmetric_by_hand() {
        // [[1,2],[2,1]] has eigenvalues {3, -1}, hence singular values {3, 1}.
        let m = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let (max, min) = svd_extremes(&m).unwrap();
        assert_relative_eq!(max, 3.0, max_relative = 1e-10);
        assert_relative_eq!(min, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn svd_extremes_rejects_nan() {
        let m = Mat::from_row_slice(1, 2, &[1.0, f64::NAN]);
        assert!(matches!(svd_extremes(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn pinv_times_identity() {
        let i = Mat::identity(3, 3);
        let g = pinv_times(&i, &i).unwrap();
        assert_relative_eq!(g, i, max_relative = 1e-12);
    }

    #[test]
    fn pinv_times_diagonal() {
        let y = Mat::from_row_slice(1, 2, &[2.0, 0.0]);
        let w = Mat::from_diagonal(&Vector::from_vec(vec![2.0, 4.0]));
        let g = pinv_times(&y, &w).unwrap();
        assert_relative_eq!(g, Mat::from_row_slice(1, 2, &[1.0, 0.0]), max_relative = 1e-12);
    }

    #[test]
    fn pinv_times_recovers_worked_example() {
        // One-dimensional dataset x = {1, 1.5, -0.25}, u = {1, -1} generated by
        // A = 0.5, B = 1: Y = Xplus Psi^T, W = Psi Psi^T, Y W^{-1} = [0.5, 1].
        let y = Mat::from_row_slice(1, 2, &[1.125, 1.75]);
        let w = Mat::from_row_slice(2, 2, &[3.25, -0.5, -0.5, 2.0]);
        let g = pinv_times(&y, &w).unwrap();
        assert_relative_eq!(g, Mat::from_row_slice(1, 2, &[0.5, 1.0]), max_relative = 1e-10);
    }

    #[test]
    fn pinv_times_singular_reports_lambda_min() {
        let y = Mat::from_row_slice(1, 2, &[1.0, 1.0]);
        let w = Mat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        match pinv_times(&y, &w) {
            Err(Error::RankDeficient { lambda_min, .. }) => assert!(lambda_min.abs() < 1e-10),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn sym_sqrt_squares_back() {
        let q = Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let s = sym_sqrt_pd(&q).unwrap();
        assert_relative_eq!(&s * &s, q, epsilon = 1e-12);
    }

    #[test]
    fn sym_sqrt_rejects_indefinite() {
        let q = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        match sym_sqrt_pd(&q) {
            Err(Error::NotPositiveDefinite { eigenvalue }) => {
                assert_relative_eq!(eigenvalue, -1.0, max_relative = 1e-10)
            }
            other => panic!("expected definiteness error, got {other:?}"),
        }
    }

    #[test]
    fn spectral_radius_cases() {
        let d = Mat::from_diagonal(&Vector::from_vec(vec![0.5, -0.9]));
        assert_relative_eq!(spectral_radius(&d).unwrap(), 0.9, max_relative = 1e-8);
        let rot = Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert_relative_eq!(spectral_radius(&rot).unwrap(), 1.0, max_relative = 1e-8);
        let rect = Mat::zeros(2, 3);
        assert!(matches!(spectral_radius(&rect), Err(Error::Shape(_))));
    }

    #[test]
    fn controllability_rank_integrator_chain() {
        // Double integrator: controllable from the single input.
        let a = Mat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let b = Mat::from_row_slice(2, 1, &[0.0, 1.0]);
        assert_eq!(controllability_rank(&a, &b).unwrap(), 2);
        // Decoupled second state is unreachable.
        let a2 = Mat::from_diagonal(&Vector::from_vec(vec![1.0, 2.0]));
        let b2 = Mat::from_row_slice(2, 1, &[1.0, 0.0]);
        assert_eq!(controllability_rank(&a2, &b2).unwrap(), 1);
    }

    proptest::proptest! {
        // Every eigenvalue of M M^T lies within the squared extreme singular
        // values (rows <= cols so the row Gramian carries no padding zeros).
        #[test]
        fn gram_eigenvalues_between_singular_extremes(
            rows in 1usize..4, extra in 0usize..3,
            seed in proptest::collection::vec(-5.0f64..5.0, 16)
        ) {
            let cols = rows + extra;
            let data: Vec<f64> = (0..rows * cols).map(|k| seed[k % seed.len()] + 0.01 * k as f64).collect();
            let m = Mat::from_row_slice(rows, cols, &data);
            let (smax, smin) = svd_extremes(&m).unwrap();
            let gram = &m * m.transpose();
            for lambda in sym_eigenvalues(&gram).unwrap().iter() {
                proptest::prop_assert!(*lambda <= smax * smax * (1.0 + 1e-9) + 1e-12);
                proptest::prop_assert!(*lambda >= smin * smin * (1.0 - 1e-9) - 1e-12);
            }
        }

        // pinv_times(Y, W) * W reproduces Y for random positive-definite W.
        #[test]
        fn pinv_times_inverts(entries in proptest::collection::vec(-3.0f64..3.0, 12)) {
            let base = Mat::from_row_slice(3, 3, &entries[..9]);
            let w = &base * base.transpose() + Mat::identity(3, 3) * 0.5;
            let y = Mat::from_row_slice(1, 3, &entries[9..12]);
            let g = pinv_times(&y, &w).unwrap();
            let res = (&g * &w - &y).norm();
            proptest::prop_assert!(res <= 1e-9 * y.norm().max(1e-6));
        }
    }
}
