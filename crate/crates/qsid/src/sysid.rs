//! Snapshot matrices and least-squares identification.

use crate::error::{Error, Result};
use crate::mat::{check_finite, pinv_times, svd_extremes, Mat};

/// One recorded run: `states` has one more column than `inputs`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Mat,
    pub inputs: Mat,
}

impl Trajectory {
    pub fn new(states: Mat, inputs: Mat) -> Result<Self> {
        if states.ncols() != inputs.ncols() + 1 {
            return Err(Error::Shape(format!(
                "trajectory needs one more state column than input columns, got {} states / {} inputs",
                states.ncols(),
                inputs.ncols()
            )));
        }
        Ok(Self { states, inputs })
    }

    pub fn len(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.ncols() == 0
    }
}

/// Column-stacked snapshot matrices `X`, `X+`, `U` and the regressor
/// `Psi = [X; U]` over `T` transitions.
#[derive(Debug, Clone)]
pub struct DataMatrices {
    pub x: Mat,
    pub xplus: Mat,
    pub u: Mat,
    pub psi: Mat,
    pub t: usize,
}

impl DataMatrices {
    pub fn new(x: Mat, xplus: Mat, u: Mat) -> Result<Self> {
        let t = x.ncols();
        if xplus.ncols() != t || u.ncols() != t {
            return Err(Error::Shape(format!(
                "column counts disagree: X has {t}, X+ has {}, U has {}",
                xplus.ncols(),
                u.ncols()
            )));
        }
        if xplus.nrows() != x.nrows() {
            return Err(Error::Shape("X and X+ row counts disagree".into()));
        }
        if t == 0 {
            return Err(Error::InvalidInput("empty dataset".into()));
        }
        check_finite(&x, "X")?;
        check_finite(&xplus, "X+")?;
        check_finite(&u, "U")?;
        let psi = stack_psi(&x, &u);
        Ok(Self { x, xplus, u, psi, t })
    }

    pub fn state_dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.u.nrows()
    }
}

pub fn stack_psi(x: &Mat, u: &Mat) -> Mat {
    let (n, m, t) = (x.nrows(), u.nrows(), x.ncols());
    let mut psi = Mat::zeros(n + m, t);
    psi.view_mut((0, 0), (n, t)).copy_from(x);
    psi.view_mut((n, 0), (m, t)).copy_from(u);
    psi
}

/// Concatenate trajectories into one `(X, X+, U)` batch, ordered by
/// trajectory index then time.
pub fn build_data_matrices(trajectories: &[Trajectory]) -> Result<DataMatrices> {
    if trajectories.is_empty() {
        return Err(Error::InvalidInput("no trajectories given".into()));
    }
    let n = trajectories[0].states.nrows();
    let m = trajectories[0].inputs.nrows();
    let total: usize = trajectories.iter().map(Trajectory::len).sum();
    if total == 0 {
        return Err(Error::InvalidInput("trajectories contain no transitions".into()));
    }
    let mut x = Mat::zeros(n, total);
    let mut xplus = Mat::zeros(n, total);
    let mut u = Mat::zeros(m, total);
    let mut col = 0;
    for (idx, traj) in trajectories.iter().enumerate() {
        if traj.states.nrows() != n || traj.inputs.nrows() != m {
            return Err(Error::Shape(format!(
                "trajectory {idx} has {}x{} states / {}x{} inputs, expected {n}/{m} rows",
                traj.states.nrows(),
                traj.states.ncols(),
                traj.inputs.nrows(),
                traj.inputs.ncols()
            )));
        }
        if traj.states.ncols() != traj.inputs.ncols() + 1 {
            return Err(Error::Shape(format!(
                "trajectory {idx}: {} state columns vs {} input columns",
                traj.states.ncols(),
                traj.inputs.ncols()
            )));
        }
        let len = traj.len();
        x.view_mut((0, col), (n, len)).copy_from(&traj.states.view((0, 0), (n, len)));
        xplus.view_mut((0, col), (n, len)).copy_from(&traj.states.view((0, 1), (n, len)));
        u.view_mut((0, col), (m, len)).copy_from(&traj.inputs);
        col += len;
    }
    DataMatrices::new(x, xplus, u)
}

/// Least-squares estimate `G = [A, B]` with its normal-equation Gramian.
#[derive(Debug, Clone)]
pub struct IdentifiedModel {
    pub g_hat: Mat,
    pub a_hat: Mat,
    pub b_hat: Mat,
    /// `Psi Psi^T / T`
    pub gram: Mat,
}

impl IdentifiedModel {
    pub fn state_dim(&self) -> usize {
        self.a_hat.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b_hat.ncols()
    }
}

/// Solve `min 1/T || X+ - G Psi ||^2` through the normal equations.
pub fn identify(data: &DataMatrices) -> Result<IdentifiedModel> {
    let n = data.state_dim();
    let m = data.input_dim();
    let t = data.t as f64;
    let gram = (&data.psi * data.psi.transpose()) / t;
    let cross = (&data.xplus * data.psi.transpose()) / t;
    let g_hat = match pinv_times(&cross, &gram) {
        Ok(g) => g,
        Err(Error::RankDeficient { .. }) => {
            let (_, sigma_min) = svd_extremes(&data.psi)?;
            return Err(Error::PersistentExcitation { sigma_min });
        }
        Err(e) => return Err(e),
    };
    let a_hat = g_hat.view((0, 0), (n, n)).into_owned();
    let b_hat = g_hat.view((0, n), (n, m)).into_owned();
    Ok(IdentifiedModel { g_hat, a_hat, b_hat, gram })
}

/// Relative Frobenius error `||truth - estimate||_F / ||truth||_F`.
pub fn relative_error(truth: &Mat, estimate: &Mat) -> Result<f64> {
    if truth.shape() != estimate.shape() {
        return Err(Error::Shape(format!(
            "shapes differ: {:?} vs {:?}",
            truth.shape(),
            estimate.shape()
        )));
    }
    let denom = truth.norm();
    if denom == 0.0 {
        return Err(Error::ZeroNormReference);
    }
    Ok((truth - estimate).norm() / denom)
}

/// Spectral-norm variant, reported alongside the Frobenius form.
pub fn relative_error_spectral(truth: &Mat, estimate: &Mat) -> Result<f64> {
    if truth.shape() != estimate.shape() {
        return Err(Error::Shape("shapes differ".into()));
    }
    let denom = crate::mat::spectral_norm(truth);
    if denom == 0.0 {
        return Err(Error::ZeroNormReference);
    }
    Ok(crate::mat::spectral_norm(&(truth - estimate)) / denom)
}
