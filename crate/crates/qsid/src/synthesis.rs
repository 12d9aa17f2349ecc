//! Guaranteed-cost state-feedback synthesis under a norm-bounded
//! identification error, with certificate validation and a sampling audit.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmi::{LmiProblem, Objective, RawStatus};
use crate::mat::{
    check_finite, controllability_rank, lambda_max_sym, spectral_radius, Mat, Vector,
};
use crate::model::{factorize_cost, CostFactorization, CostWeights, LtiModel};
use crate::sysid::IdentifiedModel;

/// Channel matrices embedding `||dG|| <= rho` as `w = Delta z`, `||Delta|| <= 1`.
#[derive(Debug, Clone)]
pub struct UncertaintyChannels {
    pub b_w: Mat,
    pub c_z: Mat,
    pub d_zu: Mat,
    pub rho: f64,
}

pub fn build_channels(rho: f64, n: usize, m: usize) -> Result<UncertaintyChannels> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("rho = {rho} must be nonnegative")));
    }
    let mut c_z = Mat::zeros(n + m, n);
    c_z.view_mut((0, 0), (n, n)).copy_from(&(rho * Mat::identity(n, n)));
    let mut d_zu = Mat::zeros(n + m, m);
    d_zu.view_mut((n, 0), (m, m)).copy_from(&(rho * Mat::identity(m, m)));
    Ok(UncertaintyChannels { b_w: Mat::identity(n, n), c_z, d_zu, rho })
}

/// Build the structured synthesis inequality for an identified model.
pub fn assemble_lmi(
    model: &IdentifiedModel,
    channels: &UncertaintyChannels,
    cost: &CostFactorization,
) -> Result<LmiProblem> {
    let n = model.state_dim();
    let m = model.input_dim();
    for (name, mat, rows, cols) in [
        ("C_z", &channels.c_z, n + m, n),
        ("D_zu", &channels.d_zu, n + m, m),
        ("C_c", &cost.c_c, n + m, n),
        ("D_cu", &cost.d_cu, n + m, m),
    ] {
        if mat.shape() != (rows, cols) {
            return Err(Error::Shape(format!(
                "block {name} has shape {:?}, expected ({rows}, {cols})",
                mat.shape()
            )));
        }
    }
    Ok(LmiProblem {
        n,
        m,
        a_hat: model.a_hat.clone(),
        b_hat: model.b_hat.clone(),
        c_z: channels.c_z.clone(),
        d_zu: channels.d_zu.clone(),
        c_c: cost.c_c.clone(),
        d_cu: cost.d_cu.clone(),
        delta_x: 1e-6,
        delta_beta: 1e-9,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    Optimal,
    Feasible,
    Infeasible,
    NumericalFailure,
}

impl std::fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolverStatus::Optimal => "optimal",
            SolverStatus::Feasible => "feasible",
            SolverStatus::Infeasible => "infeasible",
            SolverStatus::NumericalFailure => "numerical-failure",
        };
        f.write_str(s)
    }
}

/// A rank-one admissible perturbation that moves a real eigenvalue onto or
/// beyond the unit circle while removing the mode's input authority; its
/// existence proves no guaranteed-cost controller can exist at this `rho`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfeasibilityCertificate {
    /// Spectral norm of the constructed `[dA, dB]`.
    pub budget: f64,
    /// The eigenvalue pushed outside the unit circle.
    pub eigenvalue: f64,
    pub left_eigenvector: Vec<f64>,
}

/// Smallest rank-one destabilizing budget over real eigen-directions of
/// `A_hat`: `sqrt(max(0, 1 - |lambda|)^2 + ||w^T B_hat||^2)`.
pub fn unstabilizable_budget(a_hat: &Mat, b_hat: &Mat) -> Option<InfeasibilityCertificate> {
    let n = a_hat.nrows();
    let eigs = a_hat.complex_eigenvalues();
    let mut best: Option<InfeasibilityCertificate> = None;
    for lambda in eigs.iter() {
        if lambda.im.abs() > 1e-9 * (1.0 + lambda.norm()) {
            continue;
        }
        let l0 = lambda.re;
        // Left eigenvector: null vector of (A^T - l0 I).
        let shifted = a_hat.transpose() - l0 * Mat::identity(n, n);
        let svd = match nalgebra::linalg::SVD::try_new(shifted, true, true, f64::EPSILON, 4096) {
            Some(svd) => svd,
            None => continue,
        };
        let v_t = svd.v_t.as_ref().expect("requested");
        let (mut min_sv, mut min_idx) = (f64::INFINITY, 0);
        for (i, s) in svd.singular_values.iter().enumerate() {
            if *s < min_sv {
                min_sv = *s;
                min_idx = i;
            }
        }
        let w: Vector = v_t.row(min_idx).transpose().into_owned();
        let wtb = (w.transpose() * b_hat).transpose().into_owned();
        let push = (1.0 - l0.abs()).max(0.0);
        let budget = (push * push + wtb.norm_squared()).sqrt();
        if best.as_ref().map_or(true, |c| budget < c.budget) {
            best = Some(InfeasibilityCertificate {
                budget,
                eigenvalue: l0,
                left_eigenvector: w.iter().copied().collect(),
            });
        }
    }
    best
}

/// Exact checks a returned `(X, M, beta)` must pass before it is trusted as a
/// guaranteed-cost certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateChecks {
    pub block_lambda_max: f64,
    pub x_lambda_min: f64,
    pub beta: f64,
    /// `lambda_max(Acl^T P Acl - P + Q + K^T R K)` at `dG = 0`.
    pub nominal_descent_lambda_max: f64,
    pub nominal_spectral_radius: f64,
    pub passed: bool,
}

/// Synthesis output: gain, certificate, cost bound and diagnostics.
#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub status: SolverStatus,
    pub k: Mat,
    pub x: Mat,
    pub m: Mat,
    pub beta: f64,
    pub p: Mat,
    pub gamma: Option<f64>,
    pub rho: f64,
    pub checks: Option<CertificateChecks>,
    pub infeasibility: Option<InfeasibilityCertificate>,
    pub solver_detail: String,
}

impl SynthesisResult {
    pub fn guaranteed_cost(&self, x0: &Vector) -> f64 {
        (x0.transpose() * &self.p * x0)[(0, 0)]
    }

    pub fn is_certified(&self) -> bool {
        matches!(self.status, SolverStatus::Optimal | SolverStatus::Feasible)
    }

    fn failed(status: SolverStatus, n: usize, m: usize, rho: f64, detail: String) -> Self {
        Self {
            status,
            k: Mat::zeros(m, n),
            x: Mat::zeros(n, n),
            m: Mat::zeros(m, n),
            beta: f64::NAN,
            p: Mat::zeros(n, n),
            gamma: None,
            rho,
            checks: None,
            infeasibility: None,
            solver_detail: detail,
        }
    }
}

fn validate_certificate(
    problem: &LmiProblem,
    cost: &CostWeights,
    x: &Mat,
    m_var: &Mat,
    beta: f64,
) -> Option<(Mat, Mat, CertificateChecks)> {
    if !(beta > 0.0) || x.iter().any(|v| !v.is_finite()) || m_var.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let blk = problem.assemble_block(x, m_var, beta);
    let block_lambda_max = lambda_max_sym(&blk);
    let block_scale = blk.norm().max(1.0);
    let x_lambda_min = crate::mat::lambda_min_sym(x);
    let p = match x.clone().try_inverse() {
        Some(inv) => 0.5 * (&inv + inv.transpose()),
        None => return None,
    };
    let k = m_var * &p;
    if k.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let a_cl = &problem.a_hat - &problem.b_hat * &k;
    let descent = a_cl.transpose() * &p * &a_cl - &p + &cost.q + k.transpose() * &cost.r * &k;
    let nominal_descent_lambda_max = lambda_max_sym(&descent);
    let nominal_spectral_radius = spectral_radius(&a_cl).unwrap_or(f64::INFINITY);
    let p_scale = p.norm();
    let passed = block_lambda_max <= 1e-7 * block_scale
        && x_lambda_min >= problem.delta_x * 0.5
        && nominal_descent_lambda_max <= 1e-7 * p_scale
        && nominal_spectral_radius < 1.0;
    let checks = CertificateChecks {
        block_lambda_max,
        x_lambda_min,
        beta,
        nominal_descent_lambda_max,
        nominal_spectral_radius,
        passed,
    };
    passed.then_some((p, k, checks))
}

/// Solve the guaranteed-cost synthesis for an identified model at uncertainty
/// level `rho`, optionally minimizing the certified cost at `x0`.
pub fn synthesize(
    model: &IdentifiedModel,
    rho: f64,
    cost: &CostWeights,
    x0: Option<&Vector>,
) -> Result<SynthesisResult> {
    let n = model.state_dim();
    let m = model.input_dim();
    check_finite(&model.g_hat, "identified model")?;
    let rank = controllability_rank(&model.a_hat, &model.b_hat)?;
    if rank < n {
        return Err(Error::NotControllable { rank, order: n });
    }
    let channels = build_channels(rho, n, m)?;
    let factorization = factorize_cost(cost)?;
    let problem = assemble_lmi(model, &channels, &factorization)?;

    // A destabilizing admissible perturbation rules out any certificate
    // regardless of what a numerical solve might claim.
    if let Some(cert) = unstabilizable_budget(&model.a_hat, &model.b_hat) {
        if cert.budget <= rho {
            let mut result = SynthesisResult::failed(
                SolverStatus::Infeasible,
                n,
                m,
                rho,
                format!(
                    "admissible rank-one perturbation (budget {:.3e}) removes input authority \
                     from an eigenvalue at {:.4}",
                    cert.budget, cert.eigenvalue
                ),
            );
            result.infeasibility = Some(cert);
            return Ok(result);
        }
    }

    // The cost-minimizing solve can stall on marginal instances; the
    // max-margin fallback looks for any strictly interior certificate.
    let attempts: Vec<Objective<'_>> = match x0 {
        Some(x0) => vec![Objective::MinimizeCostAt(x0), Objective::MaximizeMargin],
        None => vec![Objective::Feasibility, Objective::MaximizeMargin],
    };
    let mut last_detail = String::new();
    let mut saw_infeasible = false;
    for objective in attempts {
        let optimizing = matches!(objective, Objective::MinimizeCostAt(_));
        let sol = problem.solve(objective)?;
        last_detail = sol.status_detail.clone();
        match sol.status {
            RawStatus::Infeasible => {
                saw_infeasible = true;
                continue;
            }
            RawStatus::Solved | RawStatus::AlmostSolved | RawStatus::Failed => {
                if let Some((p, k, checks)) =
                    validate_certificate(&problem, cost, &sol.x, &sol.m, sol.beta)
                {
                    let status = if sol.status == RawStatus::Solved && optimizing {
                        SolverStatus::Optimal
                    } else {
                        SolverStatus::Feasible
                    };
                    // The certified cost is evaluated on the returned
                    // certificate; a stalled epigraph variable only
                    // upper-bounds it.
                    let gamma = x0.map(|x0| (x0.transpose() * &p * x0)[(0, 0)]);
                    return Ok(SynthesisResult {
                        status,
                        k,
                        x: sol.x,
                        m: sol.m,
                        beta: sol.beta,
                        p,
                        gamma,
                        rho,
                        checks: Some(checks),
                        infeasibility: None,
                        solver_detail: sol.status_detail,
                    });
                }
            }
        }
    }
    let status = if saw_infeasible {
        SolverStatus::Infeasible
    } else {
        SolverStatus::NumericalFailure
    };
    Ok(SynthesisResult::failed(status, n, m, rho, last_detail))
}

/// Closed-loop matrix `A - B K` on a (true) model.
pub fn closed_loop(model: &LtiModel, k: &Mat) -> Result<Mat> {
    if k.ncols() != model.state_dim() || k.nrows() != model.input_dim() {
        return Err(Error::Shape(format!(
            "gain is {}x{}, expected {}x{}",
            k.nrows(),
            k.ncols(),
            model.input_dim(),
            model.state_dim()
        )));
    }
    Ok(&model.a - &model.b * k)
}

/// Outcome of the sampling audit of the guaranteed-cost inequality.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GccAudit {
    pub samples: usize,
    pub violations: usize,
    pub worst_lambda_max: f64,
    pub tolerance: f64,
}

/// Sample admissible `dG` from the Frobenius ball of radius `rho` (plus the
/// rank-one extremes) and check the cost-decrease inequality for each.
pub fn verify_gcc(
    result: &SynthesisResult,
    model: &IdentifiedModel,
    rho: f64,
    cost: &CostWeights,
    samples: usize,
    seed: u64,
) -> Result<GccAudit> {
    if !result.is_certified() {
        return Err(Error::InvalidInput(format!(
            "cannot audit an uncertified synthesis (status {})",
            result.status
        )));
    }
    audit_gcc(&model.a_hat, &model.b_hat, &result.k, &result.p, rho, cost, samples, seed)
}

/// Audit form taking the gain and certificate directly (for controllers
/// reloaded from disk).
#[allow(clippy::too_many_arguments)]
pub fn audit_gcc(
    a_hat: &Mat,
    b_hat: &Mat,
    k: &Mat,
    p: &Mat,
    rho: f64,
    cost: &CostWeights,
    samples: usize,
    seed: u64,
) -> Result<GccAudit> {
    let n = a_hat.nrows();
    let m = b_hat.ncols();
    let tolerance = 1e-7 * p.norm();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = (n * (n + m)) as f64;

    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0usize;
    let mut total = 0usize;
    let mut check = |dg: &Mat| {
        let da = dg.view((0, 0), (n, n)).into_owned();
        let db = dg.view((0, n), (n, m)).into_owned();
        let a_cl = a_hat + &da - (b_hat + &db) * k;
        let descent = a_cl.transpose() * p * &a_cl - p + &cost.q + k.transpose() * &cost.r * k;
        let lmax = lambda_max_sym(&descent);
        if lmax > worst {
            worst = lmax;
        }
        if lmax > tolerance {
            violations += 1;
        }
        total += 1;
    };

    // Deterministic rank-one extremes at the full radius.
    for i in 0..n {
        for j in 0..(n + m) {
            for sign in [1.0, -1.0] {
                let mut dg = Mat::zeros(n, n + m);
                dg[(i, j)] = sign * rho;
                check(&dg);
            }
        }
    }
    // Uniform draws from the Frobenius ball.
    for _ in 0..samples {
        let mut dg = Mat::zeros(n, n + m);
        for v in dg.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let norm = dg.norm();
        if norm > 0.0 {
            let radius = rho * rng.random_range(0.0..1.0f64).powf(1.0 / dim);
            dg *= radius / norm;
        }
        check(&dg);
    }
    Ok(GccAudit { samples: total, violations, worst_lambda_max: worst, tolerance })
}

/// Residual of mapping the inverse-form inequality through the congruence
/// `T = diag(I, I, I, P^{-1}, alpha^{-1} I)` onto the convexified form; small
/// residuals confirm the assembled block is the transformed inequality.
pub fn congruence_residual(problem: &LmiProblem, x: &Mat, m_var: &Mat, beta: f64) -> Result<f64> {
    let n = problem.n;
    let m = problem.m;
    let p = x
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("X is singular".into()))?;
    let p = 0.5 * (&p + p.transpose());
    let k = m_var * &p;
    let alpha = 1.0 / beta;

    let dims = [n + m, n + m, n, n, n];
    let total: usize = dims.iter().sum();
    let mut pre = Mat::zeros(total, total);
    let mut off = [0usize; 5];
    for i in 1..5 {
        off[i] = off[i - 1] + dims[i - 1];
    }
    let cz_bar = &problem.c_z - &problem.d_zu * &k;
    let cc_bar = &problem.c_c - &problem.d_cu * &k;
    let a_cl = &problem.a_hat - &problem.b_hat * &k;

    let mut set = |r: usize, c: usize, mat: &Mat, sym: bool| {
        pre.view_mut((off[r], off[c]), (mat.nrows(), mat.ncols())).copy_from(mat);
        if sym {
            let t = mat.transpose();
            pre.view_mut((off[c], off[r]), (t.nrows(), t.ncols())).copy_from(&t);
        }
    };
    set(0, 0, &(-(1.0 / alpha) * Mat::identity(n + m, n + m)), false);
    set(1, 1, &(-Mat::identity(n + m, n + m)), false);
    // P^{-1} is X by construction.
    set(2, 2, &(-x), false);
    set(3, 3, &(-&p), false);
    set(4, 4, &(-alpha * Mat::identity(n, n)), false);
    set(0, 3, &cz_bar, true);
    set(1, 3, &cc_bar, true);
    set(2, 3, &a_cl, true);
    set(2, 4, &Mat::identity(n, n), true);

    let mut t_mat = Mat::zeros(total, total);
    t_mat.view_mut((off[0], off[0]), (n + m, n + m)).copy_from(&Mat::identity(n + m, n + m));
    t_mat.view_mut((off[1], off[1]), (n + m, n + m)).copy_from(&Mat::identity(n + m, n + m));
    t_mat.view_mut((off[2], off[2]), (n, n)).copy_from(&Mat::identity(n, n));
    t_mat.view_mut((off[3], off[3]), (n, n)).copy_from(&x.clone());
    t_mat.view_mut((off[4], off[4]), (n, n)).copy_from(&((1.0 / alpha) * Mat::identity(n, n)));

    let transformed = t_mat.transpose() * pre * &t_mat;
    let direct = problem.assemble_block(x, m_var, beta);
    let scale = direct.norm().max(1.0);
    Ok((transformed - direct).norm() / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::spectral_norm;
    use approx::assert_relative_eq;

    fn identified(a: Mat, b: Mat) -> IdentifiedModel {
        let n = a.nrows();
        let m = b.ncols();
        let mut g = Mat::zeros(n, n + m);
        g.view_mut((0, 0), (n, n)).copy_from(&a);
        g.view_mut((0, n), (n, m)).copy_from(&b);
        IdentifiedModel { g_hat: g, a_hat: a, b_hat: b, gram: Mat::identity(n + m, n + m) }
    }

    #[test]
    fn channels_zero_rho() {
        let ch = build_channels(0.0, 2, 1).unwrap();
        assert_relative_eq!(ch.c_z, Mat::zeros(3, 2));
        assert_relative_eq!(ch.d_zu, Mat::zeros(3, 1));
        assert_relative_eq!(ch.b_w, Mat::identity(2, 2));
        assert!(build_channels(-1.0, 2, 1).is_err());
    }

    #[test]
    fn channels_scalar_blocks() {
        let ch = build_channels(2.0, 1, 1).unwrap();
        assert_relative_eq!(ch.c_z, Mat::from_row_slice(2, 1, &[2.0, 0.0]));
        assert_relative_eq!(ch.d_zu, Mat::from_row_slice(2, 1, &[0.0, 2.0]));
    }

    #[test]
    fn channel_reconstruction_identity() {
        // Any dG with spectral norm rho factors as Delta [rho I; block] with
        // ||Delta|| <= 1: Delta = dG / rho reproduces [dA, dB].
        let rho = 0.7;
        let ch = build_channels(rho, 2, 1).unwrap();
        let dg = Mat::from_row_slice(2, 3, &[0.3, -0.2, 0.1, 0.05, 0.4, -0.3]);
        let dg = &dg * (rho / spectral_norm(&dg));
        let delta = &dg / rho;
        // z-channel gains: [C_z, D_zu] column blocks stack to rho I_{n+m}.
        let mut stack = Mat::zeros(3, 3);
        stack.view_mut((0, 0), (3, 2)).copy_from(&ch.c_z);
        stack.view_mut((0, 2), (3, 1)).copy_from(&ch.d_zu);
        let reconstructed = &delta * stack;
        assert_relative_eq!(reconstructed, dg, epsilon = 1e-12);
        assert!(spectral_norm(&delta) <= 1.0 + 1e-12);
    }

    #[test]
    fn scalar_synthesis_beats_open_loop() {
        let model = identified(Mat::from_row_slice(1, 1, &[0.5]), Mat::from_row_slice(1, 1, &[1.0]));
        let cost = CostWeights::identity(1, 1);
        let x0 = Vector::from_vec(vec![1.0]);
        let result = synthesize(&model, 0.0, &cost, Some(&x0)).unwrap();
        assert!(result.is_certified(), "{}", result.solver_detail);
        let k = result.k[(0, 0)];
        assert!((0.5 - k).abs() < 1.0, "closed loop unstable: k = {k}");
        let p_star = (0.25 + 4.0625_f64.sqrt()) / 2.0;
        assert!(result.guaranteed_cost(&x0) >= p_star - 1e-5);
    }

    #[test]
    fn huge_rho_is_cleanly_infeasible() {
        let model = identified(Mat::from_row_slice(1, 1, &[0.5]), Mat::from_row_slice(1, 1, &[1.0]));
        let cost = CostWeights::identity(1, 1);
        let result = synthesize(&model, 1e6, &cost, None).unwrap();
        assert_eq!(result.status, SolverStatus::Infeasible);
        assert!(result.infeasibility.is_some());
    }

    #[test]
    fn unstabilizable_budget_scalar() {
        // A = 0.5, B = 1: pushing the eigenvalue to 1 costs 0.5 and killing
        // the input costs 1, so the budget is sqrt(0.25 + 1).
        let cert = unstabilizable_budget(
            &Mat::from_row_slice(1, 1, &[0.5]),
            &Mat::from_row_slice(1, 1, &[1.0]),
        )
        .unwrap();
        assert_relative_eq!(cert.budget, 1.25_f64.sqrt(), max_relative = 1e-9);
    }

    #[test]
    fn closed_loop_forms() {
        let model =
            LtiModel::new(Mat::from_row_slice(1, 1, &[0.5]), Mat::from_row_slice(1, 1, &[1.0]))
                .unwrap();
        let k0 = Mat::zeros(1, 1);
        assert_relative_eq!(closed_loop(&model, &k0).unwrap()[(0, 0)], 0.5);
        let k = Mat::from_row_slice(1, 1, &[0.5]);
        assert_relative_eq!(closed_loop(&model, &k).unwrap()[(0, 0)], 0.0);
        assert!(closed_loop(&model, &Mat::zeros(2, 1)).is_err());
    }

    #[test]
    fn verify_gcc_nominal_and_sampled() {
        let model = identified(Mat::from_row_slice(1, 1, &[0.5]), Mat::from_row_slice(1, 1, &[1.0]));
        let cost = CostWeights::identity(1, 1);
        let x0 = Vector::from_vec(vec![1.0]);
        let rho = 0.05;
        let result = synthesize(&model, rho, &cost, Some(&x0)).unwrap();
        assert!(result.is_certified(), "{}", result.solver_detail);
        let audit = verify_gcc(&result, &model, rho, &cost, 200, 0).unwrap();
        assert_eq!(audit.violations, 0, "worst = {}", audit.worst_lambda_max);
        // rho = 0 with a single sample reduces to the nominal inequality.
        let nominal = synthesize(&model, 0.0, &cost, Some(&x0)).unwrap();
        let audit0 = verify_gcc(&nominal, &model, 0.0, &cost, 1, 0).unwrap();
        assert_eq!(audit0.violations, 0);
        assert!(audit0.worst_lambda_max <= audit0.tolerance);
    }

    #[test]
    fn congruence_maps_inverse_form_onto_assembled_block() {
        let model = identified(Mat::from_row_slice(1, 1, &[0.5]), Mat::from_row_slice(1, 1, &[1.0]));
        let cost = CostWeights::identity(1, 1);
        let x0 = Vector::from_vec(vec![1.0]);
        let result = synthesize(&model, 0.02, &cost, Some(&x0)).unwrap();
        assert!(result.is_certified());
        let channels = build_channels(0.02, 1, 1).unwrap();
        let problem =
            assemble_lmi(&model, &channels, &factorize_cost(&cost).unwrap()).unwrap();
        let residual =
            congruence_residual(&problem, &result.x, &result.m, result.beta).unwrap();
        assert!(residual <= 1e-9, "residual {residual}");
    }
}
