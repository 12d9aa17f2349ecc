//! Deterministic identification-error bound computed from quantized data and
//! the quantizer resolutions alone, plus the robust persistent-excitation
//! margin gating it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::{pinv_times, spectral_norm, svd_extremes, Mat};
use crate::quantizer::ErrorBudget;
use crate::sysid::{DataMatrices, IdentifiedModel};

/// Everything the bound computation derives from one quantized batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBoundReport {
    pub sigma_min_psi: f64,
    pub sigma_max_psi: f64,
    pub sigma_max_xplus: f64,
    pub gamma_y: f64,
    pub gamma_w: f64,
    pub rho: f64,
    /// `(sigma_min(Psi) - sqrt(T) eps)^2`
    pub denom: f64,
    pub margin: f64,
    pub robust_pe_ok: bool,
    pub t: usize,
    /// Spectral norm of the identified `G`, as used inside `rho`.
    pub g_hat_norm_spectral: f64,
    pub budget: ErrorBudget,
}

/// Robust persistent excitation: the weakest data direction must carry more
/// signal than the aggregate quantization noise `sqrt(T) eps`.
pub fn check_robust_pe(data: &DataMatrices, budget: &ErrorBudget) -> Result<(f64, bool)> {
    let (_, sigma_min) = svd_extremes(&data.psi)?;
    let margin = sigma_min - (data.t as f64).sqrt() * budget.eps;
    Ok((margin, margin > 0.0))
}

/// Evaluate the bound `rho` on `||G - G_hat||` from quantized data only.
pub fn compute_bound(
    model: &IdentifiedModel,
    data: &DataMatrices,
    budget: &ErrorBudget,
) -> Result<ErrorBoundReport> {
    let t = data.t as f64;
    let sqrt_t = t.sqrt();
    let (sigma_max_psi, sigma_min_psi) = svd_extremes(&data.psi)?;
    let (sigma_max_xplus, _) = svd_extremes(&data.xplus)?;
    let margin = sigma_min_psi - sqrt_t * budget.eps;
    if margin <= 0.0 {
        return Err(Error::RobustPeViolated { margin });
    }
    let eps = budget.eps;
    let eps_x = budget.eps_x;
    let gamma_y = sigma_max_xplus * eps / sqrt_t + sigma_max_psi * eps_x / sqrt_t + eps_x * eps;
    let gamma_w = 2.0 * eps * sigma_max_psi / sqrt_t + eps * eps;
    let g_norm = spectral_norm(&model.g_hat);
    let denom = margin * margin;
    let rho = t * (g_norm * gamma_w + gamma_y) / denom;
    Ok(ErrorBoundReport {
        sigma_min_psi,
        sigma_max_psi,
        sigma_max_xplus,
        gamma_y,
        gamma_w,
        rho,
        denom,
        margin,
        robust_pe_ok: true,
        t: data.t,
        g_hat_norm_spectral: g_norm,
        budget: budget.clone(),
    })
}

/// Exact decomposition of the identification error into the intermediate
/// matrices `Y`, `dY`, `W`, `dW` built from the true error matrices, with the
/// realized component-wise budget. Used to audit the bound derivation against
/// ground truth; requires both the unquantized and the quantized batch.
#[derive(Debug, Clone)]
pub struct ErrorDecomposition {
    pub y: Mat,
    pub delta_y: Mat,
    pub w: Mat,
    pub delta_w: Mat,
    /// `G_uqz - G_hat`, both computed by the same least-squares route.
    pub delta_g: Mat,
    /// `|| G_uqz - (Y + dY)(W + dW)^{-1} ||`
    pub reconstruction_residual: f64,
    pub gamma_y: f64,
    pub gamma_w: f64,
    pub realized_budget: ErrorBudget,
}

pub fn decompose_error(uqz: &DataMatrices, qz: &DataMatrices) -> Result<ErrorDecomposition> {
    if uqz.psi.shape() != qz.psi.shape() || uqz.xplus.shape() != qz.xplus.shape() {
        return Err(Error::Shape("unquantized and quantized batches differ in shape".into()));
    }
    let n = uqz.state_dim();
    let t = uqz.t as f64;
    let sqrt_t = t.sqrt();
    let e_xplus = &uqz.xplus - &qz.xplus;
    let e_psi = &uqz.psi - &qz.psi;

    let y = (&qz.xplus * qz.psi.transpose()) / t;
    let delta_y = (&qz.xplus * e_psi.transpose()
        + &e_xplus * qz.psi.transpose()
        + &e_xplus * e_psi.transpose())
        / t;
    let w = (&qz.psi * qz.psi.transpose()) / t;
    let delta_w = (&qz.psi * e_psi.transpose()
        + &e_psi * qz.psi.transpose()
        + &e_psi * e_psi.transpose())
        / t;

    let g_uqz = pinv_times(&((&uqz.xplus * uqz.psi.transpose()) / t), &((&uqz.psi * uqz.psi.transpose()) / t))?;
    let g_hat = pinv_times(&y, &w).map_err(|e| match e {
        Error::RankDeficient { lambda_min, tol } => Error::RankDeficient { lambda_min, tol },
        other => other,
    })?;
    let delta_g = &g_uqz - &g_hat;

    let w_total = &w + &delta_w;
    let reconstructed = pinv_times(&(&y + &delta_y), &w_total)?;
    let reconstruction_residual = (&g_uqz - reconstructed).norm();

    let realized = ErrorBudget::realized(&e_xplus, &e_psi, n);
    let (sigma_max_psi, _) = svd_extremes(&qz.psi)?;
    let (sigma_max_xplus, _) = svd_extremes(&qz.xplus)?;
    let gamma_y = sigma_max_xplus * realized.eps / sqrt_t
        + sigma_max_psi * realized.eps_x / sqrt_t
        + realized.eps_x * realized.eps;
    let gamma_w = 2.0 * realized.eps * sigma_max_psi / sqrt_t + realized.eps * realized.eps;

    Ok(ErrorDecomposition {
        y,
        delta_y,
        w,
        delta_w,
        delta_g,
        reconstruction_residual,
        gamma_y,
        gamma_w,
        realized_budget: realized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::{quantize_dataset, BudgetMode, ChannelQuantizers};
    use crate::sysid::{build_data_matrices, identify, Trajectory};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn worked_dataset() -> DataMatrices {
        let states = Mat::from_row_slice(1, 3, &[1.0, 1.5, -0.25]);
        let inputs = Mat::from_row_slice(1, 2, &[1.0, -1.0]);
        build_data_matrices(&[Trajectory::new(states, inputs).unwrap()]).unwrap()
    }

    #[test]
    fn zero_budget_gives_zero_bound() {
        let data = worked_dataset();
        let model = identify(&data).unwrap();
        let budget = ErrorBudget::from_components(vec![0.0], vec![0.0]);
        let report = compute_bound(&model, &data, &budget).unwrap();
        assert_relative_eq!(report.gamma_y, 0.0);
        assert_relative_eq!(report.gamma_w, 0.0);
        assert_relative_eq!(report.rho, 0.0);
        let (margin, ok) = check_robust_pe(&data, &budget).unwrap();
        assert!(ok);
        assert_relative_eq!(margin, report.sigma_min_psi);
    }

    #[test]
    fn zero_row_fails_robust_pe() {
        let states = Mat::from_row_slice(1, 3, &[1.0, 1.5, -0.25]);
        let inputs = Mat::zeros(1, 2);
        let data = build_data_matrices(&[Trajectory::new(states, inputs).unwrap()]).unwrap();
        let budget = ErrorBudget::from_components(vec![0.0], vec![0.0]);
        let (margin, ok) = check_robust_pe(&data, &budget).unwrap();
        assert!(!ok || margin <= 1e-12);
    }

    #[test]
    fn bound_matches_straight_line_transcription() {
        // Independent re-derivation of the three formulas for the worked
        // one-dimensional dataset at b = 6.
        let data = worked_dataset();
        let ch = ChannelQuantizers::uniform(6, &[(-1.0, 2.0)], &[(-1.0, 1.0)]).unwrap();
        let q = quantize_dataset(&data, &ch, BudgetMode::HalfStep).unwrap();
        let model = identify(&q.data).unwrap();
        let report = compute_bound(&model, &q.data, &q.budget).unwrap();

        let t = q.data.t as f64;
        let eps_x = q.budget.e_x[0];
        let eps_u = q.budget.e_u[0];
        let eps = (eps_x * eps_x + eps_u * eps_u).sqrt();
        let (smax_psi, smin_psi) = svd_extremes(&q.data.psi).unwrap();
        let (smax_xp, _) = svd_extremes(&q.data.xplus).unwrap();
        let gamma_y = smax_xp * eps / t.sqrt() + smax_psi * eps_x / t.sqrt() + eps_x * eps;
        let gamma_w = 2.0 * eps * smax_psi / t.sqrt() + eps * eps;
        let g2 = spectral_norm(&model.g_hat);
        let rho = t * (g2 * gamma_w + gamma_y) / (smin_psi - t.sqrt() * eps).powi(2);

        assert_relative_eq!(report.gamma_y, gamma_y, epsilon = 1e-12 * gamma_y.abs().max(1.0));
        assert_relative_eq!(report.gamma_w, gamma_w, epsilon = 1e-12 * gamma_w.abs().max(1.0));
        assert_relative_eq!(report.rho, rho, epsilon = 1e-12 * rho.abs().max(1.0));
        assert!(report.rho > 0.0);
    }

    #[test]
    fn negative_margin_is_an_error() {
        let data = worked_dataset();
        let model = identify(&data).unwrap();
        let budget = ErrorBudget::from_components(vec![10.0], vec![10.0]);
        assert!(matches!(
            compute_bound(&model, &data, &budget),
            Err(Error::RobustPeViolated { .. })
        ));
    }

    #[test]
    fn decomposition_vanishes_without_quantization() {
        let data = worked_dataset();
        let d = decompose_error(&data, &data).unwrap();
        assert!(d.delta_y.norm() < 1e-14);
        assert!(d.delta_w.norm() < 1e-14);
        assert!(d.delta_g.norm() < 1e-12);
        assert!(d.reconstruction_residual < 1e-12);
    }

    #[test]
    fn decomposition_hand_checked_at_three_bits() {
        let data = worked_dataset();
        let ch = ChannelQuantizers::uniform(3, &[(-1.0, 2.0)], &[(-1.0, 1.0)]).unwrap();
        let q = quantize_dataset(&data, &ch, BudgetMode::HalfStep).unwrap();
        let d = decompose_error(&data, &q.data).unwrap();
        // Quantized snapshots: X~ = [0.875, 1.25], X~+ = [1.25, -0.25],
        // U~ = [1, -1]; E_Psi = [[0.125, 0.25], [0, 0]], E_X+ = [0.25, 0].
        let psi_q = Mat::from_row_slice(2, 2, &[0.875, 1.25, 1.0, -1.0]);
        assert_relative_eq!(q.data.psi, psi_q, epsilon = 1e-12);
        let t = 2.0;
        let y = Mat::from_row_slice(1, 2, &[1.25 * 0.875 - 0.25 * 1.25, 1.25 - (-0.25)]) / t;
        assert_relative_eq!(d.y, y, epsilon = 1e-12);
        let w = &psi_q * psi_q.transpose() / t;
        assert_relative_eq!(d.w, w, epsilon = 1e-12);
        // G restored through (Y + dY)(W + dW)^{-1} must match the unquantized
        // estimate exactly.
        assert!(d.reconstruction_residual <= 1e-9);
        assert!(d.delta_y.norm() <= d.gamma_y + 1e-12);
        assert!(d.delta_w.norm() <= d.gamma_w + 1e-12);
    }

    #[test]
    fn monte_carlo_gamma_bounds_hold() {
        // Random 3-state/2-input batches quantized at 8 bits: the realized
        // dY / dW never exceed their Gamma bounds, and the Weyl inequality
        // sigma_max(E_Psi) <= sqrt(T) eps holds with the realized budget.
        for seed in 0..25u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 3;
            let m = 2;
            let steps = 40;
            let a = Mat::from_fn(n, n, |i, j| if i == j { 0.6 } else { 0.1 * rng.random_range(-1.0..1.0) });
            let b = Mat::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
            let mut states = Mat::zeros(n, steps + 1);
            for i in 0..n {
                states[(i, 0)] = rng.random_range(-0.5..0.5);
            }
            let inputs = Mat::from_fn(m, steps, |_, _| rng.random_range(-0.5..0.5));
            for t in 0..steps {
                let next = &a * states.column(t) + &b * inputs.column(t);
                states.set_column(t + 1, &next);
            }
            let data =
                build_data_matrices(&[Trajectory::new(states, inputs).unwrap()]).unwrap();
            let ranges_x: Vec<(f64, f64)> = (0..n).map(|_| (-3.0, 3.0)).collect();
            let ranges_u: Vec<(f64, f64)> = (0..m).map(|_| (-1.0, 1.0)).collect();
            let ch = ChannelQuantizers::uniform(8, &ranges_x, &ranges_u).unwrap();
            let q = quantize_dataset(&data, &ch, BudgetMode::HalfStep).unwrap();
            let d = decompose_error(&data, &q.data).unwrap();
            assert!(d.delta_y.norm() <= d.gamma_y * (1.0 + 1e-12), "seed {seed}");
            assert!(d.delta_w.norm() <= d.gamma_w * (1.0 + 1e-12), "seed {seed}");
            let e_psi = &data.psi - &q.data.psi;
            let (smax_e, _) = svd_extremes(&e_psi).unwrap();
            assert!(
                smax_e <= (data.t as f64).sqrt() * d.realized_budget.eps * (1.0 + 1e-12),
                "seed {seed}"
            );
            let (_, smin_q) = svd_extremes(&q.data.psi).unwrap();
            let (_, smin_u) = svd_extremes(&data.psi).unwrap();
            assert!(smin_u >= smin_q - smax_e - 1e-10, "Weyl failed at seed {seed}");
        }
    }

    #[test]
    fn rho_decreases_monotonically_in_wordlength() {
        let data = worked_dataset();
        let mut last = f64::INFINITY;
        for bits in 4..=16 {
            let ch = ChannelQuantizers::uniform(bits, &[(-1.0, 2.0)], &[(-1.0, 1.0)]).unwrap();
            let q = quantize_dataset(&data, &ch, BudgetMode::HalfStep).unwrap();
            let model = identify(&q.data).unwrap();
            let report = compute_bound(&model, &q.data, &q.budget).unwrap();
            assert!(report.rho < last, "rho not decreasing at b = {bits}");
            last = report.rho;
        }
    }
}
