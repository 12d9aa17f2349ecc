//! Seeded Monte-Carlo sweep over repetitions and word-lengths: simulate,
//! quantize, identify, bound, synthesize, regulate, audit — one row per
//! `(repetition, bits)` cell.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::error_bound::{check_robust_pe, compute_bound};
use crate::mat::{Mat, Vector};
use crate::model::{CostWeights, LtiModel};
use crate::quantizer::{quantize_dataset, BudgetMode, ChannelQuantizers};
use crate::simulation::{
    default_ranges, finite_cost, rng_for_repetition, sample_training_set, simulate_closed_loop,
    Preset,
};
use crate::synthesis::{closed_loop, synthesize, verify_gcc, SolverStatus};
use crate::sysid::{build_data_matrices, identify, relative_error, DataMatrices};

/// The plant under study plus its training protocol.
#[derive(Debug, Clone)]
pub struct Plant {
    pub label: String,
    pub model: LtiModel,
    pub cost: CostWeights,
    pub x0_regulation: Vector,
    pub train_x0_box: Vec<(f64, f64)>,
    pub train_u_box: Vec<(f64, f64)>,
}

impl From<Preset> for Plant {
    fn from(p: Preset) -> Self {
        Self {
            label: p.name.to_string(),
            model: p.model,
            cost: p.cost,
            x0_regulation: p.x0_regulation,
            train_x0_box: p.train_x0_box,
            train_u_box: p.train_u_box,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub trajectories: usize,
    pub steps: usize,
    pub repetitions: usize,
    pub bit_list: Vec<u32>,
    /// Word-lengths for the cheap robust-PE margin scan.
    pub pe_scan_bits: Vec<u32>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_ranges: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_ranges: Option<Vec<[f64; 2]>>,
    /// Regulation horizon for the finite cost.
    pub horizon: usize,
    pub budget_mode: BudgetMode,
    /// Samples per cell for the guaranteed-cost audit (0 disables).
    pub verify_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            trajectories: 150,
            steps: 100,
            repetitions: 50,
            bit_list: vec![8, 10, 12, 14],
            pe_scan_bits: (1..=14).collect(),
            seed: 0,
            state_ranges: None,
            input_ranges: None,
            horizon: 2000,
            budget_mode: BudgetMode::HalfStep,
            verify_samples: 1000,
        }
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.trajectories == 0 || self.steps == 0 || self.repetitions == 0 || self.horizon == 0
        {
            return Err(Error::InvalidParameter("all counts must be positive".into()));
        }
        if self.bit_list.is_empty() {
            return Err(Error::InvalidParameter("bit list must not be empty".into()));
        }
        if self.bit_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("bit list must be sorted ascending".into()));
        }
        Ok(())
    }
}

/// One `(repetition, bits)` outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub rep: usize,
    pub bits: u32,
    pub rel_err_a: Option<f64>,
    pub rel_err_b: Option<f64>,
    pub rho: Option<f64>,
    pub delta_g_fro: Option<f64>,
    pub robust_pe_margin: Option<f64>,
    pub guaranteed_cost: Option<f64>,
    pub finite_cost: Option<f64>,
    pub spec_radius: Option<f64>,
    pub gcc_violations: Option<usize>,
    pub status: String,
}

/// Robust-PE margin for one `(repetition, bits)` pair of the scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeCell {
    pub rep: usize,
    pub bits: u32,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BitSummary {
    pub bits: u32,
    pub mean_rel_err_a: f64,
    pub std_rel_err_a: f64,
    pub mean_rel_err_b: f64,
    pub std_rel_err_b: f64,
    pub mean_rho: f64,
    pub std_rho: f64,
    /// log10 of the mean, matching curves plotted on a log axis.
    pub log10_mean_rel_err_a: f64,
    pub log10_mean_rel_err_b: f64,
    pub log10_mean_rho: f64,
    pub mean_margin: f64,
    pub mean_guaranteed_cost: Option<f64>,
    pub mean_finite_cost: Option<f64>,
    pub certified_cells: usize,
    pub infeasible_cells: usize,
    pub numerical_failures: usize,
    pub pe_violations: usize,
    pub bound_violations: usize,
    /// Largest observed `||dG||_F / rho` over robust-PE-satisfying cells.
    pub max_deltag_over_rho: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeScanSummary {
    pub bits: u32,
    pub min_margin: f64,
    pub all_positive: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub label: String,
    pub repetitions: usize,
    pub trajectories: usize,
    pub steps: usize,
    pub seed: u64,
    pub baseline_rel_err_a: f64,
    pub baseline_rel_err_b: f64,
    pub resolved_state_ranges: Vec<[f64; 2]>,
    pub resolved_input_ranges: Vec<[f64; 2]>,
    pub per_bits: Vec<BitSummary>,
    pub slope_rel_err_a: Option<SlopeFit>,
    pub slope_rel_err_b: Option<SlopeFit>,
    pub slope_rho: Option<SlopeFit>,
    pub pe_scan: Vec<PeScanSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub cells: Vec<CellResult>,
    pub pe_cells: Vec<PeCell>,
    pub summary: ExperimentSummary,
}

fn channels_for(
    bits: u32,
    state_ranges: &[[f64; 2]],
    input_ranges: &[[f64; 2]],
) -> Result<ChannelQuantizers> {
    let sr: Vec<(f64, f64)> = state_ranges.iter().map(|r| (r[0], r[1])).collect();
    let ur: Vec<(f64, f64)> = input_ranges.iter().map(|r| (r[0], r[1])).collect();
    ChannelQuantizers::uniform(bits, &sr, &ur)
}

fn run_cell(
    plant: &Plant,
    cfg: &ExperimentConfig,
    data: &DataMatrices,
    rep: usize,
    bits: u32,
    state_ranges: &[[f64; 2]],
    input_ranges: &[[f64; 2]],
) -> CellResult {
    let mut cell = CellResult {
        rep,
        bits,
        rel_err_a: None,
        rel_err_b: None,
        rho: None,
        delta_g_fro: None,
        robust_pe_margin: None,
        guaranteed_cost: None,
        finite_cost: None,
        spec_radius: None,
        gcc_violations: None,
        status: String::new(),
    };
    let fail = |cell: &mut CellResult, stage: &str, e: &Error| {
        cell.status = format!("error:{stage}:{e}");
    };

    let channels = match channels_for(bits, state_ranges, input_ranges) {
        Ok(c) => c,
        Err(e) => {
            fail(&mut cell, "quantizer", &e);
            return cell;
        }
    };
    let q = match quantize_dataset(data, &channels, cfg.budget_mode) {
        Ok(q) => q,
        Err(e) => {
            fail(&mut cell, "quantize", &e);
            return cell;
        }
    };
    let (margin, pe_ok) = match check_robust_pe(&q.data, &q.budget) {
        Ok(v) => v,
        Err(e) => {
            fail(&mut cell, "robust-pe", &e);
            return cell;
        }
    };
    cell.robust_pe_margin = Some(margin);

    let ident = match identify(&q.data) {
        Ok(m) => m,
        Err(e) => {
            fail(&mut cell, "identify", &e);
            return cell;
        }
    };
    cell.rel_err_a = relative_error(&plant.model.a, &ident.a_hat).ok();
    cell.rel_err_b = relative_error(&plant.model.b, &ident.b_hat).ok();
    let n = plant.model.state_dim();
    let m = plant.model.input_dim();
    let mut g_true = Mat::zeros(n, n + m);
    g_true.view_mut((0, 0), (n, n)).copy_from(&plant.model.a);
    g_true.view_mut((0, n), (n, m)).copy_from(&plant.model.b);
    cell.delta_g_fro = Some((&g_true - &ident.g_hat).norm());

    if !pe_ok {
        cell.status = "pe-violation".into();
        return cell;
    }
    let report = match compute_bound(&ident, &q.data, &q.budget) {
        Ok(r) => r,
        Err(Error::RobustPeViolated { .. }) => {
            cell.status = "pe-violation".into();
            return cell;
        }
        Err(e) => {
            fail(&mut cell, "bound", &e);
            return cell;
        }
    };
    cell.rho = Some(report.rho);

    let synth = match synthesize(&ident, report.rho, &plant.cost, Some(&plant.x0_regulation)) {
        Ok(s) => s,
        Err(e) => {
            fail(&mut cell, "synthesize", &e);
            return cell;
        }
    };
    cell.status = synth.status.to_string();
    if !synth.is_certified() {
        return cell;
    }
    cell.guaranteed_cost = Some(synth.guaranteed_cost(&plant.x0_regulation));
    if let Ok(a_cl) = closed_loop(&plant.model, &synth.k) {
        cell.spec_radius = crate::mat::spectral_radius(&a_cl).ok();
    }
    match simulate_closed_loop(&plant.model, &synth.k, &plant.x0_regulation, cfg.horizon) {
        Ok((states, inputs)) => {
            cell.finite_cost = Some(finite_cost(&states, &inputs, &plant.cost));
        }
        Err(e) => {
            fail(&mut cell, "regulate", &e);
            return cell;
        }
    }
    if cfg.verify_samples > 0 {
        let audit_seed = cfg.seed ^ ((rep as u64) << 24) ^ (bits as u64);
        match verify_gcc(&synth, &ident, report.rho, &plant.cost, cfg.verify_samples, audit_seed) {
            Ok(audit) => cell.gcc_violations = Some(audit.violations),
            Err(e) => {
                fail(&mut cell, "verify", &e);
                return cell;
            }
        }
    }
    cell
}

pub fn run_experiment(plant: &Plant, cfg: &ExperimentConfig) -> Result<ExperimentResults> {
    cfg.validate()?;
    let (state_ranges, input_ranges) = match (&cfg.state_ranges, &cfg.input_ranges) {
        (Some(s), Some(u)) => (s.clone(), u.clone()),
        _ => {
            let (s, u) = default_ranges(
                &plant.model,
                &plant.train_x0_box,
                &plant.train_u_box,
                cfg.trajectories,
                cfg.steps,
            )?;
            let boxed = |v: Vec<(f64, f64)>| v.into_iter().map(|(lo, hi)| [lo, hi]).collect();
            (
                cfg.state_ranges.clone().unwrap_or_else(|| boxed(s)),
                cfg.input_ranges.clone().unwrap_or_else(|| boxed(u)),
            )
        }
    };

    // One training set per repetition, shared across word-lengths.
    let datasets: Vec<DataMatrices> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng_for_repetition(cfg.seed, rep as u64);
            let trajs = sample_training_set(
                &plant.model,
                &plant.train_x0_box,
                &plant.train_u_box,
                cfg.trajectories,
                cfg.steps,
                &mut rng,
            )?;
            build_data_matrices(&trajs)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cells: Vec<CellResult> = (0..cfg.repetitions)
        .into_par_iter()
        .flat_map_iter(|rep| cfg.bit_list.iter().map(move |&bits| (rep, bits)))
        .map(|(rep, bits)| {
            run_cell(plant, cfg, &datasets[rep], rep, bits, &state_ranges, &input_ranges)
        })
        .collect();
    cells.sort_by_key(|c| (c.rep, c.bits));

    let mut pe_cells: Vec<PeCell> = (0..cfg.repetitions)
        .into_par_iter()
        .flat_map_iter(|rep| cfg.pe_scan_bits.iter().map(move |&bits| (rep, bits)))
        .map(|(rep, bits)| -> Result<PeCell> {
            let channels = channels_for(bits, &state_ranges, &input_ranges)?;
            let q = quantize_dataset(&datasets[rep], &channels, cfg.budget_mode)?;
            let (margin, _) = check_robust_pe(&q.data, &q.budget)?;
            Ok(PeCell { rep, bits, margin })
        })
        .collect::<Result<Vec<_>>>()?;
    pe_cells.sort_by_key(|c| (c.rep, c.bits));

    let baseline = identify(&datasets[0])?;
    let baseline_rel_err_a = relative_error(&plant.model.a, &baseline.a_hat)?;
    let baseline_rel_err_b = relative_error(&plant.model.b, &baseline.b_hat)?;

    let summary = summarize(
        plant,
        cfg,
        &cells,
        &pe_cells,
        baseline_rel_err_a,
        baseline_rel_err_b,
        state_ranges,
        input_ranges,
    )?;
    Ok(ExperimentResults { cells, pe_cells, summary })
}

#[allow(clippy::too_many_arguments)]
fn summarize(
    plant: &Plant,
    cfg: &ExperimentConfig,
    cells: &[CellResult],
    pe_cells: &[PeCell],
    baseline_rel_err_a: f64,
    baseline_rel_err_b: f64,
    resolved_state_ranges: Vec<[f64; 2]>,
    resolved_input_ranges: Vec<[f64; 2]>,
) -> Result<ExperimentSummary> {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let std = |v: &[f64]| {
        if v.len() < 2 {
            return 0.0;
        }
        let mu = mean(v);
        (v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };

    let mut per_bits = Vec::new();
    for &bits in &cfg.bit_list {
        let group: Vec<&CellResult> = cells.iter().filter(|c| c.bits == bits).collect();
        let collect = |f: &dyn Fn(&CellResult) -> Option<f64>| -> Vec<f64> {
            group.iter().filter_map(|c| f(c)).collect()
        };
        let rel_a = collect(&|c| c.rel_err_a);
        let rel_b = collect(&|c| c.rel_err_b);
        let rho = collect(&|c| c.rho);
        let margins = collect(&|c| c.robust_pe_margin);
        let gcost = collect(&|c| c.guaranteed_cost);
        let fcost = collect(&|c| c.finite_cost);

        let mut bound_violations = 0usize;
        let mut max_ratio = 0.0_f64;
        for c in &group {
            if let (Some(dg), Some(rho)) = (c.delta_g_fro, c.rho) {
                let ratio = dg / rho;
                max_ratio = max_ratio.max(ratio);
                if dg > rho {
                    bound_violations += 1;
                }
            }
        }
        per_bits.push(BitSummary {
            bits,
            mean_rel_err_a: mean(&rel_a),
            std_rel_err_a: std(&rel_a),
            mean_rel_err_b: mean(&rel_b),
            std_rel_err_b: std(&rel_b),
            mean_rho: mean(&rho),
            std_rho: std(&rho),
            log10_mean_rel_err_a: mean(&rel_a).log10(),
            log10_mean_rel_err_b: mean(&rel_b).log10(),
            log10_mean_rho: mean(&rho).log10(),
            mean_margin: mean(&margins),
            mean_guaranteed_cost: (!gcost.is_empty()).then(|| mean(&gcost)),
            mean_finite_cost: (!fcost.is_empty()).then(|| mean(&fcost)),
            certified_cells: group
                .iter()
                .filter(|c| {
                    c.status == SolverStatus::Optimal.to_string()
                        || c.status == SolverStatus::Feasible.to_string()
                })
                .count(),
            infeasible_cells: group.iter().filter(|c| c.status == "infeasible").count(),
            numerical_failures: group.iter().filter(|c| c.status == "numerical-failure").count(),
            pe_violations: group.iter().filter(|c| c.status == "pe-violation").count(),
            bound_violations,
            max_deltag_over_rho: max_ratio,
        });
    }

    let xs: Vec<f64> = cfg.bit_list.iter().map(|&b| b as f64).collect();
    let fit = |ys: Vec<f64>| -> Option<SlopeFit> {
        let (slope, intercept, r2) = crate::simulation::fit_slope(&xs, &ys).ok()?;
        Some(SlopeFit { slope, intercept, r2 })
    };
    let slope_rel_err_a = fit(per_bits.iter().map(|b| b.log10_mean_rel_err_a).collect());
    let slope_rel_err_b = fit(per_bits.iter().map(|b| b.log10_mean_rel_err_b).collect());
    let slope_rho = fit(per_bits.iter().map(|b| b.log10_mean_rho).collect());

    let mut pe_scan = Vec::new();
    for &bits in &cfg.pe_scan_bits {
        let margins: Vec<f64> =
            pe_cells.iter().filter(|c| c.bits == bits).map(|c| c.margin).collect();
        let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
        pe_scan.push(PeScanSummary { bits, min_margin, all_positive: min_margin > 0.0 });
    }

    Ok(ExperimentSummary {
        label: plant.label.clone(),
        repetitions: cfg.repetitions,
        trajectories: cfg.trajectories,
        steps: cfg.steps,
        seed: cfg.seed,
        baseline_rel_err_a,
        baseline_rel_err_b,
        resolved_state_ranges,
        resolved_input_ranges,
        per_bits,
        slope_rel_err_a,
        slope_rel_err_b,
        slope_rho,
        pe_scan,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Cell table: one row per `(rep, bits)`.
pub fn write_results_csv(path: &Path, results: &ExperimentResults) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "rep",
        "bits",
        "rel_err_A",
        "rel_err_B",
        "rho",
        "deltaG_fro",
        "robust_pe_margin",
        "guaranteed_cost",
        "finite_cost",
        "spec_radius",
        "status",
    ])?;
    for c in &results.cells {
        w.write_record([
            c.rep.to_string(),
            c.bits.to_string(),
            fmt_opt(c.rel_err_a),
            fmt_opt(c.rel_err_b),
            fmt_opt(c.rho),
            fmt_opt(c.delta_g_fro),
            fmt_opt(c.robust_pe_margin),
            fmt_opt(c.guaranteed_cost),
            fmt_opt(c.finite_cost),
            fmt_opt(c.spec_radius),
            c.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{preset, PresetName};

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            trajectories: 20,
            steps: 40,
            repetitions: 2,
            bit_list: vec![10, 12],
            pe_scan_bits: vec![4, 10],
            seed: 0,
            horizon: 300,
            verify_samples: 50,
            ..Default::default()
        }
    }

    #[test]
    fn experiment_is_deterministic() {
        let plant: Plant = preset(PresetName::MassSpringDamper).into();
        let cfg = tiny_config();
        let a = run_experiment(&plant, &cfg).unwrap();
        let b = run_experiment(&plant, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn adding_repetitions_preserves_existing_cells() {
        let plant: Plant = preset(PresetName::MassSpringDamper).into();
        let cfg = tiny_config();
        let mut more = cfg.clone();
        more.repetitions = 3;
        let small = run_experiment(&plant, &cfg).unwrap();
        let big = run_experiment(&plant, &more).unwrap();
        for cell in &small.cells {
            let twin = big
                .cells
                .iter()
                .find(|c| c.rep == cell.rep && c.bits == cell.bits)
                .expect("cell present");
            assert_eq!(serde_json::to_string(twin).unwrap(), serde_json::to_string(cell).unwrap());
        }
    }

    #[test]
    fn lossless_wordlength_recovers_model() {
        let plant: Plant = preset(PresetName::MassSpringDamper).into();
        let cfg = ExperimentConfig {
            trajectories: 20,
            steps: 40,
            repetitions: 1,
            bit_list: vec![52],
            pe_scan_bits: vec![52],
            seed: 0,
            horizon: 300,
            verify_samples: 10,
            ..Default::default()
        };
        let out = run_experiment(&plant, &cfg).unwrap();
        let cell = &out.cells[0];
        assert!(cell.rel_err_a.unwrap() <= 1e-8, "rel_err_a = {:?}", cell.rel_err_a);
        assert!(cell.rel_err_b.unwrap() <= 1e-8);
        assert!(cell.rho.unwrap() < 1e-10);
        assert_eq!(cell.status, "optimal");
        assert!(cell.finite_cost.unwrap() <= cell.guaranteed_cost.unwrap() + 1e-6);
    }

    #[test]
    fn rejects_unsorted_bits() {
        let plant: Plant = preset(PresetName::MassSpringDamper).into();
        let mut cfg = tiny_config();
        cfg.bit_list = vec![12, 10];
        assert!(run_experiment(&plant, &cfg).is_err());
    }
}
