//! Command-line surface for the identification / bounding / synthesis
//! pipeline and the Monte-Carlo experiment harness.
//!
//! Exit codes: 0 success, 2 configuration error, 3 persistent-excitation
//! violation, 4 infeasible synthesis, 5 numerical failure, 6 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use qsid::error::Error;
use qsid::error_bound::{check_robust_pe, compute_bound, ErrorBoundReport};
use qsid::experiment::{run_experiment, write_results_csv, ExperimentConfig, Plant};
use qsid::io::{
    read_dataset_csv, read_json, write_dataset_csv, write_json, ControllerFile, CostFile,
    IdentifyReport, QuantizerConfigFile,
};
use qsid::model::LtiModel;
use qsid::quantizer::{quantize_dataset, BudgetMode, ErrorBudget};
use qsid::simulation::{
    default_ranges, finite_cost, preset, rng_for_repetition, sample_training_set,
    simulate_closed_loop, Preset, PresetName,
};
use qsid::synthesis::{audit_gcc, closed_loop, synthesize, SolverStatus};
use qsid::sysid::{build_data_matrices, identify, DataMatrices};
use qsid::Vector;

const EXIT_CONFIG: u8 = 2;
const EXIT_PE: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;
const EXIT_NUMERICAL: u8 = 5;
const EXIT_IO: u8 = 6;

#[derive(Parser)]
#[command(name = "qsid", version, about = "Quantized system identification and robust control")]
struct Cli {
    /// Output directory (defaults to $QSID_OUT_DIR, then the current dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate open-loop training data for a preset or custom model.
    Simulate(SimulateArgs),
    /// Quantize a snapshot CSV with per-component uniform quantizers.
    Quantize(QuantizeArgs),
    /// Least-squares identification from a snapshot CSV.
    Identify(IdentifyArgs),
    /// Identification-error bound from quantized data and resolutions.
    Bound(BoundArgs),
    /// Guaranteed-cost robust state-feedback synthesis.
    Synthesize(SynthesizeArgs),
    /// Sampling audit of a synthesized controller.
    Verify(VerifyArgs),
    /// Quantize -> identify -> bound -> synthesize -> verify in one shot.
    Pipeline(PipelineArgs),
    /// Full Monte-Carlo sweep over repetitions and word-lengths.
    Experiment(ExperimentArgs),
}

#[derive(Args, Clone)]
struct PlantArgs {
    /// Preset name: dc_motor or mass_spring_damper.
    #[arg(long, conflicts_with = "model")]
    preset: Option<String>,
    /// Custom model JSON path (see --x0-box, --u-box, --cost, --x0).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Per-component initial-state box "lo:hi,lo:hi,..." for custom models.
    #[arg(long)]
    x0_box: Option<String>,
    /// Per-component input box "lo:hi,..." for custom models.
    #[arg(long)]
    u_box: Option<String>,
    /// Cost weights JSON for custom models (identity by default).
    #[arg(long)]
    cost: Option<PathBuf>,
    /// Regulation initial state "v1,v2,..." for custom models.
    #[arg(long)]
    x0: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    plant: PlantArgs,
    #[arg(long, default_value_t = 150)]
    trajectories: usize,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Repetition stream to draw (matches the experiment's per-rep streams).
    #[arg(long, default_value_t = 0)]
    repetition: u64,
}

#[derive(Args)]
struct QuantizeArgs {
    /// Input snapshot CSV.
    #[arg(long)]
    data: PathBuf,
    /// Quantizer config JSON; alternatively give --bits with a plant.
    #[arg(long)]
    quantizer: Option<PathBuf>,
    #[arg(long)]
    bits: Option<u32>,
    #[command(flatten)]
    plant: PlantArgs,
    /// Error budget convention: half_step or full_step.
    #[arg(long, default_value = "half_step")]
    budget: String,
}

#[derive(Args)]
struct IdentifyArgs {
    /// Input snapshot CSV (typically the quantized one).
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct BoundArgs {
    /// Quantized snapshot CSV.
    #[arg(long)]
    data: PathBuf,
    /// Identified model JSON (re-identified from the data when omitted).
    #[arg(long)]
    model_hat: Option<PathBuf>,
    /// Quantizer config JSON the data was quantized with.
    #[arg(long)]
    quantizer: PathBuf,
}

#[derive(Args)]
struct SynthesizeArgs {
    /// Identified model JSON.
    #[arg(long)]
    model_hat: PathBuf,
    /// Uncertainty level; alternatively --bound report.
    #[arg(long)]
    rho: Option<f64>,
    /// Bound report JSON carrying rho.
    #[arg(long)]
    bound: Option<PathBuf>,
    /// Cost weights JSON (identity by default).
    #[arg(long)]
    cost: Option<PathBuf>,
    /// Initial state "v1,v2,..." enabling cost minimization.
    #[arg(long)]
    x0: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    controller: PathBuf,
    #[arg(long)]
    model_hat: PathBuf,
    #[arg(long)]
    cost: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    plant: PlantArgs,
    #[arg(long, default_value_t = 14)]
    bits: u32,
    #[arg(long, default_value_t = 150)]
    trajectories: usize,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the computed rho (diagnostics).
    #[arg(long)]
    rho_override: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    horizon: usize,
    #[arg(long, default_value_t = 1000)]
    verify_samples: usize,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    plant: PlantArgs,
    /// Load a previously recorded resolved config and replay it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 150)]
    trajectories: usize,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value_t = 50)]
    repetitions: usize,
    /// Comma-separated word-lengths.
    #[arg(long, default_value = "8,10,12,14")]
    bits: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    horizon: usize,
    #[arg(long, default_value_t = 1000)]
    verify_samples: usize,
    /// Emit SVG panels next to the CSV.
    #[arg(long, default_value_t = false)]
    plots: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_dir = cli
        .out
        .or_else(|| std::env::var_os("QSID_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    match run(cli.command, &out_dir) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => EXIT_IO,
        Error::PersistentExcitation { .. }
        | Error::RobustPeViolated { .. }
        | Error::RankDeficient { .. } => EXIT_PE,
        Error::SolverFailure(_) => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

#[derive(Serialize)]
struct StageError<'a> {
    stage: &'a str,
    error: String,
    code: u8,
}

fn run(command: Command, out: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(out)?;
    match command {
        Command::Simulate(args) => cmd_simulate(args, out),
        Command::Quantize(args) => cmd_quantize(args, out),
        Command::Identify(args) => cmd_identify(args, out),
        Command::Bound(args) => cmd_bound(args, out),
        Command::Synthesize(args) => cmd_synthesize(args, out),
        Command::Verify(args) => cmd_verify(args, out),
        Command::Pipeline(args) => cmd_pipeline(args, out),
        Command::Experiment(args) => cmd_experiment(args, out),
    }
}

fn parse_boxes(text: &str) -> Result<Vec<(f64, f64)>, Error> {
    text.split(',')
        .map(|pair| {
            let (lo, hi) = pair
                .split_once(':')
                .ok_or_else(|| Error::InvalidParameter(format!("box entry {pair:?}")))?;
            let lo: f64 = lo
                .trim()
                .parse()
                .map_err(|e| Error::InvalidParameter(format!("bad bound {lo:?}: {e}")))?;
            let hi: f64 = hi
                .trim()
                .parse()
                .map_err(|e| Error::InvalidParameter(format!("bad bound {hi:?}: {e}")))?;
            Ok((lo, hi))
        })
        .collect()
}

fn parse_vector(text: &str) -> Result<Vector, Error> {
    let vals: Result<Vec<f64>, Error> = text
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidParameter(format!("bad number {v:?}: {e}")))
        })
        .collect();
    Ok(Vector::from_vec(vals?))
}

fn parse_bits(text: &str) -> Result<Vec<u32>, Error> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<u32>()
                .map_err(|e| Error::InvalidParameter(format!("bad word-length {v:?}: {e}")))
        })
        .collect()
}

fn resolve_plant(args: &PlantArgs) -> Result<Plant, Error> {
    if let Some(name) = &args.preset {
        let p: Preset = preset(name.parse::<PresetName>()?);
        return Ok(p.into());
    }
    let path = args
        .model
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("either --preset or --model is required".into()))?;
    let model = LtiModel::load_json(path)?;
    let n = model.state_dim();
    let m = model.input_dim();
    let x0_box = match &args.x0_box {
        Some(t) => parse_boxes(t)?,
        None => vec![(-0.1, 0.1); n],
    };
    let u_box = match &args.u_box {
        Some(t) => parse_boxes(t)?,
        None => vec![(-0.1, 0.1); m],
    };
    let cost = match &args.cost {
        Some(p) => read_json::<CostFile>(p)?.weights()?,
        None => qsid::model::CostWeights::identity(n, m),
    };
    let x0 = match &args.x0 {
        Some(t) => parse_vector(t)?,
        None => Vector::from_element(n, 1.0),
    };
    if x0.len() != n || x0_box.len() != n || u_box.len() != m {
        return Err(Error::Shape("x0 / box dimensions do not match the model".into()));
    }
    Ok(Plant {
        label: path.file_stem().and_then(|s| s.to_str()).unwrap_or("custom").to_string(),
        model,
        cost,
        x0_regulation: x0,
        train_x0_box: x0_box,
        train_u_box: u_box,
    })
}

fn cmd_simulate(args: SimulateArgs, out: &Path) -> Result<(), Error> {
    let plant = resolve_plant(&args.plant)?;
    let mut rng = rng_for_repetition(args.seed, args.repetition);
    let trajs = sample_training_set(
        &plant.model,
        &plant.train_x0_box,
        &plant.train_u_box,
        args.trajectories,
        args.steps,
        &mut rng,
    )?;
    let csv_path = out.join("dataset.csv");
    write_dataset_csv(&csv_path, &trajs)?;

    #[derive(Serialize)]
    struct ResolvedSimulate<'a> {
        plant: &'a str,
        trajectories: usize,
        steps: usize,
        seed: u64,
        repetition: u64,
        n: usize,
        m: usize,
        snapshots: usize,
    }
    write_json(
        &out.join("config.simulate.json"),
        &ResolvedSimulate {
            plant: &plant.label,
            trajectories: args.trajectories,
            steps: args.steps,
            seed: args.seed,
            repetition: args.repetition,
            n: plant.model.state_dim(),
            m: plant.model.input_dim(),
            snapshots: args.trajectories * (args.steps + 1),
        },
    )?;
    println!(
        "wrote {} trajectories x {} steps to {}",
        args.trajectories,
        args.steps,
        csv_path.display()
    );
    Ok(())
}

fn parse_budget(text: &str) -> Result<BudgetMode, Error> {
    match text {
        "half_step" | "half-step" => Ok(BudgetMode::HalfStep),
        "full_step" | "full-step" => Ok(BudgetMode::FullStep),
        other => Err(Error::InvalidParameter(format!("unknown budget mode {other:?}"))),
    }
}

fn quantizer_for(args: &QuantizeArgs, data: &DataMatrices) -> Result<QuantizerConfigFile, Error> {
    if let Some(path) = &args.quantizer {
        return read_json(path);
    }
    let bits = args
        .bits
        .ok_or_else(|| Error::InvalidParameter("--bits or --quantizer is required".into()))?;
    let plant = resolve_plant(&args.plant)?;
    if plant.model.state_dim() != data.state_dim() || plant.model.input_dim() != data.input_dim() {
        return Err(Error::Shape("plant dimensions do not match dataset".into()));
    }
    let (sr, ur) =
        default_ranges(&plant.model, &plant.train_x0_box, &plant.train_u_box, 150, 100)?;
    Ok(QuantizerConfigFile {
        bits,
        state_ranges: sr.into_iter().map(|(lo, hi)| [lo, hi]).collect(),
        input_ranges: ur.into_iter().map(|(lo, hi)| [lo, hi]).collect(),
        state_bits: None,
        input_bits: None,
        budget_mode: parse_budget(&args.budget)?,
    })
}

fn cmd_quantize(args: QuantizeArgs, out: &Path) -> Result<(), Error> {
    let trajs = read_dataset_csv(&args.data)?;
    let data = build_data_matrices(&trajs)?;
    let cfg = quantizer_for(&args, &data)?;
    let channels = cfg.channels()?;
    let q = quantize_dataset(&data, &channels, cfg.budget_mode)?;
    // Re-split into per-trajectory form for the CSV writer.
    let mut quantized_trajs = Vec::with_capacity(trajs.len());
    let mut col = 0usize;
    for traj in &trajs {
        let len = traj.len();
        let mut states = qsid::Mat::zeros(data.state_dim(), len + 1);
        states
            .view_mut((0, 0), (data.state_dim(), len))
            .copy_from(&q.data.x.view((0, col), (data.state_dim(), len)));
        states.set_column(len, &q.data.xplus.column(col + len - 1));
        let inputs = q.data.u.view((0, col), (data.input_dim(), len)).into_owned();
        quantized_trajs.push(qsid::sysid::Trajectory::new(states, inputs)?);
        col += len;
    }
    write_dataset_csv(&out.join("quantized.csv"), &quantized_trajs)?;
    write_json(&out.join("quantizer.json"), &cfg)?;
    write_json(&out.join("budget.json"), &q.budget)?;
    println!("quantized {} snapshots", data.t);
    Ok(())
}

fn cmd_identify(args: IdentifyArgs, out: &Path) -> Result<(), Error> {
    let trajs = read_dataset_csv(&args.data)?;
    let data = build_data_matrices(&trajs)?;
    let ident = identify(&data)?;
    let model = LtiModel::new(ident.a_hat.clone(), ident.b_hat.clone())?;
    model.save_json(&out.join("model_hat.json"))?;
    let (smax, smin) = qsid::mat::svd_extremes(&data.psi)?;
    let residual = (&data.xplus - &ident.g_hat * &data.psi).norm();
    write_json(
        &out.join("identify_report.json"),
        &IdentifyReport {
            t: data.t,
            sigma_min_psi: smin,
            sigma_max_psi: smax,
            residual_norm: residual,
        },
    )?;
    println!("identified {}-state model from T = {} snapshots", model.state_dim(), data.t);
    Ok(())
}

fn identified_from(model: &LtiModel, gram: qsid::Mat) -> qsid::sysid::IdentifiedModel {
    let n = model.state_dim();
    let m = model.input_dim();
    let mut g = qsid::Mat::zeros(n, n + m);
    g.view_mut((0, 0), (n, n)).copy_from(&model.a);
    g.view_mut((0, n), (n, m)).copy_from(&model.b);
    qsid::sysid::IdentifiedModel { g_hat: g, a_hat: model.a.clone(), b_hat: model.b.clone(), gram }
}

fn cmd_bound(args: BoundArgs, out: &Path) -> Result<(), Error> {
    let trajs = read_dataset_csv(&args.data)?;
    let data = build_data_matrices(&trajs)?;
    let qcfg: QuantizerConfigFile = read_json(&args.quantizer)?;
    let channels = qcfg.channels()?;
    if channels.state_dim() != data.state_dim() || channels.input_dim() != data.input_dim() {
        return Err(Error::Shape("quantizer config does not match dataset dimensions".into()));
    }
    let budget = ErrorBudget::from_resolution(&channels, qcfg.budget_mode);
    let ident = match &args.model_hat {
        Some(path) => {
            let m = LtiModel::load_json(path)?;
            let gram = (&data.psi * data.psi.transpose()) / data.t as f64;
            identified_from(&m, gram)
        }
        None => identify(&data)?,
    };
    let report = compute_bound(&ident, &data, &budget)?;
    write_json(&out.join("bound_report.json"), &report)?;
    println!(
        "rho = {:.6e} (margin {:.4}, robust PE {})",
        report.rho,
        report.margin,
        if report.robust_pe_ok { "ok" } else { "violated" }
    );
    Ok(())
}

fn load_cost(
    path: &Option<PathBuf>,
    n: usize,
    m: usize,
) -> Result<qsid::model::CostWeights, Error> {
    match path {
        Some(p) => read_json::<CostFile>(p)?.weights(),
        None => Ok(qsid::model::CostWeights::identity(n, m)),
    }
}

fn cmd_synthesize(args: SynthesizeArgs, out: &Path) -> Result<(), Error> {
    let model = LtiModel::load_json(&args.model_hat)?;
    let rho = match (args.rho, &args.bound) {
        (Some(r), _) => r,
        (None, Some(path)) => read_json::<ErrorBoundReport>(path)?.rho,
        (None, None) => return Err(Error::InvalidParameter("--rho or --bound is required".into())),
    };
    let cost = load_cost(&args.cost, model.state_dim(), model.input_dim())?;
    let x0 = args.x0.as_deref().map(parse_vector).transpose()?;
    let dims = model.state_dim() + model.input_dim();
    let ident = identified_from(&model, qsid::Mat::identity(dims, dims));
    let result = synthesize(&ident, rho, &cost, x0.as_ref())?;
    write_json(&out.join("controller.json"), &ControllerFile::from_result(&result, x0.as_ref()))?;
    println!("synthesis status: {} (rho = {rho:.6e})", result.status);
    match result.status {
        SolverStatus::Optimal | SolverStatus::Feasible => Ok(()),
        SolverStatus::Infeasible => {
            std::process::exit(EXIT_INFEASIBLE as i32);
        }
        SolverStatus::NumericalFailure => Err(Error::SolverFailure(result.solver_detail)),
    }
}

fn cmd_verify(args: VerifyArgs, out: &Path) -> Result<(), Error> {
    let controller: ControllerFile = read_json(&args.controller)?;
    let model = LtiModel::load_json(&args.model_hat)?;
    let cost = load_cost(&args.cost, model.state_dim(), model.input_dim())?;
    let audit = audit_gcc(
        &model.a,
        &model.b,
        &controller.gain()?,
        &controller.certificate()?,
        controller.rho,
        &cost,
        args.samples,
        args.seed,
    )?;
    write_json(&out.join("verify_report.json"), &audit)?;
    println!(
        "audited {} perturbations: {} violations (worst lambda_max {:.3e}, tol {:.3e})",
        audit.samples, audit.violations, audit.worst_lambda_max, audit.tolerance
    );
    if audit.violations == 0 {
        Ok(())
    } else {
        Err(Error::SolverFailure(format!("{} certificate violations", audit.violations)))
    }
}

fn cmd_pipeline(args: PipelineArgs, out: &Path) -> Result<(), Error> {
    let stage = |name: &str, e: Error| -> Error {
        let payload = StageError { stage: name, error: e.to_string(), code: exit_code_for(&e) };
        let _ = write_json(&out.join("error.json"), &payload);
        eprintln!("pipeline stage {name} failed: {e}");
        e
    };

    let plant = resolve_plant(&args.plant)?;

    #[derive(Serialize)]
    struct ResolvedPipeline<'a> {
        plant: &'a str,
        bits: u32,
        trajectories: usize,
        steps: usize,
        seed: u64,
        horizon: usize,
        verify_samples: usize,
        rho_override: Option<f64>,
    }
    write_json(
        &out.join("config.pipeline.json"),
        &ResolvedPipeline {
            plant: &plant.label,
            bits: args.bits,
            trajectories: args.trajectories,
            steps: args.steps,
            seed: args.seed,
            horizon: args.horizon,
            verify_samples: args.verify_samples,
            rho_override: args.rho_override,
        },
    )?;

    let mut rng = rng_for_repetition(args.seed, 0);
    let trajs = sample_training_set(
        &plant.model,
        &plant.train_x0_box,
        &plant.train_u_box,
        args.trajectories,
        args.steps,
        &mut rng,
    )
    .map_err(|e| stage("simulate", e))?;
    write_dataset_csv(&out.join("dataset.csv"), &trajs)?;
    let data = build_data_matrices(&trajs).map_err(|e| stage("simulate", e))?;
    let (sr, ur) = default_ranges(
        &plant.model,
        &plant.train_x0_box,
        &plant.train_u_box,
        args.trajectories,
        args.steps,
    )
    .map_err(|e| stage("quantize", e))?;
    let qcfg = QuantizerConfigFile {
        bits: args.bits,
        state_ranges: sr.iter().map(|&(lo, hi)| [lo, hi]).collect(),
        input_ranges: ur.iter().map(|&(lo, hi)| [lo, hi]).collect(),
        state_bits: None,
        input_bits: None,
        budget_mode: BudgetMode::HalfStep,
    };
    write_json(&out.join("quantizer.json"), &qcfg)?;
    let channels = qcfg.channels().map_err(|e| stage("quantize", e))?;
    let q =
        quantize_dataset(&data, &channels, qcfg.budget_mode).map_err(|e| stage("quantize", e))?;

    let (margin, pe_ok) =
        check_robust_pe(&q.data, &q.budget).map_err(|e| stage("robust-pe", e))?;
    if !pe_ok {
        return Err(stage("robust-pe", Error::RobustPeViolated { margin }));
    }

    let ident = identify(&q.data).map_err(|e| stage("identify", e))?;
    LtiModel::new(ident.a_hat.clone(), ident.b_hat.clone())?
        .save_json(&out.join("model_hat.json"))?;
    let report = compute_bound(&ident, &q.data, &q.budget).map_err(|e| stage("bound", e))?;
    write_json(&out.join("bound_report.json"), &report)?;
    let rho = args.rho_override.unwrap_or(report.rho);

    let result = synthesize(&ident, rho, &plant.cost, Some(&plant.x0_regulation))
        .map_err(|e| stage("synthesize", e))?;
    write_json(
        &out.join("controller.json"),
        &ControllerFile::from_result(&result, Some(&plant.x0_regulation)),
    )?;
    if !result.is_certified() {
        let code = if result.status == SolverStatus::Infeasible {
            EXIT_INFEASIBLE
        } else {
            EXIT_NUMERICAL
        };
        let payload = StageError {
            stage: "synthesize",
            error: format!("{} ({})", result.status, result.solver_detail),
            code,
        };
        let _ = write_json(&out.join("error.json"), &payload);
        eprintln!("pipeline stage synthesize failed: {}", result.status);
        std::process::exit(code as i32);
    }

    let audit = audit_gcc(
        &ident.a_hat,
        &ident.b_hat,
        &result.k,
        &result.p,
        rho,
        &plant.cost,
        args.verify_samples,
        args.seed,
    )
    .map_err(|e| stage("verify", e))?;
    write_json(&out.join("verify_report.json"), &audit)?;
    if audit.violations > 0 {
        return Err(stage(
            "verify",
            Error::SolverFailure(format!("{} certificate violations", audit.violations)),
        ));
    }
    let (states, inputs) =
        simulate_closed_loop(&plant.model, &result.k, &plant.x0_regulation, args.horizon)
            .map_err(|e| stage("regulate", e))?;
    let regulated_cost = finite_cost(&states, &inputs, &plant.cost);
    let a_cl = closed_loop(&plant.model, &result.k)?;
    let spec_radius = qsid::mat::spectral_radius(&a_cl)?;

    #[derive(Serialize)]
    struct PipelineSummary {
        rho: f64,
        robust_pe_margin: f64,
        guaranteed_cost: f64,
        finite_cost: f64,
        spec_radius: f64,
        solver_status: SolverStatus,
        gcc_violations: usize,
    }
    write_json(
        &out.join("pipeline_summary.json"),
        &PipelineSummary {
            rho,
            robust_pe_margin: margin,
            guaranteed_cost: result.guaranteed_cost(&plant.x0_regulation),
            finite_cost: regulated_cost,
            spec_radius,
            solver_status: result.status,
            gcc_violations: audit.violations,
        },
    )?;
    println!(
        "pipeline ok: rho = {rho:.6e}, guaranteed cost = {:.4}, realized cost = {regulated_cost:.4}, \
         closed-loop spectral radius = {spec_radius:.4}",
        result.guaranteed_cost(&plant.x0_regulation)
    );
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs, out: &Path) -> Result<(), Error> {
    let plant = resolve_plant(&args.plant)?;
    let cfg = match &args.config {
        Some(path) => read_json::<ExperimentConfig>(path)?,
        None => ExperimentConfig {
            trajectories: args.trajectories,
            steps: args.steps,
            repetitions: args.repetitions,
            bit_list: parse_bits(&args.bits)?,
            seed: args.seed,
            horizon: args.horizon,
            verify_samples: args.verify_samples,
            ..Default::default()
        },
    };
    let results = run_experiment(&plant, &cfg)?;
    write_json(&out.join("config.experiment.json"), &cfg)?;
    write_results_csv(&out.join("results.csv"), &results)?;
    write_json(&out.join("summary.json"), &results.summary)?;
    if args.plots {
        qsid::plot::write_experiment_plots(out, &results)?;
    }
    let s = &results.summary;
    for (name, fit) in [
        ("rel_err_A", &s.slope_rel_err_a),
        ("rel_err_B", &s.slope_rel_err_b),
        ("rho", &s.slope_rho),
    ] {
        match fit {
            Some(f) => {
                println!("slope {name}: {:.4} (intercept {:.4}, r2 {:.5})", f.slope, f.intercept, f.r2)
            }
            None => println!("slope {name}: n/a (single word-length)"),
        }
    }
    for b in &s.per_bits {
        println!(
            "b = {:2}: rel_err_A = {:.3e}, rho = {:.3e}, certified {}/{} cells, bound violations {}",
            b.bits, b.mean_rel_err_a, b.mean_rho, b.certified_cells, s.repetitions, b.bound_violations
        );
    }
    Ok(())
}
