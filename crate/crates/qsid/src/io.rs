//! File formats exchanged between pipeline stages: snapshot CSV, quantizer
//! config JSON, identification report JSON and controller JSON.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::{mat_from_row_major, row_major, Mat, Vector};
use crate::quantizer::{BudgetMode, ChannelQuantizers, QuantizerSpec};
use crate::synthesis::{SolverStatus, SynthesisResult};
use crate::sysid::Trajectory;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn fmt_f64(v: f64) -> String {
    // `Display` for f64 is the shortest representation that round-trips.
    format!("{v}")
}

/// Snapshot CSV: header `t,x1..xn,u1..um`, one row per snapshot; each
/// trajectory ends with a row whose input fields are empty (the terminal
/// state).
pub fn write_dataset_csv(path: &Path, trajectories: &[Trajectory]) -> Result<()> {
    if trajectories.is_empty() {
        return Err(Error::InvalidInput("no trajectories to write".into()));
    }
    let n = trajectories[0].states.nrows();
    let m = trajectories[0].inputs.nrows();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=m).map(|j| format!("u{j}")));
    w.write_record(&header)?;
    for traj in trajectories {
        let steps = traj.inputs.ncols();
        for t in 0..=steps {
            let mut record = vec![t.to_string()];
            for i in 0..n {
                record.push(fmt_f64(traj.states[(i, t)]));
            }
            for j in 0..m {
                if t < steps {
                    record.push(fmt_f64(traj.inputs[(j, t)]));
                } else {
                    record.push(String::new());
                }
            }
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv(path: &Path) -> Result<Vec<Trajectory>> {
    let mut r = csv::ReaderBuilder::new().flexible(false).from_path(path)?;
    let header = r.headers()?.clone();
    let n = header.iter().filter(|h| h.starts_with('x')).count();
    let m = header.iter().filter(|h| h.starts_with('u')).count();
    if n == 0 || header.len() != 1 + n + m {
        return Err(Error::Malformed(format!("unexpected header {header:?}")));
    }
    let mut trajectories = Vec::new();
    let mut states: Vec<f64> = Vec::new();
    let mut inputs: Vec<f64> = Vec::new();
    let mut snapshots = 0usize;
    for record in r.records() {
        let record = record?;
        if record.len() != 1 + n + m {
            return Err(Error::Malformed(format!("row with {} fields", record.len())));
        }
        for i in 0..n {
            states.push(parse_field(record.get(1 + i))?);
        }
        snapshots += 1;
        let input_fields: Vec<&str> = (0..m).map(|j| record.get(1 + n + j).unwrap_or("")).collect();
        if m > 0 && input_fields.iter().all(|f| f.is_empty()) {
            finish_trajectory(&mut trajectories, &mut states, &mut inputs, &mut snapshots, n, m)?;
        } else {
            for f in input_fields {
                inputs.push(
                    f.parse::<f64>()
                        .map_err(|e| Error::Malformed(format!("bad float {f:?}: {e}")))?,
                );
            }
        }
    }
    if snapshots > 0 {
        finish_trajectory(&mut trajectories, &mut states, &mut inputs, &mut snapshots, n, m)?;
    }
    if trajectories.is_empty() {
        return Err(Error::Malformed("no snapshot rows".into()));
    }
    Ok(trajectories)
}

fn parse_field(field: Option<&str>) -> Result<f64> {
    let f = field.ok_or_else(|| Error::Malformed("missing field".into()))?;
    f.parse::<f64>().map_err(|e| Error::Malformed(format!("bad float {f:?}: {e}")))
}

fn finish_trajectory(
    trajectories: &mut Vec<Trajectory>,
    states: &mut Vec<f64>,
    inputs: &mut Vec<f64>,
    snapshots: &mut usize,
    n: usize,
    m: usize,
) -> Result<()> {
    let cols = *snapshots;
    if cols < 2 {
        return Err(Error::Malformed("trajectory with fewer than two snapshots".into()));
    }
    let state_mat = Mat::from_row_slice(n, cols, &transpose_flat(states, cols, n));
    let input_mat = if m == 0 {
        Mat::zeros(0, cols - 1)
    } else {
        Mat::from_row_slice(m, cols - 1, &transpose_flat(inputs, cols - 1, m))
    };
    trajectories.push(Trajectory::new(state_mat, input_mat)?);
    states.clear();
    inputs.clear();
    *snapshots = 0;
    Ok(())
}

/// Rows were accumulated snapshot-major; reorder to component-major.
fn transpose_flat(data: &[f64], cols: usize, rows: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for t in 0..cols {
        for i in 0..rows {
            out[i * cols + t] = data[t * rows + i];
        }
    }
    out
}

/// Quantizer config JSON: shared word-length plus per-component ranges, with
/// optional per-component word-length overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantizerConfigFile {
    pub bits: u32,
    pub state_ranges: Vec<[f64; 2]>,
    pub input_ranges: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_bits: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_bits: Option<Vec<u32>>,
    #[serde(default)]
    pub budget_mode: BudgetMode,
}

impl QuantizerConfigFile {
    pub fn channels(&self) -> Result<ChannelQuantizers> {
        let spec_for = |ranges: &[[f64; 2]], bits: &Option<Vec<u32>>| -> Result<Vec<QuantizerSpec>> {
            if let Some(per) = bits {
                if per.len() != ranges.len() {
                    return Err(Error::Shape("per-component bits length mismatch".into()));
                }
                ranges
                    .iter()
                    .zip(per)
                    .map(|(r, &b)| QuantizerSpec::new(r[0], r[1], b))
                    .collect()
            } else {
                ranges.iter().map(|r| QuantizerSpec::new(r[0], r[1], self.bits)).collect()
            }
        };
        Ok(ChannelQuantizers {
            state: spec_for(&self.state_ranges, &self.state_bits)?,
            input: spec_for(&self.input_ranges, &self.input_bits)?,
        })
    }
}

/// Cost weights JSON: `{"n": .., "m": .., "Q": row-major, "R": row-major}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostFile {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
    #[serde(rename = "R")]
    pub r: Vec<f64>,
}

impl CostFile {
    pub fn weights(&self) -> Result<crate::model::CostWeights> {
        crate::model::CostWeights::new(
            mat_from_row_major(self.n, self.n, &self.q)?,
            mat_from_row_major(self.m, self.m, &self.r)?,
        )
    }
}

/// Sidecar emitted next to an identified model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentifyReport {
    #[serde(rename = "T")]
    pub t: usize,
    pub sigma_min_psi: f64,
    pub sigma_max_psi: f64,
    pub residual_norm: f64,
}

/// Controller JSON with the gain, certificate and certified cost.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControllerFile {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "K")]
    pub k: Vec<f64>,
    #[serde(rename = "P")]
    pub p: Vec<f64>,
    pub beta: f64,
    pub rho: f64,
    pub guaranteed_cost_x0: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub solver_status: SolverStatus,
}

impl ControllerFile {
    pub fn from_result(result: &SynthesisResult, x0: Option<&Vector>) -> Self {
        Self {
            n: result.p.nrows(),
            m: result.k.nrows(),
            k: row_major(&result.k),
            p: row_major(&result.p),
            beta: result.beta,
            rho: result.rho,
            guaranteed_cost_x0: x0.map(|x0| result.guaranteed_cost(x0)),
            x0: x0.map(|x0| x0.iter().copied().collect()),
            solver_status: result.status,
        }
    }

    pub fn gain(&self) -> Result<Mat> {
        mat_from_row_major(self.m, self.n, &self.k)
    }

    pub fn certificate(&self) -> Result<Mat> {
        mat_from_row_major(self.n, self.n, &self.p)
    }
}
