//! Memoryless scalar quantization of scalars, vectors and snapshot batches,
//! with the worst-case error budget the bound computation consumes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::{Mat, Vector};
use crate::sysid::DataMatrices;

/// Uniform floor quantizer over `[s_min, s_max]` with `2^bits` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    pub s_min: f64,
    pub s_max: f64,
    pub bits: u32,
    pub eps_q: f64,
}

impl QuantizerSpec {
    pub fn new(s_min: f64, s_max: f64, bits: u32) -> Result<Self> {
        if !(s_min.is_finite() && s_max.is_finite()) || s_min >= s_max {
            return Err(Error::InvalidParameter(format!(
                "quantizer range [{s_min}, {s_max}] is not a proper interval"
            )));
        }
        if bits == 0 || bits > 60 {
            return Err(Error::InvalidParameter(format!("word-length {bits} out of range 1..=60")));
        }
        let eps_q = (s_max - s_min) / (1u64 << bits) as f64;
        Ok(Self { s_min, s_max, bits, eps_q })
    }

    fn level(&self, k: u64) -> f64 {
        self.s_min + self.eps_q * k as f64
    }

    /// Floor quantization: in-range inputs map to the largest grid level not
    /// above them, out-of-range inputs clamp to the boundary levels.
    pub fn quantize(&self, s: f64) -> f64 {
        if s.is_nan() || s < self.s_min {
            return self.s_min;
        }
        let k_top = ((self.s_max - self.s_min) / self.eps_q).floor() as u64;
        if s > self.s_max {
            return self.level(k_top.min(1u64 << self.bits));
        }
        let mut k = (((s - self.s_min) / self.eps_q).floor() as i64).clamp(0, 1i64 << self.bits) as u64;
        // One-step fixups keep the map exact on its own grid points despite
        // rounding in the ratio above.
        while k > 0 && self.level(k) > s {
            k -= 1;
        }
        while k < (1u64 << self.bits) && self.level(k + 1) <= s {
            k += 1;
        }
        self.level(k)
    }
}

pub fn quantize_scalar(s: f64, spec: &QuantizerSpec) -> f64 {
    spec.quantize(s)
}

/// Whether per-component error budgets take the half-cell value of the
/// resolution bound or the full one-sided cell width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    /// `e_i = eps_q / 2` per component.
    #[default]
    HalfStep,
    /// `e_i = eps_q`, covering the floor quantizer's one-sided worst case.
    FullStep,
}

/// One spec per state component and one per input component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelQuantizers {
    pub state: Vec<QuantizerSpec>,
    pub input: Vec<QuantizerSpec>,
}

impl ChannelQuantizers {
    pub fn uniform(
        bits: u32,
        state_ranges: &[(f64, f64)],
        input_ranges: &[(f64, f64)],
    ) -> Result<Self> {
        let state = state_ranges
            .iter()
            .map(|&(lo, hi)| QuantizerSpec::new(lo, hi, bits))
            .collect::<Result<Vec<_>>>()?;
        let input = input_ranges
            .iter()
            .map(|&(lo, hi)| QuantizerSpec::new(lo, hi, bits))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { state, input })
    }

    pub fn state_dim(&self) -> usize {
        self.state.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input.len()
    }
}

/// Component-wise worst-case quantization errors and their aggregates
/// `eps_x = ||e_x||`, `eps_u = ||e_u||`, `eps = sqrt(eps_x^2 + eps_u^2)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub e_x: Vec<f64>,
    pub e_u: Vec<f64>,
    pub eps_x: f64,
    pub eps_u: f64,
    pub eps: f64,
}

impl ErrorBudget {
    pub fn from_components(e_x: Vec<f64>, e_u: Vec<f64>) -> Self {
        let eps_x = l2(&e_x);
        let eps_u = l2(&e_u);
        let eps = eps_x.hypot(eps_u);
        Self { e_x, e_u, eps_x, eps_u, eps }
    }

    /// Budget derived from the quantizer resolutions alone, which is all the
    /// receiving side can know before seeing any data.
    pub fn from_resolution(channels: &ChannelQuantizers, mode: BudgetMode) -> Self {
        let scale = match mode {
            BudgetMode::HalfStep => 0.5,
            BudgetMode::FullStep => 1.0,
        };
        Self::from_components(
            channels.state.iter().map(|q| scale * q.eps_q).collect(),
            channels.input.iter().map(|q| scale * q.eps_q).collect(),
        )
    }

    /// Realized budget: component-wise suprema of the observed quantization
    /// errors over every state snapshot (`X` and `X+`) and every input.
    pub fn realized(e_xplus: &Mat, e_psi: &Mat, n: usize) -> Self {
        let m = e_psi.nrows() - n;
        let mut e_x = vec![0.0_f64; n];
        let mut e_u = vec![0.0_f64; m];
        for i in 0..n {
            for t in 0..e_psi.ncols() {
                e_x[i] = e_x[i].max(e_psi[(i, t)].abs());
            }
            for t in 0..e_xplus.ncols() {
                e_x[i] = e_x[i].max(e_xplus[(i, t)].abs());
            }
        }
        for j in 0..m {
            for t in 0..e_psi.ncols() {
                e_u[j] = e_u[j].max(e_psi[(n + j, t)].abs());
            }
        }
        Self::from_components(e_x, e_u)
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|e| e * e).sum::<f64>().sqrt()
}

/// Quantized batch together with the exact error matrices
/// `E_{X+} = X+ - X~+` and `E_Psi = Psi - Psi~`.
#[derive(Debug, Clone)]
pub struct QuantizedData {
    pub data: DataMatrices,
    pub budget: ErrorBudget,
    pub e_xplus: Mat,
    pub e_psi: Mat,
}

/// Apply the channel quantizers entrywise to a snapshot batch.
pub fn quantize_dataset(
    data: &DataMatrices,
    channels: &ChannelQuantizers,
    mode: BudgetMode,
) -> Result<QuantizedData> {
    let n = data.state_dim();
    let m = data.input_dim();
    if channels.state_dim() != n || channels.input_dim() != m {
        return Err(Error::Shape(format!(
            "channel quantizers sized {}x{} but data has {n} states / {m} inputs",
            channels.state_dim(),
            channels.input_dim()
        )));
    }
    let quant_rows = |src: &Mat, specs: &[QuantizerSpec]| -> Mat {
        let mut out = src.clone();
        for (i, spec) in specs.iter().enumerate() {
            for t in 0..src.ncols() {
                out[(i, t)] = spec.quantize(src[(i, t)]);
            }
        }
        out
    };
    let xq = quant_rows(&data.x, &channels.state);
    let xpq = quant_rows(&data.xplus, &channels.state);
    let uq = quant_rows(&data.u, &channels.input);
    let quantized = DataMatrices::new(xq, xpq, uq)?;
    let e_xplus = &data.xplus - &quantized.xplus;
    let e_psi = &data.psi - &quantized.psi;
    let budget = ErrorBudget::from_resolution(channels, mode);
    Ok(QuantizedData { data: quantized, budget, e_xplus, e_psi })
}

/// Uniformly scale every state and input entry by `c > 0`; the scaled data
/// obey the same linear recursion.
pub fn scale_dataset(data: &DataMatrices, c: f64) -> Result<DataMatrices> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("scale factor {c} must be positive")));
    }
    DataMatrices::new(c * &data.x, c * &data.xplus, c * &data.u)
}

/// Scale factor placing the largest data magnitude at `s_max - margin`.
pub fn saturation_scale(data: &DataMatrices, s_max: f64, margin: f64) -> f64 {
    let peak = data
        .psi
        .iter()
        .chain(data.xplus.iter())
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if peak <= 0.0 {
        1.0
    } else {
        ((s_max - margin) / peak).min(1.0)
    }
}

/// Derived per-component vectors for reporting.
pub fn budget_vectors(budget: &ErrorBudget) -> (Vector, Vector) {
    (Vector::from_vec(budget.e_x.clone()), Vector::from_vec(budget.e_u.clone()))
}
