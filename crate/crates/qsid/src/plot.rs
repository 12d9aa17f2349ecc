//! Minimal static SVG line plots for the experiment reports.

use std::path::Path;

use crate::error::Result;
use crate::experiment::ExperimentResults;

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const ML: f64 = 70.0;
const MR: f64 = 20.0;
const MT: f64 = 40.0;
const MB: f64 = 50.0;

/// Render series as polylines with markers; `log_y` plots log10 of the values
/// and labels ticks with powers of ten.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series], log_y: bool) -> String {
    let tx = |v: f64| v;
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in series {
        for &(x, y) in &s.points {
            if log_y && y <= 0.0 {
                continue;
            }
            xs.push(tx(x));
            ys.push(ty(y));
        }
    }
    let (x_lo, x_hi) = padded_bounds(&xs, 0.05);
    let (y_lo, y_hi) = padded_bounds(&ys, 0.08);
    let sx = |v: f64| ML + (v - x_lo) / (x_hi - x_lo) * (W - ML - MR);
    let sy = |v: f64| H - MB - (v - y_lo) / (y_hi - y_lo) * (H - MT - MB);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n<text x=\"{}\" y=\"22\" \
         text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        W / 2.0,
        escape(title)
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n\
         <line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{0}\" stroke=\"black\"/>\n",
        H - MB,
        W - MR
    ));
    for k in 0..=4 {
        let vx = x_lo + (x_hi - x_lo) * k as f64 / 4.0;
        let vy = y_lo + (y_hi - y_lo) * k as f64 / 4.0;
        let px = sx(vx);
        let py = sy(vy);
        svg.push_str(&format!(
            "<line x1=\"{px}\" y1=\"{0}\" x2=\"{px}\" y2=\"{1}\" stroke=\"black\"/>\n\
             <text x=\"{px}\" y=\"{2}\" text-anchor=\"middle\">{3}</text>\n",
            H - MB,
            H - MB + 5.0,
            H - MB + 20.0,
            tick_label(vx, false)
        ));
        svg.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{py}\" x2=\"{ML}\" y2=\"{py}\" stroke=\"black\"/>\n\
             <text x=\"{1}\" y=\"{2}\" text-anchor=\"end\">{3}</text>\n",
            ML - 5.0,
            ML - 8.0,
            py + 4.0,
            tick_label(vy, log_y)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        (ML + W - MR) / 2.0,
        H - 12.0,
        escape(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>\n",
        (MT + H - MB) / 2.0,
        escape(y_label)
    ));
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|&&(_, y)| !log_y || y > 0.0)
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(tx(x)), sy(ty(y))))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\" points=\"{}\"/>\n",
            s.color,
            pts.join(" ")
        ));
        for p in &pts {
            let mut it = p.split(',');
            let (px, py) = (it.next().unwrap(), it.next().unwrap());
            svg.push_str(&format!(
                "<circle cx=\"{px}\" cy=\"{py}\" r=\"3\" fill=\"{}\"/>\n",
                s.color
            ));
        }
        svg.push_str(&format!(
            "<rect x=\"{0}\" y=\"{1}\" width=\"12\" height=\"12\" fill=\"{2}\"/>\n\
             <text x=\"{3}\" y=\"{4}\">{5}</text>\n",
            W - MR - 160.0,
            MT + 8.0 + 18.0 * i as f64,
            s.color,
            W - MR - 143.0,
            MT + 18.0 + 18.0 * i as f64,
            escape(&s.label)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn padded_bounds(values: &[f64], pad: f64) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    let span = (hi - lo).max(1e-12);
    (lo - pad * span, hi + pad * span)
}

fn tick_label(v: f64, log_scale: bool) -> String {
    if log_scale {
        format!("1e{v:.1}")
    } else if v.abs() >= 1000.0 || (v != 0.0 && v.abs() < 0.01) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// The four panels of the experiment report: relative errors, bound, costs.
pub fn write_experiment_plots(dir: &Path, results: &ExperimentResults) -> Result<Vec<String>> {
    let s = &results.summary;
    let bits: Vec<f64> = s.per_bits.iter().map(|b| b.bits as f64).collect();
    let mut written = Vec::new();
    let mut emit = |name: &str, svg: String| -> Result<()> {
        std::fs::write(dir.join(name), svg)?;
        written.push(name.to_string());
        Ok(())
    };

    let single = |label: &str, ys: Vec<f64>| Series {
        label: label.to_string(),
        points: bits.iter().copied().zip(ys).collect(),
        color: "#1f77b4",
    };
    emit(
        "rel_err_a.svg",
        line_plot(
            &format!("{}: relative error in A", s.label),
            "word-length b",
            "mean relative error",
            &[single("rel err A", s.per_bits.iter().map(|b| b.mean_rel_err_a).collect())],
            true,
        ),
    )?;
    emit(
        "rel_err_b.svg",
        line_plot(
            &format!("{}: relative error in B", s.label),
            "word-length b",
            "mean relative error",
            &[single("rel err B", s.per_bits.iter().map(|b| b.mean_rel_err_b).collect())],
            true,
        ),
    )?;
    emit(
        "rho.svg",
        line_plot(
            &format!("{}: uncertainty bound", s.label),
            "word-length b",
            "mean rho",
            &[single("rho", s.per_bits.iter().map(|b| b.mean_rho).collect())],
            true,
        ),
    )?;
    let costs = [
        Series {
            label: "guaranteed".into(),
            points: bits
                .iter()
                .copied()
                .zip(s.per_bits.iter().map(|b| b.mean_guaranteed_cost.unwrap_or(f64::NAN)))
                .filter(|(_, y)| y.is_finite())
                .collect(),
            color: "#d62728",
        },
        Series {
            label: "finite-horizon".into(),
            points: bits
                .iter()
                .copied()
                .zip(s.per_bits.iter().map(|b| b.mean_finite_cost.unwrap_or(f64::NAN)))
                .filter(|(_, y)| y.is_finite())
                .collect(),
            color: "#2ca02c",
        },
    ];
    emit(
        "costs.svg",
        line_plot(
            &format!("{}: certified vs realized cost", s.label),
            "word-length b",
            "cost",
            &costs,
            false,
        ),
    )?;
    Ok(written)
}
