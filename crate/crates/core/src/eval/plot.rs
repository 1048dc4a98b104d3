//! Static SVG line plots.

use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::report::{EvalReport, CURVES_DIR};
use crate::error::{Error, Result};
use crate::train::read_loss_log;

const COLORS: [RGBColor; 4] = [BLACK, RED, BLUE, GREEN];

fn plot_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Invalid(format!("{}: plotting failed: {e}", path.display()))
}

/// Draw each named series against its index.
pub fn plot_curves(path: &Path, series: &[(&str, &[f64])]) -> Result<()> {
    let len = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0).max(2);
    let finite = series.iter().flat_map(|(_, v)| v.iter().copied()).filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo < hi { (lo, hi) } else if lo.is_finite() { (lo - 1.0, lo + 1.0) } else { (0.0, 1.0) };
    let pad = 0.05 * (hi - lo);

    let root = SVGBackend::new(path, (640, 360)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(16)
        .x_label_area_size(30)
        .y_label_area_size(50)
        .build_cartesian_2d(0f64..(len - 1) as f64, (lo - pad)..(hi + pad))
        .map_err(|e| plot_err(path, e))?;
    chart.configure_mesh().disable_mesh().draw().map_err(|e| plot_err(path, e))?;
    for (k, (name, values)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        chart
            .draw_series(LineSeries::new(
                values.iter().enumerate().filter(|(_, v)| v.is_finite()).map(|(i, &v)| (i as f64, v)),
                &color,
            ))
            .map_err(|e| plot_err(path, e))?
            .label(*name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE)
        .draw()
        .map_err(|e| plot_err(path, e))?;
    root.present().map_err(|e| plot_err(path, e))
}

/// Predicted and ground-truth deformation curves of every vision→touch
/// sequence, one file each under `dir/curves/`.
pub fn plot_report(report: &EvalReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let out = dir.join(CURVES_DIR);
    let mut written = Vec::new();
    for s in report.sequences.iter().filter(|s| !s.gt_curve.is_empty()) {
        fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        let path = out.join(format!("{}_{}.svg", s.split, s.id));
        plot_curves(&path, &[("ground truth", &s.gt_curve), ("predicted", &s.pred_curve)])?;
        written.push(path);
    }
    Ok(written)
}

/// Loss curves of a training run.
pub fn plot_loss_log(log: &Path, path: &Path) -> Result<()> {
    let rows = read_loss_log(log)?;
    let d: Vec<f64> = rows.iter().map(|r| f64::from(r.loss_d)).collect();
    let adv: Vec<f64> = rows.iter().map(|r| f64::from(r.loss_g_adv)).collect();
    let l1: Vec<f64> = rows.iter().map(|r| f64::from(r.loss_g_l1)).collect();
    plot_curves(path, &[("loss_D", &d), ("loss_G_adv", &adv), ("loss_G_L1", &l1)])
}
