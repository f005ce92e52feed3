//! SVG figures: trajectory overlays and per-ratio bar charts.

use std::path::Path;

use clap_localization::FieldMap;
use plotters::prelude::*;

use crate::experiment::AggregateRow;
use crate::metrics::RunRecord;

#[derive(Debug, thiserror::Error)]
#[error("plotting {path}: {message}")]
pub struct PlotError {
    path: String,
    message: String,
}

fn plot_err<E: std::fmt::Display>(path: &Path) -> impl Fn(E) -> PlotError + '_ {
    move |e| PlotError {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(255, 127, 14),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

/// Landmarks, ground truth and each record's estimate on one field plot.
pub fn plot_trajectories(path: &Path, map: &FieldMap, records: &[&RunRecord]) -> Result<(), PlotError> {
    let err = plot_err(path);
    let (lo, hi) = map.bounds();
    let root = SVGBackend::new(path, (900, 620)).into_drawing_area();
    root.fill(&WHITE).map_err(&err)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(15)
        .x_label_area_size(30)
        .y_label_area_size(40)
        .build_cartesian_2d(lo.x - 1.5..hi.x + 1.5, lo.y - 1.5..hi.y + 1.5)
        .map_err(&err)?;
    chart
        .configure_mesh()
        .x_desc("x (m)")
        .y_desc("y (m)")
        .draw()
        .map_err(&err)?;

    chart
        .draw_series(
            map.landmarks()
                .iter()
                .map(|lm| Circle::new((lm.position.x, lm.position.y), 3, BLACK.filled())),
        )
        .map_err(&err)?;
    if let Some(first) = records.first() {
        chart
            .draw_series(LineSeries::new(
                first.rows.iter().map(|r| (r.gt.x, r.gt.y)),
                BLACK.stroke_width(2),
            ))
            .map_err(&err)?
            .label("ground truth")
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], BLACK));
    }
    for (i, rec) in records.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(rec.rows.iter().map(|r| (r.est.x, r.est.y)), color))
            .map_err(&err)?
            .label(rec.method.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(&err)?;
    root.present().map_err(&err)
}

/// Grouped bars of `value` per outlier ratio, one bar per method.
pub fn plot_bars(
    path: &Path,
    title: &str,
    rows: &[AggregateRow],
    value: fn(&AggregateRow) -> f64,
) -> Result<(), PlotError> {
    let err = plot_err(path);
    let mut ratios: Vec<f64> = rows.iter().map(|r| r.outlier_ratio).collect();
    ratios.dedup();
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let top = rows.iter().map(value).fold(0.0, f64::max).max(1e-9) * 1.1;
    let groups = ratios.len().max(1) as f64;

    let root = SVGBackend::new(path, (800, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(&err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(15)
        .x_label_area_size(35)
        .y_label_area_size(55)
        .build_cartesian_2d(0.0..groups, 0.0..top)
        .map_err(&err)?;
    let labels = ratios.clone();
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_labels(ratios.len().max(1) * 2 + 1)
        .x_label_formatter(&|x| {
            let k = x.floor() as usize;
            if (x - k as f64 - 0.5).abs() < 1e-6 && k < labels.len() {
                format!("{:.2}", labels[k])
            } else {
                String::new()
            }
        })
        .x_desc("outlier ratio")
        .draw()
        .map_err(&err)?;

    let width = 0.8 / methods.len().max(1) as f64;
    for (m, method) in methods.iter().enumerate() {
        let color = PALETTE[m % PALETTE.len()];
        let bars = rows.iter().filter(|r| r.method == *method).filter_map(|r| {
            let g = ratios.iter().position(|q| *q == r.outlier_ratio)? as f64;
            let x0 = g + 0.1 + m as f64 * width;
            Some(Rectangle::new([(x0, 0.0), (x0 + width, value(r))], color.filled()))
        });
        chart
            .draw_series(bars)
            .map_err(&err)?
            .label(*method)
            .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 10, y + 5)], color.filled()));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(&err)?;
    root.present().map_err(&err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::FrameRow;
    use clap_localization::{default_adult_field, Pose2D};

    #[test]
    fn writes_svg_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut rec = RunRecord::new("clap");
        for k in 0..20 {
            let p = Pose2D::new(k as f64 * 0.1, 0.0, 0.0);
            rec.rows.push(FrameRow {
                t: k as f64 * 0.02,
                gt: p,
                est: p,
                n_candidates: 0,
                jump: false,
                diverged: false,
                frame_time_s: 0.0,
            });
        }
        let traj = dir.path().join("traj.svg");
        plot_trajectories(&traj, &default_adult_field(), &[&rec]).unwrap();
        assert!(std::fs::read_to_string(&traj).unwrap().contains("<svg"));

        let row = |method: &str, ratio: f64, jumps: f64| AggregateRow {
            method: method.into(),
            outlier_ratio: ratio,
            seeds: 1,
            position_mae_m: 0.0,
            orientation_mae_deg: 0.0,
            jumps,
            diverged_fraction: 0.0,
            latency_mean_s: 0.0,
        };
        let bars = dir.path().join("jumps.svg");
        let rows = [row("clap", 0.2, 3.0), row("mcl", 0.2, 40.0), row("clap", 0.6, 5.0)];
        plot_bars(&bars, "velocity jumps", &rows, |r| r.jumps).unwrap();
        assert!(std::fs::read_to_string(&bars).unwrap().contains("<rect"));
    }
}
