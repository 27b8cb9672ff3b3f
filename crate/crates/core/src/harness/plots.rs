use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::EvalReport;
use crate::error::{Error, Result};
use crate::training::LossRecord;

fn plot_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

/// Writes the relative-error bar chart and the loss curves, each next to the
/// CSV holding the plotted numbers. Returns the files written.
pub fn emit_plots(report: &EvalReport, loss_curves: &[(String, Vec<LossRecord>)], out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut files = Vec::new();

    let bars: Vec<(String, f64)> = report
        .summary
        .iter()
        .filter_map(|s| s.mean_rel_mse.map(|v| (s.class.clone(), v)))
        .collect();
    let csv_path = out_dir.join("rel_mse_by_class.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["class", "mean_rel_mse"])?;
    for (c, v) in &bars {
        w.write_record([c.clone(), v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    files.push(csv_path);

    if bars.is_empty() {
        let stub = out_dir.join("rel_mse_by_class.txt");
        fs::write(&stub, "no evaluated tasks; nothing to plot\n").map_err(|e| Error::io(&stub, e))?;
        files.push(stub);
    } else {
        let path = out_dir.join("rel_mse_by_class.svg");
        bar_chart(&bars, &path).map_err(|e| plot_err(&path, e))?;
        files.push(path);
    }

    if !loss_curves.is_empty() {
        let csv_path = out_dir.join("loss_curves.csv");
        let mut w = csv::Writer::from_path(&csv_path)?;
        w.write_record(["run", "step", "loss"])?;
        for (name, curve) in loss_curves {
            for r in curve {
                w.write_record([name.clone(), r.step.to_string(), r.loss.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(&csv_path, e))?;
        files.push(csv_path);
        let path = out_dir.join("loss_curves.svg");
        loss_chart(loss_curves, &path).map_err(|e| plot_err(&path, e))?;
        files.push(path);
    }
    Ok(files)
}

fn bar_chart(bars: &[(String, f64)], path: &Path) -> std::result::Result<(), Box<dyn std::error::Error>> {
    let root = SVGBackend::new(path, (640, 400)).into_drawing_area();
    root.fill(&WHITE)?;
    let top = bars.iter().map(|b| b.1).fold(1.0, f64::max) * 1.15;
    let mut chart = ChartBuilder::on(&root)
        .caption("mean relative MSE vs seasonal naive", ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(30)
        .y_label_area_size(50)
        .build_cartesian_2d(0.0..bars.len() as f64, 0.0..top)?;
    let names: Vec<String> = bars.iter().map(|b| b.0.clone()).collect();
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_labels(bars.len() * 2 + 1)
        .x_label_formatter(&|x| {
            let i = (x - 0.5).round();
            if (x - 0.5 - i).abs() < 1e-6 && i >= 0.0 {
                names.get(i as usize).cloned().unwrap_or_default()
            } else {
                String::new()
            }
        })
        .draw()?;
    chart.draw_series(
        bars.iter()
            .enumerate()
            .map(|(i, (_, v))| Rectangle::new([(i as f64 + 0.15, 0.0), (i as f64 + 0.85, *v)], BLUE.mix(0.6).filled())),
    )?;
    chart.draw_series(LineSeries::new([(0.0, 1.0), (bars.len() as f64, 1.0)], RED))?;
    root.present()?;
    Ok(())
}

fn loss_chart(curves: &[(String, Vec<LossRecord>)], path: &Path) -> std::result::Result<(), Box<dyn std::error::Error>> {
    let root = SVGBackend::new(path, (720, 420)).into_drawing_area();
    root.fill(&WHITE)?;
    let max_step = curves.iter().flat_map(|c| c.1.iter().map(|r| r.step)).max().unwrap_or(1).max(1) as f64;
    let finite = || curves.iter().flat_map(|c| c.1.iter().map(|r| r.loss)).filter(|v| v.is_finite());
    let hi = finite().fold(f64::NEG_INFINITY, f64::max);
    let lo = finite().fold(f64::INFINITY, f64::min);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 1.0, lo + 1.0) };
    let mut chart = ChartBuilder::on(&root)
        .caption("training loss", ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(30)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..max_step, lo..hi)?;
    chart.configure_mesh().x_desc("step").y_desc("loss").draw()?;
    for (i, (name, curve)) in curves.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(curve.iter().map(|r| (r.step as f64, r.loss)), color))?
            .label(name.clone())
            .legend(move |(x, y)| PathElement::new([(x, y), (x + 16, y)], color));
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
    root.present()?;
    Ok(())
}
