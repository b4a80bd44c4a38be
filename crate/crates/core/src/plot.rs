//! Semi-log SVG renderings of a run. The CSV is the record; these are for
//! looking at.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::harness::MethodRun;
use crate::solvers::Record;

const PALETTE: [RGBColor; 8] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
    RGBColor(227, 119, 194),
    RGBColor(127, 127, 127),
];

fn plot_err(e: impl std::fmt::Display) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn semilog(path: &Path, title: &str, runs: &[MethodRun], metric: fn(&Record) -> f64) -> Result<()> {
    let series: Vec<(String, Vec<(f64, f64)>)> = runs
        .iter()
        .map(|r| {
            let pts = r
                .trajectory
                .records
                .iter()
                .map(|rec| (rec.t as f64, metric(rec)))
                .filter(|(_, v)| *v > 0.0 && v.is_finite())
                .collect();
            (r.method.name(), pts)
        })
        .collect();
    let t_max = series
        .iter()
        .flat_map(|(_, p)| p.iter().map(|q| q.0))
        .fold(1.0, f64::max);
    let (lo, hi) = series
        .iter()
        .flat_map(|(_, p)| p.iter().map(|q| q.1))
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let (lo, hi) = if lo.is_finite() && hi > lo {
        (lo, hi)
    } else {
        (1e-16, 1.0)
    };

    let root = SVGBackend::new(path, (900, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(0f64..t_max, (lo * 0.5..hi * 2.0).log_scale())
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("iteration")
        .y_desc(title)
        .y_label_formatter(&|v| format!("{v:.0e}"))
        .draw()
        .map_err(plot_err)?;
    for (i, (name, pts)) in series.into_iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(2)))
            .map_err(plot_err)?
            .label(name)
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2))
            });
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Writes `<stem>_dist_sq.svg` and `<stem>_excess.svg`.
pub fn write_plots(stem: &Path, runs: &[MethodRun]) -> Result<Vec<PathBuf>> {
    let with_suffix = |s: &str| {
        let mut name = stem.file_name().unwrap_or_default().to_os_string();
        name.push(s);
        stem.with_file_name(name)
    };
    let dist = with_suffix("_dist_sq.svg");
    let excess = with_suffix("_excess.svg");
    semilog(&dist, "||x_t - x*||^2", runs, |r| r.dist_sq)?;
    semilog(&excess, "f(x_t) - f*", runs, |r| r.excess)?;
    Ok(vec![dist, excess])
}
