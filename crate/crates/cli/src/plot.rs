//! SVG plots rendered from a bundle's `summary.json` alone.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::bundle::{write_atomic, Channels, SummaryDoc};
use crate::error::{CliError, Result};

const SIZE: (u32, u32) = (800, 500);
const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

fn draw_err<E: std::fmt::Debug>(path: &Path) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Other(format!("{}: plotting failed: {e:?}", path.display()))
}

struct Channel {
    key: &'static str,
    label: &'static str,
    curve: fn(&crate::bundle::FilterSummaryDoc) -> &Vec<f64>,
    trial: fn(&Channels) -> f64,
}

const CHANNELS: [Channel; 3] = [
    Channel {
        key: "pos",
        label: "position RMSE [m]",
        curve: |f| &f.rmse_pos,
        trial: |c| c.pos,
    },
    Channel {
        key: "vel",
        label: "velocity RMSE [m/s]",
        curve: |f| &f.rmse_vel,
        trial: |c| c.vel,
    },
    Channel {
        key: "ori",
        label: "orientation RMSE [rad]",
        curve: |f| &f.rmse_ori,
        trial: |c| c.ori,
    },
];

fn upper(values: impl Iterator<Item = f64>) -> f64 {
    let m = values.filter(|v| v.is_finite()).fold(0.0, f64::max);
    if m > 0.0 {
        m * 1.05
    } else {
        1.0
    }
}

fn rmse_plot(path: &Path, s: &SummaryDoc, ch: &Channel) -> Result<()> {
    let mut svg = String::new();
    draw_rmse(&mut svg, path, s, ch)?;
    write_atomic(path, svg.as_bytes())
}

fn draw_rmse(svg: &mut String, path: &Path, s: &SummaryDoc, ch: &Channel) -> Result<()> {
    let err = draw_err(path);
    let root = SVGBackend::with_string(svg, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(&err)?;
    let t0 = s.t.first().copied().unwrap_or(0.0);
    let t1 = s.t.last().copied().filter(|t| *t > t0).unwrap_or(t0 + 1.0);
    let ymax = upper(s.filters.iter().flat_map(|f| (ch.curve)(f).iter().copied()));
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("{}: {}", s.run_id, ch.label), ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(t0..t1, 0.0..ymax)
        .map_err(&err)?;
    chart
        .configure_mesh()
        .x_desc("time [s]")
        .y_desc(ch.label)
        .draw()
        .map_err(&err)?;
    for (i, f) in s.filters.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points = s.t.iter().copied().zip((ch.curve)(f).iter().copied());
        chart
            .draw_series(LineSeries::new(points, &color))
            .map_err(&err)?
            .label(f.name.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(&err)?;
    root.present().map_err(&err)
}

fn box_plot(path: &Path, s: &SummaryDoc, ch: &Channel) -> Result<()> {
    let mut svg = String::new();
    draw_box(&mut svg, path, s, ch)?;
    write_atomic(path, svg.as_bytes())
}

fn draw_box(svg: &mut String, path: &Path, s: &SummaryDoc, ch: &Channel) -> Result<()> {
    let err = draw_err(path);
    let root = SVGBackend::with_string(svg, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(&err)?;
    let values: Vec<Vec<f64>> = s
        .filters
        .iter()
        .map(|f| f.trial_rmse.iter().map(ch.trial).collect())
        .collect();
    let ymax = upper(values.iter().flatten().copied()) as f32;
    let names: Vec<String> = s.filters.iter().map(|f| f.name.clone()).collect();
    let n = names.len() as i32;
    let mut chart = ChartBuilder::on(&root)
        .caption(format!("{}: per-trial {}", s.run_id, ch.label), ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d((0..n).into_segmented(), 0f32..ymax)
        .map_err(&err)?;
    chart
        .configure_mesh()
        .disable_x_mesh()
        .x_label_formatter(&|v| match v {
            SegmentValue::CenterOf(i) | SegmentValue::Exact(i) => {
                names.get(*i as usize).cloned().unwrap_or_default()
            }
            SegmentValue::Last => String::new(),
        })
        .y_desc(ch.label)
        .draw()
        .map_err(&err)?;
    for (i, v) in values.iter().enumerate() {
        if v.is_empty() {
            continue;
        }
        let q = Quartiles::new(v);
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(std::iter::once(
                Boxplot::new_vertical(SegmentValue::CenterOf(i as i32), &q)
                    .width(40)
                    .style(color),
            ))
            .map_err(&err)?;
    }
    root.present().map_err(&err)
}

/// Renders `rmse_<channel>.svg` and `box_<channel>.svg` into `out_dir` and
/// returns the written paths.
pub fn render(summary: &SummaryDoc, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut written = Vec::new();
    for ch in &CHANNELS {
        let p = out_dir.join(format!("rmse_{}.svg", ch.key));
        rmse_plot(&p, summary, ch)?;
        written.push(p);
        let p = out_dir.join(format!("box_{}.svg", ch.key));
        box_plot(&p, summary, ch)?;
        written.push(p);
    }
    Ok(written)
}
