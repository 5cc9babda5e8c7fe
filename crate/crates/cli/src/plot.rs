//! SVG renders of curves, scatter clouds and heatmaps. Output depends only
//! on the data, so reruns give identical files.

use std::path::Path;

use plotters::prelude::*;

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("nothing to plot for {0}")]
    Empty(String),
    #[error("non-finite data in {0}")]
    NonFinite(String),
    #[error("rendering {path}: {detail}")]
    Render { path: String, detail: String },
}

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
        }
    }
}

pub struct Axes<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Lines,
    Dots,
}

const SIZE: (u32, u32) = (800, 600);

fn palette(i: usize) -> RGBColor {
    const P: [RGBColor; 6] = [
        RGBColor(31, 119, 180),
        RGBColor(214, 39, 40),
        RGBColor(44, 160, 44),
        RGBColor(148, 103, 189),
        RGBColor(255, 127, 14),
        RGBColor(23, 190, 207),
    ];
    P[i % P.len()]
}

fn span(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if hi > lo {
        let pad = 0.04 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn render_err(path: &Path, e: impl std::fmt::Display) -> PlotError {
    PlotError::Render {
        path: path.display().to_string(),
        detail: e.to_string(),
    }
}

/// Line or dot plot of several series sharing axes.
pub fn xy_plot(path: &Path, axes: &Axes, series: &[Series], mark: Mark) -> Result<(), PlotError> {
    if series.iter().all(|s| s.points.is_empty()) {
        return Err(PlotError::Empty(axes.title.into()));
    }
    let all = || series.iter().flat_map(|s| s.points.iter());
    if all().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(PlotError::NonFinite(axes.title.into()));
    }
    let xr = span(all().map(|p| p.0));
    let yr = span(all().map(|p| p.1));
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| render_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(axes.title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(xr.0..xr.1, yr.0..yr.1)
        .map_err(|e| render_err(path, e))?;
    chart
        .configure_mesh()
        .x_desc(axes.x_label)
        .y_desc(axes.y_label)
        .draw()
        .map_err(|e| render_err(path, e))?;
    for (i, s) in series.iter().enumerate() {
        let color = palette(i);
        let drawn = match mark {
            Mark::Lines => chart.draw_series(LineSeries::new(s.points.iter().copied(), color.stroke_width(2))),
            Mark::Dots => chart.draw_series(s.points.iter().map(|&p| Circle::new(p, 3, color.filled()))),
        }
        .map_err(|e| render_err(path, e))?;
        drawn
            .label(s.label.clone())
            .legend(move |(x, y)| Rectangle::new([(x, y - 4), (x + 14, y + 4)], color.filled()));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| render_err(path, e))?;
    root.present().map_err(|e| render_err(path, e))
}

/// Diverging blue-white-red map on `[-1, 1]`.
fn diverging(t: f64) -> RGBColor {
    let t = t.clamp(-1.0, 1.0);
    let mix = |a: u8, b: u8, s: f64| (a as f64 + (b as f64 - a as f64) * s).round() as u8;
    if t < 0.0 {
        let s = -t;
        RGBColor(mix(255, 33, s), mix(255, 102, s), mix(255, 172, s))
    } else {
        RGBColor(mix(255, 178, t), mix(255, 24, t), mix(255, 43, t))
    }
}

/// Heatmap of `values[i * ny + j]` over `x[i]`, `y[j]`, symmetric color
/// scale around zero.
pub fn heatmap(path: &Path, axes: &Axes, x: &[f64], y: &[f64], values: &[f64]) -> Result<(), PlotError> {
    if x.is_empty() || y.is_empty() || values.len() != x.len() * y.len() {
        return Err(PlotError::Empty(axes.title.into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(PlotError::NonFinite(axes.title.into()));
    }
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let dx = if x.len() > 1 { x[1] - x[0] } else { 1.0 };
    let dy = if y.len() > 1 { y[1] - y[0] } else { 1.0 };
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| render_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(axes.title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x[0]..x[x.len() - 1] + dx, y[0]..y[y.len() - 1] + dy)
        .map_err(|e| render_err(path, e))?;
    chart
        .configure_mesh()
        .disable_mesh()
        .x_desc(axes.x_label)
        .y_desc(axes.y_label)
        .draw()
        .map_err(|e| render_err(path, e))?;
    let ny = y.len();
    chart
        .draw_series(x.iter().enumerate().flat_map(|(i, &xi)| {
            y.iter().enumerate().map(move |(j, &yj)| {
                let c = diverging(values[i * ny + j] / scale);
                Rectangle::new([(xi, yj), (xi + dx, yj + dy)], c.filled())
            })
        }))
        .map_err(|e| render_err(path, e))?;
    root.present().map_err(|e| render_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axes() -> Axes<'static> {
        Axes {
            title: "t",
            x_label: "x",
            y_label: "y",
        }
    }

    #[test]
    fn empty_data_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.svg");
        assert!(matches!(
            xy_plot(&p, &axes(), &[], Mark::Lines),
            Err(PlotError::Empty(_))
        ));
        assert!(matches!(heatmap(&p, &axes(), &[], &[], &[]), Err(PlotError::Empty(_))));
        assert!(!p.exists());
    }

    #[test]
    fn renders_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let pts: Vec<(f64, f64)> = (0..50).map(|i| (i as f64, (i as f64 * 0.2).sin())).collect();
        let a = dir.path().join("a.svg");
        let b = dir.path().join("b.svg");
        for p in [&a, &b] {
            xy_plot(p, &axes(), &[Series::new("sin", pts.clone())], Mark::Dots).unwrap();
        }
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn checkerboard_heatmap_alternates() {
        let dir = tempfile::tempdir().unwrap();
        let x: Vec<f64> = (0..4).map(f64::from).collect();
        let y = x.clone();
        let v: Vec<f64> = (0..16)
            .map(|k| if (k / 4 + k % 4) % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let p = dir.path().join("h.svg");
        heatmap(&p, &axes(), &x, &y, &v).unwrap();
        let svg = std::fs::read_to_string(&p).unwrap();
        // both extreme colors appear, once per cell
        assert_eq!(svg.matches("#B2182B").count(), 8);
        assert_eq!(svg.matches("#2166AC").count(), 8);
    }
}
