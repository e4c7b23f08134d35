//! Minimal SVG line charts for the experiment reports.
//!
//! Emits a fixed 800x600 chart with axes, tick labels, a legend, and one
//! polyline per series. Output is plain static markup built from formatted
//! strings, so identical inputs give identical files.

use std::path::Path;

use crate::error::{ensure_arg, Result};

/// One plotted line.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Series {
        Series {
            label: label.into(),
            points,
        }
    }
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];
const TICKS: usize = 5;

/// Renders the chart markup. Every series must be non-empty with finite
/// coordinates and strictly increasing x.
pub fn render_chart(series: &[Series], x_label: &str, y_label: &str) -> Result<String> {
    ensure_arg!(!series.is_empty(), "chart needs at least one series");
    for s in series {
        ensure_arg!(!s.points.is_empty(), "series {:?} has no points", s.label);
        for &(x, y) in &s.points {
            ensure_arg!(x.is_finite() && y.is_finite(), "series {:?} has non-finite point", s.label);
        }
        ensure_arg!(
            s.points.windows(2).all(|w| w[0].0 < w[1].0),
            "series {:?} must have strictly increasing x",
            s.label
        );
    }

    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
    let (x_min, x_max) = padded_bounds(xs);
    let (y_min, y_max) = padded_bounds(ys);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let py = |y: f64| MARGIN_TOP + plot_h - (y - y_min) / (y_max - y_min) * plot_h;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));

    // Grid and tick labels.
    for i in 0..TICKS {
        let t = i as f64 / (TICKS - 1) as f64;
        let xv = x_min + t * (x_max - x_min);
        let yv = y_min + t * (y_max - y_min);
        let gx = px(xv);
        let gy = py(yv);
        out.push_str(&format!(
            "<line x1=\"{gx:.2}\" y1=\"{MARGIN_TOP}\" x2=\"{gx:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>\n",
            MARGIN_TOP + plot_h
        ));
        out.push_str(&format!(
            "<line x1=\"{MARGIN_LEFT}\" y1=\"{gy:.2}\" x2=\"{:.2}\" y2=\"{gy:.2}\" stroke=\"#dddddd\"/>\n",
            MARGIN_LEFT + plot_w
        ));
        out.push_str(&format!(
            "<text x=\"{gx:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" fill=\"black\">{}</text>\n",
            MARGIN_TOP + plot_h + 18.0,
            tick_label(xv)
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\" fill=\"black\">{}</text>\n",
            MARGIN_LEFT - 6.0,
            gy + 4.0,
            tick_label(yv)
        ));
    }

    // Axes on top of the grid.
    out.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        MARGIN_TOP + plot_h
    ));
    out.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        MARGIN_TOP + plot_h,
        MARGIN_LEFT + plot_w,
        MARGIN_TOP + plot_h
    ));
    out.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\" fill=\"black\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 14.0,
        xml_escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"18\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\" fill=\"black\" transform=\"rotate(-90 18 {:.2})\">{}</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        xml_escape(y_label)
    ));

    // Series lines with point markers.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            pts.join(" ")
        ));
        for &(x, y) in &s.points {
            out.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                px(x),
                py(y)
            ));
        }
    }

    // Legend, top right inside the plot area.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let ly = MARGIN_TOP + 16.0 + 18.0 * i as f64;
        let lx = MARGIN_LEFT + plot_w - 150.0;
        out.push_str(&format!(
            "<line x1=\"{lx:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            lx + 24.0
        ));
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"black\">{}</text>\n",
            lx + 30.0,
            ly + 4.0,
            xml_escape(&s.label)
        ));
    }

    out.push_str("</svg>\n");
    Ok(out)
}

pub fn write_svg_chart(series: &[Series], x_label: &str, y_label: &str, path: &Path) -> Result<()> {
    std::fs::write(path, render_chart(series, x_label, y_label)?)?;
    Ok(())
}

/// Data bounds padded by 5% so lines do not sit on the frame; a degenerate
/// span expands to a unit interval around the value.
fn padded_bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in values {
        min = min.min(v);
        max = max.max(v);
    }
    if min == max {
        return (min - 0.5, max + 0.5);
    }
    let pad = (max - min) * 0.05;
    (min - pad, max + pad)
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.').to_owned();
    if s == "-0" {
        "0".to_owned()
    } else {
        s
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_lists_every_series() {
        let series = [
            Series::new("pnfc", vec![(20.0, 30.0), (50.0, 28.0), (80.0, 27.0)]),
            Series::new("mean", vec![(20.0, 26.0), (50.0, 27.5), (80.0, 27.8)]),
        ];
        let svg = render_chart(&series, "integration time (ms)", "PSNR (dB)").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(">pnfc</text>"));
        assert!(svg.contains(">mean</text>"));
        assert!(svg.contains("integration time (ms)"));
        assert!(svg.contains("PSNR (dB)"));
        assert_eq!(svg, render_chart(&series, "integration time (ms)", "PSNR (dB)").unwrap());
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(render_chart(&[], "x", "y").is_err());
        assert!(render_chart(&[Series::new("e", vec![])], "x", "y").is_err());
        let unsorted = [Series::new("u", vec![(2.0, 0.0), (1.0, 0.0)])];
        assert!(render_chart(&unsorted, "x", "y").is_err());
    }

    #[test]
    fn single_point_series_renders() {
        let svg = render_chart(&[Series::new("dot", vec![(5.0, 5.0)])], "x", "y").unwrap();
        assert!(svg.contains("<circle"));
    }
}
