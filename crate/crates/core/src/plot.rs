//! Standalone SVG charts of success, precision and EAO curves.

use std::fmt::Write as _;

use crate::eval::{eao_curve, otb_thresholds, success_curve, RunTrace};

/// A named polyline in data coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub series: Vec<Series>,
}

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 260.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Success rate against overlap threshold, pooled over all frames with a
/// prediction.
pub fn success_chart(name: &str, traces: &[RunTrace]) -> Chart {
    let overlaps: Vec<f64> = traces
        .iter()
        .flat_map(|t| t.predictions.iter().zip(&t.overlaps).filter(|(p, _)| p.is_some()).map(|(_, o)| *o))
        .collect();
    let t = otb_thresholds();
    let curve = success_curve(&overlaps, &t);
    let auc = crate::eval::auc(&curve);
    Chart {
        title: "Success".into(),
        x_label: "overlap threshold".into(),
        y_label: "success rate".into(),
        x_range: (0.0, 1.0),
        y_range: (0.0, 1.0),
        series: vec![Series {
            name: format!("{name} [{auc:.3}]"),
            points: t.into_iter().zip(curve).collect(),
        }],
    }
}

/// Fraction of frames within each center-error radius, 0 to 50 px.
pub fn precision_chart(name: &str, traces: &[RunTrace]) -> Chart {
    let errors: Vec<f64> = traces.iter().flat_map(|t| t.center_errors().into_iter().flatten()).collect();
    let n = errors.len().max(1) as f64;
    let points: Vec<(f64, f64)> = (0..=50)
        .map(|r| {
            let r = r as f64;
            (r, errors.iter().filter(|&&e| e <= r).count() as f64 / n)
        })
        .collect();
    let at20 = points[20].1;
    Chart {
        title: "Precision".into(),
        x_label: "location error threshold (px)".into(),
        y_label: "precision".into(),
        x_range: (0.0, 50.0),
        y_range: (0.0, 1.0),
        series: vec![Series {
            name: format!("{name} [{at20:.3}]"),
            points,
        }],
    }
}

/// Expected average overlap against sequence length.
pub fn eao_chart(name: &str, traces: &[RunTrace], max_len: usize) -> Chart {
    let points: Vec<(f64, f64)> = eao_curve(traces, 1, max_len.max(1))
        .into_iter()
        .map(|(l, v)| (l as f64, v))
        .collect();
    Chart {
        title: "Expected average overlap".into(),
        x_label: "sequence length".into(),
        y_label: "EAO".into(),
        x_range: (1.0, max_len.max(2) as f64),
        y_range: (0.0, 1.0),
        series: vec![Series {
            name: name.to_string(),
            points,
        }],
    }
}

/// Lay the charts out side by side in one SVG document.
pub fn render_svg(charts: &[Chart]) -> String {
    let total_w = (PANEL_W + 2.0 * MARGIN) * charts.len().max(1) as f64;
    let total_h = PANEL_H + 2.0 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" height="{total_h}" viewBox="0 0 {total_w} {total_h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, chart) in charts.iter().enumerate() {
        let ox = i as f64 * (PANEL_W + 2.0 * MARGIN) + MARGIN;
        panel(&mut s, chart, ox, MARGIN);
    }
    s.push_str("</svg>\n");
    s
}

fn panel(s: &mut String, c: &Chart, ox: f64, oy: f64) {
    let (x0, x1) = c.x_range;
    let (y0, y1) = c.y_range;
    let sx = |x: f64| ox + (x - x0) / (x1 - x0) * PANEL_W;
    let sy = |y: f64| oy + PANEL_H - (y - y0) / (y1 - y0) * PANEL_H;
    let _ = writeln!(
        s,
        r##"<rect x="{ox}" y="{oy}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#444"/>"##
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{oy}" x2="{:.2}" y2="{:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            sx(fx),
            sx(fx),
            oy + PANEL_H,
            sx(fx),
            oy + PANEL_H + 14.0,
            tick(fx)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{ox}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            sy(fy),
            ox + PANEL_W,
            sy(fy),
            ox - 4.0,
            sy(fy) + 4.0,
            tick(fy)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{}</text>"#,
        ox + PANEL_W / 2.0,
        oy - 12.0,
        escape(&c.title)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        ox + PANEL_W / 2.0,
        oy + PANEL_H + 32.0,
        escape(&c.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate({:.2},{:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        ox - 34.0,
        oy + PANEL_H / 2.0,
        escape(&c.y_label)
    );
    for (k, series) in c.series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = series
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y.clamp(y0, y1))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#,
            ox + 8.0,
            oy + 16.0 + 14.0 * k as f64,
            escape(&series.name)
        );
    }
}

fn tick(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
