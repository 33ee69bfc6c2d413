//! Minimal deterministic SVG charts for experiment summaries.

use std::fmt::Write;

use crate::error::{RbbError, Result};
use crate::experiments::{ExperimentKind, ExperimentRows};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Line,
    Scatter,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - pad, hi + pad)
    } else {
        (lo, hi)
    }
}

/// Renders the series with axes, five ticks per axis and a legend.
pub fn render_svg(title: &str, x_label: &str, y_label: &str, series: &[Series], kind: PlotKind) -> Result<String> {
    let points = || series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    if points().next().is_none() {
        return Err(RbbError::EmptyInput);
    }
    let (x0, x1) = span(points().map(|p| p.0));
    let (y0, y1) = span(points().map(|p| p.1));
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(s, r#"<path d="M{left} {top}V{bottom}H{right}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let f = f64::from(i) / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let (tx, ty) = (px(xv), py(yv));
        let _ = writeln!(s, r#"<line x1="{tx:.2}" y1="{bottom}" x2="{tx:.2}" y2="{}" stroke="black"/>"#, bottom + 5.0);
        let _ = writeln!(s, r#"<text x="{tx:.2}" y="{}" text-anchor="middle">{}</text>"#, bottom + 18.0, tick(xv));
        let _ = writeln!(s, r#"<line x1="{}" y1="{ty:.2}" x2="{left}" y2="{ty:.2}" stroke="black"/>"#, left - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, left - 8.0, ty + 4.0, tick(yv));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 16.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<(f64, f64)> = ser.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).map(|&(x, y)| (px(x), py(y))).collect();
        if kind == PlotKind::Line && pts.len() > 1 {
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, path.join(" "));
        }
        for (x, y) in &pts {
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
        }
        let ly = top + 16.0 * i as f64;
        let _ = writeln!(s, r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/>"#, right - 90.0, ly - 9.0);
        let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, right - 75.0, escape(&ser.label));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        let t = format!("{v:.2}");
        t.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One series per `n` with `x = m/n` and `y` the per-point mean.
pub fn plot_rows(rows: &ExperimentRows, kind: PlotKind) -> Result<String> {
    let summary = rows.summary();
    let mut series: Vec<Series> = Vec::new();
    for row in summary.iter().filter(|r| r.reps > 0) {
        let label = format!("n = {}", row.n);
        if series.last().map(|s| &s.label) != Some(&label) {
            series.push(Series { label, points: Vec::new() });
        }
        let pt = (row.m as f64 / row.n as f64, row.mean);
        series.last_mut().expect("pushed").points.push(pt);
    }
    let (title, y) = match rows.kind() {
        ExperimentKind::MaxLoad => ("Maximum load", "mean max load"),
        ExperimentKind::EmptyFraction => ("Fraction of empty bins", "mean empty fraction"),
        ExperimentKind::Convergence => ("Rounds to reach the target max load", "mean rounds"),
        ExperimentKind::Traversal => ("Rounds until every ball visited every bin", "mean cover round"),
    };
    render_svg(title, "m / n", y, &series, kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_errors() {
        assert!(matches!(render_svg("t", "x", "y", &[], PlotKind::Line), Err(RbbError::EmptyInput)));
        let s = Series { label: "a".into(), points: vec![] };
        assert!(render_svg("t", "x", "y", &[s], PlotKind::Line).is_err());
    }

    #[test]
    fn single_point_one_marker() {
        let s = Series { label: "a".into(), points: vec![(2.0, 3.0)] };
        let svg = render_svg("t", "x", "y", &[s], PlotKind::Scatter).unwrap();
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }

    #[test]
    fn deterministic_bytes() {
        let s = vec![
            Series { label: "n = 100".into(), points: vec![(1.0, 0.3), (2.0, 0.2), (5.0, 0.08)] },
            Series { label: "n = 1000".into(), points: vec![(1.0, 0.31), (2.0, 0.19)] },
        ];
        let a = render_svg("Fraction", "m / n", "f", &s, PlotKind::Line).unwrap();
        let b = render_svg("Fraction", "m / n", "f", &s, PlotKind::Line).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.matches("<polyline").count(), 2);
    }
}
