//! Study results and their on-disk form: `study.json`, one CSV per table and
//! one SVG per plot. Everything written depends only on the report contents,
//! so re-emitting a report reproduces the files byte for byte. Wall-clock time
//! goes to a separate `timing.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, StudyKind};

/// One thresholded quantity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub pass: bool,
}

impl Check {
    pub fn bounded(name: impl Into<String>, value: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let pass = value.is_finite() && lower.is_none_or(|l| value >= l) && upper.is_none_or(|u| value <= u);
        Self { name: name.into(), value, lower, upper, pass }
    }

    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::bounded(name, value, None, Some(bound))
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::bounded(name, value, Some(bound), None)
    }

    pub fn within(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self::bounded(name, value, Some(target - tol), Some(target + tol))
    }

    /// Boolean property recorded as 1 (holds) or 0.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self::bounded(name, if ok { 1.0 } else { 0.0 }, Some(1.0), None)
    }
}

/// Values at a sequence of resolutions and the fitted log-log slope.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderFit {
    pub name: String,
    pub h: Vec<f64>,
    pub values: Vec<f64>,
    /// `None` when the fit is undefined (a zero value, say).
    pub order: Option<f64>,
}

/// Reported number without a threshold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Observation {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    /// File stem of the CSV.
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Plot {
    /// File stem of the SVG.
    pub name: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_log: bool,
    pub series: Vec<Series>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyReport {
    pub study: StudyKind,
    pub config: ExperimentConfig,
    pub results: Vec<Check>,
    pub orders: Vec<OrderFit>,
    pub observations: Vec<Observation>,
    pub notes: Vec<String>,
    pub tables: Vec<Table>,
    #[serde(skip)]
    pub plots: Vec<Plot>,
    pub pass: bool,
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl StudyReport {
    pub fn new(study: StudyKind, config: ExperimentConfig) -> Self {
        Self {
            study,
            config,
            results: Vec::new(),
            orders: Vec::new(),
            observations: Vec::new(),
            notes: Vec::new(),
            tables: Vec::new(),
            plots: Vec::new(),
            pass: true,
            wall_clock: Duration::ZERO,
        }
    }

    pub fn check(&mut self, c: Check) -> bool {
        let ok = c.pass;
        self.results.push(c);
        ok
    }

    pub fn observe(&mut self, name: impl Into<String>, value: f64) {
        self.observations.push(Observation { name: name.into(), value });
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Fits and records an order; returns the slope if defined.
    pub fn order(&mut self, name: impl Into<String>, h: &[f64], values: &[f64]) -> Option<f64> {
        let order = crate::harness::order::measure_order(h, values).ok();
        self.orders.push(OrderFit { name: name.into(), h: h.to_vec(), values: values.to_vec(), order });
        order
    }

    /// Recomputes the overall verdict from the individual checks.
    pub fn finish(&mut self) {
        self.pass = self.results.iter().all(|c| c.pass);
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.results.iter().filter(|c| !c.pass)
    }

    /// Every numeric entry, for the finiteness contract.
    pub fn all_finite(&self) -> bool {
        let obs = self.observations.iter().all(|o| o.value.is_finite());
        let ord = self
            .orders
            .iter()
            .all(|o| o.h.iter().chain(&o.values).all(|v| v.is_finite()) && o.order.is_none_or(f64::is_finite));
        obs && ord && self.results.iter().all(|c| c.value.is_finite() || !c.pass)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Shortest round-trip decimal form; stable across runs.
pub fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Minimal line chart, log-log when requested. Series with non-positive
/// values are dropped from log plots.
pub fn render_svg(plot: &Plot) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (80.0, 170.0, 40.0, 60.0);
    let tx = |v: f64| if plot.log_log { v.log10() } else { v };
    let usable: Vec<&Series> = plot
        .series
        .iter()
        .filter(|s| !plot.log_log || s.x.iter().chain(&s.y).all(|&v| v > 0.0))
        .filter(|s| s.x.iter().chain(&s.y).all(|v| v.is_finite()))
        .collect();
    let pts = || usable.iter().flat_map(|s| s.x.iter().zip(&s.y).map(|(&x, &y)| (tx(x), tx(y))));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (x, y) in pts() {
        (x0, x1, y0, y1) = (x0.min(x), x1.max(x), y0.min(y), y1.max(y));
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        (x0, x1) = (x0 - 0.5, x1 + 0.5);
    }
    if y1 - y0 < 1e-12 {
        (y0, y1) = (y0 - 0.5, y1 + 0.5);
    }
    let pw = w - left - right;
    let ph = h - top - bottom;
    let px = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| top + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#, left + pw / 2.0, escape(&plot.title));
    let _ = writeln!(s, r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##);
    for (i, (a, b)) in [(x0, x1), (y0, y1)].into_iter().enumerate() {
        for j in 0..=4 {
            let v = a + (b - a) * j as f64 / 4.0;
            let label = if plot.log_log { format!("1e{v:.1}") } else { format!("{v:.3e}") };
            if i == 0 {
                let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{label}</text>"#, px(v), top + ph + 18.0);
            } else {
                let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{label}</text>"#, left - 6.0, py(v) + 4.0);
            }
        }
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#, left + pw / 2.0, h - 16.0, escape(&plot.x_label));
    let _ = writeln!(s, r#"<text x="16" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#, top + ph / 2.0, top + ph / 2.0, escape(&plot.y_label));
    for (k, series) in usable.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let coords: Vec<String> =
            series.x.iter().zip(&series.y).map(|(&x, &y)| format!("{:.2},{:.2}", px(tx(x)), py(tx(y)))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, coords.join(" "));
        let ly = top + 14.0 + 18.0 * k as f64;
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, w - right + 12.0, w - right + 32.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{}</text>"#, w - right + 38.0, ly + 4.0, escape(&series.label));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn write_file(path: PathBuf, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Writes the report into `dir` and returns the paths written. Tables without
/// rows and plots without series produce no file.
pub fn emit_reports(report: &StudyReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    write_file(dir.join("study.json"), &report.to_json(), &mut written)?;
    for table in report.tables.iter().filter(|t| !t.rows.is_empty()) {
        write_file(dir.join(format!("{}.csv", table.name)), &table.to_csv(), &mut written)?;
    }
    for plot in report.plots.iter().filter(|p| !p.series.is_empty()) {
        write_file(dir.join(format!("{}.svg", plot.name)), &render_svg(plot), &mut written)?;
    }
    let timing = format!("{{\n  \"wall_clock_seconds\": {}\n}}\n", report.wall_clock.as_secs_f64());
    let path = dir.join("timing.json");
    fs::write(&path, timing).map_err(|e| Error::io(&path, e))?;
    Ok(written)
}
