//! Static SVG plots regenerated from the files listed in a run manifest.
//! Output is a pure function of those files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{RunError, RunResult};
use crate::output::RunManifest;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Symmetric vertical error bars, one per point.
    pub errors: Option<Vec<f64>>,
    pub markers: bool,
}

#[derive(Debug, Clone)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

/// Fixed-precision number with trailing zeros removed.
fn fmt(x: f64) -> String {
    let s = format!("{x:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn tick_label(x: f64) -> String {
    if x != 0.0 && (x.abs() < 1e-2 || x.abs() >= 1e4) {
        format!("{x:.0e}")
    } else {
        let s = format!("{x:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if log {
            lo = lo.floor();
            hi = hi.ceil();
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        if !log {
            let pad = 0.05 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
        Self { lo, hi, log }
    }

    fn map(&self, v: f64) -> Option<f64> {
        if !v.is_finite() || (self.log && v <= 0.0) {
            return None;
        }
        let v = if self.log { v.log10() } else { v };
        Some((v - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let step = ((self.hi - self.lo) / 8.0).ceil().max(1.0);
            let mut t = Vec::new();
            let mut e = self.lo;
            while e <= self.hi + 1e-9 {
                t.push(10f64.powf(e));
                e += step;
            }
            return t;
        }
        let raw = (self.hi - self.lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
        let mut t = Vec::new();
        let mut v = (self.lo / step).ceil() * step;
        while v <= self.hi + 1e-12 {
            t.push(if v.abs() < step * 1e-9 { 0.0 } else { v });
            v += step;
        }
        t
    }
}

impl Figure {
    pub fn render(&self) -> String {
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let xs = Axis::new(self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)), self.log_x);
        let ys = Axis::new(
            self.series.iter().flat_map(|s| {
                s.points.iter().enumerate().flat_map(move |(k, p)| {
                    let e = s.errors.as_ref().map_or(0.0, |e| e[k]);
                    [p.1 - e, p.1 + e]
                })
            }),
            self.log_y,
        );
        let px = |v: f64| xs.map(v).map(|u| LEFT + u * pw);
        let py = |v: f64| ys.map(v).map(|u| TOP + (1.0 - u) * ph);

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
            w = fmt(WIDTH),
            h = fmt(HEIGHT)
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            fmt(LEFT + pw / 2.0),
            escape(&self.title)
        );
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            fmt(LEFT),
            fmt(TOP),
            fmt(pw),
            fmt(ph)
        );
        for t in xs.ticks() {
            if let Some(x) = px(t) {
                let _ = writeln!(
                    svg,
                    r##"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="#ddd"/><text x="{x}" y="{}" text-anchor="middle">{}</text>"##,
                    fmt(TOP),
                    fmt(TOP + ph),
                    fmt(TOP + ph + 16.0),
                    tick_label(t),
                    x = fmt(x)
                );
            }
        }
        for t in ys.ticks() {
            if let Some(y) = py(t) {
                let _ = writeln!(
                    svg,
                    r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{}</text>"##,
                    fmt(LEFT),
                    fmt(LEFT + pw),
                    fmt(LEFT - 6.0),
                    fmt(y + 4.0),
                    tick_label(t),
                    y = fmt(y)
                );
            }
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            fmt(LEFT + pw / 2.0),
            fmt(HEIGHT - 14.0),
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="18" y="{y}" text-anchor="middle" transform="rotate(-90 18 {y})">{}</text>"#,
            escape(&self.y_label),
            y = fmt(TOP + ph / 2.0)
        );
        for (k, s) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let pts: Vec<(f64, f64)> = s.points.iter().filter_map(|&(x, y)| Some((px(x)?, py(y)?))).collect();
            if !s.markers && pts.len() > 1 {
                let path: Vec<String> = pts.iter().map(|(x, y)| format!("{},{}", fmt(*x), fmt(*y))).collect();
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    path.join(" ")
                );
            }
            for (i, &(x, y)) in s.points.iter().enumerate() {
                let (Some(cx), Some(cy)) = (px(x), py(y)) else { continue };
                if let Some(e) = s.errors.as_ref().map(|e| e[i]).filter(|e| *e > 0.0) {
                    if let (Some(a), Some(b)) = (py(y - e), py(y + e)) {
                        let _ = writeln!(
                            svg,
                            r#"<line x1="{cx}" y1="{}" x2="{cx}" y2="{}" stroke="{color}"/>"#,
                            fmt(a),
                            fmt(b),
                            cx = fmt(cx)
                        );
                    }
                }
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{}" cy="{}" r="{}" fill="{color}"/>"#,
                    fmt(cx),
                    fmt(cy),
                    if s.markers { "3" } else { "1.8" }
                );
            }
            let ly = TOP + 14.0 + 18.0 * k as f64;
            let lx = LEFT + pw + 14.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
                fmt(lx),
                fmt(lx + 20.0),
                fmt(lx + 26.0),
                fmt(ly + 4.0),
                escape(&s.label),
                y = fmt(ly)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

/// Rows of a result CSV keyed by column name.
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> RunResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let columns: Vec<String> = lines
            .next()
            .ok_or_else(|| RunError::format(path, "missing header"))?
            .split(',')
            .map(str::to_string)
            .collect();
        let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
        Ok(Self { columns, rows })
    }

    fn col(&self, name: &str, path: &Path) -> RunResult<usize> {
        self.columns.iter().position(|c| c == name).ok_or_else(|| RunError::format(path, format!("no column `{name}`")))
    }

    /// `(key, x, y)` triples from three columns, parsed as numbers.
    fn triples(&self, path: &Path, key: &str, x: &str, y: &str) -> RunResult<Vec<(String, f64, f64)>> {
        let (k, i, j) = (self.col(key, path)?, self.col(x, path)?, self.col(y, path)?);
        self.rows
            .iter()
            .map(|r| {
                let parse = |c: usize| r.get(c).and_then(|v| v.parse::<f64>().ok());
                match (r.get(k), parse(i), parse(j)) {
                    (Some(key), Some(a), Some(b)) => Ok((key.clone(), a, b)),
                    _ => Err(RunError::format(path, "malformed row")),
                }
            })
            .collect()
    }
}

/// Groups `(key, x, y)` by key, ordering keys numerically when possible.
fn group(rows: Vec<(String, f64, f64)>) -> BTreeMap<(u64, String), Vec<(f64, f64)>> {
    let mut out: BTreeMap<(u64, String), Vec<(f64, f64)>> = BTreeMap::new();
    for (k, x, y) in rows {
        let n = k.parse::<u64>().unwrap_or(u64::MAX);
        out.entry((n, k)).or_default().push((x, y));
    }
    out
}

fn per_size(groups: BTreeMap<(u64, String), Vec<(f64, f64)>>, markers: bool) -> Vec<Series> {
    groups
        .into_iter()
        .map(|((_, k), points)| Series { label: format!("L = {k}"), points, errors: None, markers })
        .collect()
}

/// Inputs each plot kind needs, by manifest output name.
const PLOTS: [(&str, &[&str]); 4] = [
    ("q_vs_t.svg", &["chaos_curve.csv"]),
    ("collapse.svg", &["chaos_curve.csv", "chaos.json"]),
    ("var_x.svg", &["stiffness.csv"]),
    ("droplet_hist.svg", &["droplet_hist.csv"]),
];

fn q_vs_t(dir: &Path) -> RunResult<Figure> {
    let path = dir.join("chaos_curve.csv");
    let rows = Table::read(&path)?.triples(&path, "L", "t", "mean")?;
    Ok(Figure {
        title: "Mean edge overlap along the interpolation".into(),
        x_label: "t".into(),
        y_label: "mean Q(t)".into(),
        log_x: true,
        log_y: false,
        series: per_size(group(rows), false),
    })
}

fn collapse(dir: &Path) -> RunResult<Option<Figure>> {
    let json_path = dir.join("chaos.json");
    let text = std::fs::read_to_string(&json_path).map_err(|e| RunError::io(&json_path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| RunError::format(&json_path, e.to_string()))?;
    let Some(xi) = value["data"]["collapse"]["xi"].as_f64() else {
        return Ok(None);
    };
    let path = dir.join("chaos_curve.csv");
    let rows = Table::read(&path)?.triples(&path, "L", "t", "mean")?;
    let scaled = rows
        .into_iter()
        .filter(|r| r.1 > 0.0)
        .map(|(k, t, q)| {
            let l: f64 = k.parse().unwrap_or(f64::NAN);
            (k, l * t.powf(1.0 / (2.0 * xi)), q)
        })
        .collect();
    Ok(Some(Figure {
        title: format!("Scaling collapse, xi = {}", fmt(xi)),
        x_label: "L t^(1/(2 xi))".into(),
        y_label: "mean Q".into(),
        log_x: true,
        log_y: false,
        series: per_size(group(scaled), true),
    }))
}

fn var_x(dir: &Path) -> RunResult<Figure> {
    let path = dir.join("stiffness.csv");
    let table = Table::read(&path)?;
    let rows = table.triples(&path, "L", "L", "var_x")?;
    let errs = table.triples(&path, "L", "L", "var_x_se")?;
    Ok(Figure {
        title: "Stiffness variance".into(),
        x_label: "L".into(),
        y_label: "Var(E_P - E_AP)".into(),
        log_x: true,
        log_y: true,
        series: vec![Series {
            label: "Var(X)".into(),
            points: rows.iter().map(|r| (r.1, r.2)).collect(),
            errors: Some(errs.iter().map(|r| r.2).collect()),
            markers: true,
        }],
    })
}

fn droplet_hist(dir: &Path) -> RunResult<Figure> {
    let path = dir.join("droplet_hist.csv");
    let table = Table::read(&path)?;
    let rows = table.triples(&path, "L", "size", "count")?;
    // normalize counts per size to frequencies
    let mut totals: BTreeMap<String, f64> = BTreeMap::new();
    for r in &rows {
        *totals.entry(r.0.clone()).or_default() += r.2;
    }
    let freq = rows.into_iter().map(|(k, x, c)| (k.clone(), x, c / totals[&k])).collect();
    Ok(Figure {
        title: "Critical droplet boundary sizes".into(),
        x_label: "|boundary|".into(),
        y_label: "frequency".into(),
        log_x: true,
        log_y: true,
        series: per_size(group(freq), false),
    })
}

/// Writes every plot whose inputs the manifest lists; errors when none can
/// be drawn or a listed input is missing on disk.
pub fn emit_plots(dir: &Path) -> RunResult<Vec<String>> {
    let manifest = RunManifest::read(dir)?;
    let listed = |name: &str| manifest.outputs.iter().any(|o| o == name);
    let mut missing: Vec<String> = Vec::new();
    for (_, inputs) in PLOTS {
        for name in inputs.iter().filter(|n| listed(n) && !dir.join(n).is_file()) {
            if !missing.iter().any(|m| m == name) {
                missing.push((*name).to_string());
            }
        }
    }
    if !missing.is_empty() {
        return Err(RunError::Missing { dir: dir.to_path_buf(), missing });
    }
    let mut written = Vec::new();
    for (name, inputs) in PLOTS {
        if !inputs.iter().all(|n| listed(n)) {
            continue;
        }
        let figure = match name {
            "q_vs_t.svg" => Some(q_vs_t(dir)?),
            "collapse.svg" => collapse(dir)?,
            "var_x.svg" => Some(var_x(dir)?),
            _ => Some(droplet_hist(dir)?),
        };
        if let Some(f) = figure {
            let path = dir.join(name);
            std::fs::write(&path, f.render()).map_err(|e| RunError::io(&path, e))?;
            written.push(name.to_string());
        }
    }
    if written.is_empty() {
        let wanted: Vec<String> =
            ["chaos_curve.csv", "chaos.json", "stiffness.csv", "droplet_hist.csv"].iter().map(|s| s.to_string()).collect();
        return Err(RunError::Missing { dir: dir.to_path_buf(), missing: wanted });
    }
    Ok(written)
}
