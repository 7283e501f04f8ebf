//! Static SVG line plots of result tables.

use std::fmt::Write;

use crate::error::CliError;
use crate::table::ResultTable;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 60.0;
const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub x: String,
    /// Multiplier applied to x values and markers, e.g. 1e-6 for MHz.
    pub x_scale: f64,
    pub x_unit: Option<String>,
    pub y: Vec<String>,
    /// Axis label; the column unit is appended.
    pub y_label: String,
    /// Multiplier applied to y values, e.g. 100 for a percent axis.
    pub y_scale: f64,
    pub y_unit: Option<String>,
    pub y_range: Option<(f64, f64)>,
    /// Draw each series as a staircase.
    pub step: bool,
    /// Vertical markers as (x, label).
    pub markers: Vec<(f64, String)>,
}

impl PlotSpec {
    pub fn line(title: &str, x: &str, y: &[&str], y_label: &str) -> Self {
        Self {
            title: title.into(),
            x: x.into(),
            x_scale: 1.0,
            x_unit: None,
            y: y.iter().map(|s| s.to_string()).collect(),
            y_label: y_label.into(),
            y_scale: 1.0,
            y_unit: None,
            y_range: None,
            step: false,
            markers: Vec::new(),
        }
    }

    /// Efficiency columns drawn in percent on a fixed 0 to 100 axis.
    pub fn percent(mut self) -> Self {
        self.y_scale = 100.0;
        self.y_unit = Some("%".into());
        self.y_range = Some((0.0, 100.0));
        self
    }

    pub fn x_in(mut self, scale: f64, unit: &str) -> Self {
        self.x_scale = scale;
        self.x_unit = Some(unit.into());
        self
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Round tick spacing (1, 2 or 5 times a power of ten) giving about
/// `target` intervals.
fn tick_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(lo: f64, hi: f64) -> (Vec<f64>, usize) {
    let step = tick_step(hi - lo, 6.0);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    ((first..=last).map(|k| k as f64 * step).collect(), decimals)
}

fn padded_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return None;
    }
    if hi - lo < 1e-12 * lo.abs().max(1e-30) {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return Some((lo - pad, hi + pad));
    }
    let pad = 0.05 * (hi - lo);
    Some((lo - pad, hi + pad))
}

pub fn emit_svg(table: &ResultTable, spec: &PlotSpec) -> Result<String, CliError> {
    if table.is_empty() {
        return Err(CliError::Plot(format!("table `{}` has no rows", table.title)));
    }
    let missing = |c: &str| CliError::Plot(format!("table `{}` has no column `{c}`", table.title));
    let xi = table.column_index(&spec.x).ok_or_else(|| missing(&spec.x))?;
    let xs = table.numbers(&spec.x).expect("column exists");
    let mut series = Vec::new();
    for name in &spec.y {
        let ys = table.numbers(name).ok_or_else(|| missing(name))?;
        let pts: Vec<Option<(f64, f64)>> = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| match (x, y) {
                (Some(x), Some(y)) if x.is_finite() && y.is_finite() => Some((x * spec.x_scale, y * spec.y_scale)),
                _ => None,
            })
            .collect();
        series.push((name.clone(), pts));
    }
    let all = || series.iter().flat_map(|(_, p)| p.iter().flatten());
    let markers: Vec<(f64, &str)> = spec.markers.iter().map(|(m, l)| (m * spec.x_scale, l.as_str())).collect();
    let (x0, x1) = padded_range(all().map(|p| p.0).chain(markers.iter().map(|m| m.0)))
        .ok_or_else(|| CliError::Plot(format!("table `{}` has no finite points to plot", table.title)))?;
    let (y0, y1) = match spec.y_range {
        Some(r) => r,
        None => padded_range(all().map(|p| p.1)).expect("points exist"),
    };

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y.clamp(y0, y1) - y0) / (y1 - y0) * ph;

    let x_unit = spec.x_unit.clone().unwrap_or_else(|| table.columns[xi].unit.clone());
    let y_unit = spec
        .y_unit
        .clone()
        .unwrap_or_else(|| table.column_index(&spec.y[0]).map(|i| table.columns[i].unit.clone()).unwrap_or_default());
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(&spec.title)
    );
    let (xt, xd) = ticks(x0, x1);
    for t in xt {
        let x = sx(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{:.2}" stroke="#e0e0e0"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{t:.xd$}</text>"##,
            TOP + ph,
            TOP + ph + 18.0
        );
    }
    let (yt, yd) = ticks(y0, y1);
    for t in yt {
        let y = sy(t);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{t:.yd$}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>
<text x="{:.2}" y="{:.2}" text-anchor="middle">{} ({})</text>
<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{} ({})</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 16.0,
        escape(&spec.x),
        escape(&x_unit),
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&spec.y_label),
        escape(&y_unit)
    );

    for (m, label) in &markers {
        let x = sx(*m);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{TOP:.2}" x2="{x:.2}" y2="{:.2}" stroke="#555555" stroke-dasharray="4 3"/><text x="{:.2}" y="{:.2}" font-size="10" transform="rotate(90 {:.2} {:.2})">{}</text>"##,
            TOP + ph,
            x + 3.0,
            TOP + 6.0,
            x + 3.0,
            TOP + 6.0,
            escape(label)
        );
    }

    for (k, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        // Failed points split the line rather than joining across the gap.
        for run in pts.split(|p| p.is_none()) {
            let run: Vec<(f64, f64)> = run.iter().flatten().copied().collect();
            if run.is_empty() {
                continue;
            }
            let mut coords = Vec::with_capacity(run.len() * 2);
            for (i, &(x, y)) in run.iter().enumerate() {
                if spec.step && i > 0 {
                    coords.push(format!("{:.2},{:.2}", sx(x), sy(run[i - 1].1)));
                }
                coords.push(format!("{:.2},{:.2}", sx(x), sy(y)));
            }
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                coords.join(" ")
            );
        }
        let ly = TOP + 14.0 + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{ly:.2}" text-anchor="end" fill="{color}">{}</text>"#,
            LEFT + pw - 8.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ResultTable {
        let mut t = ResultTable::new("eff", &[("input_power", "dBm"), ("efficiency", "1")]);
        for p in [-20.0, -10.0, 0.0, 10.0] {
            t.push(vec![p.into(), (0.5 + p / 100.0).into()]);
        }
        t
    }

    #[test]
    fn efficiency_plot_is_one_polyline_on_a_percent_axis() {
        let spec = PlotSpec::line("PCE", "input_power", &["efficiency"], "efficiency").percent();
        let svg = emit_svg(&table(), &spec).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains(">100<") && svg.contains(">0<"));
        assert!(svg.contains("input_power (dBm)"));
        assert!(svg.contains("efficiency (%)"));
        assert!(!svg.contains("href"));
    }

    #[test]
    fn step_plot_with_markers() {
        let mut spec = PlotSpec::line("cold start", "input_power", &["efficiency"], "v");
        spec.step = true;
        spec.markers = vec![(-5.0, "wake_up".into())];
        let svg = emit_svg(&table(), &spec).unwrap();
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("wake_up"));
        let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split(' ').count(), 7);
    }

    #[test]
    fn empty_table_and_missing_columns_are_errors() {
        let empty = ResultTable::new("e", &[("a", "1")]);
        assert!(emit_svg(&empty, &PlotSpec::line("t", "a", &["a"], "a")).is_err());
        assert!(emit_svg(&table(), &PlotSpec::line("t", "input_power", &["nope"], "a")).is_err());
    }

    #[test]
    fn nice_ticks() {
        assert_eq!(tick_step(100.0, 6.0), 20.0);
        assert_eq!(tick_step(1.9e9, 6.0), 2e8);
        let (t, d) = ticks(0.0, 100.0);
        assert_eq!(t.first(), Some(&0.0));
        assert_eq!(t.last(), Some(&100.0));
        assert_eq!(d, 0);
    }
}
