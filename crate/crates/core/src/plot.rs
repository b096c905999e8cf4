//! Standalone SVG plots of result CSVs. Output depends only on the input
//! text, so identical CSVs give identical bytes.

use std::fmt::Write as _;

use crate::csv::{parse_f64, Table};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `upper` (and `lower`, bound columns) against `n` on log-log axes.
    LogLog,
    /// One vertical segment `(lower, upper)` per row, bound columns overlaid.
    Bracket,
}

impl std::str::FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "loglog" => Ok(PlotKind::LogLog),
            "bracket" => Ok(PlotKind::Bracket),
            other => Err(Error::Parse(format!("unknown plot kind `{other}`"))),
        }
    }
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 5] = ["#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"];

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x.log10() - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y.log10() - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn decade_range(values: impl Iterator<Item = f64>, fallback: (f64, f64)) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| *v > 0.0 && v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return fallback;
    }
    let a = lo.log10().floor();
    let b = hi.log10().ceil();
    if a == b {
        (a, a + 1.0)
    } else {
        (a, b)
    }
}

fn num(s: &str) -> f64 {
    parse_f64(s).unwrap_or(f64::NAN)
}

/// Renders `csv` as an SVG document.
///
/// Rows whose `n` is not numeric (such as a trailing fit row) are skipped.
/// Columns whose names start with `bound` or `budget` are drawn as curves.
pub fn emit_plot(csv: &str, kind: PlotKind) -> Result<String> {
    let table = Table::parse(csv)?;
    let n_col = table.column("n")?;
    let up_col = table.column("upper")?;
    let lo_col = match kind {
        PlotKind::Bracket => Some(table.column("lower")?),
        PlotKind::LogLog => table.column("lower").ok(),
    };
    let bound_cols: Vec<usize> = table
        .header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("bound") || h.starts_with("budget"))
        .map(|(i, _)| i)
        .collect();
    let rows: Vec<&Vec<String>> =
        table.rows.iter().filter(|r| r.get(n_col).map(|v| num(v).is_finite()).unwrap_or(false)).collect();
    let get = |r: &Vec<String>, c: usize| r.get(c).map(|v| num(v)).unwrap_or(f64::NAN);
    let xs: Vec<f64> = rows.iter().map(|r| get(r, n_col)).collect();
    let mut ys: Vec<f64> = rows.iter().map(|r| get(r, up_col)).collect();
    if let Some(c) = lo_col {
        ys.extend(rows.iter().map(|r| get(r, c)));
    }
    for &c in &bound_cols {
        ys.extend(rows.iter().map(|r| get(r, c)).filter(|v| *v < 1e3));
    }
    let (x0, x1) = decade_range(xs.iter().copied(), (0.0, 1.0));
    let (y0, y1) = decade_range(ys.iter().copied(), (-3.0, 0.0));
    let ax = Axes { x0, x1, y0, y1 };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    // frame and decade ticks
    let _ = writeln!(
        s,
        r#"<rect class="frame" x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    for e in (x0 as i32)..=(x1 as i32) {
        let x = ax.px(10f64.powi(e));
        let _ = writeln!(
            s,
            r#"<line class="tick" x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#,
            H - BOTTOM,
            H - BOTTOM + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{}" font-size="12" text-anchor="middle">1e{e}</text>"#,
            H - BOTTOM + 20.0
        );
    }
    for e in (y0 as i32)..=(y1 as i32) {
        let y = ax.py(10f64.powi(e));
        let _ = writeln!(
            s,
            r#"<line class="tick" x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#,
            LEFT - 5.0
        );
        let _ =
            writeln!(s, r#"<text x="{}" y="{:.2}" font-size="12" text-anchor="end">1e{e}</text>"#, LEFT - 8.0, y + 4.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">n</text>"#,
        LEFT + (W - LEFT - RIGHT) / 2.0,
        H - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">discrepancy</text>"#,
        TOP + (H - TOP - BOTTOM) / 2.0,
        TOP + (H - TOP - BOTTOM) / 2.0
    );

    let finite = |v: f64| v > 0.0 && v.is_finite();
    let polyline = |s: &mut String, col: usize, class: &str, colour: &str| {
        let pts: Vec<String> = rows
            .iter()
            .map(|r| (get(r, n_col), get(r, col)))
            .filter(|(x, y)| finite(*x) && finite(*y) && y.log10() <= y1)
            .map(|(x, y)| format!("{:.2},{:.2}", ax.px(x), ax.py(y)))
            .collect();
        if !pts.is_empty() {
            let _ =
                writeln!(s, r#"<polyline class="{class}" points="{}" fill="none" stroke="{colour}"/>"#, pts.join(" "));
        }
    };
    match kind {
        PlotKind::LogLog => {
            polyline(&mut s, up_col, "upper", "#1f77b4");
            if let Some(c) = lo_col {
                polyline(&mut s, c, "lower", "#ff7f0e");
            }
        }
        PlotKind::Bracket => {
            let lo_col = lo_col.expect("checked above");
            for r in &rows {
                let (x, lo, hi) = (get(r, n_col), get(r, lo_col), get(r, up_col));
                let yl = if finite(lo) { ax.py(lo) } else { H - BOTTOM };
                let yh = if finite(hi) { ax.py(hi) } else { H - BOTTOM };
                let _ = writeln!(
                    s,
                    r##"<line class="bracket" x1="{0:.2}" y1="{yl:.2}" x2="{0:.2}" y2="{yh:.2}" stroke="#1f77b4" stroke-width="2"/>"##,
                    ax.px(x)
                );
            }
        }
    }
    for (i, &c) in bound_cols.iter().enumerate() {
        polyline(&mut s, c, &format!("bound {}", table.header[c]), PALETTE[i % PALETTE.len()]);
    }
    s.push_str("</svg>\n");
    Ok(s)
}
