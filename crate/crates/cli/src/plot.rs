//! Static SVG line plots of iteration traces.
//!
//! Output depends only on the trace values, so identical traces give
//! byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bqnpm::IterationTrace64;

use crate::CliError;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 34.0;
const BOTTOM: f64 = 52.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XAxis {
    Iteration,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YAxis {
    /// Drawn on a log scale.
    Cost,
    Snr,
}

/// File stems of the four standard plots, in [`emit_plots`] order.
pub const PLOTS: [(&str, XAxis, YAxis); 4] = [
    ("cost_iter", XAxis::Iteration, YAxis::Cost),
    ("cost_time", XAxis::Time, YAxis::Cost),
    ("snr_iter", XAxis::Iteration, YAxis::Snr),
    ("snr_time", XAxis::Time, YAxis::Snr),
];

/// Write the four standard plots into `outdir`; returns their paths.
pub fn emit_plots(traces: &[IterationTrace64], outdir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if traces.is_empty() || traces.iter().all(|t| t.rows.is_empty()) {
        return Err(CliError::Plot("no trace rows to plot".into()));
    }
    std::fs::create_dir_all(outdir)?;
    PLOTS
        .iter()
        .map(|&(stem, x, y)| {
            let path = outdir.join(format!("{stem}.svg"));
            std::fs::write(&path, render(traces, x, y))?;
            Ok(path)
        })
        .collect()
}

struct Scale {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Scale {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Option<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !(lo.is_finite() && hi.is_finite()) {
            return None;
        }
        if log {
            lo = lo.floor();
            hi = hi.ceil();
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        Some(Self { lo, hi, log })
    }

    fn unit(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    /// Tick positions in data units.
    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let stride = ((self.hi - self.lo) / 8.0).ceil().max(1.0) as i32;
            return (self.lo as i32..=self.hi as i32)
                .step_by(stride as usize)
                .map(|e| 10f64.powi(e))
                .collect();
        }
        let raw = (self.hi - self.lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|&s| s >= raw)
            .unwrap_or(10.0 * mag);
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        (first..=last).map(|i| i as f64 * step).collect()
    }
}

fn label(v: f64, log: bool) -> String {
    if log {
        format!("1e{}", v.log10().round() as i32)
    } else if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn points(trace: &IterationTrace64, x: XAxis, y: YAxis) -> Vec<(f64, f64)> {
    trace
        .rows
        .iter()
        .map(|r| {
            let xv = match x {
                XAxis::Iteration => r.iter as f64,
                XAxis::Time => r.elapsed_s,
            };
            let yv = match y {
                YAxis::Cost => r.cost,
                YAxis::Snr => r.snr_db,
            };
            (xv, yv)
        })
        .filter(|&(a, b)| a.is_finite() && b.is_finite() && (y != YAxis::Cost || b > 0.0))
        .collect()
}

/// One plot as an SVG document.
pub fn render(traces: &[IterationTrace64], x: XAxis, y: YAxis) -> String {
    let series: Vec<Vec<(f64, f64)>> = traces.iter().map(|t| points(t, x, y)).collect();
    let all = || series.iter().flatten();
    let xs = Scale::fit(all().map(|p| p.0), false);
    let ys = Scale::fit(all().map(|p| p.1), y == YAxis::Cost);
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let xlabel = match x {
        XAxis::Iteration => "iteration",
        XAxis::Time => "time (s)",
    };
    let ylabel = match y {
        YAxis::Cost => "full cost",
        YAxis::Snr => "SNR (dB)",
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="13">{ylabel} vs {xlabel}</text>"#,
        LEFT + pw / 2.0
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xlabel}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{ylabel}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    match (&xs, &ys) {
        (Some(xs), Some(ys)) => {
            let px = |v: f64| LEFT + xs.unit(v) * pw;
            let py = |v: f64| TOP + (1.0 - ys.unit(v)) * ph;
            for t in xs.ticks() {
                let _ = writeln!(
                    s,
                    r##"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="#ddd"/><text x="{0:.2}" y="{3:.1}" text-anchor="middle">{4}</text>"##,
                    px(t),
                    TOP,
                    TOP + ph,
                    TOP + ph + 16.0,
                    label(t, false)
                );
            }
            for t in ys.ticks() {
                let _ = writeln!(
                    s,
                    r##"<line x1="{0}" y1="{1:.2}" x2="{2}" y2="{1:.2}" stroke="#ddd"/><text x="{3:.1}" y="{4:.2}" text-anchor="end">{5}</text>"##,
                    LEFT,
                    py(t),
                    LEFT + pw,
                    LEFT - 6.0,
                    py(t) + 4.0,
                    label(t, ys.log)
                );
            }
            for (i, pts) in series.iter().enumerate() {
                if pts.is_empty() {
                    continue;
                }
                let coords: Vec<String> = pts
                    .iter()
                    .map(|&(a, b)| format!("{:.2},{:.2}", px(a), py(b)))
                    .collect();
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                    PALETTE[i % PALETTE.len()],
                    coords.join(" ")
                );
            }
        }
        _ => {
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">no data</text>"#,
                LEFT + pw / 2.0,
                TOP + ph / 2.0
            );
        }
    }

    for (i, t) in traces.iter().enumerate() {
        let ly = TOP + 12.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            PALETTE[i % PALETTE.len()],
            lx + 26.0,
            ly + 4.0,
            escape(&t.solver)
        );
    }
    s.push_str("</svg>\n");
    s
}
