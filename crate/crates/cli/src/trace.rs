//! Versioned CSV traces.
//!
//! A trace file starts with `# trace-schema v1`, then `# key=value`
//! metadata lines, then an ordinary CSV table with the columns in
//! [`COLUMNS`].

use std::io::Write;
use std::path::Path;

use bqnpm::solvers::TraceRow;
use bqnpm::IterationTrace64;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const COLUMNS: [&str; 7] = [
    "iter",
    "cost",
    "snr_db",
    "elapsed_s",
    "inner_iters",
    "grad_evals",
    "full_grad_evals",
];

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    iter: usize,
    cost: f64,
    snr_db: f64,
    elapsed_s: f64,
    inner_iters: usize,
    grad_evals: usize,
    full_grad_evals: usize,
}

impl From<&TraceRow<f64>> for Row {
    fn from(r: &TraceRow<f64>) -> Self {
        Self {
            iter: r.iter,
            cost: r.cost,
            snr_db: r.snr_db,
            elapsed_s: r.elapsed_s,
            inner_iters: r.inner_iters,
            grad_evals: r.grad_evals,
            full_grad_evals: r.full_grad_evals,
        }
    }
}

impl From<Row> for TraceRow<f64> {
    fn from(r: Row) -> Self {
        Self {
            iter: r.iter,
            cost: r.cost,
            snr_db: r.snr_db,
            elapsed_s: r.elapsed_s,
            inner_iters: r.inner_iters,
            grad_evals: r.grad_evals,
            full_grad_evals: r.full_grad_evals,
        }
    }
}

/// Keep every `every`-th row plus the last one.
pub fn thin(trace: &IterationTrace64, every: usize) -> IterationTrace64 {
    let every = every.max(1);
    let last = trace.rows.last().map(|r| r.iter);
    IterationTrace64 {
        solver: trace.solver.clone(),
        rows: trace
            .rows
            .iter()
            .filter(|r| r.iter % every == 0 || Some(r.iter) == last)
            .cloned()
            .collect(),
        quasi_newton_start: trace.quasi_newton_start,
    }
}

pub fn write_trace<W: Write>(trace: &IterationTrace64, mut out: W) -> Result<(), CliError> {
    writeln!(out, "# trace-schema v{SCHEMA_VERSION}")?;
    writeln!(out, "# solver={}", trace.solver)?;
    if let Some(k) = trace.quasi_newton_start {
        writeln!(out, "# quasi_newton_start={k}")?;
    }
    writeln!(out, "{}", COLUMNS.join(","))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for r in &trace.rows {
        w.serialize(Row::from(r)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_trace(trace: &IterationTrace64, path: &Path) -> Result<(), CliError> {
    let file = std::fs::File::create(path)?;
    write_trace(trace, std::io::BufWriter::new(file))
}

pub fn parse_trace(text: &str) -> Result<IterationTrace64, CliError> {
    let bad = |m: String| CliError::Trace(m);
    let mut lines = text.lines();
    let version = lines
        .next()
        .and_then(|l| l.strip_prefix("# trace-schema v"))
        .ok_or_else(|| bad("missing `# trace-schema` line".into()))?;
    match version.trim().parse::<u32>() {
        Ok(SCHEMA_VERSION) => {}
        _ => return Err(bad(format!("unsupported trace schema `v{}`", version.trim()))),
    }
    let mut trace = IterationTrace64::default();
    let mut body = String::new();
    for line in lines {
        if let Some(meta) = line.strip_prefix('#') {
            if !body.is_empty() {
                return Err(bad("metadata after the table".into()));
            }
            match meta.trim().split_once('=') {
                Some(("solver", v)) => trace.solver = v.to_string(),
                Some(("quasi_newton_start", v)) => {
                    trace.quasi_newton_start =
                        Some(v.parse().map_err(|_| bad(format!("bad quasi_newton_start `{v}`")))?)
                }
                // Unknown metadata keys are informational.
                _ => {}
            }
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let header = reader.headers().map_err(csv_err)?;
    if header.iter().ne(COLUMNS) {
        return Err(bad(format!("unexpected columns `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    for row in reader.deserialize::<Row>() {
        trace.rows.push(row.map_err(csv_err)?.into());
    }
    Ok(trace)
}

pub fn load_trace(path: &Path) -> Result<IterationTrace64, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut trace = parse_trace(&text)?;
    if trace.solver.is_empty() {
        trace.solver = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(trace)
}

/// The trace table without the wall-time column, for reproducibility checks.
pub fn without_timing(text: &str) -> String {
    let col = COLUMNS.iter().position(|&c| c == "elapsed_s").unwrap();
    text.lines()
        .map(|line| {
            if line.starts_with('#') {
                line.to_string()
            } else {
                line.split(',')
                    .enumerate()
                    .filter(|&(i, _)| i != col)
                    .map(|(_, f)| f)
                    .collect::<Vec<_>>()
                    .join(",")
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Trace(e.to_string())
}
