//! Experiment driver: build the synthetic problem, run every configured
//! solver from the same initial guess, and write the artifacts.
//!
//! Output directory layout:
//!
//! ```text
//! config.toml      resolved configuration
//! truth.vol        reconstruction target
//! <label>.csv      trace per solver
//! <label>.vol      final image per solver
//! summary.txt      one line per solver
//! *.svg            cost / SNR plots
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bqnpm::forward::{make_linear_views, make_nonlinear_views, make_phantom};
use bqnpm::solvers::{self, Problem};
use bqnpm::{Grid, IterationTrace64, Phantom64, ViewProblem64};

use crate::config::{ExperimentConfig, ModelKind};
use crate::{plot, trace, volume, CliError};

/// Everything the solvers share.
pub struct Setup {
    pub grid: Grid,
    pub phantom: Phantom64,
    pub truth: Vec<f64>,
    pub views: Vec<ViewProblem64>,
}

impl Setup {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let config_err = |e: bqnpm::Error| CliError::Config(e.to_string());
        let grid = cfg.grid()?;
        let phantom = make_phantom(
            &grid,
            cfg.phantom_kind(),
            cfg.phantom.eta_m,
            cfg.phantom.eta_max,
            cfg.phantom_seed(),
        )
        .map_err(config_err)?;
        let truth = phantom.contrast();
        let spec = cfg.view_spec();
        let views = match cfg.forward.model {
            ModelKind::Linear => make_linear_views(&grid, &spec, &truth),
            ModelKind::Nonlinear => make_nonlinear_views(&grid, &spec, &truth),
        }
        .map_err(config_err)?;
        Ok(Self {
            grid,
            phantom,
            truth,
            views,
        })
    }

    pub fn problem(&self) -> Problem<'_, f64> {
        Problem {
            grid: &self.grid,
            views: &self.views,
            reference: Some(&self.truth),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverRun {
    pub label: String,
    /// Full-resolution trace (the CSV may be thinned).
    pub trace: IterationTrace64,
    pub x: Vec<f64>,
    pub step: f64,
    pub alphas: Vec<f64>,
    pub failure: Option<String>,
    pub trace_path: PathBuf,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub outdir: PathBuf,
    pub runs: Vec<SolverRun>,
    pub plots: Vec<PathBuf>,
}

impl ExperimentReport {
    pub fn run(&self, label: &str) -> Option<&SolverRun> {
        self.runs.iter().find(|r| r.label == label)
    }

    pub fn failed(&self) -> impl Iterator<Item = &SolverRun> {
        self.runs.iter().filter(|r| r.failure.is_some())
    }
}

/// Run every solver, write all artifacts, and report. A solver that stops
/// early still gets its partial trace written; the error is returned after
/// the remaining solvers have run.
pub fn run_experiment(cfg: &ExperimentConfig, outdir: &Path) -> Result<ExperimentReport, CliError> {
    let report = run_solvers(cfg, outdir, cfg.plots)?;
    if let Some(bad) = report.failed().next() {
        return Err(CliError::Solver {
            solver: bad.label.clone(),
            message: bad.failure.clone().unwrap_or_default(),
        });
    }
    Ok(report)
}

fn run_solvers(cfg: &ExperimentConfig, outdir: &Path, plots: bool) -> Result<ExperimentReport, CliError> {
    cfg.validate()?;
    std::fs::create_dir_all(outdir)?;
    std::fs::write(outdir.join("config.toml"), cfg.to_toml())?;
    let setup = Setup::build(cfg)?;
    volume::dump_volume(&setup.grid, &setup.truth, &outdir.join("truth.vol"))?;
    log::info!(
        "grid {:?}, {} views, {} unknowns",
        setup.grid.dims(),
        setup.views.len(),
        setup.grid.len()
    );

    let bounds = cfg.bounds()?;
    let x0 = solvers::initial_guess(&setup.views, &bounds);
    let mut runs = Vec::new();
    for spec in &cfg.solvers {
        let label = spec.label();
        let sc = cfg.solver_config(spec)?;
        log::info!("running {label}");
        let run = match solvers::run(spec.kind.into(), setup.problem(), &x0, &sc) {
            Ok(out) => SolverRun {
                label: label.clone(),
                failure: out.failure.as_ref().map(|e| e.to_string()),
                trace: out.trace,
                x: out.x,
                step: out.step,
                alphas: out.alphas,
                trace_path: outdir.join(format!("{label}.csv")),
            },
            Err(e) => SolverRun {
                label: label.clone(),
                trace: IterationTrace64 {
                    solver: label.clone(),
                    ..Default::default()
                },
                x: x0.clone(),
                step: f64::NAN,
                alphas: Vec::new(),
                failure: Some(e.to_string()),
                trace_path: outdir.join(format!("{label}.csv")),
            },
        };
        let mut thinned = trace::thin(&run.trace, cfg.trace_every);
        thinned.solver = label.clone();
        trace::save_trace(&thinned, &run.trace_path)?;
        volume::dump_volume(&setup.grid, &run.x, &outdir.join(format!("{label}.vol")))?;
        if let Some(f) = &run.failure {
            log::error!("{label} stopped early: {f}");
        } else if let Some(last) = run.trace.rows.last() {
            log::info!("{label}: cost {:.6e}, snr {:.2} dB", last.cost, last.snr_db);
        }
        runs.push(run);
    }

    std::fs::write(outdir.join("summary.txt"), summary(&runs))?;
    let plots = if plots {
        let traces: Vec<IterationTrace64> = runs.iter().map(labelled).collect();
        plot::emit_plots(&traces, outdir)?
    } else {
        Vec::new()
    };
    Ok(ExperimentReport {
        outdir: outdir.to_path_buf(),
        runs,
        plots,
    })
}

fn labelled(run: &SolverRun) -> IterationTrace64 {
    IterationTrace64 {
        solver: run.label.clone(),
        ..run.trace.clone()
    }
}

/// Fixed-width table, one row per solver. The last column flags a cost
/// increase at the first curvature-based iteration.
pub fn summary(runs: &[SolverRun]) -> String {
    let mut s = format!(
        "{:<24} {:>6} {:>14} {:>10} {:>10} {:>11} {:>10}  {}\n",
        "solver", "iters", "final_cost", "snr_db", "elapsed_s", "grad_evals", "full_grads", "cost_bump"
    );
    for r in runs {
        let last = r.trace.rows.last();
        let bump = match (r.trace.quasi_newton_start, r.trace.cost_bump()) {
            (Some(k), Some(b)) => format!("+{b:.3e} at k={k}"),
            (Some(k), None) => format!("none at k={k}"),
            _ => "-".to_string(),
        };
        let _ = writeln!(
            s,
            "{:<24} {:>6} {:>14.6e} {:>10.3} {:>10.3} {:>11} {:>10}  {}{}",
            r.label,
            last.map_or(0, |l| l.iter),
            last.map_or(f64::NAN, |l| l.cost),
            last.map_or(f64::NAN, |l| l.snr_db),
            last.map_or(0.0, |l| l.elapsed_s),
            last.map_or(0, |l| l.grad_evals),
            last.map_or(0, |l| l.full_grad_evals),
            bump,
            r.failure.as_ref().map(|f| format!("  FAILED: {f}")).unwrap_or_default()
        );
    }
    s
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub param: String,
    pub points: Vec<(String, ExperimentReport)>,
}

/// One experiment per value of `param`, each in `outdir/<param>=<value>`,
/// plus combined plots and summary in `outdir`.
pub fn sweep(cfg: &ExperimentConfig, param: &str, values: &[String], outdir: &Path) -> Result<SweepReport, CliError> {
    let mut points = Vec::new();
    for value in values {
        let mut c = cfg.clone();
        c.apply_param(param, value)?;
        for s in &mut c.solvers {
            s.label = Some(format!("{} {param}={value}", s.label()));
        }
        c.validate()?;
        let dir = outdir.join(format!("{param}={value}"));
        let report = run_solvers(&c, &dir, false)?;
        points.push((value.clone(), report));
    }
    let runs: Vec<SolverRun> = points.iter().flat_map(|(_, r)| r.runs.iter().cloned()).collect();
    std::fs::write(outdir.join("summary.txt"), summary(&runs))?;
    if cfg.plots {
        let traces: Vec<IterationTrace64> = runs.iter().map(labelled).collect();
        plot::emit_plots(&traces, outdir)?;
    }
    if let Some(bad) = runs.iter().find(|r| r.failure.is_some()) {
        return Err(CliError::Solver {
            solver: bad.label.clone(),
            message: bad.failure.clone().unwrap_or_default(),
        });
    }
    Ok(SweepReport {
        param: param.to_string(),
        points,
    })
}

/// Re-plot existing trace files.
pub fn plot_traces(paths: &[PathBuf], outdir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let traces = paths
        .iter()
        .map(|p| trace::load_trace(p))
        .collect::<Result<Vec<_>, _>>()?;
    plot::emit_plots(&traces, outdir)
}
