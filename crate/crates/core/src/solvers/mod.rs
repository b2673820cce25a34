//! Outer reconstruction loops: the mini-batch quasi-Newton proximal method
//! and the two stochastic baselines it is compared with.

mod aspm;
mod bqnpm;
mod sqnpm;

use std::time::{Duration, Instant};

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dual_tv::{self, DualTvProblem, DualTvSettings};
use crate::error::{check_len, Error, Result};
use crate::forward::{backprojection, full_cost, gauss_newton_lipschitz, snr_db, subset_gradient, ViewProblem};
use crate::grid::Grid;
use crate::sr1::{Sr1Estimate, DEFAULT_GAMMA};
use crate::tv::{DualField, TvMode};
use crate::wpm::{BoxSet, DiagPlusLowRank, MetricSign};
use crate::Scalar;

pub use aspm::aspm_run;
pub use bqnpm::{bqnpm_run, Bqnpm, SubsetSlot};
pub use sqnpm::{sqnpm_run, svrg_direction};

/// Subset used by term `t` at outer iteration `k`, all 1-based:
/// `mod(k - 1 - t, subsets) + 1` with the nonnegative remainder.
pub fn kappa(k: usize, t: usize, subsets: usize) -> Result<usize> {
    if subsets == 0 || t == 0 || t > subsets {
        return Err(Error::TermOutOfRange { term: t, subsets });
    }
    let r = (k as i64 - 1 - t as i64).rem_euclid(subsets as i64);
    Ok(r as usize + 1)
}

/// 0-based subset read at iteration `k` (that is, `kappa(k, 1) - 1`).
fn current_subset(k: usize, subsets: usize) -> usize {
    (k + 2 * subsets - 2) % subsets
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PartitionStrategy {
    /// Round-robin interleaving, so each subset spans the view range.
    #[default]
    Equispaced,
    /// Consecutive blocks.
    Contiguous,
}

/// Splits views `0..views` into `subsets` disjoint, nonempty index sets.
pub fn partition_views(views: usize, subsets: usize, strategy: PartitionStrategy) -> Result<Vec<Vec<usize>>> {
    if subsets == 0 || subsets > views {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= subsets <= views, got {subsets} subsets for {views} views"
        )));
    }
    Ok(match strategy {
        PartitionStrategy::Equispaced => (0..subsets)
            .map(|t| (t..views).step_by(subsets).collect())
            .collect(),
        PartitionStrategy::Contiguous => {
            let (base, extra) = (views / subsets, views % subsets);
            let mut start = 0;
            (0..subsets)
                .map(|t| {
                    let len = base + usize::from(t < extra);
                    let block = (start..start + len).collect();
                    start += len;
                    block
                })
                .collect()
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SubsetOrder {
    #[default]
    Cyclic,
    /// A fresh seeded permutation of the subsets every epoch.
    Shuffled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HessianMode {
    #[default]
    Sr1,
    /// Every estimate is `alpha_t I`; turns the method into a first-order one.
    FixedDiagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Aspm,
    Sqnpm,
    Bqnpm,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Aspm => "aspm",
            SolverKind::Sqnpm => "sqnpm",
            SolverKind::Bqnpm => "bqnpm",
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aspm" => Ok(SolverKind::Aspm),
            "sqnpm" => Ok(SolverKind::Sqnpm),
            "bqnpm" => Ok(SolverKind::Bqnpm),
            other => Err(Error::InvalidParameter(format!("unknown solver `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    pub subsets: usize,
    pub partition: PartitionStrategy,
    /// Step size `a_k`; `None` picks `step_scale` for the quasi-Newton
    /// methods and `step_scale / max_t alpha_t` for ASPM.
    pub step: Option<T>,
    pub step_scale: T,
    pub lambda: T,
    pub gamma: T,
    pub max_outer: usize,
    pub dual: DualTvSettings<T>,
    pub mode: TvMode,
    pub bounds: BoxSet<T>,
    pub hessian: HessianMode,
    /// FISTA momentum in ASPM.
    pub momentum: bool,
    pub order: SubsetOrder,
    pub seed: u64,
    /// Power iterations for the per-subset curvature bounds `alpha_t`.
    pub lipschitz_iters: usize,
    /// Use this value for every `alpha_t` instead of estimating it.
    pub alpha: Option<T>,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            subsets: 4,
            partition: PartitionStrategy::Equispaced,
            step: None,
            step_scale: T::one(),
            lambda: T::lit(1e-3),
            gamma: T::lit(DEFAULT_GAMMA),
            max_outer: 100,
            dual: DualTvSettings::default(),
            mode: TvMode::Isotropic,
            bounds: BoxSet::nonnegative(),
            hessian: HessianMode::Sr1,
            momentum: true,
            order: SubsetOrder::Cyclic,
            seed: 0,
            lipschitz_iters: 50,
            alpha: None,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self, views: usize) -> Result<()> {
        if self.subsets == 0 || self.subsets > views {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= subsets <= views, got {} subsets for {views} views",
                self.subsets
            )));
        }
        if let Some(a) = self.step {
            if !(a > T::zero() && a.is_finite()) {
                return Err(Error::InvalidParameter(format!("step must be positive, got {a}")));
            }
        }
        if !(self.step_scale > T::zero() && self.step_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("step_scale must be positive, got {}", self.step_scale)));
        }
        if !(self.lambda >= T::zero() && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.gamma > T::zero() && self.gamma < T::one()) {
            return Err(Error::InvalidParameter(format!("gamma must lie in (0,1), got {}", self.gamma)));
        }
        if let Some(a) = self.alpha {
            if !(a > T::zero() && a.is_finite()) {
                return Err(Error::InvalidParameter(format!("alpha must be positive, got {a}")));
            }
        }
        Ok(())
    }
}

/// What the outer loops reconstruct: views on a grid, plus an optional
/// reference image for the SNR column.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a, T: Scalar> {
    pub grid: &'a Grid,
    pub views: &'a [ViewProblem<T>],
    pub reference: Option<&'a [T]>,
}

/// Default starting point: mean backprojection clamped to the box.
pub fn initial_guess<T: Scalar>(views: &[ViewProblem<T>], bounds: &BoxSet<T>) -> Vec<T> {
    backprojection(views)
        .into_iter()
        .enumerate()
        .map(|(i, v)| bounds.clamp(i, v))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow<T> {
    pub iter: usize,
    /// Full cost over every view, including `lambda TV`.
    pub cost: T,
    /// `NaN` when no reference image is known.
    pub snr_db: T,
    pub elapsed_s: f64,
    /// Dual iterations spent on this outer step.
    pub inner_iters: usize,
    /// Cumulative single-view gradient evaluations.
    pub grad_evals: usize,
    /// Cumulative full-gradient (all views at one point) evaluations.
    pub full_grad_evals: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationTrace<T> {
    pub solver: String,
    pub rows: Vec<TraceRow<T>>,
    /// First iteration that used curvature pairs, if any.
    pub quasi_newton_start: Option<usize>,
}

impl<T: Scalar> IterationTrace<T> {
    pub fn final_cost(&self) -> Option<T> {
        self.rows.last().map(|r| r.cost)
    }

    /// First iteration whose cost is at most `target`.
    pub fn first_reaching(&self, target: T) -> Option<usize> {
        self.rows.iter().find(|r| r.cost <= target).map(|r| r.iter)
    }

    /// Cost increase at the first curvature-based step, when there is one.
    pub fn cost_bump(&self) -> Option<T> {
        let k = self.quasi_newton_start?;
        let before = self.rows.iter().find(|r| r.iter + 1 == k)?;
        let at = self.rows.iter().find(|r| r.iter == k)?;
        (at.cost > before.cost).then(|| at.cost - before.cost)
    }
}

#[derive(Debug, Clone)]
pub struct SolverOutput<T> {
    pub x: Vec<T>,
    pub trace: IterationTrace<T>,
    /// Curvature bounds used for each subset.
    pub alphas: Vec<T>,
    pub step: T,
    /// Cumulative subset-gradient evaluations, excluding full gradients.
    pub subset_grad_evals: usize,
    /// Error that stopped the run early; the trace holds every completed
    /// iteration.
    pub failure: Option<Error>,
}

/// `sum_t B_t` as `tau I + U U^T` with the zero columns dropped.
pub fn aggregate_metric<'a, T: Scalar>(
    estimates: impl IntoIterator<Item = &'a Sr1Estimate<T>>,
) -> Result<DiagPlusLowRank<T>> {
    let mut tau = T::zero();
    let mut columns = Vec::new();
    let mut dim = None;
    for e in estimates {
        if *dim.get_or_insert(e.u.len()) != e.u.len() {
            return Err(Error::ShapeMismatch {
                expected: dim.unwrap_or(0),
                actual: e.u.len(),
            });
        }
        tau = tau + e.tau;
        if e.has_correction() {
            columns.push(e.u.clone());
        }
    }
    let dim = dim.ok_or_else(|| Error::InvalidParameter("no estimates to aggregate".into()))?;
    DiagPlusLowRank::new(dim, tau, columns, MetricSign::Plus)
}

/// `v = W^{-1} sum_t (B_t x_t - a g_t)`, the center of the aggregated model.
pub fn compute_v_k<'a, T: Scalar>(
    terms: impl IntoIterator<Item = (&'a Sr1Estimate<T>, &'a [T], &'a [T])>,
    metric: &DiagPlusLowRank<T>,
    step: T,
) -> Result<Vec<T>> {
    let mut acc = vec![T::zero(); metric.dim()];
    for (b, x, g) in terms {
        check_len(acc.len(), x.len())?;
        check_len(acc.len(), g.len())?;
        for ((a, bx), &gi) in acc.iter_mut().zip(b.apply(x)).zip(g) {
            *a = *a + bx - step * gi;
        }
    }
    metric.apply_inverse(&acc)
}

/// Subset visited at iteration `k` under `order`; the cyclic order matches
/// the one the quasi-Newton method reads its slots in.
pub(crate) struct SubsetSchedule {
    order: SubsetOrder,
    subsets: usize,
    rng: ChaCha8Rng,
    epoch: Option<usize>,
    perm: Vec<usize>,
}

impl SubsetSchedule {
    pub fn new(order: SubsetOrder, subsets: usize, seed: u64) -> Self {
        Self {
            order,
            subsets,
            rng: ChaCha8Rng::seed_from_u64(seed),
            epoch: None,
            perm: (0..subsets).collect(),
        }
    }

    pub fn subset(&mut self, k: usize) -> usize {
        match self.order {
            SubsetOrder::Cyclic => current_subset(k, self.subsets),
            SubsetOrder::Shuffled => {
                let epoch = (k - 1) / self.subsets;
                if self.epoch != Some(epoch) {
                    self.perm.shuffle(&mut self.rng);
                    self.epoch = Some(epoch);
                }
                self.perm[(k - 1) % self.subsets]
            }
        }
    }
}

/// Shared machinery of the outer loops: gradients with counters, the
/// warm-started TV prox, timing, and tracing.
pub(crate) struct Engine<'a, T: Scalar> {
    pub problem: Problem<'a, T>,
    pub config: &'a SolverConfig<T>,
    pub subsets: Vec<Vec<usize>>,
    pub alphas: Vec<T>,
    /// Curvature bound of the full objective, for methods that use it.
    pub alpha_full: T,
    dual: DualField<T>,
    clock: Duration,
    grad_evals: usize,
    full_grad_evals: usize,
    subset_grad_evals: usize,
    trace: IterationTrace<T>,
}

impl<'a, T: Scalar> Engine<'a, T> {
    pub fn new(problem: Problem<'a, T>, config: &'a SolverConfig<T>, x0: &[T], name: &str) -> Result<Self> {
        config.validate(problem.views.len())?;
        check_len(problem.grid.len(), x0.len())?;
        config.bounds.check_dim(x0.len())?;
        if let Some(r) = problem.reference {
            check_len(x0.len(), r.len())?;
        }
        for v in problem.views {
            check_len(x0.len(), v.input_len())?;
        }
        let start = Instant::now();
        let subsets = partition_views(problem.views.len(), config.subsets, config.partition)?;
        let estimate = |views: &[usize], seed: u64| match config.alpha {
            Some(a) => a,
            None => {
                let a = gauss_newton_lipschitz(problem.views, views, x0, config.lipschitz_iters, seed);
                if a > T::zero() && a.is_finite() {
                    a
                } else {
                    T::one()
                }
            }
        };
        let alphas = subsets
            .iter()
            .enumerate()
            .map(|(t, s)| estimate(s, config.seed ^ t as u64))
            .collect();
        let all: Vec<usize> = (0..problem.views.len()).collect();
        let alpha_full = estimate(&all, config.seed);
        let mut engine = Self {
            problem,
            config,
            subsets,
            alphas,
            alpha_full,
            dual: DualField::zeros(problem.grid),
            clock: start.elapsed(),
            grad_evals: 0,
            full_grad_evals: 0,
            subset_grad_evals: 0,
            trace: IterationTrace {
                solver: name.to_string(),
                ..Default::default()
            },
        };
        engine.record(0, x0, 0)?;
        Ok(engine)
    }

    pub fn subset_count(&self) -> usize {
        self.subsets.len()
    }

    pub fn max_alpha(&self) -> T {
        self.alphas.iter().copied().fold(T::zero(), T::max)
    }

    /// `grad F_t(x)`, the mean over subset `t`.
    pub fn subset_gradient(&mut self, t: usize, x: &[T]) -> Vec<T> {
        self.grad_evals += self.subsets[t].len();
        self.subset_grad_evals += 1;
        subset_gradient(self.problem.views, &self.subsets[t], x)
    }

    /// Per-subset gradients at one point, counted as one full gradient.
    pub fn full_gradient_parts(&mut self, x: &[T]) -> Vec<Vec<T>> {
        self.grad_evals += self.problem.views.len();
        self.full_grad_evals += 1;
        self.subsets
            .iter()
            .map(|s| subset_gradient(self.problem.views, s, x))
            .collect()
    }

    /// `argmin_{x in box} 1/2 ||x - center||_W^2 + reg TV(x)`, warm-started
    /// from the previous dual solution. Returns the minimizer and the
    /// number of dual iterations.
    pub fn prox(&mut self, center: &[T], metric: &DiagPlusLowRank<T>, reg: T) -> Result<(Vec<T>, usize)> {
        let prob = DualTvProblem::new(self.problem.grid, center, metric, reg, self.config.mode, &self.config.bounds)?;
        let report = dual_tv::solve(&prob, Some(&self.dual), &self.config.dual)?;
        if !report.converged && reg > T::zero() {
            debug!(
                "{}: dual solver stopped after {} iterations (relative change {})",
                self.trace.solver, report.iterations, report.relative_change
            );
        }
        if reg > T::zero() {
            self.dual = report.dual;
        }
        Ok((report.primal, report.iterations))
    }

    pub fn mark_quasi_newton_start(&mut self, k: usize) {
        self.trace.quasi_newton_start.get_or_insert(k);
    }

    pub fn add_time(&mut self, since: Instant) {
        self.clock += since.elapsed();
    }

    pub fn record(&mut self, iter: usize, x: &[T], inner_iters: usize) -> Result<()> {
        let cost = full_cost(self.problem.grid, self.problem.views, x, self.config.lambda, self.config.mode)?;
        let snr = match self.problem.reference {
            Some(r) => snr_db(x, r)?,
            None => T::nan(),
        };
        if !cost.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{}: full cost is not finite at iteration {iter}",
                self.trace.solver
            )));
        }
        self.trace.rows.push(TraceRow {
            iter,
            cost,
            snr_db: snr,
            elapsed_s: self.clock.as_secs_f64(),
            inner_iters,
            grad_evals: self.grad_evals,
            full_grad_evals: self.full_grad_evals,
        });
        Ok(())
    }

    pub fn finish(self, x: Vec<T>, step: T, failure: Option<Error>) -> SolverOutput<T> {
        SolverOutput {
            x,
            trace: self.trace,
            alphas: self.alphas,
            step,
            subset_grad_evals: self.subset_grad_evals,
            failure,
        }
    }
}

/// Runs `kind` from `x0`.
pub fn run<T: Scalar>(kind: SolverKind, problem: Problem<'_, T>, x0: &[T], config: &SolverConfig<T>) -> Result<SolverOutput<T>> {
    match kind {
        SolverKind::Aspm => aspm_run(problem, x0, config),
        SolverKind::Sqnpm => sqnpm_run(problem, x0, config),
        SolverKind::Bqnpm => bqnpm_run(problem, x0, config),
    }
}
