use std::time::Instant;

use super::{aggregate_metric, compute_v_k, current_subset, Engine, HessianMode, Problem, SolverConfig, SolverOutput};
use crate::error::{Error, Result};
use crate::sr1::{estimate_sr1, Sr1Estimate};
use crate::Scalar;

/// Taylor anchor kept for one subset.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSlot<T> {
    /// 0-based subset index.
    pub subset: usize,
    /// Iteration index `j` of the stored iterate `x_j`.
    pub anchor: usize,
    pub x: Vec<T>,
    pub grad: Vec<T>,
    pub hess: Sr1Estimate<T>,
}

/// Mini-batch quasi-Newton proximal method as an explicit state machine.
pub struct Bqnpm<'a, T: Scalar> {
    engine: Engine<'a, T>,
    x: Vec<T>,
    k: usize,
    step: T,
    slots: Vec<Option<SubsetSlot<T>>>,
}

impl<'a, T: Scalar> Bqnpm<'a, T> {
    pub fn new(problem: Problem<'a, T>, x0: &[T], config: &'a SolverConfig<T>) -> Result<Self> {
        let engine = Engine::new(problem, config, x0, "bqnpm")?;
        let slots = vec![None; engine.subset_count()];
        Ok(Self {
            engine,
            x: x0.to_vec(),
            k: 0,
            step: config.step.unwrap_or(config.step_scale),
            slots,
        })
    }

    /// Completed outer iterations.
    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn iterate(&self) -> &[T] {
        &self.x
    }

    /// Slots indexed by 0-based subset; `None` until first visited.
    pub fn slots(&self) -> &[Option<SubsetSlot<T>>] {
        &self.slots
    }

    pub fn alphas(&self) -> &[T] {
        &self.engine.alphas
    }

    /// Runs outer iteration `k + 1`.
    pub fn step(&mut self) -> Result<()> {
        let started = Instant::now();
        let cfg = self.engine.config;
        let subsets = self.engine.subset_count();
        let k = self.k + 1;
        let j = current_subset(k, subsets);
        let alpha = self.engine.alphas[j];
        let grad = self.engine.subset_gradient(j, &self.x);

        let hess = match (&self.slots[j], cfg.hessian) {
            (None, _) | (Some(_), HessianMode::FixedDiagonal) => Sr1Estimate::scaled_identity(self.x.len(), alpha),
            (Some(prev), HessianMode::Sr1) => {
                let s: Vec<T> = self.x.iter().zip(&prev.x).map(|(&a, &b)| a - b).collect();
                let m: Vec<T> = grad.iter().zip(&prev.grad).map(|(&a, &b)| a - b).collect();
                match estimate_sr1(&s, &m, cfg.gamma, alpha) {
                    Ok(est) => est,
                    Err(Error::DegenerateStep) => prev.hess.clone(),
                    Err(e) => return Err(e),
                }
            }
        };
        self.slots[j] = Some(SubsetSlot {
            subset: j,
            anchor: k - 1,
            x: self.x.clone(),
            grad,
            hess,
        });

        let (metric, center, reg) = if k <= subsets {
            let slot = self.slots[j].as_ref().expect("slot just stored");
            let metric = slot.hess.to_metric()?;
            let center = compute_v_k([(&slot.hess, &slot.x[..], &slot.grad[..])], &metric, self.step)?;
            (metric, center, self.step * cfg.lambda)
        } else {
            if cfg.hessian == HessianMode::Sr1 {
                self.engine.mark_quasi_newton_start(k);
            }
            let filled: Vec<&SubsetSlot<T>> = self.slots.iter().flatten().collect();
            let metric = aggregate_metric(filled.iter().map(|s| &s.hess))?;
            let center = compute_v_k(
                filled.iter().map(|s| (&s.hess, &s.x[..], &s.grad[..])),
                &metric,
                self.step,
            )?;
            (metric, center, self.step * T::from_count(subsets) * cfg.lambda)
        };
        let (x, inner) = self.engine.prox(&center, &metric, reg)?;
        self.x = x;
        self.k = k;
        self.engine.add_time(started);
        self.engine.record(k, &self.x, inner)
    }

    pub fn into_output(self) -> SolverOutput<T> {
        self.finish(None)
    }

    fn finish(self, failure: Option<Error>) -> SolverOutput<T> {
        let step = self.step;
        self.engine.finish(self.x, step, failure)
    }
}

/// Runs `config.max_outer` iterations from `x0`.
pub fn bqnpm_run<T: Scalar>(problem: Problem<'_, T>, x0: &[T], config: &SolverConfig<T>) -> Result<SolverOutput<T>> {
    let mut solver = Bqnpm::new(problem, x0, config)?;
    for _ in 0..config.max_outer {
        if let Err(e) = solver.step() {
            return Ok(solver.finish(Some(e)));
        }
    }
    Ok(solver.into_output())
}
