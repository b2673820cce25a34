use std::time::Instant;

use super::{compute_v_k, Engine, HessianMode, Problem, SolverConfig, SolverOutput, SubsetSchedule};
use crate::error::{Error, Result};
use crate::sr1::{estimate_sr1, Sr1Estimate};
use crate::Scalar;

struct Snapshot<T> {
    x: Vec<T>,
    parts: Vec<Vec<T>>,
    mean: Vec<T>,
}

/// `g - g_snapshot + mean`, the variance-reduced gradient estimate.
pub fn svrg_direction<T: Scalar>(g: &[T], g_snapshot: &[T], mean: &[T]) -> Vec<T> {
    g.iter()
        .zip(g_snapshot)
        .zip(mean)
        .map(|((&gi, &si), &mi)| gi - si + mi)
        .collect()
}

/// Variance-reduced stochastic quasi-Newton proximal method. Each epoch of
/// `subsets` iterations opens with a full gradient at a snapshot; inner
/// steps use SVRG-corrected subset gradients and an SR1 metric fitted to
/// consecutive snapshots.
pub fn sqnpm_run<T: Scalar>(problem: Problem<'_, T>, x0: &[T], config: &SolverConfig<T>) -> Result<SolverOutput<T>> {
    let mut engine = Engine::new(problem, config, x0, "sqnpm")?;
    let step = config.step.unwrap_or(config.step_scale);
    let subsets = engine.subset_count();
    let mut schedule = SubsetSchedule::new(config.order, subsets, config.seed);
    let mut hess = Sr1Estimate::scaled_identity(x0.len(), engine.alpha_full);
    let mut metric = hess.to_metric()?;
    let mut snapshot: Option<Snapshot<T>> = None;
    let mut x = x0.to_vec();
    for k in 1..=config.max_outer {
        let started = Instant::now();
        if (k - 1) % subsets == 0 {
            let parts = engine.full_gradient_parts(&x);
            let mut mean = vec![T::zero(); x.len()];
            for p in &parts {
                mean.iter_mut().zip(p).for_each(|(m, &g)| *m = *m + g);
            }
            let inv = T::one() / T::from_count(subsets);
            mean.iter_mut().for_each(|m| *m = *m * inv);
            if let (Some(prev), HessianMode::Sr1) = (&snapshot, config.hessian) {
                engine.mark_quasi_newton_start(k);
                let s: Vec<T> = x.iter().zip(&prev.x).map(|(&a, &b)| a - b).collect();
                let m: Vec<T> = mean.iter().zip(&prev.mean).map(|(&a, &b)| a - b).collect();
                match estimate_sr1(&s, &m, config.gamma, engine.alpha_full) {
                    Ok(est) => hess = est,
                    Err(Error::DegenerateStep) => {}
                    Err(e) => return Ok(engine.finish(x, step, Some(e))),
                }
                metric = match hess.to_metric() {
                    Ok(m) => m,
                    Err(e) => return Ok(engine.finish(x, step, Some(e))),
                };
            }
            snapshot = Some(Snapshot { x: x.clone(), parts, mean });
        }
        let snap = snapshot.as_ref().expect("snapshot taken at epoch start");
        let j = schedule.subset(k);
        let g = engine.subset_gradient(j, &x);
        let v = svrg_direction(&g, &snap.parts[j], &snap.mean);
        let result = compute_v_k([(&hess, &x[..], &v[..])], &metric, step)
            .and_then(|center| engine.prox(&center, &metric, step * config.lambda));
        let (next, inner) = match result {
            Ok(r) => r,
            Err(e) => return Ok(engine.finish(x, step, Some(e))),
        };
        x = next;
        engine.add_time(started);
        if let Err(e) = engine.record(k, &x, inner) {
            return Ok(engine.finish(x, step, Some(e)));
        }
    }
    Ok(engine.finish(x, step, None))
}
