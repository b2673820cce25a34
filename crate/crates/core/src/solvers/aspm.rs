use std::time::Instant;

use super::{Engine, Problem, SolverConfig, SolverOutput, SubsetSchedule};
use crate::error::Result;
use crate::linalg::axpy;
use crate::wpm::DiagPlusLowRank;
use crate::Scalar;

/// Accelerated stochastic proximal gradient: one subset gradient per
/// iteration, a scalar-metric TV prox, and FISTA momentum when enabled.
pub fn aspm_run<T: Scalar>(problem: Problem<'_, T>, x0: &[T], config: &SolverConfig<T>) -> Result<SolverOutput<T>> {
    let mut engine = Engine::new(problem, config, x0, "aspm")?;
    let step = config.step.unwrap_or_else(|| config.step_scale / engine.max_alpha());
    let metric = DiagPlusLowRank::scaled_identity(x0.len(), T::one() / step)?;
    let mut schedule = SubsetSchedule::new(config.order, engine.subset_count(), config.seed);
    let mut x = x0.to_vec();
    let mut y = x0.to_vec();
    let mut t = T::one();
    for k in 1..=config.max_outer {
        let started = Instant::now();
        let j = schedule.subset(k);
        let g = engine.subset_gradient(j, &y);
        let mut center = y.clone();
        axpy(-step, &g, &mut center);
        let (next, inner) = match engine.prox(&center, &metric, config.lambda) {
            Ok(r) => r,
            Err(e) => return Ok(engine.finish(x, step, Some(e))),
        };
        if config.momentum {
            let t_next = (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) / T::lit(2.0);
            let beta = (t - T::one()) / t_next;
            y = next.iter().zip(&x).map(|(&n, &o)| n + beta * (n - o)).collect();
            t = t_next;
        } else {
            y = next.clone();
        }
        x = next;
        engine.add_time(started);
        if let Err(e) = engine.record(k, &x, inner) {
            return Ok(engine.finish(x, step, Some(e)));
        }
    }
    Ok(engine.finish(x, step, None))
}
