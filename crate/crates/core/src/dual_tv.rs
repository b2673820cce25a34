//! Accelerated dual projected-gradient solver for the weighted, constrained
//! TV proximal problem
//!
//! ```text
//! x* = argmin_{x in box} 1/2 ||x - v||_W^2 + reg * TV(x)
//! ```
//!
//! with `W = tau I + U U^T`. The dual variable lives in the TV dual ball; each
//! dual gradient needs one weighted box projection, evaluated through the
//! structured semi-smooth Newton route in [`crate::wpm`].

use log::debug;

use crate::error::{check_len, Error, Result};
use crate::grid::Grid;
use crate::linalg::{dist_sq, sub};
use crate::tv::{dual_adjoint, dual_divergence, project_dual_in_place, tv_value, DualField, TvMode};
use crate::wpm::{wpm_box_with, BoxSet, DiagPlusLowRank, NewtonSettings};
use crate::Scalar;

/// One instance of the weighted TV prox.
#[derive(Debug, Clone)]
pub struct DualTvProblem<'a, T> {
    pub grid: &'a Grid,
    /// Center `v` of the quadratic term.
    pub center: &'a [T],
    pub metric: &'a DiagPlusLowRank<T>,
    /// Weight of the TV term (`a_k K_s lambda` inside the outer solver).
    pub reg: T,
    pub mode: TvMode,
    pub bounds: &'a BoxSet<T>,
    /// Upper bound on `1 / lambda_min(W)`; the step size is `1 / (4 d omega reg)`.
    pub omega: T,
}

impl<'a, T: Scalar> DualTvProblem<'a, T> {
    /// Builds a problem with the cheap curvature bound `omega = 1 / tau`,
    /// valid because `U U^T` is positive semidefinite.
    pub fn new(
        grid: &'a Grid,
        center: &'a [T],
        metric: &'a DiagPlusLowRank<T>,
        reg: T,
        mode: TvMode,
        bounds: &'a BoxSet<T>,
    ) -> Result<Self> {
        check_len(grid.len(), center.len())?;
        check_len(grid.len(), metric.dim())?;
        bounds.check_dim(grid.len())?;
        if !(reg >= T::zero()) {
            return Err(Error::InvalidParameter(format!("TV weight must be >= 0, got {reg}")));
        }
        Ok(Self {
            grid,
            center,
            metric,
            reg,
            mode,
            bounds,
            omega: T::one() / metric.tau(),
        })
    }

    /// Replaces the curvature bound by a power-method estimate of
    /// `1 / lambda_min(W)`.
    pub fn with_power_omega(mut self, iterations: usize) -> Result<Self> {
        self.omega = T::one() / self.metric.smallest_eigenvalue(iterations)?;
        Ok(self)
    }

    /// Step size `1 / L` of the dual gradient, where
    /// `L = 2 ||d||^2 omega reg^2` and `||d||^2 <= 4 d`.
    pub fn step_size(&self) -> T {
        T::one() / (T::from_count(4 * self.grid.ndim()) * self.omega * self.reg)
    }

    pub fn lipschitz(&self) -> T {
        T::from_count(8 * self.grid.ndim()) * self.omega * self.reg * self.reg
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualTvSettings<T> {
    pub eps: T,
    pub max_iter: usize,
    /// FISTA momentum; plain projected gradient when `false`.
    pub accelerated: bool,
    pub newton: NewtonSettings<T>,
}

impl<T: Scalar> Default for DualTvSettings<T> {
    fn default() -> Self {
        Self {
            eps: T::lit(1e-5),
            max_iter: 100,
            accelerated: true,
            newton: NewtonSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolveReport<T> {
    pub iterations: usize,
    pub relative_change: T,
    pub converged: bool,
    /// Primal solution, always inside the box.
    pub primal: Vec<T>,
    /// Final dual iterate, for warm starts.
    pub dual: DualField<T>,
    pub newton_iterations: usize,
}

/// `w(P) = v - reg W^{-1} d(P)`.
pub fn w_of_p<T: Scalar>(prob: &DualTvProblem<'_, T>, p: &DualField<T>) -> Result<Vec<T>> {
    if prob.reg == T::zero() {
        return Ok(prob.center.to_vec());
    }
    let div = dual_divergence(prob.grid, p)?;
    let shift = prob.metric.apply_inverse(&div)?;
    Ok(prob
        .center
        .iter()
        .zip(&shift)
        .map(|(&v, &s)| v - prob.reg * s)
        .collect())
}

/// Weighted box projection with a reusable `beta`.
struct Projector<T> {
    beta: Vec<T>,
    settings: NewtonSettings<T>,
    newton_iterations: usize,
}

impl<T: Scalar> Projector<T> {
    fn new(rank: usize, settings: NewtonSettings<T>) -> Self {
        Self {
            beta: vec![T::zero(); rank],
            settings,
            newton_iterations: 0,
        }
    }

    fn project(&mut self, prob: &DualTvProblem<'_, T>, x: &[T]) -> Result<Vec<T>> {
        let (u, report) = wpm_box_with(x, prob.metric, prob.bounds, &self.beta, &self.settings)?;
        self.newton_iterations += report.iterations;
        if report.converged {
            self.beta = report.beta;
        }
        Ok(u)
    }
}

/// Dual objective `h(P) = ||w||_W^2 - ||w - prox(w)||_W^2`, minimized over
/// the dual ball. The primal optimum equals `(||v||_W^2 - min h) / 2`.
pub fn dual_objective<T: Scalar>(prob: &DualTvProblem<'_, T>, p: &DualField<T>) -> Result<T> {
    let w = w_of_p(prob, p)?;
    let beta0 = vec![T::zero(); prob.metric.rank()];
    let (u, _) = wpm_box_with(&w, prob.metric, prob.bounds, &beta0, &NewtonSettings::default())?;
    Ok(prob.metric.norm_sq(&w)? - prob.metric.norm_sq(&sub(&w, &u))?)
}

/// Gradient of [`dual_objective`]: `-2 reg [D^n prox_W(w(P))]_n`.
pub fn dual_gradient<T: Scalar>(prob: &DualTvProblem<'_, T>, p: &DualField<T>) -> Result<DualField<T>> {
    if prob.reg == T::zero() {
        return Ok(DualField::zeros(prob.grid));
    }
    let w = w_of_p(prob, p)?;
    let mut proj = Projector::new(prob.metric.rank(), NewtonSettings::default());
    let q = proj.project(prob, &w)?;
    let mut g = dual_adjoint(prob.grid, &q)?;
    let f = -T::lit(2.0) * prob.reg;
    g.as_mut_slice().iter_mut().for_each(|v| *v = *v * f);
    Ok(g)
}

/// Primal objective `1/2 ||x - v||_W^2 + reg TV(x)`.
pub fn primal_objective<T: Scalar>(prob: &DualTvProblem<'_, T>, x: &[T]) -> Result<T> {
    let d = sub(x, prob.center);
    Ok(T::lit(0.5) * prob.metric.norm_sq(&d)? + prob.reg * tv_value(prob.grid, x, prob.mode)?)
}

/// Runs the accelerated dual iteration from `warm_start` (zero if `None`).
pub fn solve<T: Scalar>(
    prob: &DualTvProblem<'_, T>,
    warm_start: Option<&DualField<T>>,
    settings: &DualTvSettings<T>,
) -> Result<DualSolveReport<T>> {
    if !(settings.eps > T::zero()) || settings.max_iter == 0 {
        return Err(Error::InvalidParameter("dual solver needs eps > 0 and max_iter >= 1".into()));
    }
    let mut p = match warm_start {
        Some(w) => {
            check_len(prob.grid.ndim() * prob.grid.len(), w.as_slice().len())?;
            w.clone()
        }
        None => DualField::zeros(prob.grid),
    };
    let mut proj = Projector::new(prob.metric.rank(), settings.newton);

    if prob.reg == T::zero() {
        let primal = proj.project(prob, prob.center)?;
        return Ok(DualSolveReport {
            iterations: 1,
            relative_change: T::zero(),
            converged: true,
            primal,
            dual: p,
            newton_iterations: proj.newton_iterations,
        });
    }

    let step = prob.step_size();
    let mut p_bar = p.clone();
    let mut t = T::one();
    let mut iterations = 0;
    let mut relative_change = T::infinity();
    let mut converged = false;
    while iterations < settings.max_iter {
        iterations += 1;
        let q = proj.project(prob, &w_of_p(prob, &p_bar)?)?;
        let ascent = dual_adjoint(prob.grid, &q)?;
        let mut next = p_bar.clone();
        next.as_mut_slice()
            .iter_mut()
            .zip(ascent.as_slice())
            .for_each(|(a, &g)| *a = *a + step * g);
        project_dual_in_place(&mut next, prob.mode);

        let change = dist_sq(next.as_slice(), p.as_slice()).sqrt();
        let base = p.norm();
        relative_change = if base > T::zero() {
            change / base
        } else if change == T::zero() {
            T::zero()
        } else {
            T::infinity()
        };
        if relative_change < settings.eps {
            p = next;
            converged = true;
            break;
        }
        if settings.accelerated {
            let t_next = (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) / T::lit(2.0);
            let momentum = (t - T::one()) / t_next;
            p_bar = next.clone();
            p_bar
                .as_mut_slice()
                .iter_mut()
                .zip(next.as_slice().iter().zip(p.as_slice()))
                .for_each(|(b, (&n, &o))| *b = *b + momentum * (n - o));
            t = t_next;
        } else {
            p_bar = next.clone();
        }
        p = next;
    }
    if !converged {
        debug!("dual TV solver hit {iterations} iterations, relative change {relative_change}");
    }
    let primal = proj.project(prob, &w_of_p(prob, &p)?)?;
    Ok(DualSolveReport {
        iterations,
        relative_change,
        converged,
        primal,
        dual: p,
        newton_iterations: proj.newton_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, norm};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(rng: &mut ChaCha8Rng, grid: &Grid) -> DualField<f64> {
        let v = (0..grid.ndim() * grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        crate::tv::project_dual(DualField::from_rows(grid, v).unwrap(), TvMode::Isotropic)
    }

    fn rank_one_metric(rng: &mut ChaCha8Rng, n: usize) -> DiagPlusLowRank<f64> {
        let mut u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nu = norm(&u);
        u.iter_mut().for_each(|v| *v /= nu);
        DiagPlusLowRank::new(n, 1.0, vec![u], crate::wpm::MetricSign::Plus).unwrap()
    }

    #[test]
    fn w_of_p_examples() {
        let g = Grid::new(&[4, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let v: Vec<f64> = (0..12).map(|_| rng.random_range(0.0..1.0)).collect();
        let w = rank_one_metric(&mut rng, 12);
        let b = BoxSet::nonnegative();
        let prob = DualTvProblem::new(&g, &v, &w, 0.3, TvMode::Isotropic, &b).unwrap();
        assert_eq!(w_of_p(&prob, &DualField::zeros(&g)).unwrap(), v);
        let p = random_field(&mut rng, &g);
        let zero_reg = DualTvProblem::new(&g, &v, &w, 0.0, TvMode::Isotropic, &b).unwrap();
        assert_eq!(w_of_p(&zero_reg, &p).unwrap(), v);

        // dense: v - reg W^{-1} d(P)
        let mut wd = DMatrix::<f64>::identity(12, 12);
        let u = DVector::from_column_slice(&w.columns()[0]);
        wd += &u * u.transpose();
        let div = DVector::from_vec(dual_divergence(&g, &p).unwrap());
        let expect = DVector::from_column_slice(&v) - wd.lu().solve(&div).unwrap() * 0.3;
        for (a, b) in w_of_p(&prob, &p).unwrap().iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_vanishes_on_constant_feasible_center() {
        let g = Grid::new(&[5, 5]).unwrap();
        let v = vec![0.7; 25];
        let w = DiagPlusLowRank::scaled_identity(25, 2.0).unwrap();
        let b = BoxSet::nonnegative();
        let prob = DualTvProblem::new(&g, &v, &w, 0.4, TvMode::Isotropic, &b).unwrap();
        let grad = dual_gradient(&prob, &DualField::zeros(&g)).unwrap();
        assert!(grad.as_slice().iter().all(|&x| x == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let p = random_field(&mut rng, &g);
        let zero_reg = DualTvProblem::new(&g, &v, &w, 0.0, TvMode::Isotropic, &b).unwrap();
        assert!(dual_gradient(&zero_reg, &p).unwrap().as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = Grid::new(&[6, 6]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let v: Vec<f64> = (0..36).map(|_| rng.random_range(-0.5..1.0)).collect();
        let w = DiagPlusLowRank::scaled_identity(36, 1.0).unwrap();
        let b = BoxSet::nonnegative();
        let prob = DualTvProblem::new(&g, &v, &w, 0.2, TvMode::Isotropic, &b).unwrap();
        let p = random_field(&mut rng, &g);
        let grad = dual_gradient(&prob, &p).unwrap();
        let h = 1e-6;
        for _ in 0..5 {
            let dir: Vec<f64> = (0..72).map(|_| rng.random_range(-1.0..1.0)).collect();
            let shifted = |s: f64| {
                let vals = p.as_slice().iter().zip(&dir).map(|(a, d)| a + s * d).collect();
                dual_objective(&prob, &DualField::from_rows(&g, vals).unwrap()).unwrap()
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            let an = dot(grad.as_slice(), &dir);
            assert!((fd - an).abs() <= 1e-4 * an.abs().max(1e-6), "{fd} vs {an}");
        }
    }

    #[test]
    fn zero_weight_returns_clamped_center() {
        let g = Grid::new(&[3, 3]).unwrap();
        let v: Vec<f64> = (0..9).map(|i| i as f64 - 4.0).collect();
        let w = DiagPlusLowRank::scaled_identity(9, 1.0).unwrap();
        let b = BoxSet::nonnegative();
        let prob = DualTvProblem::new(&g, &v, &w, 0.0, TvMode::Isotropic, &b).unwrap();
        let rep = solve(&prob, None, &DualTvSettings::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.primal, crate::wpm::prox_box_diag(&v, &b));
    }

    #[test]
    fn projected_gradient_variant_is_monotone_and_feasible() {
        let g = Grid::new(&[8, 8]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let v: Vec<f64> = (0..64).map(|_| rng.random_range(-0.5..1.0)).collect();
        let w = rank_one_metric(&mut rng, 64);
        let b = BoxSet::nonnegative();
        let prob = DualTvProblem::new(&g, &v, &w, 0.15, TvMode::Isotropic, &b).unwrap();
        let settings = DualTvSettings {
            eps: 1e-14,
            max_iter: 1,
            accelerated: false,
            newton: NewtonSettings { eps: 1e-12, max_iter: 50 },
        };
        let mut p = DualField::zeros(&g);
        let mut prev = dual_objective(&prob, &p).unwrap();
        for _ in 0..40 {
            let rep = solve(&prob, Some(&p), &settings).unwrap();
            assert!(b.contains(&rep.primal));
            p = rep.dual;
            let cur = dual_objective(&prob, &p).unwrap();
            assert!(cur <= prev + 1e-12, "{cur} > {prev}");
            prev = cur;
        }
    }

    #[test]
    fn gradient_step_with_3d_constant_never_increases_objective() {
        let g = Grid::new(&[4, 4, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let n = g.len();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..1.0)).collect();
        let w = rank_one_metric(&mut rng, n);
        let b = BoxSet::nonnegative();
        let prob = DualTvProblem::new(&g, &v, &w, 0.3, TvMode::Anisotropic, &b).unwrap();
        let step = 1.0 / (24.0 * prob.omega * 0.3 * 0.3);
        assert!(step <= 1.0 / prob.lipschitz() + 1e-15);
        for _ in 0..10 {
            let mut p = random_field(&mut rng, &g);
            crate::tv::project_dual_in_place(&mut p, TvMode::Anisotropic);
            let grad = dual_gradient(&prob, &p).unwrap();
            let mut q = p.clone();
            q.as_mut_slice().iter_mut().zip(grad.as_slice()).for_each(|(a, g)| *a -= step * g);
            crate::tv::project_dual_in_place(&mut q, TvMode::Anisotropic);
            let (h0, h1) = (dual_objective(&prob, &p).unwrap(), dual_objective(&prob, &q).unwrap());
            assert!(h1 <= h0 + 1e-12, "{h1} > {h0}");
        }
    }

    #[test]
    fn warm_start_converges_immediately() {
        let g = Grid::new(&[8, 8]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let v: Vec<f64> = (0..64).map(|_| rng.random_range(-0.5..1.0)).collect();
        let w = rank_one_metric(&mut rng, 64);
        let b = BoxSet::nonnegative();
        let prob = DualTvProblem::new(&g, &v, &w, 0.1, TvMode::Isotropic, &b).unwrap();
        // a converged dual solution is a fixed point of the projected step,
        // so restarting from it stops at once under the default tolerance
        let tight = DualTvSettings { eps: 1e-10, max_iter: 20000, ..Default::default() };
        let first = solve(&prob, None, &tight).unwrap();
        assert!(first.converged);
        let second = solve(&prob, Some(&first.dual), &DualTvSettings::default()).unwrap();
        assert!(second.iterations <= 2, "{} iterations", second.iterations);
    }

    #[test]
    fn duality_gap_closes() {
        let g = Grid::new(&[8, 8]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let v: Vec<f64> = (0..64).map(|_| rng.random_range(-0.5..1.0)).collect();
        let w = rank_one_metric(&mut rng, 64);
        let b = BoxSet::nonnegative();
        let prob = DualTvProblem::new(&g, &v, &w, 0.1, TvMode::Isotropic, &b).unwrap();
        let settings = DualTvSettings {
            eps: 1e-12,
            max_iter: 20000,
            newton: NewtonSettings { eps: 1e-12, max_iter: 50 },
            ..Default::default()
        };
        let rep = solve(&prob, None, &settings).unwrap();
        let primal = primal_objective(&prob, &rep.primal).unwrap();
        let dual = 0.5 * (w.norm_sq(&v).unwrap() - dual_objective(&prob, &rep.dual).unwrap());
        assert!(primal >= dual - 1e-10);
        assert!((primal - dual) <= 1e-6 * primal.abs(), "gap {}", primal - dual);
    }
}
