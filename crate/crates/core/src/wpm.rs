//! Weighted proximal mappings of box indicators under diagonal-plus-low-rank
//! metrics `W = tau I +/- U U^T`.
//!
//! The structured evaluation reduces the N-dimensional weighted projection to
//! an r-dimensional piecewise-linear equation `phi(beta) = 0`, solved by a
//! semi-smooth Newton iteration.

use log::debug;

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, mat_inf_norm, norm, solve_dense};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MetricSign {
    #[default]
    Plus,
    Minus,
}

impl MetricSign {
    fn factor<T: Scalar>(self) -> T {
        match self {
            MetricSign::Plus => T::one(),
            MetricSign::Minus => -T::one(),
        }
    }
}

/// Symmetric metric `W = tau I + s U U^T` with `s = +1` or `-1`.
///
/// Immutable once built; the Gram matrix `U^T U` is cached.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagPlusLowRank<T> {
    dim: usize,
    tau: T,
    columns: Vec<Vec<T>>,
    sign: MetricSign,
    gram: Vec<T>,
}

impl<T: Scalar> DiagPlusLowRank<T> {
    pub fn new(dim: usize, tau: T, columns: Vec<Vec<T>>, sign: MetricSign) -> Result<Self> {
        if !(tau > T::zero()) || !tau.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "metric diagonal must be positive and finite, got {tau}"
            )));
        }
        for c in &columns {
            check_len(dim, c.len())?;
        }
        let r = columns.len();
        let mut gram = vec![T::zero(); r * r];
        for i in 0..r {
            for j in i..r {
                let g = dot(&columns[i], &columns[j]);
                gram[i * r + j] = g;
                gram[j * r + i] = g;
            }
        }
        let metric = Self {
            dim,
            tau,
            columns,
            sign,
            gram,
        };
        if sign == MetricSign::Minus && r > 0 {
            // W > 0  <=>  I - U^T U / tau > 0; a Cholesky attempt decides it.
            if !is_positive_definite(&metric.capacitance(), r) {
                return Err(Error::InvalidParameter(
                    "tau I - U U^T is not positive definite".into(),
                ));
            }
        }
        Ok(metric)
    }

    /// `tau I` with no low-rank part.
    pub fn scaled_identity(dim: usize, tau: T) -> Result<Self> {
        Self::new(dim, tau, Vec::new(), MetricSign::Plus)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn rank(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<T>] {
        &self.columns
    }

    pub fn sign(&self) -> MetricSign {
        self.sign
    }

    /// `I_r +/- U^T U / tau`, row-major.
    fn capacitance(&self) -> Vec<T> {
        let r = self.rank();
        let s: T = self.sign.factor();
        let mut c: Vec<T> = self.gram.iter().map(|&g| s * g / self.tau).collect();
        for i in 0..r {
            c[i * r + i] = c[i * r + i] + T::one();
        }
        c
    }

    fn project_columns(&self, x: &[T]) -> Vec<T> {
        self.columns.iter().map(|c| dot(c, x)).collect()
    }

    fn combine_columns(&self, coeffs: &[T], out: &mut [T], alpha: T) {
        for (c, &b) in self.columns.iter().zip(coeffs) {
            let f = alpha * b;
            if f == T::zero() {
                continue;
            }
            for (o, &u) in out.iter_mut().zip(c) {
                *o = *o + f * u;
            }
        }
    }

    /// `W x = tau x +/- U (U^T x)`.
    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        check_len(self.dim, x.len())?;
        let mut out: Vec<T> = x.iter().map(|&v| self.tau * v).collect();
        let coeffs = self.project_columns(x);
        self.combine_columns(&coeffs, &mut out, self.sign.factor());
        Ok(out)
    }

    /// `W^{-1} x` through the Woodbury identity
    /// `x / tau -/+ tau^{-2} U (I +/- U^T U / tau)^{-1} U^T x`.
    pub fn apply_inverse(&self, x: &[T]) -> Result<Vec<T>> {
        check_len(self.dim, x.len())?;
        let inv_tau = T::one() / self.tau;
        let mut out: Vec<T> = x.iter().map(|&v| v * inv_tau).collect();
        if self.rank() == 0 {
            return Ok(out);
        }
        let rhs = self.project_columns(x);
        let coeffs = solve_dense(self.capacitance(), rhs)?;
        let s: T = self.sign.factor();
        self.combine_columns(&coeffs, &mut out, -s * inv_tau * inv_tau);
        Ok(out)
    }

    /// `x^T W x`.
    pub fn norm_sq(&self, x: &[T]) -> Result<T> {
        check_len(self.dim, x.len())?;
        let p = self.project_columns(x);
        Ok(self.tau * dot(x, x) + self.sign.factor::<T>() * dot(&p, &p))
    }

    /// Smallest eigenvalue of `W` estimated by power iteration on `W^{-1}`.
    /// For the `+` sign `tau` is always a lower bound, and it is exact as soon
    /// as `rank < dim`.
    pub fn smallest_eigenvalue(&self, iterations: usize) -> Result<T> {
        if self.dim == 0 {
            return Ok(self.tau);
        }
        // deterministic start with a component in every direction
        let mut v: Vec<T> = (0..self.dim)
            .map(|i| T::one() + T::lit(((i * 7919) % 97) as f64 / 97.0))
            .collect();
        let mut largest_inv = T::zero();
        for _ in 0..iterations.max(1) {
            let nrm = norm(&v);
            v.iter_mut().for_each(|e| *e = *e / nrm);
            let w = self.apply_inverse(&v)?;
            largest_inv = dot(&v, &w);
            v = w;
        }
        Ok(T::one() / largest_inv)
    }
}

fn is_positive_definite<T: Scalar>(a: &[T], n: usize) -> bool {
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s = s - l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return false;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    true
}

/// Componentwise bounds `lower <= x <= upper`. A bound vector of length one
/// applies to every component.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet<T> {
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Scalar> Default for BoxSet<T> {
    fn default() -> Self {
        Self::nonnegative()
    }
}

impl<T: Scalar> BoxSet<T> {
    /// `[0, +inf)` in every component.
    pub fn nonnegative() -> Self {
        Self {
            lower: vec![T::zero()],
            upper: vec![T::infinity()],
        }
    }

    pub fn unbounded() -> Self {
        Self {
            lower: vec![T::neg_infinity()],
            upper: vec![T::infinity()],
        }
    }

    pub fn uniform(lower: T, upper: T) -> Result<Self> {
        Self::per_component(vec![lower], vec![upper])
    }

    pub fn per_component(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        check_len(lower.len(), upper.len())?;
        if lower.is_empty() || lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidParameter("box requires lower <= upper".into()));
        }
        Ok(Self { lower, upper })
    }

    #[inline]
    pub fn lower(&self, i: usize) -> T {
        if self.lower.len() == 1 {
            self.lower[0]
        } else {
            self.lower[i]
        }
    }

    #[inline]
    pub fn upper(&self, i: usize) -> T {
        if self.upper.len() == 1 {
            self.upper[0]
        } else {
            self.upper[i]
        }
    }

    #[inline]
    pub fn clamp(&self, i: usize, v: T) -> T {
        v.max(self.lower(i)).min(self.upper(i))
    }

    /// Strictly inside the bounds, where the clamp has derivative one.
    #[inline]
    pub fn is_interior(&self, i: usize, v: T) -> bool {
        v > self.lower(i) && v < self.upper(i)
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.iter().enumerate().all(|(i, &v)| v >= self.lower(i) && v <= self.upper(i))
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        if self.lower.len() == 1 || self.lower.len() == n {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: n,
                actual: self.lower.len(),
            })
        }
    }
}

/// Weighted projection onto the box for a diagonal positive metric, which is
/// the plain componentwise clamp.
pub fn prox_box_diag<T: Scalar>(x: &[T], set: &BoxSet<T>) -> Vec<T> {
    x.iter().enumerate().map(|(i, &v)| set.clamp(i, v)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings<T> {
    pub eps: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for NewtonSettings<T> {
    fn default() -> Self {
        Self {
            eps: T::lit(1e-6),
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport<T> {
    pub beta: Vec<T>,
    pub iterations: usize,
    pub residual: T,
    pub converged: bool,
}

/// Evaluation of the reduced system at one `beta`.
struct Reduced<T> {
    shifted: Vec<T>,
    projected: Vec<T>,
    phi: Vec<T>,
}

fn shifted_point<T: Scalar>(beta: &[T], x: &[T], w: &DiagPlusLowRank<T>) -> Vec<T> {
    // x -/+ Sigma^{-1} U beta, the sign opposite to the metric's
    let mut z = x.to_vec();
    let f = -w.sign.factor::<T>() / w.tau;
    w.combine_columns(beta, &mut z, f);
    z
}

fn reduce<T: Scalar>(beta: &[T], x: &[T], w: &DiagPlusLowRank<T>, set: &BoxSet<T>) -> Reduced<T> {
    let shifted = shifted_point(beta, x, w);
    let projected = prox_box_diag(&shifted, set);
    let phi = w
        .columns
        .iter()
        .zip(beta)
        .map(|(c, &b)| {
            c.iter()
                .zip(x.iter().zip(&projected))
                .fold(T::zero(), |acc, (&u, (&xi, &pi))| acc + u * (xi - pi))
                + b
        })
        .collect();
    Reduced {
        shifted,
        projected,
        phi,
    }
}

/// Convex potential whose gradient is `phi`:
/// `psi(beta) = 1/2 beta^T (I +/- U^T U / tau) beta -/+ e(z(beta))` with
/// `e(z) = tau/2 ||z - clamp(z)||^2`.
fn potential<T: Scalar>(beta: &[T], w: &DiagPlusLowRank<T>, red: &Reduced<T>) -> T {
    let r = w.rank();
    let cap = w.capacitance();
    let mut quad = T::zero();
    for i in 0..r {
        for j in 0..r {
            quad = quad + beta[i] * cap[i * r + j] * beta[j];
        }
    }
    let envelope = red
        .shifted
        .iter()
        .zip(&red.projected)
        .fold(T::zero(), |acc, (&z, &p)| acc + (z - p) * (z - p));
    let half = T::lit(0.5);
    half * quad - w.sign.factor::<T>() * half * w.tau * envelope
}

/// `phi(beta) = U^T (x - clamp(x -/+ tau^{-1} U beta)) + beta`.
pub fn phi<T: Scalar>(
    beta: &[T],
    x: &[T],
    w: &DiagPlusLowRank<T>,
    set: &BoxSet<T>,
) -> Result<Vec<T>> {
    check_len(w.rank(), beta.len())?;
    check_len(w.dim(), x.len())?;
    set.check_dim(x.len())?;
    Ok(reduce(beta, x, w, set).phi)
}

/// Element of the Clarke Jacobian of `phi`:
/// `I +/- tau^{-1} U^T diag(g) U` with `g_i = 1` strictly inside the box and
/// `g_i = 0` otherwise (including exactly on a bound).
fn jacobian<T: Scalar>(w: &DiagPlusLowRank<T>, set: &BoxSet<T>, shifted: &[T]) -> Vec<T> {
    let r = w.rank();
    let active: Vec<usize> = shifted
        .iter()
        .enumerate()
        .filter(|(i, &z)| set.is_interior(*i, z))
        .map(|(i, _)| i)
        .collect();
    let f = w.sign.factor::<T>() / w.tau;
    let mut h = vec![T::zero(); r * r];
    for i in 0..r {
        for j in i..r {
            let (ci, cj) = (&w.columns[i], &w.columns[j]);
            let s = active.iter().fold(T::zero(), |acc, &l| acc + ci[l] * cj[l]);
            h[i * r + j] = f * s;
            h[j * r + i] = f * s;
        }
        h[i * r + i] = h[i * r + i] + T::one();
    }
    h
}

fn newton_direction<T: Scalar>(h: Vec<T>, phi: &[T]) -> Result<Vec<T>> {
    let r = phi.len();
    let rhs: Vec<T> = phi.iter().map(|&v| -v).collect();
    match solve_dense(h.clone(), rhs.clone()) {
        Ok(d) => Ok(d),
        Err(Error::SingularSystem { .. }) => {
            let mu = T::lit(1e-8) * mat_inf_norm(&h, r).max(T::one());
            let mut damped = h;
            for i in 0..r {
                damped[i * r + i] = damped[i * r + i] + mu;
            }
            solve_dense(damped, rhs)
        }
        Err(e) => Err(e),
    }
}

/// Semi-smooth Newton iteration for `phi(beta) = 0`.
///
/// Full Newton steps are taken whenever they reduce either the residual or
/// the convex potential of `phi`; otherwise the step is halved. Returns the
/// best-residual iterate, flagged, if `max_iter` is reached.
pub fn semismooth_newton<T: Scalar>(
    x: &[T],
    w: &DiagPlusLowRank<T>,
    set: &BoxSet<T>,
    beta0: &[T],
    settings: &NewtonSettings<T>,
) -> Result<NewtonReport<T>> {
    check_len(w.rank(), beta0.len())?;
    check_len(w.dim(), x.len())?;
    set.check_dim(x.len())?;
    if !(settings.eps > T::zero()) {
        return Err(Error::InvalidParameter("newton tolerance must be positive".into()));
    }
    let mut beta = beta0.to_vec();
    let mut red = reduce(&beta, x, w, set);
    let mut residual = norm(&red.phi);
    let mut best = (beta.clone(), residual);
    let mut iterations = 0;
    while iterations < settings.max_iter {
        if residual <= settings.eps {
            return Ok(NewtonReport {
                beta,
                iterations,
                residual,
                converged: true,
            });
        }
        iterations += 1;
        let h = jacobian(w, set, &red.shifted);
        let dir = newton_direction(h, &red.phi)?;
        let slope = dot(&red.phi, &dir);
        let psi0 = potential(&beta, w, &red);
        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<T> = beta.iter().zip(&dir).map(|(&b, &d)| b + step * d).collect();
            let trial_red = reduce(&trial, x, w, set);
            let trial_res = norm(&trial_red.phi);
            let armijo = potential(&trial, w, &trial_red) <= psi0 + T::lit(1e-4) * step * slope;
            if trial_res < residual || armijo {
                accepted = Some((trial, trial_red, trial_res));
                break;
            }
            step = step * T::lit(0.5);
        }
        let (next, next_red, next_res) = accepted.unwrap_or_else(|| {
            let trial: Vec<T> = beta.iter().zip(&dir).map(|(&b, &d)| b + d).collect();
            let trial_red = reduce(&trial, x, w, set);
            let res = norm(&trial_red.phi);
            (trial, trial_red, res)
        });
        beta = next;
        red = next_red;
        residual = next_res;
        if residual < best.1 {
            best = (beta.clone(), residual);
        }
    }
    if residual <= settings.eps {
        return Ok(NewtonReport {
            beta,
            iterations,
            residual,
            converged: true,
        });
    }
    debug!(
        "semi-smooth Newton stopped after {iterations} iterations, residual {}",
        best.1
    );
    Ok(NewtonReport {
        beta: best.0,
        iterations,
        residual: best.1,
        converged: false,
    })
}

/// Weighted projection `argmin_{u in box} 1/2 ||u - x||_W^2` with default
/// Newton settings and a zero initial `beta`.
pub fn wpm_box<T: Scalar>(x: &[T], w: &DiagPlusLowRank<T>, set: &BoxSet<T>) -> Result<Vec<T>> {
    let beta0 = vec![T::zero(); w.rank()];
    Ok(wpm_box_with(x, w, set, &beta0, &NewtonSettings::default())?.0)
}

/// Weighted projection with an explicit warm start; also returns the Newton
/// report so callers can reuse `beta`.
pub fn wpm_box_with<T: Scalar>(
    x: &[T],
    w: &DiagPlusLowRank<T>,
    set: &BoxSet<T>,
    beta0: &[T],
    settings: &NewtonSettings<T>,
) -> Result<(Vec<T>, NewtonReport<T>)> {
    check_len(w.dim(), x.len())?;
    set.check_dim(x.len())?;
    if w.rank() == 0 {
        let report = NewtonReport {
            beta: Vec::new(),
            iterations: 0,
            residual: T::zero(),
            converged: true,
        };
        return Ok((prox_box_diag(x, set), report));
    }
    let report = semismooth_newton(x, w, set, beta0, settings)?;
    let u = prox_box_diag(&shifted_point(&report.beta, x, w), set);
    Ok((u, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_metric(rng: &mut ChaCha8Rng, n: usize, r: usize, scale: f64) -> DiagPlusLowRank<f64> {
        let tau = rng.random_range(0.5..2.0);
        let cols = (0..r)
            .map(|_| (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect())
            .collect();
        DiagPlusLowRank::new(n, tau, cols, MetricSign::Plus).unwrap()
    }

    fn dense(w: &DiagPlusLowRank<f64>) -> DMatrix<f64> {
        let n = w.dim();
        let mut m = DMatrix::identity(n, n) * w.tau();
        let s = w.sign().factor::<f64>();
        for c in w.columns() {
            let u = DVector::from_column_slice(c);
            m += s * &u * u.transpose();
        }
        m
    }

    /// Projected gradient on `1/2 ||u - x||_W^2` over the box.
    fn projected_gradient(x: &[f64], w: &DiagPlusLowRank<f64>, set: &BoxSet<f64>, iters: usize) -> Vec<f64> {
        let lmax = w.tau() + w.columns().iter().map(|c| dot(c, c)).sum::<f64>();
        let mut u = prox_box_diag(x, set);
        for _ in 0..iters {
            let diff: Vec<f64> = u.iter().zip(x).map(|(a, b)| a - b).collect();
            let g = w.apply(&diff).unwrap();
            for (i, ui) in u.iter_mut().enumerate() {
                *ui = set.clamp(i, *ui - g[i] / lmax);
            }
        }
        u
    }

    fn objective(u: &[f64], x: &[f64], w: &DiagPlusLowRank<f64>) -> f64 {
        let d: Vec<f64> = u.iter().zip(x).map(|(a, b)| a - b).collect();
        0.5 * w.norm_sq(&d).unwrap()
    }

    #[test]
    fn apply_examples() {
        let w = DiagPlusLowRank::scaled_identity(3, 2.5).unwrap();
        assert_eq!(w.apply(&[1.0, -2.0, 0.5]).unwrap(), vec![2.5, -5.0, 1.25]);
        let w = DiagPlusLowRank::new(2, 1.0, vec![vec![1.0, 0.0]], MetricSign::Plus).unwrap();
        assert_eq!(w.apply(&[1.0, 1.0]).unwrap(), vec![2.0, 1.0]);
        assert!(w.apply(&[1.0]).is_err());
    }

    #[test]
    fn apply_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let w = random_metric(&mut rng, 64, 4, 1.0);
        let x: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let expect = dense(&w) * DVector::from_column_slice(&x);
        for (a, b) in w.apply(&x).unwrap().iter().zip(expect.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn inverse_examples() {
        let w = DiagPlusLowRank::scaled_identity(2, 4.0).unwrap();
        assert_eq!(w.apply_inverse(&[2.0, 1.0]).unwrap(), vec![0.5, 0.25]);
        let w = DiagPlusLowRank::new(2, 1.0, vec![vec![1.0, 0.0]], MetricSign::Plus).unwrap();
        let v = w.apply_inverse(&[2.0, 1.0]).unwrap();
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn woodbury_round_trip_both_signs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = random_metric(&mut rng, 256, 8, 1.0);
        let x: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
        let back = w.apply_inverse(&w.apply(&x).unwrap()).unwrap();
        let err = norm(&crate::linalg::sub(&back, &x)) / norm(&x);
        assert!(err <= 1e-10, "relative error {err}");

        // tau I - U U^T stays definite for small columns
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..32).map(|_| 0.1 * rng.random_range(-1.0..1.0)).collect())
            .collect();
        let wm = DiagPlusLowRank::new(32, 1.0, cols, MetricSign::Minus).unwrap();
        let x: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
        let back = wm.apply_inverse(&wm.apply(&x).unwrap()).unwrap();
        assert!(norm(&crate::linalg::sub(&back, &x)) / norm(&x) <= 1e-10);
        let expect = dense(&wm) * DVector::from_column_slice(&x);
        for (a, b) in wm.apply(&x).unwrap().iter().zip(expect.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn indefinite_minus_metric_is_rejected() {
        let w = DiagPlusLowRank::new(2, 1.0, vec![vec![2.0, 0.0]], MetricSign::Minus);
        assert!(matches!(w, Err(Error::InvalidParameter(_))));
        assert!(DiagPlusLowRank::<f64>::scaled_identity(2, 0.0).is_err());
    }

    #[test]
    fn smallest_eigenvalue_matches_tau_for_low_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let w = random_metric(&mut rng, 16, 2, 1.0);
        let est = w.smallest_eigenvalue(500).unwrap();
        assert!((est - w.tau()).abs() < 1e-6 * w.tau(), "{est} vs {}", w.tau());
    }

    #[test]
    fn clamp_examples() {
        let b = BoxSet::nonnegative();
        assert_eq!(prox_box_diag(&[-1.0, 2.0], &b), vec![0.0, 2.0]);
        let b = BoxSet::uniform(-1.0, 3.0).unwrap();
        assert_eq!(prox_box_diag(&[0.5, 2.0], &b), vec![0.5, 2.0]);
        assert!(BoxSet::uniform(1.0, 0.0).is_err());
    }

    #[test]
    fn clamp_is_the_diagonal_weighted_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 20;
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
        let lo: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..0.0)).collect();
        let hi: Vec<f64> = lo.iter().map(|l| l + rng.random_range(0.1..1.0)).collect();
        let set = BoxSet::per_component(lo, hi).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lmax = weights.iter().cloned().fold(0.0, f64::max);
        let mut u = vec![0.0; n];
        for (i, ui) in u.iter_mut().enumerate() {
            *ui = set.clamp(i, 0.0);
        }
        for _ in 0..5000 {
            for i in 0..n {
                u[i] = set.clamp(i, u[i] - weights[i] * (u[i] - x[i]) / lmax);
            }
        }
        for (a, b) in prox_box_diag(&x, &set).iter().zip(&u) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    fn scalar_metric() -> DiagPlusLowRank<f64> {
        DiagPlusLowRank::new(1, 1.0, vec![vec![1.0]], MetricSign::Plus).unwrap()
    }

    #[test]
    fn phi_examples() {
        let zero_col = DiagPlusLowRank::new(3, 1.0, vec![vec![0.0; 3]], MetricSign::Plus).unwrap();
        let b = BoxSet::nonnegative();
        assert_eq!(phi(&[0.7], &[1.0, -2.0, 3.0], &zero_col, &b).unwrap(), vec![0.7]);
        let w = scalar_metric();
        assert_eq!(phi(&[2.0], &[-2.0], &w, &b).unwrap(), vec![0.0]);
        assert_eq!(phi(&[0.0], &[3.0], &w, &b).unwrap(), vec![0.0]);
    }

    #[test]
    fn newton_on_zero_column() {
        let w = DiagPlusLowRank::new(3, 1.0, vec![vec![0.0; 3]], MetricSign::Plus).unwrap();
        let rep = semismooth_newton(&[1.0, -1.0, 2.0], &w, &BoxSet::nonnegative(), &[5.0], &NewtonSettings::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.beta, vec![0.0]);
    }

    #[test]
    fn newton_scalar_example() {
        let w = scalar_metric();
        let rep = semismooth_newton(&[-2.0], &w, &BoxSet::nonnegative(), &[0.0], &NewtonSettings::default()).unwrap();
        assert!(rep.converged && rep.iterations <= 2);
        assert_abs_diff_eq!(rep.beta[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn wpm_scalar_examples() {
        let w = scalar_metric();
        let b = BoxSet::nonnegative();
        assert_eq!(wpm_box(&[-2.0], &w, &b).unwrap(), vec![0.0]);
        assert_eq!(wpm_box(&[3.0], &w, &b).unwrap(), vec![3.0]);
        let id = DiagPlusLowRank::scaled_identity(3, 1.0).unwrap();
        assert_eq!(wpm_box(&[-1.0, 0.5, 2.0], &id, &b).unwrap(), vec![0.0, 0.5, 2.0]);
    }

    #[test]
    fn wpm_matches_projected_gradient_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let b = BoxSet::nonnegative();
        for _ in 0..5 {
            let w = random_metric(&mut rng, 16, 2, 0.7);
            let x: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u = wpm_box(&x, &w, &b).unwrap();
            let oracle = projected_gradient(&x, &w, &b, 20000);
            let (fu, fo) = (objective(&u, &x, &w), objective(&oracle, &x, &w));
            assert!((fu - fo).abs() <= 1e-8 * fo.max(1e-12), "{fu} vs {fo}");
        }
    }

    #[test]
    fn minus_metric_projection_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let cols: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..12).map(|_| 0.2 * rng.random_range(-1.0..1.0)).collect())
            .collect();
        let w = DiagPlusLowRank::new(12, 1.0, cols, MetricSign::Minus).unwrap();
        let b = BoxSet::nonnegative();
        let x: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u = wpm_box(&x, &w, &b).unwrap();
        let oracle = projected_gradient(&x, &w, &b, 20000);
        for (a, o) in u.iter().zip(&oracle) {
            assert_abs_diff_eq!(a, o, epsilon = 1e-7);
        }
    }

    #[test]
    fn moreau_envelope_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let b = BoxSet::nonnegative();
        let w = random_metric(&mut rng, 10, 2, 0.5);
        let settings = NewtonSettings { eps: 1e-13, max_iter: 50 };
        let envelope = |x: &[f64]| {
            let (u, _) = wpm_box_with(x, &w, &b, &[0.0, 0.0], &settings).unwrap();
            objective(&u, x, &w)
        };
        // keep every coordinate well away from the kink at zero
        let x: Vec<f64> = (0..10)
            .map(|i| if i % 2 == 0 { rng.random_range(0.5..1.0) } else { rng.random_range(-1.0..-0.5) })
            .collect();
        let (u, _) = wpm_box_with(&x, &w, &b, &[0.0, 0.0], &settings).unwrap();
        let grad = w.apply(&crate::linalg::sub(&x, &u)).unwrap();
        let h = 1e-6;
        for i in 0..10 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (envelope(&xp) - envelope(&xm)) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-5 * grad[i].abs().max(1e-3), "{i}: {fd} vs {}", grad[i]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn optimality_and_nonexpansiveness(seed in any::<u64>(), r in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 24;
            let w = random_metric(&mut rng, n, r, 0.8);
            let b = BoxSet::nonnegative();
            let settings = NewtonSettings { eps: 1e-12, max_iter: 50 };
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let zero = vec![0.0; r];
            let (ux, rep) = wpm_box_with(&x, &w, &b, &zero, &settings).unwrap();
            prop_assert!(rep.converged);
            prop_assert!(b.contains(&ux));
            let (uy, _) = wpm_box_with(&y, &w, &b, &zero, &settings).unwrap();

            let lhs = w.norm_sq(&crate::linalg::sub(&ux, &uy)).unwrap().sqrt();
            let rhs = w.norm_sq(&crate::linalg::sub(&x, &y)).unwrap().sqrt();
            prop_assert!(lhs <= rhs + 1e-10);

            // <W(u* - x), v - u*> >= 0 for feasible v
            let g = w.apply(&crate::linalg::sub(&ux, &x)).unwrap();
            for _ in 0..100 {
                let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
                let vi = dot(&g, &crate::linalg::sub(&v, &ux));
                prop_assert!(vi >= -1e-8, "variational inequality violated: {}", vi);
            }
        }
    }
}
