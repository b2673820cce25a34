//! Memory-frugal symmetric rank-one Hessian estimates `B = tau I + u u^T`.

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm};
use crate::wpm::{DiagPlusLowRank, MetricSign};
use crate::Scalar;

/// Default damping of the Barzilai-Borwein-type diagonal.
pub const DEFAULT_GAMMA: f64 = 0.8;

/// Relative threshold of the SR1 skip rule.
const SKIP_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Sr1Estimate<T> {
    pub tau: T,
    /// Rank-one factor; all zeros when the correction was skipped.
    pub u: Vec<T>,
}

impl<T: Scalar> Sr1Estimate<T> {
    pub fn scaled_identity(dim: usize, tau: T) -> Self {
        Self {
            tau,
            u: vec![T::zero(); dim],
        }
    }

    pub fn has_correction(&self) -> bool {
        self.u.iter().any(|&v| v != T::zero())
    }

    /// `B v`.
    pub fn apply(&self, v: &[T]) -> Vec<T> {
        let c = dot(&self.u, v);
        v.iter().zip(&self.u).map(|(&vi, &ui)| self.tau * vi + c * ui).collect()
    }

    pub fn to_metric(&self) -> Result<DiagPlusLowRank<T>> {
        let cols = if self.has_correction() {
            vec![self.u.clone()]
        } else {
            Vec::new()
        };
        DiagPlusLowRank::new(self.u.len(), self.tau, cols, MetricSign::Plus)
    }
}

/// SR1 estimate from the secant pair `(s, m)`.
///
/// `tau = gamma <m,m> / <s,m>`; a non-positive curvature ratio falls back to
/// `alpha_fallback I`. Otherwise the rank-one correction of `tau I` through
/// the secant equation `B s = m` is added unless it is ill-defined.
pub fn estimate_sr1<T: Scalar>(
    s: &[T],
    m: &[T],
    gamma: T,
    alpha_fallback: T,
) -> Result<Sr1Estimate<T>> {
    check_len(s.len(), m.len())?;
    if !(gamma > T::zero() && gamma < T::one()) {
        return Err(Error::InvalidParameter(format!("gamma must lie in (0,1), got {gamma}")));
    }
    if !(alpha_fallback > T::zero()) {
        return Err(Error::InvalidParameter("fallback curvature must be positive".into()));
    }
    let s_norm = norm(s);
    if s_norm == T::zero() {
        return Err(Error::DegenerateStep);
    }
    let sm = dot(s, m);
    let tau = gamma * dot(m, m) / sm;
    if !(sm != T::zero() && tau > T::zero() && tau.is_finite()) {
        return Ok(Sr1Estimate::scaled_identity(s.len(), alpha_fallback));
    }
    let residual: Vec<T> = m.iter().zip(s).map(|(&mi, &si)| mi - tau * si).collect();
    let curvature = dot(&residual, s);
    let skip = curvature <= T::lit(SKIP_THRESHOLD) * s_norm * norm(&residual) || curvature <= T::zero();
    let u = if skip {
        vec![T::zero(); s.len()]
    } else {
        let inv = T::one() / curvature.sqrt();
        residual.into_iter().map(|v| v * inv).collect()
    };
    Ok(Sr1Estimate { tau, u })
}
