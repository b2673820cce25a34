//! Masked-spectrum view operators and their smooth nonlinear extension.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{gaussian, MeasurementModel, SpectralTransform, ViewProblem};
use crate::error::{check_len, Error, Result};
use crate::grid::Grid;
use crate::Scalar;

/// Construction parameters shared by the linear and nonlinear view sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSpec {
    pub views: usize,
    /// `1` measures every orientation; smaller values open a missing cone
    /// of half-angle `(1 - mask_fraction) * pi / 2` around the last axis.
    pub mask_fraction: f64,
    /// Strength of the quadratic term; ignored by linear views.
    pub strength: f64,
    pub seed: u64,
    /// Additive complex Gaussian noise on the data at this SNR (dB).
    pub noise_snr_db: Option<f64>,
}

impl Default for ViewSpec {
    fn default() -> Self {
        Self {
            views: 12,
            mask_fraction: 0.8,
            strength: 0.0,
            seed: 0,
            noise_snr_db: None,
        }
    }
}

impl ViewSpec {
    fn validate(&self) -> Result<()> {
        if self.views == 0 {
            return Err(Error::InvalidParameter("at least one view is required".into()));
        }
        if !(self.mask_fraction > 0.0 && self.mask_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "mask_fraction must lie in (0, 1], got {}",
                self.mask_fraction
            )));
        }
        if !(self.strength >= 0.0 && self.strength.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "strength must be finite and nonnegative, got {}",
                self.strength
            )));
        }
        Ok(())
    }
}

/// Index of the conjugate-symmetric partner of flat index `i`.
fn hermitian_partner(grid: &Grid, i: usize) -> usize {
    let mut j = 0;
    for (axis, (&n, &stride)) in grid.dims().iter().zip(grid.strides()).enumerate() {
        let k = grid.coord(i, axis);
        j += ((n - k) % n) * stride;
    }
    j
}

/// Distance between two orientations modulo pi.
fn orientation_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Per-coefficient classification used by the masks.
#[derive(Debug, Clone, Copy)]
enum Coefficient {
    Dc,
    Cone,
    Oriented(f64),
}

fn classify<T: Scalar>(t: &SpectralTransform<T>, i: usize, cone_half_angle: f64) -> Coefficient {
    let grid = t.grid();
    let d = grid.ndim();
    let f: Vec<f64> = (0..d).map(|a| t.frequency(grid.coord(i, a), a)).collect();
    let radius = f.iter().map(|v| v * v).sum::<f64>().sqrt();
    if radius == 0.0 {
        return Coefficient::Dc;
    }
    if d == 1 {
        return Coefficient::Oriented(0.0);
    }
    let last = f[d - 1].abs();
    let transverse = (radius * radius - last * last).max(0.0).sqrt();
    // angle measured from the last axis
    if transverse.atan2(last) < cone_half_angle {
        return Coefficient::Cone;
    }
    Coefficient::Oriented(f[1].atan2(f[0]).rem_euclid(PI))
}

/// Binary masks for `views` views; `masks[v][i]` tells whether view `v`
/// measures spectral coefficient `i`.
fn build_masks<T: Scalar>(t: &SpectralTransform<T>, spec: &ViewSpec) -> Vec<Vec<bool>> {
    let grid = t.grid();
    let l = spec.views;
    let cone = (1.0 - spec.mask_fraction) * PI / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let offset: f64 = rng.random_range(0.0..PI / l as f64);
    let half_width = PI / l as f64;
    let mut masks = vec![vec![false; grid.len()]; l];
    for i in 0..grid.len() {
        // decide on the smaller index of each conjugate pair so both agree
        let rep = i.min(hermitian_partner(grid, i));
        match classify(t, rep, cone) {
            Coefficient::Dc => masks.iter_mut().for_each(|m| m[i] = true),
            Coefficient::Cone => {}
            Coefficient::Oriented(theta) => {
                if grid.ndim() == 1 || l == 1 {
                    masks.iter_mut().for_each(|m| m[i] = true);
                    continue;
                }
                for (v, m) in masks.iter_mut().enumerate() {
                    let center = offset + v as f64 * PI / l as f64;
                    if orientation_distance(theta, center) <= half_width {
                        m[i] = true;
                    }
                }
            }
        }
    }
    masks
}

/// `H x = M F x`: unitary spectral transform followed by a coefficient
/// selection; the data are the selected coefficients only.
#[derive(Debug)]
pub struct MaskedSpectrum<T: Scalar> {
    transform: Arc<SpectralTransform<T>>,
    support: Vec<usize>,
}

impl<T: Scalar> MaskedSpectrum<T> {
    fn new(transform: Arc<SpectralTransform<T>>, mask: &[bool]) -> Self {
        let support = mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect();
        Self { transform, support }
    }

    /// Flat spectral indices measured by this view, ascending.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn grid(&self) -> &Grid {
        self.transform.grid()
    }

    fn apply(&self, x: &[T]) -> Vec<Complex<T>> {
        let spectrum = self.transform.forward_real(x);
        self.support.iter().map(|&i| spectrum[i]).collect()
    }

    fn adjoint(&self, z: &[Complex<T>]) -> Vec<T> {
        let mut spectrum = vec![Complex::new(T::zero(), T::zero()); self.grid().len()];
        for (&i, &v) in self.support.iter().zip(z) {
            spectrum[i] = v;
        }
        self.transform.inverse(&mut spectrum);
        spectrum.into_iter().map(|c| c.re).collect()
    }
}

impl<T: Scalar> MeasurementModel<T> for MaskedSpectrum<T> {
    fn input_len(&self) -> usize {
        self.grid().len()
    }

    fn output_len(&self) -> usize {
        self.support.len()
    }

    fn forward(&self, x: &[T]) -> Vec<Complex<T>> {
        self.apply(x)
    }

    fn jacobian_apply(&self, _x: &[T], v: &[T]) -> Vec<Complex<T>> {
        self.apply(v)
    }

    fn jacobian_adjoint(&self, _x: &[T], z: &[Complex<T>]) -> Vec<T> {
        self.adjoint(z)
    }

    fn is_linear(&self) -> bool {
        true
    }
}

/// Separable `[1/4, 1/2, 1/4]` smoothing with replicated boundaries.
/// The resulting matrix is symmetric, so it is its own adjoint.
pub fn smoothing_apply<T: Scalar>(grid: &Grid, x: &[T]) -> Vec<T> {
    let (quarter, half) = (T::lit(0.25), T::lit(0.5));
    let mut cur = x.to_vec();
    for axis in 0..grid.ndim() {
        let n = grid.dims()[axis];
        if n == 1 {
            continue;
        }
        let stride = grid.strides()[axis];
        let mut next = vec![T::zero(); cur.len()];
        for (i, out) in next.iter_mut().enumerate() {
            let k = grid.coord(i, axis);
            let lo = if k == 0 { cur[i] } else { cur[i - stride] };
            let hi = if k + 1 == n { cur[i] } else { cur[i + stride] };
            *out = quarter * lo + half * cur[i] + quarter * hi;
        }
        cur = next;
    }
    cur
}

/// `H(x) = M F (x + s (A x) .* (A x))` with `A` the smoother of
/// [`smoothing_apply`].
#[derive(Debug)]
pub struct SmoothedQuadratic<T: Scalar> {
    linear: MaskedSpectrum<T>,
    strength: T,
}

impl<T: Scalar> SmoothedQuadratic<T> {
    pub fn strength(&self) -> T {
        self.strength
    }

    pub fn support(&self) -> &[usize] {
        self.linear.support()
    }
}

impl<T: Scalar> MeasurementModel<T> for SmoothedQuadratic<T> {
    fn input_len(&self) -> usize {
        self.linear.input_len()
    }

    fn output_len(&self) -> usize {
        self.linear.output_len()
    }

    fn forward(&self, x: &[T]) -> Vec<Complex<T>> {
        let ax = smoothing_apply(self.linear.grid(), x);
        let lifted: Vec<T> = x
            .iter()
            .zip(&ax)
            .map(|(&xi, &a)| xi + self.strength * a * a)
            .collect();
        self.linear.apply(&lifted)
    }

    fn jacobian_apply(&self, x: &[T], v: &[T]) -> Vec<Complex<T>> {
        let grid = self.linear.grid();
        let ax = smoothing_apply(grid, x);
        let av = smoothing_apply(grid, v);
        let two_s = T::lit(2.0) * self.strength;
        let dv: Vec<T> = v
            .iter()
            .zip(ax.iter().zip(&av))
            .map(|(&vi, (&a, &b))| vi + two_s * a * b)
            .collect();
        self.linear.apply(&dv)
    }

    fn jacobian_adjoint(&self, x: &[T], z: &[Complex<T>]) -> Vec<T> {
        let grid = self.linear.grid();
        let q = self.linear.adjoint(z);
        if self.strength == T::zero() {
            return q;
        }
        let ax = smoothing_apply(grid, x);
        let weighted: Vec<T> = ax.iter().zip(&q).map(|(&a, &r)| a * r).collect();
        let back = smoothing_apply(grid, &weighted);
        let two_s = T::lit(2.0) * self.strength;
        q.iter().zip(&back).map(|(&r, &b)| r + two_s * b).collect()
    }
}

fn noisy_data<T: Scalar>(
    clean: Vec<Complex<T>>,
    snr_db: Option<f64>,
    rng: &mut ChaCha8Rng,
) -> Vec<Complex<T>> {
    let Some(snr) = snr_db else { return clean };
    if clean.is_empty() {
        return clean;
    }
    let energy: T = clean.iter().map(|c| c.norm_sqr()).sum();
    // per real component so that ||noise|| ~ ||y|| 10^(-snr/20)
    let sigma = (energy * T::lit(10f64.powf(-snr / 10.0))
        / T::from_count(2 * clean.len()))
    .sqrt();
    clean
        .into_iter()
        .map(|c| c + Complex::new(gaussian::<T>(rng), gaussian::<T>(rng)) * sigma)
        .collect()
}

fn check_view<T: Scalar>(view: &ViewProblem<T>, seed: u64) -> Result<()> {
    let adjoint_tol = T::lit(1e4) * T::epsilon();
    let mismatch = view.adjoint_mismatch(seed);
    if !(mismatch <= adjoint_tol) {
        return Err(Error::InvalidParameter(format!(
            "view {} failed the adjoint test (mismatch {mismatch})",
            view.id
        )));
    }
    let step = T::epsilon().cbrt();
    let fd_tol = T::epsilon().cbrt().sqrt();
    let fd = view.gradient_mismatch(seed ^ 0x5eed, step);
    if !(fd <= fd_tol) {
        return Err(Error::InvalidParameter(format!(
            "view {} failed the finite-difference gradient test (mismatch {fd})",
            view.id
        )));
    }
    Ok(())
}

fn assemble<T: Scalar>(
    grid: &Grid,
    spec: &ViewSpec,
    truth: &[T],
    build: impl Fn(MaskedSpectrum<T>) -> Arc<dyn MeasurementModel<T>>,
) -> Result<Vec<ViewProblem<T>>> {
    spec.validate()?;
    check_len(grid.len(), truth.len())?;
    let transform = Arc::new(SpectralTransform::new(grid));
    let masks = build_masks(&transform, spec);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(1));
    let mut out = Vec::with_capacity(spec.views);
    for (id, mask) in masks.iter().enumerate() {
        let model = build(MaskedSpectrum::new(transform.clone(), mask));
        let y = noisy_data(model.forward(truth), spec.noise_snr_db, &mut noise_rng);
        let view = ViewProblem::new(id, model, y)?;
        check_view(&view, spec.seed.wrapping_add(id as u64))?;
        out.push(view);
    }
    Ok(out)
}

/// Linear views with data generated from `truth`.
pub fn make_linear_views<T: Scalar>(
    grid: &Grid,
    spec: &ViewSpec,
    truth: &[T],
) -> Result<Vec<ViewProblem<T>>> {
    assemble(grid, spec, truth, |m| Arc::new(m))
}

/// Nonlinear views sharing masks and noise with [`make_linear_views`]
/// for the same spec.
pub fn make_nonlinear_views<T: Scalar>(
    grid: &Grid,
    spec: &ViewSpec,
    truth: &[T],
) -> Result<Vec<ViewProblem<T>>> {
    let strength = T::lit(spec.strength);
    assemble(grid, spec, truth, move |m| {
        Arc::new(SmoothedQuadratic {
            linear: m,
            strength,
        })
    })
}
