//! Seeded sphere phantoms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhantomKind {
    /// Several scattered inclusions of varying contrast.
    #[default]
    MultiSphere,
    /// Concentric-ish shells, contrast increasing towards the core.
    Nested,
}

/// A ball in normalized coordinates (each axis mapped to `[0, 1]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Sphere {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Fraction of the full contrast `eta_max - eta_m`, in `(0, 1]`.
    pub level: f64,
}

impl Sphere {
    fn contains(&self, p: &[f64]) -> bool {
        let d2: f64 = self.center.iter().zip(p).map(|(c, x)| (c - x).powi(2)).sum();
        d2 <= self.radius * self.radius
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom<T> {
    pub grid: Grid,
    pub values: Vec<T>,
    pub eta_m: T,
    pub eta_max: T,
    pub spheres: Vec<Sphere>,
}

impl<T: Scalar> Phantom<T> {
    /// The reconstruction target `values - eta_m`, nonnegative.
    pub fn contrast(&self) -> Vec<T> {
        self.values.iter().map(|&v| v - self.eta_m).collect()
    }
}

fn layout(kind: PhantomKind, ndim: usize, rng: &mut ChaCha8Rng) -> Vec<Sphere> {
    let mut point = |lo: f64, hi: f64| -> Vec<f64> { (0..ndim).map(|_| rng.random_range(lo..hi)).collect() };
    match kind {
        PhantomKind::MultiSphere => {
            let mut spheres = vec![Sphere {
                center: point(0.45, 0.55),
                radius: 0.34,
                level: 0.3,
            }];
            for level in [0.55, 0.8, 1.0] {
                spheres.push(Sphere {
                    center: point(0.3, 0.7),
                    radius: 0.08 + 0.07 * (1.0 - level),
                    level,
                });
            }
            spheres
        }
        PhantomKind::Nested => {
            let core = point(0.45, 0.55);
            [(0.38, 0.25), (0.26, 0.5), (0.16, 0.75), (0.07, 1.0)]
                .into_iter()
                .map(|(radius, level)| Sphere {
                    center: core.clone(),
                    radius,
                    level,
                })
                .collect()
        }
    }
}

/// Deterministic phantom with background `eta_m` and peak `eta_max`.
pub fn make_phantom<T: Scalar>(
    grid: &Grid,
    kind: PhantomKind,
    eta_m: T,
    eta_max: T,
    seed: u64,
) -> Result<Phantom<T>> {
    if !(eta_max >= eta_m) {
        return Err(Error::InvalidParameter(format!(
            "eta_max ({eta_max}) must not be below eta_m ({eta_m})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spheres = layout(kind, grid.ndim(), &mut rng);
    let contrast = eta_max - eta_m;
    let values = (0..grid.len())
        .map(|i| {
            let p: Vec<f64> = grid
                .multi_index(i)
                .iter()
                .zip(grid.dims())
                .map(|(&k, &n)| (k as f64 + 0.5) / n as f64)
                .collect();
            let level = spheres
                .iter()
                .filter(|s| s.contains(&p))
                .map(|s| s.level)
                .fold(0.0, f64::max);
            eta_m + contrast * T::lit(level)
        })
        .collect();
    Ok(Phantom {
        grid: grid.clone(),
        values,
        eta_m,
        eta_max,
        spheres,
    })
}
