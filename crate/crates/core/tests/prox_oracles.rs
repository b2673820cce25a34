#[path = "support/oracles.rs"]
mod oracles;

use bqnpm::dual_tv::{solve, DualTvProblem, DualTvSettings};
use bqnpm::tv::{dual_adjoint, tv_value};
use bqnpm::wpm::wpm_box;
use bqnpm::{BoxSet, DiagPlusLowRank, Grid, MetricSign, TvMode};
use oracles::Metric;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tight() -> DualTvSettings<f64> {
    DualTvSettings { eps: 1e-10, max_iter: 20_000, ..DualTvSettings::default() }
}

#[test]
fn oracle_differences_agree_with_the_library() {
    let g = Grid::new(&[5, 4, 3]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let ours = dual_adjoint(&g, &x).unwrap();
    let theirs = oracles::grad(g.dims(), &x);
    for (a, row) in theirs.iter().enumerate() {
        assert_eq!(ours.row(a), &row[..]);
    }
    let tv = tv_value(&g, &x, TvMode::Isotropic).unwrap();
    assert!((tv - oracles::tv_iso(g.dims(), &x)).abs() < 1e-12);
}

#[test]
fn weighted_prox_matches_primal_dual_oracle() {
    let g = Grid::new(&[8, 8]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let bounds = BoxSet::nonnegative();
    for _ in 0..5 {
        let v: Vec<f64> = (0..64).map(|_| rng.random_range(-0.5..1.5)).collect();
        let tau = rng.random_range(0.5..2.0);
        let u: Vec<f64> = (0..64).map(|_| rng.random_range(-0.2..0.2)).collect();
        let reg = rng.random_range(0.05..0.5);
        let w = DiagPlusLowRank::new(64, tau, vec![u.clone()], MetricSign::Plus).unwrap();
        let prob = DualTvProblem::new(&g, &v, &w, reg, TvMode::Isotropic, &bounds).unwrap();
        let ours = solve(&prob, None, &tight()).unwrap().primal;
        let m = Metric { tau, cols: vec![u], sign: 1.0 };
        let reference = oracles::weighted_tv_prox(g.dims(), &m, &v, reg, 0.0, f64::INFINITY, 100_000);
        let f_ours = oracles::tv_prox_objective(g.dims(), &m, &v, reg, &ours);
        let f_ref = oracles::tv_prox_objective(g.dims(), &m, &v, reg, &reference);
        assert!((f_ours - f_ref) / f_ref.abs() <= 1e-4, "{f_ours} vs {f_ref}");
        assert!(ours.iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn identity_unbounded_prox_matches_fgp() {
    let g = Grid::new(&[8, 8]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let bounds = BoxSet::unbounded();
    let w = DiagPlusLowRank::scaled_identity(64, 1.0).unwrap();
    let m = Metric { tau: 1.0, cols: vec![], sign: 1.0 };
    for _ in 0..5 {
        let v: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let reg = rng.random_range(0.05..0.5);
        let prob = DualTvProblem::new(&g, &v, &w, reg, TvMode::Isotropic, &bounds).unwrap();
        let ours = solve(&prob, None, &tight()).unwrap().primal;
        let reference = oracles::fgp_denoise(g.dims(), &v, reg, 20_000);
        let f_ours = oracles::tv_prox_objective(g.dims(), &m, &v, reg, &ours);
        let f_ref = oracles::tv_prox_objective(g.dims(), &m, &v, reg, &reference);
        assert!((f_ours - f_ref).abs() <= 1e-6 * f_ref.abs().max(1.0), "{f_ours} vs {f_ref}");
    }
}

#[test]
fn wpm_matches_projected_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..10 {
        let n = rng.random_range(2..=64);
        let r = rng.random_range(0..=4);
        let tau = rng.random_range(0.5..2.0);
        let cols: Vec<Vec<f64>> = (0..r).map(|_| (0..n).map(|_| rng.random_range(-0.5..0.5)).collect()).collect();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = DiagPlusLowRank::new(n, tau, cols.clone(), MetricSign::Plus).unwrap();
        let u = wpm_box(&x, &w, &BoxSet::nonnegative()).unwrap();
        let m = Metric { tau, cols, sign: 1.0 };
        let reference = oracles::wpm_nonnegative(&m, &x, 100_000);
        let (a, b) = (oracles::wpm_objective(&m, &x, &u), oracles::wpm_objective(&m, &x, &reference));
        assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-12), "trial {trial}: {a} vs {b}");
    }
}
