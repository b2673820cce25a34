//! Slow, dense reference solvers written independently of the library.
#![allow(dead_code)]

/// Strides with the first axis fastest.
fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for a in 1..dims.len() {
        s[a] = s[a - 1] * dims[a - 1];
    }
    s
}

fn coord(dims: &[usize], i: usize, axis: usize) -> usize {
    (i / strides(dims)[axis]) % dims[axis]
}

/// Forward differences per axis, zero on the last slice.
pub fn grad(dims: &[usize], x: &[f64]) -> Vec<Vec<f64>> {
    let st = strides(dims);
    (0..dims.len())
        .map(|a| {
            (0..x.len())
                .map(|i| if coord(dims, i, a) + 1 < dims[a] { x[i + st[a]] - x[i] } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Exact adjoint of [`grad`].
pub fn grad_adjoint(dims: &[usize], p: &[Vec<f64>]) -> Vec<f64> {
    let st = strides(dims);
    let n = p[0].len();
    let mut out = vec![0.0; n];
    for (a, pa) in p.iter().enumerate() {
        for i in 0..n {
            if coord(dims, i, a) + 1 < dims[a] {
                out[i + st[a]] += pa[i];
                out[i] -= pa[i];
            }
        }
    }
    out
}

pub fn tv_iso(dims: &[usize], x: &[f64]) -> f64 {
    let g = grad(dims, x);
    (0..x.len()).map(|i| g.iter().map(|r| r[i] * r[i]).sum::<f64>().sqrt()).sum()
}

/// `W = tau I + sign * U U^T`, applied densely.
#[derive(Debug, Clone)]
pub struct Metric {
    pub tau: f64,
    pub cols: Vec<Vec<f64>>,
    pub sign: f64,
}

impl Metric {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = x.iter().map(|v| self.tau * v).collect();
        for c in &self.cols {
            let d: f64 = c.iter().zip(x).map(|(a, b)| a * b).sum();
            out.iter_mut().zip(c).for_each(|(o, ci)| *o += self.sign * d * ci);
        }
        out
    }

    pub fn norm_sq(&self, x: &[f64]) -> f64 {
        self.apply(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Upper bound on the largest eigenvalue.
    pub fn lmax_bound(&self) -> f64 {
        if self.sign > 0.0 {
            self.tau + self.cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>()).sum::<f64>()
        } else {
            self.tau
        }
    }
}

/// `1/2 ||u - x||_W^2`.
pub fn wpm_objective(m: &Metric, x: &[f64], u: &[f64]) -> f64 {
    let d: Vec<f64> = u.iter().zip(x).map(|(a, b)| a - b).collect();
    0.5 * m.norm_sq(&d)
}

/// Accelerated projected gradient for `min_{u >= 0} 1/2 ||u - x||_W^2`.
pub fn wpm_nonnegative(m: &Metric, x: &[f64], iters: usize) -> Vec<f64> {
    let step = 1.0 / m.lmax_bound();
    let mut u: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let mut y = u.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let d: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        let g = m.apply(&d);
        let next: Vec<f64> = y.iter().zip(&g).map(|(a, b)| (a - step * b).max(0.0)).collect();
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let change: f64 = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        y = next.iter().zip(&u).map(|(a, b)| a + (t - 1.0) / t_next * (a - b)).collect();
        u = next;
        t = t_next;
        if change == 0.0 {
            break;
        }
    }
    u
}

/// `1/2 ||x - v||_W^2 + reg TV_iso(x)`.
pub fn tv_prox_objective(dims: &[usize], m: &Metric, v: &[f64], reg: f64, x: &[f64]) -> f64 {
    wpm_objective(m, v, x) + reg * tv_iso(dims, x)
}

/// Condat-Vu primal-dual iteration for
/// `min_{lo <= x <= hi} 1/2 ||x - v||_W^2 + reg TV_iso(x)`.
pub fn weighted_tv_prox(dims: &[usize], m: &Metric, v: &[f64], reg: f64, lo: f64, hi: f64, iters: usize) -> Vec<f64> {
    let d = dims.len();
    let n = v.len();
    let beta = m.lmax_bound();
    let sigma = 1.0;
    // 1/tau - sigma ||D||^2 >= beta / 2 with ||D||^2 <= 4 d
    let tau_p = 1.0 / (beta / 2.0 + sigma * 4.0 * d as f64) * 0.99;
    let mut x: Vec<f64> = v.iter().map(|a| a.clamp(lo, hi)).collect();
    let mut y = vec![vec![0.0; n]; d];
    let mut best = x.clone();
    let mut best_obj = tv_prox_objective(dims, m, v, reg, &x);
    for it in 0..iters {
        let diff: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - b).collect();
        let g = m.apply(&diff);
        let dty = grad_adjoint(dims, &y);
        let xn: Vec<f64> = (0..n).map(|i| (x[i] - tau_p * (g[i] + dty[i])).clamp(lo, hi)).collect();
        let bar: Vec<f64> = (0..n).map(|i| 2.0 * xn[i] - x[i]).collect();
        let gb = grad(dims, &bar);
        for i in 0..n {
            let mut norm = 0.0;
            for a in 0..d {
                y[a][i] += sigma * gb[a][i];
                norm += y[a][i] * y[a][i];
            }
            let s = (norm.sqrt() / reg).max(1.0);
            for row in y.iter_mut() {
                row[i] /= s;
            }
        }
        x = xn;
        if it % 100 == 99 || it + 1 == iters {
            let obj = tv_prox_objective(dims, m, v, reg, &x);
            if obj < best_obj {
                best_obj = obj;
                best = x.clone();
            }
        }
    }
    best
}

/// Fast gradient projection on the dual of `min_x 1/2 ||x - v||^2 + reg TV_iso(x)`.
pub fn fgp_denoise(dims: &[usize], v: &[f64], reg: f64, iters: usize) -> Vec<f64> {
    let d = dims.len();
    let n = v.len();
    let step = 1.0 / (4.0 * d as f64 * reg);
    let primal = |q: &[Vec<f64>]| -> Vec<f64> {
        let a = grad_adjoint(dims, q);
        (0..n).map(|i| v[i] - reg * a[i]).collect()
    };
    let mut p = vec![vec![0.0; n]; d];
    let mut q = p.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let g = grad(dims, &primal(&q));
        let mut next = q.clone();
        for i in 0..n {
            let mut norm = 0.0;
            for a in 0..d {
                next[a][i] += step * g[a][i];
                norm += next[a][i] * next[a][i];
            }
            let s = norm.sqrt().max(1.0);
            for row in next.iter_mut() {
                row[i] /= s;
            }
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        for a in 0..d {
            for i in 0..n {
                q[a][i] = next[a][i] + (t - 1.0) / t_next * (next[a][i] - p[a][i]);
            }
        }
        p = next;
        t = t_next;
    }
    primal(&p)
}
