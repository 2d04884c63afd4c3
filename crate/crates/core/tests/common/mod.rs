#![allow(dead_code)]

use hetnet_mse::channel::{Gains, SystemDims};
use hetnet_mse::linalg::{CMat, C64};
use hetnet_mse::montecarlo::{realize, Realization, Scenario};
use hetnet_mse::sum_mse::AlgoConfig;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Binomial, DiscreteCDF};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small two-tier layout used by the monotonicity and stationarity checks.
pub fn small_dims() -> SystemDims {
    SystemDims { n_bs: 8, n_sc: 4, n_ue: 2, n_s: 1, k_mue: 2, s_cells: 2, l_sue: vec![2, 2] }
}

pub fn small_scenario() -> Scenario {
    Scenario { dims: small_dims(), ..Scenario::default() }
}

pub fn instance(scenario: &Scenario, seed: u64) -> Realization {
    realize(scenario, seed).expect("realization")
}

pub fn long_run() -> AlgoConfig {
    AlgoConfig { max_iters: 50, rel_tol: 0.0, ..AlgoConfig::default() }
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

/// Same-shape random direction scaled to the Frobenius norm of `like`.
pub fn direction_like<R: Rng>(rng: &mut R, like: &[&CMat]) -> Vec<CMat> {
    let mut d: Vec<CMat> = like.iter().map(|m| random_matrix(rng, m.nrows(), m.ncols())).collect();
    let target: f64 = like.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt();
    let cur: f64 = d.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt();
    for m in &mut d {
        *m *= C64::new(target / cur, 0.0);
    }
    d
}

/// Central-difference derivative of `f(t)` at 0.
pub fn central_difference(f: impl Fn(f64) -> f64, t: f64) -> f64 {
    (f(t) - f(-t)) / (2.0 * t)
}

/// Brute-force LP optimum: every choice of `n` active constraints among the
/// `n + 2` rows of `[1^T; x^T; -I]`, solved by LU and filtered for feasibility.
pub fn lp_vertex_oracle(c: &[f64], x: &[f64], gamma: f64, alpha: f64) -> f64 {
    let n = c.len();
    let m = n + 2;
    let row = |k: usize| -> (Vec<f64>, f64) {
        match k {
            0 => (vec![1.0; n], gamma),
            1 => (x.to_vec(), alpha),
            _ => {
                let mut r = vec![0.0; n];
                r[k - 2] = -1.0;
                (r, 0.0)
            }
        }
    };
    let mut best = f64::INFINITY;
    let mut subset = vec![0usize; n];
    fn rec(start: usize, depth: usize, m: usize, subset: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        if depth == subset.len() {
            visit(subset);
            return;
        }
        for k in start..m {
            subset[depth] = k;
            rec(k + 1, depth + 1, m, subset, visit);
        }
    }
    let mut visit = |s: &[usize]| {
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut b = DVector::<f64>::zeros(n);
        for (i, &k) in s.iter().enumerate() {
            let (r, rhs) = row(k);
            for j in 0..n {
                a[(i, j)] = r[j];
            }
            b[i] = rhs;
        }
        let Some(sol) = a.lu().solve(&b) else { return };
        if sol.iter().any(|v| !v.is_finite()) {
            return;
        }
        let feasible = (0..m).all(|k| {
            let (r, rhs) = row(k);
            let lhs: f64 = r.iter().zip(sol.iter()).map(|(a, b)| a * b).sum();
            lhs <= rhs + 1e-10 * (1.0 + rhs.abs())
        });
        if feasible {
            let v: f64 = c.iter().zip(sol.iter()).map(|(a, b)| a * b).sum();
            best = best.min(v);
        }
    };
    rec(0, 0, m, &mut subset, &mut visit);
    best
}

/// One-sided sign test: probability of at least `k` successes out of `n` fair coin flips.
pub fn sign_test_p(k: usize, n: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, n as u64).unwrap();
    b.sf(k as u64 - 1)
}

/// Paired differences `b - a`; returns `(positives, negatives, mean)`.
pub fn paired(a: &[f64], b: &[f64]) -> (usize, usize, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let pos = d.iter().filter(|&&v| v > 0.0).count();
    let neg = d.iter().filter(|&&v| v < 0.0).count();
    (pos, neg, d.iter().sum::<f64>() / d.len() as f64)
}

/// Leakage of `w` into the other users served by the same node.
pub fn bd_leakage(g: &Gains, w: &hetnet_mse::sum_mse::PrecoderSet) -> f64 {
    let mut worst: f64 = 0.0;
    for tx in g.dims.transmitters() {
        let served = g.dims.served_by(tx);
        for &u in &served {
            let wu = w.user(u).clone_owned();
            for &v in &served {
                if v == u {
                    continue;
                }
                let gv = g.link(tx, v).clone_owned();
                let leak = (gv.adjoint() * &wu).norm();
                let scale = gv.norm() * wu.norm();
                if scale > 0.0 {
                    worst = worst.max(leak / scale);
                }
            }
        }
    }
    worst
}

pub fn q_function(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}
