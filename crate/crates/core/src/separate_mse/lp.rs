use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TIE_TOL: f64 = 1e-12;

/// `min c^T l  s.t.  sum(l) <= gamma,  x^T l <= alpha,  l >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub c: Vec<f64>,
    pub x: Vec<f64>,
    pub gamma: f64,
    pub alpha: f64,
}

impl LpProblem {
    pub fn new(c: Vec<f64>, x: Vec<f64>, gamma: f64, alpha: f64) -> Result<Self> {
        if c.len() != x.len() {
            return Err(Error::Dimension(format!("LP has {} costs but {} weights", c.len(), x.len())));
        }
        if !(gamma > 0.0 && alpha > 0.0) || !gamma.is_finite() || !alpha.is_finite() {
            return Err(Error::Domain(format!("LP budgets must be positive (gamma = {gamma}, alpha = {alpha})")));
        }
        if x.iter().any(|&v| !(v >= 0.0)) || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("LP weights must be nonnegative and costs finite".into()));
        }
        Ok(Self { c, x, gamma, alpha })
    }

    pub fn objective(&self, l: &[f64]) -> f64 {
        self.c.iter().zip(l).map(|(c, l)| c * l).sum()
    }

    /// Largest violation of any constraint (0 when feasible).
    pub fn violation(&self, l: &[f64]) -> f64 {
        let sum: f64 = l.iter().sum();
        let pow: f64 = self.x.iter().zip(l).map(|(x, l)| x * l).sum();
        let neg = l.iter().fold(0.0f64, |m, &v| m.max(-v));
        neg.max(sum - self.gamma).max(pow - self.alpha).max(0.0)
    }
}

fn point(n: usize, entries: &[(usize, f64)]) -> Vec<f64> {
    let mut l = vec![0.0; n];
    for &(k, v) in entries {
        l[k] = v;
    }
    l
}

/// Exact solution by enumerating every vertex with at most two nonzero
/// coordinates. Supports are visited in lexicographic order and a later
/// vertex replaces the incumbent only if it is better by more than a
/// relative `1e-12`, so ties go to the lexicographically smallest support.
pub fn solve_lp(lp: &LpProblem) -> Vec<f64> {
    let n = lp.c.len();
    let mut best = vec![0.0; n];
    let mut best_val = 0.0f64;
    let mut consider = |cand: Vec<f64>| {
        let v = lp.objective(&cand);
        if v < best_val - TIE_TOL * best_val.abs().max(v.abs()) {
            best_val = v;
            best = cand;
        }
    };
    for i in 0..n {
        let li = if lp.x[i] > 0.0 { lp.gamma.min(lp.alpha / lp.x[i]) } else { lp.gamma };
        consider(point(n, &[(i, li)]));
        for j in i + 1..n {
            let dx = lp.x[i] - lp.x[j];
            if dx == 0.0 {
                continue;
            }
            let vi = (lp.alpha - lp.x[j] * lp.gamma) / dx;
            let vj = lp.gamma - vi;
            if vi > 0.0 && vj > 0.0 {
                consider(point(n, &[(i, vi), (j, vj)]));
            }
        }
    }
    best
}
