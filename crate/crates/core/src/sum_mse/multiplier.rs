use crate::error::{Error, Result};
use crate::linalg::{identity, CMat, HermitianEigen, C64};

const MAX_BISECTIONS: usize = 200;

/// Spectral data of one power-constrained precoder subproblem.
///
/// With `Phi = U diag(d) U^H` and `A = U^H N` for the numerator `N`,
/// `tr{W^H W} = sum_n a_n / (d_n + offset + lambda)^2` where `a_n` is the
/// squared norm of row `n` of `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierProblem {
    pub d: Vec<f64>,
    pub a: Vec<f64>,
    pub offset: f64,
    /// Directions whose eigenvalue is numerically nonzero; the rest are
    /// excluded from `chi` and from the precoder.
    pub active: Vec<bool>,
    pub basis: CMat,
    pub projected: CMat,
}

impl MultiplierProblem {
    /// Problem with identity eigenbasis and numerator `diag(sqrt(a))`.
    pub fn from_parts(d: Vec<f64>, a: Vec<f64>, offset: f64) -> Result<Self> {
        if d.len() != a.len() {
            return Err(Error::Dimension(format!("d has {} entries, a has {}", d.len(), a.len())));
        }
        if a.iter().any(|&v| !(v >= 0.0)) || !(offset >= 0.0) {
            return Err(Error::Domain("multiplier data a and offset must be nonnegative".into()));
        }
        let n = d.len();
        let projected = CMat::from_fn(n, n, |i, j| if i == j { C64::new(a[i].sqrt(), 0.0) } else { C64::new(0.0, 0.0) });
        Ok(Self { active: vec![true; n], basis: identity(n), projected, d, a, offset })
    }

    /// `W(lambda) = U diag(1 / (d + offset + lambda)) U^H N` on the active directions.
    pub fn precoder(&self, lambda: f64) -> CMat {
        let mut scaled = self.projected.clone();
        for (k, mut row) in scaled.row_iter_mut().enumerate() {
            let den = self.d[k] + self.offset + lambda;
            let c = if self.active[k] && den > 0.0 { 1.0 / den } else { 0.0 };
            row.scale_mut(c);
        }
        &self.basis * scaled
    }

    /// `chi` with poles reported as `+inf`; negative denominators are errors.
    fn chi_raw(&self, lambda: f64) -> Result<f64> {
        let mut s = 0.0;
        for k in 0..self.d.len() {
            if !self.active[k] || self.a[k] == 0.0 {
                continue;
            }
            let den = self.d[k] + self.offset + lambda;
            if den < 0.0 {
                return Err(Error::Numerical(format!(
                    "negative denominator {den:e} in multiplier function (d = {:e})",
                    self.d[k]
                )));
            }
            if den == 0.0 {
                return Ok(f64::INFINITY);
            }
            s += self.a[k] / (den * den);
        }
        Ok(s - 1.0)
    }
}

/// Eigen-reduces `Phi` and the numerator `N` into a [`MultiplierProblem`].
/// Eigenvalues at or below `rel_cut * max eigenvalue` are marked inactive.
pub fn build_multiplier_problem(phi: &CMat, numerator: &CMat, offset: f64, rel_cut: f64) -> Result<MultiplierProblem> {
    if phi.nrows() != numerator.nrows() {
        return Err(Error::Dimension(format!(
            "Phi is {}x{} but numerator has {} rows",
            phi.nrows(),
            phi.ncols(),
            numerator.nrows()
        )));
    }
    if !(offset >= 0.0) {
        return Err(Error::Domain(format!("multiplier offset must be nonnegative, got {offset}")));
    }
    let eig = HermitianEigen::new(phi)?;
    let projected = eig.vectors.adjoint() * numerator;
    let a: Vec<f64> = projected.row_iter().map(|r| r.norm_squared()).collect();
    let dmax = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let cut = rel_cut * dmax;
    let active = eig.values.iter().map(|&d| dmax > 0.0 && d > cut).collect();
    Ok(MultiplierProblem { d: eig.values, a, offset, active, basis: eig.vectors, projected })
}

/// `chi(lambda) = sum_n a_n / (d_n + offset + lambda)^2 - 1`.
pub fn chi(problem: &MultiplierProblem, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::Contract(format!("multiplier must be nonnegative, got {lambda}")));
    }
    let v = problem.chi_raw(lambda)?;
    if v.is_infinite() {
        return Err(Error::Numerical(format!("multiplier function has a pole at lambda = {lambda}")));
    }
    Ok(v)
}

/// Smallest nonnegative `lambda` with `chi(lambda) <= 0`, located to `|chi| <= eps`.
///
/// Returns 0 when the unregularized solution already satisfies the power
/// budget. Otherwise bisects on `[0, sqrt(sum a)]`, where `chi <= 0` holds
/// at the upper end. Stops early if the bracket collapses to adjacent floats.
pub fn bisect_multiplier(problem: &MultiplierProblem, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Contract(format!("bisection tolerance must be positive, got {eps}")));
    }
    if problem.chi_raw(0.0)? <= 0.0 {
        return Ok(0.0);
    }
    let sum_a: f64 = problem.a.iter().zip(&problem.active).filter(|(_, &on)| on).map(|(a, _)| a).sum();
    let (mut lo, mut hi) = (0.0, sum_a.sqrt());
    let mut chi_hi = problem.chi_raw(hi)?;
    if chi_hi.abs() <= eps {
        return Ok(hi);
    }
    let mut chi_lo = f64::INFINITY;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let c = problem.chi_raw(mid)?;
        if c.abs() <= eps {
            return Ok(mid);
        }
        if c > 0.0 {
            lo = mid;
            chi_lo = c;
        } else {
            hi = mid;
            chi_hi = c;
        }
    }
    Ok(if chi_lo.abs() < chi_hi.abs() { lo } else { hi })
}
