//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

const EIGEN_MAX_SWEEPS: usize = 100_000;

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Squared Frobenius norm, i.e. `tr{A^H A}`.
pub fn fro2(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn fro(m: &CMat) -> f64 {
    fro2(m).sqrt()
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Real part of the trace.
pub fn trace_re(m: &CMat) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Columns of `vectors` are orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn new(m: &CMat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "eigendecomposition needs a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        if n == 0 {
            return Ok(Self { values: vec![], vectors: zeros(0, 0) });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite entry in {n}x{n} Hermitian matrix (fro norm {:e})",
                fro(m)
            )));
        }
        let h = hermitian_part(m);
        let eig = SymmetricEigen::try_new(h, f64::EPSILON, EIGEN_MAX_SWEEPS).ok_or_else(|| {
            Error::Numerical(format!(
                "Hermitian eigendecomposition did not converge ({n}x{n}, fro norm {:e})",
                fro(m)
            ))
        })?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut vectors = zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Ok(Self { values, vectors })
    }

    /// `V f(D) V^H` for a real function of the eigenvalues.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMat {
        let mut scaled = self.vectors.clone();
        for (k, &v) in self.values.iter().enumerate() {
            let s = f(v);
            scaled.column_mut(k).scale_mut(s);
        }
        scaled * self.vectors.adjoint()
    }
}

/// Thin SVD `A = U diag(s) V^H` with singular values sorted descending.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: CMat,
    pub singular_values: Vec<f64>,
    pub v: CMat,
}

impl ThinSvd {
    pub fn new(m: &CMat) -> Result<Self> {
        let (r, c) = m.shape();
        let k = r.min(c);
        if k == 0 {
            return Ok(Self { u: zeros(r, 0), singular_values: vec![], v: zeros(c, 0) });
        }
        let fm = faer::Mat::<faer::c64>::from_fn(r, c, |i, j| faer::c64::new(m[(i, j)].re, m[(i, j)].im));
        let svd = fm
            .thin_svd()
            .map_err(|_| Error::Numerical(format!("SVD did not converge ({r}x{c}, fro norm {:e})", fro(m))))?;
        let (fu, fs, fv) = (svd.U(), svd.S(), svd.V());
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| fs[b].re.total_cmp(&fs[a].re));
        let mut u = zeros(r, k);
        let mut v = zeros(c, k);
        let mut singular_values = Vec::with_capacity(k);
        for (dst, &src) in order.iter().enumerate() {
            for i in 0..r {
                u[(i, dst)] = C64::new(fu[(i, src)].re, fu[(i, src)].im);
            }
            for i in 0..c {
                v[(i, dst)] = C64::new(fv[(i, src)].re, fv[(i, src)].im);
            }
            singular_values.push(fs[src].re);
        }
        Ok(Self { u, singular_values, v })
    }

    /// Number of singular values above `max(m, n) * eps * s_max`.
    pub fn numerical_rank(&self, rows: usize, cols: usize) -> usize {
        let smax = self.singular_values.first().copied().unwrap_or(0.0);
        if smax == 0.0 {
            return 0;
        }
        let thresh = rows.max(cols) as f64 * f64::EPSILON * smax;
        self.singular_values.iter().filter(|&&s| s > thresh).count()
    }
}

/// Solves `C X = B` for Hermitian positive definite `C`.
///
/// Falls back to a ridge-loaded solve when the Cholesky factorization fails;
/// the second element of the result reports whether the ridge was needed.
pub fn solve_hpd(c: &CMat, b: &CMat, rel_ridge: f64) -> Result<(CMat, bool)> {
    let h = hermitian_part(c);
    if let Some(ch) = Cholesky::new(h.clone()) {
        return Ok((ch.solve(b), false));
    }
    let n = h.nrows().max(1);
    let scale = trace_re(&h).abs() / n as f64;
    let ridge = if scale > 0.0 { rel_ridge * scale } else { rel_ridge.max(f64::MIN_POSITIVE) };
    let loaded = &h + identity(h.nrows()).scale(ridge);
    Cholesky::new(loaded)
        .map(|ch| (ch.solve(b), true))
        .ok_or_else(|| Error::Numerical(format!("singular {n}x{n} system even after ridge loading {ridge:e}")))
}

/// Block-diagonal assembly of possibly rectangular blocks.
pub fn block_diag(blocks: &[CMat]) -> CMat {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        out.view_mut((r0, c0), b.shape()).copy_from(b);
        r0 += b.nrows();
        c0 += b.ncols();
    }
    out
}

/// Horizontal concatenation; all blocks must share the row count `rows`.
pub fn hstack(rows: usize, blocks: &[&CMat]) -> CMat {
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let mut c0 = 0;
    for b in blocks {
        debug_assert_eq!(b.nrows(), rows);
        out.view_mut((0, c0), b.shape()).copy_from(*b);
        c0 += b.ncols();
    }
    out
}

/// Matrix of i.i.d. circularly-symmetric CN(0, 1) entries.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(s * re, s * im)
    })
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}
