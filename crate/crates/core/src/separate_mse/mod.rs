//! Non-iterative two-level precoding: block diagonalization against the
//! other users of the same node, then a per-user power allocation obtained
//! from a two-constraint LP in an interference-whitened SVD basis.

mod lp;

pub use lp::{solve_lp, LpProblem};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::channel::{Gains, Tx, User};
use crate::error::{Error, Result};
use crate::linalg::{fro2, hstack, identity, solve_hpd, trace_re, CMat, HermitianEigen, ThinSvd};
use crate::sum_mse::{Iterate, PrecoderSet, ReceiverSet};

const LOADING: f64 = 1e-10;
const RECEIVER_RIDGE: f64 = 1e-12;

/// Null-space data of one user's block-diagonalization constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct BdDecomposition {
    /// Gains of the other users served by the same node.
    pub gbar: CMat,
    /// Orthonormal basis of the null space of `gbar^H`.
    pub v0: CMat,
    /// Orthonormal basis of the range of `gbar`.
    pub v1: CMat,
    pub singular_values: Vec<f64>,
}

/// Interference whitener `B` and the SVD `G_dir^H B^{-1} = P diag(sigma) T^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct WhitenedSvd {
    pub b: CMat,
    pub b_inv: CMat,
    pub p: CMat,
    pub sigma: Vec<f64>,
    pub t: CMat,
    /// Diagonal loading added to `G_cross G_cross^H` (0 if none).
    pub loading: f64,
}

/// Interference budgets per node; power budgets are fixed at 1 per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub gamma_bs: f64,
    pub gamma_sc: Vec<f64>,
}

impl Budgets {
    /// `10 * sigma0^2 * (number of users)` for every node.
    pub fn default_for(dims: &crate::channel::SystemDims, sigma0_sq: f64) -> Self {
        let g = 10.0 * sigma0_sq * dims.total_users() as f64;
        Self { gamma_bs: g, gamma_sc: vec![g; dims.s_cells] }
    }

    /// Every node gets the same budget `gamma`.
    pub fn uniform(dims: &crate::channel::SystemDims, gamma: f64) -> Self {
        Self { gamma_bs: gamma, gamma_sc: vec![gamma; dims.s_cells] }
    }

    pub fn gamma(&self, tx: Tx) -> f64 {
        match tx {
            Tx::Bs => self.gamma_bs,
            Tx::Sc(s) => self.gamma_sc[s],
        }
    }
}

/// One user's LP instance and its solution, for offline inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpRecord {
    pub user: String,
    pub problem: LpProblem,
    pub solution: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparateDesign {
    pub w: PrecoderSet,
    pub r: ReceiverSet,
    pub lps: Vec<LpRecord>,
}

/// Orthonormal basis of the null space of `gbar^H` (`rows` is the antenna count,
/// needed when `gbar` has no columns).
pub fn bd_null_basis(gbar: &CMat, rows: usize) -> Result<BdDecomposition> {
    if gbar.ncols() == 0 || fro2(gbar) == 0.0 {
        return Ok(BdDecomposition {
            gbar: CMat::zeros(rows, gbar.ncols()),
            v0: identity(rows),
            v1: CMat::zeros(rows, 0),
            singular_values: vec![0.0; rows.min(gbar.ncols())],
        });
    }
    let svd = ThinSvd::new(gbar)?;
    let rank = svd.numerical_rank(gbar.nrows(), gbar.ncols());
    if rank >= rows {
        return Err(Error::InfeasibleBd { user: String::from("(unspecified)") });
    }
    let v1 = svd.u.columns(0, rank).clone_owned();
    let proj = identity(rows) - &v1 * v1.adjoint();
    let eig = HermitianEigen::new(&proj)?;
    let n0 = eig.values.iter().filter(|&&v| v > 0.5).count();
    let v0 = eig.vectors.columns(0, n0).clone_owned();
    Ok(BdDecomposition { gbar: gbar.clone(), v0, v1, singular_values: svd.singular_values })
}

/// Builds `B = (G_c G_c^H + delta I)^{1/2}` from the projected cross gains and
/// takes the SVD of `G_d^H B^{-1}`. `B = I` when there is no cross interference.
pub fn whiten_and_svd(g_tilde_direct: &CMat, g_tilde_cross: &CMat) -> Result<WhitenedSvd> {
    let n = g_tilde_direct.nrows();
    if g_tilde_cross.nrows() != n && g_tilde_cross.ncols() > 0 {
        return Err(Error::Dimension("direct and cross gains have different row counts".into()));
    }
    let (b, b_inv, loading) = if g_tilde_cross.ncols() == 0 || fro2(g_tilde_cross) == 0.0 {
        (identity(n), identity(n), 0.0)
    } else {
        let c = g_tilde_cross * g_tilde_cross.adjoint();
        let eig = HermitianEigen::new(&c)?;
        let dmax = eig.values.first().copied().unwrap_or(0.0);
        let dmin = eig.values.last().copied().unwrap_or(0.0);
        let loading = if dmin <= n as f64 * f64::EPSILON * dmax { LOADING * trace_re(&c) / n as f64 } else { 0.0 };
        let b = eig.map(|d| (d.max(0.0) + loading).sqrt());
        let b_inv = eig.map(|d| 1.0 / (d.max(0.0) + loading).sqrt());
        if !crate::linalg::is_finite(&b_inv) {
            return Err(Error::Numerical(format!("interference whitener singular after loading {loading:e}")));
        }
        (b, b_inv, loading)
    };
    let a = g_tilde_direct.adjoint() * &b_inv;
    let svd = ThinSvd::new(&a)?;
    Ok(WhitenedSvd { b, b_inv, p: svd.u, sigma: svd.singular_values, t: svd.v, loading })
}

/// `c_n = -sigma_n^2`, `x_n = (T^H B^{-2} T)_{nn}`.
pub fn build_lp(svd: &WhitenedSvd, gamma: f64, alpha: f64) -> Result<LpProblem> {
    let bt = &svd.b_inv * &svd.t;
    let x = bt.column_iter().map(|c| c.norm_squared()).collect();
    let c = svd.sigma.iter().map(|s| -s * s).collect();
    LpProblem::new(c, x, gamma, alpha)
}

/// Recovers an `N_tx x n_s` precoder from `W W^H = V0 B^{-1} T diag(l) T^H B^{-1} V0^H`,
/// keeping the `n_s` dominant eigen-directions.
pub fn reconstruct_precoder(bd: &BdDecomposition, svd: &WhitenedSvd, lambda: &[f64], n_s: usize) -> Result<CMat> {
    let rows = bd.v0.nrows();
    if lambda.iter().all(|&l| l == 0.0) {
        return Ok(CMat::zeros(rows, n_s));
    }
    let mut tl = svd.t.clone();
    for (k, mut col) in tl.column_iter_mut().enumerate() {
        col.scale_mut(lambda[k].max(0.0).sqrt());
    }
    let f = &svd.b_inv * tl;
    let inner = &f * f.adjoint();
    let eig = HermitianEigen::new(&inner)?;
    let total: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();
    let kept = n_s.min(eig.values.len());
    let kept_power: f64 = eig.values[..kept].iter().map(|v| v.max(0.0)).sum();
    if total - kept_power > 1e-9 * total {
        warn!(
            "precoder rank exceeds {n_s} streams; discarding {:.3e} of {:.3e} power",
            total - kept_power,
            total
        );
    }
    let mut wt = CMat::zeros(eig.vectors.nrows(), n_s);
    for k in 0..kept {
        let s = eig.values[k].max(0.0).sqrt();
        wt.set_column(k, &eig.vectors.column(k).scale(s));
    }
    Ok(&bd.v0 * wt)
}

/// Gains from `tx` to the other users it serves (everyone in its group except `user`).
fn other_served(g: &Gains, tx: Tx, user: User) -> CMat {
    let others: Vec<CMat> = g
        .dims
        .served_by(tx)
        .into_iter()
        .filter(|&u| u != user)
        .map(|u| g.link(tx, u).clone_owned())
        .collect();
    let refs: Vec<&CMat> = others.iter().collect();
    hstack(g.dims.tx_antennas(tx), &refs)
}

/// Full per-user pipeline for `user` served by its node.
pub fn design_user(g: &Gains, user: User, gamma: f64, alpha: f64) -> Result<(CMat, LpRecord)> {
    let tx = user.serving();
    let gbar = other_served(g, tx, user);
    let bd = bd_null_basis(&gbar, g.dims.tx_antennas(tx)).map_err(|e| match e {
        Error::InfeasibleBd { .. } => Error::InfeasibleBd { user: user.to_string() },
        other => other,
    })?;
    let v0h = bd.v0.adjoint();
    let gd = &v0h * g.link(tx, user);
    let gc = &v0h * g.cross(tx);
    let svd = whiten_and_svd(&gd, &gc)?;
    let lp = build_lp(&svd, gamma, alpha)?;
    let sol = solve_lp(&lp);
    let w = reconstruct_precoder(&bd, &svd, &sol, g.dims.n_s)?;
    Ok((w, LpRecord { user: user.to_string(), problem: lp, solution: sol }))
}

fn design_node(g: &Gains, tx: Tx, gamma: f64) -> Result<(CMat, Vec<LpRecord>)> {
    let users = g.dims.served_by(tx);
    let k = users.len() as f64;
    let n_s = g.dims.n_s;
    let mut w = CMat::zeros(g.dims.tx_antennas(tx), users.len() * n_s);
    let mut lps = Vec::with_capacity(users.len());
    for (slot, &u) in users.iter().enumerate() {
        let (wu, rec) = design_user(g, u, gamma / k, 1.0 / k)?;
        w.columns_mut(slot * n_s, n_s).copy_from(&wu);
        lps.push(rec);
    }
    Ok((w, lps))
}

/// BS precoder with uniform splits `gamma_bs / K` and `1 / K` per MUE.
pub fn design_bs_precoders(g: &Gains, gamma_bs: f64) -> Result<(CMat, Vec<LpRecord>)> {
    design_node(g, Tx::Bs, gamma_bs)
}

/// Per-cell SC precoders with uniform per-SUE splits.
pub fn design_sc_precoders(g: &Gains, gamma_sc: &[f64]) -> Result<(Vec<CMat>, Vec<LpRecord>)> {
    if gamma_sc.len() != g.dims.s_cells {
        return Err(Error::Dimension(format!(
            "{} SC budgets for {} small cells",
            gamma_sc.len(),
            g.dims.s_cells
        )));
    }
    let mut ws = Vec::with_capacity(g.dims.s_cells);
    let mut lps = Vec::new();
    for (s, &gamma) in gamma_sc.iter().enumerate() {
        let (w, l) = design_node(g, Tx::Sc(s), gamma)?;
        ws.push(w);
        lps.extend(l);
    }
    Ok((ws, lps))
}

/// Receiver that ignores interference: `R = W^H G (G^H W W^H G + noise I)^{-1}`.
pub fn separate_receiver(g_direct: &CMat, w: &CMat, noise: f64) -> Result<CMat> {
    let gw = g_direct.adjoint() * w;
    if fro2(&gw) == 0.0 {
        return Ok(CMat::zeros(w.ncols(), g_direct.ncols()));
    }
    let c = &gw * gw.adjoint() + identity(gw.nrows()).scale(noise);
    let (rh, _) = solve_hpd(&c, &gw, RECEIVER_RIDGE)?;
    Ok(rh.adjoint())
}

/// Receivers for every user, with noise level `noise(user, W_user)`.
pub(crate) fn separate_receivers(
    g: &Gains,
    w: &PrecoderSet,
    noise: impl Fn(&CMat) -> f64,
) -> Result<ReceiverSet> {
    let mut r = ReceiverSet::zeros(&g.dims);
    for user in g.dims.users() {
        let wu = w.user(user).clone_owned();
        let gu = g.link(user.serving(), user).clone_owned();
        *r.get_mut(user) = separate_receiver(&gu, &wu, noise(&wu))?;
    }
    Ok(r)
}

/// Full separate design: BS and SC precoders plus their receivers.
pub fn design_separate(g: &Gains, budgets: &Budgets, sigma0_sq: f64) -> Result<SeparateDesign> {
    g.check_dims()?;
    let (w_bs, mut lps) = design_bs_precoders(g, budgets.gamma_bs)?;
    let (w_sc, sc_lps) = design_sc_precoders(g, &budgets.gamma_sc)?;
    lps.extend(sc_lps);
    let w = PrecoderSet { n_s: g.dims.n_s, w_bs, w_sc };
    let r = separate_receivers(g, &w, |_| sigma0_sq)?;
    Ok(SeparateDesign { w, r, lps })
}

impl SeparateDesign {
    pub fn iterate(&self) -> Iterate {
        Iterate { w: self.w.clone(), r: self.r.clone() }
    }

    /// The per-user LP instances as pretty JSON.
    pub fn lps_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.lps)?)
    }
}
