use log::warn;

use super::{AlgoConfig, MultiplierProblem, PrecoderSet, ReceiverSet, SumMseBreakdown};
use crate::channel::{Gains, Tx, User};
use crate::error::{Error, Result};
use crate::linalg::{fro, fro2, identity, solve_hpd, CMat};
use crate::sum_mse::{bisect_multiplier, build_multiplier_problem};

const RECEIVER_RIDGE: f64 = 1e-12;

fn check(g: &Gains, w: &PrecoderSet) -> Result<()> {
    g.check_dims()?;
    w.check_dims(&g.dims)
}

/// `G_{T,u}^H W_T` for every transmitter, in transmitter order.
fn received_blocks(g: &Gains, w: &PrecoderSet, user: User) -> Vec<(Tx, CMat)> {
    g.dims
        .transmitters()
        .map(|tx| (tx, g.link(tx, user).adjoint() * w.block(tx)))
        .collect()
}

/// Per-user MSE with the receiver noise level `noise`:
/// `||R B_own - I||^2 + sum of ||R B||^2 over all other streams + noise ||R||^2`.
fn user_mse(blocks: &[(Tx, CMat)], r: &CMat, user: User, n_s: usize, noise: f64) -> f64 {
    let own_cols = user.slot() * n_s;
    let mut e = noise * fro2(r);
    for (tx, b) in blocks {
        let rb = r * b;
        if *tx == user.serving() {
            for c in 0..rb.ncols() {
                let mut col = rb.column(c).clone_owned();
                if c >= own_cols && c < own_cols + n_s {
                    col[c - own_cols] -= 1.0;
                }
                e += col.norm_squared();
            }
        } else {
            e += fro2(&rb);
        }
    }
    e
}

pub(crate) fn eval_with_noise(g: &Gains, w: &PrecoderSet, r: &ReceiverSet, noise: f64) -> Result<SumMseBreakdown> {
    check(g, w)?;
    r.check_dims(&g.dims)?;
    let n_s = g.dims.n_s;
    let mut per_user = Vec::with_capacity(g.dims.total_users());
    let (mut mse_bs, mut mse_sc) = (0.0, 0.0);
    for user in g.dims.users() {
        let e = user_mse(&received_blocks(g, w, user), r.get(user), user, n_s, noise);
        if user.is_mue() {
            mse_bs += e;
        } else {
            mse_sc += e;
        }
        per_user.push(e);
    }
    Ok(SumMseBreakdown { mse_bs, mse_sc, total: mse_bs + mse_sc, per_user })
}

/// Exact sum-MSE of all MUE and SUE streams for given precoders and receivers.
pub fn eval_sum_mse(g: &Gains, w: &PrecoderSet, r: &ReceiverSet, sigma0_sq: f64) -> Result<SumMseBreakdown> {
    eval_with_noise(g, w, r, sigma0_sq)
}

pub(crate) fn receivers_with_noise(g: &Gains, w: &PrecoderSet, noise: f64) -> Result<ReceiverSet> {
    check(g, w)?;
    let dims = &g.dims;
    let mut out = ReceiverSet::zeros(dims);
    for user in dims.users() {
        let blocks = received_blocks(g, w, user);
        let mut c = identity(dims.n_ue).scale(noise);
        for (_, b) in &blocks {
            c += b * b.adjoint();
        }
        let own = blocks
            .iter()
            .find(|(tx, _)| *tx == user.serving())
            .map(|(_, b)| b.columns(user.slot() * dims.n_s, dims.n_s).clone_owned())
            .expect("serving transmitter present");
        if fro2(&own) == 0.0 {
            continue;
        }
        let (rh, ridged) = solve_hpd(&c, &own, RECEIVER_RIDGE)?;
        if ridged {
            warn!("receiver of {user}: singular covariance, ridge-loaded solve used");
        }
        *out.get_mut(user) = rh.adjoint();
    }
    Ok(out)
}

/// MMSE receivers for fixed precoders: `R_u = W_u^H G_u (Psi_u + sigma0^2 I)^{-1}`.
pub fn update_receivers(g: &Gains, w: &PrecoderSet, sigma0_sq: f64) -> Result<ReceiverSet> {
    receivers_with_noise(g, w, sigma0_sq)
}

/// `Phi_T = sum_u G_{T,u} R_u^H R_u G_{T,u}^H` over all users and the
/// numerator `[G_{T,u} R_u^H]` over the users `T` serves.
pub(crate) fn precoder_terms(g: &Gains, r: &ReceiverSet, tx: Tx) -> (CMat, CMat) {
    let dims = &g.dims;
    let n = dims.tx_antennas(tx);
    let mut phi = CMat::zeros(n, n);
    for user in dims.users() {
        let a = g.link(tx, user) * r.get(user).adjoint();
        phi += &a * a.adjoint();
    }
    let served = dims.served_by(tx);
    let mut num = CMat::zeros(n, served.len() * dims.n_s);
    for (k, &user) in served.iter().enumerate() {
        let a = g.link(tx, user) * r.get(user).adjoint();
        num.columns_mut(k * dims.n_s, dims.n_s).copy_from(&a);
    }
    (crate::linalg::hermitian_part(&phi), num)
}

/// Shared precoder half-step. `offset` shifts the regularizer (0 for exact
/// CSI); with `constrained` the power multiplier is found by bisection,
/// otherwise the pseudo-inverse stationary point is returned.
pub(crate) fn precoders_with_offset(
    g: &Gains,
    r: &ReceiverSet,
    cfg: &AlgoConfig,
    offset: f64,
    constrained: bool,
) -> Result<(PrecoderSet, Vec<f64>)> {
    g.check_dims()?;
    r.check_dims(&g.dims)?;
    let mut w = PrecoderSet::zeros(&g.dims);
    let mut lambdas = Vec::new();
    for tx in g.dims.transmitters() {
        let (phi, num) = precoder_terms(g, r, tx);
        let problem: MultiplierProblem = build_multiplier_problem(&phi, &num, offset, cfg.ridge)?;
        let lambda = if constrained { bisect_multiplier(&problem, cfg.bisect_tol)? } else { 0.0 };
        *w.block_mut(tx) = problem.precoder(lambda);
        lambdas.push(lambda);
    }
    Ok((w, lambdas))
}

/// The multiplier subproblem of every transmitter (BS first) for fixed receivers.
pub fn precoder_problems(g: &Gains, r: &ReceiverSet, cfg: &AlgoConfig) -> Result<Vec<MultiplierProblem>> {
    g.check_dims()?;
    r.check_dims(&g.dims)?;
    g.dims
        .transmitters()
        .map(|tx| {
            let (phi, num) = precoder_terms(g, r, tx);
            build_multiplier_problem(&phi, &num, 0.0, cfg.ridge)
        })
        .collect()
}

/// Power-constrained precoder update `W_T = (Phi_T + lambda_T I)^{-1} G R^H`
/// with each `lambda_T` chosen so that `tr{W_T^H W_T} <= 1` (tight when positive).
pub fn update_precoders_constrained(g: &Gains, r: &ReceiverSet, cfg: &AlgoConfig) -> Result<(PrecoderSet, Vec<f64>)> {
    precoders_with_offset(g, r, cfg, 0.0, true)
}

/// Unconstrained stationary point `W_T = Phi_T^+ G R^H` (pseudo-inverse on
/// the numerically singular part of `Phi_T`).
pub fn update_precoders_unconstrained(g: &Gains, r: &ReceiverSet, cfg: &AlgoConfig) -> Result<PrecoderSet> {
    precoders_with_offset(g, r, cfg, 0.0, false).map(|(w, _)| w)
}

/// Scales every transmitter's precoder to unit Frobenius norm.
pub fn normalize_precoders(raw: &PrecoderSet) -> Result<PrecoderSet> {
    let mut out = raw.clone();
    let blocks = std::iter::once(&mut out.w_bs).chain(out.w_sc.iter_mut());
    for (k, b) in blocks.enumerate() {
        let n = fro(b);
        if !(n > 0.0) || !n.is_finite() {
            let what = if k == 0 { "BS".to_string() } else { format!("SC {}", k - 1) };
            return Err(Error::Degenerate { iteration: 0, what: format!("{what} precoder has norm {n}") });
        }
        b.unscale_mut(n);
    }
    Ok(out)
}
