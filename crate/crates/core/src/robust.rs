//! Designs driven by estimated gains `G_hat = G + Xi` with i.i.d. error of
//! variance `sigma_h2`, optimizing the error-averaged sum-MSE.
//!
//! Averaging over the error adds `sigma_h2 * omega_bar * tr{R_u^H R_u}` to
//! every user's MSE, which is the same as raising the receiver noise to
//! `sigma0^2 + sigma_h2 * omega_bar`; the precoder updates pick up a
//! regularizer shift `sigma_h2 * r_bar`. At `sigma_h2 = 0` every routine
//! reduces to its exact-CSI counterpart bit for bit.

use crate::channel::CsiView;
use crate::error::{Error, Result};
use crate::linalg::fro2;
use crate::separate_mse::{design_bs_precoders, design_sc_precoders, separate_receivers, Budgets, SeparateDesign};
use crate::sum_mse::{
    eval_with_noise, initial_precoders, normalize_precoders, precoders_with_offset, receivers_with_noise,
    run_alternating, AlgoConfig, Iterate, PrecoderSet, ReceiverSet, Solution, SumMseBreakdown, Variant,
};

/// Power and receiver-energy sums that couple the robust updates.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustContext {
    /// Sum of `tr{W^H W}` over all transmitters.
    pub omega_bar: f64,
    /// Sum of `tr{R^H R}` over all users.
    pub r_bar: f64,
    /// Per-user `tr{W_u W_u^H}` in user order (used by the separate design).
    pub omega_users: Vec<f64>,
    pub sigma_h2: f64,
}

impl RobustContext {
    pub fn new(w: &PrecoderSet, r: &ReceiverSet, sigma_h2: f64) -> Self {
        Self {
            omega_bar: w.total_power(),
            r_bar: r.total_energy(),
            omega_users: (0..w.w_bs.ncols() / w.n_s.max(1))
                .map(|i| fro2(&w.user(crate::channel::User::Mue(i)).clone_owned()))
                .chain(w.w_sc.iter().flat_map(|b| {
                    (0..b.ncols() / w.n_s.max(1)).map(move |j| fro2(&b.columns(j * w.n_s, w.n_s).clone_owned()))
                }))
                .collect(),
            sigma_h2,
        }
    }

    /// Receiver noise level `sigma0^2 + sigma_h2 * omega_bar`.
    pub fn effective_noise(&self, sigma0_sq: f64) -> f64 {
        sigma0_sq + self.sigma_h2 * self.omega_bar
    }

    /// Precoder regularizer shift `sigma_h2 * r_bar`.
    pub fn offset(&self) -> f64 {
        self.sigma_h2 * self.r_bar
    }
}

fn check_variance(csi: &CsiView) -> Result<()> {
    if !(csi.sigma_h2 >= 0.0) || !csi.sigma_h2.is_finite() {
        return Err(Error::Domain(format!("CSI error variance must be nonnegative, got {}", csi.sigma_h2)));
    }
    Ok(())
}

/// Error-averaged sum-MSE at the estimated gains.
pub fn robust_eval_sum_mse(
    csi: &CsiView,
    w: &PrecoderSet,
    r: &ReceiverSet,
    sigma0_sq: f64,
    ctx: &RobustContext,
) -> Result<SumMseBreakdown> {
    check_variance(csi)?;
    eval_with_noise(&csi.g_hat, w, r, ctx.effective_noise(sigma0_sq))
}

/// MMSE receivers against the estimated gains with inflated noise.
pub fn robust_update_receivers(csi: &CsiView, w: &PrecoderSet, sigma0_sq: f64, ctx: &RobustContext) -> Result<ReceiverSet> {
    check_variance(csi)?;
    receivers_with_noise(&csi.g_hat, w, ctx.effective_noise(sigma0_sq))
}

/// Power-constrained precoders with the regularizer shifted by `sigma_h2 * r_bar`.
pub fn robust_update_precoders_constrained(
    csi: &CsiView,
    r: &ReceiverSet,
    cfg: &AlgoConfig,
    ctx: &RobustContext,
) -> Result<(PrecoderSet, Vec<f64>)> {
    check_variance(csi)?;
    precoders_with_offset(&csi.g_hat, r, cfg, ctx.offset(), true)
}

/// Shifted stationary point followed by unit-power normalization.
pub fn robust_update_precoders_normalized(
    csi: &CsiView,
    r: &ReceiverSet,
    cfg: &AlgoConfig,
    ctx: &RobustContext,
) -> Result<PrecoderSet> {
    check_variance(csi)?;
    let (raw, _) = precoders_with_offset(&csi.g_hat, r, cfg, ctx.offset(), false)?;
    normalize_precoders(&raw)
}

/// Seeded start: the exact-CSI initial precoders and their robust receivers.
pub fn robust_initial_iterate(csi: &CsiView, sigma0_sq: f64, seed: u64) -> Result<Iterate> {
    let w = initial_precoders(&csi.g_hat.dims, seed);
    let ctx = RobustContext::new(&w, &ReceiverSet::zeros(&csi.g_hat.dims), csi.sigma_h2);
    let r = robust_update_receivers(csi, &w, sigma0_sq, &ctx)?;
    Ok(Iterate { w, r })
}

pub fn run_robust_rao(csi: &CsiView, sigma0_sq: f64, cfg: &AlgoConfig, init: &Iterate) -> Result<Solution> {
    check_variance(csi)?;
    run_alternating(&csi.g_hat, sigma0_sq, csi.sigma_h2, cfg, init, Variant::Rao)
}

pub fn run_robust_uaon(csi: &CsiView, sigma0_sq: f64, cfg: &AlgoConfig, init: &Iterate) -> Result<Solution> {
    check_variance(csi)?;
    run_alternating(&csi.g_hat, sigma0_sq, csi.sigma_h2, cfg, init, Variant::Uaon)
}

/// Separate design on the estimated gains; each user's receiver sees noise
/// `sigma0^2 + sigma_h2 * tr{W_u W_u^H}`.
pub fn robust_separate_design(csi: &CsiView, budgets: &Budgets, sigma0_sq: f64) -> Result<SeparateDesign> {
    check_variance(csi)?;
    let g = &csi.g_hat;
    g.check_dims()?;
    let (w_bs, mut lps) = design_bs_precoders(g, budgets.gamma_bs)?;
    let (w_sc, sc_lps) = design_sc_precoders(g, &budgets.gamma_sc)?;
    lps.extend(sc_lps);
    let w = PrecoderSet { n_s: g.dims.n_s, w_bs, w_sc };
    let sigma_h2 = csi.sigma_h2;
    let r = separate_receivers(g, &w, |wu| sigma0_sq + sigma_h2 * fro2(wu))?;
    Ok(SeparateDesign { w, r, lps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{Gains, SystemDims};
    use crate::linalg::{CMat, C64};
    use crate::sum_mse::update_receivers;

    fn scalar_csi(sigma_h2: f64) -> (CsiView, PrecoderSet) {
        let d = SystemDims { n_bs: 1, n_sc: 1, n_ue: 1, n_s: 1, k_mue: 1, s_cells: 0, l_sue: vec![] };
        let mut g = Gains::zeros(&d);
        g.bm = CMat::from_element(1, 1, C64::new(1.0, 0.0));
        let mut w = PrecoderSet::zeros(&d);
        w.w_bs = g.bm.clone();
        (CsiView { g_hat: g, sigma_h2, sigma_h2_norm: sigma_h2 }, w)
    }

    #[test]
    fn scalar_robust_receiver() {
        let (csi, w) = scalar_csi(1.0);
        let ctx = RobustContext::new(&w, &ReceiverSet::zeros(&csi.g_hat.dims), 1.0);
        assert_eq!(ctx.omega_bar, 1.0);
        let r = robust_update_receivers(&csi, &w, 1.0, &ctx).unwrap();
        assert!((r.r_bs[0][(0, 0)].re - 1.0 / 3.0).abs() < 1e-15);
        let sep = robust_separate_design(&csi, &Budgets { gamma_bs: 1.0, gamma_sc: vec![] }, 1.0).unwrap();
        assert!((sep.r.r_bs[0][(0, 0)].re - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_variance_reduces_receivers() {
        let (csi, w) = scalar_csi(0.0);
        let ctx = RobustContext::new(&w, &ReceiverSet::zeros(&csi.g_hat.dims), 0.0);
        assert_eq!(
            robust_update_receivers(&csi, &w, 0.7, &ctx).unwrap(),
            update_receivers(&csi.g_hat, &w, 0.7).unwrap()
        );
    }

    #[test]
    fn unit_power_precoders_give_cell_count() {
        let d = SystemDims::desk();
        let w = initial_precoders(&d, 4);
        let ctx = RobustContext::new(&w, &ReceiverSet::zeros(&d), 0.1);
        assert!((ctx.omega_bar - 3.0).abs() < 1e-12);
        assert_eq!(ctx.omega_users.len(), d.total_users());
        assert!((ctx.omega_users.iter().sum::<f64>() - ctx.omega_bar).abs() < 1e-12);
    }

    #[test]
    fn negative_variance_rejected() {
        let (mut csi, w) = scalar_csi(0.0);
        csi.sigma_h2 = -1.0;
        let ctx = RobustContext::new(&w, &ReceiverSet::zeros(&csi.g_hat.dims), 0.0);
        assert!(robust_update_receivers(&csi, &w, 1.0, &ctx).is_err());
    }
}
