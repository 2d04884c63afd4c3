//! Sum-MSE objective, alternating closed-form updates and the RAO / UAON
//! iteration drivers.

mod drivers;
mod multiplier;
mod objective;

pub use drivers::{initial_iterate, initial_precoders, run_rao, run_uaon, IterTrace, Iterate, Solution};
pub use multiplier::{bisect_multiplier, build_multiplier_problem, chi, MultiplierProblem};
pub use objective::{
    eval_sum_mse, normalize_precoders, precoder_problems, update_precoders_constrained, update_precoders_unconstrained,
    update_receivers,
};

pub(crate) use drivers::{run_alternating, Variant};
pub(crate) use objective::{eval_with_noise, precoders_with_offset, receivers_with_noise};

use nalgebra::{DMatrixView, DMatrixViewMut};
use serde::{Deserialize, Serialize};

use crate::channel::{SystemDims, Tx, User};
use crate::error::{Error, Result};
use crate::linalg::{fro2, zeros, CMat, C64};

/// Transmit precoders: `w_bs` is `N_BS x K*N_S`, `w_sc[s]` is `N_SC x L_s*N_S`;
/// columns are grouped per served user.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    pub n_s: usize,
    pub w_bs: CMat,
    pub w_sc: Vec<CMat>,
}

impl PrecoderSet {
    pub fn zeros(dims: &SystemDims) -> Self {
        Self {
            n_s: dims.n_s,
            w_bs: zeros(dims.n_bs, dims.k_mue * dims.n_s),
            w_sc: dims.l_sue.iter().map(|&l| zeros(dims.n_sc, l * dims.n_s)).collect(),
        }
    }

    pub fn block(&self, tx: Tx) -> &CMat {
        match tx {
            Tx::Bs => &self.w_bs,
            Tx::Sc(s) => &self.w_sc[s],
        }
    }

    pub fn block_mut(&mut self, tx: Tx) -> &mut CMat {
        match tx {
            Tx::Bs => &mut self.w_bs,
            Tx::Sc(s) => &mut self.w_sc[s],
        }
    }

    /// Columns of the serving precoder that carry `user`'s streams.
    pub fn user(&self, user: User) -> DMatrixView<'_, C64> {
        self.block(user.serving()).columns(user.slot() * self.n_s, self.n_s)
    }

    pub fn user_mut(&mut self, user: User) -> DMatrixViewMut<'_, C64> {
        let n_s = self.n_s;
        self.block_mut(user.serving()).columns_mut(user.slot() * n_s, n_s)
    }

    /// `tr{W^H W}` of one transmitter.
    pub fn power(&self, tx: Tx) -> f64 {
        fro2(self.block(tx))
    }

    /// Sum of the per-transmitter powers (the robust `omega_bar`).
    pub fn total_power(&self) -> f64 {
        fro2(&self.w_bs) + self.w_sc.iter().map(fro2).sum::<f64>()
    }

    pub fn check_dims(&self, dims: &SystemDims) -> Result<()> {
        let ok = self.n_s == dims.n_s
            && self.w_bs.shape() == (dims.n_bs, dims.k_mue * dims.n_s)
            && self.w_sc.len() == dims.s_cells
            && self.w_sc.iter().zip(&dims.l_sue).all(|(w, &l)| w.shape() == (dims.n_sc, l * dims.n_s));
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension("precoder shapes disagree with SystemDims".into()))
        }
    }
}

/// Per-user receivers (`N_S x N_UE` each), the diagonal blocks of `R_BS` and `R_SC`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverSet {
    pub r_bs: Vec<CMat>,
    pub r_sc: Vec<Vec<CMat>>,
}

impl ReceiverSet {
    pub fn zeros(dims: &SystemDims) -> Self {
        Self {
            r_bs: (0..dims.k_mue).map(|_| zeros(dims.n_s, dims.n_ue)).collect(),
            r_sc: dims.l_sue.iter().map(|&l| (0..l).map(|_| zeros(dims.n_s, dims.n_ue)).collect()).collect(),
        }
    }

    pub fn get(&self, user: User) -> &CMat {
        match user {
            User::Mue(i) => &self.r_bs[i],
            User::Sue(s, j) => &self.r_sc[s][j],
        }
    }

    pub fn get_mut(&mut self, user: User) -> &mut CMat {
        match user {
            User::Mue(i) => &mut self.r_bs[i],
            User::Sue(s, j) => &mut self.r_sc[s][j],
        }
    }

    /// Sum of `tr{R^H R}` over every user (the robust `r_bar`).
    pub fn total_energy(&self) -> f64 {
        self.r_bs.iter().map(fro2).sum::<f64>() + self.r_sc.iter().flatten().map(fro2).sum::<f64>()
    }

    /// Block-diagonal receiver of one tier group.
    pub fn assembled(&self, tx: Tx) -> CMat {
        match tx {
            Tx::Bs => crate::linalg::block_diag(&self.r_bs),
            Tx::Sc(s) => crate::linalg::block_diag(&self.r_sc[s]),
        }
    }

    pub fn check_dims(&self, dims: &SystemDims) -> Result<()> {
        let shape = (dims.n_s, dims.n_ue);
        let ok = self.r_bs.len() == dims.k_mue
            && self.r_bs.iter().all(|r| r.shape() == shape)
            && self.r_sc.len() == dims.s_cells
            && self
                .r_sc
                .iter()
                .zip(&dims.l_sue)
                .all(|(c, &l)| c.len() == l && c.iter().all(|r| r.shape() == shape));
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension("receiver shapes disagree with SystemDims".into()))
        }
    }
}

/// Objective value split by tier, plus per-user terms in `SystemDims::users` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumMseBreakdown {
    pub mse_bs: f64,
    pub mse_sc: f64,
    pub total: f64,
    pub per_user: Vec<f64>,
}

/// Iteration and tolerance settings shared by the iterative designers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgoConfig {
    pub max_iters: usize,
    /// Early exit once the relative objective change drops below this (0 disables).
    pub rel_tol: f64,
    /// Tolerance on `|chi(lambda)|` for the multiplier bisection.
    pub bisect_tol: f64,
    /// Eigenvalues of `Phi` below `ridge * max eigenvalue` are treated as zero.
    pub ridge: f64,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        Self { max_iters: 50, rel_tol: 1e-6, bisect_tol: 1e-12, ridge: 1e-12 }
    }
}

impl AlgoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.rel_tol >= 0.0) || !(self.bisect_tol > 0.0) || !(self.ridge > 0.0 && self.ridge < 1.0) {
            return Err(Error::Config(
                "tolerances must satisfy rel_tol >= 0, bisect_tol > 0, 0 < ridge < 1".into(),
            ));
        }
        Ok(())
    }
}
