//! Network model: dimensions, topology, large-scale gains, fast fading,
//! effective gains and imperfect-CSI views.
//!
//! Gains are stored in the aggregated (column-stacked) layout: the matrix for
//! a transmitter towards a group of users concatenates the per-user
//! `N_tx x N_UE` blocks in user order.

mod fading;
mod pathloss;
mod topology;

pub use fading::{apply_csi_error, effective_gains, sample_channels};
pub use pathloss::{large_scale_beta, large_scale_map, noise_variance, pathloss_db, PathlossModel};
pub use topology::{assign_users, build_topology, Association, Geometry, Topology};

use nalgebra::DMatrixView;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hstack, zeros, CMat, C64};

/// Antenna, stream and user counts of one network instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDims {
    pub n_bs: usize,
    pub n_sc: usize,
    pub n_ue: usize,
    pub n_s: usize,
    pub k_mue: usize,
    pub s_cells: usize,
    pub l_sue: Vec<usize>,
}

impl SystemDims {
    /// Desk-scale defaults used for tests and quick runs.
    pub fn desk() -> Self {
        Self { n_bs: 12, n_sc: 4, n_ue: 2, n_s: 1, k_mue: 4, s_cells: 2, l_sue: vec![2, 2] }
    }

    /// Antenna counts of the published simulation table (S, N_UE, N_S are not
    /// given there and take the desk values).
    pub fn paper() -> Self {
        Self { n_bs: 36, n_sc: 8, n_ue: 2, n_s: 1, k_mue: 8, s_cells: 2, l_sue: vec![4, 4] }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_bs == 0 || self.n_sc == 0 || self.n_ue == 0 || self.n_s == 0 || self.k_mue == 0 {
            return fail("antenna, stream and MUE counts must be at least 1".into());
        }
        if self.k_mue > self.n_bs {
            return fail(format!("K exceeds N_BS (K = {}, N_BS = {})", self.k_mue, self.n_bs));
        }
        if self.n_s > self.n_ue {
            return fail(format!("N_S exceeds N_UE (N_S = {}, N_UE = {})", self.n_s, self.n_ue));
        }
        if self.l_sue.len() != self.s_cells {
            return fail(format!(
                "l_sue has {} entries but s_cells = {}",
                self.l_sue.len(),
                self.s_cells
            ));
        }
        for (s, &l) in self.l_sue.iter().enumerate() {
            if l == 0 {
                return fail(format!("small cell {s} serves no users (L_s must be at least 1)"));
            }
            if l > self.n_sc {
                return fail(format!("L_{s} exceeds N_SC (L = {l}, N_SC = {})", self.n_sc));
            }
        }
        Ok(())
    }

    pub fn total_sues(&self) -> usize {
        self.l_sue.iter().sum()
    }

    pub fn total_users(&self) -> usize {
        self.k_mue + self.total_sues()
    }

    pub fn total_streams(&self) -> usize {
        self.total_users() * self.n_s
    }

    pub fn transmitters(&self) -> impl Iterator<Item = Tx> + '_ {
        std::iter::once(Tx::Bs).chain((0..self.s_cells).map(Tx::Sc))
    }

    pub fn users(&self) -> impl Iterator<Item = User> + '_ {
        (0..self.k_mue)
            .map(User::Mue)
            .chain((0..self.s_cells).flat_map(move |s| (0..self.l_sue[s]).map(move |j| User::Sue(s, j))))
    }

    /// Users served by `tx`, in column order of its precoder.
    pub fn served_by(&self, tx: Tx) -> Vec<User> {
        match tx {
            Tx::Bs => (0..self.k_mue).map(User::Mue).collect(),
            Tx::Sc(s) => (0..self.l_sue[s]).map(|j| User::Sue(s, j)).collect(),
        }
    }

    pub fn tx_antennas(&self, tx: Tx) -> usize {
        match tx {
            Tx::Bs => self.n_bs,
            Tx::Sc(_) => self.n_sc,
        }
    }

    /// Number of users in the group addressed by `tx`'s precoder.
    pub fn group_size(&self, tx: Tx) -> usize {
        match tx {
            Tx::Bs => self.k_mue,
            Tx::Sc(s) => self.l_sue[s],
        }
    }
}

/// A transmitting node: the macro BS or small cell `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tx {
    Bs,
    Sc(usize),
}

impl Tx {
    pub fn code(self) -> u64 {
        match self {
            Tx::Bs => 0,
            Tx::Sc(t) => 1 + t as u64,
        }
    }
}

/// A receiving user: MUE `i` or SUE `j` of small cell `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum User {
    Mue(usize),
    Sue(usize, usize),
}

impl User {
    pub fn serving(self) -> Tx {
        match self {
            User::Mue(_) => Tx::Bs,
            User::Sue(s, _) => Tx::Sc(s),
        }
    }

    /// Position of the user inside its serving node's group.
    pub fn slot(self) -> usize {
        match self {
            User::Mue(i) => i,
            User::Sue(_, j) => j,
        }
    }

    pub fn is_mue(self) -> bool {
        matches!(self, User::Mue(_))
    }

    pub fn code(self) -> u64 {
        match self {
            User::Mue(i) => i as u64,
            User::Sue(s, j) => (1 << 32) | ((s as u64) << 16) | j as u64,
        }
    }
}

impl std::fmt::Display for User {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            User::Mue(i) => write!(f, "MUE {i}"),
            User::Sue(s, j) => write!(f, "SUE {j} of SC {s}"),
        }
    }
}

/// Complex link matrices for every transmitter/user pair.
///
/// * `bm`: BS to all MUEs, `N_BS x K*N_UE`
/// * `bs[s]`: BS to the SUEs of cell `s`, `N_BS x L_s*N_UE`
/// * `sm[t]`: SC `t` to all MUEs, `N_SC x K*N_UE`
/// * `ss[t][s]`: SC `t` to the SUEs of cell `s`, `N_SC x L_s*N_UE`
#[derive(Debug, Clone, PartialEq)]
pub struct Gains {
    pub dims: SystemDims,
    pub bm: CMat,
    pub bs: Vec<CMat>,
    pub sm: Vec<CMat>,
    pub ss: Vec<Vec<CMat>>,
}

impl Gains {
    pub fn zeros(dims: &SystemDims) -> Self {
        let nue = dims.n_ue;
        let k = dims.k_mue * nue;
        Self {
            bm: zeros(dims.n_bs, k),
            bs: dims.l_sue.iter().map(|&l| zeros(dims.n_bs, l * nue)).collect(),
            sm: (0..dims.s_cells).map(|_| zeros(dims.n_sc, k)).collect(),
            ss: (0..dims.s_cells)
                .map(|_| dims.l_sue.iter().map(|&l| zeros(dims.n_sc, l * nue)).collect())
                .collect(),
            dims: dims.clone(),
        }
    }

    fn group(&self, tx: Tx, group: Tx) -> &CMat {
        match (tx, group) {
            (Tx::Bs, Tx::Bs) => &self.bm,
            (Tx::Bs, Tx::Sc(s)) => &self.bs[s],
            (Tx::Sc(t), Tx::Bs) => &self.sm[t],
            (Tx::Sc(t), Tx::Sc(s)) => &self.ss[t][s],
        }
    }

    fn group_mut(&mut self, tx: Tx, group: Tx) -> &mut CMat {
        match (tx, group) {
            (Tx::Bs, Tx::Bs) => &mut self.bm,
            (Tx::Bs, Tx::Sc(s)) => &mut self.bs[s],
            (Tx::Sc(t), Tx::Bs) => &mut self.sm[t],
            (Tx::Sc(t), Tx::Sc(s)) => &mut self.ss[t][s],
        }
    }

    /// `N_tx x N_UE` gain from `tx` to `user`.
    pub fn link(&self, tx: Tx, user: User) -> DMatrixView<'_, C64> {
        let n = self.dims.n_ue;
        self.group(tx, user.serving()).columns(user.slot() * n, n)
    }

    pub fn set_link(&mut self, tx: Tx, user: User, value: &CMat) {
        let n = self.dims.n_ue;
        self.group_mut(tx, user.serving()).columns_mut(user.slot() * n, n).copy_from(value);
    }

    /// Gains from `tx` to every user it serves (`G_{B-M}` or `G_{S-S}^{(s,s)}`).
    pub fn direct(&self, tx: Tx) -> &CMat {
        self.group(tx, tx)
    }

    /// Gains from `tx` to every user it does not serve, in global user order.
    pub fn cross(&self, tx: Tx) -> CMat {
        let rows = self.dims.tx_antennas(tx);
        let blocks: Vec<&CMat> = self
            .dims
            .transmitters()
            .filter(|&g| g != tx)
            .map(|g| self.group(tx, g))
            .collect();
        hstack(rows, &blocks)
    }

    /// Applies `f` to every matrix, preserving layout.
    pub fn map(&self, mut f: impl FnMut(Tx, Tx, &CMat) -> CMat) -> Self {
        let mut out = self.clone();
        for tx in self.dims.transmitters() {
            for g in self.dims.transmitters() {
                *out.group_mut(tx, g) = f(tx, g, self.group(tx, g));
            }
        }
        out
    }

    pub fn check_dims(&self) -> Result<()> {
        let d = &self.dims;
        let ok = self.bm.shape() == (d.n_bs, d.k_mue * d.n_ue)
            && self.bs.len() == d.s_cells
            && self.sm.len() == d.s_cells
            && self.ss.len() == d.s_cells
            && (0..d.s_cells).all(|s| {
                self.bs[s].shape() == (d.n_bs, d.l_sue[s] * d.n_ue)
                    && self.sm[s].shape() == (d.n_sc, d.k_mue * d.n_ue)
                    && self.ss[s].len() == d.s_cells
                    && (0..d.s_cells).all(|u| self.ss[s][u].shape() == (d.n_sc, d.l_sue[u] * d.n_ue))
            });
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension("gain matrices disagree with SystemDims".into()))
        }
    }
}

/// Linear transmit powers and noise in dBm-based configuration units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConfig {
    pub p_bs_dbm: f64,
    pub p_sc_dbm: f64,
    pub noise_density_dbm_hz: f64,
    pub bandwidth_hz: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self { p_bs_dbm: 46.0, p_sc_dbm: 24.0, noise_density_dbm_hz: -174.0, bandwidth_hz: 20e6 }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

impl PowerConfig {
    pub fn p_bs_w(&self) -> f64 {
        dbm_to_watts(self.p_bs_dbm)
    }

    pub fn p_sc_w(&self) -> f64 {
        dbm_to_watts(self.p_sc_dbm)
    }

    pub fn tx_power_w(&self, tx: Tx) -> f64 {
        match tx {
            Tx::Bs => self.p_bs_w(),
            Tx::Sc(_) => self.p_sc_w(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0) || !self.bandwidth_hz.is_finite() {
            return Err(Error::Config(format!("bandwidth must be positive, got {}", self.bandwidth_hz)));
        }
        for (name, v) in [
            ("p_bs_dbm", self.p_bs_dbm),
            ("p_sc_dbm", self.p_sc_dbm),
            ("noise_density_dbm_hz", self.noise_density_dbm_hz),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// Linear large-scale power gains `beta` for every link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeScaleMap {
    pub bm: Vec<f64>,
    pub bs: Vec<Vec<f64>>,
    pub sm: Vec<Vec<f64>>,
    pub ss: Vec<Vec<Vec<f64>>>,
    pub bs_model: PathlossModel,
    pub sc_model: PathlossModel,
    pub penetration_bs_db: f64,
    pub penetration_sc_db: f64,
}

impl LargeScaleMap {
    /// Uniform map with every beta equal to `beta` (useful for tests).
    pub fn uniform(dims: &SystemDims, beta: f64) -> Self {
        Self {
            bm: vec![beta; dims.k_mue],
            bs: dims.l_sue.iter().map(|&l| vec![beta; l]).collect(),
            sm: (0..dims.s_cells).map(|_| vec![beta; dims.k_mue]).collect(),
            ss: (0..dims.s_cells)
                .map(|_| dims.l_sue.iter().map(|&l| vec![beta; l]).collect())
                .collect(),
            bs_model: PathlossModel::Macro,
            sc_model: PathlossModel::Small,
            penetration_bs_db: 0.0,
            penetration_sc_db: 0.0,
        }
    }

    pub fn beta(&self, tx: Tx, user: User) -> f64 {
        match (tx, user) {
            (Tx::Bs, User::Mue(i)) => self.bm[i],
            (Tx::Bs, User::Sue(s, j)) => self.bs[s][j],
            (Tx::Sc(t), User::Mue(i)) => self.sm[t][i],
            (Tx::Sc(t), User::Sue(s, j)) => self.ss[t][s][j],
        }
    }
}

/// One fading realization: small-scale channels `h` and, once powers are
/// applied, the effective gains `g = sqrt(P) h`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub seed: u64,
    pub beta: LargeScaleMap,
    pub h: Gains,
    pub g: Option<Gains>,
}

impl ChannelSet {
    pub fn dims(&self) -> &SystemDims {
        &self.h.dims
    }

    pub fn gains(&self) -> Result<&Gains> {
        self.g
            .as_ref()
            .ok_or_else(|| Error::Contract("effective gains not populated; call effective_gains first".into()))
    }
}

/// Estimated effective gains `G_hat = G + Xi` with `Xi ~ CN(0, sigma_h2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiView {
    pub g_hat: Gains,
    pub sigma_h2: f64,
    pub sigma_h2_norm: f64,
}
