//! Link-level Monte Carlo evaluation: QPSK transport through the designed
//! transceivers, empirical MSE/BER, parameter sweeps and learning curves.

mod curve;
mod link;
mod sweep;

pub use curve::{learning_curve, CurveReport, CurveRow};
pub use link::{empirical_mse, estimate_ber, gen_qpsk, simulate_link, slice_qpsk, BerCounts, MseStats, QpskBlock};
pub use sweep::{run_sweep, Axis, ChannelOutcome, ChannelRecord, SweepReport, SweepRow, SweepSpec};

use serde::{Deserialize, Serialize};

use crate::channel::{
    apply_csi_error, assign_users, build_topology, effective_gains, large_scale_map, noise_variance,
    sample_channels, ChannelSet, CsiView, Gains, Geometry, PowerConfig, SystemDims, Topology,
};
use crate::error::{Error, Result};
use crate::robust::{
    robust_eval_sum_mse, robust_initial_iterate, robust_separate_design, run_robust_rao, run_robust_uaon,
    RobustContext,
};
use crate::separate_mse::{design_separate, Budgets, LpRecord};
use crate::sum_mse::{eval_sum_mse, initial_iterate, run_rao, run_uaon, AlgoConfig, IterTrace, PrecoderSet, ReceiverSet};

/// Transceiver design schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Scheme {
    Rao,
    Uaon,
    Separate,
    RobustRao,
    RobustUaon,
    RobustSeparate,
}

impl Scheme {
    pub const ALL: [Scheme; 6] =
        [Scheme::Rao, Scheme::Uaon, Scheme::Separate, Scheme::RobustRao, Scheme::RobustUaon, Scheme::RobustSeparate];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Rao => "RAO",
            Scheme::Uaon => "UAON",
            Scheme::Separate => "SEPARATE",
            Scheme::RobustRao => "ROBUST_RAO",
            Scheme::RobustUaon => "ROBUST_UAON",
            Scheme::RobustSeparate => "ROBUST_SEPARATE",
        }
    }

    pub fn is_robust(self) -> bool {
        matches!(self, Scheme::RobustRao | Scheme::RobustUaon | Scheme::RobustSeparate)
    }

    pub fn is_iterative(self) -> bool {
        !matches!(self, Scheme::Separate | Scheme::RobustSeparate)
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown scheme {s:?}")))
    }
}

/// Everything needed to generate and design one network realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub dims: SystemDims,
    pub powers: PowerConfig,
    pub geometry: Geometry,
    pub algo: AlgoConfig,
    /// Interference budget per node as a multiple of `sigma0^2 * total users`.
    pub gamma_scale: f64,
    /// CSI error variance relative to the noise variance.
    pub sigma_h2_norm: f64,
    /// Re-associate users by maximum received power instead of keeping the
    /// drop-time assignment.
    pub rsrp_association: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            dims: SystemDims::desk(),
            powers: PowerConfig::default(),
            geometry: Geometry::default(),
            algo: AlgoConfig::default(),
            gamma_scale: 10.0,
            sigma_h2_norm: 1.0,
            rsrp_association: false,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        self.powers.validate()?;
        self.geometry.validate()?;
        self.algo.validate()?;
        if !(self.gamma_scale > 0.0) || !self.gamma_scale.is_finite() {
            return Err(Error::Config(format!("gamma_scale must be positive, got {}", self.gamma_scale)));
        }
        if !(self.sigma_h2_norm >= 0.0) || !self.sigma_h2_norm.is_finite() {
            return Err(Error::Config(format!("sigma_h2_norm must be nonnegative, got {}", self.sigma_h2_norm)));
        }
        Ok(())
    }

    pub fn sigma0_sq(&self) -> f64 {
        noise_variance(&self.powers)
    }

    pub fn budgets(&self, dims: &SystemDims) -> Budgets {
        let g = self.gamma_scale * self.sigma0_sq() * dims.total_users() as f64;
        Budgets::uniform(dims, g)
    }
}

/// One drop of the network with its fading channels and effective gains.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub seed: u64,
    pub topology: Topology,
    pub channels: ChannelSet,
    pub sigma0_sq: f64,
}

impl Realization {
    pub fn dims(&self) -> &SystemDims {
        self.channels.dims()
    }

    pub fn gains(&self) -> &Gains {
        self.channels.g.as_ref().expect("realizations always carry effective gains")
    }

    /// Estimated gains with error variance `sigma_h2_norm * sigma0^2`.
    pub fn csi(&self, sigma_h2_norm: f64) -> Result<CsiView> {
        apply_csi_error(self.gains(), sigma_h2_norm * self.sigma0_sq, self.sigma0_sq, self.seed)
    }
}

/// Drops nodes and users, samples fading and applies transmit powers.
pub fn realize(scenario: &Scenario, seed: u64) -> Result<Realization> {
    let mut topology = build_topology(&scenario.dims, &scenario.geometry, seed)?;
    let mut dims = scenario.dims.clone();
    let mut ls = large_scale_map(&topology)?;
    if scenario.rsrp_association {
        let assoc = assign_users(&topology, &ls, &scenario.powers, &scenario.dims);
        topology = assoc.topology;
        dims = topology.dims_with(&scenario.dims);
        if dims.k_mue == 0 {
            return Err(Error::Domain("no user associated with the macro BS".into()));
        }
        ls = large_scale_map(&topology)?;
    }
    let h = sample_channels(&dims, &ls, seed)?;
    let channels = effective_gains(&h, &scenario.powers);
    Ok(Realization { seed, topology, channels, sigma0_sq: scenario.sigma0_sq() })
}

/// A designed precoder/receiver pair with its design-time objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub scheme: Scheme,
    pub w: PrecoderSet,
    pub r: ReceiverSet,
    /// Objective the scheme optimizes, evaluated on the gains it was designed
    /// with (error-averaged for robust schemes).
    pub objective: f64,
    pub trace: Option<IterTrace>,
    pub lps: Vec<LpRecord>,
}

/// Designs `scheme` for a realization. Exact-CSI schemes see the true gains;
/// robust schemes see `csi`.
pub fn design_scheme(
    scheme: Scheme,
    real: &Realization,
    scenario: &Scenario,
    csi: Option<&CsiView>,
) -> Result<Design> {
    let g = real.gains();
    let s0 = real.sigma0_sq;
    let cfg = &scenario.algo;
    let budgets = scenario.budgets(real.dims());
    let csi = || csi.ok_or_else(|| Error::Contract(format!("{scheme} needs estimated gains")));
    let iterative = |sol: crate::sum_mse::Solution| Design {
        scheme,
        objective: sol.trace.final_objective(),
        w: sol.w,
        r: sol.r,
        trace: Some(sol.trace),
        lps: Vec::new(),
    };
    Ok(match scheme {
        Scheme::Rao => iterative(run_rao(g, s0, cfg, &initial_iterate(g, s0, real.seed)?)?),
        Scheme::Uaon => iterative(run_uaon(g, s0, cfg, &initial_iterate(g, s0, real.seed)?)?),
        Scheme::RobustRao => {
            let c = csi()?;
            iterative(run_robust_rao(c, s0, cfg, &robust_initial_iterate(c, s0, real.seed)?)?)
        }
        Scheme::RobustUaon => {
            let c = csi()?;
            iterative(run_robust_uaon(c, s0, cfg, &robust_initial_iterate(c, s0, real.seed)?)?)
        }
        Scheme::Separate => {
            let d = design_separate(g, &budgets, s0)?;
            let objective = eval_sum_mse(g, &d.w, &d.r, s0)?.total;
            Design { scheme, w: d.w, r: d.r, objective, trace: None, lps: d.lps }
        }
        Scheme::RobustSeparate => {
            let c = csi()?;
            let d = robust_separate_design(c, &budgets, s0)?;
            let ctx = RobustContext::new(&d.w, &d.r, c.sigma_h2);
            let objective = robust_eval_sum_mse(c, &d.w, &d.r, s0, &ctx)?.total;
            Design { scheme, w: d.w, r: d.r, objective, trace: None, lps: d.lps }
        }
    })
}

/// Runs `f` on a pool of `workers` threads (0 = one per core).
pub(crate) fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}
