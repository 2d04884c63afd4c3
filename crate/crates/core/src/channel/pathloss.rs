use serde::{Deserialize, Serialize};

use super::{LargeScaleMap, PowerConfig, Topology};
use crate::error::{Error, Result};

/// Distance-dependent pathloss laws for the two tiers (distance in km).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathlossModel {
    /// `128.1 + 37.6 log10(d)`
    Macro,
    /// `140.7 + 36.7 log10(d)`
    Small,
}

pub fn pathloss_db(model: PathlossModel, d_km: f64) -> Result<f64> {
    if !(d_km > 0.0) || !d_km.is_finite() {
        return Err(Error::Domain(format!("pathloss distance must be positive, got {d_km} km")));
    }
    let (a, b) = match model {
        PathlossModel::Macro => (128.1, 37.6),
        PathlossModel::Small => (140.7, 36.7),
    };
    Ok(a + b * d_km.log10())
}

/// Linear power gain for a pathloss plus penetration loss, both in dB.
pub fn large_scale_beta(pathloss_db: f64, penetration_db: f64) -> f64 {
    10f64.powf(-(pathloss_db + penetration_db) / 10.0)
}

/// Per-element noise variance in watts: density + 10 log10(B), converted from dBm.
pub fn noise_variance(pw: &PowerConfig) -> f64 {
    10f64.powf((pw.noise_density_dbm_hz + 10.0 * pw.bandwidth_hz.log10() - 30.0) / 10.0)
}

fn dist_km(a: [f64; 2], b: [f64; 2], clamp_m: f64) -> f64 {
    let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    d.max(clamp_m) / 1000.0
}

/// Evaluates beta for every node/user pair of a topology.
pub fn large_scale_map(topo: &Topology) -> Result<LargeScaleMap> {
    let geo = &topo.geometry;
    let clamp = geo.min_distance_m;
    let bs_beta = |p: [f64; 2]| -> Result<f64> {
        let pl = pathloss_db(PathlossModel::Macro, dist_km(topo.bs_position, p, clamp))?;
        Ok(large_scale_beta(pl, geo.penetration_bs_db))
    };
    let sc_beta = |t: usize, p: [f64; 2]| -> Result<f64> {
        let pl = pathloss_db(PathlossModel::Small, dist_km(topo.sc_positions[t], p, clamp))?;
        Ok(large_scale_beta(pl, geo.penetration_sc_db))
    };
    let s_cells = topo.sc_positions.len();
    let bm = topo.mue_positions.iter().map(|&p| bs_beta(p)).collect::<Result<Vec<_>>>()?;
    let bs = topo
        .sue_positions
        .iter()
        .map(|cell| cell.iter().map(|&p| bs_beta(p)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let sm = (0..s_cells)
        .map(|t| topo.mue_positions.iter().map(|&p| sc_beta(t, p)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let ss = (0..s_cells)
        .map(|t| {
            topo.sue_positions
                .iter()
                .map(|cell| cell.iter().map(|&p| sc_beta(t, p)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LargeScaleMap {
        bm,
        bs,
        sm,
        ss,
        bs_model: PathlossModel::Macro,
        sc_model: PathlossModel::Small,
        penetration_bs_db: geo.penetration_bs_db,
        penetration_sc_db: geo.penetration_sc_db,
    })
}
