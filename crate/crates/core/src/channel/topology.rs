use std::f64::consts::PI;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LargeScaleMap, PowerConfig, SystemDims, Tx, User};
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Cell geometry and propagation constants (metres, dB).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Geometry {
    pub mc_radius_m: f64,
    pub sc_radius_m: f64,
    pub inter_site_m: f64,
    /// Distances are clamped to this value before pathloss evaluation.
    pub min_distance_m: f64,
    pub penetration_bs_db: f64,
    pub penetration_sc_db: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            mc_radius_m: 800.0,
            sc_radius_m: 100.0,
            inter_site_m: 700.0,
            min_distance_m: 10.0,
            penetration_bs_db: 20.0,
            penetration_sc_db: 20.0,
        }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.mc_radius_m > 0.0 && self.sc_radius_m > 0.0 && self.min_distance_m > 0.0) {
            return Err(Error::Config("radii and distance clamp must be positive".into()));
        }
        if !(self.inter_site_m >= 0.0 && self.inter_site_m < self.mc_radius_m) {
            return Err(Error::Config(format!(
                "inter-site distance {} m must lie in [0, macro radius {} m)",
                self.inter_site_m, self.mc_radius_m
            )));
        }
        if self.inter_site_m + self.sc_radius_m > self.mc_radius_m {
            return Err(Error::Config(format!(
                "geometry infeasible: inter-site distance {} m + SC radius {} m exceeds macro radius {} m",
                self.inter_site_m, self.sc_radius_m, self.mc_radius_m
            )));
        }
        Ok(())
    }
}

/// Node and user coordinates of one drop. The BS sits at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub bs_position: [f64; 2],
    pub sc_positions: Vec<[f64; 2]>,
    pub mue_positions: Vec<[f64; 2]>,
    pub sue_positions: Vec<Vec<[f64; 2]>>,
    pub geometry: Geometry,
}

impl Topology {
    /// All user coordinates, MUEs first, then the SUEs cell by cell.
    pub fn ue_positions(&self) -> Vec<[f64; 2]> {
        self.mue_positions
            .iter()
            .chain(self.sue_positions.iter().flatten())
            .copied()
            .collect()
    }

    /// Dimensions implied by this topology for the given antenna/stream counts.
    pub fn dims_with(&self, template: &SystemDims) -> SystemDims {
        SystemDims {
            k_mue: self.mue_positions.len(),
            s_cells: self.sc_positions.len(),
            l_sue: self.sue_positions.iter().map(Vec::len).collect(),
            ..template.clone()
        }
    }
}

fn uniform_in_disc<R: Rng>(rng: &mut R, center: [f64; 2], radius: f64) -> [f64; 2] {
    let r = radius * rng.random::<f64>().sqrt();
    let a = 2.0 * PI * rng.random::<f64>();
    [center[0] + r * a.cos(), center[1] + r * a.sin()]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Drops small cells and users for one realization.
///
/// SC centres sit at exactly the inter-site distance with uniform angles.
/// MUEs are uniform in the macro disc outside every SC disc; the `L_s` SUEs
/// of cell `s` are uniform in its disc. Each node and user draws from its
/// own stream, so growing `K` keeps the earlier users in place.
pub fn build_topology(dims: &SystemDims, geometry: &Geometry, seed: u64) -> Result<Topology> {
    geometry.validate()?;
    dims.validate()?;
    let sc_positions: Vec<[f64; 2]> = (0..dims.s_cells)
        .map(|s| {
            let mut rng = stream(seed, Purpose::ScPlacement, &[s as u64]);
            let a = 2.0 * PI * rng.random::<f64>();
            [geometry.inter_site_m * a.cos(), geometry.inter_site_m * a.sin()]
        })
        .collect();
    let origin = [0.0, 0.0];
    let mue_positions = (0..dims.k_mue)
        .map(|i| {
            let mut rng = stream(seed, Purpose::UePlacement, &[User::Mue(i).code()]);
            // Rejection sampling; bounded because SC discs cannot cover the macro disc
            // for any feasible geometry with few cells, but cap the attempts anyway.
            let mut p = uniform_in_disc(&mut rng, origin, geometry.mc_radius_m);
            for _ in 0..10_000 {
                if sc_positions.iter().all(|&c| dist(c, p) > geometry.sc_radius_m) {
                    break;
                }
                p = uniform_in_disc(&mut rng, origin, geometry.mc_radius_m);
            }
            p
        })
        .collect();
    let sue_positions = (0..dims.s_cells)
        .map(|s| {
            (0..dims.l_sue[s])
                .map(|j| {
                    let mut rng = stream(seed, Purpose::UePlacement, &[User::Sue(s, j).code()]);
                    uniform_in_disc(&mut rng, sc_positions[s], geometry.sc_radius_m)
                })
                .collect()
        })
        .collect();
    Ok(Topology {
        bs_position: origin,
        sc_positions,
        mue_positions,
        sue_positions,
        geometry: geometry.clone(),
    })
}

/// Result of max-RSRP association over all dropped users.
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    /// Topology with users regrouped by serving node. Cells left without
    /// users are switched off and removed.
    pub topology: Topology,
    /// Original (MUE-first flat) index of every user kept, per serving group.
    pub mue: Vec<usize>,
    pub sue: Vec<Vec<usize>>,
    /// Flat indices of users shed to respect `K <= N_BS` and `L_s <= N_SC`.
    pub dropped: Vec<usize>,
}

/// Reassigns every user to the node with the largest received power `beta * P`.
pub fn assign_users(
    topology: &Topology,
    ls: &LargeScaleMap,
    powers: &PowerConfig,
    dims: &SystemDims,
) -> Association {
    let s_cells = topology.sc_positions.len();
    let old_users: Vec<User> = (0..topology.mue_positions.len())
        .map(User::Mue)
        .chain((0..s_cells).flat_map(|s| (0..topology.sue_positions[s].len()).map(move |j| User::Sue(s, j))))
        .collect();
    let positions = topology.ue_positions();

    // groups[0] is the BS, groups[1 + s] small cell s; entries are (flat index, rsrp)
    let mut groups: Vec<Vec<(usize, f64)>> = vec![Vec::new(); 1 + s_cells];
    for (flat, &u) in old_users.iter().enumerate() {
        let mut best = (0usize, ls.beta(Tx::Bs, u) * powers.p_bs_w());
        for t in 0..s_cells {
            let p = ls.beta(Tx::Sc(t), u) * powers.p_sc_w();
            if p > best.1 {
                best = (1 + t, p);
            }
        }
        groups[best.0].push((flat, best.1));
    }

    let mut dropped = Vec::new();
    for (gi, group) in groups.iter_mut().enumerate() {
        let cap = if gi == 0 { dims.n_bs } else { dims.n_sc };
        if group.len() > cap {
            let mut by_power = group.clone();
            by_power.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let shed: Vec<usize> = by_power[cap..].iter().map(|e| e.0).collect();
            warn!("node {gi} overloaded ({} users, cap {cap}); shedding users {shed:?}", group.len());
            group.retain(|e| !shed.contains(&e.0));
            dropped.extend(shed);
        }
    }
    dropped.sort_unstable();

    let mue: Vec<usize> = groups[0].iter().map(|e| e.0).collect();
    let mut sue = Vec::new();
    let mut sc_positions = Vec::new();
    let mut sue_positions = Vec::new();
    for t in 0..s_cells {
        if groups[1 + t].is_empty() {
            warn!("small cell {t} has no associated users and is switched off");
            continue;
        }
        sc_positions.push(topology.sc_positions[t]);
        sue_positions.push(groups[1 + t].iter().map(|e| positions[e.0]).collect());
        sue.push(groups[1 + t].iter().map(|e| e.0).collect());
    }
    Association {
        topology: Topology {
            bs_position: topology.bs_position,
            sc_positions,
            mue_positions: mue.iter().map(|&f| positions[f]).collect(),
            sue_positions,
            geometry: topology.geometry.clone(),
        },
        mue,
        sue,
        dropped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{large_scale_map, pathloss_db, large_scale_beta, PathlossModel};

    #[test]
    fn paper_geometry_is_valid() {
        let t = build_topology(&SystemDims::desk(), &Geometry::default(), 3).unwrap();
        for &c in &t.sc_positions {
            assert!((dist(c, [0.0, 0.0]) - 700.0).abs() < 1e-9);
        }
        for p in t.ue_positions() {
            assert!(dist(p, [0.0, 0.0]) <= 800.0 + 1e-9);
        }
        for (s, cell) in t.sue_positions.iter().enumerate() {
            for &p in cell {
                assert!(dist(p, t.sc_positions[s]) <= 100.0 + 1e-9);
            }
        }
    }

    #[test]
    fn infeasible_geometry_rejected() {
        let g = Geometry { inter_site_m: 750.0, ..Geometry::default() };
        assert!(matches!(build_topology(&SystemDims::desk(), &g, 1), Err(Error::Config(_))));
    }

    #[test]
    fn empty_small_cell_tier() {
        let d = SystemDims { s_cells: 0, l_sue: vec![], ..SystemDims::desk() };
        let t = build_topology(&d, &Geometry::default(), 1).unwrap();
        assert!(t.sc_positions.is_empty());
        assert!(t.sue_positions.is_empty());
    }

    #[test]
    fn same_seed_same_coordinates() {
        let a = build_topology(&SystemDims::desk(), &Geometry::default(), 42).unwrap();
        let b = build_topology(&SystemDims::desk(), &Geometry::default(), 42).unwrap();
        assert_eq!(a, b);
        let c = build_topology(&SystemDims::desk(), &Geometry::default(), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn growing_k_keeps_earlier_users() {
        let d2 = SystemDims { k_mue: 2, ..SystemDims::desk() };
        let d4 = SystemDims::desk();
        let a = build_topology(&d2, &Geometry::default(), 9).unwrap();
        let b = build_topology(&d4, &Geometry::default(), 9).unwrap();
        assert_eq!(a.mue_positions[..], b.mue_positions[..2]);
    }

    fn single_sc_topology(ue: [f64; 2]) -> Topology {
        Topology {
            bs_position: [0.0, 0.0],
            sc_positions: vec![[700.0, 0.0]],
            mue_positions: vec![ue],
            sue_positions: vec![vec![]],
            geometry: Geometry::default(),
        }
    }

    #[test]
    fn ue_at_sc_center_goes_to_sc() {
        // beta*P at the clamp distance (10 m) from the SC versus 700 m from the BS.
        let pw = PowerConfig::default();
        let sc = large_scale_beta(pathloss_db(PathlossModel::Small, 0.01).unwrap(), 20.0) * pw.p_sc_w();
        let bs = large_scale_beta(pathloss_db(PathlossModel::Macro, 0.7).unwrap(), 20.0) * pw.p_bs_w();
        assert!(sc > bs);

        let t = single_sc_topology([700.0, 0.0]);
        let ls = large_scale_map(&t).unwrap();
        let dims = SystemDims { k_mue: 1, s_cells: 1, l_sue: vec![1], ..SystemDims::desk() };
        let a = assign_users(&t, &ls, &pw, &dims);
        assert!(a.mue.is_empty());
        assert_eq!(a.sue, vec![vec![0]]);
    }

    #[test]
    fn ue_at_bs_goes_to_bs() {
        let pw = PowerConfig::default();
        let t = single_sc_topology([0.0, 0.0]);
        let ls = large_scale_map(&t).unwrap();
        let dims = SystemDims { k_mue: 1, s_cells: 1, l_sue: vec![1], ..SystemDims::desk() };
        let a = assign_users(&t, &ls, &pw, &dims);
        assert_eq!(a.mue, vec![0]);
        // the SC lost its only candidate and is switched off
        assert!(a.topology.sc_positions.is_empty());
    }

    #[test]
    fn association_partitions_and_caps() {
        let dims = SystemDims::desk();
        let t = build_topology(&dims, &Geometry::default(), 5).unwrap();
        let ls = large_scale_map(&t).unwrap();
        let tight = SystemDims { n_bs: 2, ..dims.clone() };
        let a = assign_users(&t, &ls, &PowerConfig::default(), &tight);
        let mut seen: Vec<usize> = a.mue.iter().chain(a.sue.iter().flatten()).chain(&a.dropped).copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..dims.total_users()).collect::<Vec<_>>());
        assert!(a.mue.len() <= 2);
    }
}
