use super::{ChannelSet, CsiView, Gains, LargeScaleMap, PowerConfig, SystemDims};
use crate::error::{Error, Result};
use crate::linalg::complex_gaussian;
use crate::rng::{stream, Purpose};

/// Draws one Rayleigh realization `h = sqrt(beta) * CN(0, 1)` for every link.
///
/// Each link has its own random stream keyed by (transmitter, user), so the
/// entries of a link do not depend on how many other users exist.
pub fn sample_channels(dims: &SystemDims, ls: &LargeScaleMap, seed: u64) -> Result<ChannelSet> {
    dims.validate()?;
    let mut h = Gains::zeros(dims);
    for tx in dims.transmitters() {
        let rows = dims.tx_antennas(tx);
        for user in dims.users() {
            let beta = ls.beta(tx, user);
            if !(beta > 0.0) || !beta.is_finite() {
                return Err(Error::Domain(format!("large-scale gain for {user} must be positive, got {beta}")));
            }
            let mut rng = stream(seed, Purpose::Fading, &[tx.code(), user.code()]);
            let block = complex_gaussian(&mut rng, rows, dims.n_ue).scale(beta.sqrt());
            h.set_link(tx, user, &block);
        }
    }
    Ok(ChannelSet { seed, beta: ls.clone(), h, g: None })
}

/// Populates `g = sqrt(P) h` with the transmitter's linear power.
pub fn effective_gains(ch: &ChannelSet, pw: &PowerConfig) -> ChannelSet {
    let g = ch.h.map(|tx, _, m| m.scale(pw.tx_power_w(tx).sqrt()));
    ChannelSet { g: Some(g), ..ch.clone() }
}

/// Adds i.i.d. `CN(0, sigma_h2)` estimation error to every effective gain.
pub fn apply_csi_error(g: &Gains, sigma_h2: f64, sigma0_sq: f64, seed: u64) -> Result<CsiView> {
    if !(sigma_h2 >= 0.0) || !sigma_h2.is_finite() {
        return Err(Error::Domain(format!("CSI error variance must be nonnegative, got {sigma_h2}")));
    }
    let sigma_h2_norm = if sigma0_sq > 0.0 { sigma_h2 / sigma0_sq } else { 0.0 };
    if sigma_h2 == 0.0 {
        return Ok(CsiView { g_hat: g.clone(), sigma_h2, sigma_h2_norm });
    }
    let dims = g.dims.clone();
    let std = sigma_h2.sqrt();
    let mut g_hat = g.clone();
    for tx in dims.transmitters() {
        let rows = dims.tx_antennas(tx);
        for user in dims.users() {
            let mut rng = stream(seed, Purpose::CsiError, &[tx.code(), user.code()]);
            let xi = complex_gaussian(&mut rng, rows, dims.n_ue).scale(std);
            let est = g.link(tx, user) + xi;
            g_hat.set_link(tx, user, &est);
        }
    }
    Ok(CsiView { g_hat, sigma_h2, sigma_h2_norm })
}

#[cfg(test)]
fn mean_abs2(entries: impl Iterator<Item = crate::linalg::C64>) -> f64 {
    let (s, n) = entries.fold((0.0, 0usize), |(s, n), z| (s + z.norm_sqr(), n + 1));
    s / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{Tx, User};

    fn big_dims() -> SystemDims {
        SystemDims { n_bs: 1000, n_sc: 1000, n_ue: 100, n_s: 1, k_mue: 1, s_cells: 1, l_sue: vec![1] }
    }

    #[test]
    fn unit_beta_second_moment() {
        let d = big_dims();
        let ch = sample_channels(&d, &LargeScaleMap::uniform(&d, 1.0), 11).unwrap();
        // 10^5 entries per link
        let m = mean_abs2(ch.h.bm.iter().copied());
        assert!((m - 1.0).abs() < 0.02, "{m}");
    }

    #[test]
    fn million_samples_within_one_percent() {
        let d = SystemDims { n_bs: 1000, n_sc: 1, n_ue: 1000, n_s: 1, k_mue: 1, s_cells: 0, l_sue: vec![] };
        let ch = sample_channels(&d, &LargeScaleMap::uniform(&d, 1.0), 1).unwrap();
        let m = mean_abs2(ch.h.bm.iter().copied());
        assert!((m - 1.0).abs() < 0.01, "{m}");
    }

    #[test]
    fn scaled_beta_second_moment() {
        let d = big_dims();
        let mut ls = LargeScaleMap::uniform(&d, 4.0);
        ls.ss[0][0][0] = 0.25;
        let ch = sample_channels(&d, &ls, 12).unwrap();
        let m = mean_abs2(ch.h.bm.iter().copied());
        assert!((m / 4.0 - 1.0).abs() < 0.05, "{m}");
        let m = mean_abs2(ch.h.ss[0][0].iter().copied());
        assert!((m / 0.25 - 1.0).abs() < 0.05, "{m}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = SystemDims::desk();
        let ls = LargeScaleMap::uniform(&d, 1e-10);
        let a = sample_channels(&d, &ls, 5).unwrap();
        let b = sample_channels(&d, &ls, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.h.bm, sample_channels(&d, &ls, 6).unwrap().h.bm);
    }

    #[test]
    fn effective_gain_scaling() {
        let d = SystemDims::desk();
        let ch = sample_channels(&d, &LargeScaleMap::uniform(&d, 1.0), 3).unwrap();
        let pw = PowerConfig { p_bs_dbm: 0.0, ..PowerConfig::default() };
        let g = effective_gains(&ch, &pw);
        let g = g.gains().unwrap();
        let s = 0.001f64.sqrt();
        for (a, b) in g.bm.iter().zip(ch.h.bm.iter()) {
            assert!((a - b * s).norm() <= 1e-15 * b.norm());
        }
        let s46 = (10f64.powf(4.6) / 1000.0).sqrt();
        let g46 = effective_gains(&ch, &PowerConfig::default());
        let z = g46.gains().unwrap().bs[0][(0, 0)] / ch.h.bs[0][(0, 0)];
        assert!((z.re - s46).abs() < 1e-12 && z.im.abs() < 1e-12);
        let zero = ChannelSet { h: Gains::zeros(&d), ..ch.clone() };
        assert_eq!(effective_gains(&zero, &pw).g.unwrap(), Gains::zeros(&d));
    }

    #[test]
    fn csi_error_statistics() {
        let d = big_dims();
        let ch = sample_channels(&d, &LargeScaleMap::uniform(&d, 1.0), 3).unwrap();
        let g = &ch.h;
        let v = apply_csi_error(g, 0.0, 1.0, 9).unwrap();
        assert_eq!(&v.g_hat, g);
        let v = apply_csi_error(g, 1.0, 1.0, 9).unwrap();
        let diff = &v.g_hat.bm - &g.bm;
        let m = mean_abs2(diff.iter().copied());
        assert!((m - 1.0).abs() < 0.01, "{m}");
        assert!(matches!(apply_csi_error(g, -1.0, 1.0, 9), Err(Error::Domain(_))));
    }

    #[test]
    fn normalized_variance_one_means_noise_level() {
        let d = SystemDims::desk();
        let s0 = crate::channel::noise_variance(&PowerConfig::default());
        let ch = sample_channels(&d, &LargeScaleMap::uniform(&d, 1.0), 3).unwrap();
        let v = apply_csi_error(&ch.h, 1.0 * s0, s0, 1).unwrap();
        assert!((v.sigma_h2_norm - 1.0).abs() < 1e-15);
        assert_eq!(v.g_hat.link(Tx::Bs, User::Mue(0)).shape(), (d.n_bs, d.n_ue));
    }
}
