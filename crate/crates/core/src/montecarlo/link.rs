use rand::Rng;

use crate::channel::{Gains, User};
use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, CMat, C64};
use crate::rng::{stream, Purpose};
use crate::sum_mse::{PrecoderSet, ReceiverSet};

/// QPSK symbols (one row per stream) with their 2-bit Gray labels.
///
/// Label bits `(b0, b1)` map to `((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpskBlock {
    pub symbols: CMat,
    /// Row-major `(stream, symbol)` labels `2 b0 + b1`.
    pub labels: Vec<u8>,
}

impl QpskBlock {
    pub fn n_streams(&self) -> usize {
        self.symbols.nrows()
    }

    pub fn n_symbols(&self) -> usize {
        self.symbols.ncols()
    }

    pub fn label(&self, stream: usize, t: usize) -> u8 {
        self.labels[stream * self.n_symbols() + t]
    }
}

fn qpsk_point(label: u8) -> C64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re = if label & 2 == 0 { s } else { -s };
    let im = if label & 1 == 0 { s } else { -s };
    C64::new(re, im)
}

/// Minimum-distance QPSK decision.
pub fn slice_qpsk(z: C64) -> u8 {
    (u8::from(z.re < 0.0) << 1) | u8::from(z.im < 0.0)
}

/// I.i.d. uniform QPSK symbols; stream `k` draws from its own random stream.
pub fn gen_qpsk(n_streams: usize, n_symbols: usize, seed: u64) -> QpskBlock {
    let mut labels = Vec::with_capacity(n_streams * n_symbols);
    for k in 0..n_streams {
        let mut rng = stream(seed, Purpose::Symbols, &[k as u64]);
        labels.extend((0..n_symbols).map(|_| rng.random_range(0..4u8)));
    }
    let symbols = CMat::from_fn(n_streams, n_symbols, |k, t| qpsk_point(labels[k * n_symbols + t]));
    QpskBlock { symbols, labels }
}

/// Rows of the stacked symbol block carried by `user` (users in
/// `SystemDims::users` order, `N_S` rows each).
fn user_rows(g: &Gains, user: User) -> usize {
    g.dims.users().position(|u| u == user).expect("user exists") * g.dims.n_s
}

/// Transmits `x` through the true gains and returns `R_u y_u` for every user.
///
/// `y_u = sum_T G_{T,u}^H W_T x_T + n_u` with fresh `CN(0, sigma0^2)` noise.
pub fn simulate_link(
    g: &Gains,
    w: &PrecoderSet,
    r: &ReceiverSet,
    sigma0_sq: f64,
    x: &CMat,
    seed: u64,
) -> Result<Vec<CMat>> {
    g.check_dims()?;
    w.check_dims(&g.dims)?;
    r.check_dims(&g.dims)?;
    let dims = &g.dims;
    if x.nrows() != dims.total_streams() {
        return Err(Error::Dimension(format!(
            "symbol block has {} streams, system carries {}",
            x.nrows(),
            dims.total_streams()
        )));
    }
    let n = x.ncols();
    // transmitted signal per node
    let mut tx_signal = Vec::new();
    for tx in dims.transmitters() {
        let served = dims.served_by(tx);
        let first = user_rows(g, served[0]);
        let xs = x.rows(first, served.len() * dims.n_s);
        tx_signal.push((tx, w.block(tx) * xs));
    }
    let std = sigma0_sq.max(0.0).sqrt();
    let mut out = Vec::with_capacity(dims.total_users());
    for user in dims.users() {
        let mut y = CMat::zeros(dims.n_ue, n);
        for (tx, s) in &tx_signal {
            y += g.link(*tx, user).adjoint() * s;
        }
        if std > 0.0 {
            let mut rng = stream(seed, Purpose::Noise, &[user.code()]);
            y += complex_gaussian(&mut rng, dims.n_ue, n).scale(std);
        }
        out.push(r.get(user) * y);
    }
    Ok(out)
}

/// Symbol-averaged squared errors.
#[derive(Debug, Clone, PartialEq)]
pub struct MseStats {
    /// Mean of `||x_hat_u - x_u||^2` per user.
    pub per_user: Vec<f64>,
    /// Mean and standard error of the per-symbol sum over all users.
    pub total: f64,
    pub total_se: f64,
}

pub fn empirical_mse(xhat: &[CMat], x: &CMat) -> MseStats {
    let n = x.ncols();
    let n_s = xhat.first().map_or(0, |m| m.nrows());
    let mut per_symbol = vec![0.0; n];
    let mut per_user = Vec::with_capacity(xhat.len());
    for (k, xu) in xhat.iter().enumerate() {
        let xs = x.rows(k * n_s, n_s);
        let mut acc = 0.0;
        for t in 0..n {
            let e: f64 = (0..n_s).map(|i| (xu[(i, t)] - xs[(i, t)]).norm_sqr()).sum();
            per_symbol[t] += e;
            acc += e;
        }
        per_user.push(acc / n as f64);
    }
    let mean = per_symbol.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        per_symbol.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    MseStats { per_user, total: mean, total_se: (var / n as f64).sqrt() }
}

/// Bit error counts per user class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BerCounts {
    pub mue_errors: u64,
    pub mue_bits: u64,
    pub sue_errors: u64,
    pub sue_bits: u64,
}

fn ratio(e: u64, n: u64) -> f64 {
    if n == 0 {
        f64::NAN
    } else {
        e as f64 / n as f64
    }
}

impl BerCounts {
    pub fn mue(&self) -> f64 {
        ratio(self.mue_errors, self.mue_bits)
    }

    pub fn sue(&self) -> f64 {
        ratio(self.sue_errors, self.sue_bits)
    }

    pub fn overall(&self) -> f64 {
        ratio(self.mue_errors + self.sue_errors, self.mue_bits + self.sue_bits)
    }
}

/// Hard-decision bit errors of `xhat` (per user, in `users` order) against
/// the transmitted labels.
pub fn estimate_ber(xhat: &[CMat], users: &[User], block: &QpskBlock) -> BerCounts {
    let mut c = BerCounts::default();
    let n_s = xhat.first().map_or(0, |m| m.nrows());
    for (k, (xu, user)) in xhat.iter().zip(users).enumerate() {
        let mut errors = 0u64;
        for i in 0..n_s {
            let stream = k * n_s + i;
            for t in 0..block.n_symbols() {
                let diff = slice_qpsk(xu[(i, t)]) ^ block.label(stream, t);
                errors += u64::from(diff.count_ones());
            }
        }
        let bits = 2 * (n_s * block.n_symbols()) as u64;
        if user.is_mue() {
            c.mue_errors += errors;
            c.mue_bits += bits;
        } else {
            c.sue_errors += errors;
            c.sue_bits += bits;
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::SystemDims;

    #[test]
    fn qpsk_unit_energy_and_determinism() {
        let b = gen_qpsk(3, 1000, 9);
        for z in b.symbols.iter() {
            assert!((z.norm_sqr() - 1.0).abs() < 1e-15);
        }
        assert_eq!(b, gen_qpsk(3, 1000, 9));
        assert_ne!(b, gen_qpsk(3, 1000, 10));
        for k in 0..3 {
            for t in 0..1000 {
                assert_eq!(slice_qpsk(b.symbols[(k, t)]), b.label(k, t));
            }
        }
    }

    #[test]
    fn gray_labels_differ_in_one_bit_between_neighbours() {
        for l in 0..4u8 {
            let z = qpsk_point(l);
            let rot = slice_qpsk(z * C64::new(0.0, 1.0));
            assert_eq!((rot ^ l).count_ones(), 1);
        }
    }

    #[test]
    fn perfect_and_antipodal_detection() {
        let b = gen_qpsk(2, 500, 1);
        let users = [User::Mue(0), User::Sue(0, 0)];
        let xhat: Vec<CMat> = (0..2).map(|k| b.symbols.rows(k, 1).clone_owned()).collect();
        let c = estimate_ber(&xhat, &users, &b);
        assert_eq!(c.overall(), 0.0);
        let neg: Vec<CMat> = xhat.iter().map(|m| -m).collect();
        let c = estimate_ber(&neg, &users, &b);
        assert_eq!(c.mue(), 1.0);
        assert_eq!(c.sue(), 1.0);
    }

    #[test]
    fn noiseless_identity_link() {
        let d = SystemDims { n_bs: 1, n_sc: 1, n_ue: 1, n_s: 1, k_mue: 1, s_cells: 0, l_sue: vec![] };
        let mut g = Gains::zeros(&d);
        g.bm[(0, 0)] = C64::new(0.5, 0.5);
        let mut w = PrecoderSet::zeros(&d);
        w.w_bs[(0, 0)] = C64::new(1.0, 0.0);
        let mut r = ReceiverSet::zeros(&d);
        r.r_bs[0][(0, 0)] = C64::new(1.0, 0.0) / g.bm[(0, 0)].conj();
        let b = gen_qpsk(1, 100, 3);
        let xhat = simulate_link(&g, &w, &r, 0.0, &b.symbols, 4).unwrap();
        assert!((&xhat[0] - &b.symbols).norm() < 1e-14);
        let s = empirical_mse(&xhat, &b.symbols);
        assert!(s.total < 1e-28);
    }
}
