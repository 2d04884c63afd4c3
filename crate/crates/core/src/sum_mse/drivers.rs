use std::io::Write;
use std::time::Instant;

use super::objective::{eval_with_noise, precoders_with_offset, receivers_with_noise};
use super::{normalize_precoders, AlgoConfig, PrecoderSet, ReceiverSet};
use crate::channel::{Gains, SystemDims};
use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, fro};
use crate::rng::{stream, Purpose};

/// A precoder/receiver pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub w: PrecoderSet,
    pub r: ReceiverSet,
}

/// Per-iteration history of an iterative design. Entry 0 is the initialization.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterTrace {
    pub objective: Vec<f64>,
    /// Power multipliers per transmitter (BS first); empty for the
    /// initialization and for unconstrained updates.
    pub lambdas: Vec<Vec<f64>>,
    /// CSI-error correction `sigma_h2 * omega_bar * r_bar` included in `objective`.
    pub correction: Vec<f64>,
    pub elapsed_s: f64,
}

impl IterTrace {
    pub fn iterations(&self) -> usize {
        self.objective.len().saturating_sub(1)
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective.last().expect("trace holds the initial objective")
    }

    /// CSV with columns `iteration, objective, lambda_0..lambda_{n_tx-1}, correction`.
    pub fn write_csv<W: Write>(&self, out: W, n_tx: usize) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["iteration".to_string(), "objective".to_string()];
        header.extend((0..n_tx).map(|k| format!("lambda_{k}")));
        header.push("correction".into());
        wtr.write_record(&header)?;
        for (k, obj) in self.objective.iter().enumerate() {
            let mut row = vec![k.to_string(), obj.to_string()];
            let lam = &self.lambdas[k];
            row.extend((0..n_tx).map(|t| lam.get(t).map(|v| v.to_string()).unwrap_or_default()));
            row.push(self.correction[k].to_string());
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub w: PrecoderSet,
    pub r: ReceiverSet,
    pub trace: IterTrace,
}

/// Gaussian precoders scaled to unit power per transmitter.
pub fn initial_precoders(dims: &SystemDims, seed: u64) -> PrecoderSet {
    let mut w = PrecoderSet::zeros(dims);
    for tx in dims.transmitters() {
        let b = w.block_mut(tx);
        let mut rng = stream(seed, Purpose::Init, &[tx.code()]);
        let raw = complex_gaussian(&mut rng, b.nrows(), b.ncols());
        let n = fro(&raw);
        *b = if n > 0.0 { raw.unscale(n) } else { raw };
    }
    w
}

/// Seeded starting point: random unit-power precoders and their MMSE receivers.
pub fn initial_iterate(g: &Gains, sigma0_sq: f64, seed: u64) -> Result<Iterate> {
    let w = initial_precoders(&g.dims, seed);
    let r = receivers_with_noise(g, &w, sigma0_sq)?;
    Ok(Iterate { w, r })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Variant {
    Rao,
    Uaon,
}

/// Alternating precoder/receiver updates. With `sigma_h2 > 0` the receiver
/// noise is inflated by `sigma_h2 * omega_bar` and the precoder regularizer
/// by `sigma_h2 * r_bar`, both taken from the latest iterates.
pub(crate) fn run_alternating(
    g: &Gains,
    sigma0_sq: f64,
    sigma_h2: f64,
    cfg: &AlgoConfig,
    init: &Iterate,
    variant: Variant,
) -> Result<Solution> {
    let start = Instant::now();
    g.check_dims()?;
    init.w.check_dims(&g.dims)?;
    init.r.check_dims(&g.dims)?;
    let noise = |w: &PrecoderSet| sigma0_sq + sigma_h2 * w.total_power();
    let correction = |w: &PrecoderSet, r: &ReceiverSet| sigma_h2 * w.total_power() * r.total_energy();

    let (mut w, mut r) = (init.w.clone(), init.r.clone());
    let mut trace = IterTrace::default();
    trace.objective.push(eval_with_noise(g, &w, &r, noise(&w))?.total);
    trace.lambdas.push(Vec::new());
    trace.correction.push(correction(&w, &r));

    for it in 1..=cfg.max_iters {
        let offset = sigma_h2 * r.total_energy();
        let lambdas = match variant {
            Variant::Rao => {
                let (nw, l) = precoders_with_offset(g, &r, cfg, offset, true)?;
                w = nw;
                l
            }
            Variant::Uaon => {
                let (raw, _) = precoders_with_offset(g, &r, cfg, offset, false)?;
                w = normalize_precoders(&raw).map_err(|e| match e {
                    Error::Degenerate { what, .. } => Error::Degenerate { iteration: it, what },
                    other => other,
                })?;
                Vec::new()
            }
        };
        r = receivers_with_noise(g, &w, noise(&w))?;
        let obj = eval_with_noise(g, &w, &r, noise(&w))?.total;
        if !obj.is_finite() {
            return Err(Error::Numerical(format!("objective became {obj} at iteration {it}")));
        }
        let prev = trace.final_objective();
        trace.objective.push(obj);
        trace.lambdas.push(lambdas);
        trace.correction.push(correction(&w, &r));
        if cfg.rel_tol > 0.0 && (prev - obj).abs() <= cfg.rel_tol * prev.abs() {
            break;
        }
    }
    trace.elapsed_s = start.elapsed().as_secs_f64();
    Ok(Solution { w, r, trace })
}

/// Alternates power-constrained precoder updates (multipliers by bisection)
/// with MMSE receiver updates. The objective never increases.
pub fn run_rao(g: &Gains, sigma0_sq: f64, cfg: &AlgoConfig, init: &Iterate) -> Result<Solution> {
    run_alternating(g, sigma0_sq, 0.0, cfg, init, Variant::Rao)
}

/// Alternates unconstrained precoder updates followed by unit-power
/// normalization with MMSE receiver updates.
pub fn run_uaon(g: &Gains, sigma0_sq: f64, cfg: &AlgoConfig, init: &Iterate) -> Result<Solution> {
    run_alternating(g, sigma0_sq, 0.0, cfg, init, Variant::Uaon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channels, LargeScaleMap};

    fn instance(seed: u64) -> Gains {
        let d = SystemDims { n_bs: 8, ..SystemDims::desk() };
        let d = SystemDims { k_mue: 2, ..d };
        sample_channels(&d, &LargeScaleMap::uniform(&d, 1.0), seed).unwrap().h
    }

    #[test]
    fn zero_iterations_return_the_initialization() {
        let g = instance(1);
        let init = initial_iterate(&g, 0.1, 7).unwrap();
        let cfg = AlgoConfig { max_iters: 0, ..AlgoConfig::default() };
        for sol in [run_rao(&g, 0.1, &cfg, &init).unwrap(), run_uaon(&g, 0.1, &cfg, &init).unwrap()] {
            assert_eq!(sol.w, init.w);
            assert_eq!(sol.r, init.r);
            assert_eq!(sol.trace.iterations(), 0);
        }
    }

    #[test]
    fn rao_trace_is_monotone_and_feasible() {
        let g = instance(2);
        let init = initial_iterate(&g, 0.1, 3).unwrap();
        let cfg = AlgoConfig { max_iters: 30, rel_tol: 0.0, ..AlgoConfig::default() };
        let sol = run_rao(&g, 0.1, &cfg, &init).unwrap();
        for k in 1..sol.trace.objective.len() {
            assert!(sol.trace.objective[k] <= sol.trace.objective[k - 1] + 1e-9);
        }
        for tx in g.dims.transmitters() {
            assert!(sol.w.power(tx) <= 1.0 + 1e-9);
        }
        let mut csv = Vec::new();
        sol.trace.write_csv(&mut csv, 3).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("iteration,objective,lambda_0,lambda_1,lambda_2,correction\n0,"));
        assert_eq!(text.lines().count(), 32);
    }

    #[test]
    fn uaon_iterates_have_unit_power() {
        let g = instance(4);
        let init = initial_iterate(&g, 0.1, 5).unwrap();
        let cfg = AlgoConfig { max_iters: 10, ..AlgoConfig::default() };
        let sol = run_uaon(&g, 0.1, &cfg, &init).unwrap();
        for tx in g.dims.transmitters() {
            assert!((sol.w.power(tx) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn initialization_is_seeded() {
        let d = SystemDims::desk();
        assert_eq!(initial_precoders(&d, 1), initial_precoders(&d, 1));
        assert_ne!(initial_precoders(&d, 1), initial_precoders(&d, 2));
    }
}
