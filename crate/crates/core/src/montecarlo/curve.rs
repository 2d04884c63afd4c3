use std::io::Write;

use rayon::prelude::*;

use super::{with_pool, Scheme};
use crate::channel::{CsiView, Gains};
use crate::error::{Error, Result};
use crate::robust::{robust_eval_sum_mse, robust_initial_iterate, robust_separate_design, run_robust_rao, run_robust_uaon, RobustContext};
use crate::rng::{derive_seed, Purpose};
use crate::separate_mse::{design_separate, Budgets};
use crate::sum_mse::{eval_sum_mse, initial_iterate, run_rao, run_uaon, AlgoConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub scheme: Scheme,
    pub iteration: usize,
    pub mean_objective: f64,
    pub se: f64,
}

/// Objective versus iteration averaged over independent initializations.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveReport {
    pub rows: Vec<CurveRow>,
    /// Raw per-run curves per scheme (padded to equal length).
    pub runs: Vec<(Scheme, Vec<Vec<f64>>)>,
}

impl CurveReport {
    pub fn curve(&self, scheme: Scheme) -> Vec<f64> {
        self.rows.iter().filter(|r| r.scheme == scheme).map(|r| r.mean_objective).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["scheme", "iteration", "mean_objective", "se"])?;
        for r in &self.rows {
            wtr.write_record([
                r.scheme.name().to_string(),
                r.iteration.to_string(),
                r.mean_objective.to_string(),
                r.se.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn pad(mut v: Vec<f64>, len: usize) -> Vec<f64> {
    let last = *v.last().expect("nonempty trace");
    v.resize(len, last);
    v
}

fn one_run(
    scheme: Scheme,
    g: &Gains,
    csi: Option<&CsiView>,
    sigma0_sq: f64,
    cfg: &AlgoConfig,
    budgets: &Budgets,
    seed: u64,
) -> Result<Vec<f64>> {
    let len = cfg.max_iters + 1;
    let need_csi = || csi.ok_or_else(|| Error::Contract(format!("{scheme} curve needs estimated gains")));
    let trace = match scheme {
        Scheme::Rao => run_rao(g, sigma0_sq, cfg, &initial_iterate(g, sigma0_sq, seed)?)?.trace.objective,
        Scheme::Uaon => run_uaon(g, sigma0_sq, cfg, &initial_iterate(g, sigma0_sq, seed)?)?.trace.objective,
        Scheme::RobustRao => {
            let c = need_csi()?;
            run_robust_rao(c, sigma0_sq, cfg, &robust_initial_iterate(c, sigma0_sq, seed)?)?.trace.objective
        }
        Scheme::RobustUaon => {
            let c = need_csi()?;
            run_robust_uaon(c, sigma0_sq, cfg, &robust_initial_iterate(c, sigma0_sq, seed)?)?.trace.objective
        }
        Scheme::Separate => {
            let d = design_separate(g, budgets, sigma0_sq)?;
            vec![eval_sum_mse(g, &d.w, &d.r, sigma0_sq)?.total]
        }
        Scheme::RobustSeparate => {
            let c = need_csi()?;
            let d = robust_separate_design(c, budgets, sigma0_sq)?;
            let ctx = RobustContext::new(&d.w, &d.r, c.sigma_h2);
            vec![robust_eval_sum_mse(c, &d.w, &d.r, sigma0_sq, &ctx)?.total]
        }
    };
    Ok(pad(trace, len))
}

/// Average objective per iteration over `n_runs` seeded initializations of
/// each scheme, for `cfg.max_iters` iterations. Non-iterative schemes give a
/// flat line. Robust schemes are evaluated on `csi` with the error-averaged
/// objective.
#[allow(clippy::too_many_arguments)]
pub fn learning_curve(
    g: &Gains,
    csi: Option<&CsiView>,
    sigma0_sq: f64,
    schemes: &[Scheme],
    n_runs: usize,
    cfg: &AlgoConfig,
    budgets: &Budgets,
    seed: u64,
    workers: usize,
) -> Result<CurveReport> {
    if n_runs == 0 {
        return Err(Error::Config("n_runs must be at least 1".into()));
    }
    let jobs: Vec<(Scheme, usize)> = schemes.iter().flat_map(|&s| (0..n_runs).map(move |k| (s, k))).collect();
    let results: Vec<Result<Vec<f64>>> = with_pool(workers, || {
        jobs.par_iter()
            .map(|&(s, k)| {
                let run_seed = derive_seed(seed, Purpose::Init, &[k as u64]);
                one_run(s, g, csi, sigma0_sq, cfg, budgets, run_seed)
            })
            .collect()
    })?;
    let mut results = results.into_iter();
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for &scheme in schemes {
        let curves: Vec<Vec<f64>> = (&mut results).take(n_runs).collect::<Result<_>>()?;
        for it in 0..=cfg.max_iters {
            let vals: Vec<f64> = curves.iter().map(|c| c[it]).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let se = if vals.len() > 1 {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
            } else {
                0.0
            };
            rows.push(CurveRow { scheme, iteration: it, mean_objective: mean, se });
        }
        runs.push((scheme, curves));
    }
    Ok(CurveReport { rows, runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::{realize, Scenario};

    #[test]
    fn single_run_equals_the_trace() {
        let sc = Scenario::default();
        let real = realize(&sc, 3).unwrap();
        let cfg = AlgoConfig { max_iters: 8, rel_tol: 0.0, ..AlgoConfig::default() };
        let budgets = sc.budgets(real.dims());
        let rep =
            learning_curve(real.gains(), None, real.sigma0_sq, &[Scheme::Rao, Scheme::Separate], 1, &cfg, &budgets, 5, 1)
                .unwrap();
        let run_seed = derive_seed(5, Purpose::Init, &[0]);
        let init = initial_iterate(real.gains(), real.sigma0_sq, run_seed).unwrap();
        let direct = run_rao(real.gains(), real.sigma0_sq, &cfg, &init).unwrap();
        assert_eq!(rep.curve(Scheme::Rao), direct.trace.objective);
        let flat = rep.curve(Scheme::Separate);
        assert_eq!(flat.len(), 9);
        assert!(flat.iter().all(|&v| v == flat[0]));
        assert!(rep.rows.iter().all(|r| r.se == 0.0));
    }
}
