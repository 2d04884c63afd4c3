//! Subcommand implementations. Every command writes the resolved config next
//! to its artifacts.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use hetnet_mse::container::{precoders_to_json, receivers_to_json, save_channel};
use hetnet_mse::montecarlo::{design_scheme, learning_curve, realize, run_sweep};
use hetnet_mse::sum_mse::eval_sum_mse;
use hetnet_mse::Result;
use log::info;

use crate::config::RunConfig;

fn prepare(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join("config.resolved.toml"), cfg.to_toml())?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    info!("writing {}", path.display());
    Ok(BufWriter::new(File::create(path)?))
}

/// `gen`: one channel realization as a matrix container.
pub fn gen(cfg: &RunConfig) -> Result<()> {
    prepare(cfg)?;
    let real = realize(&cfg.scenario(), cfg.seed)?;
    let path = cfg.out_dir.join("channel.json");
    info!("writing {}", path.display());
    save_channel(&path, &real.channels)
}

/// `run`: designs every configured scheme on one realization.
pub fn run(cfg: &RunConfig) -> Result<()> {
    prepare(cfg)?;
    let scenario = cfg.scenario();
    let real = realize(&scenario, cfg.seed)?;
    let csi = real.csi(scenario.sigma_h2_norm)?;
    let n_tx = real.dims().s_cells + 1;
    let mut summary = csv::Writer::from_writer(create(&cfg.out_dir.join("summary.csv"))?);
    summary.write_record(["scheme", "design_objective", "mse_bs", "mse_sc", "mse_total", "iterations"])?;
    for &scheme in &cfg.schemes {
        info!("designing {scheme}");
        let d = design_scheme(scheme, &real, &scenario, Some(&csi))?;
        let exact = eval_sum_mse(real.gains(), &d.w, &d.r, real.sigma0_sq)?;
        let stem = scheme.name().to_lowercase();
        fs::write(cfg.out_dir.join(format!("{stem}_precoders.json")), precoders_to_json(&d.w)?)?;
        fs::write(cfg.out_dir.join(format!("{stem}_receivers.json")), receivers_to_json(&d.r)?)?;
        if let Some(trace) = &d.trace {
            trace.write_csv(create(&cfg.out_dir.join(format!("{stem}_trace.csv")))?, n_tx)?;
        }
        if !d.lps.is_empty() {
            fs::write(cfg.out_dir.join(format!("{stem}_lps.json")), serde_json::to_string_pretty(&d.lps)?)?;
        }
        summary.write_record([
            scheme.name().to_string(),
            d.objective.to_string(),
            exact.mse_bs.to_string(),
            exact.mse_sc.to_string(),
            exact.total.to_string(),
            d.trace.as_ref().map(|t| t.iterations().to_string()).unwrap_or_default(),
        ])?;
    }
    summary.flush()?;
    Ok(())
}

/// `sweep`: Monte Carlo sweep over the configured axis.
pub fn sweep(cfg: &RunConfig) -> Result<()> {
    prepare(cfg)?;
    let spec = cfg.sweep_spec();
    info!(
        "sweeping {} over {:?}: {} channels x {} symbols",
        spec.axis.name(),
        spec.values,
        spec.n_channels,
        spec.n_symbols
    );
    let report = run_sweep(&spec, &cfg.scenario(), cfg.workers)?;
    report.write_csv(create(&cfg.out_dir.join("sweep.csv"))?)
}

/// `curve`: averaged learning curves on one realization.
pub fn curve(cfg: &RunConfig) -> Result<()> {
    prepare(cfg)?;
    let scenario = cfg.scenario();
    let real = realize(&scenario, cfg.seed)?;
    let csi = real.csi(scenario.sigma_h2_norm)?;
    let budgets = scenario.budgets(real.dims());
    info!("learning curves over {} runs", cfg.curve.n_runs);
    let report = learning_curve(
        real.gains(),
        Some(&csi),
        real.sigma0_sq,
        &cfg.schemes,
        cfg.curve.n_runs,
        &scenario.algo,
        &budgets,
        cfg.seed,
        cfg.workers,
    )?;
    report.write_csv(create(&cfg.out_dir.join("curve.csv"))?)
}
