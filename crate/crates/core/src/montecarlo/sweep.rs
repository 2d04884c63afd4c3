use std::io::Write;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::link::{empirical_mse, estimate_ber, gen_qpsk, simulate_link, BerCounts};
use super::{design_scheme, realize, with_pool, Realization, Scenario, Scheme};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Purpose};

/// Swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    PBsDbm,
    KMue,
    SigmaH2Norm,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::PBsDbm => "p_bs_dbm",
            Axis::KMue => "k_mue",
            Axis::SigmaH2Norm => "sigma_h2_norm",
        }
    }

    /// Scenario with this axis set to `value`.
    pub fn apply(self, base: &Scenario, value: f64) -> Result<Scenario> {
        let mut s = base.clone();
        match self {
            Axis::PBsDbm => s.powers.p_bs_dbm = value,
            Axis::KMue => {
                if !(value >= 1.0) || value.fract() != 0.0 {
                    return Err(Error::Config(format!("k_mue values must be positive integers, got {value}")));
                }
                s.dims.k_mue = value as usize;
            }
            Axis::SigmaH2Norm => s.sigma_h2_norm = value,
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub n_channels: usize,
    pub n_symbols: usize,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self, base: &Scenario) -> Result<()> {
        if self.values.is_empty() || self.schemes.is_empty() {
            return Err(Error::Config("sweep needs at least one value and one scheme".into()));
        }
        if self.n_channels == 0 || self.n_symbols == 0 {
            return Err(Error::Config("n_channels and n_symbols must be at least 1".into()));
        }
        for &v in &self.values {
            self.axis.apply(base, v)?;
        }
        Ok(())
    }

    /// Seed of channel realization `c`. The same drop is reused at every grid value.
    pub fn channel_seed(&self, c: usize) -> u64 {
        derive_seed(self.seed, Purpose::Realization, &[c as u64])
    }
}

/// Per-stream averages of one scheme on one realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelOutcome {
    /// Empirical MSE per data stream averaged over the MUEs (NaN if none).
    pub mse_mue: f64,
    pub mse_sue: f64,
    /// Empirical MSE per data stream averaged over all users.
    pub mse_all: f64,
    pub ber: BerCounts,
    /// Design-time objective of the scheme.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRecord {
    pub scheme: Scheme,
    pub value_index: usize,
    pub channel: usize,
    pub outcome: Option<ChannelOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub axis_value: f64,
    pub user_class: &'static str,
    pub mean_mse: f64,
    pub se_mse: f64,
    pub mean_ber: f64,
    pub se_ber: f64,
    pub n_channels: usize,
    pub n_symbols: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub rows: Vec<SweepRow>,
    pub records: Vec<ChannelRecord>,
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (m, (var / n as f64).sqrt())
}

fn class_mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn evaluate(scenario: &Scenario, real: &Realization, scheme: Scheme, n_symbols: usize) -> Result<ChannelOutcome> {
    let csi = if scheme.is_robust() { Some(real.csi(scenario.sigma_h2_norm)?) } else { None };
    let design = design_scheme(scheme, real, scenario, csi.as_ref())?;
    let dims = real.dims();
    let block = gen_qpsk(dims.total_streams(), n_symbols, real.seed);
    let xhat = simulate_link(real.gains(), &design.w, &design.r, real.sigma0_sq, &block.symbols, real.seed)?;
    let stats = empirical_mse(&xhat, &block.symbols);
    let users: Vec<_> = dims.users().collect();
    let n_s = dims.n_s as f64;
    let per_stream = |mue: bool| {
        class_mean(users.iter().zip(&stats.per_user).filter(|(u, _)| u.is_mue() == mue).map(|(_, e)| e / n_s))
    };
    Ok(ChannelOutcome {
        mse_mue: per_stream(true),
        mse_sue: per_stream(false),
        mse_all: class_mean(stats.per_user.iter().map(|e| e / n_s)),
        ber: estimate_ber(&xhat, &users, &block),
        objective: design.objective,
    })
}

fn run_channel(spec: &SweepSpec, scenario: &Scenario, vi: usize, c: usize) -> Vec<ChannelRecord> {
    let seed = spec.channel_seed(c);
    let real = realize(scenario, seed);
    spec.schemes
        .iter()
        .map(|&scheme| {
            let outcome = real.as_ref().map_err(clone_err).and_then(|r| evaluate(scenario, r, scheme, spec.n_symbols));
            let outcome = match outcome {
                Ok(o) => Some(o),
                Err(e) => {
                    warn!(
                        "{scheme} at {} = {} realization {c} failed: {e}",
                        spec.axis.name(),
                        spec.values[vi]
                    );
                    None
                }
            };
            ChannelRecord { scheme, value_index: vi, channel: c, outcome }
        })
        .collect()
}

fn clone_err(e: &Error) -> Error {
    Error::Numerical(e.to_string())
}

/// Runs every (grid value, realization, scheme) combination in parallel and
/// aggregates in a fixed order, so the report does not depend on `workers`.
pub fn run_sweep(spec: &SweepSpec, base: &Scenario, workers: usize) -> Result<SweepReport> {
    base.validate()?;
    spec.validate(base)?;
    let scenarios: Vec<Scenario> = spec.values.iter().map(|&v| spec.axis.apply(base, v)).collect::<Result<_>>()?;
    let tasks: Vec<(usize, usize)> =
        (0..spec.values.len()).flat_map(|vi| (0..spec.n_channels).map(move |c| (vi, c))).collect();
    info!(
        "sweep over {} with {} values x {} channels x {} schemes",
        spec.axis.name(),
        spec.values.len(),
        spec.n_channels,
        spec.schemes.len()
    );
    let records: Vec<ChannelRecord> = with_pool(workers, || {
        tasks.par_iter().flat_map_iter(|&(vi, c)| run_channel(spec, &scenarios[vi], vi, c)).collect()
    })?;

    let mut rows = Vec::new();
    for (vi, &value) in spec.values.iter().enumerate() {
        for &scheme in &spec.schemes {
            let mine: Vec<&ChannelOutcome> = records
                .iter()
                .filter(|r| r.value_index == vi && r.scheme == scheme)
                .filter_map(|r| r.outcome.as_ref())
                .collect();
            let failures = spec.n_channels - mine.len();
            for class in ["MUE", "SUE"] {
                let pick = |o: &ChannelOutcome| -> (f64, f64) {
                    if class == "MUE" {
                        (o.mse_mue, o.ber.mue())
                    } else {
                        (o.mse_sue, o.ber.sue())
                    }
                };
                let pairs: Vec<(f64, f64)> = mine.iter().map(|o| pick(o)).filter(|(m, _)| !m.is_nan()).collect();
                let (mean_mse, se_mse) = mean_se(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
                let (mean_ber, se_ber) = mean_se(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
                rows.push(SweepRow {
                    scheme,
                    axis_value: value,
                    user_class: class,
                    mean_mse,
                    se_mse,
                    mean_ber,
                    se_ber,
                    n_channels: pairs.len(),
                    n_symbols: spec.n_symbols,
                    failures,
                });
            }
        }
        info!("{} = {value} done", spec.axis.name());
    }
    Ok(SweepReport { axis: spec.axis, values: spec.values.clone(), rows, records })
}

impl SweepReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record([
            "scheme", "axis", "axis_value", "user_class", "mean_mse", "se_mse", "mean_ber", "se_ber", "n_channels",
            "n_symbols", "failures",
        ])?;
        for r in &self.rows {
            wtr.write_record([
                r.scheme.name().to_string(),
                self.axis.name().to_string(),
                r.axis_value.to_string(),
                r.user_class.to_string(),
                r.mean_mse.to_string(),
                r.se_mse.to_string(),
                r.mean_ber.to_string(),
                r.se_ber.to_string(),
                r.n_channels.to_string(),
                r.n_symbols.to_string(),
                r.failures.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }

    /// Per-realization outcomes of one scheme at one grid index, in channel order.
    pub fn outcomes(&self, scheme: Scheme, value_index: usize) -> Vec<Option<ChannelOutcome>> {
        self.records
            .iter()
            .filter(|r| r.scheme == scheme && r.value_index == value_index)
            .map(|r| r.outcome)
            .collect()
    }

    pub fn row(&self, scheme: Scheme, value_index: usize, class: &str) -> Option<&SweepRow> {
        let v = self.values[value_index];
        self.rows.iter().find(|r| r.scheme == scheme && r.axis_value == v && r.user_class == class)
    }
}
