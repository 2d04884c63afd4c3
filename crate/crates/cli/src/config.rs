//! Run configuration: TOML ingestion, scale presets, validation and the
//! resolved-config echo.

use std::fmt;
use std::path::{Path, PathBuf};

use hetnet_mse::channel::{Geometry, PowerConfig, SystemDims};
use hetnet_mse::montecarlo::{Axis, Scenario, Scheme, SweepSpec};
use hetnet_mse::sum_mse::AlgoConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Desk,
    Paper,
}

impl Scale {
    fn dims(self) -> SystemDims {
        match self {
            Scale::Desk => SystemDims::desk(),
            Scale::Paper => SystemDims::paper(),
        }
    }

    fn n_channels(self) -> usize {
        match self {
            Scale::Desk => 100,
            Scale::Paper => 1000,
        }
    }

    fn n_symbols(self) -> usize {
        match self {
            Scale::Desk => 1000,
            Scale::Paper => 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub n_channels: Option<usize>,
    pub n_symbols: Option<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { axis: Axis::PBsDbm, values: vec![46.0, 51.0, 56.0], n_channels: None, n_symbols: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveSection {
    pub n_runs: usize,
}

impl Default for CurveSection {
    fn default() -> Self {
        Self { n_runs: 100 }
    }
}

/// Everything a command needs. Unset `dims`, `n_channels` and `n_symbols`
/// come from the scale preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub scale: Scale,
    pub out_dir: PathBuf,
    pub workers: usize,
    pub schemes: Vec<Scheme>,
    pub gamma_scale: f64,
    pub sigma_h2_norm: f64,
    pub rsrp_association: bool,
    pub dims: Option<SystemDims>,
    pub powers: PowerConfig,
    pub geometry: Geometry,
    pub algo: AlgoConfig,
    pub sweep: SweepSection,
    pub curve: CurveSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        let base = Scenario::default();
        Self {
            seed: 0,
            scale: Scale::Desk,
            out_dir: PathBuf::from("out"),
            workers: 0,
            schemes: vec![Scheme::Rao, Scheme::Uaon, Scheme::Separate],
            gamma_scale: base.gamma_scale,
            sigma_h2_norm: base.sigma_h2_norm,
            rsrp_association: base.rsrp_association,
            dims: None,
            powers: base.powers,
            geometry: base.geometry,
            algo: base.algo,
            sweep: SweepSection::default(),
            curve: CurveSection::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub scale: Option<Scale>,
}

#[derive(Debug)]
pub struct ConfigError {
    pub source_name: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.source_name, l, self.message),
            None => write!(f, "{}: {}", self.source_name, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Config keys that validation messages can point back to.
const ANCHORS: &[(&str, &str)] = &[
    ("K exceeds", "k_mue"),
    ("N_S exceeds", "n_s"),
    ("l_sue", "l_sue"),
    ("exceeds N_SC", "l_sue"),
    ("serves no users", "l_sue"),
    ("antenna, stream and MUE counts", "n_bs"),
    ("bandwidth", "bandwidth_hz"),
    ("p_bs_dbm", "p_bs_dbm"),
    ("p_sc_dbm", "p_sc_dbm"),
    ("noise_density_dbm_hz", "noise_density_dbm_hz"),
    ("radii", "mc_radius_m"),
    ("inter-site", "inter_site_m"),
    ("max_iters", "max_iters"),
    ("tolerances", "rel_tol"),
    ("gamma_scale", "gamma_scale"),
    ("sigma_h2_norm", "sigma_h2_norm"),
    ("k_mue values", "values"),
    ("sweep needs", "values"),
    ("n_channels", "n_channels"),
    ("n_runs", "n_runs"),
    ("seed", "seed"),
    ("schemes", "schemes"),
];

fn key_line(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let t = l.trim_start();
        t.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

fn anchor(text: &str, message: &str) -> Option<usize> {
    ANCHORS
        .iter()
        .filter(|(needle, _)| message.contains(needle))
        .find_map(|(_, key)| key_line(text, key))
}

impl RunConfig {
    /// Parses TOML text; `source_name` labels error messages.
    pub fn parse(text: &str, source_name: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            ConfigError { source_name: source_name.into(), line, message: e.message().trim().to_string() }
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError { source_name: name.clone(), line: None, message: format!("cannot read: {e}") })?;
        let cfg = Self::parse(&text, &name)?;
        cfg.validate().map_err(|m| ConfigError { source_name: name, line: anchor(&text, &m), message: m })?;
        Ok(cfg)
    }

    /// Applies overrides and fills every preset-dependent field.
    pub fn resolve(mut self, o: &Overrides) -> Self {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.workers {
            self.workers = v;
        }
        if let Some(v) = &o.out_dir {
            self.out_dir = v.clone();
        }
        if let Some(s) = o.scale {
            if s != self.scale {
                self.scale = s;
                self.dims = None;
                self.sweep.n_channels = None;
                self.sweep.n_symbols = None;
            }
        }
        self.dims.get_or_insert_with(|| self.scale.dims());
        self.sweep.n_channels.get_or_insert(self.scale.n_channels());
        self.sweep.n_symbols.get_or_insert(self.scale.n_symbols());
        self
    }

    /// Checks every cross-field constraint; messages name the offending quantity.
    pub fn validate(&self) -> Result<(), String> {
        if self.seed > i64::MAX as u64 {
            return Err(format!("seed must be at most {}", i64::MAX));
        }
        if self.schemes.is_empty() {
            return Err("schemes must list at least one scheme".into());
        }
        if self.curve.n_runs == 0 {
            return Err("n_runs must be at least 1".into());
        }
        let resolved = self.clone().resolve(&Overrides::default());
        let scenario = resolved.scenario();
        scenario.validate().map_err(|e| e.to_string())?;
        resolved.sweep_spec().validate(&scenario).map_err(|e| e.to_string())?;
        Ok(())
    }

    /// Scenario of a resolved config.
    pub fn scenario(&self) -> Scenario {
        Scenario {
            dims: self.dims.clone().unwrap_or_else(|| self.scale.dims()),
            powers: self.powers.clone(),
            geometry: self.geometry.clone(),
            algo: self.algo.clone(),
            gamma_scale: self.gamma_scale,
            sigma_h2_norm: self.sigma_h2_norm,
            rsrp_association: self.rsrp_association,
        }
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        SweepSpec {
            axis: self.sweep.axis,
            values: self.sweep.values.clone(),
            schemes: self.schemes.clone(),
            n_channels: self.sweep.n_channels.unwrap_or(self.scale.n_channels()),
            n_symbols: self.sweep.n_symbols.unwrap_or(self.scale.n_symbols()),
            seed: self.seed,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configurations always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_only_gets_documented_defaults() {
        let c = RunConfig::parse("seed = 7\n", "t").unwrap().resolve(&Overrides::default());
        assert_eq!(c.seed, 7);
        assert_eq!(c.dims, Some(SystemDims::desk()));
        assert_eq!(c.algo, AlgoConfig::default());
        assert_eq!(c.powers, PowerConfig::default());
        assert_eq!(c.sweep.n_channels, Some(100));
        assert_eq!(c.sweep.n_symbols, Some(1000));
        assert_eq!(c.curve.n_runs, 100);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn too_many_mues_are_rejected_on_their_line() {
        let text = "seed = 1\n\n[dims]\nn_bs = 36\nn_sc = 8\nn_ue = 2\nn_s = 1\nk_mue = 40\ns_cells = 2\nl_sue = [4, 4]\n";
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, text).unwrap();
        let e = RunConfig::load(&p).unwrap_err();
        assert!(e.message.contains("K exceeds N_BS"), "{e}");
        assert_eq!(e.line, Some(8));
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_line() {
        let e = RunConfig::parse("seed = 1\n[algo]\nmax_iter = 3\n", "t").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.message.contains("max_iter"), "{e}");
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = RunConfig::parse("seed = 3\nschemes = [\"RAO\", \"ROBUST_SEPARATE\"]\n[sweep]\naxis = \"k_mue\"\nvalues = [2.0, 4.0]\n", "t")
            .unwrap()
            .resolve(&Overrides { scale: Some(Scale::Paper), ..Overrides::default() });
        let back = RunConfig::parse(&c.to_toml(), "echo").unwrap();
        assert_eq!(back, c);
        assert_eq!(back.clone().resolve(&Overrides::default()), c);
    }

    #[test]
    fn scale_override_replaces_preset_fields() {
        let c = RunConfig::default().resolve(&Overrides { scale: Some(Scale::Paper), ..Overrides::default() });
        assert_eq!(c.dims, Some(SystemDims::paper()));
        assert_eq!(c.sweep.n_channels, Some(1000));
        assert_eq!(c.sweep.n_symbols, Some(10_000));
    }
}
