//! Experiment configuration: one TOML file driving every subcommand.
//!
//! ```toml
//! mixture = "two_mode_d2.toml"   # path, relative to this file
//! t_horizon = 2.0
//! n_steps = 200                  # exactly one of n_steps / step
//! n_samples = 2048
//! seed = 42
//! eps = 0.0
//! oracle = "exact"               # "exact" | "perturbed"
//! perturb_mode = "fixed"         # "fixed" | "random"
//! init = "stationary"            # "stationary" | "exact-forward"
//! fine_factor = 16
//!
//! [override_params]              # optional; defaults to derived constants
//! alpha = 1.0
//! big_m = 4.0
//! l_u = 1.0
//!
//! [sweep]                        # sweep subcommand axes
//! step = [0.02, 0.01]
//! t_horizon = [2.0, 4.0]
//! eps = [0.0, 0.1]
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use sgmlab::error::{Error, Result};
use sgmlab::mixture::ConvexityParams;
use sgmlab::sampler::{InitKind, OracleKind, PerturbMode, TimeGrid};
use sgmlab::GaussianMixture;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mixture: PathBuf,
    pub t_horizon: f64,
    pub n_steps: Option<usize>,
    pub step: Option<f64>,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub eps: f64,
    #[serde(default = "default_oracle")]
    pub oracle: String,
    #[serde(default = "default_perturb")]
    pub perturb_mode: String,
    #[serde(default = "default_init")]
    pub init: String,
    #[serde(default = "default_fine_factor")]
    pub fine_factor: usize,
    #[serde(default = "default_nproj")]
    pub w2_nproj: usize,
    #[serde(default = "default_cap")]
    pub w2_cap: usize,
    pub override_params: Option<ParamsOverride>,
    pub sweep: Option<SweepConfig>,
    pub out: Option<PathBuf>,
}

fn default_oracle() -> String {
    "exact".into()
}
fn default_perturb() -> String {
    "fixed".into()
}
fn default_init() -> String {
    "stationary".into()
}
fn default_fine_factor() -> usize {
    16
}
fn default_nproj() -> usize {
    256
}
fn default_cap() -> usize {
    2048
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsOverride {
    pub alpha: f64,
    pub big_m: f64,
    pub l_u: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub step: Vec<f64>,
    pub t_horizon: Vec<f64>,
    pub eps: Vec<f64>,
}

/// A fully resolved experiment: mixture loaded, grid built, parameters fixed.
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub mixture: GaussianMixture,
    pub params: ConvexityParams,
    pub grid: TimeGrid,
    /// Short hash of the raw config bytes, for the CSV provenance line.
    pub config_hash: String,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let raw = std::fs::read(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = toml::from_str(
            std::str::from_utf8(&raw)
                .map_err(|e| Error::config(format!("config is not UTF-8: {e}")))?,
        )
        .map_err(|e| Error::config(format!("bad config {}: {e}", path.display())))?;
        let mut hasher = Sha256::new();
        hasher.update(&raw);
        let hash = hex_prefix(&hasher.finalize(), 12);
        Ok((cfg, hash))
    }

    fn validate(&self) -> Result<()> {
        match (self.n_steps, self.step) {
            (Some(_), Some(_)) => Err(Error::config(
                "give exactly one of n_steps / step, not both",
            )),
            (None, None) => Err(Error::config("give exactly one of n_steps / step")),
            _ => Ok(()),
        }?;
        if self.n_samples == 0 {
            return Err(Error::config("n_samples must be >= 1"));
        }
        // Written so NaN is rejected too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.eps >= 0.0) {
            return Err(Error::config("eps must be >= 0"));
        }
        match self.oracle.as_str() {
            "exact" | "perturbed" => {}
            other => return Err(Error::config(format!("unknown oracle kind {other:?}"))),
        }
        match self.perturb_mode.as_str() {
            "fixed" | "random" => {}
            other => return Err(Error::config(format!("unknown perturb mode {other:?}"))),
        }
        match self.init.as_str() {
            "stationary" | "exact-forward" => {}
            other => return Err(Error::config(format!("unknown init kind {other:?}"))),
        }
        if let Some(s) = &self.sweep {
            if s.step.is_empty() || s.t_horizon.is_empty() || s.eps.is_empty() {
                return Err(Error::config("sweep axes must be nonempty"));
            }
        }
        Ok(())
    }

    pub fn oracle_kind(&self) -> OracleKind {
        if self.oracle == "perturbed" && self.eps > 0.0 {
            OracleKind::Perturbed {
                eps: self.eps,
                mode: self.perturb_kind(),
            }
        } else {
            OracleKind::Exact
        }
    }

    pub fn perturb_kind(&self) -> PerturbMode {
        if self.perturb_mode == "random" {
            PerturbMode::RandomDirection
        } else {
            PerturbMode::FixedDirection
        }
    }

    pub fn init_kind(&self) -> InitKind {
        if self.init == "exact-forward" {
            InitKind::ExactForwardT
        } else {
            InitKind::Stationary
        }
    }
}

/// Loads the config, the mixture it points at, and resolves grid/params.
pub fn resolve(config_path: &Path, seed_override: Option<u64>) -> Result<Experiment> {
    let (mut cfg, config_hash) = ExperimentConfig::load(config_path)?;
    cfg.validate()?;
    if let Some(s) = seed_override {
        cfg.seed = s;
    }
    let mixture_path = if cfg.mixture.is_relative() {
        config_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&cfg.mixture)
    } else {
        cfg.mixture.clone()
    };
    let raw = std::fs::read_to_string(&mixture_path).map_err(|e| {
        Error::config(format!(
            "cannot read mixture file {}: {e}",
            mixture_path.display()
        ))
    })?;
    let mixture = GaussianMixture::from_toml_str(&raw)?;
    let params = match cfg.override_params {
        Some(o) => ConvexityParams::new(o.alpha, o.big_m, o.l_u)?,
        None => mixture.weak_convexity_params(),
    };
    let grid = match (cfg.n_steps, cfg.step) {
        (Some(n), None) => TimeGrid::new(cfg.t_horizon, n)?,
        (None, Some(h)) => TimeGrid::from_step(cfg.t_horizon, h)?,
        _ => unreachable!("validated above"),
    };
    Ok(Experiment {
        cfg,
        mixture,
        params,
        grid,
        config_hash,
    })
}

pub fn hex_prefix(bytes: &[u8], n: usize) -> String {
    bytes
        .iter()
        .flat_map(|b| [b >> 4, b & 0xf])
        .take(n)
        .map(|v| char::from_digit(v as u32, 16).unwrap())
        .collect()
}
