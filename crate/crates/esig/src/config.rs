//! Run configuration shared by the command line, configuration files and
//! output documents.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use esig_core::covariance::{make_model, Model, ModelSpec};
use esig_core::engine::QuadratureConfig;
use serde::{Deserialize, Serialize};

/// Serializable form of [`ModelSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    Fbm {
        hurst: f64,
        horizon: f64,
    },
    Bm {
        horizon: f64,
    },
    Bridge {
        horizon: f64,
        #[serde(default)]
        eps: Option<f64>,
    },
    Ou {
        sigma: f64,
        theta: f64,
        horizon: f64,
    },
}

impl ModelConfig {
    pub fn spec(&self) -> ModelSpec {
        match *self {
            ModelConfig::Fbm { hurst, horizon } => ModelSpec::Fbm { hurst, horizon },
            ModelConfig::Bm { horizon } => ModelSpec::Bm { horizon },
            ModelConfig::Bridge { horizon, eps } => ModelSpec::Bridge { horizon, eps },
            ModelConfig::Ou {
                sigma,
                theta,
                horizon,
            } => ModelSpec::Ou {
                sigma,
                theta,
                horizon,
            },
        }
    }

    pub fn build(&self) -> esig_core::Result<Model> {
        make_model(self.spec())
    }

    pub fn hurst(&self) -> Option<f64> {
        match *self {
            ModelConfig::Fbm { hurst, .. } => Some(hurst),
            ModelConfig::Bm { .. } => Some(0.5),
            _ => None,
        }
    }
}

/// Serializable form of [`QuadratureConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSettings {
    pub rel_tol: f64,
    pub high_dim_rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: usize,
    pub grading_exponent: Option<f64>,
    pub mc_fallback_samples: usize,
    pub rng_seed: u64,
    pub closed_form_reductions: bool,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self::from(&QuadratureConfig::default())
    }
}

impl From<&QuadratureConfig> for QuadratureSettings {
    fn from(c: &QuadratureConfig) -> Self {
        Self {
            rel_tol: c.rel_tol,
            high_dim_rel_tol: c.high_dim_rel_tol,
            abs_tol: c.abs_tol,
            max_depth: c.max_depth,
            grading_exponent: c.grading_exponent,
            mc_fallback_samples: c.mc_fallback_samples,
            rng_seed: c.rng_seed,
            closed_form_reductions: c.closed_form_reductions,
        }
    }
}

impl From<&QuadratureSettings> for QuadratureConfig {
    fn from(q: &QuadratureSettings) -> Self {
        Self {
            rel_tol: q.rel_tol,
            high_dim_rel_tol: q.high_dim_rel_tol,
            abs_tol: q.abs_tol,
            max_depth: q.max_depth,
            grading_exponent: q.grading_exponent,
            mc_fallback_samples: q.mc_fallback_samples,
            rng_seed: q.rng_seed,
            closed_form_reductions: q.closed_form_reductions,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Compute,
    Verify,
    Convergence,
    Sample,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Compute => "compute",
            Command::Verify => "verify",
            Command::Convergence => "convergence",
            Command::Sample => "sample",
        }
    }
}

/// Fully resolved parameters of one run. Every output document embeds it,
/// and feeding it back through `--config` repeats the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub model: ModelConfig,
    pub s: f64,
    pub t: f64,
    /// Path dimension `d`.
    pub dim: usize,
    /// Signature level `N`, or word length for chaos kernels.
    pub level: usize,
    /// Chaos order `m`.
    pub chaos: usize,
    /// Word of a chaos kernel; defaults to the word `(1, …, 1)`.
    #[serde(default)]
    pub word: Option<Vec<usize>>,
    /// Free-time tuples at which kernels are evaluated.
    #[serde(default)]
    pub free_times: Option<Vec<Vec<f64>>>,
    pub quadrature: QuadratureSettings,
    /// Grid cell counts of the convergence study.
    pub grids: Vec<usize>,
    /// Grid cell count for sampling.
    pub grid: usize,
    pub paths: u64,
    pub seed: u64,
    /// Term budget of the discrete oracle.
    pub oracle_budget: u64,
    #[serde(default)]
    pub suite: Option<String>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub csv: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults for `command` on `model`, with `t` at the model horizon.
    pub fn new(command: Command, model: ModelConfig) -> anyhow::Result<Self> {
        let horizon = model.build()?.as_dyn().horizon();
        Ok(Self {
            command,
            model,
            s: 0.0,
            t: horizon,
            dim: 2,
            level: 4,
            chaos: 0,
            word: None,
            free_times: None,
            quadrature: QuadratureSettings::default(),
            grids: vec![8, 16, 32, 64, 128],
            grid: 256,
            paths: 100_000,
            seed: 0,
            oracle_budget: esig_core::oracle::DEFAULT_TERM_BUDGET,
            suite: None,
            output: None,
            csv: None,
        })
    }

    /// Reads a configuration, or the configuration embedded in an output
    /// document.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(embedded) = value.get_mut("config") {
            value = embedded.take();
        }
        let cfg: Self = serde_json::from_value(value).with_context(|| format!("reading config from {}", path.display()))?;
        Ok(cfg)
    }

    pub fn quadrature_config(&self) -> QuadratureConfig {
        QuadratureConfig::from(&self.quadrature)
    }

    /// Checks everything that does not need a computation.
    pub fn validate(&self) -> anyhow::Result<()> {
        let model = self.model.build()?;
        esig_core::engine::check_interval(&model, self.s, self.t)?;
        self.quadrature_config().validate()?;
        if self.dim == 0 {
            bail!("dim must be at least 1");
        }
        if self.chaos > self.level {
            bail!("chaos order {} exceeds level {}", self.chaos, self.level);
        }
        if let Some(word) = &self.word {
            if word.len() != self.level {
                bail!("word has length {}, expected level {}", word.len(), self.level);
            }
            esig_core::words::Word::new(self.dim, word.clone())?;
        }
        if let Some(times) = &self.free_times {
            for tuple in times {
                if tuple.len() != self.chaos {
                    bail!("free-time tuple {tuple:?} must have {} entries", self.chaos);
                }
            }
        }
        if self.grids.iter().any(|&g| g == 0) || self.grid == 0 {
            bail!("grid cell counts must be positive");
        }
        if self.command == Command::Sample && self.paths < 2 {
            bail!("sampling needs at least two paths");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_json() {
        let cfg = RunConfig::new(Command::Compute, ModelConfig::Fbm { hurst: 0.3, horizon: 1.0 }).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.quadrature_config(), QuadratureConfig::default());
    }

    #[test]
    fn bridge_defaults_to_its_window() {
        let cfg = RunConfig::new(Command::Compute, ModelConfig::Bridge { horizon: 1.0, eps: None }).unwrap();
        assert!((cfg.t - 0.999).abs() < 1e-15);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_inconsistent_settings() {
        let mut cfg = RunConfig::new(Command::Compute, ModelConfig::Bm { horizon: 1.0 }).unwrap();
        cfg.chaos = 5;
        assert!(cfg.validate().is_err());
        cfg.chaos = 1;
        cfg.free_times = Some(vec![vec![0.1, 0.2]]);
        assert!(cfg.validate().is_err());
        cfg.free_times = None;
        cfg.t = 2.0;
        assert!(cfg.validate().is_err());
    }
}
