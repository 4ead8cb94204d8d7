//! Run configuration, read from TOML. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ste_core::evaluation::{CoreTarget, Estimator, RecoveryConfig, ResampleUnit};
use ste_core::estimation::TrainConfig;
use ste_core::soft::SoftConfig;
use ste_core::synthetic::SynthConfig;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Exact Top Cycle, Uncovered Set and Condorcet winner.
    Solve,
    /// Soft membership scores of a given tournament.
    Soft,
    /// Fit a tournament model to comparisons, then score it.
    Fit,
    /// Draw a synthetic instance.
    Synth,
    /// Core-recovery grid over synthetic instances.
    Experiment,
    /// Bootstrap stability of the soft cores.
    Bootstrap,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Soft => "soft",
            Mode::Fit => "fit",
            Mode::Synth => "synth",
            Mode::Experiment => "experiment",
            Mode::Bootstrap => "bootstrap",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    pub comparisons: Option<PathBuf>,
    pub matrix: Option<PathBuf>,
}

/// Axes of the recovery grid; every combination becomes one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n: Vec<usize>,
    pub rho: Vec<f64>,
    pub mu: Vec<f64>,
    pub eta: Vec<f64>,
    pub m: Vec<usize>,
    pub cycle_size: usize,
    pub cycle_prob: f64,
    pub seeds: usize,
    pub estimators: Vec<Estimator>,
}

impl Default for GridConfig {
    fn default() -> Self {
        let rc = RecoveryConfig::default();
        let synth = SynthConfig::default();
        GridConfig {
            n: vec![10, 20],
            rho: vec![0.0, 0.4, 0.8],
            mu: vec![0.0],
            eta: vec![0.0],
            m: vec![200],
            cycle_size: synth.cycle_size,
            cycle_prob: synth.cycle_prob,
            seeds: rc.seeds,
            estimators: rc.estimators,
        }
    }
}

impl GridConfig {
    /// Cells in row-major order over (n, rho, mu, eta, m). All cells share
    /// `seed`, so cells differing in one knob see the same base draws.
    pub fn cells(&self, seed: u64) -> Vec<SynthConfig> {
        let mut out = Vec::new();
        for &n in &self.n {
            for &rho in &self.rho {
                for &mu in &self.mu {
                    for &eta in &self.eta {
                        for &m in &self.m {
                            out.push(SynthConfig {
                                n,
                                rho,
                                cycle_size: self.cycle_size,
                                eta,
                                mu,
                                m,
                                cycle_prob: self.cycle_prob,
                                seed,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapSection {
    pub replicates: usize,
    pub unit: ResampleUnit,
    pub estimator: Estimator,
    pub target: CoreTarget,
}

impl Default for BootstrapSection {
    fn default() -> Self {
        BootstrapSection {
            replicates: 200,
            unit: ResampleUnit::Record,
            estimator: Estimator::Btl,
            target: CoreTarget::Uncovered,
        }
    }
}

/// Everything a run depends on. Component seeds are overwritten by the
/// top-level `seed` during resolution, so one number pins the whole run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub mode: Option<Mode>,
    pub seed: u64,
    pub input: InputConfig,
    pub soft: SoftConfig,
    pub train: TrainConfig,
    pub synth: SynthConfig,
    pub experiment: GridConfig,
    pub bootstrap: BootstrapSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config file; relative input paths are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.input.comparisons, &mut cfg.input.matrix].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Fixes the mode, propagates the seed and checks that the mode has what
    /// it needs.
    pub fn resolve(mut self, mode: Mode) -> Result<Self> {
        if let Some(m) = self.mode {
            if m != mode {
                return Err(CliError::Config(format!(
                    "config file is for mode {:?} but {:?} was requested",
                    m.name(),
                    mode.name()
                )));
            }
        }
        self.mode = Some(mode);
        self.synth.seed = self.seed;
        self.train.seed = self.seed;
        self.soft.validate()?;
        match mode {
            Mode::Solve | Mode::Soft => {
                if self.input.matrix.is_none() && self.input.comparisons.is_none() {
                    return Err(CliError::Config(format!(
                        "mode {} needs input.matrix or input.comparisons",
                        mode.name()
                    )));
                }
                if self.input.matrix.is_some() && self.input.comparisons.is_some() {
                    return Err(CliError::Config(
                        "set only one of input.matrix and input.comparisons".into(),
                    ));
                }
            }
            Mode::Fit | Mode::Bootstrap => {
                if self.input.comparisons.is_none() {
                    return Err(CliError::Config(format!(
                        "mode {} needs input.comparisons",
                        mode.name()
                    )));
                }
                self.train.validate()?;
                if mode == Mode::Bootstrap && self.bootstrap.replicates < 2 {
                    return Err(CliError::Config("bootstrap.replicates must be at least 2".into()));
                }
            }
            Mode::Synth => self.synth.validate()?,
            Mode::Experiment => {
                let g = &self.experiment;
                if g.seeds == 0 || g.estimators.is_empty() {
                    return Err(CliError::Config(
                        "experiment needs at least one seed and one estimator".into(),
                    ));
                }
                let cells = g.cells(self.seed);
                if cells.is_empty() {
                    return Err(CliError::Config("experiment grid has no cells".into()));
                }
                for c in &cells {
                    c.validate()?;
                }
                self.train.validate()?;
            }
        }
        for p in [&self.input.comparisons, &self.input.matrix].into_iter().flatten() {
            if p.as_os_str().is_empty() {
                return Err(CliError::Config("input paths must be non-empty".into()));
            }
        }
        Ok(self)
    }

    pub fn recovery(&self) -> RecoveryConfig {
        RecoveryConfig {
            soft: self.soft.clone(),
            estimators: self.experiment.estimators.clone(),
            train: self.train.clone(),
            seeds: self.experiment.seeds,
        }
    }
}
