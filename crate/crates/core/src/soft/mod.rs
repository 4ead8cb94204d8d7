//! Soft Top-Cycle and Uncovered-Set membership scores.
//!
//! The pipeline is `P → D_τ (soft majority edges) → R (damped path flow)
//! → t (softmin of reach)` and `D_τ → cover → u`. Every step is built on a
//! [`Tape`], so the same code gives values and gradients.

pub mod graph;

use serde::{Deserialize, Serialize};

use crate::error::{check_tau, Error, Result};
use crate::numerics::{Matrix, Tape};
use crate::tournament::{AgentSet, ProbTournament};

/// Default sigmoid scale for the squashed-smax Uncovered-Set variant.
pub const DEFAULT_BETA: f64 = 10.0;

/// How cover scores are aggregated into an Uncovered-Set score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UcVariant {
    /// `u = 1 − boltzmann_c(cover[c][a])`.
    #[default]
    Boltzmann,
    /// `u = 1 − σ(β · smax_c(cover[c][a]))`.
    SquashedSmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SoftConfig {
    /// Edge temperature.
    pub tau: f64,
    /// Softmin temperature for Top-Cycle scores; `tau` when unset.
    pub tau_softmin: Option<f64>,
    /// Temperature of both cover aggregations; `tau` when unset.
    pub tau_cover: Option<f64>,
    /// Maximum path length; `n − 1` (at least 1) when unset.
    pub k: Option<usize>,
    pub alpha: f64,
    pub uc_variant: UcVariant,
    pub beta: f64,
}

impl Default for SoftConfig {
    fn default() -> Self {
        SoftConfig {
            tau: 0.1,
            tau_softmin: None,
            tau_cover: None,
            k: None,
            alpha: 1.0,
            uc_variant: UcVariant::Boltzmann,
            beta: DEFAULT_BETA,
        }
    }
}

impl SoftConfig {
    pub fn with_tau(tau: f64) -> Self {
        SoftConfig {
            tau,
            ..Self::default()
        }
    }

    pub fn k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_tau(self.tau)?;
        check_tau(self.softmin_tau())?;
        check_tau(self.cover_tau())?;
        if self.k == Some(0) {
            return Err(Error::InvalidParameter("path length K must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "damping alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    pub fn softmin_tau(&self) -> f64 {
        self.tau_softmin.unwrap_or(self.tau)
    }

    pub fn cover_tau(&self) -> f64 {
        self.tau_cover.unwrap_or(self.tau)
    }

    pub fn path_len(&self, n: usize) -> usize {
        self.k.unwrap_or(n.saturating_sub(1).max(1))
    }

    /// Copy with every default made explicit for an `n`-agent tournament.
    pub fn resolved(&self, n: usize) -> SoftConfig {
        SoftConfig {
            tau_softmin: Some(self.softmin_tau()),
            tau_cover: Some(self.cover_tau()),
            k: Some(self.path_len(n)),
            ..self.clone()
        }
    }
}

/// Rule turning per-agent scores into a core.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule", content = "value")]
pub enum ThresholdRule {
    /// `score > c`.
    Absolute(f64),
    /// `score > c · max(score)`.
    RelativeToMax(f64),
}

impl ThresholdRule {
    pub fn core(&self, scores: &[f64]) -> AgentSet {
        let cut = self.cutoff(scores);
        (0..scores.len()).filter(|&i| scores[i] > cut).collect()
    }

    pub fn cutoff(&self, scores: &[f64]) -> f64 {
        match *self {
            ThresholdRule::Absolute(c) => c,
            ThresholdRule::RelativeToMax(c) => {
                c * scores.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }
}

/// Core extraction for Top-Cycle scores. Members reach every agent with
/// path flow ≥ 1 in the sharp limit, non-members have flow near 0.
pub const TOP_CYCLE_RULE: ThresholdRule = ThresholdRule::Absolute(0.5);
/// Core extraction for Uncovered-Set scores, which live in [0, 1].
pub const UNCOVERED_RULE: ThresholdRule = ThresholdRule::Absolute(0.5);

/// Per-agent soft membership scores.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreScores {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub config: SoftConfig,
}

impl CoreScores {
    pub fn top_cycle_core(&self) -> AgentSet {
        TOP_CYCLE_RULE.core(&self.t)
    }

    pub fn uncovered_core(&self) -> AgentSet {
        UNCOVERED_RULE.core(&self.u)
    }

    pub fn argmax_t(&self) -> usize {
        argmax(&self.t)
    }

    pub fn argmax_u(&self) -> usize {
        argmax(&self.u)
    }
}

/// Index of the largest value; lowest index on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Geometric temperature schedule `τ_max (τ_min/τ_max)^{t/T}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealSchedule {
    pub tau_max: f64,
    pub tau_min: f64,
    pub steps: usize,
}

impl AnnealSchedule {
    pub fn new(tau_max: f64, tau_min: f64, steps: usize) -> Result<Self> {
        let s = AnnealSchedule {
            tau_max,
            tau_min,
            steps,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_tau(self.tau_max)?;
        check_tau(self.tau_min)?;
        if self.tau_min > self.tau_max {
            return Err(Error::InvalidParameter(format!(
                "tau_min {} exceeds tau_max {}",
                self.tau_min, self.tau_max
            )));
        }
        if self.steps == 0 {
            return Err(Error::InvalidParameter("anneal steps must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn anneal(schedule: &AnnealSchedule, step: usize) -> Result<f64> {
    schedule.validate()?;
    if step > schedule.steps {
        return Err(Error::InvalidParameter(format!(
            "anneal step {step} beyond schedule length {}",
            schedule.steps
        )));
    }
    if step == schedule.steps {
        return Ok(schedule.tau_min);
    }
    let frac = step as f64 / schedule.steps as f64;
    Ok(schedule.tau_max * (schedule.tau_min / schedule.tau_max).powf(frac))
}

fn require_square_unit(m: &Matrix, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "{what} must be square, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if m
        .as_slice()
        .iter()
        .any(|&v| !(v.is_finite() && (0.0..=1.0).contains(&v)))
    {
        return Err(Error::InvalidParameter(format!(
            "{what} entries must lie in [0, 1]"
        )));
    }
    Ok(())
}

pub fn soft_edges(p: &ProbTournament, tau: f64) -> Result<Matrix> {
    check_tau(tau)?;
    let mut tape = Tape::new();
    let pv = tape.input(p.matrix().clone());
    let d = graph::edges(&mut tape, pv, tau)?;
    Ok(tape.value(d).clone())
}

pub fn soft_reach(d: &Matrix, k: usize, alpha: f64) -> Result<Matrix> {
    require_square_unit(d, "soft adjacency")?;
    crate::numerics::matpow_sum(d, k, alpha)
}

pub fn top_cycle_scores(r: &Matrix, tau_s: f64) -> Result<Vec<f64>> {
    check_tau(tau_s)?;
    if !r.is_square() {
        return Err(Error::Shape("reachability matrix must be square".into()));
    }
    if r.rows() == 0 {
        return Err(Error::Empty("top-cycle scores need at least one agent"));
    }
    let mut tape = Tape::new();
    let rv = tape.input(r.clone());
    let t = graph::top_cycle(&mut tape, rv, tau_s);
    Ok(tape.value(t).as_slice().to_vec())
}

pub fn cover_scores(d: &Matrix, tau_c: f64) -> Result<Matrix> {
    check_tau(tau_c)?;
    require_square_unit(d, "soft adjacency")?;
    let mut tape = Tape::new();
    let dv = tape.input(d.clone());
    let c = graph::cover(&mut tape, dv, tau_c)?;
    Ok(tape.value(c).clone())
}

pub fn uncovered_scores(cover: &Matrix, config: &SoftConfig) -> Result<Vec<f64>> {
    config.validate()?;
    require_square_unit(cover, "cover matrix")?;
    if cover.rows() == 0 {
        return Err(Error::Empty("uncovered scores need at least one agent"));
    }
    let mut tape = Tape::new();
    let cv = tape.input(cover.clone());
    let u = graph::uncovered(&mut tape, cv, config)?;
    Ok(tape.value(u).as_slice().to_vec())
}

pub fn ste_scores(p: &ProbTournament, config: &SoftConfig) -> Result<CoreScores> {
    let mut tape = Tape::new();
    let pv = tape.input(p.matrix().clone());
    let vars = graph::ste(&mut tape, pv, config)?;
    Ok(CoreScores {
        t: tape.value(vars.top_cycle).as_slice().to_vec(),
        u: tape.value(vars.uncovered).as_slice().to_vec(),
        config: config.resolved(p.n()),
    })
}

#[cfg(test)]
mod tests;
