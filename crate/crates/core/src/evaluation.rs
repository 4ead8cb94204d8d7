//! Core-recovery metrics, bootstrap stability, calibration scores and the
//! synthetic recovery experiment.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{core_agreement, elo, rank_centrality, win_rate, Ranking, ELO_INITIAL, ELO_K};
use crate::error::{Error, Result};
use crate::estimation::{empirical_tournament, fit_btl, ComparisonDataset, TrainConfig};
use crate::soft::{argmax, ste_scores, SoftConfig, ThresholdRule};
use crate::synthetic::{derive_seed, gen_instance, rng_for, SynthConfig};
use crate::tournament::{AgentSet, ProbTournament};

pub use crate::estimation::calibration_reg as ece;

/// Share of replicates allowed to fail before a bootstrap is rejected.
pub const MAX_FAILED_FRACTION: f64 = 0.1;
const STREAM_BOOTSTRAP: u64 = 11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub jaccard: f64,
}

/// Standard set-overlap scores. Two empty sets count as perfect agreement.
pub fn set_metrics(predicted: &AgentSet, truth: &AgentSet, universe: usize) -> SetMetrics {
    debug_assert!(predicted.iter().chain(truth).all(|&a| a < universe));
    if predicted.is_empty() && truth.is_empty() {
        return SetMetrics {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
            jaccard: 1.0,
        };
    }
    let inter = predicted.intersection(truth).count() as f64;
    let union = predicted.union(truth).count() as f64;
    let ratio = |num: f64, den: usize| if den == 0 { 0.0 } else { num / den as f64 };
    let precision = ratio(inter, predicted.len());
    let recall = ratio(inter, truth.len());
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    SetMetrics {
        precision,
        recall,
        f1,
        jaccard: inter / union,
    }
}

fn jaccard(a: &AgentSet, b: &AgentSet) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    a.intersection(b).count() as f64 / a.union(b).count() as f64
}

/// Mean squared error between scores and 0/1 truth.
pub fn brier(scores: &[f64], truth: &[bool]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            got: scores.len(),
        });
    }
    if scores.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = scores
        .iter()
        .zip(truth)
        .map(|(&s, &t)| {
            let d = s - if t { 1.0 } else { 0.0 };
            d * d
        })
        .sum();
    Ok(sum / scores.len() as f64)
}

/// What a bootstrap replicate resamples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResampleUnit {
    /// Individual comparisons.
    #[default]
    Record,
    /// Whole agent pairs, with all their comparisons.
    Pair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub unit: ResampleUnit,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 200,
            unit: ResampleUnit::Record,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapReport {
    pub agents: Vec<String>,
    pub replicates: usize,
    pub failed: usize,
    pub rule: ThresholdRule,
    pub inclusion_rate: Vec<f64>,
    pub mean_score: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    /// Mean Jaccard index over all pairs of replicate cores.
    pub stability_jaccard: f64,
}

impl BootstrapReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("agent,inclusion_rate,mean_score,ci_low,ci_high\n");
        for (i, name) in self.agents.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                name, self.inclusion_rate[i], self.mean_score[i], self.ci_low[i], self.ci_high[i]
            );
        }
        out
    }
}

/// Linear-interpolated percentile of sorted data, `q` in [0, 1].
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn resample_indices(data: &ComparisonDataset, unit: ResampleUnit, rng: &mut impl Rng) -> Vec<usize> {
    let len = data.len();
    match unit {
        ResampleUnit::Record => (0..len).map(|_| rng.random_range(0..len)).collect(),
        ResampleUnit::Pair => {
            let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
            for (i, r) in data.records().iter().enumerate() {
                groups.entry((r.a.min(r.b), r.a.max(r.b))).or_default().push(i);
            }
            let groups: Vec<Vec<usize>> = groups.into_values().collect();
            let mut out = Vec::with_capacity(len);
            for _ in 0..groups.len() {
                out.extend_from_slice(&groups[rng.random_range(0..groups.len())]);
            }
            out
        }
    }
}

/// Record-level bootstrap with `b` replicates.
pub fn bootstrap<F>(
    data: &ComparisonDataset,
    b: usize,
    pipeline: F,
    rule: ThresholdRule,
    seed: u64,
) -> Result<BootstrapReport>
where
    F: Fn(&ComparisonDataset) -> Result<Vec<f64>> + Sync,
{
    let cfg = BootstrapConfig {
        replicates: b,
        unit: ResampleUnit::Record,
        seed,
    };
    bootstrap_with(data, &cfg, pipeline, rule)
}

/// Runs `pipeline` on resampled datasets and summarizes per-agent scores and
/// the cores picked out by `rule`. Replicates run in parallel; each draws
/// from its own derived seed, so results do not depend on scheduling.
pub fn bootstrap_with<F>(
    data: &ComparisonDataset,
    cfg: &BootstrapConfig,
    pipeline: F,
    rule: ThresholdRule,
) -> Result<BootstrapReport>
where
    F: Fn(&ComparisonDataset) -> Result<Vec<f64>> + Sync,
{
    let b = cfg.replicates;
    if b < 2 {
        return Err(Error::InvalidParameter(format!(
            "bootstrap needs at least 2 replicates, got {b}"
        )));
    }
    if data.is_empty() {
        return Err(Error::Empty("bootstrap needs at least one comparison"));
    }
    let n = data.n();
    let results: Vec<Option<Vec<f64>>> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rng_for(derive_seed(cfg.seed, STREAM_BOOTSTRAP), rep as u64);
            let sample = data.resample(&resample_indices(data, cfg.unit, &mut rng));
            match pipeline(&sample) {
                Ok(s) if s.len() == n && s.iter().all(|v| v.is_finite()) => Some(s),
                _ => None,
            }
        })
        .collect();
    let ok: Vec<Vec<f64>> = results.into_iter().flatten().collect();
    let failed = b - ok.len();
    if failed as f64 > MAX_FAILED_FRACTION * b as f64 {
        return Err(Error::BootstrapFailures { failed, total: b });
    }
    let cores: Vec<AgentSet> = ok.iter().map(|s| rule.core(s)).collect();
    let reps = ok.len() as f64;
    let mut inclusion_rate = vec![0.0; n];
    let mut mean_score = vec![0.0; n];
    let mut ci_low = vec![0.0; n];
    let mut ci_high = vec![0.0; n];
    for a in 0..n {
        inclusion_rate[a] = cores.iter().filter(|c| c.contains(&a)).count() as f64 / reps;
        let mut col: Vec<f64> = ok.iter().map(|s| s[a]).collect();
        mean_score[a] = col.iter().sum::<f64>() / reps;
        col.sort_by(f64::total_cmp);
        ci_low[a] = percentile(&col, 0.025);
        ci_high[a] = percentile(&col, 0.975);
    }
    let mut pair_sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..cores.len() {
        for j in i + 1..cores.len() {
            pair_sum += jaccard(&cores[i], &cores[j]);
            pairs += 1;
        }
    }
    Ok(BootstrapReport {
        agents: data.agents().names().to_vec(),
        replicates: b,
        failed,
        rule,
        inclusion_rate,
        mean_score,
        ci_low,
        ci_high,
        stability_jaccard: if pairs == 0 { 1.0 } else { pair_sum / pairs as f64 },
    })
}

/// How STE obtains its probabilistic tournament from data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Maximum-likelihood Bradley-Terry probabilities.
    #[default]
    Btl,
    /// Raw win frequencies, 0.5 for unseen pairs.
    Empirical,
}

pub fn estimate_tournament(
    data: &ComparisonDataset,
    estimator: Estimator,
    train: &TrainConfig,
) -> Result<ProbTournament> {
    if data.is_empty() {
        return Ok(ProbTournament::uniform(data.n()));
    }
    match estimator {
        Estimator::Empirical => Ok(empirical_tournament(data)),
        Estimator::Btl => Ok(fit_btl(data, train)?.tournament()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecoveryConfig {
    pub soft: SoftConfig,
    /// STE variants to run, one row set each.
    pub estimators: Vec<Estimator>,
    pub train: TrainConfig,
    pub seeds: usize,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        RecoveryConfig {
            soft: SoftConfig::default(),
            estimators: vec![Estimator::Btl, Estimator::Empirical],
            train: TrainConfig::default(),
            seeds: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Ste(Estimator),
    WinRate,
    Elo,
    RankCentrality,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Ste(Estimator::Btl) => "ste",
            Method::Ste(Estimator::Empirical) => "ste_empirical",
            Method::WinRate => "win_rate",
            Method::Elo => "elo",
            Method::RankCentrality => "rank_centrality",
        }
    }
}

impl PartialOrd for Estimator {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Estimator {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (*self as u8).cmp(&(*other as u8))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoreTarget {
    TopCycle,
    #[default]
    Uncovered,
}

impl CoreTarget {
    pub fn name(&self) -> &'static str {
        match self {
            CoreTarget::TopCycle => "tc",
            CoreTarget::Uncovered => "uc",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryRow {
    pub cell: usize,
    pub config: SynthConfig,
    pub method: Method,
    pub target: CoreTarget,
    pub metrics: SetMetrics,
    /// Top-scored agent lies in the true core.
    pub agreement: bool,
    pub truth_core_size: usize,
    pub predicted_core_size: usize,
    /// No comparisons were observed, so every agent looks alike.
    pub degenerate: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoverySummary {
    pub cell: usize,
    pub config: SynthConfig,
    pub method: Method,
    pub target: CoreTarget,
    pub runs: usize,
    pub errors: usize,
    pub degenerate: usize,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub jaccard_mean: f64,
    pub jaccard_std: f64,
    pub agreement_rate: f64,
    pub truth_core_size_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryTable {
    pub rows: Vec<RecoveryRow>,
    pub summary: Vec<RecoverySummary>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
    (m, var.sqrt())
}

impl RecoveryTable {
    pub fn rows_csv(&self) -> String {
        let mut out = String::from(
            "cell,n,rho,mu,eta,m,seed,method,target,precision,recall,f1,jaccard,agreement,truth_core_size,predicted_core_size,degenerate,error\n",
        );
        for r in &self.rows {
            let c = &r.config;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.cell,
                c.n,
                c.rho,
                c.mu,
                c.eta,
                c.m,
                c.seed,
                r.method.name(),
                r.target.name(),
                r.metrics.precision,
                r.metrics.recall,
                r.metrics.f1,
                r.metrics.jaccard,
                r.agreement as u8,
                r.truth_core_size,
                r.predicted_core_size,
                r.degenerate as u8,
                r.error.as_deref().unwrap_or("").replace(',', ";"),
            );
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "cell,n,rho,mu,eta,m,method,target,runs,errors,degenerate,f1_mean,f1_std,jaccard_mean,jaccard_std,agreement_rate,truth_core_size_mean\n",
        );
        for s in &self.summary {
            let c = &s.config;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                s.cell,
                c.n,
                c.rho,
                c.mu,
                c.eta,
                c.m,
                s.method.name(),
                s.target.name(),
                s.runs,
                s.errors,
                s.degenerate,
                s.f1_mean,
                s.f1_std,
                s.jaccard_mean,
                s.jaccard_std,
                s.agreement_rate,
                s.truth_core_size_mean,
            );
        }
        out
    }
}

fn ranking_rows(
    cell: usize,
    cfg: &SynthConfig,
    method: Method,
    ranking: &Ranking,
    truths: [(CoreTarget, &AgentSet); 2],
    degenerate: bool,
) -> Vec<RecoveryRow> {
    let top: AgentSet = ranking.top().into_iter().collect();
    truths
        .into_iter()
        .map(|(target, truth)| RecoveryRow {
            cell,
            config: cfg.clone(),
            method,
            target,
            metrics: set_metrics(&top, truth, cfg.n),
            agreement: core_agreement(ranking, truth).unwrap_or(false),
            truth_core_size: truth.len(),
            predicted_core_size: top.len(),
            degenerate,
            error: None,
        })
        .collect()
}

fn run_one(cell: usize, cfg: &SynthConfig, rc: &RecoveryConfig) -> Result<Vec<RecoveryRow>> {
    let inst = gen_instance(cfg)?;
    let data = &inst.dataset;
    let degenerate = data.is_empty();
    let truths = [
        (CoreTarget::TopCycle, &inst.truth_tc),
        (CoreTarget::Uncovered, &inst.truth_uc),
    ];
    let mut rows = Vec::new();
    for &est in &rc.estimators {
        let method = Method::Ste(est);
        let scored = estimate_tournament(data, est, &rc.train).and_then(|p| ste_scores(&p, &rc.soft));
        for (target, truth) in truths {
            let row = match &scored {
                Ok(s) => {
                    let (core, lead) = match target {
                        CoreTarget::TopCycle => (s.top_cycle_core(), argmax(&s.t)),
                        CoreTarget::Uncovered => (s.uncovered_core(), argmax(&s.u)),
                    };
                    RecoveryRow {
                        cell,
                        config: cfg.clone(),
                        method,
                        target,
                        metrics: set_metrics(&core, truth, cfg.n),
                        agreement: truth.contains(&lead),
                        truth_core_size: truth.len(),
                        predicted_core_size: core.len(),
                        degenerate,
                        error: None,
                    }
                }
                Err(e) => RecoveryRow {
                    cell,
                    config: cfg.clone(),
                    method,
                    target,
                    metrics: SetMetrics {
                        precision: f64::NAN,
                        recall: f64::NAN,
                        f1: f64::NAN,
                        jaccard: f64::NAN,
                    },
                    agreement: false,
                    truth_core_size: truth.len(),
                    predicted_core_size: 0,
                    degenerate,
                    error: Some(e.to_string()),
                },
            };
            rows.push(row);
        }
    }
    rows.extend(ranking_rows(cell, cfg, Method::WinRate, &win_rate(data), truths, degenerate));
    rows.extend(ranking_rows(cell, cfg, Method::Elo, &elo(data, ELO_K, ELO_INITIAL), truths, degenerate));
    let rc_rank = rank_centrality(&empirical_tournament(data))?;
    rows.extend(ranking_rows(cell, cfg, Method::RankCentrality, &rc_rank, truths, degenerate));
    Ok(rows)
}

/// Runs STE and the baselines on `seeds` instances of every grid cell. Cell
/// `i`, seed `s` uses instance seed `derive_seed(grid[i].seed, s)`.
pub fn recovery_curve(grid: &[SynthConfig], rc: &RecoveryConfig) -> Result<RecoveryTable> {
    if grid.is_empty() {
        return Err(Error::Empty("recovery grid has no cells"));
    }
    if rc.seeds == 0 {
        return Err(Error::InvalidParameter("recovery needs at least one seed".into()));
    }
    rc.soft.validate()?;
    for cell in grid {
        cell.validate()?;
    }
    let jobs: Vec<(usize, SynthConfig)> = grid
        .iter()
        .enumerate()
        .flat_map(|(i, cell)| {
            (0..rc.seeds).map(move |s| {
                let mut c = cell.clone();
                c.seed = derive_seed(cell.seed, s as u64);
                (i, c)
            })
        })
        .collect();
    let per_job: Vec<Vec<RecoveryRow>> = jobs
        .par_iter()
        .map(|(i, c)| run_one(*i, c, rc))
        .collect::<Result<_>>()?;
    let rows: Vec<RecoveryRow> = per_job.into_iter().flatten().collect();

    let mut groups: BTreeMap<(usize, Method, CoreTarget), Vec<&RecoveryRow>> = BTreeMap::new();
    for r in &rows {
        groups.entry((r.cell, r.method, r.target)).or_default().push(r);
    }
    let summary = groups
        .into_iter()
        .map(|((cell, method, target), rs)| {
            let good: Vec<&&RecoveryRow> = rs.iter().filter(|r| r.error.is_none()).collect();
            let f1: Vec<f64> = good.iter().map(|r| r.metrics.f1).collect();
            let jac: Vec<f64> = good.iter().map(|r| r.metrics.jaccard).collect();
            let (f1_mean, f1_std) = mean_std(&f1);
            let (jaccard_mean, jaccard_std) = mean_std(&jac);
            let config = grid[cell].clone();
            RecoverySummary {
                cell,
                config,
                method,
                target,
                runs: rs.len(),
                errors: rs.len() - good.len(),
                degenerate: rs.iter().filter(|r| r.degenerate).count(),
                f1_mean,
                f1_std,
                jaccard_mean,
                jaccard_std,
                agreement_rate: if good.is_empty() {
                    f64::NAN
                } else {
                    good.iter().filter(|r| r.agreement).count() as f64 / good.len() as f64
                },
                truth_core_size_mean: rs.iter().map(|r| r.truth_core_size as f64).sum::<f64>()
                    / rs.len() as f64,
            }
        })
        .collect();
    Ok(RecoveryTable { rows, summary })
}
