//! Ranking baselines: win rate, Elo and Rank Centrality.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::ComparisonDataset;
use crate::tournament::{AgentSet, ProbTournament};

pub const ELO_K: f64 = 32.0;
pub const ELO_INITIAL: f64 = 1500.0;
/// Uniform teleportation mixed into the Rank Centrality chain.
pub const TELEPORT: f64 = 1e-6;
pub const RC_TOL: f64 = 1e-10;
pub const RC_MAX_ITERS: usize = 100_000;

/// Per-agent scores and the induced order (descending, lower index first on ties).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub scores: Vec<f64>,
    pub order: Vec<usize>,
}

impl Ranking {
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        // stable sort keeps index order among equal scores
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        Ranking { scores, order }
    }

    pub fn top(&self) -> Option<usize> {
        self.order.first().copied()
    }
}

/// Fraction of games won; agents without games score 0.5.
pub fn win_rate(data: &ComparisonDataset) -> Ranking {
    let n = data.n();
    let mut wins = vec![0u64; n];
    let mut games = vec![0u64; n];
    for r in data.records() {
        wins[r.winner()] += 1;
        games[r.a] += 1;
        games[r.b] += 1;
    }
    Ranking::from_scores(
        (0..n)
            .map(|a| {
                if games[a] == 0 {
                    0.5
                } else {
                    wins[a] as f64 / games[a] as f64
                }
            })
            .collect(),
    )
}

/// Sequential Elo over records in dataset order.
pub fn elo(data: &ComparisonDataset, k_factor: f64, initial: f64) -> Ranking {
    let mut r = vec![initial; data.n()];
    for rec in data.records() {
        let (a, b) = (rec.a, rec.b);
        let expect_a = 1.0 / (1.0 + 10f64.powf((r[b] - r[a]) / 400.0));
        let delta = k_factor * (rec.y as f64 - expect_a);
        r[a] += delta;
        r[b] -= delta;
    }
    Ranking::from_scores(r)
}

/// Stationary distribution of the comparison random walk: from `a`, move to
/// `b` with probability `P[b][a] / n`, stay otherwise; mixed with a small
/// uniform teleport so the chain is irreducible.
pub fn rank_centrality(p: &ProbTournament) -> Result<Ranking> {
    let n = p.n();
    if n == 0 {
        return Err(Error::Empty("rank centrality needs at least one agent"));
    }
    let nf = n as f64;
    let mut t = vec![0.0; n * n];
    for a in 0..n {
        let mut stay = 1.0;
        for b in 0..n {
            if a != b {
                let w = p.get(b, a) / nf;
                t[a * n + b] = w;
                stay -= w;
            }
        }
        t[a * n + a] = stay;
    }
    for v in &mut t {
        *v = (1.0 - TELEPORT) * *v + TELEPORT / nf;
    }
    let mut pi = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..RC_MAX_ITERS {
        next.iter_mut().for_each(|v| *v = 0.0);
        for a in 0..n {
            let mass = pi[a];
            for b in 0..n {
                next[b] += mass * t[a * n + b];
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        residual = pi.iter().zip(&next).map(|(x, y)| (x - y).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if residual < RC_TOL {
            return Ok(Ranking::from_scores(pi));
        }
    }
    Err(Error::NonConvergence {
        residual,
        iterations: RC_MAX_ITERS,
    })
}

/// Whether the top-ranked agent belongs to `core`.
pub fn core_agreement(ranking: &Ranking, core: &AgentSet) -> Result<bool> {
    if core.is_empty() {
        return Err(Error::Empty("core must be non-empty"));
    }
    Ok(ranking.top().is_some_and(|a| core.contains(&a)))
}
