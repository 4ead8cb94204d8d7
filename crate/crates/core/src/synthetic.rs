//! Seeded synthetic tournaments: a transitive BTL base, an injected cycle,
//! and sampled match data with sparsity and label noise.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{Comparison, ComparisonDataset};
use crate::numerics::sigmoid;
use crate::tournament::{
    threshold, top_cycle, uncovered_set, AgentRegistry, AgentSet, ProbTournament,
};

/// Win probability along the injected cycle.
pub const DEFAULT_CYCLE_PROB: f64 = 0.9;
/// Attempts at drawing a tie-free truth before giving up.
pub const MAX_TIE_FREE_ATTEMPTS: usize = 100;

const STREAM_BASE: u64 = 1;
const STREAM_CYCLE: u64 = 2;
const STREAM_SAMPLE: u64 = 3;

/// Mixes a stream id into a seed (splitmix64 finalizer), giving independent
/// generators for independent purposes.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n: usize,
    /// Cycle strength ρ.
    pub rho: f64,
    pub cycle_size: usize,
    /// Per-match label flip probability η.
    pub eta: f64,
    /// Fraction of unobserved pairs μ.
    pub mu: f64,
    /// Matches per observed pair.
    pub m: usize,
    pub cycle_prob: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 10,
            rho: 0.0,
            cycle_size: 3,
            eta: 0.0,
            mu: 0.0,
            m: 50,
            cycle_prob: DEFAULT_CYCLE_PROB,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1], got {}", self.rho));
        }
        if self.rho > 0.0 && !(3..=self.n).contains(&self.cycle_size) {
            return bad(format!(
                "cycle_size must lie in 3..={}, got {}",
                self.n, self.cycle_size
            ));
        }
        if !(0.0..0.5).contains(&self.eta) {
            return bad(format!("eta must lie in [0, 0.5), got {}", self.eta));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return bad(format!("mu must lie in [0, 1], got {}", self.mu));
        }
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        if !(0.5..=1.0).contains(&self.cycle_prob) {
            return bad(format!(
                "cycle_prob must lie in [0.5, 1], got {}",
                self.cycle_prob
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthInstance {
    pub config: SynthConfig,
    pub lambda_true: Vec<f64>,
    pub truth_p: ProbTournament,
    pub truth_tc: AgentSet,
    pub truth_uc: AgentSet,
    pub dataset: ComparisonDataset,
    /// Seed actually used after tie-free retries.
    pub effective_seed: u64,
}

/// Strengths `λ_i ~ N(0, 1)` and `P[a][b] = σ(λ_a − λ_b)`.
pub fn gen_base(n: usize, seed: u64) -> (Vec<f64>, ProbTournament) {
    let mut rng = rng_for(seed, STREAM_BASE);
    let lambda: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let p = base_from_strengths(&lambda);
    (lambda, p)
}

pub fn base_from_strengths(lambda: &[f64]) -> ProbTournament {
    ProbTournament::from_upper(lambda.len(), |a, b| sigmoid(lambda[a] - lambda[b]))
        .expect("sigmoid outputs are complementary")
}

/// `(1 − ρ) P_base + ρ P_cycle`, where `P_cycle` puts `cycle_prob` along a
/// random directed cycle through `cycle_size` agents and copies `P_base`
/// on every other pair.
pub fn inject_cycle(
    base: &ProbTournament,
    rho: f64,
    cycle_size: usize,
    cycle_prob: f64,
    seed: u64,
) -> Result<ProbTournament> {
    let n = base.n();
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("rho must lie in [0, 1], got {rho}")));
    }
    if rho == 0.0 {
        return Ok(base.clone());
    }
    if !(3..=n).contains(&cycle_size) {
        return Err(Error::InvalidParameter(format!(
            "cycle_size must lie in 3..={n}, got {cycle_size}"
        )));
    }
    let mut rng = rng_for(seed, STREAM_CYCLE);
    let mut agents: Vec<usize> = (0..n).collect();
    agents.shuffle(&mut rng);
    let cycle = &agents[..cycle_size];
    let mut cyc = base.matrix().clone();
    for i in 0..cycle_size {
        let (a, b) = (cycle[i], cycle[(i + 1) % cycle_size]);
        cyc[(a, b)] = cycle_prob;
        cyc[(b, a)] = 1.0 - cycle_prob;
    }
    ProbTournament::from_upper(n, |a, b| (1.0 - rho) * base.get(a, b) + rho * cyc[(a, b)])
}

/// Bernoulli match data: each pair kept with probability `1 − μ`, then `m`
/// outcomes each flipped with probability `η`. Records come out shuffled.
pub fn sample_dataset(p: &ProbTournament, m: usize, eta: f64, mu: f64, seed: u64) -> ComparisonDataset {
    let n = p.n();
    let mut rng = rng_for(seed, STREAM_SAMPLE);
    let mut records = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if !rng.random_bool(1.0 - mu) {
                continue;
            }
            let pab = p.get(a, b);
            for _ in 0..m {
                let mut win = rng.random_bool(pab);
                if eta > 0.0 && rng.random_bool(eta) {
                    win = !win;
                }
                records.push(Comparison { a, b, y: win as u8 });
            }
        }
    }
    // interleave matches as a real log would; order matters to sequential raters
    records.shuffle(&mut rng);
    ComparisonDataset::from_records(AgentRegistry::numbered(n), records)
        .expect("generated records are valid")
}

pub fn gen_instance(config: &SynthConfig) -> Result<SynthInstance> {
    config.validate()?;
    for attempt in 0..MAX_TIE_FREE_ATTEMPTS {
        let seed = if attempt == 0 {
            config.seed
        } else {
            derive_seed(config.seed, 1000 + attempt as u64)
        };
        let (lambda, base) = gen_base(config.n, seed);
        let truth = inject_cycle(&base, config.rho, config.cycle_size, config.cycle_prob, seed)?;
        let hard = threshold(&truth);
        if !hard.is_tie_free() {
            continue;
        }
        let truth_tc = top_cycle(&hard)?;
        let truth_uc = uncovered_set(&hard)?;
        let dataset = sample_dataset(&truth, config.m, config.eta, config.mu, seed);
        return Ok(SynthInstance {
            config: config.clone(),
            lambda_true: lambda,
            truth_p: truth,
            truth_tc,
            truth_uc,
            dataset,
            effective_seed: seed,
        });
    }
    Err(Error::TieFreeExhausted(MAX_TIE_FREE_ATTEMPTS))
}

/// Matches per pair after which every majority edge is recovered with
/// probability at least `1 − fail_prob` (Hoeffding plus a union bound).
pub fn sample_size_for_recovery(n: usize, delta: f64, fail_prob: f64) -> Result<usize> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 0.5], got {delta}"
        )));
    }
    if !(fail_prob > 0.0 && fail_prob < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fail_prob must lie in (0, 1), got {fail_prob}"
        )));
    }
    let pairs = (n * n.saturating_sub(1) / 2) as f64;
    if pairs == 0.0 {
        return Ok(1);
    }
    let m = (2.0 * pairs / fail_prob).ln() / (2.0 * delta * delta);
    Ok((m.ceil() as usize).max(1))
}
