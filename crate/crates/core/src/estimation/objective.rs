use serde::{Deserialize, Serialize};

use super::ComparisonDataset;
use crate::error::{Error, Result};
use crate::numerics::{sigmoid, Matrix, Tape, Var};
use crate::tournament::{threshold, top_cycle, uncovered_set, HardTournament, ProbTournament};

/// Probabilities are clamped to `[P_FLOOR, 1 − P_FLOOR]` inside the log loss.
pub const P_FLOOR: f64 = 1e-12;
/// Guard inside the entropy logarithms.
pub const ENTROPY_EPS: f64 = 1e-9;

/// Per-agent Bradley-Terry strengths, gauge-fixed to mean zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtlParams {
    pub(crate) lambda: Vec<f64>,
}

impl BtlParams {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("BTL strengths"));
        }
        let mut p = BtlParams { lambda };
        p.gauge_fix();
        Ok(p)
    }

    pub fn zeros(n: usize) -> Self {
        BtlParams {
            lambda: vec![0.0; n],
        }
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub(crate) fn gauge_fix(&mut self) {
        if self.lambda.is_empty() {
            return;
        }
        let mean = self.lambda.iter().sum::<f64>() / self.lambda.len() as f64;
        for v in &mut self.lambda {
            *v -= mean;
        }
    }

    /// Full pairwise probability matrix `σ(λ_a − λ_b)`.
    pub fn tournament(&self) -> ProbTournament {
        ProbTournament::from_upper(self.n(), |a, b| btl_probability(self, a, b))
            .expect("sigmoid outputs are complementary by construction")
    }
}

pub fn btl_probability(params: &BtlParams, a: usize, b: usize) -> f64 {
    sigmoid(params.lambda[a] - params.lambda[b])
}

fn clamped_win_prob(diff: f64) -> (f64, bool) {
    let p = sigmoid(diff);
    if p < P_FLOOR {
        (P_FLOOR, true)
    } else if p > 1.0 - P_FLOOR {
        (1.0 - P_FLOOR, true)
    } else {
        (p, false)
    }
}

/// Mean binary cross-entropy over records. Records are aggregated by
/// (winner, loser) pair, so the cost is O(n²) regardless of dataset size.
pub fn ce_loss(params: &BtlParams, data: &ComparisonDataset) -> f64 {
    ce_loss_and_grad(params, data).0
}

/// Loss and its gradient with respect to each λ. Clamped probabilities
/// contribute zero gradient, matching the clamped loss exactly.
pub fn ce_loss_and_grad(params: &BtlParams, data: &ComparisonDataset) -> (f64, Vec<f64>) {
    let n = data.n();
    let mut grad = vec![0.0; n];
    if data.is_empty() {
        return (0.0, grad);
    }
    let total = data.len() as f64;
    let lam = params.lambda();
    let mut loss = 0.0;
    for w in 0..n {
        for l in 0..n {
            let count = data.wins(w, l);
            if count == 0 {
                continue;
            }
            let c = count as f64;
            let (p, clamped) = clamped_win_prob(lam[w] - lam[l]);
            loss -= c * p.ln();
            if !clamped {
                let slope = c * (1.0 - p);
                grad[w] -= slope;
                grad[l] += slope;
            }
        }
    }
    for g in &mut grad {
        *g /= total;
    }
    (loss / total, grad)
}

/// Which sharpness penalty to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SharpnessForm {
    /// Mean binary entropy.
    #[default]
    Entropy,
    /// `−mean |s − 1/2|`.
    AbsDeviation,
}

/// Which membership scores the regularizers act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegTarget {
    #[default]
    Uncovered,
    /// Top-Cycle scores, squashed through σ into (0, 1) first.
    TopCycle,
}

pub fn sharpness_reg(scores: &[f64], form: SharpnessForm) -> Result<f64> {
    if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::InvalidParameter(format!(
            "sharpness needs scores in [0, 1], got {bad}"
        )));
    }
    let mut tape = Tape::new();
    let s = tape.input(Matrix::column(scores.to_vec()));
    let r = sharpness_on(&mut tape, s, form);
    Ok(tape.value(r)[(0, 0)])
}

/// Tape version of [`sharpness_reg`].
pub fn sharpness_on(tape: &mut Tape, scores: Var, form: SharpnessForm) -> Var {
    match form {
        SharpnessForm::Entropy => {
            let h = tape.binary_entropy(scores, ENTROPY_EPS);
            tape.mean(h)
        }
        SharpnessForm::AbsDeviation => {
            let d = tape.abs_dev(scores, 0.5);
            let m = tape.mean(d);
            tape.scale(m, -1.0)
        }
    }
}

/// Mean squared error between scores and 0/1 truth; the differentiable
/// stand-in for ECE during training.
pub fn brier_on(tape: &mut Tape, scores: Var, truth: &[bool]) -> Result<Var> {
    let target = tape.input(Matrix::column(
        truth.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect(),
    ));
    let diff = tape.sub(scores, target)?;
    let sq = tape.mul(diff, diff)?;
    Ok(tape.mean(sq))
}

/// Expected calibration error over `bins` equal-width bins on [0, 1].
pub fn calibration_reg(scores: &[f64], truth: &[bool], bins: usize) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            got: scores.len(),
        });
    }
    if bins == 0 {
        return Err(Error::InvalidParameter("ECE needs at least one bin".into()));
    }
    if scores.is_empty() {
        return Ok(0.0);
    }
    if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::InvalidParameter(format!(
            "calibration needs scores in [0, 1], got {bad}"
        )));
    }
    let mut count = vec![0usize; bins];
    let mut conf = vec![0.0; bins];
    let mut hits = vec![0.0; bins];
    for (&s, &t) in scores.iter().zip(truth) {
        let m = ((s * bins as f64) as usize).min(bins - 1);
        count[m] += 1;
        conf[m] += s;
        if t {
            hits[m] += 1.0;
        }
    }
    let n = scores.len() as f64;
    let mut ece = 0.0;
    for m in 0..bins {
        if count[m] > 0 {
            let c = count[m] as f64;
            ece += (c / n) * (hits[m] / c - conf[m] / c).abs();
        }
    }
    Ok(ece)
}

/// Known core membership per agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthMembership {
    tc: Vec<bool>,
    uc: Vec<bool>,
}

impl GroundTruthMembership {
    pub fn new(tc: Vec<bool>, uc: Vec<bool>) -> Result<Self> {
        if tc.len() != uc.len() {
            return Err(Error::LengthMismatch {
                expected: tc.len(),
                got: uc.len(),
            });
        }
        if let Some(a) = (0..tc.len()).find(|&a| uc[a] && !tc[a]) {
            return Err(Error::InvalidParameter(format!(
                "agent {a} is in the uncovered set but not the top cycle"
            )));
        }
        Ok(GroundTruthMembership { tc, uc })
    }

    /// Exact memberships of a tie-free tournament.
    pub fn from_hard(t: &HardTournament) -> Result<Self> {
        let n = t.n();
        let tc = top_cycle(t)?;
        let uc = uncovered_set(t)?;
        Self::new(
            (0..n).map(|a| tc.contains(&a)).collect(),
            (0..n).map(|a| uc.contains(&a)).collect(),
        )
    }

    pub fn from_prob(p: &ProbTournament) -> Result<Self> {
        Self::from_hard(&threshold(p))
    }

    pub fn n(&self) -> usize {
        self.tc.len()
    }

    pub fn top_cycle(&self) -> &[bool] {
        &self.tc
    }

    pub fn uncovered(&self) -> &[bool] {
        &self.uc
    }

    pub fn target(&self, which: RegTarget) -> &[bool] {
        match which {
            RegTarget::Uncovered => &self.uc,
            RegTarget::TopCycle => &self.tc,
        }
    }
}
