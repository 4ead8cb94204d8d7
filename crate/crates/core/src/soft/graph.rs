//! Tape builders for the soft operators.
//!
//! These are the only implementation of the soft pipeline; the plain
//! functions in the parent module evaluate them on a throwaway tape.

use super::{SoftConfig, UcVariant};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Reduce, Tape, Var};

/// Nodes produced by [`ste`].
#[derive(Debug, Clone, Copy)]
pub struct SteVars {
    pub edges: Var,
    pub reach: Var,
    pub top_cycle: Var,
    pub cover: Var,
    pub uncovered: Var,
}

/// `D = σ((P − 1/2)/τ)` with the diagonal pinned at 1/2.
pub fn edges(tape: &mut Tape, p: Var, tau: f64) -> Result<Var> {
    let z = tape.affine(p, 1.0 / tau, -0.5 / tau);
    let d = tape.sigmoid(z);
    tape.set_diag(d, 0.5)
}

/// `Σ_{k=1..K} α^{k-1} D^k`.
pub fn reach(tape: &mut Tape, d: Var, k: usize, alpha: f64) -> Result<Var> {
    if k == 0 {
        return Err(Error::InvalidParameter("path length K must be at least 1".into()));
    }
    let mut power = d;
    let mut total = d;
    let mut weight = 1.0;
    for p in 2..=k {
        power = tape.matmul(power, d)?;
        weight *= alpha;
        let term = tape.scale(power, weight);
        total = tape.add(total, term)?;
        if !tape.value(total).is_finite() {
            return Err(Error::Overflow { power: p });
        }
    }
    Ok(total)
}

/// Row-wise softmin over `b ≠ a`, as a column. A lone agent scores 0.
pub fn top_cycle(tape: &mut Tape, r: Var, tau_s: f64) -> Var {
    tape.row_reduce(r, Reduce::Softmin, tau_s, true)
}

/// `cover[c][a] = D[c][a] · (1 − max(0, boltz_b(D[a][b] − D[c][b])))`, zero diagonal.
pub fn cover(tape: &mut Tape, d: Var, tau_c: f64) -> Result<Var> {
    let witness = tape.cover_witness(d, tau_c)?;
    let clipped = tape.clamp_min(witness, 0.0);
    let free = tape.one_minus(clipped);
    let c = tape.mul(d, free)?;
    tape.set_diag(c, 0.0)
}

/// Uncovered-Set scores from the cover matrix, as a column.
pub fn uncovered(tape: &mut Tape, cover: Var, cfg: &SoftConfig) -> Result<Var> {
    let n = tape.value(cover).rows();
    if n == 1 {
        return Ok(tape.input(Matrix::scalar(1.0)));
    }
    // row a of the transpose lists cover[c][a] over coverers c
    let by_target = tape.transpose(cover);
    let tau_c = cfg.cover_tau();
    Ok(match cfg.uc_variant {
        UcVariant::Boltzmann => {
            let agg = tape.row_reduce(by_target, Reduce::Boltzmann, tau_c, true);
            tape.one_minus(agg)
        }
        UcVariant::SquashedSmax => {
            let agg = tape.row_reduce(by_target, Reduce::Smax, tau_c, true);
            let scaled = tape.scale(agg, cfg.beta);
            let squashed = tape.sigmoid(scaled);
            tape.one_minus(squashed)
        }
    })
}

/// Full pipeline from a probability matrix node.
pub fn ste(tape: &mut Tape, p: Var, cfg: &SoftConfig) -> Result<SteVars> {
    cfg.validate()?;
    let n = tape.value(p).rows();
    if n == 0 {
        return Err(Error::Empty("soft scores need at least one agent"));
    }
    let d = edges(tape, p, cfg.tau)?;
    let r = reach(tape, d, cfg.path_len(n), cfg.alpha)?;
    let t = top_cycle(tape, r, cfg.softmin_tau());
    let c = cover(tape, d, cfg.cover_tau())?;
    let u = uncovered(tape, c, cfg)?;
    Ok(SteVars {
        edges: d,
        reach: r,
        top_cycle: t,
        cover: c,
        uncovered: u,
    })
}
