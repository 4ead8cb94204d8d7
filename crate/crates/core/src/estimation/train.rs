use serde::{Deserialize, Serialize};

use super::objective::{brier_on, ce_loss_and_grad, sharpness_on};
use super::{BtlParams, ComparisonDataset, GroundTruthMembership, RegTarget, SharpnessForm};
use crate::error::{check_tau, Error, Result};
use crate::numerics::gradcheck::{finite_difference_gradient, relative_error, FD_STEP};
use crate::numerics::{Matrix, Tape};
use crate::soft::{anneal, graph, ste_scores, AnnealSchedule, CoreScores, SoftConfig};

/// Runtime gradient checks fail above this relative error.
pub const GRADCHECK_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub lambda_s: f64,
    pub lambda_c: f64,
    pub anneal: AnnealSchedule,
    pub soft: SoftConfig,
    /// Regularizers are added on epochs divisible by this.
    pub reg_every: usize,
    pub reg_target: RegTarget,
    pub sharpness: SharpnessForm,
    /// Stop once the objective's gradient norm drops below this.
    pub grad_tol: f64,
    /// Step halvings allowed per epoch before giving up on the step.
    pub max_halvings: usize,
    /// Compare tape gradients with finite differences on every regularized epoch.
    pub gradcheck: bool,
    /// Recorded for provenance; full-batch descent from zero is deterministic.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            learning_rate: 1.0,
            lambda_s: 0.1,
            lambda_c: 0.0,
            anneal: AnnealSchedule {
                tau_max: 1.0,
                tau_min: 0.01,
                steps: 500,
            },
            soft: SoftConfig::default(),
            reg_every: 1,
            reg_target: RegTarget::Uncovered,
            sharpness: SharpnessForm::Entropy,
            grad_tol: 1e-8,
            max_halvings: 30,
            gradcheck: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Plain maximum likelihood: both regularizer weights zero.
    pub fn unregularized(&self) -> TrainConfig {
        TrainConfig {
            lambda_s: 0.0,
            lambda_c: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, w) in [("lambda_s", self.lambda_s), ("lambda_c", self.lambda_c)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be non-negative, got {w}"
                )));
            }
        }
        if self.reg_every == 0 {
            return Err(Error::InvalidParameter("reg_every must be at least 1".into()));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.grad_tol >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grad_tol must be non-negative, got {}",
                self.grad_tol
            )));
        }
        self.anneal.validate()?;
        self.soft.validate()?;
        Ok(())
    }

    fn regularized(&self) -> bool {
        self.lambda_s > 0.0 || self.lambda_c > 0.0
    }

    /// Temperature for epoch `e`, spreading the schedule over all epochs.
    pub fn tau_at(&self, epoch: usize) -> Result<f64> {
        let steps = self.anneal.steps;
        let step = if self.epochs <= 1 {
            steps
        } else {
            (epoch * steps / (self.epochs - 1)).min(steps)
        };
        anneal(&self.anneal, step)
    }
}

/// Output of the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub params: BtlParams,
    /// Objective after each epoch's step.
    pub loss_trace: Vec<f64>,
    /// True when the gradient-norm stop fired before the epoch budget ran out.
    pub stopped_early: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: BtlParams,
    /// Scores of the fitted tournament at the final temperature.
    pub scores: CoreScores,
    pub loss_trace: Vec<f64>,
    pub stopped_early: bool,
}

struct Objective<'a> {
    data: &'a ComparisonDataset,
    cfg: &'a TrainConfig,
    truth: Option<&'a GroundTruthMembership>,
}

impl Objective<'_> {
    fn eval(&self, lambda: &BtlParams, soft: Option<&SoftConfig>) -> Result<(f64, Vec<f64>)> {
        let (mut loss, mut grad) = ce_loss_and_grad(lambda, self.data);
        if let Some(soft) = soft {
            let (r, rg) = self.regularizer(lambda, soft)?;
            loss += r;
            for (g, x) in grad.iter_mut().zip(rg) {
                *g += x;
            }
        }
        Ok((loss, grad))
    }

    fn regularizer(&self, lambda: &BtlParams, soft: &SoftConfig) -> Result<(f64, Vec<f64>)> {
        let mut tape = Tape::new();
        let lam = tape.input(Matrix::column(lambda.lambda().to_vec()));
        let diff = tape.pairwise_diff(lam)?;
        let p = tape.sigmoid(diff);
        let vars = graph::ste(&mut tape, p, soft)?;
        let scores = match self.cfg.reg_target {
            RegTarget::Uncovered => vars.uncovered,
            RegTarget::TopCycle => tape.sigmoid(vars.top_cycle),
        };
        let mut total = None;
        if self.cfg.lambda_s > 0.0 {
            let s = sharpness_on(&mut tape, scores, self.cfg.sharpness);
            total = Some(tape.scale(s, self.cfg.lambda_s));
        }
        if self.cfg.lambda_c > 0.0 {
            let truth = self.truth.ok_or(Error::MissingTruth)?;
            let b = brier_on(&mut tape, scores, truth.target(self.cfg.reg_target))?;
            let term = tape.scale(b, self.cfg.lambda_c);
            total = Some(match total {
                Some(t) => tape.add(t, term)?,
                None => term,
            });
        }
        let total = total.expect("regularizer evaluated with zero weights");
        let value = tape.value(total)[(0, 0)];
        let grads = tape.grad(total)?;
        Ok((value, grads.wrt(lam).as_slice().to_vec()))
    }

    fn check_gradient(&self, lambda: &BtlParams, soft: &SoftConfig, analytic: &[f64]) -> Result<()> {
        let x = Matrix::column(lambda.lambda().to_vec());
        let numeric = finite_difference_gradient(
            |m| {
                let p = BtlParams::new(m.as_slice().to_vec());
                match p.and_then(|p| self.eval(&p, Some(soft))) {
                    Ok((v, _)) => v,
                    Err(_) => f64::NAN,
                }
            },
            &x,
            FD_STEP,
        );
        let err = relative_error(&Matrix::column(analytic.to_vec()), &numeric);
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(err < GRADCHECK_TOL) {
            return Err(Error::GradientCheck(err));
        }
        Ok(())
    }
}

fn run(data: &ComparisonDataset, cfg: &TrainConfig, truth: Option<&GroundTruthMembership>) -> Result<Fit> {
    cfg.validate()?;
    data.require_connected()?;
    if cfg.lambda_c > 0.0 {
        let t = truth.ok_or(Error::MissingTruth)?;
        if t.n() != data.n() {
            return Err(Error::LengthMismatch {
                expected: data.n(),
                got: t.n(),
            });
        }
    }
    let obj = Objective { data, cfg, truth };
    let mut params = BtlParams::zeros(data.n());
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut stopped_early = false;
    for epoch in 0..cfg.epochs {
        let soft = if cfg.regularized() && epoch % cfg.reg_every == 0 {
            let tau = cfg.tau_at(epoch)?;
            check_tau(tau)?;
            Some(SoftConfig {
                tau,
                ..cfg.soft.clone()
            })
        } else {
            None
        };
        let (l0, grad) = obj.eval(&params, soft.as_ref())?;
        if !l0.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("training objective"));
        }
        if cfg.gradcheck {
            if let Some(s) = &soft {
                obj.check_gradient(&params, s, &grad)?;
            }
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm < cfg.grad_tol {
            trace.push(l0);
            stopped_early = epoch + 1 < cfg.epochs;
            break;
        }
        // decrease-or-halve: shrink the step until the objective does not rise
        let mut step = cfg.learning_rate;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let mut cand = params.clone();
            for (v, g) in cand.lambda.iter_mut().zip(&grad) {
                *v -= step * g;
            }
            cand.gauge_fix();
            let (l1, _) = obj.eval(&cand, soft.as_ref())?;
            if l1.is_finite() && l1 <= l0 {
                accepted = Some((cand, l1));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((cand, l1)) => {
                params = cand;
                trace.push(l1);
            }
            None => trace.push(l0),
        }
    }
    Ok(Fit {
        params,
        loss_trace: trace,
        stopped_early,
    })
}

/// Maximum-likelihood BTL strengths by full-batch gradient descent.
pub fn fit_btl(data: &ComparisonDataset, config: &TrainConfig) -> Result<BtlParams> {
    Ok(fit_btl_traced(data, config)?.params)
}

pub fn fit_btl_traced(data: &ComparisonDataset, config: &TrainConfig) -> Result<Fit> {
    run(data, &config.unregularized(), None)
}

/// End-to-end training of the cross-entropy plus sharpness and calibration
/// objective, with the temperature annealed across epochs.
pub fn train_ste(
    data: &ComparisonDataset,
    config: &TrainConfig,
    truth: Option<&GroundTruthMembership>,
) -> Result<TrainOutcome> {
    let fit = run(data, config, truth)?;
    let final_soft = SoftConfig {
        tau: config.anneal.tau_min,
        ..config.soft.clone()
    };
    let scores = ste_scores(&fit.params.tournament(), &final_soft)?;
    Ok(TrainOutcome {
        params: fit.params,
        scores,
        loss_trace: fit.loss_trace,
        stopped_early: fit.stopped_early,
    })
}
