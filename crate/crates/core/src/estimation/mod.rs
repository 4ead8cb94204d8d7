//! Probabilistic tournaments from comparison data: empirical frequencies,
//! Bradley-Terry maximum likelihood, and the regularized end-to-end objective.

mod dataset;
mod objective;
mod train;

pub use dataset::{empirical_tournament, Comparison, ComparisonDataset};
pub use objective::{
    brier_on, btl_probability, calibration_reg, ce_loss, ce_loss_and_grad, sharpness_on,
    sharpness_reg, BtlParams, GroundTruthMembership, RegTarget, SharpnessForm, ENTROPY_EPS,
    P_FLOOR,
};
pub use train::{fit_btl, fit_btl_traced, train_ste, Fit, TrainConfig, TrainOutcome, GRADCHECK_TOL};

#[cfg(test)]
mod tests;
