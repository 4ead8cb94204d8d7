//! Smooth aggregation kernels and the matrix power sum.
//!
//! Every log-sum-exp style reduction shifts by the extreme value before
//! exponentiating, so finite inputs never overflow.

use super::Matrix;
use crate::error::{check_tau, Error, Result};

/// Logistic function, evaluated without overflow for large `|x|`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_elementwise(m: &Matrix) -> Matrix {
    m.map(sigmoid)
}

/// `Σ_{k=1..K} α^{k-1} m^k`.
pub fn matpow_sum(m: &Matrix, k: usize, alpha: f64) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "matrix power sum needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("path length K must be at least 1".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "damping alpha must lie in (0, 1], got {alpha}"
        )));
    }
    let mut power = m.clone();
    let mut total = m.clone();
    let mut weight = 1.0;
    for p in 2..=k {
        power = power.matmul(m)?;
        weight *= alpha;
        total.axpy(weight, &power)?;
        if !total.is_finite() {
            return Err(Error::Overflow { power: p });
        }
    }
    if !total.is_finite() {
        return Err(Error::Overflow { power: 1 });
    }
    Ok(total)
}

fn check_values(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Empty("smooth aggregation over an empty set"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("smooth aggregation input"));
    }
    Ok(())
}

/// `-τ log Σ exp(-z_i / τ)`, a lower bound on `min(z)` within `τ log m`.
pub fn softmin(values: &[f64], tau: f64) -> Result<f64> {
    check_tau(tau)?;
    check_values(values)?;
    Ok(softmin_unchecked(values, tau))
}

pub(crate) fn softmin_unchecked(values: &[f64], tau: f64) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let s: f64 = values.iter().map(|&z| (-(z - lo) / tau).exp()).sum();
    lo - tau * s.ln()
}

/// `τ log Σ exp(z_i / τ)`, an upper bound on `max(z)` within `τ log m`.
pub fn smax(values: &[f64], tau: f64) -> Result<f64> {
    check_tau(tau)?;
    check_values(values)?;
    Ok(smax_unchecked(values, tau))
}

pub(crate) fn smax_unchecked(values: &[f64], tau: f64) -> f64 {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = values.iter().map(|&z| ((z - hi) / tau).exp()).sum();
    hi + tau * s.ln()
}

/// Boltzmann operator `Σ z_i e^{z_i/τ} / Σ e^{z_i/τ}`.
///
/// Bounded by `[min(z), max(z)]` and tends to `max(z)` as `τ → 0`, so it acts
/// as a scalar soft-OR whose value stays inside the range of its inputs.
pub fn boltzmann_max(values: &[f64], tau: f64) -> Result<f64> {
    check_tau(tau)?;
    check_values(values)?;
    Ok(boltzmann_unchecked(values, tau))
}

pub(crate) fn boltzmann_unchecked(values: &[f64], tau: f64) -> f64 {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for &z in values {
        let w = ((z - hi) / tau).exp();
        num += z * w;
        den += w;
    }
    (num / den).clamp(
        values.iter().copied().fold(f64::INFINITY, f64::min),
        hi,
    )
}

/// Softmax weights `e^{s·z_i/τ} / Σ_j e^{s·z_j/τ}` with `s = ±1`.
pub(crate) fn softmax_weights(values: &[f64], tau: f64, sign: f64) -> Vec<f64> {
    let pivot = values
        .iter()
        .map(|&z| sign * z)
        .fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = values
        .iter()
        .map(|&z| ((sign * z - pivot) / tau).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Partial derivatives of [`boltzmann_max`] with respect to each input.
pub(crate) fn boltzmann_partials(values: &[f64], tau: f64) -> Vec<f64> {
    let p = softmax_weights(values, tau, 1.0);
    let b: f64 = values.iter().zip(&p).map(|(z, w)| z * w).sum();
    values
        .iter()
        .zip(&p)
        .map(|(&z, &w)| w * (1.0 + (z - b) / tau))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sigmoid_reference_points() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(2.0) - 0.880_797_077_977_882_3).abs() < 1e-15);
        assert!((sigmoid(-2.0) - 0.119_202_922_022_117_7).abs() < 1e-15);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        let m = sigmoid_elementwise(&Matrix::from_rows(&[[0.0, 2.0], [-2.0, 40.0]]).unwrap());
        assert!(m.as_slice().iter().all(|&x| x > 0.0 && x <= 1.0));
    }

    #[test]
    fn matpow_sum_examples() {
        let i3 = Matrix::identity(3);
        assert_eq!(matpow_sum(&i3, 3, 1.0).unwrap(), i3.scale(3.0));
        let half = Matrix::scalar(0.5);
        assert_eq!(matpow_sum(&half, 2, 1.0).unwrap()[(0, 0)], 0.75);
        let m = Matrix::from_rows(&[[0.2, 0.7], [0.4, 0.1]]).unwrap();
        assert_eq!(matpow_sum(&m, 1, 1.0).unwrap(), m);
        // damped: m + 0.5 m^2
        let m2 = m.matmul(&m).unwrap();
        let expect = m.add(&m2.scale(0.5)).unwrap();
        let got = matpow_sum(&m, 2, 0.5).unwrap();
        assert!(got.sub(&expect).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn matpow_sum_errors() {
        assert!(matches!(
            matpow_sum(&Matrix::zeros(2, 3), 2, 1.0),
            Err(Error::Shape(_))
        ));
        assert!(matpow_sum(&Matrix::identity(2), 0, 1.0).is_err());
        assert!(matpow_sum(&Matrix::identity(2), 2, 0.0).is_err());
        let big = Matrix::filled(4, 4, 1e100);
        assert!(matches!(
            matpow_sum(&big, 5, 1.0),
            Err(Error::Overflow { .. })
        ));
    }

    #[test]
    fn aggregation_examples() {
        assert_eq!(softmin(&[3.25], 0.7).unwrap(), 3.25);
        let s = softmin(&[1.9, 3.2, 4.5], 0.1).unwrap();
        assert!(s <= 1.9 && s >= 1.9 - 2.0 * 0.1 * 3f64.ln());
        assert!((softmin(&[0.0, 0.0], 1.0).unwrap() + 2f64.ln()).abs() < 1e-15);

        assert_eq!(smax(&[-4.0], 0.3).unwrap(), -4.0);
        assert!((smax(&[0.0; 4], 0.5).unwrap() - 0.5 * 4f64.ln()).abs() < 1e-15);
        assert!((smax(&[1.0, -10.0], 0.01).unwrap() - 1.0).abs() < 1e-12);

        assert_eq!(boltzmann_max(&[0.0; 3], 0.2).unwrap(), 0.0);
        assert!((boltzmann_max(&[1.0, 0.0, 0.0], 1e-4).unwrap() - 1.0).abs() < 1e-12);
        // direct formula: (0.3 e^3 + 0.7 e^7) / (e^3 + e^7)
        let expect = (0.3 * 3f64.exp() + 0.7 * 7f64.exp()) / (3f64.exp() + 7f64.exp());
        let got = boltzmann_max(&[0.3, 0.7], 0.1).unwrap();
        assert!((got - expect).abs() < 1e-14);
        assert!((got - 0.6929).abs() < 1e-4);
    }

    #[test]
    fn aggregation_errors() {
        assert!(matches!(softmin(&[], 1.0), Err(Error::Empty(_))));
        assert!(matches!(smax(&[], 1.0), Err(Error::Empty(_))));
        assert!(matches!(boltzmann_max(&[], 1.0), Err(Error::Empty(_))));
        assert!(matches!(
            softmin(&[1.0], 0.0),
            Err(Error::InvalidTemperature(_))
        ));
        assert!(smax(&[f64::NAN], 1.0).is_err());
    }

    #[test]
    fn softmin_weights_concentrate_on_minimizer() {
        let w = softmax_weights(&[2.0, 0.5, 3.0], 1e-3, -1.0);
        assert!((w[1] - 1.0).abs() < 1e-12);
    }

    fn values() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1e6..1e6f64, 1..12)
    }

    proptest! {
        #[test]
        fn softmin_bounds(z in values(), tau in 1e-3..10.0f64) {
            let m = z.len() as f64;
            let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
            let s = softmin(&z, tau).unwrap();
            prop_assert!(s.is_finite());
            prop_assert!(s <= lo + 1e-9 * lo.abs().max(1.0));
            prop_assert!(s >= lo - tau * m.ln() - 1e-9 * lo.abs().max(1.0));
        }

        #[test]
        fn smax_bounds(z in values(), tau in 1e-3..10.0f64) {
            let m = z.len() as f64;
            let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s = smax(&z, tau).unwrap();
            prop_assert!(s.is_finite());
            prop_assert!(s >= hi - 1e-9 * hi.abs().max(1.0));
            prop_assert!(s <= hi + tau * m.ln() + 1e-9 * hi.abs().max(1.0));
        }

        #[test]
        fn boltzmann_within_range(z in values(), tau in 1e-3..10.0f64) {
            let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let b = boltzmann_max(&z, tau).unwrap();
            prop_assert!(b.is_finite());
            prop_assert!(b >= lo && b <= hi);
        }
    }
}
