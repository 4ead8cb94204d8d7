//! Central finite-difference gradients, used both by tests and by the
//! training loop's optional runtime gradient health check.

use super::Matrix;

/// Default step for central differences.
pub const FD_STEP: f64 = 1e-6;

pub fn finite_difference_gradient(f: impl Fn(&Matrix) -> f64, x: &Matrix, h: f64) -> Matrix {
    let mut probe = x.clone();
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    for k in 0..x.len() {
        let orig = probe.as_slice()[k];
        probe.as_mut_slice()[k] = orig + h;
        let up = f(&probe);
        probe.as_mut_slice()[k] = orig - h;
        let down = f(&probe);
        probe.as_mut_slice()[k] = orig;
        grad.as_mut_slice()[k] = (up - down) / (2.0 * h);
    }
    grad
}

/// Directional derivative of `f` at `x` along `dir` by central differences.
pub fn directional_derivative(f: impl Fn(&Matrix) -> f64, x: &Matrix, dir: &Matrix, h: f64) -> f64 {
    let mut up = x.clone();
    let mut down = x.clone();
    for ((u, d), &v) in up
        .as_mut_slice()
        .iter_mut()
        .zip(down.as_mut_slice().iter_mut())
        .zip(dir.as_slice())
    {
        *u += h * v;
        *d -= h * v;
    }
    (f(&up) - f(&down)) / (2.0 * h)
}

/// `max |a - b| / max(max |b|, 1e-6)`: entrywise error scaled by the size of
/// the reference gradient, so vanishing entries do not dominate.
pub fn relative_error(analytic: &Matrix, numeric: &Matrix) -> f64 {
    let diff = analytic
        .as_slice()
        .iter()
        .zip(numeric.as_slice())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    diff / numeric.max_abs().max(1e-6)
}
