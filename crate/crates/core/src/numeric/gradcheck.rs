use crate::error::{Error, Result};
use crate::numeric::DenseMatrix;

/// Absolute floor applied to the denominator of the relative error.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-8;

/// Central-difference gradient of `loss_fn` at `params`.
pub fn numerical_gradient<F>(mut loss_fn: F, params: &DenseMatrix, delta: f64) -> DenseMatrix
where
    F: FnMut(&DenseMatrix) -> f64,
{
    let mut probe = params.clone();
    let mut grad = DenseMatrix::zeros(params.rows(), params.cols());
    for k in 0..params.as_slice().len() {
        let orig = probe.as_slice()[k];
        probe.as_mut_slice()[k] = orig + delta;
        let plus = loss_fn(&probe);
        probe.as_mut_slice()[k] = orig - delta;
        let minus = loss_fn(&probe);
        probe.as_mut_slice()[k] = orig;
        grad.as_mut_slice()[k] = (plus - minus) / (2.0 * delta);
    }
    grad
}

/// Largest entrywise `|analytic - numeric| / max(|numeric|, 1e-8)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / n.abs().max(RELATIVE_ERROR_FLOOR))
        .fold(0.0, f64::max)
}

/// Compares `analytic_grad` against central differences of `loss_fn`.
///
/// Returns the maximum relative error. The loss is evaluated twice at the
/// unperturbed point first; any mismatch means the closure is not
/// deterministic and the comparison would be meaningless.
pub fn finite_diff_check<F>(
    mut loss_fn: F,
    params: &DenseMatrix,
    analytic_grad: &DenseMatrix,
    delta: f64,
) -> Result<f64>
where
    F: FnMut(&DenseMatrix) -> f64,
{
    if !(delta > 0.0) {
        return Err(Error::Oracle(format!("delta must be positive, got {delta}")));
    }
    if params.shape() != analytic_grad.shape() {
        return Err(Error::Shape(format!(
            "params {:?} vs gradient {:?}",
            params.shape(),
            analytic_grad.shape()
        )));
    }
    let first = loss_fn(params);
    let second = loss_fn(params);
    if first.to_bits() != second.to_bits() {
        return Err(Error::Oracle(format!(
            "loss is not deterministic: {first} then {second}"
        )));
    }
    let numeric = numerical_gradient(&mut loss_fn, params, delta);
    Ok(max_relative_error(analytic_grad.as_slice(), numeric.as_slice()))
}
