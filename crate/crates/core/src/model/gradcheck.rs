use super::network::{Batch, Model, Pass};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Flat index of the worst parameter.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// `|a − n| / max(|a|, |n|, 1e−8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares `analytic` with the fourth-order central difference
/// `(8 (f(x+h) − f(x−h)) − (f(x+2h) − f(x−2h))) / 12h` of `loss` around
/// `theta`. Its truncation error is O(h⁴), so a step near 1e−3 keeps both
/// truncation and cancellation error far below the gradients being checked.
pub fn gradient_check_fn<F>(theta: &[f64], analytic: &[f64], h: f64, mut loss: F) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("finite-difference step h = {h} must be positive")));
    }
    if theta.len() != analytic.len() {
        return Err(Error::Shape(format!(
            "{} parameters but {} gradient entries",
            theta.len(),
            analytic.len()
        )));
    }
    let mut probe = theta.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: theta.len(),
    };
    for i in 0..theta.len() {
        let mut at = |offset: f64| {
            probe[i] = theta[i] + offset;
            loss(&probe)
        };
        let near = at(h)? - at(-h)?;
        let far = at(2.0 * h)? - at(-2.0 * h)?;
        probe[i] = theta[i];
        let numeric = (8.0 * near - far) / (12.0 * h);
        let err = relative_error(analytic[i], numeric);
        if err > report.max_rel_error || i == 0 {
            report = GradCheckReport {
                max_rel_error: err,
                worst_index: i,
                analytic: analytic[i],
                numeric,
                checked: theta.len(),
            };
        }
    }
    Ok(report)
}

/// Checks every parameter of `model` on `batch`. Dropout masks are fixed by
/// `pass.dropout_seed`, so the same masks apply to every probe.
pub fn gradient_check(model: &Model, batch: &Batch, pass: Pass<'_>, h: f64) -> Result<GradCheckReport> {
    let mut grad = model.params.zeros_like();
    model.loss_and_grad(batch, pass, &mut grad)?;
    let theta = model.params.flatten();
    let mut probe = model.clone();
    gradient_check_fn(&theta, &grad.flatten(), h, |values| {
        let mut offset = 0;
        for t in probe.params.tensors_mut() {
            t.copy_from_slice(&values[offset..offset + t.len()]);
            offset += t.len();
        }
        probe.loss(batch, pass)
    })
}
