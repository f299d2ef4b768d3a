//! Central finite-difference checks of tape gradients.

use super::{AutodiffError, Matrix, Tape, Tensor};

pub const DEFAULT_STEP: f64 = 1e-6;

/// Denominator floor for the relative error, so entries whose true gradient
/// is near zero are judged on an absolute scale of this size.
pub const RELATIVE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// (input index, flat entry index) of the worst entry.
    pub worst: Option<(usize, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub entries_checked: usize,
}

/// Max relative discrepancy between backward gradients of `f` at `x` and
/// central differences `(f(x+h) − f(x−h)) / 2h`.
pub fn grad_check<F, E>(f: F, x: &Matrix, h: f64) -> Result<f64, E>
where
    F: Fn(&mut Tape, Tensor) -> Result<Tensor, E>,
    E: From<AutodiffError>,
{
    let report = grad_check_many(|tape, xs| f(tape, xs[0]), std::slice::from_ref(x), h)?;
    Ok(report.max_rel_error)
}

/// [`grad_check`] over several inputs at once; every entry of every input
/// is perturbed.
pub fn grad_check_many<F, E>(f: F, xs: &[Matrix], h: f64) -> Result<GradCheckReport, E>
where
    F: Fn(&mut Tape, &[Tensor]) -> Result<Tensor, E>,
    E: From<AutodiffError>,
{
    if h <= 0.0 {
        return Err(AutodiffError::Contract(format!(
            "finite-difference step must be positive, got {h}"
        ))
        .into());
    }
    let eval = |inputs: &[Matrix], with_grad: bool| -> Result<(f64, Vec<Matrix>), E> {
        let mut tape = Tape::new();
        let handles: Vec<Tensor> = inputs
            .iter()
            .map(|m| tape.leaf(m.clone(), with_grad))
            .collect();
        let out = f(&mut tape, &handles)?;
        let value = tape.value(out);
        if value.shape() != (1, 1) {
            return Err(AutodiffError::Contract(format!(
                "grad_check needs a scalar function, got {:?}",
                value.shape()
            ))
            .into());
        }
        let value = value.item();
        let grads = if with_grad {
            tape.backward(out)?;
            handles
                .iter()
                .map(|&t| {
                    tape.grad(t)
                        .cloned()
                        .unwrap_or_else(|| Matrix::zeros(tape.shape(t).0, tape.shape(t).1))
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok((value, grads))
    };

    let (_, analytic) = eval(xs, true)?;
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
        entries_checked: 0,
    };
    let mut work: Vec<Matrix> = xs.to_vec();
    for (input, grad) in analytic.iter().enumerate() {
        for k in 0..work[input].len() {
            let orig = work[input].as_slice()[k];
            work[input].as_mut_slice()[k] = orig + h;
            let (plus, _) = eval(&work, false)?;
            work[input].as_mut_slice()[k] = orig - h;
            let (minus, _) = eval(&work, false)?;
            work[input].as_mut_slice()[k] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let a = grad.as_slice()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
            report.entries_checked += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                if rel >= report.max_rel_error {
                    report.worst = Some((input, k));
                    report.analytic = a;
                    report.numeric = numeric;
                }
            }
        }
    }
    Ok(report)
}
