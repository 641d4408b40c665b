use crate::error::{Error, Result};

/// Denominator floor so near-zero gradients are compared absolutely.
const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Index of the worst element.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Compares the analytic gradient returned by `f` at `x` with central finite
/// differences. The relative error of element `k` is
/// `|analytic_k - numeric_k| / max(|numeric_k|, 1e-6)`.
pub fn grad_check<F>(mut f: F, x: &[f64], eps: f64) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step {eps} outside [1e-7, 1e-3]"
        )));
    }
    let (first, analytic) = f(x);
    let (second, _) = f(x);
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }
    if analytic.len() != x.len() {
        return Err(Error::Shape(format!(
            "{} gradient entries for {} parameters",
            analytic.len(),
            x.len()
        )));
    }
    let mut probe = x.to_vec();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    for k in 0..x.len() {
        probe[k] = x[k] + eps;
        let (plus, _) = f(&probe);
        probe[k] = x[k] - eps;
        let (minus, _) = f(&probe);
        probe[k] = x[k];
        let numeric = (plus - minus) / (2.0 * eps);
        let rel = (analytic[k] - numeric).abs() / numeric.abs().max(RELATIVE_FLOOR);
        if rel > report.max_relative_error || k == 0 {
            report = GradCheckReport {
                max_relative_error: rel.max(report.max_relative_error),
                worst_index: k,
                analytic: analytic[k],
                numeric,
            };
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    fn quadratic(x: &[f64]) -> (f64, Vec<f64>) {
        let loss = x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * v * v).sum();
        let grad = x.iter().enumerate().map(|(i, v)| 2.0 * (i as f64 + 1.0) * v).collect();
        (loss, grad)
    }

    #[test]
    fn exact_quadratic_gradient_is_accepted() {
        let r = grad_check(quadratic, &[0.3, -1.2, 2.5], 1e-5).unwrap();
        assert!(r.max_relative_error <= 1e-8, "{r:?}");
    }

    #[test]
    fn doubled_gradient_is_reported() {
        let r = grad_check(
            |x| {
                let (l, g) = quadratic(x);
                (l, g.into_iter().map(|v| 2.0 * v).collect())
            },
            &[0.3, -1.2, 2.5],
            1e-5,
        )
        .unwrap();
        assert!((r.max_relative_error - 1.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn nondeterministic_function_is_rejected() {
        let calls = Cell::new(0.0);
        let err = grad_check(
            |x| {
                calls.set(calls.get() + 1.0);
                (x[0] + calls.get(), vec![1.0])
            },
            &[0.0],
            1e-5,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonDeterministic { .. }));
    }

    #[test]
    fn step_outside_range_is_rejected() {
        assert!(grad_check(quadratic, &[1.0], 1e-2).is_err());
        assert!(grad_check(quadratic, &[1.0], 1e-9).is_err());
    }
}
