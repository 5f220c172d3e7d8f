//! Finite-difference gradient checking.
//!
//! The checker is the independent oracle for every gradient the tape
//! produces: it only evaluates the loss function, never the tape.

use crate::error::{Error, Result};

/// Compare analytic gradients against central finite differences.
///
/// `f` evaluates the scalar loss at a flat parameter vector; `theta` is
/// the evaluation point and `analytic` the gradient under test. Returns
/// the maximum over parameters of
/// `|analytic - central| / max(1e-8, |central|)`.
pub fn finite_difference_check<F>(
    f: F,
    theta: &[f64],
    analytic: &[f64],
    step: f64,
) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if step <= 0.0 {
        return Err(Error::Config(format!("step must be positive, got {step}")));
    }
    if theta.len() != analytic.len() {
        return Err(Error::Config(format!(
            "parameter/gradient length mismatch: {} vs {}",
            theta.len(),
            analytic.len()
        )));
    }

    let mut probe = theta.to_vec();
    let mut worst = 0.0f64;
    for i in 0..theta.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let plus = f(&probe)?;
        probe[i] = orig - step;
        let minus = f(&probe)?;
        probe[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite loss while probing parameter {i}"
            )));
        }
        let central = (plus - minus) / (2.0 * step);
        let rel = (analytic[i] - central).abs() / central.abs().max(1e-8);
        if rel > worst {
            worst = rel;
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact_up_to_roundoff() {
        // f(theta) = sum theta_i^2; central differences are exact for
        // quadratics.
        let theta = vec![1.5, -2.0, 0.25];
        let analytic: Vec<f64> = theta.iter().map(|t| 2.0 * t).collect();
        let err = finite_difference_check(
            |p| Ok(p.iter().map(|x| x * x).sum()),
            &theta,
            &analytic,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-8, "err = {err}");
    }

    #[test]
    fn independent_parameter_is_zero_both_sides() {
        // f depends only on theta[0]; both analytic and numeric partials
        // for theta[1] are zero, giving zero relative error there.
        let theta = vec![2.0, 7.0];
        let analytic = vec![4.0, 0.0];
        let err =
            finite_difference_check(|p| Ok(p[0] * p[0]), &theta, &analytic, 1e-5).unwrap();
        assert!(err < 1e-8, "err = {err}");
    }

    #[test]
    fn detects_wrong_gradient() {
        let theta = vec![1.0];
        let analytic = vec![3.0]; // true gradient is 2.0
        let err =
            finite_difference_check(|p| Ok(p[0] * p[0]), &theta, &analytic, 1e-5).unwrap();
        assert!(err > 0.1);
    }

    #[test]
    fn rejects_nonpositive_step() {
        assert!(finite_difference_check(|_| Ok(0.0), &[1.0], &[0.0], 0.0).is_err());
    }

    #[test]
    fn reports_nonfinite_loss() {
        let res = finite_difference_check(|_| Ok(f64::NAN), &[1.0], &[0.0], 1e-5);
        assert!(matches!(res, Err(Error::Numerical(_))));
    }
}
