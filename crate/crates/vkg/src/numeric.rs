//! Finite-difference gradient checking shared by the embedding trainer and
//! the relation classifier.

/// Central differences `(f(p+h) - f(p-h)) / 2h` for every parameter.
pub fn central_difference_gradient(
    loss: impl Fn(&[f64]) -> f64,
    params: &[f64],
    step: f64,
) -> Vec<f64> {
    let mut work = params.to_vec();
    let mut grad = vec![0.0; params.len()];
    for i in 0..params.len() {
        let original = work[i];
        work[i] = original + step;
        let plus = loss(&work);
        work[i] = original - step;
        let minus = loss(&work);
        work[i] = original;
        grad[i] = (plus - minus) / (2.0 * step);
    }
    grad
}

/// Largest relative disagreement between two gradients. Components where
/// both sides are below `1e-6` in magnitude count as exact agreement, which
/// keeps finite-difference rounding noise out of the comparison.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| {
            if a.abs() < 1e-6 && n.abs() < 1e-6 {
                0.0
            } else {
                (a - n).abs() / a.abs().max(n.abs())
            }
        })
        .fold(0.0, f64::max)
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic function.
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_matches() {
        // f(x) = sum x_i^2, grad = 2x
        let params = [0.3, -1.2, 2.5];
        let numeric =
            central_difference_gradient(|p| p.iter().map(|x| x * x).sum(), &params, 1e-4);
        let analytic: Vec<f64> = params.iter().map(|x| 2.0 * x).collect();
        assert!(max_relative_error(&analytic, &numeric) < 1e-8);
    }

    #[test]
    fn softplus_is_stable_at_extremes() {
        assert!((softplus(-800.0)).abs() < 1e-300);
        assert!((softplus(800.0) - 800.0).abs() < 1e-9);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-12);
    }
}
