//! Covariate-dependent class membership via reference-category
//! multinomial logits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub lambda: Vec<f64>,
    pub pi: Vec<f64>,
}

/// Linear predictor `(1, x)' c`.
#[inline]
pub(crate) fn linear(x: &[f64], coef: &[f64]) -> f64 {
    coef[0] + x.iter().zip(&coef[1..]).map(|(a, b)| a * b).sum::<f64>()
}

/// Log class probabilities into `out` (length `coefs.len() + 1`).
/// Dimensions are the caller's responsibility.
#[inline]
pub(crate) fn log_class_weights(x: &[f64], coefs: &[Vec<f64>], out: &mut [f64]) {
    out[0] = 0.0;
    let mut max = 0.0f64;
    for (o, c) in out[1..].iter_mut().zip(coefs) {
        *o = linear(x, c);
        max = max.max(*o);
    }
    let norm: f64 = out.iter().map(|&e| (e - max).exp()).sum::<f64>().ln() + max;
    for o in out.iter_mut() {
        *o -= norm;
    }
}

/// Membership probabilities for classes `1..=coefs.len() + 1`, the first
/// being the reference.
pub fn class_weights(x: &[f64], coefs: &[Vec<f64>]) -> Result<Vec<f64>> {
    if let Some(bad) = coefs.iter().find(|c| c.len() != x.len() + 1) {
        return Err(Error::DimensionMismatch(format!(
            "coefficient row has {} entries, expected {}",
            bad.len(),
            x.len() + 1
        )));
    }
    let mut out = vec![0.0; coefs.len() + 1];
    log_class_weights(x, coefs, &mut out);
    Ok(out.into_iter().map(f64::exp).collect())
}

pub fn class_weights_u(x: &[f64], phi: &[Vec<f64>]) -> Result<Vec<f64>> {
    class_weights(x, phi)
}

pub fn class_weights_v(x: &[f64], psi: &[Vec<f64>]) -> Result<Vec<f64>> {
    class_weights(x, psi)
}

pub fn class_weights_both(x: &[f64], phi: &[Vec<f64>], psi: &[Vec<f64>]) -> Result<ClassWeights> {
    Ok(ClassWeights { lambda: class_weights(x, phi)?, pi: class_weights(x, psi)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symmetric_and_degenerate() {
        let w = class_weights(&[1.0, 2.0], &vec![vec![0.0; 3]; 3]).unwrap();
        assert!(w.iter().all(|&p| (p - 0.25).abs() < 1e-15));
        assert_eq!(class_weights(&[0.3], &[]).unwrap(), vec![1.0]);
        let w = class_weights_v(&[], &[vec![0.0]]).unwrap();
        assert_eq!(w, vec![0.5, 0.5]);
    }

    #[test]
    fn binary_logit_values() {
        let w = class_weights(&[], &[vec![0.5]]).unwrap();
        let e = 0.5f64.exp();
        assert!((w[0] - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((w[0] - 0.37754).abs() < 1e-5 && (w[1] - 0.62246).abs() < 1e-5);
        // constant -0.869 gives the second-class probability 0.2955
        let w = class_weights(&[], &[vec![-0.869]]).unwrap();
        assert!((w[1] - 0.2955).abs() < 5e-5);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(class_weights(&[1.0], &[vec![0.0]]).is_err());
    }

    #[test]
    fn log_lambda_gradient_matches_finite_differences() {
        // d log lambda_h / d phi_{g,c} = (1[h == g] - lambda_g) x_c
        let x = [0.4, -1.2];
        let phi = vec![vec![0.3, -0.5, 0.8], vec![-1.0, 0.2, 0.1]];
        let lam = class_weights(&x, &phi).unwrap();
        let xc = [1.0, x[0], x[1]];
        for h in 0..3 {
            for g in 0..2 {
                for c in 0..3 {
                    let analytic = (if h == g + 1 { 1.0 } else { 0.0 } - lam[g + 1]) * xc[c];
                    let step = 1e-6;
                    let mut pp = phi.clone();
                    let mut pm = phi.clone();
                    pp[g][c] += step;
                    pm[g][c] -= step;
                    let fd = (class_weights(&x, &pp).unwrap()[h].ln() - class_weights(&x, &pm).unwrap()[h].ln())
                        / (2.0 * step);
                    assert!((analytic - fd).abs() <= 1e-6 * analytic.abs().max(1e-3));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn weights_form_a_distribution(coefs in prop::collection::vec(prop::collection::vec(-30.0f64..30.0, 3), 0..5),
                                       x in prop::collection::vec(-3.0f64..3.0, 2)) {
            let w = class_weights(&x, &coefs).unwrap();
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|&p| p >= 0.0));
        }

        #[test]
        fn depends_only_on_logits(c in -3.0f64..3.0, s in -2.0f64..2.0, x in -2.0f64..2.0) {
            // Shifting the constant and slope so the logit is unchanged at x.
            let a = class_weights(&[x], &[vec![c, s]]).unwrap();
            let b = class_weights(&[x], &[vec![c + 1.0, s - 1.0 / x.abs().max(1e-3) * x.signum()]]).unwrap();
            if x.abs() >= 1e-3 {
                prop_assert!((a[1] - b[1]).abs() < 1e-12);
            }
        }
    }
}
