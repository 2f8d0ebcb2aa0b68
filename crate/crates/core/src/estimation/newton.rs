use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Search direction rule for [`ascend`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Direction {
    /// Newton with an eigenvalue-modified Hessian.
    Newton,
    /// Scaled gradient.
    Gradient,
}

pub(crate) struct AscentProblem<F, D, P>
where
    F: Fn(&[f64]) -> f64,
    D: Fn(&[f64], bool) -> (Vec<f64>, Option<DMatrix<f64>>),
    P: Fn(&mut [f64]),
{
    pub value: F,
    /// Gradient, plus the Hessian when the flag is set.
    pub derivatives: D,
    pub project: P,
}

/// Ascent with step halving under a sufficient-increase test: every
/// accepted step raises the objective. Returns `None` when the Newton
/// direction is not finite.
pub(crate) fn ascend<F, D, P>(
    problem: &AscentProblem<F, D, P>,
    x0: &[f64],
    max_iter: usize,
    direction: Direction,
) -> Option<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
    D: Fn(&[f64], bool) -> (Vec<f64>, Option<DMatrix<f64>>),
    P: Fn(&mut [f64]),
{
    let mut x = x0.to_vec();
    let mut fx = (problem.value)(&x);
    for _ in 0..max_iter {
        let (g, hessian) = (problem.derivatives)(&x, direction == Direction::Newton);
        let gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if gmax < 1e-10 || !gmax.is_finite() {
            break;
        }
        let dir = match direction {
            Direction::Newton => newton_direction(&hessian?, &g)?,
            Direction::Gradient => {
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                g.iter().map(|v| v / norm.max(1.0)).collect()
            }
        };
        let slope: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            (problem.project)(&mut xn);
            let fnew = (problem.value)(&xn);
            if fnew.is_finite() && fnew > fx && fnew - fx >= 1e-4 * t * slope {
                accepted = Some((xn, fnew));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((xn, fnew)) => {
                let gain = fnew - fx;
                x = xn;
                fx = fnew;
                if gain <= 1e-12 * (1.0 + fx.abs()) {
                    break;
                }
            }
            None => break,
        }
    }
    Some(x)
}

/// Newton direction for ascent with the eigenvalues of `-H` replaced by
/// their absolute values (floored), so the step always points uphill.
fn newton_direction(hessian: &DMatrix<f64>, g: &[f64]) -> Option<Vec<f64>> {
    let eig = SymmetricEigen::new(-hessian);
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !top.is_finite() {
        return None;
    }
    let floor = (1e-8 * top).max(1e-12);
    let grad = DVector::from_column_slice(g);
    let coords = eig.eigenvectors.transpose() * grad;
    let scaled = DVector::from_iterator(
        coords.len(),
        coords.iter().zip(eig.eigenvalues.iter()).map(|(c, l)| c / l.abs().max(floor)),
    );
    let d = &eig.eigenvectors * scaled;
    d.iter().all(|v| v.is_finite()).then(|| d.iter().copied().collect())
}
