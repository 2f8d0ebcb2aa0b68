//! Small numerical helpers.

use nalgebra::DMatrix;

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Pairwise (cascade) summation; order fixed by the slice layout.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Central-difference Jacobian-vector columns of a vector function:
/// column `k` holds `(f(x + h e_k) - f(x - h e_k)) / 2h`.
pub fn central_jacobian<F>(x: &[f64], step: impl Fn(f64) -> f64, f: F) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let cols: Vec<Vec<f64>> = (0..x.len())
        .map(|k| {
            let h = step(x[k]);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += h;
            xm[k] -= h;
            let fp = f(&xp);
            let fm = f(&xm);
            fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        })
        .collect();
    let rows = cols.first().map(Vec::len).unwrap_or(0);
    DMatrix::from_fn(rows, x.len(), |r, c| cols[c][r])
}
