use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::standardize::standardize_fit;
use crate::error::Result;
use crate::estimation::loglik_gradient;
use crate::layout::{all_slots, ParameterLayout};
use crate::model::{Dataset, ItemDesign, ParameterSet};
use crate::numeric::central_jacobian;

/// Diagnostics of the numerical Hessian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HessianReport {
    /// `max |H - H^T| / max |H|` before symmetrization.
    pub max_asymmetry: f64,
    /// Smallest eigenvalue of the observed information.
    pub min_eigenvalue: f64,
    pub positive_definite: bool,
}

/// Standard errors for every entry of a parameter set, in the order of
/// [`all_slots`]. Fixed entries report SE 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardErrors {
    pub labels: Vec<String>,
    pub estimates: Vec<f64>,
    pub se: Vec<f64>,
    pub fixed: Vec<bool>,
    /// Entries whose variance could not be obtained from the information.
    pub failed: Vec<bool>,
    /// Standardized estimates and Delta-method SEs; absent when a latent
    /// dimension has no spread.
    pub std_estimates: Option<Vec<f64>>,
    pub std_se: Option<Vec<f64>>,
    pub std_failed: Option<Vec<bool>>,
    pub hessian: HessianReport,
}

fn step(x: f64) -> f64 {
    1e-4f64.max(1e-4 * x.abs())
}

/// Central-difference Hessian of the marginal log-likelihood over the free
/// parameters, built from the analytic score. Returns the symmetrized
/// matrix and the relative asymmetry before symmetrization.
pub fn numerical_hessian(params: &ParameterSet, design: &ItemDesign, data: &Dataset) -> (DMatrix<f64>, f64) {
    let layout = ParameterLayout::free(params);
    let theta = layout.pack(params);
    let cols: Vec<Vec<f64>> = (0..theta.len())
        .into_par_iter()
        .map(|k| {
            let h = step(theta[k]);
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[k] += h;
            tm[k] -= h;
            let gp = loglik_gradient(&layout.unpack(params, &tp), &layout, design, data);
            let gm = loglik_gradient(&layout.unpack(params, &tm), &layout, design, data);
            gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        })
        .collect();
    let p = theta.len();
    let h = DMatrix::from_fn(p, p, |r, c| cols[c][r]);
    let scale = h.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let asym = (&h - h.transpose()).iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let rel = if scale > 0.0 { asym / scale } else { 0.0 };
    ((&h + h.transpose()) * 0.5, rel)
}

/// Covariance from observed information `info`; entries loading on
/// non-positive directions are flagged instead of failing globally.
fn covariance(info: &DMatrix<f64>) -> (DMatrix<f64>, Vec<bool>, f64) {
    let p = info.nrows();
    let eig = SymmetricEigen::new(info.clone());
    let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if let Some(chol) = info.clone().cholesky() {
        return (chol.inverse(), vec![false; p], min_eig);
    }
    let max_eig = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    let tol = 1e-10 * max_eig.max(1e-300);
    let mut cov = DMatrix::zeros(p, p);
    let mut dropped = vec![0.0; p];
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        if lam > tol {
            cov += (v * v.transpose()) / lam;
        } else {
            for r in 0..p {
                dropped[r] += v[r] * v[r];
            }
        }
    }
    let failed = dropped.iter().map(|&d| d > 1e-8).collect();
    (cov, failed, min_eig)
}

/// Square roots of the diagonal of `J cov J^T`.
pub fn delta_method(cov: &DMatrix<f64>, jacobian: &DMatrix<f64>) -> Vec<f64> {
    let v = jacobian * cov * jacobian.transpose();
    (0..v.nrows()).map(|k| v[(k, k)].max(0.0).sqrt()).collect()
}

/// Raw SEs from the inverse observed information and standardized SEs by
/// the Delta method.
pub fn standard_errors(params: &ParameterSet, design: &ItemDesign, data: &Dataset) -> Result<StandardErrors> {
    let slots = all_slots(params);
    let layout = ParameterLayout::free(params);
    let theta = layout.pack(params);
    let (h, max_asymmetry) = numerical_hessian(params, design, data);
    let info = -h;
    let (cov, failed_free, min_eigenvalue) = covariance(&info);
    let positive_definite = failed_free.iter().all(|f| !f) && min_eigenvalue > 0.0;

    let mut free_index = vec![None; slots.len()];
    let mut k = 0;
    for (idx, (_, free)) in slots.iter().enumerate() {
        if *free {
            free_index[idx] = Some(k);
            k += 1;
        }
    }
    let mut se = vec![0.0; slots.len()];
    let mut failed = vec![false; slots.len()];
    for (idx, fi) in free_index.iter().enumerate() {
        if let Some(k) = *fi {
            let var = cov[(k, k)];
            if failed_free[k] || !(var.is_finite() && var > 0.0) {
                failed[idx] = true;
                se[idx] = f64::NAN;
            } else {
                se[idx] = var.sqrt();
            }
        }
    }

    let transform = |t: &[f64]| -> Option<Vec<f64>> {
        let p = layout.unpack(params, t);
        let s = standardize_fit(&p, design, data).ok()?;
        Some(slots.iter().map(|(slot, _)| slot.get(&s)).collect())
    };
    let (std_estimates, std_se, std_failed) = match transform(&theta) {
        Some(est) => {
            let fallback = est.clone();
            let jac = central_jacobian(&theta, step, |t| transform(t).unwrap_or_else(|| fallback.clone()));
            let sse = delta_method(&cov, &jac);
            let sfail: Vec<bool> = (0..est.len())
                .map(|r| (0..theta.len()).any(|c| failed_free[c] && jac[(r, c)].abs() > 1e-12))
                .collect();
            let sse = sse.iter().zip(&sfail).map(|(&s, &f)| if f { f64::NAN } else { s }).collect();
            (Some(est), Some(sse), Some(sfail))
        }
        None => (None, None, None),
    };

    Ok(StandardErrors {
        labels: slots.iter().map(|(s, _)| s.label(design)).collect(),
        estimates: slots.iter().map(|(s, _)| s.get(params)).collect(),
        se,
        fixed: slots.iter().map(|(_, free)| !free).collect(),
        failed,
        std_estimates,
        std_se,
        std_failed,
        hessian: HessianReport { max_asymmetry, min_eigenvalue, positive_definite },
    })
}
