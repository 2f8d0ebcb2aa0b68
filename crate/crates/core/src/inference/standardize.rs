use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, ItemDesign, ParameterSet};
use crate::structural::log_class_weights;

/// Class membership probabilities averaged over subjects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageClassProbs {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Weighted mean and standard deviation of one latent dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub sd: f64,
}

impl Moments {
    pub fn of(points: &[f64], weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        let mean = points.iter().zip(weights).map(|(p, w)| p * w).sum::<f64>() / total;
        let var = points.iter().zip(weights).map(|(p, w)| w * (p - mean).powi(2)).sum::<f64>() / total;
        Moments { mean, sd: var.sqrt() }
    }
}

pub fn average_class_probs(params: &ParameterSet, data: &Dataset) -> AverageClassProbs {
    let mut u = vec![0.0; params.k_u];
    let mut v = vec![0.0; params.k_v];
    let mut lu = vec![0.0; params.k_u];
    let mut lv = vec![0.0; params.k_v];
    for i in 0..data.n {
        let x = data.x_row(i);
        log_class_weights(x, &params.phi, &mut lu);
        log_class_weights(x, &params.psi, &mut lv);
        u.iter_mut().zip(&lu).for_each(|(a, l)| *a += l.exp());
        v.iter_mut().zip(&lv).for_each(|(a, l)| *a += l.exp());
    }
    let n = data.n.max(1) as f64;
    u.iter_mut().for_each(|a| *a /= n);
    v.iter_mut().for_each(|a| *a /= n);
    AverageClassProbs { u, v }
}

fn dimension_moments(rows: &[Vec<f64>], weights: &[f64], side: &str) -> Result<Vec<Moments>> {
    rows.iter()
        .enumerate()
        .map(|(d, row)| {
            let m = Moments::of(row, weights);
            if !(m.sd > 1e-12) {
                return Err(Error::ZeroVariance(format!("{side}[{}]", d + 1)));
            }
            Ok(m)
        })
        .collect()
}

/// Centres and scales every latent dimension to weighted mean 0 and SD 1
/// and transforms item parameters so that all model probabilities are
/// unchanged. Logit coefficients are left as they are.
pub fn standardize(params: &ParameterSet, design: &ItemDesign, avg: &AverageClassProbs) -> Result<ParameterSet> {
    let mu = dimension_moments(&params.u, &avg.u, "u")?;
    let mv = if params.v_enabled() { dimension_moments(&params.v, &avg.v, "v")? } else { Vec::new() };
    let mut p = params.clone();
    for (row, m) in p.u.iter_mut().zip(&mu) {
        row.iter_mut().for_each(|x| *x = (*x - m.mean) / m.sd);
    }
    for (row, m) in p.v.iter_mut().zip(&mv) {
        row.iter_mut().for_each(|x| *x = (*x - m.mean) / m.sd);
    }
    for j in 0..design.n_items() {
        let a = mu[design.u_dim(j)];
        let alpha = params.alpha[j];
        p.alpha[j] = alpha * a.sd;
        p.beta[j].iter_mut().for_each(|b| *b -= alpha * a.mean);
        p.gamma_u[j] = params.gamma_u[j] * a.sd;
        p.delta[j] = params.delta[j] - params.gamma_u[j] * a.mean;
        if let (true, Some(t)) = (params.v_enabled(), design.v_dim(j)) {
            let b = mv[t];
            p.gamma_v[j] = params.gamma_v[j] * b.sd;
            p.delta[j] -= params.gamma_v[j] * b.mean;
        }
    }
    Ok(p)
}

/// Standardizes using the subjects of `data` for the class weights.
pub fn standardize_fit(params: &ParameterSet, design: &ItemDesign, data: &Dataset) -> Result<ParameterSet> {
    standardize(params, design, &average_class_probs(params, data))
}
