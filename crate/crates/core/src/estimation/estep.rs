use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::measurement::ClassTables;
use crate::model::{Dataset, Indicator, ItemDesign, ParameterSet};
use crate::numeric::{log_sum_exp, pairwise_sum};
use crate::structural::log_class_weights;

/// Subjects per work unit. Chunk boundaries do not depend on the number of
/// workers, so reductions are bit-identical across thread counts.
pub(crate) const CHUNK: usize = 256;

/// Posterior class-pair probabilities, `w[(i * kU + hu) * kV + hv]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorWeights {
    pub n: usize,
    pub k_u: usize,
    pub k_v: usize,
    pub w: Vec<f64>,
}

impl PosteriorWeights {
    #[inline]
    pub fn get(&self, i: usize, hu: usize, hv: usize) -> f64 {
        self.w[(i * self.k_u + hu) * self.k_v + hv]
    }

    pub fn subject(&self, i: usize) -> &[f64] {
        let k = self.k_u * self.k_v;
        &self.w[i * k..(i + 1) * k]
    }

    pub fn marginal_u(&self, i: usize) -> Vec<f64> {
        let s = self.subject(i);
        (0..self.k_u).map(|hu| s[hu * self.k_v..(hu + 1) * self.k_v].iter().sum()).collect()
    }

    pub fn marginal_v(&self, i: usize) -> Vec<f64> {
        let s = self.subject(i);
        (0..self.k_v)
            .map(|hv| (0..self.k_u).map(|hu| s[hu * self.k_v + hv]).sum())
            .collect()
    }
}

/// Joint log-prior plus class-conditional log-likelihood for one subject.
#[inline]
fn subject_joint(
    i: usize,
    params: &ParameterSet,
    tables: &ClassTables,
    design: &ItemDesign,
    data: &Dataset,
    lu: &mut [f64],
    lv: &mut [f64],
    out: &mut [f64],
) {
    let x = data.x_row(i);
    log_class_weights(x, &params.phi, lu);
    log_class_weights(x, &params.psi, lv);
    tables.subject_logprobs(i, design, data, out);
    let kv = params.k_v;
    for hu in 0..params.k_u {
        for hv in 0..kv {
            out[hu * kv + hv] += lu[hu] + lv[hv];
        }
    }
}

/// E-step and log-likelihood in one pass. Weights are skipped when
/// `want_weights` is false.
pub(crate) fn posterior_pass(
    params: &ParameterSet,
    design: &ItemDesign,
    data: &Dataset,
    want_weights: bool,
) -> (Option<PosteriorWeights>, f64) {
    let tables = ClassTables::new(params, design);
    let k = params.k_u * params.k_v;
    let n = data.n;
    let chunks: Vec<(Vec<f64>, Vec<f64>)> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut lu = vec![0.0; params.k_u];
            let mut lv = vec![0.0; params.k_v];
            let mut joint = vec![0.0; k];
            let mut ll = Vec::with_capacity(hi - lo);
            let mut w = if want_weights { Vec::with_capacity((hi - lo) * k) } else { Vec::new() };
            for i in lo..hi {
                subject_joint(i, params, &tables, design, data, &mut lu, &mut lv, &mut joint);
                let lse = log_sum_exp(&joint);
                ll.push(lse);
                if want_weights {
                    w.extend(joint.iter().map(|&v| (v - lse).exp()));
                }
            }
            (ll, w)
        })
        .collect();
    let mut ll = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(if want_weights { n * k } else { 0 });
    for (l, ws) in chunks {
        ll.extend(l);
        w.extend(ws);
    }
    let total = pairwise_sum(&ll);
    let weights = want_weights.then(|| PosteriorWeights { n, k_u: params.k_u, k_v: params.k_v, w });
    (weights, total)
}

/// Discrete marginal log-likelihood.
pub fn marginal_loglik(params: &ParameterSet, design: &ItemDesign, data: &Dataset) -> f64 {
    posterior_pass(params, design, data, false).1
}

/// Per-subject log-likelihood contributions.
pub fn subject_logliks(params: &ParameterSet, design: &ItemDesign, data: &Dataset) -> Vec<f64> {
    let tables = ClassTables::new(params, design);
    let k = params.k_u * params.k_v;
    (0..data.n)
        .into_par_iter()
        .map(|i| {
            let mut lu = vec![0.0; params.k_u];
            let mut lv = vec![0.0; params.k_v];
            let mut joint = vec![0.0; k];
            subject_joint(i, params, &tables, design, data, &mut lu, &mut lv, &mut joint);
            log_sum_exp(&joint)
        })
        .collect()
}

/// Posterior probabilities of every class pair for every subject.
pub fn e_step(params: &ParameterSet, design: &ItemDesign, data: &Dataset) -> PosteriorWeights {
    posterior_pass(params, design, data, true).0.expect("weights requested")
}

/// Expected counts that the item and support blocks of the M-step need,
/// folded onto representative items.
#[derive(Clone, Debug)]
pub(crate) struct SufficientStats {
    /// `y[j][hu * L_j + (y - 1)]`
    pub y: Vec<Vec<f64>>,
    /// `r[j][hu * kV + hv] = [skipped, answered]`
    pub r: Vec<Vec<[f64; 2]>>,
}

impl SufficientStats {
    pub fn new(weights: &PosteriorWeights, params: &ParameterSet, design: &ItemDesign, data: &Dataset) -> Self {
        let m = design.n_items();
        let (k_u, k_v) = (weights.k_u, weights.k_v);
        let n = data.n;
        let empty = || SufficientStats {
            y: design.categories.iter().map(|&l| vec![0.0; k_u * l]).collect(),
            r: vec![vec![[0.0; 2]; k_u * k_v]; m],
        };
        let parts: Vec<SufficientStats> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut st = empty();
                let lo = c * CHUNK;
                for i in lo..(lo + CHUNK).min(n) {
                    let w = weights.subject(i);
                    let wu = weights.marginal_u(i);
                    for j in 0..m {
                        match data.r(i, j) {
                            Indicator::StructuralMissing => {}
                            Indicator::Skipped => {
                                for (acc, &wi) in st.r[j].iter_mut().zip(w) {
                                    acc[0] += wi;
                                }
                            }
                            Indicator::Answered => {
                                for (acc, &wi) in st.r[j].iter_mut().zip(w) {
                                    acc[1] += wi;
                                }
                                let l = design.categories[j];
                                let y = data.y(i, j).unwrap_or(1) as usize;
                                for (hu, &wh) in wu.iter().enumerate() {
                                    st.y[j][hu * l + y - 1] += wh;
                                }
                            }
                        }
                    }
                }
                st
            })
            .collect();
        let mut total = empty();
        for part in parts {
            for j in 0..m {
                for (a, b) in total.y[j].iter_mut().zip(&part.y[j]) {
                    *a += b;
                }
                for (a, b) in total.r[j].iter_mut().zip(&part.r[j]) {
                    a[0] += b[0];
                    a[1] += b[1];
                }
            }
        }
        // Fold tied items onto their representative.
        for j in 0..m {
            let rep = params.mask.rep_of.get(j).copied().unwrap_or(j);
            if rep != j {
                let yj = std::mem::take(&mut total.y[j]);
                for (a, b) in total.y[rep].iter_mut().zip(&yj) {
                    *a += b;
                }
                let rj = std::mem::take(&mut total.r[j]);
                for (a, b) in total.r[rep].iter_mut().zip(&rj) {
                    a[0] += b[0];
                    a[1] += b[1];
                }
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LatentConfig, Restrictions};

    #[test]
    fn single_skipped_item_loglik() {
        let d = ItemDesign::unidimensional(vec![2], false);
        let cfg = LatentConfig::new(1, 0, 1, 1).unwrap();
        let p = ParameterSet::zeros(&d, &cfg, 0, &Restrictions::default());
        let mut data = Dataset::new(1, 1, 0);
        data.set(0, 0, Indicator::Skipped, None);
        let ll = marginal_loglik(&p, &d, &data);
        assert!((ll - 0.5f64.ln()).abs() < 1e-15);
        assert!((ll + 0.6931472).abs() < 1e-7);
    }

    #[test]
    fn degenerate_classes_have_unit_weights() {
        let d = ItemDesign::unidimensional(vec![3, 3], false);
        let cfg = LatentConfig::new(1, 0, 1, 1).unwrap();
        let p = ParameterSet::zeros(&d, &cfg, 0, &Restrictions::default());
        let mut data = Dataset::new(3, 2, 0);
        data.set(0, 0, Indicator::Answered, Some(2));
        data.set(1, 1, Indicator::Skipped, None);
        data.set(2, 0, Indicator::Answered, Some(3));
        let w = e_step(&p, &d, &data);
        assert!(w.w.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn bayes_ratio_two_classes() {
        // kU = 2, equal priors; class likelihoods 0.2 and 0.6 for a single
        // skipped item: q = 0.8 in class 1 and 0.4 in class 2.
        let d = ItemDesign::unidimensional(vec![2], false);
        let cfg = LatentConfig::new(1, 0, 2, 1).unwrap();
        let mut p = ParameterSet::zeros(&d, &cfg, 0, &Restrictions::default());
        let logit = |q: f64| (q / (1.0 - q)).ln();
        // logit q = gamma_u * u - delta with gamma_u = 1, delta = 0
        p.gamma_u[0] = 1.0;
        p.u = vec![vec![logit(0.8), logit(0.4)]];
        let mut data = Dataset::new(1, 1, 0);
        data.set(0, 0, Indicator::Skipped, None);
        let w = e_step(&p, &d, &data);
        assert!((w.get(0, 0, 0) - 0.25).abs() < 1e-14);
        assert!((w.get(0, 1, 0) - 0.75).abs() < 1e-14);
    }
}
