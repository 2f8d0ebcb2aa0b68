//! Item-level probabilities: graded-response categories for the ordinal
//! responses, a two-parameter logistic for answering, and the per-subject
//! joint probability under one latent-class pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Indicator, ItemDesign, ParameterSet};

/// Lower bound for any log-probability term.
pub const LOG_FLOOR: f64 = -700.0;

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(logistic(x))` without overflow, floored at [`LOG_FLOOR`].
#[inline]
pub fn log_logistic(x: f64) -> f64 {
    log_logistic_raw(x).max(LOG_FLOOR)
}

#[inline]
fn log_logistic_raw(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Per-item category probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryDistribution {
    pub probs: Vec<f64>,
}

/// Log-probability of category `y` (1-based) with linear score `score`
/// and thresholds `beta[y - 2]`, together with derivatives of the
/// log-probability with respect to the score and the two adjacent
/// thresholds (`beta_y`, `beta_{y+1}`; zero where absent).
#[derive(Clone, Copy, Debug)]
pub(crate) struct CategoryTerm {
    pub logp: f64,
    pub d_score: f64,
    pub d_lower: f64,
    pub d_upper: f64,
}

#[inline]
pub(crate) fn category_term(score: f64, beta: &[f64], y: usize) -> CategoryTerm {
    let l = beta.len() + 1;
    debug_assert!((1..=l).contains(&y));
    if l == 1 {
        return CategoryTerm { logp: 0.0, d_score: 0.0, d_lower: 0.0, d_upper: 0.0 };
    }
    if y == 1 {
        // 1 - F(score - beta_2)
        let b = score - beta[0];
        let logp = log_logistic(-b);
        let db = -logistic(b);
        return CategoryTerm { logp, d_score: db, d_lower: 0.0, d_upper: -db };
    }
    if y == l {
        let a = score - beta[l - 2];
        let logp = log_logistic(a);
        let da = logistic(-a);
        return CategoryTerm { logp, d_score: da, d_lower: -da, d_upper: 0.0 };
    }
    // F(a) - F(b) = F(a) F(-b) (1 - e^{b - a}), with a > b when ordered.
    let a = score - beta[y - 2];
    let b = score - beta[y - 1];
    let gap = a - b;
    if gap <= 0.0 {
        return CategoryTerm { logp: LOG_FLOOR, d_score: 0.0, d_lower: 0.0, d_upper: 0.0 };
    }
    let one_minus = -(-gap).exp_m1();
    let logp = (log_logistic(a) + log_logistic(-b) + one_minus.ln()).max(LOG_FLOOR);
    let da = (log_logistic_raw(-a) - log_logistic_raw(-b)).exp() / one_minus;
    let db = -(log_logistic_raw(b) - log_logistic_raw(a)).exp() / one_minus;
    CategoryTerm { logp, d_score: da + db, d_lower: -da, d_upper: -db }
}

/// Log category probabilities for all `L = beta.len() + 1` categories.
pub(crate) fn category_logprobs(score: f64, beta: &[f64], out: &mut [f64]) {
    for (k, o) in out.iter_mut().enumerate() {
        *o = category_term(score, beta, k + 1).logp;
    }
}

#[inline]
fn u_score(j: usize, uh: &[f64], design: &ItemDesign) -> f64 {
    design.z_u[j]
        .iter()
        .zip(uh)
        .filter(|(z, _)| **z)
        .map(|(_, u)| u)
        .sum()
}

#[inline]
fn v_score(j: usize, vh: &[f64], design: &ItemDesign) -> f64 {
    design
        .z_v
        .get(j)
        .map(|row| row.iter().zip(vh).filter(|(z, _)| **z).map(|(_, v)| v).sum())
        .unwrap_or(0.0)
}

/// `Pr(Y_j >= y | u)` for `2 <= y <= L_j`.
pub fn grm_cumulative(j: usize, y: usize, uh: &[f64], params: &ParameterSet, design: &ItemDesign) -> Result<f64> {
    let l = design.categories[j];
    if y < 2 || y > l {
        return Err(Error::CategoryOutOfRange { item: j, y, max: l });
    }
    Ok(logistic(params.alpha[j] * u_score(j, uh, design) - params.beta[j][y - 2]))
}

/// Category distribution of item `j` at support vector `uh`.
pub fn grm_category(j: usize, uh: &[f64], params: &ParameterSet, design: &ItemDesign) -> CategoryDistribution {
    let score = params.alpha[j] * u_score(j, uh, design);
    let mut logp = vec![0.0; design.categories[j]];
    category_logprobs(score, &params.beta[j], &mut logp);
    CategoryDistribution { probs: logp.into_iter().map(f64::exp).collect() }
}

/// Linear predictor of the answering logit.
#[inline]
pub(crate) fn indicator_logit(j: usize, uh: &[f64], vh: &[f64], params: &ParameterSet, design: &ItemDesign) -> f64 {
    let mut t = params.gamma_u[j] * u_score(j, uh, design) - params.delta[j];
    if params.v_enabled() {
        t += params.gamma_v[j] * v_score(j, vh, design);
    }
    t
}

/// Probability of answering item `j` given support vectors `uh`, `vh`.
pub fn indicator_prob(j: usize, uh: &[f64], vh: &[f64], params: &ParameterSet, design: &ItemDesign) -> f64 {
    logistic(indicator_logit(j, uh, vh, params, design))
}

/// Log of the subject's joint probability given latent classes
/// `(hu, hv)`; structurally missing items contribute nothing.
pub fn subject_class_logprob(
    i: usize,
    hu: usize,
    hv: usize,
    params: &ParameterSet,
    design: &ItemDesign,
    data: &Dataset,
) -> f64 {
    let uh = params.u_point(hu);
    let vh = params.v_point(hv);
    let mut total = 0.0;
    for j in 0..data.m {
        match data.r(i, j) {
            Indicator::StructuralMissing => {}
            Indicator::Skipped => {
                total += log_logistic(-indicator_logit(j, &uh, &vh, params, design));
            }
            Indicator::Answered => {
                let y = data.y(i, j).expect("answered item has a response") as usize;
                let score = params.alpha[j] * u_score(j, &uh, design);
                total += log_logistic(indicator_logit(j, &uh, &vh, params, design));
                total += category_term(score, &params.beta[j], y).logp;
            }
        }
    }
    total
}

pub fn subject_class_prob(
    i: usize,
    hu: usize,
    hv: usize,
    params: &ParameterSet,
    design: &ItemDesign,
    data: &Dataset,
) -> f64 {
    subject_class_logprob(i, hu, hv, params, design, data).exp()
}

/// Class-conditional log-probability tables for every item, evaluated
/// once per parameter vector.
#[derive(Clone, Debug)]
pub(crate) struct ClassTables {
    pub k_u: usize,
    pub k_v: usize,
    /// `log_py[j][hu * L_j + (y - 1)]`
    pub log_py: Vec<Vec<f64>>,
    /// `log_q[j][hu * kV + hv]`
    pub log_q: Vec<Vec<f64>>,
    pub log_1mq: Vec<Vec<f64>>,
}

impl ClassTables {
    pub fn new(params: &ParameterSet, design: &ItemDesign) -> Self {
        let m = design.n_items();
        let (k_u, k_v) = (params.k_u, params.k_v);
        let us: Vec<Vec<f64>> = (0..k_u).map(|h| params.u_point(h)).collect();
        let vs: Vec<Vec<f64>> = (0..k_v).map(|h| params.v_point(h)).collect();
        let mut log_py = Vec::with_capacity(m);
        let mut log_q = Vec::with_capacity(m);
        let mut log_1mq = Vec::with_capacity(m);
        for j in 0..m {
            let l = design.categories[j];
            let mut py = vec![0.0; k_u * l];
            let mut q = vec![0.0; k_u * k_v];
            let mut nq = vec![0.0; k_u * k_v];
            for (hu, uh) in us.iter().enumerate() {
                let score = params.alpha[j] * u_score(j, uh, design);
                category_logprobs(score, &params.beta[j], &mut py[hu * l..(hu + 1) * l]);
                for (hv, vh) in vs.iter().enumerate() {
                    let t = indicator_logit(j, uh, vh, params, design);
                    q[hu * k_v + hv] = log_logistic(t);
                    nq[hu * k_v + hv] = log_logistic(-t);
                }
            }
            log_py.push(py);
            log_q.push(q);
            log_1mq.push(nq);
        }
        ClassTables { k_u, k_v, log_py, log_q, log_1mq }
    }

    /// Fills `out[hu * kV + hv]` with the subject's class-conditional
    /// log-probabilities.
    #[inline]
    pub fn subject_logprobs(&self, i: usize, design: &ItemDesign, data: &Dataset, out: &mut [f64]) {
        out.fill(0.0);
        let kv = self.k_v;
        for j in 0..data.m {
            match data.r(i, j) {
                Indicator::StructuralMissing => {}
                Indicator::Skipped => {
                    for (o, v) in out.iter_mut().zip(&self.log_1mq[j]) {
                        *o += v;
                    }
                }
                Indicator::Answered => {
                    let l = design.categories[j];
                    let y = data.y(i, j).unwrap_or(1) as usize;
                    for hu in 0..self.k_u {
                        let py = self.log_py[j][hu * l + y - 1];
                        for hv in 0..kv {
                            out[hu * kv + hv] += py + self.log_q[j][hu * kv + hv];
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LatentConfig, Restrictions};
    use proptest::prelude::*;

    fn one_item(l: usize, with_v: bool) -> (ItemDesign, ParameterSet) {
        let d = ItemDesign::unidimensional(vec![l], with_v);
        let cfg = if with_v {
            LatentConfig::new(1, 1, 1, 2).unwrap()
        } else {
            LatentConfig::new(1, 0, 1, 1).unwrap()
        };
        let mut p = ParameterSet::zeros(&d, &cfg, 0, &Restrictions::default());
        // Free the anchor so tests can set arbitrary values.
        p.mask = Default::default();
        (d, p)
    }

    #[test]
    fn cumulative_examples() {
        let (d, mut p) = one_item(3, false);
        p.alpha[0] = 1.0;
        p.beta[0] = vec![0.0, 1.0];
        assert_eq!(grm_cumulative(0, 2, &[0.0], &p, &d).unwrap(), 0.5);

        p.alpha[0] = 2.0;
        p.beta[0] = vec![1.0, 2.0];
        let oracle = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((grm_cumulative(0, 2, &[1.0], &p, &d).unwrap() - oracle).abs() < 1e-15);
        assert!((oracle - 0.7310586).abs() < 1e-7);

        p.alpha[0] = 1.0;
        p.beta[0] = vec![50.0, 60.0];
        assert!(grm_cumulative(0, 2, &[0.0], &p, &d).unwrap() <= 1e-20);

        assert!(grm_cumulative(0, 1, &[0.0], &p, &d).is_err());
        assert!(grm_cumulative(0, 4, &[0.0], &p, &d).is_err());
    }

    #[test]
    fn category_examples() {
        let (d, mut p) = one_item(2, false);
        p.beta[0] = vec![0.0];
        let dist = grm_category(0, &[0.0], &p, &d);
        assert!((dist.probs[0] - 0.5).abs() < 1e-15 && (dist.probs[1] - 0.5).abs() < 1e-15);

        let (d, mut p) = one_item(3, false);
        p.beta[0] = vec![-1.0, 1.0];
        let dist = grm_category(0, &[0.0], &p, &d);
        let f = |x: f64| 1.0 / (1.0 + (-x).exp());
        let oracle = [1.0 - f(1.0), f(1.0) - f(-1.0), f(-1.0)];
        for (a, b) in dist.probs.iter().zip(oracle) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((dist.probs[0] - 0.26894).abs() < 1e-5);
        assert!((dist.probs[1] - 0.46212).abs() < 1e-5);
    }

    #[test]
    fn indicator_examples() {
        let (d, mut p) = one_item(2, true);
        assert_eq!(indicator_prob(0, &[0.0], &[0.0], &p, &d), 0.5);
        p.gamma_u[0] = 1.0;
        p.gamma_v[0] = 1.0;
        p.delta[0] = 1.0;
        assert_eq!(indicator_prob(0, &[2.0], &[-1.0], &p, &d), 0.5);
        p.gamma_u[0] = 0.5;
        p.gamma_v[0] = 2.0;
        p.delta[0] = 0.0;
        let oracle = 1.0 / (1.0 + (-1.5f64).exp());
        assert!((indicator_prob(0, &[1.0], &[0.5], &p, &d) - oracle).abs() < 1e-15);
        assert!((oracle - 0.8175745).abs() < 1e-7);
    }

    #[test]
    fn subject_probability_examples() {
        // all structurally missing
        let (d, p) = one_item(2, false);
        let data = Dataset::new(1, 1, 0);
        assert_eq!(subject_class_prob(0, 0, 0, &p, &d, &data), 1.0);

        // single skipped item with q = 0.3
        let (d, mut p) = one_item(2, false);
        p.delta[0] = -(0.3f64 / 0.7).ln();
        let mut data = Dataset::new(1, 1, 0);
        data.set(0, 0, Indicator::Skipped, None);
        assert!((subject_class_prob(0, 0, 0, &p, &d, &data) - 0.7).abs() < 1e-14);

        // answered (q = 0.8, category prob 0.25) and skipped (q = 0.3)
        let d = ItemDesign::unidimensional(vec![2, 2], false);
        let cfg = LatentConfig::new(1, 0, 1, 1).unwrap();
        let mut p = ParameterSet::zeros(&d, &cfg, 0, &Restrictions::default());
        p.mask = Default::default();
        p.delta = vec![-(0.8f64 / 0.2).ln(), -(0.3f64 / 0.7).ln()];
        // Pr(Y = 2) = logistic(-beta) = 0.25
        p.beta = vec![vec![3f64.ln()], vec![0.0]];
        let mut data = Dataset::new(1, 2, 0);
        data.set(0, 0, Indicator::Answered, Some(2));
        data.set(0, 1, Indicator::Skipped, None);
        let got = subject_class_prob(0, 0, 0, &p, &d, &data);
        let brute = 0.8 * 0.25 * 0.7;
        assert!((got - brute).abs() < 1e-14);
        assert!((got - 0.14).abs() < 1e-14);
    }

    #[test]
    fn category_derivatives_match_finite_differences() {
        let beta = [-0.7, 0.2, 1.5, 2.1];
        for y in 1..=5 {
            for &s in &[-3.0, 0.0, 0.4, 2.5] {
                let t = category_term(s, &beta, y);
                let h = 1e-6;
                let fd = (category_term(s + h, &beta, y).logp - category_term(s - h, &beta, y).logp) / (2.0 * h);
                assert!((t.d_score - fd).abs() < 1e-7, "y={y} s={s}");
                if y >= 2 {
                    let mut bp = beta;
                    let mut bm = beta;
                    bp[y - 2] += h;
                    bm[y - 2] -= h;
                    let fd = (category_term(s, &bp, y).logp - category_term(s, &bm, y).logp) / (2.0 * h);
                    assert!((t.d_lower - fd).abs() < 1e-7);
                }
                if y <= 4 {
                    let mut bp = beta;
                    let mut bm = beta;
                    bp[y - 1] += h;
                    bm[y - 1] -= h;
                    let fd = (category_term(s, &bp, y).logp - category_term(s, &bm, y).logp) / (2.0 * h);
                    assert!((t.d_upper - fd).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn extreme_scores_stay_finite() {
        let beta = [0.0, 1e-9, 1.0];
        for &s in &[-1e4, -40.0, 40.0, 1e4] {
            for y in 1..=4 {
                let t = category_term(s, &beta, y);
                assert!(t.logp.is_finite() && t.logp >= LOG_FLOOR);
                assert!(t.d_score.is_finite());
            }
        }
    }

    fn ordered_thresholds() -> impl Strategy<Value = Vec<f64>> {
        (prop::collection::vec(0.0f64..3.0, 1..6), -4.0f64..4.0).prop_map(|(incs, start)| {
            let mut b = Vec::with_capacity(incs.len());
            let mut acc = start;
            for (k, inc) in incs.iter().enumerate() {
                if k > 0 {
                    acc += inc;
                }
                b.push(acc);
            }
            b
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn category_distribution_is_valid(beta in ordered_thresholds(), alpha in -5.0f64..5.0, u in -4.0f64..4.0) {
            let d = ItemDesign::unidimensional(vec![beta.len() + 1], false);
            let cfg = LatentConfig::new(1, 0, 1, 1).unwrap();
            let mut p = ParameterSet::zeros(&d, &cfg, 0, &Restrictions::default());
            p.mask = Default::default();
            p.alpha[0] = alpha;
            p.beta[0] = beta.clone();
            let dist = grm_category(0, &[u], &p, &d);
            let sum: f64 = dist.probs.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(dist.probs.iter().all(|&x| (0.0..=1.0).contains(&x)));
            let mut prev = 1.0;
            for y in 2..=beta.len() + 1 {
                let c = grm_cumulative(0, y, &[u], &p, &d).unwrap();
                prop_assert!(c <= prev + 1e-15);
                prev = c;
            }
        }

        #[test]
        fn indicator_monotone(gu in 0.01f64..4.0, u in -3.0f64..3.0, du in 0.01f64..1.0, delta in -3.0f64..3.0) {
            let d = ItemDesign::unidimensional(vec![2], false);
            let cfg = LatentConfig::new(1, 0, 1, 1).unwrap();
            let mut p = ParameterSet::zeros(&d, &cfg, 0, &Restrictions::default());
            p.mask = Default::default();
            p.gamma_u[0] = gu;
            p.delta[0] = delta;
            let a = indicator_prob(0, &[u], &[], &p, &d);
            let b = indicator_prob(0, &[u + du], &[], &p, &d);
            prop_assert!(b > a);
            p.delta[0] = delta + du;
            prop_assert!(indicator_prob(0, &[u], &[], &p, &d) < a);
        }
    }
}
