//! Blocks of the expected complete-data log-likelihood. Each block is a
//! function of a small coordinate vector with an analytic gradient; the
//! M-step maximizes them one at a time.
//!
//! Coordinates per block:
//! - `StructuralU` / `StructuralV`: logit coefficients, row-major.
//! - `ItemY(j)`: free `alpha`, free `beta_2`, then `log(beta_y - beta_{y-1})`
//!   for `y = 3..=L_j`, which keeps thresholds ordered.
//! - `ItemR(j)`: free `gamma_U`, free `gamma_V`, free `delta`.
//! - `Support`: `u` dimension-major, then `v`.

use nalgebra::DMatrix;

use super::estep::{PosteriorWeights, SufficientStats};
use crate::layout::{ParameterLayout, Slot};
use crate::measurement::{category_term, log_logistic, logistic};
use crate::model::{Dataset, ItemDesign, ParameterSet};
use crate::structural::log_class_weights;

/// Bounds on discriminations during iteration.
pub const DISCRIMINATION_CAP: f64 = 20.0;
const LOG_INC_MIN: f64 = -20.0;
const LOG_INC_MAX: f64 = 6.0;
const SUPPORT_CAP: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockId {
    StructuralU,
    StructuralV,
    ItemY(usize),
    ItemR(usize),
    Support,
}

/// Everything the M-step needs from one E-step.
pub struct MStepContext<'a> {
    design: &'a ItemDesign,
    data: &'a Dataset,
    k_u: usize,
    k_v: usize,
    /// `n x kU` marginal posteriors.
    wu: Vec<f64>,
    /// `n x kV` marginal posteriors.
    wv: Vec<f64>,
    stats: SufficientStats,
}

struct YTerms {
    value: f64,
    d_alpha: f64,
    d_beta: Vec<f64>,
    /// derivative w.r.t. the U-score of each class
    d_score: Vec<f64>,
}

struct RTerms {
    value: f64,
    d_gu: f64,
    d_gv: f64,
    d_delta: f64,
    d_a: Vec<f64>,
    d_b: Vec<f64>,
}

impl<'a> MStepContext<'a> {
    pub fn new(weights: &PosteriorWeights, params: &ParameterSet, design: &'a ItemDesign, data: &'a Dataset) -> Self {
        let (k_u, k_v) = (weights.k_u, weights.k_v);
        let mut wu = Vec::with_capacity(data.n * k_u);
        let mut wv = Vec::with_capacity(data.n * k_v);
        for i in 0..data.n {
            wu.extend(weights.marginal_u(i));
            wv.extend(weights.marginal_v(i));
        }
        MStepContext {
            design,
            data,
            k_u,
            k_v,
            wu,
            wv,
            stats: SufficientStats::new(weights, params, design, data),
        }
    }

    /// Blocks in the order the M-step visits them.
    pub fn blocks(&self, params: &ParameterSet) -> Vec<BlockId> {
        let mut out = Vec::new();
        if self.k_u > 1 {
            out.push(BlockId::StructuralU);
        }
        if self.k_v > 1 {
            out.push(BlockId::StructuralV);
        }
        for j in params.mask.reps() {
            out.push(BlockId::ItemY(j));
            out.push(BlockId::ItemR(j));
        }
        out.push(BlockId::Support);
        out.retain(|&id| !pack(id, params).is_empty());
        out
    }

    /// Full expected complete-data log-likelihood.
    pub fn objective(&self, params: &ParameterSet) -> f64 {
        let mut total = self.structural_value(params, false) + self.structural_value(params, true);
        for j in params.mask.reps() {
            total += self.y_terms(j, params).value + self.r_terms(j, params).value;
        }
        total
    }

    pub fn value(&self, id: BlockId, params: &ParameterSet) -> f64 {
        match id {
            BlockId::StructuralU => self.structural_value(params, false),
            BlockId::StructuralV => self.structural_value(params, true),
            BlockId::ItemY(j) => self.y_terms(j, params).value,
            BlockId::ItemR(j) => self.r_terms(j, params).value,
            BlockId::Support => params
                .mask
                .reps()
                .map(|j| self.y_terms(j, params).value + self.r_terms(j, params).value)
                .sum(),
        }
    }

    /// Gradient in block coordinates.
    pub fn gradient(&self, id: BlockId, params: &ParameterSet) -> Vec<f64> {
        match id {
            BlockId::StructuralU => self.structural_gradient(params, false),
            BlockId::StructuralV => self.structural_gradient(params, true),
            BlockId::ItemY(j) => {
                let t = self.y_terms(j, params);
                let mut g = Vec::new();
                if !params.mask.alpha_fixed[j] {
                    g.push(t.d_alpha);
                }
                if !params.mask.beta2_fixed[j] {
                    g.push(t.d_beta.iter().sum());
                }
                // beta_y = beta_2 + sum_{k=3..=y} exp(kappa_k)
                let beta = &params.beta[j];
                for k in 1..beta.len() {
                    let inc = beta[k] - beta[k - 1];
                    g.push(inc * t.d_beta[k..].iter().sum::<f64>());
                }
                g
            }
            BlockId::ItemR(j) => {
                let t = self.r_terms(j, params);
                let mut g = Vec::new();
                if !params.mask.gamma_u_zero[j] {
                    g.push(t.d_gu);
                }
                if params.v_enabled() && !params.mask.gamma_v_fixed[j] {
                    g.push(t.d_gv);
                }
                if !(params.v_enabled() && params.mask.delta_fixed[j]) {
                    g.push(t.d_delta);
                }
                g
            }
            BlockId::Support => {
                let (gu, gv) = self.support_gradient(params);
                gu.into_iter().flatten().chain(gv.into_iter().flatten()).collect()
            }
        }
    }

    /// Hessian in block coordinates: analytic for the structural blocks,
    /// central differences of the analytic gradient elsewhere.
    pub fn hessian(&self, id: BlockId, params: &ParameterSet) -> DMatrix<f64> {
        match id {
            BlockId::StructuralU => self.structural_hessian(params, false),
            BlockId::StructuralV => self.structural_hessian(params, true),
            _ => {
                let x = pack(id, params);
                let p = x.len();
                let mut h = DMatrix::zeros(p, p);
                let mut scratch = params.clone();
                for k in 0..p {
                    let step = 1e-5 * x[k].abs().max(1.0);
                    let mut xp = x.clone();
                    xp[k] += step;
                    unpack(id, &xp, &mut scratch);
                    let gp = self.gradient(id, &scratch);
                    let mut xm = x.clone();
                    xm[k] -= step;
                    unpack(id, &xm, &mut scratch);
                    let gm = self.gradient(id, &scratch);
                    for r in 0..p {
                        h[(r, k)] = (gp[r] - gm[r]) / (2.0 * step);
                    }
                }
                (&h + h.transpose()) * 0.5
            }
        }
    }

    /// Gradient of the expected complete-data log-likelihood with respect to
    /// the free parameters in natural coordinates. At the parameters that
    /// produced the weights this equals the score of the marginal
    /// log-likelihood.
    pub fn natural_gradient(&self, params: &ParameterSet, layout: &ParameterLayout) -> Vec<f64> {
        let m = self.design.n_items();
        let mut y_terms: Vec<Option<YTerms>> = (0..m).map(|_| None).collect();
        let mut r_terms: Vec<Option<RTerms>> = (0..m).map(|_| None).collect();
        for j in params.mask.reps() {
            y_terms[j] = Some(self.y_terms(j, params));
            r_terms[j] = Some(self.r_terms(j, params));
        }
        let (gu, gv) = self.support_gradient(params);
        let gphi = self.structural_gradient(params, false);
        let gpsi = self.structural_gradient(params, true);
        let width = self.data.n_cov + 1;
        layout
            .slots
            .iter()
            .map(|slot| match *slot {
                Slot::Alpha(j) => y_terms[j].as_ref().map_or(0.0, |t| t.d_alpha),
                Slot::Beta(j, k) => y_terms[j].as_ref().map_or(0.0, |t| t.d_beta[k]),
                Slot::GammaU(j) => r_terms[j].as_ref().map_or(0.0, |t| t.d_gu),
                Slot::GammaV(j) => r_terms[j].as_ref().map_or(0.0, |t| t.d_gv),
                Slot::Delta(j) => r_terms[j].as_ref().map_or(0.0, |t| t.d_delta),
                Slot::U(s, h) => gu[s][h],
                Slot::V(t, h) => gv[t][h],
                Slot::Phi(h, c) => gphi[h * width + c],
                Slot::Psi(h, c) => gpsi[h * width + c],
            })
            .collect()
    }

    fn class_scores(&self, params: &ParameterSet, j: usize) -> (Vec<f64>, Vec<f64>) {
        let s = self.design.u_dim(j);
        let a = params.u[s].clone();
        let b = match (params.v_enabled(), self.design.v_dim(j)) {
            (true, Some(t)) => params.v[t].clone(),
            _ => vec![0.0; self.k_v],
        };
        (a, b)
    }

    fn y_terms(&self, j: usize, params: &ParameterSet) -> YTerms {
        let l = self.design.categories[j];
        let counts = &self.stats.y[j];
        let alpha = params.alpha[j];
        let beta = &params.beta[j];
        let (a, _) = self.class_scores(params, j);
        let mut out = YTerms { value: 0.0, d_alpha: 0.0, d_beta: vec![0.0; l - 1], d_score: vec![0.0; self.k_u] };
        for (hu, &ah) in a.iter().enumerate() {
            let score = alpha * ah;
            let mut d_score = 0.0;
            for y in 1..=l {
                let n = counts[hu * l + y - 1];
                if n == 0.0 {
                    continue;
                }
                let t = category_term(score, beta, y);
                out.value += n * t.logp;
                d_score += n * t.d_score;
                if y >= 2 {
                    out.d_beta[y - 2] += n * t.d_lower;
                }
                if y < l {
                    out.d_beta[y - 1] += n * t.d_upper;
                }
            }
            out.d_alpha += d_score * ah;
            out.d_score[hu] = d_score * alpha;
        }
        out
    }

    fn r_terms(&self, j: usize, params: &ParameterSet) -> RTerms {
        let counts = &self.stats.r[j];
        let (a, b) = self.class_scores(params, j);
        let (gu, gv, delta) = (params.gamma_u[j], params.gamma_v[j], params.delta[j]);
        let v_on = params.v_enabled();
        let mut out = RTerms {
            value: 0.0,
            d_gu: 0.0,
            d_gv: 0.0,
            d_delta: 0.0,
            d_a: vec![0.0; self.k_u],
            d_b: vec![0.0; self.k_v],
        };
        for (hu, &ah) in a.iter().enumerate() {
            for (hv, &bh) in b.iter().enumerate() {
                let [n0, n1] = counts[hu * self.k_v + hv];
                if n0 == 0.0 && n1 == 0.0 {
                    continue;
                }
                let t = gu * ah + if v_on { gv * bh } else { 0.0 } - delta;
                out.value += n1 * log_logistic(t) + n0 * log_logistic(-t);
                let resid = n1 - (n0 + n1) * logistic(t);
                out.d_gu += resid * ah;
                out.d_gv += resid * bh;
                out.d_delta -= resid;
                out.d_a[hu] += resid * gu;
                out.d_b[hv] += resid * gv;
            }
        }
        if !v_on {
            out.d_gv = 0.0;
            out.d_b.fill(0.0);
        }
        out
    }

    fn support_gradient(&self, params: &ParameterSet) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut gu = vec![vec![0.0; self.k_u]; params.u.len()];
        let mut gv = if params.v_enabled() { vec![vec![0.0; self.k_v]; params.v.len()] } else { Vec::new() };
        for j in params.mask.reps() {
            let s = self.design.u_dim(j);
            let yt = self.y_terms(j, params);
            let rt = self.r_terms(j, params);
            for h in 0..self.k_u {
                gu[s][h] += yt.d_score[h] + rt.d_a[h];
            }
            if params.v_enabled() {
                if let Some(t) = self.design.v_dim(j) {
                    for h in 0..self.k_v {
                        gv[t][h] += rt.d_b[h];
                    }
                }
            }
        }
        (gu, gv)
    }

    fn structural_parts(&self, v_side: bool) -> (&[f64], usize) {
        if v_side {
            (&self.wv, self.k_v)
        } else {
            (&self.wu, self.k_u)
        }
    }

    fn structural_value(&self, params: &ParameterSet, v_side: bool) -> f64 {
        self.structural_pass(params, v_side, false, false).0
    }

    fn structural_gradient(&self, params: &ParameterSet, v_side: bool) -> Vec<f64> {
        self.structural_pass(params, v_side, true, false).1
    }

    fn structural_hessian(&self, params: &ParameterSet, v_side: bool) -> DMatrix<f64> {
        self.structural_pass(params, v_side, true, true).2.expect("hessian requested")
    }

    /// Value, gradient and (optionally) Hessian of a weighted multinomial
    /// logit in one pass over subjects.
    fn structural_pass(
        &self,
        params: &ParameterSet,
        v_side: bool,
        want_grad: bool,
        want_hess: bool,
    ) -> (f64, Vec<f64>, Option<DMatrix<f64>>) {
        let (w, k) = self.structural_parts(v_side);
        if k < 2 {
            return (0.0, Vec::new(), want_hess.then(|| DMatrix::zeros(0, 0)));
        }
        let coefs = if v_side { &params.psi } else { &params.phi };
        let width = self.data.n_cov + 1;
        let p = (k - 1) * width;
        let mut g = vec![0.0; if want_grad { p } else { 0 }];
        let mut h = vec![0.0; if want_hess { p * p } else { 0 }];
        let mut lw = vec![0.0; k];
        let mut lam = vec![0.0; k];
        let mut xc = vec![1.0; width];
        let mut total = 0.0;
        for i in 0..self.data.n {
            let x = self.data.x_row(i);
            log_class_weights(x, coefs, &mut lw);
            let wi = &w[i * k..(i + 1) * k];
            total += wi.iter().zip(&lw).map(|(a, b)| a * b).sum::<f64>();
            if !want_grad {
                continue;
            }
            xc[1..].copy_from_slice(x);
            for (l, v) in lam.iter_mut().zip(&lw) {
                *l = v.exp();
            }
            for hh in 1..k {
                let resid = wi[hh] - lam[hh];
                let row = &mut g[(hh - 1) * width..hh * width];
                for (r, xv) in row.iter_mut().zip(&xc) {
                    *r += resid * xv;
                }
            }
            if want_hess {
                for g1 in 1..k {
                    for g2 in g1..k {
                        let cov = if g1 == g2 { lam[g1] * (1.0 - lam[g1]) } else { -lam[g1] * lam[g2] };
                        for c1 in 0..width {
                            let base = ((g1 - 1) * width + c1) * p + (g2 - 1) * width;
                            let f = cov * xc[c1];
                            for (c2, xv) in xc.iter().enumerate() {
                                h[base + c2] -= f * xv;
                            }
                        }
                    }
                }
            }
        }
        let hess = want_hess.then(|| {
            let mut m = DMatrix::from_row_slice(p, p, &h);
            // fill the lower block triangle
            for r in 0..p {
                for c in 0..r {
                    if (r / width) > (c / width) {
                        m[(r, c)] = m[(c, r)];
                    }
                }
            }
            m
        });
        (total, g, hess)
    }

    /// Gradient and, when asked, Hessian at one point.
    pub fn derivatives(&self, id: BlockId, params: &ParameterSet, want_hessian: bool) -> (Vec<f64>, Option<DMatrix<f64>>) {
        match id {
            BlockId::StructuralU | BlockId::StructuralV => {
                let (_, g, h) = self.structural_pass(params, id == BlockId::StructuralV, true, want_hessian);
                (g, h)
            }
            _ => (self.gradient(id, params), want_hessian.then(|| self.hessian(id, params))),
        }
    }
}

/// Current coordinates of a block.
pub fn pack(id: BlockId, params: &ParameterSet) -> Vec<f64> {
    match id {
        BlockId::StructuralU => params.phi.iter().flatten().copied().collect(),
        BlockId::StructuralV => params.psi.iter().flatten().copied().collect(),
        BlockId::ItemY(j) => {
            let mut x = Vec::new();
            if !params.mask.alpha_fixed[j] {
                x.push(params.alpha[j]);
            }
            let beta = &params.beta[j];
            if !params.mask.beta2_fixed[j] {
                x.push(beta[0]);
            }
            for k in 1..beta.len() {
                x.push((beta[k] - beta[k - 1]).max(LOG_INC_MIN.exp()).ln());
            }
            x
        }
        BlockId::ItemR(j) => {
            let mut x = Vec::new();
            if !params.mask.gamma_u_zero[j] {
                x.push(params.gamma_u[j]);
            }
            if params.v_enabled() && !params.mask.gamma_v_fixed[j] {
                x.push(params.gamma_v[j]);
            }
            if !(params.v_enabled() && params.mask.delta_fixed[j]) {
                x.push(params.delta[j]);
            }
            x
        }
        BlockId::Support => {
            let mut x: Vec<f64> = params.u.iter().flatten().copied().collect();
            if params.v_enabled() {
                x.extend(params.v.iter().flatten());
            }
            x
        }
    }
}

/// Writes block coordinates back into `params` (and onto tied items).
pub fn unpack(id: BlockId, x: &[f64], params: &mut ParameterSet) {
    match id {
        BlockId::StructuralU | BlockId::StructuralV => {
            let coefs = if id == BlockId::StructuralU { &mut params.phi } else { &mut params.psi };
            let mut it = x.iter();
            for row in coefs.iter_mut() {
                for c in row.iter_mut() {
                    *c = *it.next().expect("coordinate count");
                }
            }
        }
        BlockId::ItemY(j) => {
            let mut it = x.iter().copied();
            if !params.mask.alpha_fixed[j] {
                params.alpha[j] = it.next().expect("alpha");
            }
            let len = params.beta[j].len();
            if !params.mask.beta2_fixed[j] {
                params.beta[j][0] = it.next().expect("beta_2");
            }
            for k in 1..len {
                let prev = params.beta[j][k - 1];
                params.beta[j][k] = prev + it.next().expect("increment").exp();
            }
            copy_item_to_members(params, j);
        }
        BlockId::ItemR(j) => {
            let mut it = x.iter().copied();
            if !params.mask.gamma_u_zero[j] {
                params.gamma_u[j] = it.next().expect("gamma_u");
            }
            if params.v_enabled() && !params.mask.gamma_v_fixed[j] {
                params.gamma_v[j] = it.next().expect("gamma_v");
            }
            if !(params.v_enabled() && params.mask.delta_fixed[j]) {
                params.delta[j] = it.next().expect("delta");
            }
            copy_item_to_members(params, j);
        }
        BlockId::Support => {
            let mut it = x.iter().copied();
            for row in params.u.iter_mut() {
                for c in row.iter_mut() {
                    *c = it.next().expect("u");
                }
            }
            if params.v_enabled() {
                for row in params.v.iter_mut() {
                    for c in row.iter_mut() {
                        *c = it.next().expect("v");
                    }
                }
            }
        }
    }
}

fn copy_item_to_members(params: &mut ParameterSet, rep: usize) {
    for j in 0..params.mask.rep_of.len() {
        if j != rep && params.mask.rep_of[j] == rep {
            params.alpha[j] = params.alpha[rep];
            params.beta[j] = params.beta[rep].clone();
            params.gamma_u[j] = params.gamma_u[rep];
            params.gamma_v[j] = params.gamma_v[rep];
            params.delta[j] = params.delta[rep];
        }
    }
}

/// Keeps iterates inside the working region. Returns true if anything moved.
pub(crate) fn project(id: BlockId, x: &mut [f64], params: &ParameterSet) -> bool {
    let mut moved = false;
    let mut clamp = |v: &mut f64, lo: f64, hi: f64| {
        let c = v.clamp(lo, hi);
        if c != *v {
            *v = c;
            moved = true;
        }
    };
    match id {
        BlockId::ItemY(j) => {
            let mut k = 0;
            if !params.mask.alpha_fixed[j] {
                clamp(&mut x[0], -DISCRIMINATION_CAP, DISCRIMINATION_CAP);
                k = 1;
            }
            if !params.mask.beta2_fixed[j] {
                k += 1;
            }
            for v in x[k..].iter_mut() {
                clamp(v, LOG_INC_MIN, LOG_INC_MAX);
            }
        }
        BlockId::ItemR(j) => {
            let mut n_disc = usize::from(!params.mask.gamma_u_zero[j]);
            if params.v_enabled() && !params.mask.gamma_v_fixed[j] {
                n_disc += 1;
            }
            for v in x[..n_disc].iter_mut() {
                clamp(v, -DISCRIMINATION_CAP, DISCRIMINATION_CAP);
            }
        }
        BlockId::Support => {
            for v in x.iter_mut() {
                clamp(v, -SUPPORT_CAP, SUPPORT_CAP);
            }
        }
        _ => {}
    }
    moved
}
