//! Flat views of a [`ParameterSet`]: every entry as a [`Slot`], and the
//! free-parameter vector used for numerical derivatives.

use serde::{Deserialize, Serialize};

use crate::model::{ItemDesign, ParameterSet};

/// One scalar entry of a parameter set. Class indices are 0-based;
/// `Beta(j, k)` is the threshold of category `k + 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Slot {
    Alpha(usize),
    Beta(usize, usize),
    GammaU(usize),
    GammaV(usize),
    Delta(usize),
    U(usize, usize),
    V(usize, usize),
    Phi(usize, usize),
    Psi(usize, usize),
}

impl Slot {
    pub fn get(&self, p: &ParameterSet) -> f64 {
        match *self {
            Slot::Alpha(j) => p.alpha[j],
            Slot::Beta(j, k) => p.beta[j][k],
            Slot::GammaU(j) => p.gamma_u[j],
            Slot::GammaV(j) => p.gamma_v[j],
            Slot::Delta(j) => p.delta[j],
            Slot::U(s, h) => p.u[s][h],
            Slot::V(t, h) => p.v[t][h],
            Slot::Phi(h, c) => p.phi[h][c],
            Slot::Psi(h, c) => p.psi[h][c],
        }
    }

    pub fn set(&self, p: &mut ParameterSet, value: f64) {
        match *self {
            Slot::Alpha(j) => p.alpha[j] = value,
            Slot::Beta(j, k) => p.beta[j][k] = value,
            Slot::GammaU(j) => p.gamma_u[j] = value,
            Slot::GammaV(j) => p.gamma_v[j] = value,
            Slot::Delta(j) => p.delta[j] = value,
            Slot::U(s, h) => p.u[s][h] = value,
            Slot::V(t, h) => p.v[t][h] = value,
            Slot::Phi(h, c) => p.phi[h][c] = value,
            Slot::Psi(h, c) => p.psi[h][c] = value,
        }
    }

    /// Human-readable name, e.g. `beta[item3][y=4]`, `u[1][class2]`.
    pub fn label(&self, design: &ItemDesign) -> String {
        let name = |j: usize| design.names.get(j).cloned().unwrap_or_else(|| format!("item{}", j + 1));
        match *self {
            Slot::Alpha(j) => format!("alpha[{}]", name(j)),
            Slot::Beta(j, k) => format!("beta[{}][y={}]", name(j), k + 2),
            Slot::GammaU(j) => format!("gamma_u[{}]", name(j)),
            Slot::GammaV(j) => format!("gamma_v[{}]", name(j)),
            Slot::Delta(j) => format!("delta[{}]", name(j)),
            Slot::U(s, h) => format!("u[{}][class{}]", s + 1, h + 1),
            Slot::V(t, h) => format!("v[{}][class{}]", t + 1, h + 1),
            Slot::Phi(h, c) => format!("phi[class{}][{}]", h + 2, c),
            Slot::Psi(h, c) => format!("psi[class{}][{}]", h + 2, c),
        }
    }

    pub fn is_discrimination(&self) -> bool {
        matches!(self, Slot::Alpha(_) | Slot::GammaU(_) | Slot::GammaV(_))
    }
}

/// Every entry of `p` with a flag telling whether it is free. Tied
/// non-representative items are reported as not free.
pub fn all_slots(p: &ParameterSet) -> Vec<(Slot, bool)> {
    let mask = &p.mask;
    let m = p.n_items();
    let mut out = Vec::new();
    for j in 0..m {
        let rep = mask.rep_of.get(j).map(|&r| r == j).unwrap_or(true);
        let flag = |fixed: bool| rep && !fixed;
        out.push((Slot::Alpha(j), flag(mask.alpha_fixed.get(j) == Some(&true))));
        for k in 0..p.beta[j].len() {
            let fixed = k == 0 && mask.beta2_fixed.get(j) == Some(&true);
            out.push((Slot::Beta(j, k), flag(fixed)));
        }
        out.push((Slot::GammaU(j), flag(mask.gamma_u_zero.get(j) == Some(&true))));
        if p.v_enabled() {
            out.push((Slot::GammaV(j), flag(mask.gamma_v_fixed.get(j) == Some(&true))));
        }
        let delta_fixed = p.v_enabled() && mask.delta_fixed.get(j) == Some(&true);
        out.push((Slot::Delta(j), flag(delta_fixed)));
    }
    for (s, row) in p.u.iter().enumerate() {
        for h in 0..row.len() {
            out.push((Slot::U(s, h), true));
        }
    }
    if p.v_enabled() {
        for (t, row) in p.v.iter().enumerate() {
            for h in 0..row.len() {
                out.push((Slot::V(t, h), true));
            }
        }
    }
    for (h, row) in p.phi.iter().enumerate() {
        for c in 0..row.len() {
            out.push((Slot::Phi(h, c), true));
        }
    }
    for (h, row) in p.psi.iter().enumerate() {
        for c in 0..row.len() {
            out.push((Slot::Psi(h, c), true));
        }
    }
    out
}

/// Ordered list of free entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterLayout {
    pub slots: Vec<Slot>,
}

impl ParameterLayout {
    pub fn free(p: &ParameterSet) -> Self {
        ParameterLayout {
            slots: all_slots(p).into_iter().filter(|(_, free)| *free).map(|(s, _)| s).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn pack(&self, p: &ParameterSet) -> Vec<f64> {
        self.slots.iter().map(|s| s.get(p)).collect()
    }

    /// Copy of `template` with the free entries replaced by `theta`.
    pub fn unpack(&self, template: &ParameterSet, theta: &[f64]) -> ParameterSet {
        let mut p = template.clone();
        for (s, &v) in self.slots.iter().zip(theta) {
            s.set(&mut p, v);
        }
        p.propagate_ties();
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{count_free_parameters, LatentConfig, Restrictions};

    #[test]
    fn free_layout_matches_counting_rule() {
        let d = ItemDesign::unidimensional(vec![5; 24], true);
        for (ku, kv) in [(2, 2), (2, 3), (3, 2), (3, 3), (4, 2), (4, 3), (5, 2), (5, 3)] {
            let cfg = LatentConfig::new(1, 1, ku, kv).unwrap();
            let p = ParameterSet::zeros(&d, &cfg, 7, &Restrictions::default());
            assert_eq!(ParameterLayout::free(&p).len(), count_free_parameters(&d, &cfg, 7));
        }
        let dv = d.without_v();
        let cfg = LatentConfig::new(1, 0, 4, 1).unwrap();
        let p = ParameterSet::zeros(&dv, &cfg, 7, &Restrictions::default());
        assert_eq!(ParameterLayout::free(&p).len(), 194);
    }

    #[test]
    fn restrictions_reduce_layout() {
        let d = ItemDesign::unidimensional(vec![5; 24], true);
        let cfg = LatentConfig::new(1, 1, 4, 2).unwrap();
        let tied = Restrictions { ignorable: false, tied_blocks: vec![vec![0, 1, 2, 3]] };
        let p = ParameterSet::zeros(&d, &cfg, 7, &tied);
        assert_eq!(ParameterLayout::free(&p).len(), 202);
        let tied = Restrictions { ignorable: false, tied_blocks: vec![vec![4, 5, 6, 7]] };
        let p = ParameterSet::zeros(&d, &cfg, 7, &tied);
        assert_eq!(ParameterLayout::free(&p).len(), 202);
        let ign = Restrictions { ignorable: true, tied_blocks: vec![] };
        let p = ParameterSet::zeros(&d, &cfg, 7, &ign);
        assert_eq!(ParameterLayout::free(&p).len(), 226 - 24);
    }

    #[test]
    fn pack_unpack_round_trip_propagates_ties() {
        let d = ItemDesign::unidimensional(vec![3; 4], true);
        let cfg = LatentConfig::new(1, 1, 2, 2).unwrap();
        let r = Restrictions { ignorable: false, tied_blocks: vec![vec![1, 2]] };
        let p = ParameterSet::zeros(&d, &cfg, 1, &r);
        let layout = ParameterLayout::free(&p);
        let theta: Vec<f64> = (0..layout.len()).map(|k| k as f64 * 0.1).collect();
        let q = layout.unpack(&p, &theta);
        assert_eq!(layout.pack(&q), theta);
        assert_eq!(q.alpha[1], q.alpha[2]);
        assert_eq!(q.beta[1], q.beta[2]);
    }
}
