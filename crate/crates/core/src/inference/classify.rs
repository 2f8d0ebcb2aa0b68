use serde::{Deserialize, Serialize};

use crate::estimation::e_step;
use crate::model::{Dataset, ItemDesign, ParameterSet};

/// Posterior class memberships and MAP classes (0-based) per subject.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub map_u: Vec<usize>,
    pub map_v: Vec<usize>,
    pub post_u: Vec<Vec<f64>>,
    pub post_v: Vec<Vec<f64>>,
}

/// Index of the largest entry; ties go to the lowest index.
pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = k;
        }
    }
    best
}

pub fn posterior_classify(params: &ParameterSet, design: &ItemDesign, data: &Dataset) -> Classification {
    let w = e_step(params, design, data);
    let post_u: Vec<Vec<f64>> = (0..data.n).map(|i| w.marginal_u(i)).collect();
    let post_v: Vec<Vec<f64>> = (0..data.n).map(|i| w.marginal_v(i)).collect();
    Classification {
        map_u: post_u.iter().map(|p| argmax(p)).collect(),
        map_v: post_v.iter().map(|p| argmax(p)).collect(),
        post_u,
        post_v,
    }
}
