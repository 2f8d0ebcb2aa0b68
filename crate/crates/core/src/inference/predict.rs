use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{grm_category, indicator_prob};
use crate::model::{ItemDesign, ParameterSet};

/// Answering probabilities over a `u x v` grid, with the changes across the
/// extreme `u` (at the reference `v`) and the extreme `v` (at the reference
/// `u`). The reference value is 0 when listed, otherwise the first entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnswerGrid {
    /// `probs[a][b]` at `u_values[a]`, `v_values[b]`.
    pub probs: Vec<Vec<f64>>,
    pub range_u: f64,
    pub range_v: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemPrediction {
    pub name: String,
    pub group: Option<String>,
    /// Category distribution at each `u` value.
    pub categories: Vec<Vec<f64>>,
    /// `Pr(Y >= pass_category)` at each `u` value.
    pub tail: Vec<f64>,
    /// Largest minus smallest tail probability.
    pub tail_range: f64,
    pub answer: AnswerGrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionTables {
    pub u_values: Vec<f64>,
    pub v_values: Vec<f64>,
    pub pass_category: usize,
    pub items: Vec<ItemPrediction>,
}

fn reference_index(values: &[f64]) -> usize {
    values.iter().position(|&x| x == 0.0).unwrap_or(0)
}

fn extreme_indices(values: &[f64]) -> (usize, usize) {
    let mut lo = 0;
    let mut hi = 0;
    for (k, &x) in values.iter().enumerate() {
        if x < values[lo] {
            lo = k;
        }
        if x > values[hi] {
            hi = k;
        }
    }
    (lo, hi)
}

/// Predicted category, passing and answering probabilities at the given
/// latent values. With standardized parameters the values are in SD units.
/// Every dimension is set to the same value; `v_values` is ignored when the
/// V-side is off.
pub fn predict_item_probs(
    params: &ParameterSet,
    design: &ItemDesign,
    u_values: &[f64],
    v_values: &[f64],
    pass_category: usize,
) -> Result<PredictionTables> {
    if u_values.is_empty() {
        return Err(Error::InvalidOptions("no u values".into()));
    }
    let v_values: Vec<f64> = if params.v_enabled() {
        if v_values.is_empty() {
            return Err(Error::InvalidOptions("no v values".into()));
        }
        v_values.to_vec()
    } else {
        vec![0.0]
    };
    let s = params.u.len();
    let t = params.v.len();
    let (ulo, uhi) = extreme_indices(u_values);
    let (vlo, vhi) = extreme_indices(&v_values);
    let (uref, vref) = (reference_index(u_values), reference_index(&v_values));
    let mut items = Vec::with_capacity(design.n_items());
    for j in 0..design.n_items() {
        let l = design.categories[j];
        if !(1..=l).contains(&pass_category) {
            return Err(Error::CategoryOutOfRange { item: j + 1, y: pass_category, max: l });
        }
        let categories: Vec<Vec<f64>> = u_values.iter().map(|&u| grm_category(j, &vec![u; s], params, design).probs).collect();
        let tail: Vec<f64> = categories.iter().map(|p| p[pass_category - 1..].iter().sum()).collect();
        let tail_max = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tail_min = tail.iter().copied().fold(f64::INFINITY, f64::min);
        let probs: Vec<Vec<f64>> = u_values
            .iter()
            .map(|&u| v_values.iter().map(|&v| indicator_prob(j, &vec![u; s], &vec![v; t], params, design)).collect())
            .collect();
        let range_u = probs[uhi][vref] - probs[ulo][vref];
        let range_v = probs[uref][vhi] - probs[uref][vlo];
        items.push(ItemPrediction {
            name: design.names[j].clone(),
            group: design.groups[j].clone(),
            categories,
            tail,
            tail_range: tail_max - tail_min,
            answer: AnswerGrid { probs, range_u, range_v },
        });
    }
    Ok(PredictionTables { u_values: u_values.to_vec(), v_values, pass_category, items })
}

/// Probability of a pass/fail pattern over conditionally independent items
/// given the per-item passing probabilities.
pub fn pattern_probability(pass_probs: &[f64], passed: &[bool]) -> Result<f64> {
    if pass_probs.len() != passed.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} probabilities for a pattern of {}",
            pass_probs.len(),
            passed.len()
        )));
    }
    Ok(pass_probs.iter().zip(passed).map(|(&p, &ok)| if ok { p } else { 1.0 - p }).product())
}
