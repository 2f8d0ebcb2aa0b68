//! Synthetic data from the model's generative process, and an enumeration
//! oracle for pattern probabilities that shares no code with the
//! likelihood routines.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{grm_category, indicator_prob};
use crate::model::{Dataset, Indicator, ItemDesign, LatentConfig, ParameterSet};
use crate::rng::{substream, DOMAIN_SUBJECTS};
use crate::structural::class_weights;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CovariateDist {
    Bernoulli { p: f64 },
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, sd: f64 },
    /// Factor with the given level probabilities, dummy-coded against the
    /// first level (`probs.len() - 1` columns).
    Categorical { probs: Vec<f64> },
}

impl CovariateDist {
    /// Number of design-matrix columns produced.
    pub fn width(&self) -> usize {
        match self {
            CovariateDist::Categorical { probs } => probs.len().saturating_sub(1),
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateSpec {
    /// Independent columns drawn per subject.
    Columns(Vec<CovariateDist>),
    /// Row-major `n x C` matrix used as is.
    Fixed { n_cov: usize, values: Vec<f64> },
}

impl Default for CovariateSpec {
    fn default() -> Self {
        CovariateSpec::Columns(vec![CovariateDist::Bernoulli { p: 0.5 }])
    }
}

impl CovariateSpec {
    pub fn n_cov(&self) -> usize {
        match self {
            CovariateSpec::Columns(c) => c.iter().map(CovariateDist::width).sum(),
            CovariateSpec::Fixed { n_cov, .. } => *n_cov,
        }
    }
}

/// Which items are due for each subject.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSpec {
    /// Every item is due.
    #[default]
    AllDue,
    /// Each subject is assigned uniformly to one of the item sets; items in
    /// the other sets are structurally missing. Items in no set are due.
    Alternatives(Vec<Vec<usize>>),
    /// Row-major `n x m` due flags.
    Fixed(Vec<bool>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub covariates: CovariateSpec,
    pub mask: MaskSpec,
}

/// A simulated dataset together with the latent classes that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Simulated {
    pub data: Dataset,
    pub class_u: Vec<usize>,
    pub class_v: Vec<usize>,
}

fn check_spec(params: &ParameterSet, design: &ItemDesign, config: &LatentConfig, n: usize, spec: &SimulationSpec) -> Result<()> {
    let c = spec.covariates.n_cov();
    params
        .check_shape(design, config, c)
        .map_err(|e| Error::InvalidSpec(format!("parameters do not match the design: {e}")))?;
    if !params.thresholds_ordered() {
        return Err(Error::InvalidSpec("thresholds must be nondecreasing".into()));
    }
    if n == 0 {
        return Err(Error::InvalidSpec("n must be positive".into()));
    }
    match &spec.covariates {
        CovariateSpec::Columns(cols) => {
            for (k, d) in cols.iter().enumerate() {
                let ok = match d {
                    CovariateDist::Bernoulli { p } => (0.0..=1.0).contains(p),
                    CovariateDist::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
                    CovariateDist::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && *sd > 0.0,
                    CovariateDist::Categorical { probs } => {
                        probs.len() >= 2
                            && probs.iter().all(|p| p.is_finite() && *p >= 0.0)
                            && (probs.iter().sum::<f64>() - 1.0).abs() < 1e-9
                    }
                };
                if !ok {
                    return Err(Error::InvalidSpec(format!("covariate {} has an invalid distribution", k + 1)));
                }
            }
        }
        CovariateSpec::Fixed { n_cov, values } => {
            if values.len() != n * n_cov {
                return Err(Error::InvalidSpec(format!("fixed covariates need {} values, got {}", n * n_cov, values.len())));
            }
        }
    }
    let m = design.n_items();
    match &spec.mask {
        MaskSpec::AllDue => {}
        MaskSpec::Alternatives(sets) => {
            if sets.is_empty() || sets.iter().any(|s| s.is_empty()) {
                return Err(Error::InvalidSpec("alternatives must be non-empty item sets".into()));
            }
            if sets.iter().flatten().any(|&j| j >= m) {
                return Err(Error::InvalidSpec("alternative refers to an unknown item".into()));
            }
        }
        MaskSpec::Fixed(due) => {
            if due.len() != n * m {
                return Err(Error::InvalidSpec(format!("fixed mask needs {} flags, got {}", n * m, due.len())));
            }
            if due.chunks(m).any(|row| !row.iter().any(|&d| d)) {
                return Err(Error::InvalidSpec("every subject needs at least one due item".into()));
            }
        }
    }
    Ok(())
}

fn draw_index(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let r: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if r < acc {
            return k;
        }
    }
    probs.len() - 1
}

struct SubjectDraw {
    x: Vec<f64>,
    cells: Vec<(Indicator, Option<u16>)>,
    hu: usize,
    hv: usize,
}

/// Draws `n` subjects. Subject `i` uses its own random stream, so the
/// result depends only on `seed`.
pub fn generate(
    params: &ParameterSet,
    design: &ItemDesign,
    config: &LatentConfig,
    n: usize,
    spec: &SimulationSpec,
    seed: u64,
) -> Result<Simulated> {
    check_spec(params, design, config, n, spec)?;
    let m = design.n_items();
    let c = spec.covariates.n_cov();
    let draws: Vec<SubjectDraw> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, DOMAIN_SUBJECTS, i as u64);
            let x: Vec<f64> = match &spec.covariates {
                CovariateSpec::Columns(cols) => {
                    let mut x = Vec::with_capacity(c);
                    for d in cols {
                        match d {
                            CovariateDist::Bernoulli { p } => x.push(f64::from(u8::from(rng.random::<f64>() < *p))),
                            CovariateDist::Uniform { low, high } => x.push(rng.random_range(*low..*high)),
                            CovariateDist::Normal { mean, sd } => {
                                x.push(Normal::new(*mean, *sd).expect("checked").sample(&mut rng))
                            }
                            CovariateDist::Categorical { probs } => {
                                let level = draw_index(&mut rng, probs);
                                x.extend((1..probs.len()).map(|l| f64::from(u8::from(l == level))));
                            }
                        }
                    }
                    x
                }
                CovariateSpec::Fixed { values, .. } => values[i * c..(i + 1) * c].to_vec(),
            };
            let due: Vec<bool> = match &spec.mask {
                MaskSpec::AllDue => vec![true; m],
                MaskSpec::Alternatives(sets) => {
                    let pick = rng.random_range(0..sets.len());
                    let mut due = vec![true; m];
                    for (k, set) in sets.iter().enumerate() {
                        if k != pick {
                            set.iter().for_each(|&j| due[j] = false);
                        }
                    }
                    set_due(&mut due, &sets[pick]);
                    due
                }
                MaskSpec::Fixed(flags) => flags[i * m..(i + 1) * m].to_vec(),
            };
            let lambda = class_weights(&x, &params.phi).expect("checked shape");
            let pi = class_weights(&x, &params.psi).expect("checked shape");
            let hu = draw_index(&mut rng, &lambda);
            let hv = draw_index(&mut rng, &pi);
            let uh = params.u_point(hu);
            let vh = params.v_point(hv);
            let cells = (0..m)
                .map(|j| {
                    if !due[j] {
                        return (Indicator::StructuralMissing, None);
                    }
                    let q = indicator_prob(j, &uh, &vh, params, design);
                    if rng.random::<f64>() < q {
                        let probs = grm_category(j, &uh, params, design).probs;
                        (Indicator::Answered, Some(draw_index(&mut rng, &probs) as u16 + 1))
                    } else {
                        (Indicator::Skipped, None)
                    }
                })
                .collect();
            SubjectDraw { x, cells, hu, hv }
        })
        .collect();
    let mut data = Dataset::new(n, m, c);
    let mut class_u = Vec::with_capacity(n);
    let mut class_v = Vec::with_capacity(n);
    for (i, d) in draws.into_iter().enumerate() {
        data.x[i * c..(i + 1) * c].copy_from_slice(&d.x);
        for (j, (r, y)) in d.cells.into_iter().enumerate() {
            data.set(i, j, r, y);
        }
        class_u.push(d.hu);
        class_v.push(d.hv);
    }
    Ok(Simulated { data, class_u, class_v })
}

fn set_due(due: &mut [bool], set: &[usize]) {
    for &j in set {
        due[j] = true;
    }
}

/// One response cell: `None` for a skipped item, `Some(y)` for category `y`.
pub type Cell = Option<u16>;

/// Probabilities of every response pattern over the due items.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternTable {
    /// Items the patterns range over.
    pub items: Vec<usize>,
    pub probs: HashMap<Vec<Cell>, f64>,
}

impl PatternTable {
    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    /// Probability of subject `i`'s observed pattern.
    pub fn subject_prob(&self, data: &Dataset, i: usize) -> f64 {
        let key: Vec<Cell> = self.items.iter().map(|&j| data.y(i, j)).collect();
        self.probs.get(&key).copied().unwrap_or(0.0)
    }
}

/// Largest number of items the enumeration accepts.
pub const MAX_ENUM_ITEMS: usize = 6;
const MAX_PATTERNS: usize = 1_000_000;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Enumerates every pattern of the items in `due` for a subject with
/// covariates `x`, multiplying probabilities directly per class pair.
pub fn brute_force_pattern_probs_due(
    params: &ParameterSet,
    design: &ItemDesign,
    config: &LatentConfig,
    x: &[f64],
    due: &[bool],
) -> Result<PatternTable> {
    let items: Vec<usize> = (0..design.n_items()).filter(|&j| due.get(j).copied().unwrap_or(false)).collect();
    if design.n_items() > MAX_ENUM_ITEMS {
        return Err(Error::InstanceTooLarge(format!("{} items (at most {MAX_ENUM_ITEMS})", design.n_items())));
    }
    let count: usize = items.iter().map(|&j| design.categories[j] + 1).product();
    if count > MAX_PATTERNS {
        return Err(Error::InstanceTooLarge(format!("{count} patterns")));
    }
    // plain softmax with the first class as reference
    let softmax = |coefs: &[Vec<f64>], k: usize| -> Vec<f64> {
        let mut e = vec![1.0];
        for row in coefs.iter().take(k - 1) {
            let eta = row[0] + row[1..].iter().zip(x).map(|(b, xv)| b * xv).sum::<f64>();
            e.push(eta.exp());
        }
        let s: f64 = e.iter().sum();
        e.iter().map(|v| v / s).collect()
    };
    let lambda = softmax(&params.phi, config.k_u);
    let pi = softmax(&params.psi, config.k_v);
    // per class pair and item: probability of each cell value
    let mut cell_probs = vec![vec![Vec::new(); items.len()]; config.k_u * config.k_v];
    for hu in 0..config.k_u {
        for hv in 0..config.k_v {
            for (slot, &j) in items.iter().enumerate() {
                let su: f64 = (0..config.s).filter(|&s| design.z_u[j][s]).map(|s| params.u[s][hu]).sum();
                let sv: f64 = if params.v_enabled() {
                    (0..config.t).filter(|&t| design.z_v[j][t]).map(|t| params.v[t][hv]).sum()
                } else {
                    0.0
                };
                let vterm = if params.v_enabled() { params.gamma_v[j] * sv } else { 0.0 };
                let q = sigmoid(params.gamma_u[j] * su + vterm - params.delta[j]);
                let l = design.categories[j];
                let cum: Vec<f64> = (1..=l + 1)
                    .map(|y| {
                        if y == 1 {
                            1.0
                        } else if y == l + 1 {
                            0.0
                        } else {
                            sigmoid(params.alpha[j] * su - params.beta[j][y - 2])
                        }
                    })
                    .collect();
                let mut probs = vec![1.0 - q];
                probs.extend((0..l).map(|k| q * (cum[k] - cum[k + 1])));
                cell_probs[hu * config.k_v + hv][slot] = probs;
            }
        }
    }
    let mut table = HashMap::with_capacity(count);
    let mut idx = vec![0usize; items.len()];
    loop {
        let key: Vec<Cell> = idx.iter().map(|&k| if k == 0 { None } else { Some(k as u16) }).collect();
        let mut total = 0.0;
        for hu in 0..config.k_u {
            for hv in 0..config.k_v {
                let mut prod = lambda[hu] * pi[hv];
                for (slot, &k) in idx.iter().enumerate() {
                    prod *= cell_probs[hu * config.k_v + hv][slot][k];
                }
                total += prod;
            }
        }
        table.insert(key, total);
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == items.len() {
                return Ok(PatternTable { items, probs: table });
            }
            idx[pos] += 1;
            if idx[pos] <= design.categories[items[pos]] {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Enumeration over all items.
pub fn brute_force_pattern_probs(
    params: &ParameterSet,
    design: &ItemDesign,
    config: &LatentConfig,
    x: &[f64],
) -> Result<PatternTable> {
    brute_force_pattern_probs_due(params, design, config, x, &vec![true; design.n_items()])
}

/// Log-likelihood of `data` computed from pattern enumeration.
pub fn brute_force_loglik(params: &ParameterSet, design: &ItemDesign, config: &LatentConfig, data: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..data.n {
        let due: Vec<bool> = (0..data.m).map(|j| data.r(i, j) != Indicator::StructuralMissing).collect();
        let table = brute_force_pattern_probs_due(params, design, config, data.x_row(i), &due)?;
        total += table.subject_prob(data, i).ln();
    }
    Ok(total)
}
