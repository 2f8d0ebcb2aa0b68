//! The simulator checked against the enumeration oracle.

mod common;

use std::collections::HashMap;

use lcirt::model::{Dataset, ItemDesign, LatentConfig, ParameterSet, Restrictions};
use lcirt::simulate::{brute_force_pattern_probs_due, generate, CovariateSpec, MaskSpec, SimulationSpec, PatternTable};
use lcirt::special::chi2_sf;

fn small_model() -> (ItemDesign, LatentConfig, ParameterSet) {
    let design = ItemDesign::unidimensional(vec![3, 2, 3], true);
    let config = LatentConfig::new(1, 1, 2, 2).unwrap();
    let mut p = ParameterSet::zeros(&design, &config, 0, &Restrictions::default());
    p.u = vec![vec![-1.0, 1.2]];
    p.v = vec![vec![-0.8, 1.0]];
    p.phi = vec![vec![0.3]];
    p.psi = vec![vec![-0.4]];
    p.alpha = vec![1.0, 1.4, 0.7];
    p.beta = vec![vec![0.0, 1.1], vec![-0.3], vec![-0.5, 0.6]];
    p.gamma_u = vec![0.9, -0.5, 0.4];
    p.gamma_v = vec![1.0, 0.8, -1.1];
    p.delta = vec![0.0, 0.3, -0.4];
    (design, config, p)
}

fn pattern(data: &Dataset, i: usize) -> Vec<Option<u16>> {
    (0..data.m).map(|j| data.y(i, j).or(if data.r(i, j) == lcirt::model::Indicator::Skipped { Some(0) } else { None })).collect()
}

fn oracle_by_key(table: &PatternTable, data: &Dataset) -> HashMap<Vec<Option<u16>>, f64> {
    // probabilities keyed like `pattern`: category, 0 for skipped, None for not due
    let mut out = HashMap::new();
    for i in 0..data.n {
        out.entry(pattern(data, i)).or_insert_with(|| table.subject_prob(data, i));
    }
    out
}

#[test]
fn pattern_frequencies_fit_the_oracle() {
    let (design, config, p) = small_model();
    let n = 40_000;
    let spec = SimulationSpec { covariates: CovariateSpec::Columns(vec![]), mask: MaskSpec::AllDue };
    let data = generate(&p, &design, &config, n, &spec, 2024).unwrap().data;
    let table = brute_force_pattern_probs_due(&p, &design, &config, &[], &[true; 3]).unwrap();
    assert!((table.total() - 1.0).abs() < 1e-12);
    let mut counts: HashMap<Vec<Option<u16>>, usize> = HashMap::new();
    for i in 0..n {
        *counts.entry(pattern(&data, i)).or_default() += 1;
    }
    let probs = oracle_by_key(&table, &data);
    // binomial bands on every observed pattern
    for (key, &c) in &counts {
        let q = probs[key];
        let sd = (q * (1.0 - q) / n as f64).sqrt();
        assert!((c as f64 / n as f64 - q).abs() < 5.0 * sd + 1e-4, "{key:?}: {c} vs {q}");
    }
    // Pearson goodness of fit over all patterns; unobserved ones add n q
    let observed_mass: f64 = probs.values().sum();
    let mut stat: f64 = counts.iter().map(|(k, &c)| {
        let e = n as f64 * probs[k];
        (c as f64 - e).powi(2) / e
    }).sum();
    stat += n as f64 * (1.0 - observed_mass);
    let cells = table.probs.len();
    let p_value = chi2_sf(stat, (cells - 1) as f64);
    assert!(p_value > 1e-3, "stat {stat} on {} df, p {p_value}", cells - 1);
}

#[test]
fn alternatives_and_covariates_follow_their_distributions() {
    let t = common::six_item_truth();
    let n = 20_000;
    let spec = SimulationSpec { covariates: t.sim.covariates.clone(), mask: MaskSpec::Alternatives(vec![vec![1, 2], vec![3]]) };
    let sim = generate(&t.params, &t.design, &t.config, n, &spec, 5).unwrap();
    let due = |j: usize| (0..n).filter(|&i| sim.data.r(i, j) != lcirt::model::Indicator::StructuralMissing).count() as f64 / n as f64;
    let band = 4.0 * (0.25 / n as f64).sqrt();
    assert!((due(1) - 0.5).abs() < band);
    assert_eq!(due(1), due(2));
    assert!((due(3) + due(1) - 1.0).abs() < 1e-12);
    assert_eq!(due(0), 1.0);
    let ones = (0..n).filter(|&i| sim.data.x_row(i)[0] == 1.0).count() as f64 / n as f64;
    assert!((ones - 0.5).abs() < band);
    let mean: f64 = (0..n).map(|i| sim.data.x_row(i)[1]).sum::<f64>() / n as f64;
    assert!(mean.abs() < 4.0 / (n as f64).sqrt());
    // class frequencies against the averaged multinomial logits
    let avg = lcirt::inference::average_class_probs(&t.params, &sim.data);
    for h in 0..3 {
        let share = sim.class_u.iter().filter(|&&c| c == h).count() as f64 / n as f64;
        let sd = (avg.u[h] * (1.0 - avg.u[h]) / n as f64).sqrt();
        assert!((share - avg.u[h]).abs() < 5.0 * sd, "class {h}: {share} vs {}", avg.u[h]);
    }
}
