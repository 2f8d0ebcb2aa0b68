//! Generating models shared by the integration tests.
#![allow(dead_code)]

use lcirt::model::{ItemDesign, LatentConfig, ParameterSet, Restrictions};
use lcirt::simulate::{CovariateDist, CovariateSpec, MaskSpec, SimulationSpec};

pub struct Truth {
    pub design: ItemDesign,
    pub config: LatentConfig,
    pub params: ParameterSet,
    pub sim: SimulationSpec,
}

/// Six five-category items, `kU = 3`, `kV = 2`, two covariates.
pub fn six_item_truth() -> Truth {
    let design = ItemDesign::unidimensional(vec![5; 6], true);
    let config = LatentConfig::new(1, 1, 3, 2).unwrap();
    let mut p = ParameterSet::zeros(&design, &config, 2, &Restrictions::default());
    p.u = vec![vec![-1.5, 0.0, 1.5]];
    p.v = vec![vec![-1.0, 1.0]];
    p.phi = vec![vec![0.2, 0.5, -0.3], vec![-0.3, 0.4, 0.6]];
    p.psi = vec![vec![0.1, -0.4, 0.5]];
    p.alpha = vec![1.0, 1.2, 0.8, 1.5, 0.9, 1.1];
    let shifts = [0.0, -0.5, 0.3, 0.1, -0.2, 0.4];
    p.beta = (0..6)
        .map(|j| (0..4).map(|k| if j == 0 { 0.8 * k as f64 } else { -1.0 + 0.8 * k as f64 + shifts[j] }).collect())
        .collect();
    p.gamma_u = vec![0.8, 0.5, 1.0, 0.6, 0.7, 0.9];
    p.gamma_v = vec![1.0, 0.8, -0.6, 1.2, 0.5, 0.9];
    p.delta = vec![0.0, -0.5, -0.3, -0.8, 0.2, -0.6];
    let sim = SimulationSpec {
        covariates: CovariateSpec::Columns(vec![
            CovariateDist::Bernoulli { p: 0.5 },
            CovariateDist::Normal { mean: 0.0, sd: 1.0 },
        ]),
        mask: MaskSpec::AllDue,
    };
    Truth { design, config, params: p, sim }
}

/// Six three-category items, `kU = kV = 2`, one binary covariate, with a
/// common `gamma_U` on every item.
pub fn calibration_truth(gamma_u: f64) -> Truth {
    let design = ItemDesign::unidimensional(vec![3; 6], true);
    let config = LatentConfig::new(1, 1, 2, 2).unwrap();
    let mut p = ParameterSet::zeros(&design, &config, 1, &Restrictions::default());
    p.u = vec![vec![-1.0, 1.0]];
    p.v = vec![vec![-1.0, 1.0]];
    p.phi = vec![vec![0.0, 0.6]];
    p.psi = vec![vec![0.2, -0.5]];
    p.alpha = vec![1.0, 1.3, 0.9, 1.2, 0.8, 1.1];
    p.beta = vec![vec![0.0, 1.2], vec![-0.6, 0.6], vec![-0.2, 1.0], vec![-0.8, 0.4], vec![0.1, 1.3], vec![-0.4, 0.9]];
    p.gamma_u = vec![gamma_u; 6];
    p.gamma_v = vec![1.0, 0.8, -0.7, 1.2, 0.6, 0.9];
    p.delta = vec![0.0, -0.4, -0.2, -0.7, 0.3, -0.5];
    Truth { design, config, params: p, sim: SimulationSpec::default() }
}
