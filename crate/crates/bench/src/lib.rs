//! Fixtures shared by the benchmarks.

use lcirt::model::{Dataset, ItemDesign, LatentConfig, ParameterSet, Restrictions};
use lcirt::simulate::{generate, CovariateDist, CovariateSpec, MaskSpec, SimulationSpec};

pub struct Fixture {
    pub design: ItemDesign,
    pub config: LatentConfig,
    pub params: ParameterSet,
    pub data: Dataset,
}

/// `m` five-category items, `kU = 3`, `kV = 2`, one binary covariate and
/// `n` simulated subjects.
pub fn fixture(m: usize, n: usize, seed: u64) -> Fixture {
    let design = ItemDesign::unidimensional(vec![5; m], true);
    let config = LatentConfig::new(1, 1, 3, 2).expect("valid config");
    let mut p = ParameterSet::zeros(&design, &config, 1, &Restrictions::default());
    p.u = vec![vec![-1.5, 0.0, 1.5]];
    p.v = vec![vec![-1.0, 1.0]];
    p.phi = vec![vec![0.2, 0.4], vec![-0.3, 0.6]];
    p.psi = vec![vec![0.1, -0.4]];
    for j in 0..m {
        let shift = if j == 0 { 0.0 } else { -1.0 + 0.3 * (j % 4) as f64 };
        p.alpha[j] = if j == 0 { 1.0 } else { 0.8 + 0.1 * (j % 5) as f64 };
        p.beta[j] = (0..4).map(|k| shift + 0.8 * k as f64).collect();
        p.gamma_u[j] = 0.5 + 0.1 * (j % 3) as f64;
        p.gamma_v[j] = if j == 0 { 1.0 } else { 0.7 + 0.1 * (j % 4) as f64 };
        p.delta[j] = if j == 0 { 0.0 } else { -0.2 * (j % 3) as f64 };
    }
    let sim = SimulationSpec {
        covariates: CovariateSpec::Columns(vec![CovariateDist::Bernoulli { p: 0.5 }]),
        mask: MaskSpec::AllDue,
    };
    let data = generate(&p, &design, &config, n, &sim, seed).expect("valid fixture").data;
    Fixture { design, config, params: p, data }
}
