use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Indicator, ItemDesign, LatentConfig, ModelSpec, ParameterSet};
use crate::rng::{substream, DOMAIN_RESTARTS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitStrategy {
    /// Equally spaced support on `[-2, 2]`, zero logit coefficients, unit
    /// discriminations and thresholds from empirical quantiles.
    Deterministic,
    /// The deterministic start perturbed with seeded noise.
    Random,
}

impl FromStr for InitStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deterministic" => Ok(InitStrategy::Deterministic),
            "random" => Ok(InitStrategy::Random),
            other => Err(Error::UnknownStrategy(other.to_string())),
        }
    }
}

/// Standard deviation of the Gaussian noise added to coefficients by the
/// random strategy (variance 0.25).
const COEF_NOISE_SD: f64 = 0.5;

fn linspace(k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![0.0];
    }
    (0..k).map(|h| -2.0 + 4.0 * h as f64 / (k - 1) as f64).collect()
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Starting values for an unrestricted model.
pub fn init_params(
    design: &ItemDesign,
    config: &LatentConfig,
    data: &Dataset,
    strategy: InitStrategy,
    seed: u64,
) -> Result<ParameterSet> {
    let spec = ModelSpec::new(design.clone(), *config)?;
    Ok(init_for(&spec, data, strategy, seed, 0))
}

/// Starting values for restart `restart` of `spec`.
pub fn init_for(spec: &ModelSpec, data: &Dataset, strategy: InitStrategy, seed: u64, restart: u64) -> ParameterSet {
    let design = &spec.design;
    let config = &spec.config;
    let mut p = spec.zeros(data.n_cov);
    for row in p.u.iter_mut() {
        *row = linspace(config.k_u);
    }
    for row in p.v.iter_mut() {
        *row = linspace(config.k_v);
    }
    for j in 0..design.n_items() {
        let l = design.categories[j];
        let mut counts = vec![0.5; l];
        let (mut due, mut answered) = (1.0, 0.5);
        for i in 0..data.n {
            match data.r(i, j) {
                Indicator::StructuralMissing => {}
                Indicator::Skipped => due += 1.0,
                Indicator::Answered => {
                    due += 1.0;
                    answered += 1.0;
                    if let Some(y) = data.y(i, j) {
                        counts[(y as usize).clamp(1, l) - 1] += 1.0;
                    }
                }
            }
        }
        let total: f64 = counts.iter().sum();
        let mut tail = total;
        let mut beta = Vec::with_capacity(l - 1);
        for y in 2..=l {
            tail -= counts[y - 2];
            // Pr(Y >= y) = logistic(-beta_y) at the centre of the scale
            let b = -logit(tail / total);
            let floor = beta.last().map_or(f64::NEG_INFINITY, |&prev: &f64| prev + 1e-3);
            beta.push(b.max(floor));
        }
        if p.mask.beta2_fixed[j] {
            let shift = beta[0];
            beta.iter_mut().for_each(|b| *b -= shift);
        }
        p.beta[j] = beta;
        p.alpha[j] = 1.0;
        p.gamma_u[j] = 1.0;
        p.gamma_v[j] = 1.0;
        p.delta[j] = -logit(answered / due);
    }
    if strategy == InitStrategy::Random {
        let mut rng = substream(seed, DOMAIN_RESTARTS, restart);
        let noise = Normal::new(0.0, COEF_NOISE_SD).expect("valid sd");
        for row in p.u.iter_mut().chain(p.v.iter_mut()) {
            for x in row.iter_mut() {
                *x += rng.random_range(-1.0..1.0);
            }
            row.sort_by(f64::total_cmp);
        }
        for row in p.phi.iter_mut().chain(p.psi.iter_mut()) {
            for c in row.iter_mut() {
                *c += noise.sample(&mut rng);
            }
        }
        for j in 0..design.n_items() {
            p.alpha[j] += noise.sample(&mut rng);
            p.gamma_u[j] += noise.sample(&mut rng);
            p.gamma_v[j] += noise.sample(&mut rng);
            p.delta[j] += noise.sample(&mut rng);
            let shift = noise.sample(&mut rng);
            p.beta[j].iter_mut().for_each(|b| *b += shift);
        }
    }
    p.apply_constraints();
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Restrictions;

    fn small() -> (ItemDesign, LatentConfig, Dataset) {
        let d = ItemDesign::unidimensional(vec![3, 4], true);
        let cfg = LatentConfig::new(1, 1, 4, 2).unwrap();
        let mut data = Dataset::new(4, 2, 1);
        data.set(0, 0, Indicator::Answered, Some(1));
        data.set(1, 0, Indicator::Answered, Some(3));
        data.set(2, 1, Indicator::Answered, Some(2));
        data.set(3, 1, Indicator::Skipped, None);
        (d, cfg, data)
    }

    #[test]
    fn deterministic_spacing() {
        let (d, cfg, data) = small();
        let p = init_params(&d, &cfg, &data, InitStrategy::Deterministic, 1).unwrap();
        let expect = [-2.0, -2.0 / 3.0, 2.0 / 3.0, 2.0];
        for (a, b) in p.u[0].iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(p.phi.iter().flatten().all(|&c| c == 0.0));
        assert!(p.thresholds_ordered());
        assert_eq!(p.beta[0][0], 0.0);
    }

    #[test]
    fn random_is_seeded() {
        let (d, cfg, data) = small();
        let a = init_params(&d, &cfg, &data, InitStrategy::Random, 9).unwrap();
        let b = init_params(&d, &cfg, &data, InitStrategy::Random, 9).unwrap();
        let c = init_params(&d, &cfg, &data, InitStrategy::Random, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.u[0].windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(a.alpha[0], 1.0);
    }

    #[test]
    fn unknown_strategy() {
        assert!(matches!("sobol".parse::<InitStrategy>(), Err(Error::UnknownStrategy(_))));
        assert_eq!("random".parse::<InitStrategy>().unwrap(), InitStrategy::Random);
    }

    #[test]
    fn restricted_start_respects_mask() {
        let (d, cfg, data) = small();
        let spec = ModelSpec::new(d, cfg)
            .unwrap()
            .with_restrictions(Restrictions { ignorable: true, tied_blocks: vec![] })
            .unwrap();
        let p = init_for(&spec, &data, InitStrategy::Random, 3, 2);
        assert!(p.gamma_u.iter().all(|&g| g == 0.0));
    }
}
