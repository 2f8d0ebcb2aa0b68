use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::blocks::DISCRIMINATION_CAP;
use super::estep::posterior_pass;
use super::init::{init_for, InitStrategy};
use super::mstep::{m_step_with, MStepOptions};
use crate::error::{Error, Result};
use crate::layout::ParameterLayout;
use crate::model::{validate_design, Dataset, ItemDesign, LatentConfig, ModelSpec, ParameterSet};
use crate::rng::DEFAULT_SEED;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Stop when the absolute log-likelihood change falls below this.
    pub tol: f64,
    /// Total number of runs: the first uses `init_strategy`, the rest are
    /// random starts.
    pub n_restarts: usize,
    pub seed: u64,
    pub init_strategy: InitStrategy,
    /// Newton iterations per block per M-step.
    pub newton_steps: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 2000,
            tol: 1e-8,
            n_restarts: 10,
            seed: DEFAULT_SEED,
            init_strategy: InitStrategy::Deterministic,
            newton_steps: 2,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidOptions("max_iter must be positive".into()));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidOptions("tol must be positive and finite".into()));
        }
        if self.n_restarts == 0 {
            return Err(Error::InvalidOptions("at least one restart is required".into()));
        }
        if self.newton_steps == 0 {
            return Err(Error::InvalidOptions("newton_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Where a run started from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    Deterministic,
    Random,
    Warm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub start: StartKind,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub params: ParameterSet,
    pub loglik: f64,
    /// Log-likelihood before every M-step of the winning run, ending with
    /// the final value.
    pub trace: Vec<f64>,
    pub npar: usize,
    pub n: usize,
    pub converged: bool,
    pub iterations: usize,
    pub seed: u64,
    /// Index of the winning run.
    pub restart: usize,
    pub runs: Vec<RunSummary>,
    /// Discrimination parameters sitting at the cap.
    pub capped: Vec<String>,
    pub options: FitOptions,
}

struct Run {
    params: ParameterSet,
    loglik: f64,
    trace: Vec<f64>,
    converged: bool,
    iterations: usize,
}

/// Fits an unrestricted model.
pub fn fit(design: &ItemDesign, config: &LatentConfig, data: &Dataset, options: &FitOptions) -> Result<FitResult> {
    let spec = ModelSpec::new(design.clone(), *config)?;
    fit_model(&spec, data, options, &[])
}

/// Fits `spec`, running the configured restarts plus one run from each warm
/// start (re-targeted to the model's constraints). Best log-likelihood wins;
/// ties go to the earliest run.
pub fn fit_model(spec: &ModelSpec, data: &Dataset, options: &FitOptions, warm_starts: &[ParameterSet]) -> Result<FitResult> {
    options.validate()?;
    validate_design(&spec.design, &spec.config, data).into_result()?;
    for w in warm_starts {
        w.check_shape(&spec.design, &spec.config, data.n_cov)?;
    }
    let mut starts: Vec<(StartKind, ParameterSet)> = (0..options.n_restarts)
        .map(|r| {
            let strategy = if r == 0 { options.init_strategy } else { InitStrategy::Random };
            let kind = match strategy {
                InitStrategy::Deterministic => StartKind::Deterministic,
                InitStrategy::Random => StartKind::Random,
            };
            (kind, init_for(spec, data, strategy, options.seed, r as u64))
        })
        .collect();
    starts.extend(warm_starts.iter().map(|w| (StartKind::Warm, spec.conform(w))));

    let runs: Vec<Run> = starts.par_iter().map(|(_, p0)| run_em(p0, &spec.design, data, options)).collect();

    let mut best = 0;
    for (k, r) in runs.iter().enumerate() {
        if r.loglik > runs[best].loglik {
            best = k;
        }
    }
    let summaries = runs
        .iter()
        .zip(&starts)
        .map(|(r, (kind, _))| RunSummary { start: *kind, loglik: r.loglik, iterations: r.iterations, converged: r.converged })
        .collect();
    let winner = runs.into_iter().nth(best).expect("at least one run");
    let mut params = winner.params;
    params.canonicalize();
    let layout = ParameterLayout::free(&params);
    let capped = layout
        .slots
        .iter()
        .filter(|s| s.is_discrimination() && s.get(&params).abs() >= DISCRIMINATION_CAP)
        .map(|s| s.label(&spec.design))
        .collect();
    Ok(FitResult {
        spec: spec.clone(),
        params,
        loglik: winner.loglik,
        trace: winner.trace,
        npar: layout.len(),
        n: data.n,
        converged: winner.converged,
        iterations: winner.iterations,
        seed: options.seed,
        restart: best,
        runs: summaries,
        capped,
        options: options.clone(),
    })
}

fn run_em(start: &ParameterSet, design: &ItemDesign, data: &Dataset, options: &FitOptions) -> Run {
    let mut params = start.clone();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let newton = MStepOptions { newton_steps: options.newton_steps, gradient_only: false };
    let gradient = MStepOptions { gradient_only: true, ..newton };
    let (mut weights, mut ll) = posterior_pass(&params, design, data, true);
    trace.push(ll);
    while iterations < options.max_iter {
        let w = weights.take().expect("weights requested");
        let next = match m_step_with(&w, &params, design, data, newton) {
            Ok(p) => p,
            Err(_) => match m_step_with(&w, &params, design, data, gradient) {
                Ok(p) => p,
                Err(_) => break,
            },
        };
        iterations += 1;
        let (nw, nll) = posterior_pass(&next, design, data, true);
        params = next;
        weights = nw;
        let change = nll - ll;
        ll = nll;
        trace.push(ll);
        if change.abs() < options.tol {
            converged = true;
            break;
        }
    }
    Run { params, loglik: ll, trace, converged, iterations }
}
