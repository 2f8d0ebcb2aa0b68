use super::blocks::{pack, project, unpack, BlockId, MStepContext};
use super::estep::PosteriorWeights;
use super::newton::{ascend, AscentProblem, Direction};
use crate::error::{Error, Result};
use crate::model::{Dataset, ItemDesign, ParameterSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MStepOptions {
    /// Newton iterations per block per call.
    pub newton_steps: usize,
    /// Use scaled gradient steps instead of Newton steps.
    pub gradient_only: bool,
}

impl Default for MStepOptions {
    fn default() -> Self {
        MStepOptions { newton_steps: 2, gradient_only: false }
    }
}

/// One generalized M-step: block-wise ascent of the expected complete-data
/// log-likelihood. The result never has a lower objective than `params`.
pub fn m_step(weights: &PosteriorWeights, params: &ParameterSet, design: &ItemDesign, data: &Dataset) -> Result<ParameterSet> {
    m_step_with(weights, params, design, data, MStepOptions::default())
}

pub fn m_step_with(
    weights: &PosteriorWeights,
    params: &ParameterSet,
    design: &ItemDesign,
    data: &Dataset,
    options: MStepOptions,
) -> Result<ParameterSet> {
    let ctx = MStepContext::new(weights, params, design, data);
    let mut current = params.clone();
    for id in ctx.blocks(params) {
        let updated = update_block(&ctx, id, &current, options)?;
        unpack(id, &updated, &mut current);
    }
    Ok(current)
}

fn update_block(ctx: &MStepContext<'_>, id: BlockId, base: &ParameterSet, options: MStepOptions) -> Result<Vec<f64>> {
    let with = |x: &[f64]| {
        let mut p = base.clone();
        unpack(id, x, &mut p);
        p
    };
    let problem = AscentProblem {
        value: |x: &[f64]| ctx.value(id, &with(x)),
        derivatives: |x: &[f64], want_hessian| ctx.derivatives(id, &with(x), want_hessian),
        project: |x: &mut [f64]| {
            project(id, x, base);
        },
    };
    let x0 = pack(id, base);
    let direction = if options.gradient_only { Direction::Gradient } else { Direction::Newton };
    let steps = if options.gradient_only { options.newton_steps.max(20) } else { options.newton_steps };
    ascend(&problem, &x0, steps, direction).ok_or_else(|| Error::SingularUpdate(format!("{id:?}")))
}
