//! EM estimation of the discrete marginal likelihood.

mod blocks;
mod estep;
mod fit;
mod init;
mod mstep;
mod newton;

pub use blocks::{BlockId, MStepContext, DISCRIMINATION_CAP};
pub use estep::{e_step, marginal_loglik, subject_logliks, PosteriorWeights};
pub use fit::{fit, fit_model, FitOptions, FitResult, RunSummary, StartKind};
pub use init::{init_for, init_params, InitStrategy};
pub use mstep::{m_step, m_step_with, MStepOptions};

pub use blocks::{pack as pack_block, unpack as unpack_block};

use crate::layout::ParameterLayout;
use crate::model::{Dataset, ItemDesign, ParameterSet};

/// Score of the marginal log-likelihood with respect to the free
/// parameters, in `layout` order (Fisher identity).
pub fn loglik_gradient(params: &ParameterSet, layout: &ParameterLayout, design: &ItemDesign, data: &Dataset) -> Vec<f64> {
    let weights = e_step(params, design, data);
    MStepContext::new(&weights, params, design, data).natural_gradient(params, layout)
}
