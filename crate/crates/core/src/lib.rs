//! Latent-class item response models with non-ignorable missingness.
//!
//! Each subject has a discrete ability `U` and a discrete answering
//! tendency `V`, with class membership driven by covariates through
//! multinomial logits. Ordinal responses follow a graded response model in
//! `U`; whether an item is answered follows a two-parameter logistic model
//! in `U` and `V`. Items can also be missing by design.
//!
//! The crate covers likelihood evaluation, EM estimation with restarts,
//! standardization, standard errors, BIC, likelihood-ratio tests,
//! prediction, classification and simulation.

pub mod error;
pub mod estimation;
pub mod inference;
pub mod layout;
pub mod measurement;
pub mod model;
pub mod numeric;
pub mod rng;
pub mod simulate;
pub mod special;
pub mod structural;

pub use error::{Error, Result};
pub use estimation::{
    e_step, fit, fit_model, init_params, loglik_gradient, m_step, marginal_loglik, FitOptions, FitResult, InitStrategy,
    PosteriorWeights,
};
pub use inference::{
    average_class_probs, bic, lrt, posterior_classify, predict_item_probs, select_classes, standard_errors, standardize,
    test_group_homogeneity, test_ignorability, TestReport,
};
pub use layout::ParameterLayout;
pub use measurement::{grm_category, grm_cumulative, indicator_prob, subject_class_prob, CategoryDistribution};
pub use model::{
    count_free_parameters, validate_design, Dataset, Indicator, ItemDesign, LatentConfig, ModelSpec, ParameterSet,
    Restrictions, ValidationReport,
};
pub use simulate::{brute_force_pattern_probs, generate, SimulationSpec};
pub use structural::{class_weights_u, class_weights_v, ClassWeights};
