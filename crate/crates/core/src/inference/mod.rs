//! Post-fit analysis.

mod classify;
mod lrt;
mod predict;
mod se;
mod select;
mod standardize;

pub use classify::{posterior_classify, Classification};
pub use lrt::{bic, lrt, lrt_from_logliks, test_group_homogeneity, test_ignorability, NestedTest, TestReport};
pub use predict::{pattern_probability, predict_item_probs, AnswerGrid, ItemPrediction, PredictionTables};
pub use se::{delta_method, numerical_hessian, standard_errors, HessianReport, StandardErrors};
pub use select::{select_classes, SelectionGrid, SelectionRow};
pub use standardize::{average_class_probs, standardize, standardize_fit, AverageClassProbs, Moments};
