use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{fit_model, FitOptions, FitResult};
use crate::model::{Dataset, ItemDesign, LatentConfig, ModelSpec, Restrictions};
use crate::special::chi2_sf;

/// `-2 loglik + npar ln(n)`.
pub fn bic(loglik: f64, npar: usize, n: usize) -> f64 {
    -2.0 * loglik + npar as f64 * (n as f64).ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub loglik_full: f64,
    pub loglik_restricted: f64,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

pub fn lrt_from_logliks(loglik_full: f64, loglik_restricted: f64, df: usize) -> TestReport {
    let statistic = 2.0 * (loglik_full - loglik_restricted);
    TestReport { loglik_full, loglik_restricted, statistic, df, p_value: chi2_sf(statistic, df as f64) }
}

/// Likelihood-ratio test of `restricted` within `full`.
pub fn lrt(full: &FitResult, restricted: &FitResult) -> Result<TestReport> {
    if full.n != restricted.n {
        return Err(Error::NotNested(format!("fits use {} and {} subjects", full.n, restricted.n)));
    }
    if restricted.npar >= full.npar {
        return Err(Error::NotNested(format!(
            "restricted model has {} parameters, full model {}",
            restricted.npar, full.npar
        )));
    }
    Ok(lrt_from_logliks(full.loglik, restricted.loglik, full.npar - restricted.npar))
}

/// A test together with both fits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestedTest {
    pub report: TestReport,
    pub full: FitResult,
    pub restricted: FitResult,
}

/// Fits the restricted model first and then the full model, with the
/// restricted optimum added as a warm start so the full fit cannot end
/// below it.
fn nested(full_spec: &ModelSpec, restricted_spec: &ModelSpec, data: &Dataset, options: &FitOptions) -> Result<NestedTest> {
    let restricted = fit_model(restricted_spec, data, options, &[])?;
    let full = fit_model(full_spec, data, options, std::slice::from_ref(&restricted.params))?;
    let report = lrt(&full, &restricted)?;
    Ok(NestedTest { report, full, restricted })
}

/// Tests `gamma_U = 0` for every item.
pub fn test_ignorability(design: &ItemDesign, config: &LatentConfig, data: &Dataset, options: &FitOptions) -> Result<NestedTest> {
    let full = ModelSpec::new(design.clone(), *config)?;
    let restricted = full.clone().with_restrictions(Restrictions { ignorable: true, tied_blocks: Vec::new() })?;
    nested(&full, &restricted, data, options)
}

/// Tests whether the items of group `block` share one set of parameters.
pub fn test_group_homogeneity(
    design: &ItemDesign,
    config: &LatentConfig,
    data: &Dataset,
    block: &str,
    options: &FitOptions,
) -> Result<NestedTest> {
    let items = design.group_items(block);
    if items.len() < 2 {
        return Err(Error::InvalidOptions(format!("group `{block}` has fewer than two items")));
    }
    let full = ModelSpec::new(design.clone(), *config)?;
    let restricted = full.clone().with_restrictions(Restrictions { ignorable: false, tied_blocks: vec![items] })?;
    nested(&full, &restricted, data, options)
}
