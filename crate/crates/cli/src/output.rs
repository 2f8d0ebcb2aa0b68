//! Result files. JSON results carry a `config` object holding the design
//! text, input digests, options and seed; CSV tables carry the same object
//! on a leading `# config:` comment line.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use lcirt::estimation::{marginal_loglik, FitResult, RunSummary};
use lcirt::inference::{bic, StandardErrors};
use lcirt::layout::ParameterLayout;
use lcirt::model::ParameterSet;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Table;
use crate::design::Design;
use crate::error::{CliError, CliResult, Location};

pub const TOOL: &str = "lcirt";

/// An input file as recorded in results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

impl InputRecord {
    pub fn of(path: &Path) -> CliResult<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Ok(InputRecord { path: path.display().to_string(), sha256: sha256_hex(&bytes) })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything needed to rerun a command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Full text of the design file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design: Option<String>,
    pub inputs: BTreeMap<String, InputRecord>,
    pub options: serde_json::Value,
}

impl RunConfig {
    pub fn new(command: &str, seed: u64, threads: Option<usize>) -> Self {
        RunConfig {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            threads,
            design: None,
            inputs: BTreeMap::new(),
            options: serde_json::Value::Null,
        }
    }
}

/// One parameter with its standard errors. Missing values are `null`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeRow {
    pub label: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub fixed: bool,
    pub std_estimate: Option<f64>,
    pub std_se: Option<f64>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn se_rows(se: &StandardErrors) -> Vec<SeRow> {
    (0..se.labels.len())
        .map(|k| SeRow {
            label: se.labels[k].clone(),
            estimate: se.estimates[k],
            se: if se.failed[k] { None } else { finite(se.se[k]) },
            fixed: se.fixed[k],
            std_estimate: se.std_estimates.as_ref().and_then(|v| finite(v[k])),
            std_se: se.std_se.as_ref().and_then(|v| finite(v[k])),
        })
        .collect()
}

/// Summary of one fitted model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub k_u: usize,
    pub k_v: usize,
    pub loglik: f64,
    pub npar: usize,
    pub n: usize,
    pub bic: f64,
    pub converged: bool,
    pub iterations: usize,
    pub restart: usize,
    pub runs: Vec<RunSummary>,
    /// Discrimination parameters at the cap.
    pub capped: Vec<String>,
}

impl FitSummary {
    pub fn of(fit: &FitResult) -> Self {
        FitSummary {
            k_u: fit.spec.config.k_u,
            k_v: fit.spec.config.k_v,
            loglik: fit.loglik,
            npar: fit.npar,
            n: fit.n,
            bic: bic(fit.loglik, fit.npar, fit.n),
            converged: fit.converged,
            iterations: fit.iterations,
            restart: fit.restart,
            runs: fit.runs.clone(),
            capped: fit.capped.clone(),
        }
    }
}

/// Contents of `fit.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub config: RunConfig,
    pub summary: FitSummary,
    pub trace: Vec<f64>,
    pub params: ParameterSet,
    /// Parameters on the standardized latent scale; absent when a latent
    /// variable has no spread.
    pub standardized: Option<ParameterSet>,
    pub standard_errors: Vec<SeRow>,
    pub hessian_max_asymmetry: f64,
    pub hessian_positive_definite: bool,
}

/// A reloaded fit after its self-check.
pub struct LoadedFit {
    pub output: FitOutput,
    pub design: Design,
    /// Whether the log-likelihood was recomputed against the fit data.
    pub loglik_verified: bool,
}

fn mismatch(path: &Path, message: String) -> CliError {
    CliError::at("fit", message, Location::file(path))
}

/// Reads `fit.json` and checks it against the library: parameter shapes,
/// the free-parameter count and the BIC always; the log-likelihood as well
/// when `table` is the dataset the fit was computed on.
pub fn load_fit(path: &Path, table: Option<(&Path, &Table)>) -> CliResult<LoadedFit> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut output: FitOutput = serde_json::from_str(&text).map_err(|e| {
        let mut loc = Location::file(path);
        loc.line = Some(e.line());
        loc.column = Some(e.column());
        CliError::at("fit", format!("not a fit result: {e}"), loc)
    })?;
    if output.config.command != "fit" {
        return Err(mismatch(path, format!("file was written by `{}`, not `fit`", output.config.command)));
    }
    let design_text = output.config.design.clone().ok_or_else(|| mismatch(path, "fit result has no design".into()))?;
    let design = Design::parse(&design_text, path)?;
    let spec = design.spec_for(output.summary.k_u, output.summary.k_v)?;
    // the constraint mask is not serialized
    output.params.mask = spec.mask();
    if let Some(p) = output.standardized.as_mut() {
        p.mask = spec.mask();
    }
    let s = &output.summary;
    output
        .params
        .check_shape(&spec.design, &spec.config, design.n_cov())
        .map_err(|e| mismatch(path, format!("parameters do not match the design: {e}")))?;
    let npar = ParameterLayout::free(&output.params).len();
    if npar != s.npar {
        return Err(mismatch(path, format!("npar is {} but the parameters have {npar} free entries", s.npar)));
    }
    let expect_bic = bic(s.loglik, s.npar, s.n);
    if (expect_bic - s.bic).abs() > 1e-6 * expect_bic.abs().max(1.0) {
        return Err(mismatch(path, format!("BIC {} does not match {expect_bic}", s.bic)));
    }
    let mut loglik_verified = false;
    if let Some((data_path, table)) = table {
        let digest = sha256_hex(&std::fs::read(data_path).map_err(|e| CliError::io(data_path, e))?);
        let same = output.config.inputs.get("data").is_some_and(|r| r.sha256 == digest);
        if same {
            let ll = marginal_loglik(&output.params, &spec.design, &table.data);
            if (ll - s.loglik).abs() > 1e-6 * ll.abs().max(1.0) {
                return Err(mismatch(path, format!("stored log-likelihood {} but the data give {ll}", s.loglik)));
            }
            loglik_verified = true;
        }
    }
    Ok(LoadedFit { output, design, loglik_verified })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes a CSV table preceded by a `# config:` line.
pub fn write_table(path: &Path, config: &RunConfig, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    let io = |e: std::io::Error| CliError::io(path, e);
    let file = std::fs::File::create(path).map_err(io)?;
    let mut out = std::io::BufWriter::new(file);
    let line = serde_json::to_string(config).map_err(|e| CliError::Internal(e.to_string()))?;
    writeln!(out, "# config: {line}").map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    let csv_io = |e: csv::Error| CliError::Internal(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(csv_io)?;
    for r in rows {
        w.write_record(r).map_err(csv_io)?;
    }
    w.flush().map_err(io)
}

/// Shortest representation that parses back to the same value.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        x.to_string()
    } else {
        "NA".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn nan_se_becomes_null() {
        let row = SeRow { label: "a".into(), estimate: 1.0, se: finite(f64::NAN), fixed: false, std_estimate: None, std_se: Some(0.1) };
        let v = serde_json::to_value(&row).unwrap();
        assert!(v["se"].is_null());
        let back: SeRow = serde_json::from_value(v).unwrap();
        assert_eq!(back, row);
    }
}
