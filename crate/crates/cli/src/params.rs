//! Parameter files for `simulate`. Either a TOML/JSON table of parameter
//! arrays, or a `fit` result whose raw estimates are reused.
//!
//! ```toml
//! u = [[-1.0, 1.0]]          # one row per U-dimension
//! v = [[-1.0, 1.0]]
//! phi = [[0.5]]              # per class after the first: intercept, covariates
//! psi = [[-0.3]]
//! alpha = [1.0, 1.2]
//! beta = [[0.0, 1.0], [-0.5]]
//! gamma_u = [0.8, 0.5]
//! gamma_v = [1.0, 0.7]
//! delta = [0.0, -0.4]
//! ```
//!
//! Missing V-side entries default to zero when the model has no V-side.
//! Anchored entries must already hold their fixed values.

use std::path::Path;

use lcirt::layout::all_slots;
use lcirt::model::{ModelSpec, ParameterSet};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult, Location};
use crate::output::FitOutput;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub u: Vec<Vec<f64>>,
    #[serde(default)]
    pub v: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    #[serde(default)]
    pub psi: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    pub gamma_u: Vec<f64>,
    #[serde(default)]
    pub gamma_v: Vec<f64>,
    pub delta: Vec<f64>,
}

impl ParamsFile {
    pub fn from_params(p: &ParameterSet) -> Self {
        ParamsFile {
            u: p.u.clone(),
            v: p.v.clone(),
            phi: p.phi.clone(),
            psi: p.psi.clone(),
            alpha: p.alpha.clone(),
            beta: p.beta.clone(),
            gamma_u: p.gamma_u.clone(),
            gamma_v: p.gamma_v.clone(),
            delta: p.delta.clone(),
        }
    }

    /// Builds a parameter set for `spec`, rejecting shape mismatches and
    /// entries that contradict the identification constraints.
    pub fn into_params(self, spec: &ModelSpec, n_cov: usize) -> CliResult<ParameterSet> {
        let mut p = spec.zeros(n_cov);
        let bad = |m: String| CliError::user("parameters", m);
        let rows = |name: &str, got: &Vec<Vec<f64>>, want: &Vec<Vec<f64>>| -> CliResult<()> {
            let ok = got.len() == want.len() && got.iter().zip(want).all(|(a, b)| a.len() == b.len());
            if ok {
                Ok(())
            } else {
                let shape: Vec<usize> = want.iter().map(Vec::len).collect();
                Err(bad(format!("`{name}` must have row lengths {shape:?}")))
            }
        };
        let flat = |name: &str, got: &Vec<f64>, want: usize| -> CliResult<()> {
            if got.len() == want {
                Ok(())
            } else {
                Err(bad(format!("`{name}` must have {want} entries, got {}", got.len())))
            }
        };
        let m = spec.design.n_items();
        rows("u", &self.u, &p.u)?;
        rows("phi", &self.phi, &p.phi)?;
        rows("beta", &self.beta, &p.beta)?;
        flat("alpha", &self.alpha, m)?;
        flat("gamma_u", &self.gamma_u, m)?;
        flat("delta", &self.delta, m)?;
        let v_side = spec.config.v_enabled();
        if v_side {
            rows("v", &self.v, &p.v)?;
            rows("psi", &self.psi, &p.psi)?;
            flat("gamma_v", &self.gamma_v, m)?;
        } else if !self.v.is_empty() || !self.psi.is_empty() || self.gamma_v.iter().any(|&g| g != 0.0) {
            return Err(bad("the model has no V-side; drop `v`, `psi` and `gamma_v`".into()));
        }
        p.u = self.u;
        p.phi = self.phi;
        p.alpha = self.alpha;
        p.beta = self.beta;
        p.gamma_u = self.gamma_u;
        p.delta = self.delta;
        if v_side {
            p.v = self.v;
            p.psi = self.psi;
            p.gamma_v = self.gamma_v;
        }
        if let Some((slot, _)) = all_slots(&p).iter().find(|(s, _)| !s.get(&p).is_finite()) {
            return Err(bad(format!("`{}` is not finite", slot.label(&spec.design))));
        }
        let mut constrained = p.clone();
        constrained.apply_constraints();
        for (slot, free) in all_slots(&p) {
            if !free && (slot.get(&constrained) - slot.get(&p)).abs() > 1e-12 {
                return Err(bad(format!(
                    "`{}` is fixed at {} by the identification constraints",
                    slot.label(&spec.design),
                    slot.get(&constrained)
                )));
            }
        }
        if !p.thresholds_ordered() {
            return Err(bad("thresholds `beta` must be nondecreasing within each item".into()));
        }
        Ok(p)
    }
}

/// Reads parameters from a `.toml`/`.json` parameter file or a fit result.
pub fn load_params(path: &Path, spec: &ModelSpec, n_cov: usize) -> CliResult<ParameterSet> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let loc = || Location::file(path);
    let is_json = path.extension().is_some_and(|e| e == "json");
    let file: ParamsFile = if is_json {
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
            let mut l = loc();
            l.line = Some(e.line());
            l.column = Some(e.column());
            CliError::at("parameters", e.to_string(), l)
        })?;
        if value.get("params").is_some() {
            let fit: FitOutput = serde_json::from_value(value).map_err(|e| CliError::at("parameters", format!("not a fit result: {e}"), loc()))?;
            ParamsFile::from_params(&fit.params)
        } else {
            serde_json::from_value(value).map_err(|e| CliError::at("parameters", e.to_string(), loc()))?
        }
    } else {
        toml::from_str(&text).map_err(|e| {
            let mut l = loc();
            if let Some(span) = e.span() {
                let before = &text[..span.start];
                l.line = Some(before.matches('\n').count() + 1);
                l.column = Some(before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1);
            }
            CliError::at("parameters", e.message().to_string(), l)
        })?
    };
    file.into_params(spec, n_cov).map_err(|e| match e {
        CliError::User { kind, message, .. } => CliError::at(kind, message, loc()),
        other => other,
    })
}
