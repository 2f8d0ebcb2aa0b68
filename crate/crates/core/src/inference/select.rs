use serde::{Deserialize, Serialize};

use super::lrt::bic;
use crate::error::{Error, Result};
use crate::estimation::{fit_model, FitOptions};
use crate::model::{Dataset, ItemDesign, ModelSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub k_u: usize,
    pub k_v: usize,
    pub loglik: f64,
    pub npar: usize,
    pub bic: f64,
    pub converged: bool,
    pub selected: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionGrid {
    pub rows: Vec<SelectionRow>,
}

impl SelectionGrid {
    pub fn best(&self) -> Option<&SelectionRow> {
        self.rows.iter().find(|r| r.selected)
    }
}

/// Fits every `(kU, kV)` pair, `kU` outer and `kV` inner, and flags the
/// BIC-minimal row (earliest on ties). `kV = 1` drops the V-side.
pub fn select_classes(
    design: &ItemDesign,
    s: usize,
    data: &Dataset,
    k_u_values: &[usize],
    k_v_values: &[usize],
    options: &FitOptions,
) -> Result<SelectionGrid> {
    if k_u_values.is_empty() || k_v_values.is_empty() {
        return Err(Error::InvalidOptions("empty class range".into()));
    }
    if k_v_values.iter().any(|&k| k > 1) && design.v_dims == 0 {
        return Err(Error::InvalidOptions("kV > 1 needs items loading on a V-dimension".into()));
    }
    let mut rows = Vec::new();
    for &k_u in k_u_values {
        for &k_v in k_v_values {
            let (d, t) = if k_v == 1 { (design.without_v(), 0) } else { (design.clone(), design.v_dims) };
            let spec = ModelSpec::new(d, crate::model::LatentConfig::new(s, t, k_u, k_v)?)?;
            let fit = fit_model(&spec, data, options, &[])?;
            rows.push(SelectionRow {
                k_u,
                k_v,
                loglik: fit.loglik,
                npar: fit.npar,
                bic: bic(fit.loglik, fit.npar, data.n),
                converged: fit.converged,
                selected: false,
            });
        }
    }
    let mut best = 0;
    for (k, r) in rows.iter().enumerate() {
        if r.bic < rows[best].bic {
            best = k;
        }
    }
    rows[best].selected = true;
    Ok(SelectionGrid { rows })
}
