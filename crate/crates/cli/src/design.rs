//! Design files: a versioned TOML description of the items, the latent
//! configuration, the covariates and optional simulation settings.
//!
//! ```toml
//! schema_version = 1
//!
//! [latent]
//! k_u = 3
//! k_v = 2
//!
//! [[covariates]]
//! name = "gender"
//! kind = "categorical"
//! levels = ["F", "M"]
//! reference = "F"
//! simulate = { kind = "categorical", probs = [0.5, 0.5] }
//!
//! [[items]]
//! name = "acc_1"
//! categories = 5
//! group = "Accounting"
//! anchor_u = true
//! anchor_v = true
//! ```
//!
//! Items load on U-dimension `u_dim` and V-dimension `v_dim` (1-based,
//! default 1). Without anchor flags the first item loading on a dimension
//! anchors it.

use std::ops::Range;
use std::path::Path;

use lcirt::model::{ItemDesign, LatentConfig, ModelSpec};
use lcirt::simulate::{CovariateDist, CovariateSpec, MaskSpec, SimulationSpec};
use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::error::{CliError, CliResult, Location};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignFile {
    pub schema_version: u32,
    pub latent: LatentSection,
    #[serde(default)]
    pub covariates: Vec<Spanned<CovariateEntry>>,
    pub items: Vec<Spanned<ItemEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSection>,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatentSection {
    pub k_u: usize,
    pub k_v: usize,
    /// Number of U-dimensions.
    #[serde(default = "one")]
    pub u_dims: usize,
    /// Number of V-dimensions; 0 leaves answering driven by U alone.
    #[serde(default = "one")]
    pub v_dims: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateKind {
    Numeric,
    Categorical,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateEntry {
    pub name: String,
    pub kind: CovariateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
    /// Level absorbed in the intercept; defaults to the first level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    /// Distribution used by `simulate`. Categorical probabilities follow
    /// `levels`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<CovariateDist>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemEntry {
    pub name: String,
    pub categories: usize,
    #[serde(default = "one")]
    pub u_dim: usize,
    #[serde(default = "one")]
    pub v_dim: usize,
    #[serde(default)]
    pub anchor_u: bool,
    #[serde(default)]
    pub anchor_v: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    /// Mutually exclusive item sets; each simulated subject is due on one
    /// set (chosen uniformly) and on every item outside all sets.
    #[serde(default)]
    pub alternatives: Vec<Vec<String>>,
}

/// A covariate after resolving its coding.
#[derive(Clone, Debug, PartialEq)]
pub enum Coding {
    Numeric,
    /// Dummy columns for `levels` other than `reference`, in `levels` order.
    Categorical { levels: Vec<String>, reference: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Covariate {
    pub name: String,
    pub coding: Coding,
    pub simulate: Option<CovariateDist>,
}

impl Covariate {
    /// Design-matrix columns produced.
    pub fn width(&self) -> usize {
        match &self.coding {
            Coding::Numeric => 1,
            Coding::Categorical { levels, .. } => levels.len() - 1,
        }
    }

    pub fn labels(&self) -> Vec<String> {
        match &self.coding {
            Coding::Numeric => vec![self.name.clone()],
            Coding::Categorical { levels, reference } => levels
                .iter()
                .enumerate()
                .filter(|(k, _)| k != reference)
                .map(|(_, l)| format!("{}={l}", self.name))
                .collect(),
        }
    }

    pub fn encode(&self, cell: &str) -> Result<Vec<f64>, String> {
        match &self.coding {
            Coding::Numeric => match cell.trim().parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(vec![x]),
                _ => Err(format!("`{cell}` is not a finite number")),
            },
            Coding::Categorical { levels, reference } => {
                let level = levels
                    .iter()
                    .position(|l| l == cell.trim())
                    .ok_or_else(|| format!("`{cell}` is not one of the levels {levels:?}"))?;
                Ok((0..levels.len()).filter(|k| k != reference).map(|k| f64::from(u8::from(k == level))).collect())
            }
        }
    }

    /// Inverse of [`Covariate::encode`].
    pub fn decode(&self, x: &[f64]) -> String {
        match &self.coding {
            Coding::Numeric => x[0].to_string(),
            Coding::Categorical { levels, reference } => {
                let others: Vec<usize> = (0..levels.len()).filter(|k| k != reference).collect();
                let level = others.iter().zip(x).find(|(_, &v)| v == 1.0).map_or(*reference, |(&k, _)| k);
                levels[level].clone()
            }
        }
    }

    /// Simulation distribution over the dummy columns.
    fn simulation_dist(&self) -> Result<CovariateDist, String> {
        let dist = self.simulate.clone().ok_or_else(|| format!("covariate `{}` has no simulate distribution", self.name))?;
        match (&self.coding, dist) {
            (Coding::Numeric, CovariateDist::Categorical { .. }) => {
                Err(format!("numeric covariate `{}` cannot use a categorical distribution", self.name))
            }
            (Coding::Numeric, d) => Ok(d),
            (Coding::Categorical { levels, reference }, CovariateDist::Categorical { probs }) => {
                if probs.len() != levels.len() {
                    return Err(format!("covariate `{}` needs {} probabilities", self.name, levels.len()));
                }
                let mut ordered = vec![probs[*reference]];
                ordered.extend((0..levels.len()).filter(|k| k != reference).map(|k| probs[k]));
                Ok(CovariateDist::Categorical { probs: ordered })
            }
            (Coding::Categorical { .. }, _) => Err(format!("categorical covariate `{}` needs a categorical distribution", self.name)),
        }
    }
}

/// A parsed and validated design file.
#[derive(Clone, Debug)]
pub struct Design {
    pub file: DesignFile,
    /// Items with the V-side as declared in the file.
    pub items: ItemDesign,
    pub k_u: usize,
    pub k_v: usize,
    pub covariates: Vec<Covariate>,
    pub alternatives: Vec<Vec<usize>>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, column)
}

struct Ctx<'a> {
    text: &'a str,
    path: &'a Path,
}

impl Ctx<'_> {
    fn err(&self, span: Option<Range<usize>>, message: impl Into<String>) -> CliError {
        let mut loc = Location::file(self.path);
        if let Some(span) = span {
            let (line, column) = line_col(self.text, span.start);
            loc.line = Some(line);
            loc.column = Some(column);
        }
        CliError::at("design", message, loc)
    }
}

impl Design {
    pub fn load(path: &Path) -> CliResult<Design> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Design::parse(&text, path)
    }

    /// Parses `text`; `path` is used for error locations only.
    pub fn parse(text: &str, path: &Path) -> CliResult<Design> {
        let ctx = Ctx { text, path };
        let file: DesignFile = toml::from_str(text).map_err(|e| ctx.err(e.span(), e.message().to_string()))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(ctx.err(None, format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", file.schema_version)));
        }
        let latent = &file.latent;
        if latent.u_dims == 0 {
            return Err(ctx.err(None, "latent.u_dims must be at least 1"));
        }
        if latent.k_u == 0 || latent.k_v == 0 {
            return Err(ctx.err(None, "latent.k_u and latent.k_v must be at least 1"));
        }
        if latent.k_v > 1 && latent.v_dims == 0 {
            return Err(ctx.err(None, "latent.k_v > 1 requires v_dims >= 1"));
        }
        if file.items.is_empty() {
            return Err(ctx.err(None, "the design has no items"));
        }

        let m = file.items.len();
        let (s, t) = (latent.u_dims, latent.v_dims);
        let mut names: Vec<String> = Vec::with_capacity(m);
        let mut design = ItemDesign {
            names: Vec::with_capacity(m),
            categories: Vec::with_capacity(m),
            u_dims: s,
            v_dims: t,
            z_u: Vec::with_capacity(m),
            z_v: Vec::with_capacity(m),
            anchors_u: Vec::new(),
            anchors_v: Vec::new(),
            groups: Vec::with_capacity(m),
        };
        let mut anchor_u: Vec<Option<usize>> = vec![None; s];
        let mut anchor_v: Vec<Option<usize>> = vec![None; t];
        for (j, spanned) in file.items.iter().enumerate() {
            let span = Some(spanned.span());
            let item = spanned.get_ref();
            if item.name.is_empty() || item.name.contains(',') || item.name.trim() != item.name {
                return Err(ctx.err(span, format!("item name `{}` must be non-empty without commas or padding", item.name)));
            }
            if names.contains(&item.name) {
                return Err(ctx.err(span, format!("duplicate item name `{}`", item.name)));
            }
            if item.categories < 2 || item.categories > usize::from(u16::MAX) {
                return Err(ctx.err(span, format!("item `{}` needs between 2 and 65535 categories", item.name)));
            }
            if item.u_dim == 0 || item.u_dim > s {
                return Err(ctx.err(span, format!("item `{}` has u_dim {} outside 1..={s}", item.name, item.u_dim)));
            }
            if t > 0 && (item.v_dim == 0 || item.v_dim > t) {
                return Err(ctx.err(span, format!("item `{}` has v_dim {} outside 1..={t}", item.name, item.v_dim)));
            }
            for (flag, slots, dim, side) in [(item.anchor_u, &mut anchor_u, item.u_dim, 'U'), (item.anchor_v, &mut anchor_v, item.v_dim, 'V')] {
                if !flag {
                    continue;
                }
                if side == 'V' && t == 0 {
                    return Err(ctx.err(span, format!("item `{}` anchors V but v_dims = 0", item.name)));
                }
                if let Some(prev) = slots[dim - 1] {
                    return Err(ctx.err(
                        span,
                        format!("{side}-dimension {dim} is anchored by both `{}` and `{}`", names[prev], item.name),
                    ));
                }
                slots[dim - 1] = Some(j);
            }
            names.push(item.name.clone());
            design.categories.push(item.categories);
            design.z_u.push((1..=s).map(|d| d == item.u_dim).collect());
            design.z_v.push((1..=t).map(|d| d == item.v_dim).collect());
            design.groups.push(item.group.clone());
        }
        design.names = names;
        design.set_default_anchors();
        for (d, a) in anchor_u.iter().enumerate() {
            if let Some(j) = a {
                design.anchors_u[d] = *j;
            }
        }
        for (d, a) in anchor_v.iter().enumerate() {
            if let Some(j) = a {
                design.anchors_v[d] = *j;
            }
        }
        for d in 0..s {
            if !design.z_u.iter().any(|row| row[d]) {
                return Err(ctx.err(None, format!("no item loads on U-dimension {}", d + 1)));
            }
        }
        for d in 0..t {
            if !design.z_v.iter().any(|row| row[d]) {
                return Err(ctx.err(None, format!("no item loads on V-dimension {}", d + 1)));
            }
        }

        let mut covariates = Vec::with_capacity(file.covariates.len());
        for spanned in &file.covariates {
            let span = Some(spanned.span());
            let c = spanned.get_ref();
            if c.name.is_empty() || c.name == "id" || c.name.starts_with("R_") || c.name.starts_with("Y_") || c.name.contains(',') {
                return Err(ctx.err(span, format!("covariate name `{}` is reserved or invalid", c.name)));
            }
            if covariates.iter().any(|o: &Covariate| o.name == c.name) {
                return Err(ctx.err(span, format!("duplicate covariate `{}`", c.name)));
            }
            let coding = match c.kind {
                CovariateKind::Numeric => {
                    if c.levels.is_some() || c.reference.is_some() {
                        return Err(ctx.err(span, format!("numeric covariate `{}` cannot have levels", c.name)));
                    }
                    Coding::Numeric
                }
                CovariateKind::Categorical => {
                    let levels = c.levels.clone().unwrap_or_default();
                    if levels.len() < 2 {
                        return Err(ctx.err(span, format!("categorical covariate `{}` needs at least two levels", c.name)));
                    }
                    for (k, l) in levels.iter().enumerate() {
                        if l.is_empty() || l == "NA" || levels[..k].contains(l) {
                            return Err(ctx.err(span, format!("covariate `{}` has an empty, NA or repeated level", c.name)));
                        }
                    }
                    let reference = match &c.reference {
                        None => 0,
                        Some(r) => levels
                            .iter()
                            .position(|l| l == r)
                            .ok_or_else(|| ctx.err(span.clone(), format!("reference `{r}` is not a level of `{}`", c.name)))?,
                    };
                    Coding::Categorical { levels, reference }
                }
            };
            covariates.push(Covariate { name: c.name.clone(), coding, simulate: c.simulate.clone() });
        }

        let mut alternatives = Vec::new();
        if let Some(sim) = &file.simulation {
            let mut used = vec![false; m];
            for set in &sim.alternatives {
                let mut idx = Vec::with_capacity(set.len());
                for name in set {
                    let j = design
                        .names
                        .iter()
                        .position(|n| n == name)
                        .ok_or_else(|| ctx.err(None, format!("simulation.alternatives names unknown item `{name}`")))?;
                    if used[j] {
                        return Err(ctx.err(None, format!("item `{name}` appears in more than one alternative")));
                    }
                    used[j] = true;
                    idx.push(j);
                }
                if idx.is_empty() {
                    return Err(ctx.err(None, "simulation.alternatives contains an empty set"));
                }
                alternatives.push(idx);
            }
        }

        let d = Design { k_u: latent.k_u, k_v: latent.k_v, file, items: design, covariates, alternatives };
        d.spec().map_err(|e| ctx.err(None, e.to_string()))?;
        Ok(d)
    }

    pub fn n_cov(&self) -> usize {
        self.covariates.iter().map(Covariate::width).sum()
    }

    /// Labels of the covariate design-matrix columns.
    pub fn covariate_labels(&self) -> Vec<String> {
        self.covariates.iter().flat_map(Covariate::labels).collect()
    }

    pub fn full_config(&self) -> LatentConfig {
        LatentConfig { s: self.items.u_dims, t: self.items.v_dims, k_u: self.k_u, k_v: self.k_v }
    }

    /// Model with the file's class counts.
    pub fn spec(&self) -> CliResult<ModelSpec> {
        self.spec_for(self.k_u, self.k_v)
    }

    /// Model with the given class counts; `k_v = 1` drops the V-side.
    pub fn spec_for(&self, k_u: usize, k_v: usize) -> CliResult<ModelSpec> {
        if k_v > 1 && self.items.v_dims == 0 {
            return Err(CliError::user("design", "k_v > 1 requires v_dims >= 1"));
        }
        let base = ModelSpec { design: self.items.clone(), config: self.full_config(), restrictions: Default::default() };
        Ok(base.with_classes(k_u, k_v, &self.items)?)
    }

    pub fn simulation_spec(&self) -> CliResult<SimulationSpec> {
        let cols = self
            .covariates
            .iter()
            .map(|c| c.simulation_dist().map_err(|m| CliError::user("design", m)))
            .collect::<CliResult<Vec<_>>>()?;
        let mask = if self.alternatives.is_empty() { MaskSpec::AllDue } else { MaskSpec::Alternatives(self.alternatives.clone()) };
        Ok(SimulationSpec { covariates: CovariateSpec::Columns(cols), mask })
    }
}
