//! Data model shared by every other module: item design, latent
//! configuration, datasets, parameter sets and the identification scheme.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Three-state response indicator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Indicator {
    /// Item not due for this subject (missing by design).
    StructuralMissing,
    /// Item due but not answered.
    Skipped,
    /// Item answered; the ordinal response is observed.
    Answered,
}

/// Loading structure and identification anchors of the measured items.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemDesign {
    pub names: Vec<String>,
    /// Category count `L_j` per item; responses take values `1..=L_j`.
    pub categories: Vec<usize>,
    /// Number of U-dimensions (`S`).
    pub u_dims: usize,
    /// Number of V-dimensions (`T`); zero disables the V-side.
    pub v_dims: usize,
    /// `m x S` binary loadings onto U.
    pub z_u: Vec<Vec<bool>>,
    /// `m x T` binary loadings onto V.
    pub z_v: Vec<Vec<bool>>,
    /// Anchor item per U-dimension.
    pub anchors_u: Vec<usize>,
    /// Anchor item per V-dimension.
    pub anchors_v: Vec<usize>,
    /// Optional course-block label per item.
    pub groups: Vec<Option<String>>,
}

impl ItemDesign {
    /// Design where every item loads on one U-dimension and (when `with_v`)
    /// one V-dimension, anchored on the first item.
    pub fn unidimensional(categories: Vec<usize>, with_v: bool) -> Self {
        let m = categories.len();
        let v_dims = usize::from(with_v);
        let mut design = ItemDesign {
            names: (1..=m).map(|j| format!("item{j}")).collect(),
            categories,
            u_dims: 1,
            v_dims,
            z_u: vec![vec![true]; m],
            z_v: vec![vec![true; v_dims]; m],
            anchors_u: Vec::new(),
            anchors_v: Vec::new(),
            groups: vec![None; m],
        };
        design.set_default_anchors();
        design
    }

    pub fn n_items(&self) -> usize {
        self.categories.len()
    }

    /// Lowest-indexed item loading on each dimension.
    pub fn set_default_anchors(&mut self) {
        self.anchors_u = (0..self.u_dims)
            .map(|s| self.z_u.iter().position(|row| row.get(s) == Some(&true)).unwrap_or(0))
            .collect();
        self.anchors_v = (0..self.v_dims)
            .map(|t| self.z_v.iter().position(|row| row.get(t) == Some(&true)).unwrap_or(0))
            .collect();
    }

    /// U-dimension measured by item `j`.
    #[inline]
    pub fn u_dim(&self, j: usize) -> usize {
        self.z_u[j].iter().position(|&z| z).unwrap_or(0)
    }

    /// V-dimension measured by item `j`, if any.
    #[inline]
    pub fn v_dim(&self, j: usize) -> Option<usize> {
        self.z_v.get(j).and_then(|row| row.iter().position(|&z| z))
    }

    /// Same items with the V-side removed (`kV = 1` models).
    pub fn without_v(&self) -> Self {
        let mut d = self.clone();
        d.v_dims = 0;
        d.z_v = vec![Vec::new(); self.n_items()];
        d.anchors_v.clear();
        d
    }

    /// Items carrying the given group label, in index order.
    pub fn group_items(&self, label: &str) -> Vec<usize> {
        self.groups
            .iter()
            .enumerate()
            .filter(|(_, g)| g.as_deref() == Some(label))
            .map(|(j, _)| j)
            .collect()
    }

    /// Distinct group labels in order of first appearance.
    pub fn group_labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for g in self.groups.iter().flatten() {
            if !out.contains(g) {
                out.push(g.clone());
            }
        }
        out
    }
}

/// Dimensions and support sizes of the discrete latent variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentConfig {
    pub s: usize,
    pub t: usize,
    pub k_u: usize,
    pub k_v: usize,
}

impl LatentConfig {
    pub fn new(s: usize, t: usize, k_u: usize, k_v: usize) -> Result<Self> {
        let cfg = LatentConfig { s, t, k_u, k_v };
        let problems = cfg.problems();
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Invalid(ValidationReport { violations: problems }))
        }
    }

    /// Whether the V-side is active (`kV >= 2`).
    pub fn v_enabled(&self) -> bool {
        self.k_v >= 2
    }

    /// Same U-side with the V-side switched off.
    pub fn without_v(&self) -> Self {
        LatentConfig { t: 0, k_v: 1, ..*self }
    }

    fn problems(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.s == 0 {
            v.push(Violation::Config("S must be at least 1".into()));
        }
        if self.k_u == 0 {
            v.push(Violation::Config("kU must be at least 1".into()));
        }
        if self.k_v == 0 {
            v.push(Violation::Config("kV must be at least 1".into()));
        }
        if (self.t == 0) != (self.k_v == 1) {
            v.push(Violation::Config(format!(
                "T = 0 exactly when kV = 1 (got T = {}, kV = {})",
                self.t, self.k_v
            )));
        }
        v
    }
}

/// Per-subject responses, indicators and covariates. Row-major `n x m` /
/// `n x C`; the constant term of the structural model is implicit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub n: usize,
    pub m: usize,
    pub n_cov: usize,
    pub r: Vec<Indicator>,
    pub y: Vec<Option<u16>>,
    pub x: Vec<f64>,
}

impl Dataset {
    pub fn new(n: usize, m: usize, n_cov: usize) -> Self {
        Dataset {
            n,
            m,
            n_cov,
            r: vec![Indicator::StructuralMissing; n * m],
            y: vec![None; n * m],
            x: vec![0.0; n * n_cov],
        }
    }

    #[inline]
    pub fn r(&self, i: usize, j: usize) -> Indicator {
        self.r[i * self.m + j]
    }

    #[inline]
    pub fn y(&self, i: usize, j: usize) -> Option<u16> {
        self.y[i * self.m + j]
    }

    #[inline]
    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_cov..(i + 1) * self.n_cov]
    }

    pub fn set(&mut self, i: usize, j: usize, r: Indicator, y: Option<u16>) {
        self.r[i * self.m + j] = r;
        self.y[i * self.m + j] = y;
    }

    /// Subset of rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let mut out = Dataset::new(rows.len(), self.m, self.n_cov);
        for (k, &i) in rows.iter().enumerate() {
            out.r[k * self.m..(k + 1) * self.m].copy_from_slice(&self.r[i * self.m..(i + 1) * self.m]);
            out.y[k * self.m..(k + 1) * self.m].copy_from_slice(&self.y[i * self.m..(i + 1) * self.m]);
            out.x[k * self.n_cov..(k + 1) * self.n_cov].copy_from_slice(self.x_row(i));
        }
        out
    }
}

/// Model-level restrictions used by nested-model tests.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Restrictions {
    /// Fix `gamma_U = 0` for every item (ignorable missingness).
    #[serde(default)]
    pub ignorable: bool,
    /// Blocks of items constrained to share every item parameter.
    #[serde(default)]
    pub tied_blocks: Vec<Vec<usize>>,
}

/// Which parameter entries are fixed by identification or restriction, and
/// how tied items map onto a representative.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConstraintMask {
    pub alpha_fixed: Vec<bool>,
    pub beta2_fixed: Vec<bool>,
    pub gamma_u_zero: Vec<bool>,
    pub gamma_v_fixed: Vec<bool>,
    pub delta_fixed: Vec<bool>,
    pub v_enabled: bool,
    /// Representative item of each item (itself when untied).
    pub rep_of: Vec<usize>,
}

impl ConstraintMask {
    pub fn build(design: &ItemDesign, config: &LatentConfig, restrictions: &Restrictions) -> Self {
        let m = design.n_items();
        let v_enabled = config.v_enabled();
        let mut mask = ConstraintMask {
            alpha_fixed: vec![false; m],
            beta2_fixed: vec![false; m],
            gamma_u_zero: vec![restrictions.ignorable; m],
            gamma_v_fixed: vec![false; m],
            delta_fixed: vec![false; m],
            v_enabled,
            rep_of: (0..m).collect(),
        };
        for &j in &design.anchors_u {
            if j < m {
                mask.alpha_fixed[j] = true;
                mask.beta2_fixed[j] = true;
            }
        }
        if v_enabled {
            for &j in &design.anchors_v {
                if j < m {
                    mask.gamma_v_fixed[j] = true;
                    mask.delta_fixed[j] = true;
                }
            }
        }
        for block in &restrictions.tied_blocks {
            if block.is_empty() {
                continue;
            }
            let anchored = block
                .iter()
                .copied()
                .find(|&j| j < m && (mask.alpha_fixed[j] || mask.gamma_v_fixed[j]));
            let rep = anchored.unwrap_or_else(|| *block.iter().min().unwrap());
            for &j in block {
                if j < m {
                    mask.rep_of[j] = rep;
                }
            }
        }
        mask
    }

    pub fn is_rep(&self, j: usize) -> bool {
        self.rep_of[j] == j
    }

    /// Representative items in index order.
    pub fn reps(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.rep_of.len()).filter(move |&j| self.rep_of[j] == j)
    }

    /// Items sharing representative `rep`.
    pub fn members(&self, rep: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.rep_of.len()).filter(move |&j| self.rep_of[j] == rep)
    }
}

/// All model parameters. Class-indexed arrays are stored dimension-major:
/// `u[s][h]`, `phi[h - 1][c]` with `c = 0` the constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub k_u: usize,
    pub k_v: usize,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    /// Thresholds `beta[j][y - 2]` for `y = 2..=L_j`.
    pub beta: Vec<Vec<f64>>,
    pub gamma_u: Vec<f64>,
    pub gamma_v: Vec<f64>,
    pub delta: Vec<f64>,
    #[serde(skip)]
    pub mask: ConstraintMask,
}

impl ParameterSet {
    /// Zero-valued parameters of the right shape with constraints applied.
    pub fn zeros(design: &ItemDesign, config: &LatentConfig, n_cov: usize, restrictions: &Restrictions) -> Self {
        let m = design.n_items();
        let mut p = ParameterSet {
            k_u: config.k_u,
            k_v: config.k_v,
            u: vec![vec![0.0; config.k_u]; config.s],
            v: vec![vec![0.0; config.k_v]; config.t],
            phi: vec![vec![0.0; n_cov + 1]; config.k_u.saturating_sub(1)],
            psi: vec![vec![0.0; n_cov + 1]; config.k_v.saturating_sub(1)],
            alpha: vec![1.0; m],
            beta: design
                .categories
                .iter()
                .map(|&l| (0..l.saturating_sub(1)).map(|k| k as f64).collect())
                .collect(),
            gamma_u: vec![0.0; m],
            gamma_v: vec![0.0; m],
            delta: vec![0.0; m],
            mask: ConstraintMask::build(design, config, restrictions),
        };
        p.apply_constraints();
        p
    }

    pub fn n_items(&self) -> usize {
        self.alpha.len()
    }

    pub fn n_cov(&self) -> usize {
        self.phi
            .first()
            .or(self.psi.first())
            .map(|r| r.len() - 1)
            .unwrap_or(0)
    }

    pub fn v_enabled(&self) -> bool {
        self.k_v >= 2
    }

    /// Support vector of U-class `h` across dimensions.
    pub fn u_point(&self, h: usize) -> Vec<f64> {
        self.u.iter().map(|row| row[h]).collect()
    }

    pub fn v_point(&self, h: usize) -> Vec<f64> {
        self.v.iter().map(|row| row[h]).collect()
    }

    /// Forces identification/restriction values and copies representative
    /// parameters onto tied items. Idempotent.
    pub fn apply_constraints(&mut self) {
        let m = self.n_items();
        if self.mask.rep_of.len() != m {
            return;
        }
        for j in 0..m {
            if self.mask.alpha_fixed[j] {
                self.alpha[j] = 1.0;
            }
            if self.mask.beta2_fixed[j] && !self.beta[j].is_empty() {
                self.beta[j][0] = 0.0;
            }
            if self.mask.gamma_u_zero[j] {
                self.gamma_u[j] = 0.0;
            }
            if !self.mask.v_enabled {
                self.gamma_v[j] = 0.0;
            } else {
                if self.mask.gamma_v_fixed[j] {
                    self.gamma_v[j] = 1.0;
                }
                if self.mask.delta_fixed[j] {
                    self.delta[j] = 0.0;
                }
            }
        }
        self.propagate_ties();
    }

    /// Copies every representative's item parameters onto its tied members.
    pub fn propagate_ties(&mut self) {
        for j in 0..self.mask.rep_of.len() {
            let r = self.mask.rep_of[j];
            if r != j {
                self.alpha[j] = self.alpha[r];
                self.beta[j] = self.beta[r].clone();
                self.gamma_u[j] = self.gamma_u[r];
                self.gamma_v[j] = self.gamma_v[r];
                self.delta[j] = self.delta[r];
            }
        }
    }

    /// Whether every item's thresholds are nondecreasing.
    pub fn thresholds_ordered(&self) -> bool {
        self.beta.iter().all(|b| b.windows(2).all(|w| w[0] <= w[1]))
    }

    /// Sorts latent classes by their support vectors (lexicographically,
    /// ascending) and re-references the logit coefficients to the new first
    /// class. Leaves the likelihood unchanged.
    pub fn canonicalize(&mut self) {
        let perm_u = sort_permutation(&self.u, self.k_u);
        self.u = permute_rows(&self.u, &perm_u);
        self.phi = rereference(&self.phi, &perm_u);
        let perm_v = sort_permutation(&self.v, self.k_v);
        self.v = permute_rows(&self.v, &perm_v);
        self.psi = rereference(&self.psi, &perm_v);
    }

    /// Checks shapes against a design and configuration.
    pub fn check_shape(&self, design: &ItemDesign, config: &LatentConfig, n_cov: usize) -> Result<()> {
        let m = design.n_items();
        let bad = |what: &str| Err(Error::DimensionMismatch(what.to_string()));
        if self.k_u != config.k_u || self.k_v != config.k_v {
            return bad("class counts differ from latent config");
        }
        if self.u.len() != config.s || self.u.iter().any(|r| r.len() != config.k_u) {
            return bad("u must be S x kU");
        }
        if self.v.len() != config.t || self.v.iter().any(|r| r.len() != config.k_v) {
            return bad("v must be T x kV");
        }
        if self.phi.len() != config.k_u - 1 || self.phi.iter().any(|r| r.len() != n_cov + 1) {
            return bad("phi must be (kU-1) x (C+1)");
        }
        if self.psi.len() != config.k_v - 1 || self.psi.iter().any(|r| r.len() != n_cov + 1) {
            return bad("psi must be (kV-1) x (C+1)");
        }
        if self.alpha.len() != m || self.gamma_u.len() != m || self.gamma_v.len() != m || self.delta.len() != m {
            return bad("item parameter vectors must have one entry per item");
        }
        if self.beta.len() != m || self.beta.iter().zip(&design.categories).any(|(b, &l)| b.len() + 1 != l) {
            return bad("beta must hold L_j - 1 thresholds per item");
        }
        Ok(())
    }
}

fn sort_permutation(points: &[Vec<f64>], k: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..k).collect();
    perm.sort_by(|&a, &b| {
        for row in points {
            match row[a].total_cmp(&row[b]) {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        a.cmp(&b)
    });
    perm
}

fn permute_rows(points: &[Vec<f64>], perm: &[usize]) -> Vec<Vec<f64>> {
    points.iter().map(|row| perm.iter().map(|&h| row[h]).collect()).collect()
}

/// New coefficients for classes reordered by `perm` (new index -> old index),
/// relative to the new first class.
fn rereference(coefs: &[Vec<f64>], perm: &[usize]) -> Vec<Vec<f64>> {
    if coefs.is_empty() {
        return Vec::new();
    }
    let width = coefs[0].len();
    let full = |h: usize| -> Vec<f64> {
        if h == 0 {
            vec![0.0; width]
        } else {
            coefs[h - 1].clone()
        }
    };
    let base = full(perm[0]);
    perm[1..]
        .iter()
        .map(|&h| full(h).iter().zip(&base).map(|(a, b)| a - b).collect())
        .collect()
}

/// A single validation failure. Item and subject numbers in messages are
/// 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    Config(String),
    DimensionMismatch(String),
    TooFewCategories { item: usize },
    EmptyLoading { item: usize, side: char },
    MultipleLoadings { item: usize, side: char },
    AnchorConflict(String),
    NoSingleLoadingItem,
    AnsweredWithoutResponse { subject: usize, item: usize },
    ResponseWithoutAnswer { subject: usize, item: usize },
    ResponseOutOfRange { subject: usize, item: usize, value: u16 },
    OrphanSubject { subject: usize },
    TieMismatch(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Config(s) => write!(f, "latent config: {s}"),
            Violation::DimensionMismatch(s) => write!(f, "dimension mismatch: {s}"),
            Violation::TooFewCategories { item } => write!(f, "item {} has fewer than 2 categories", item + 1),
            Violation::EmptyLoading { item, side } => {
                write!(f, "item {} loads on no {side}-dimension", item + 1)
            }
            Violation::MultipleLoadings { item, side } => {
                write!(f, "item {} loads on more than one {side}-dimension", item + 1)
            }
            Violation::AnchorConflict(s) => write!(f, "anchor conflict: {s}"),
            Violation::NoSingleLoadingItem => {
                write!(f, "no item loads only on a U-component or only on a V-component")
            }
            Violation::AnsweredWithoutResponse { subject, item } => write!(
                f,
                "subject {} item {}: answered but response is missing",
                subject + 1,
                item + 1
            ),
            Violation::ResponseWithoutAnswer { subject, item } => write!(
                f,
                "subject {} item {}: response present but item not answered",
                subject + 1,
                item + 1
            ),
            Violation::ResponseOutOfRange { subject, item, value } => write!(
                f,
                "subject {} item {}: response {value} out of range",
                subject + 1,
                item + 1
            ),
            Violation::OrphanSubject { subject } => {
                write!(f, "subject {} has every item structurally missing", subject + 1)
            }
            Violation::TieMismatch(s) => write!(f, "tied items differ: {s}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::Invalid(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

/// Structural checks on design and configuration alone.
pub fn validate_structure(design: &ItemDesign, config: &LatentConfig) -> ValidationReport {
    let mut out = config.problems();
    let m = design.n_items();
    let lens_ok = design.names.len() == m
        && design.z_u.len() == m
        && design.z_v.len() == m
        && design.groups.len() == m;
    if !lens_ok {
        out.push(Violation::DimensionMismatch(format!(
            "per-item vectors must all have length m = {m}"
        )));
        return ValidationReport { violations: out };
    }
    if design.u_dims != config.s {
        out.push(Violation::DimensionMismatch(format!(
            "design has {} U-dimensions, config S = {}",
            design.u_dims, config.s
        )));
    }
    if design.v_dims != config.t {
        out.push(Violation::DimensionMismatch(format!(
            "design has {} V-dimensions, config T = {}",
            design.v_dims, config.t
        )));
    }
    for j in 0..m {
        if design.categories[j] < 2 {
            out.push(Violation::TooFewCategories { item: j });
        }
        if design.z_u[j].len() != design.u_dims {
            out.push(Violation::DimensionMismatch(format!("zU row {} has wrong length", j + 1)));
        } else {
            match design.z_u[j].iter().filter(|&&z| z).count() {
                0 => out.push(Violation::EmptyLoading { item: j, side: 'U' }),
                1 => {}
                _ => out.push(Violation::MultipleLoadings { item: j, side: 'U' }),
            }
        }
        if design.z_v[j].len() != design.v_dims {
            out.push(Violation::DimensionMismatch(format!("zV row {} has wrong length", j + 1)));
        } else if design.v_dims > 0 {
            match design.z_v[j].iter().filter(|&&z| z).count() {
                0 => out.push(Violation::EmptyLoading { item: j, side: 'V' }),
                1 => {}
                _ => out.push(Violation::MultipleLoadings { item: j, side: 'V' }),
            }
        }
    }
    if design.anchors_u.len() != design.u_dims {
        out.push(Violation::AnchorConflict(format!(
            "{} U-anchors for {} U-dimensions",
            design.anchors_u.len(),
            design.u_dims
        )));
    } else {
        for (s, &j) in design.anchors_u.iter().enumerate() {
            if j >= m || design.z_u[j].get(s) != Some(&true) {
                out.push(Violation::AnchorConflict(format!(
                    "U-dimension {} anchored on item {} which does not load on it",
                    s + 1,
                    j + 1
                )));
            }
        }
    }
    if design.anchors_v.len() != design.v_dims {
        out.push(Violation::AnchorConflict(format!(
            "{} V-anchors for {} V-dimensions",
            design.anchors_v.len(),
            design.v_dims
        )));
    } else {
        for (t, &j) in design.anchors_v.iter().enumerate() {
            if j >= m || design.z_v[j].get(t) != Some(&true) {
                out.push(Violation::AnchorConflict(format!(
                    "V-dimension {} anchored on item {} which does not load on it",
                    t + 1,
                    j + 1
                )));
            }
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    for &j in design.anchors_u.iter() {
        if !seen.insert(j) {
            out.push(Violation::AnchorConflict(format!(
                "item {} anchors more than one U-dimension",
                j + 1
            )));
        }
    }
    // The ordinal responses load only on U, so this holds whenever m > 0.
    if m == 0 {
        out.push(Violation::NoSingleLoadingItem);
    }
    ValidationReport { violations: out }
}

/// Design, latent configuration and restrictions of one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub design: ItemDesign,
    pub config: LatentConfig,
    #[serde(default)]
    pub restrictions: Restrictions,
}

impl ModelSpec {
    pub fn new(design: ItemDesign, config: LatentConfig) -> Result<Self> {
        validate_structure(&design, &config).into_result()?;
        Ok(ModelSpec { design, config, restrictions: Restrictions::default() })
    }

    pub fn with_restrictions(mut self, restrictions: Restrictions) -> Result<Self> {
        validate_restrictions(&self.design, &restrictions).into_result()?;
        self.restrictions = restrictions;
        Ok(self)
    }

    /// Same model with the V-side switched off.
    pub fn without_v(&self) -> Self {
        ModelSpec {
            design: self.design.without_v(),
            config: self.config.without_v(),
            restrictions: self.restrictions.clone(),
        }
    }

    /// Same design with different class counts; the V-side is dropped when
    /// `k_v == 1` and restored (with the design's V loadings) otherwise.
    pub fn with_classes(&self, k_u: usize, k_v: usize, full_design: &ItemDesign) -> Result<Self> {
        let (design, t) = if k_v == 1 { (full_design.without_v(), 0) } else { (full_design.clone(), full_design.v_dims) };
        let config = LatentConfig::new(self.config.s, t, k_u, k_v)?;
        ModelSpec::new(design, config)?.with_restrictions(self.restrictions.clone())
    }

    pub fn mask(&self) -> ConstraintMask {
        ConstraintMask::build(&self.design, &self.config, &self.restrictions)
    }

    /// Zero-valued parameters for this model.
    pub fn zeros(&self, n_cov: usize) -> ParameterSet {
        ParameterSet::zeros(&self.design, &self.config, n_cov, &self.restrictions)
    }

    /// Re-targets `params` (same shape) to this model's constraints.
    pub fn conform(&self, params: &ParameterSet) -> ParameterSet {
        let mut p = params.clone();
        p.mask = self.mask();
        p.apply_constraints();
        p
    }
}

/// Full validation of design, configuration and data.
pub fn validate_design(design: &ItemDesign, config: &LatentConfig, data: &Dataset) -> ValidationReport {
    let mut report = validate_structure(design, config);
    let m = design.n_items();
    if data.m != m {
        report.violations.push(Violation::DimensionMismatch(format!(
            "dataset has {} items, design has {m}",
            data.m
        )));
        return report;
    }
    if data.r.len() != data.n * m || data.y.len() != data.n * m || data.x.len() != data.n * data.n_cov {
        report
            .violations
            .push(Violation::DimensionMismatch("dataset arrays have wrong length".into()));
        return report;
    }
    for i in 0..data.n {
        let mut due = false;
        for j in 0..m {
            match (data.r(i, j), data.y(i, j)) {
                (Indicator::Answered, None) => report
                    .violations
                    .push(Violation::AnsweredWithoutResponse { subject: i, item: j }),
                (Indicator::Answered, Some(y)) => {
                    if y == 0 || y as usize > design.categories[j] {
                        report.violations.push(Violation::ResponseOutOfRange {
                            subject: i,
                            item: j,
                            value: y,
                        });
                    }
                }
                (_, Some(_)) => report
                    .violations
                    .push(Violation::ResponseWithoutAnswer { subject: i, item: j }),
                _ => {}
            }
            due |= data.r(i, j) != Indicator::StructuralMissing;
        }
        if !due {
            report.violations.push(Violation::OrphanSubject { subject: i });
        }
    }
    report
}

/// Checks that tied items share loadings and category counts.
pub fn validate_restrictions(design: &ItemDesign, restrictions: &Restrictions) -> ValidationReport {
    let mut out = Vec::new();
    let m = design.n_items();
    let mut used = vec![false; m];
    for block in &restrictions.tied_blocks {
        if block.len() < 2 {
            out.push(Violation::TieMismatch("a tied block needs at least two items".into()));
            continue;
        }
        let first = block[0];
        for &j in block {
            if j >= m {
                out.push(Violation::TieMismatch(format!("item index {} out of range", j + 1)));
                continue;
            }
            if used[j] {
                out.push(Violation::TieMismatch(format!("item {} is in more than one block", j + 1)));
            }
            used[j] = true;
            if first < m
                && (design.categories[j] != design.categories[first]
                    || design.z_u[j] != design.z_u[first]
                    || design.z_v[j] != design.z_v[first])
            {
                out.push(Violation::TieMismatch(format!(
                    "items {} and {} differ in categories or loadings",
                    first + 1,
                    j + 1
                )));
            }
        }
        let anchors = block
            .iter()
            .filter(|j| design.anchors_u.contains(j) || design.anchors_v.contains(j))
            .count();
        if anchors > 1 {
            out.push(Violation::TieMismatch("a tied block holds more than one anchor item".into()));
        }
    }
    ValidationReport { violations: out }
}

/// Number of free parameters:
/// item Y-side `sum_j L_j` minus two per U-dimension; item R-side `3m` minus
/// two per V-dimension when `kV >= 2`, otherwise `2m` (`gamma_U` and
/// `delta`, all free); support `S kU + T kV`; structural
/// `(kU - 1)(C + 1) + (kV - 1)(C + 1)`.
pub fn count_free_parameters(design: &ItemDesign, config: &LatentConfig, n_cov: usize) -> usize {
    let m = design.n_items();
    let y_side: usize = design.categories.iter().sum::<usize>() - 2 * config.s;
    let r_side = if config.v_enabled() { 3 * m - 2 * config.t } else { 2 * m };
    let support = config.s * config.k_u + if config.v_enabled() { config.t * config.k_v } else { 0 };
    let structural = (config.k_u - 1) * (n_cov + 1) + (config.k_v - 1) * (n_cov + 1);
    y_side + r_side + support + structural
}
