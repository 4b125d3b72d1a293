//! Fixed-effects OLS on panels with entity-clustered standard errors.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::build::{check_panel, PanelObservation};
use super::cluster::clustered_covariance;
use super::ols::ols;
use super::within::{connected_components, demean_column, DemeanOptions, FeDimension};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dependent {
    SentimentTotal,
    /// Sentiment total divided by article count (0 without articles).
    SentimentMean,
    ArticleCount,
}

impl Dependent {
    fn value(self, r: &PanelObservation) -> f64 {
        match self {
            Dependent::SentimentTotal => r.sentiment_total as f64,
            Dependent::SentimentMean if r.article_count == 0 => 0.0,
            Dependent::SentimentMean => r.sentiment_total as f64 / r.article_count as f64,
            Dependent::ArticleCount => r.article_count as f64,
        }
    }
}

impl FromStr for Dependent {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sentiment" | "sentiment_total" => Ok(Dependent::SentimentTotal),
            "sentiment_mean" => Ok(Dependent::SentimentMean),
            "count" | "article_count" => Ok(Dependent::ArticleCount),
            _ => Err(Error::Config(format!("unknown dependent variable `{s}`"))),
        }
    }
}

/// Which fixed effects are absorbed. `group` is the (source, entity) pair;
/// `time` is the period.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedEffectSet {
    pub group: bool,
    pub time: bool,
}

impl FixedEffectSet {
    pub const NONE: Self = FixedEffectSet {
        group: false,
        time: false,
    };
    pub const GROUP: Self = FixedEffectSet {
        group: true,
        time: false,
    };
    pub const TIME: Self = FixedEffectSet {
        group: false,
        time: true,
    };
    pub const BOTH: Self = FixedEffectSet {
        group: true,
        time: true,
    };

    pub fn is_empty(self) -> bool {
        !self.group && !self.time
    }
}

impl FromStr for FixedEffectSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::NONE),
            "group" | "entity" | "source" => Ok(Self::GROUP),
            "time" => Ok(Self::TIME),
            "both" => Ok(Self::BOTH),
            _ => Err(Error::Config(format!("unknown fixed effects `{s}`"))),
        }
    }
}

impl fmt::Display for FixedEffectSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match (self.group, self.time) {
            (false, false) => "none",
            (true, false) => "group",
            (false, true) => "time",
            (true, true) => "both",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterBy {
    /// The panel unit: one cluster per (source, entity) pair.
    #[default]
    Entity,
    /// One cluster per entity label, pooling its sources.
    Label,
}

impl FromStr for ClusterBy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entity" => Ok(ClusterBy::Entity),
            "label" => Ok(ClusterBy::Label),
            _ => Err(Error::Config(format!("unknown cluster variable `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionSpec {
    pub dependent: Dependent,
    /// Add the popularity regressor; rows without popularity are dropped.
    pub popularity: bool,
    pub fixed_effects: FixedEffectSet,
    #[serde(default)]
    pub cluster_by: ClusterBy,
}

impl RegressionSpec {
    pub fn new(dependent: Dependent, fixed_effects: FixedEffectSet) -> Self {
        RegressionSpec {
            dependent,
            popularity: false,
            fixed_effects,
            cluster_by: ClusterBy::Entity,
        }
    }

    pub fn with_popularity(mut self) -> Self {
        self.popularity = true;
        self
    }

    pub fn regressor_names(&self) -> Vec<String> {
        let mut v = vec!["weighted_ad_ratio".to_string()];
        if self.popularity {
            v.push("popularity".to_string());
        }
        v
    }
}

/// Significance stars: `***` below 0.01, `**` below 0.05, `*` below 0.1.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub stars: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub spec: RegressionSpec,
    pub coefficients: Vec<Coefficient>,
    /// Present only when no fixed effect absorbs the constant.
    pub intercept: Option<Coefficient>,
    /// Within R² when fixed effects are absorbed, centered R² otherwise.
    pub r_squared: f64,
    pub entity_count: usize,
    pub period_count: usize,
    pub observations: usize,
    pub clusters: usize,
    /// Degrees of freedom of the t tests (clusters − 1).
    pub dof: usize,
    /// Parameter count used in the small-sample correction.
    pub parameters: usize,
    /// Rows dropped for lacking popularity.
    pub excluded_rows: usize,
    pub demean_sweeps: usize,
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

/// Regression inputs in canonical row order, before any transformation.
#[derive(Debug, Clone)]
pub struct Design {
    pub y: DVector<f64>,
    /// Regressor columns (no intercept).
    pub x: DMatrix<f64>,
    pub names: Vec<String>,
    pub groups: FeDimension,
    pub periods: FeDimension,
    pub clusters: FeDimension,
    pub excluded_rows: usize,
}

/// Select rows and columns for `spec`. Rows are sorted by
/// (entity, source, period) so that results do not depend on input order.
pub fn design(spec: &RegressionSpec, panel: &[PanelObservation]) -> Result<Design> {
    check_panel(panel)?;
    let mut rows: Vec<&PanelObservation> = panel.iter().collect();
    rows.sort_by(|a, b| a.key().cmp(&b.key()));
    let before = rows.len();
    if spec.popularity {
        rows.retain(|r| r.popularity.is_some());
    }
    let excluded_rows = before - rows.len();
    if rows.is_empty() {
        return Err(Error::Input("no panel rows to fit".into()));
    }
    let names = spec.regressor_names();
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| spec.dependent.value(r)));
    let x = DMatrix::from_fn(rows.len(), names.len(), |i, j| match j {
        0 => rows[i].weighted_ad_ratio,
        _ => rows[i].popularity.expect("filtered above"),
    });
    let group_keys: Vec<(&str, &str)> = rows
        .iter()
        .map(|r| (r.source.as_str(), r.entity.as_str()))
        .collect();
    let period_keys: Vec<&str> = rows.iter().map(|r| r.period.as_str()).collect();
    let clusters = match spec.cluster_by {
        ClusterBy::Entity => FeDimension::from_keys(&group_keys),
        ClusterBy::Label => {
            FeDimension::from_keys(&rows.iter().map(|r| r.entity.as_str()).collect::<Vec<_>>())
        }
    };
    Ok(Design {
        y,
        x,
        names,
        groups: FeDimension::from_keys(&group_keys),
        periods: FeDimension::from_keys(&period_keys),
        clusters,
        excluded_rows,
    })
}

/// Demeaned `(y, X)` for the requested fixed effects, plus the sweep count.
pub fn within_transform(
    design: &Design,
    fe: FixedEffectSet,
    opts: DemeanOptions,
) -> Result<(DVector<f64>, DMatrix<f64>, usize)> {
    let mut dims = Vec::new();
    if fe.group {
        dims.push(design.groups.clone());
    }
    if fe.time {
        dims.push(design.periods.clone());
    }
    let mut y = design.y.clone();
    let mut sweeps = demean_column(y.as_mut_slice(), &dims, opts)?;
    let mut x = design.x.clone();
    for j in 0..x.ncols() {
        let mut col: Vec<f64> = x.column(j).iter().copied().collect();
        sweeps = sweeps.max(demean_column(&mut col, &dims, opts)?);
        x.set_column(j, &DVector::from_vec(col));
    }
    Ok((y, x, sweeps))
}

fn nested_in(inner: &FeDimension, outer: &FeDimension) -> bool {
    let mut owner = vec![usize::MAX; inner.levels];
    for (&i, &o) in inner.ids.iter().zip(&outer.ids) {
        if owner[i] == usize::MAX {
            owner[i] = o;
        } else if owner[i] != o {
            return false;
        }
    }
    true
}

/// Parameters counted in the small-sample factor: regressors, the intercept
/// or the absorbed fixed-effect levels, except levels nested in clusters.
pub fn parameter_count(design: &Design, fe: FixedEffectSet) -> usize {
    let p = design.x.ncols();
    let g_nested = nested_in(&design.groups, &design.clusters);
    let t_nested = nested_in(&design.periods, &design.clusters);
    let absorbed = match (fe.group, fe.time) {
        (false, false) => 1,
        (true, false) => {
            if g_nested {
                0
            } else {
                design.groups.levels
            }
        }
        (false, true) => {
            if t_nested {
                0
            } else {
                design.periods.levels
            }
        }
        (true, true) => {
            let redundant = connected_components(&design.groups, &design.periods);
            match (g_nested, t_nested) {
                (true, true) => 0,
                (true, false) => design.periods.levels - redundant,
                (false, true) => design.groups.levels - redundant,
                (false, false) => design.groups.levels + design.periods.levels - redundant,
            }
        }
    };
    p + absorbed
}

fn coefficient(name: &str, estimate: f64, se: f64, t_dist: &StudentsT) -> Coefficient {
    let t_stat = estimate / se;
    let p_value = if t_stat.is_nan() {
        1.0
    } else {
        2.0 * (1.0 - t_dist.cdf(t_stat.abs()))
    };
    Coefficient {
        name: name.to_string(),
        estimate,
        std_error: se,
        t_stat,
        p_value,
        stars: stars(p_value).to_string(),
    }
}

/// Fit one specification with the default demeaning options.
pub fn fit(spec: &RegressionSpec, panel: &[PanelObservation]) -> Result<RegressionResult> {
    fit_with(spec, panel, DemeanOptions::default())
}

pub fn fit_with(
    spec: &RegressionSpec,
    panel: &[PanelObservation],
    opts: DemeanOptions,
) -> Result<RegressionResult> {
    let design = design(spec, panel)?;
    let fe = spec.fixed_effects;
    let (y, mut x, sweeps) = within_transform(&design, fe, opts)?;
    let mut names = design.names.clone();
    if fe.is_empty() {
        let p = x.ncols();
        x = x.insert_column(p, 1.0);
        names.push("intercept".to_string());
    }
    let fitted = ols(&y, &x, &names)?;
    let k = parameter_count(&design, fe);
    let cov = clustered_covariance(
        &x,
        &fitted.residuals,
        &fitted.xtx_inv,
        &design.clusters.ids,
        k,
    )?;
    let t_dist = StudentsT::new(0.0, 1.0, cov.dof as f64)
        .map_err(|e| Error::Domain(format!("t distribution: {e}")))?;

    let mut coefficients: Vec<Coefficient> = names
        .iter()
        .enumerate()
        .map(|(j, n)| coefficient(n, fitted.coefficients[j], cov.std_errors[j], &t_dist))
        .collect();
    let intercept = if fe.is_empty() {
        coefficients.pop()
    } else {
        None
    };

    let mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ssr = fitted.residuals.norm_squared();
    let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else { 0.0 };

    Ok(RegressionResult {
        spec: *spec,
        coefficients,
        intercept,
        r_squared,
        entity_count: design.groups.levels,
        period_count: design.periods.levels,
        observations: y.len(),
        clusters: cov.clusters,
        dof: cov.dof,
        parameters: k,
        excluded_rows: design.excluded_rows,
        demean_sweeps: sweeps,
    })
}
