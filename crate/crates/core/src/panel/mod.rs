//! Entity × period panels and fixed-effects regression.

pub mod build;
pub mod cluster;
pub mod fit;
pub mod ols;
pub mod within;

pub use build::{
    build_panel, panel_from_csv, panel_to_csv, read_panel, PanelBuild, PanelFocus,
    PanelObservation, PanelOptions, PeriodBucket, PopularitySeries,
};
pub use fit::{
    fit, fit_with, ClusterBy, Coefficient, Dependent, FixedEffectSet, RegressionResult,
    RegressionSpec,
};
pub use within::DemeanOptions;
