//! Compositional-generalisation and disentanglement metrics.

pub mod beta_vae;
pub mod compgen;
pub mod dci;
pub mod factor_vae;
pub mod forest;
pub mod logistic;
pub mod mig;
pub mod report;
pub mod rep;
pub mod ridge;

pub use beta_vae::beta_vae_score;
pub use compgen::{comp_gen_eval, CompGenScores};
pub use dci::{dci, dci_from_importance, DciScores};
pub use factor_vae::factor_vae_score;
pub use forest::{ForestConfig, RandomForest};
pub use logistic::{
    accuracy, fold_accuracy, log_grid, logistic_cv_fit, logistic_fit, stratified_folds, LogisticConfig, LogisticModel,
};
pub use mig::mig;
pub use rep::{pca_postprocess, RepresentationMatrix};
pub use report::{evaluate_all, EvalConfig, MetricsReport, METRIC_NAMES};
pub use ridge::{r2_score, ridge_cv_fit, ridge_fit, RidgeModel, DEFAULT_ALPHAS};
