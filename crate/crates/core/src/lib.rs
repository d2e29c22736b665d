//! Augmented estimators of weighted average treatment effects (WATE) with
//! analytic sandwich, nonparametric bootstrap and wild bootstrap variance
//! estimation, plus the Monte Carlo harness used to compare them.

pub mod analysis;
pub mod data;
pub mod error;
pub mod estimands;
pub mod estimator;
pub mod glm;
pub mod linalg;
pub mod rng;
pub mod simulation;
pub mod stats;
pub mod variance;

pub use analysis::{analyze, Analysis, AnalysisConfig, EstimandResult};
pub use data::{design_matrix, Dataset, DesignSpec, ModelSpecs};
pub use error::{Result, WateError};
pub use estimands::Estimand;
pub use estimator::{
    augmented_wate, fit_nuisances, influence_vector, FittedNuisances, IfVariant, InfluenceVector,
    NuisanceFit, PointEstimate,
};
pub use rng::StreamSeed;
pub use variance::{
    Method, MethodSpec, Perturbation, ScaleEstimator, VarianceEstimate, WaldInterval, WildConfig,
};
