//! One full analysis of a dataset: nuisance fits, point estimates for several
//! estimands, and every requested variance method.
//!
//! Bootstrap resamples and wild-bootstrap multipliers are shared across
//! estimands, and multipliers are also shared across influence-function
//! variants. Each method draws from its own sub-stream of the seed.

use crate::data::{Dataset, ModelSpecs};
use crate::error::{Result, WateError};
use crate::estimands::Estimand;
use crate::estimator::{augmented_wate, influence_vector, FittedNuisances, NuisanceFit, PointEstimate};
use crate::rng::{purpose, StreamSeed};
use crate::variance::{
    bootstrap_post_weighting_multi, bootstrap_standard_multi, sandwich_variance, theta_from_fit,
    wild_bootstrap_many, MethodSpec, Perturbation, ScaleEstimator, VarianceEstimate, WildConfig,
};

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub estimands: Vec<Estimand>,
    pub methods: Vec<MethodSpec>,
    pub replicates: usize,
    /// Applied to the post-weighting and wild bootstraps; the standard
    /// bootstrap always uses the sample variance.
    pub scale: ScaleEstimator,
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.estimands.is_empty() {
            return Err(WateError::ConfigError("no estimands requested".into()));
        }
        if self.methods.is_empty() {
            return Err(WateError::ConfigError("no variance methods requested".into()));
        }
        if self.replicates < 2 && self.methods.iter().any(MethodSpec::is_resampling) {
            return Err(WateError::ConfigError(format!(
                "resampling methods need at least 2 replicates, got {}",
                self.replicates
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EstimandResult {
    pub estimand: Estimand,
    pub point: Result<PointEstimate>,
    /// Same order as [`AnalysisConfig::methods`].
    pub variances: Vec<Result<VarianceEstimate>>,
    pub nuisances: Option<FittedNuisances>,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub fit: NuisanceFit,
    pub results: Vec<EstimandResult>,
}

/// Runs the configured analysis. Fails only on configuration errors or when
/// the nuisance models cannot be fitted; per-estimand and per-method failures
/// are reported inside the result.
pub fn analyze(ds: &Dataset, specs: &ModelSpecs, config: &AnalysisConfig, seed: StreamSeed) -> Result<Analysis> {
    config.validate()?;
    let fit = NuisanceFit::fit(ds, &specs.ps, &specs.or)?;
    let ests = &config.estimands;
    let k = ests.len();

    let mut nuisances = Vec::with_capacity(k);
    let mut points = Vec::with_capacity(k);
    for &est in ests {
        match fit.for_estimand(est) {
            Ok(nus) => {
                points.push(augmented_wate(ds, &nus));
                nuisances.push(Some(nus));
            }
            Err(e) => {
                points.push(Err(e));
                nuisances.push(None);
            }
        }
    }

    let wants = |pred: fn(&MethodSpec) -> bool| config.methods.iter().any(pred);
    let boot1 = if wants(|m| *m == MethodSpec::BootI) {
        Some(bootstrap_standard_multi(
            ds,
            specs,
            ests,
            config.replicates,
            seed.child(purpose::BOOT_STANDARD),
            ScaleEstimator::Sd,
        )?)
    } else {
        None
    };
    let boot2 = if wants(|m| *m == MethodSpec::BootII) {
        Some(bootstrap_post_weighting_multi(
            ds,
            &fit.e,
            specs,
            ests,
            config.replicates,
            seed.child(purpose::BOOT_POST_WEIGHTING),
            config.scale,
        )?)
    } else {
        None
    };

    // wild[method index][estimand index]
    let mut wild: Vec<Vec<Option<Result<VarianceEstimate>>>> = vec![vec![None; k]; config.methods.len()];
    for (pert, tag) in [
        (Perturbation::Exp1, purpose::WILD_EXP),
        (Perturbation::Rademacher, purpose::WILD_RADEMACHER),
    ] {
        let mut slots = Vec::new();
        let mut phis = Vec::new();
        for (j, m) in config.methods.iter().enumerate() {
            let MethodSpec::Wild { perturbation, if_variant } = *m else {
                continue;
            };
            if perturbation != pert {
                continue;
            }
            for i in 0..k {
                let (Ok(point), Some(nus)) = (&points[i], &nuisances[i]) else {
                    continue;
                };
                match influence_vector(ds, nus, point.tau_hat, if_variant) {
                    Ok(phi) => {
                        slots.push((j, i, if_variant));
                        phis.push(phi.phi);
                    }
                    Err(e) => wild[j][i] = Some(Err(e)),
                }
            }
        }
        if phis.is_empty() {
            continue;
        }
        let refs: Vec<&[f64]> = phis.iter().map(Vec::as_slice).collect();
        let out = wild_bootstrap_many(&refs, config.replicates, seed.child(tag), pert, config.scale)?;
        for ((j, i, if_variant), mut ve) in slots.into_iter().zip(out) {
            ve.wb_config = Some(WildConfig {
                if_variant,
                perturbation: pert,
                scale: config.scale,
            });
            wild[j][i] = Some(Ok(ve));
        }
    }

    let mut results = Vec::with_capacity(k);
    for (i, (&est, (point, nus))) in ests.iter().zip(points.into_iter().zip(nuisances)).enumerate() {
        let mut variances = Vec::with_capacity(config.methods.len());
        for (j, m) in config.methods.iter().enumerate() {
            let v = if let Err(e) = &point {
                Err(e.clone())
            } else {
                match m {
                    MethodSpec::BootI => boot1.as_ref().expect("computed")[i].clone(),
                    MethodSpec::BootII => boot2.as_ref().expect("computed")[i].clone(),
                    MethodSpec::Wild { .. } => wild[j][i].take().expect("computed"),
                    MethodSpec::Sand => {
                        theta_from_fit(ds, &fit, est).and_then(|theta| sandwich_variance(ds, &theta, specs, est))
                    }
                }
            };
            variances.push(v);
        }
        results.push(EstimandResult {
            estimand: est,
            point,
            variances,
            nuisances: nus,
        });
    }
    Ok(Analysis { fit, results })
}
