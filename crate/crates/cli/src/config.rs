//! Flag resolution and validation. Everything here runs before any data are
//! read or generated, so a bad invocation fails fast and writes nothing.

use std::path::PathBuf;

use serde::Serialize;
use wate_core::simulation::{EffectType, Scenario, SimModel};
use wate_core::{AnalysisConfig, Estimand, IfVariant, MethodSpec, Perturbation, ScaleEstimator};

use crate::{CliError, EstimateArgs, Format, SimulateArgs, TruthArgs, VarianceArgs};

fn parse<T: std::str::FromStr<Err = wate_core::WateError>>(s: &str) -> Result<T, CliError> {
    s.parse::<T>().map_err(CliError::from)
}

fn parse_list<T: std::str::FromStr<Err = wate_core::WateError>>(items: &[String]) -> Result<Vec<T>, CliError> {
    items.iter().filter(|s| !s.trim().is_empty()).map(|s| parse(s)).collect()
}

fn no_duplicates<T: PartialEq + std::fmt::Display>(what: &str, items: &[T]) -> Result<(), CliError> {
    for (i, a) in items.iter().enumerate() {
        if items[..i].contains(a) {
            return Err(CliError::Config(format!("{what} `{a}` listed more than once")));
        }
    }
    Ok(())
}

/// Resolved variance settings shared by `estimate` and `simulate`.
#[derive(Debug, Clone, Serialize)]
pub struct VarianceConfig {
    #[serde(serialize_with = "display_list")]
    pub estimands: Vec<Estimand>,
    #[serde(serialize_with = "display_list")]
    pub methods: Vec<MethodSpec>,
    pub replicates: usize,
    pub alpha: f64,
    #[serde(serialize_with = "display")]
    pub scale: ScaleEstimator,
    #[serde(serialize_with = "display")]
    pub perturbation: Perturbation,
    #[serde(serialize_with = "display")]
    pub if_variant: IfVariant,
}

fn display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn display_list<T: std::fmt::Display, S: serde::Serializer>(v: &[T], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(ToString::to_string))
}

impl VarianceConfig {
    fn resolve(args: &VarianceArgs) -> Result<Self, CliError> {
        let scale: ScaleEstimator = parse(&args.scale)?;
        let perturbation: Perturbation = parse(&args.perturbation)?;
        let if_variant: IfVariant = parse(&args.if_variant)?;
        let estimands: Vec<Estimand> = parse_list(&args.estimands)?;
        let methods = args
            .methods
            .iter()
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                if s.trim().eq_ignore_ascii_case("wb") {
                    Ok(MethodSpec::Wild { perturbation, if_variant })
                } else {
                    parse(s)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        no_duplicates("estimand", &estimands)?;
        no_duplicates("method", &methods)?;
        if !(args.alpha > 0.0 && args.alpha < 1.0) {
            return Err(CliError::Config(format!("--alpha must lie in (0, 1), got {}", args.alpha)));
        }
        let cfg = Self {
            estimands,
            methods,
            replicates: args.replicates,
            alpha: args.alpha,
            scale,
            perturbation,
            if_variant,
        };
        cfg.analysis().validate()?;
        Ok(cfg)
    }

    pub fn analysis(&self) -> AnalysisConfig {
        AnalysisConfig {
            estimands: self.estimands.clone(),
            methods: self.methods.clone(),
            replicates: self.replicates,
            scale: self.scale,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateConfig {
    pub subcommand: &'static str,
    pub input: PathBuf,
    pub treatment_col: String,
    pub outcome_col: String,
    pub ps_covariates: Option<Vec<String>>,
    pub or_covariates: Option<Vec<String>>,
    pub seed: u64,
    #[serde(flatten)]
    pub variance: VarianceConfig,
    pub format: Format,
}

impl EstimateConfig {
    pub fn resolve(args: &EstimateArgs) -> Result<Self, CliError> {
        let variance = VarianceConfig::resolve(&args.variance)?;
        for (flag, list) in [("--ps-covariates", &args.ps_covariates), ("--or-covariates", &args.or_covariates)] {
            if let Some(names) = list {
                if names.iter().any(|s| s.trim().is_empty()) {
                    return Err(CliError::Config(format!("{flag} contains an empty name")));
                }
                no_duplicates("covariate", names)?;
            }
        }
        Ok(Self {
            subcommand: "estimate",
            input: args.input.clone(),
            treatment_col: args.treatment_col.clone(),
            outcome_col: args.outcome_col.clone(),
            ps_covariates: args.ps_covariates.clone(),
            or_covariates: args.or_covariates.clone(),
            seed: args.seed,
            variance,
            format: args.output.format,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateConfig {
    pub subcommand: &'static str,
    #[serde(serialize_with = "model_id")]
    pub model: SimModel,
    pub n: usize,
    #[serde(serialize_with = "display")]
    pub effect: EffectType,
    #[serde(serialize_with = "display")]
    pub scenario: Scenario,
    pub mc_reps: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub variance: VarianceConfig,
    pub format: Format,
}

fn model_id<S: serde::Serializer>(m: &SimModel, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u8(m.id())
}

impl SimulateConfig {
    pub fn resolve(args: &SimulateArgs) -> Result<Self, CliError> {
        let variance = VarianceConfig::resolve(&args.variance)?;
        let model = SimModel::new(args.model)?;
        let cfg = Self {
            subcommand: "simulate",
            n: args.n.unwrap_or_else(|| model.n_default()),
            model,
            effect: parse(&args.effect)?,
            scenario: parse(&args.scenario)?,
            mc_reps: args.mc_reps,
            seed: args.seed,
            variance,
            format: args.output.format,
        };
        cfg.monte_carlo().validate()?;
        Ok(cfg)
    }

    pub fn monte_carlo(&self) -> wate_core::simulation::MonteCarloConfig {
        wate_core::simulation::MonteCarloConfig {
            model: self.model.clone(),
            n: self.n,
            effect: self.effect,
            scenario: self.scenario,
            estimands: self.variance.estimands.clone(),
            methods: self.variance.methods.clone(),
            m: self.mc_reps,
            r: self.variance.replicates,
            seed: self.seed,
            scale: self.variance.scale,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TruthConfig {
    pub subcommand: &'static str,
    #[serde(serialize_with = "model_ids")]
    pub models: Vec<SimModel>,
    #[serde(serialize_with = "display_list")]
    pub effects: Vec<EffectType>,
    #[serde(serialize_with = "display_list")]
    pub estimands: Vec<Estimand>,
    #[serde(serialize_with = "display_list")]
    pub scenarios: Vec<Scenario>,
    pub n_super: usize,
    pub seed: u64,
    pub format: Format,
}

fn model_ids<S: serde::Serializer>(m: &[SimModel], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(m.iter().map(SimModel::id))
}

impl TruthConfig {
    pub fn resolve(args: &TruthArgs) -> Result<Self, CliError> {
        let models = args
            .model
            .iter()
            .map(|&id| SimModel::new(id).map_err(CliError::from))
            .collect::<Result<Vec<_>, _>>()?;
        let ids: Vec<u8> = models.iter().map(SimModel::id).collect();
        no_duplicates("model", &ids)?;
        let effects: Vec<EffectType> = parse_list(&args.effect)?;
        let estimands: Vec<Estimand> = parse_list(&args.estimands)?;
        let scenarios: Vec<Scenario> = parse_list(&args.scenario)?;
        no_duplicates("effect", &effects)?;
        no_duplicates("estimand", &estimands)?;
        no_duplicates("scenario", &scenarios)?;
        if models.is_empty() || effects.is_empty() || estimands.is_empty() {
            return Err(CliError::Config("models, effects and estimands must be non-empty".into()));
        }
        if args.n_super < 2 {
            return Err(CliError::Config(format!("--n-super must be at least 2, got {}", args.n_super)));
        }
        Ok(Self {
            subcommand: "truth",
            models,
            effects,
            estimands,
            scenarios,
            n_super: args.n_super,
            seed: args.seed,
            format: args.output.format,
        })
    }
}
