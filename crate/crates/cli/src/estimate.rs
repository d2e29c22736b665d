//! `wate estimate`: point estimates, per-method standard errors, Wald
//! intervals and p-values, plus ESS, balance and propensity diagnostics.

use serde::Serialize;
use serde_json::{json, Map, Value};
use wate_core::estimator::{weighted_effective_sample_size, weighted_asmd};
use wate_core::stats;
use wate_core::variance::{wald_ci, wald_p_value};
use wate_core::{analyze, Analysis, Dataset, DesignSpec, ModelSpecs, StreamSeed, WateError};

use crate::config::EstimateConfig;
use crate::output::{csv_bytes, finite, json_bytes};
use crate::{CliError, Format, TOOL, VERSION};

/// One line of the flat CSV report. `kind` selects which columns are filled.
#[derive(Debug, Default, Serialize)]
struct Row {
    kind: &'static str,
    estimand: String,
    method: String,
    name: String,
    estimate: Option<f64>,
    se: Option<f64>,
    ci_lower: Option<f64>,
    ci_upper: Option<f64>,
    p_value: Option<f64>,
    replicates_used: Option<usize>,
    failures: Option<usize>,
    value: Option<f64>,
    status: String,
}

struct MethodCell {
    method: String,
    outcome: Result<CellStats, String>,
}

struct CellStats {
    se: f64,
    ci_lower: f64,
    ci_upper: f64,
    p_value: f64,
    replicates_used: usize,
    failures: usize,
}

struct EstimandReport {
    estimand: String,
    estimate: Result<f64, String>,
    ess: Result<f64, String>,
    asmd: Result<Vec<f64>, String>,
    methods: Vec<MethodCell>,
}

struct PsSummary {
    arm: &'static str,
    n: usize,
    quantiles: [(&'static str, f64); 6],
}

struct Report {
    covariates: Vec<String>,
    unweighted_asmd: Vec<f64>,
    propensity: Vec<PsSummary>,
    estimands: Vec<EstimandReport>,
}

fn specs_for(ds: &Dataset, cfg: &EstimateConfig) -> Result<ModelSpecs, CliError> {
    let spec = |names: &Option<Vec<String>>| match names {
        None => Ok(DesignSpec::all(ds.p())),
        Some(list) => DesignSpec::from_names(ds, list),
    };
    Ok(ModelSpecs::new(spec(&cfg.ps_covariates)?, spec(&cfg.or_covariates)?))
}

fn summarize_arm(arm: &'static str, e: &[f64]) -> PsSummary {
    PsSummary {
        arm,
        n: e.len(),
        quantiles: [
            ("min", stats::quantile(e, 0.0)),
            ("q25", stats::quantile(e, 0.25)),
            ("median", stats::median(e)),
            ("mean", stats::mean(e)),
            ("q75", stats::quantile(e, 0.75)),
            ("max", stats::quantile(e, 1.0)),
        ],
    }
}

fn build(ds: &Dataset, analysis: &Analysis, cfg: &EstimateConfig) -> Result<Report, CliError> {
    let n = ds.n();
    let e = &analysis.fit.e;
    let treated: Vec<f64> = (0..n).filter(|&i| ds.z()[i]).map(|i| e[i]).collect();
    let control: Vec<f64> = (0..n).filter(|&i| !ds.z()[i]).map(|i| e[i]).collect();
    let ones = vec![1.0; n];
    let unweighted_asmd = weighted_asmd(ds, &ones, &ones)?;

    let mut estimands = Vec::with_capacity(analysis.results.len());
    for res in &analysis.results {
        let estimate = res.point.as_ref().map(|p| p.tau_hat).map_err(ToString::to_string);
        let (ess, asmd) = match &res.nuisances {
            Some(nus) => (
                weighted_effective_sample_size(ds, nus).map_err(|e| e.to_string()),
                weighted_asmd(ds, &nus.w1, &nus.w0).map_err(|e| e.to_string()),
            ),
            None => {
                let msg = estimate.clone().err().unwrap_or_else(|| "nuisances unavailable".into());
                (Err(msg.clone()), Err(msg))
            }
        };
        let methods = cfg
            .variance
            .methods
            .iter()
            .zip(&res.variances)
            .map(|(m, v)| {
                let outcome = match (&res.point, v) {
                    (Ok(p), Ok(ve)) => {
                        let ci = wald_ci(p.tau_hat, ve, cfg.variance.alpha);
                        Ok(CellStats {
                            se: ve.se,
                            ci_lower: ci.lower,
                            ci_upper: ci.upper,
                            p_value: wald_p_value(p.tau_hat, ve),
                            replicates_used: ve.replicates_used,
                            failures: ve.failures,
                        })
                    }
                    (_, Err(e)) | (Err(e), _) => Err(e.to_string()),
                };
                MethodCell {
                    method: m.to_string(),
                    outcome,
                }
            })
            .collect();
        estimands.push(EstimandReport {
            estimand: res.estimand.to_string(),
            estimate,
            ess,
            asmd,
            methods,
        });
    }
    Ok(Report {
        covariates: ds.covariate_names().to_vec(),
        unweighted_asmd,
        propensity: vec![summarize_arm("treated", &treated), summarize_arm("control", &control)],
        estimands,
    })
}

fn status<T>(r: &Result<T, String>) -> String {
    match r {
        Ok(_) => "ok".into(),
        Err(e) => format!("error: {e}"),
    }
}

fn to_csv(report: &Report, cfg: &EstimateConfig) -> anyhow::Result<Vec<u8>> {
    let mut rows = vec![
        Row {
            kind: "meta",
            name: "tool".into(),
            status: format!("{TOOL} {VERSION}"),
            ..Row::default()
        },
        Row {
            kind: "meta",
            name: "config".into(),
            status: serde_json::to_string(cfg)?,
            ..Row::default()
        },
    ];
    for ps in &report.propensity {
        rows.push(Row {
            kind: "ps_summary",
            name: format!("{}:n", ps.arm),
            value: Some(ps.n as f64),
            status: "ok".into(),
            ..Row::default()
        });
        for (stat, v) in ps.quantiles {
            rows.push(Row {
                kind: "ps_summary",
                name: format!("{}:{stat}", ps.arm),
                value: Some(v),
                status: "ok".into(),
                ..Row::default()
            });
        }
    }
    for (name, v) in report.covariates.iter().zip(&report.unweighted_asmd) {
        rows.push(Row {
            kind: "asmd",
            estimand: "unweighted".into(),
            name: name.clone(),
            value: Some(*v),
            status: "ok".into(),
            ..Row::default()
        });
    }
    for er in &report.estimands {
        rows.push(Row {
            kind: "ess",
            estimand: er.estimand.clone(),
            name: "ess".into(),
            value: er.ess.as_ref().ok().copied(),
            status: status(&er.ess),
            ..Row::default()
        });
        match &er.asmd {
            Ok(values) => {
                for (name, v) in report.covariates.iter().zip(values) {
                    rows.push(Row {
                        kind: "asmd",
                        estimand: er.estimand.clone(),
                        name: name.clone(),
                        value: Some(*v),
                        status: "ok".into(),
                        ..Row::default()
                    });
                }
            }
            Err(e) => rows.push(Row {
                kind: "asmd",
                estimand: er.estimand.clone(),
                status: format!("error: {e}"),
                ..Row::default()
            }),
        }
        for cell in &er.methods {
            let mut row = Row {
                kind: "result",
                estimand: er.estimand.clone(),
                method: cell.method.clone(),
                estimate: er.estimate.as_ref().ok().copied(),
                status: status(&cell.outcome),
                ..Row::default()
            };
            if let Ok(s) = &cell.outcome {
                row.se = Some(s.se);
                row.ci_lower = Some(s.ci_lower);
                row.ci_upper = Some(s.ci_upper);
                row.p_value = Some(s.p_value);
                row.replicates_used = Some(s.replicates_used);
                row.failures = Some(s.failures);
            }
            rows.push(row);
        }
    }
    csv_bytes(&rows)
}

fn error_object(e: &str) -> Value {
    json!({ "status": format!("error: {e}") })
}

fn to_json(report: &Report, cfg: &EstimateConfig) -> anyhow::Result<Vec<u8>> {
    let mut ess = Map::new();
    let mut asmd = Map::new();
    asmd.insert(
        "unweighted".into(),
        report
            .covariates
            .iter()
            .zip(&report.unweighted_asmd)
            .map(|(c, v)| (c.clone(), finite(*v)))
            .collect::<Map<_, _>>()
            .into(),
    );
    let mut results = Map::new();
    for er in &report.estimands {
        ess.insert(
            er.estimand.clone(),
            match &er.ess {
                Ok(v) => finite(*v),
                Err(e) => error_object(e),
            },
        );
        asmd.insert(
            er.estimand.clone(),
            match &er.asmd {
                Ok(values) => report
                    .covariates
                    .iter()
                    .zip(values)
                    .map(|(c, v)| (c.clone(), finite(*v)))
                    .collect::<Map<_, _>>()
                    .into(),
                Err(e) => error_object(e),
            },
        );
        let mut methods = Map::new();
        for cell in &er.methods {
            let v = match &cell.outcome {
                Ok(s) => json!({
                    "estimate": er.estimate.as_ref().ok().map(|&t| finite(t)),
                    "se": finite(s.se),
                    "ci_lower": finite(s.ci_lower),
                    "ci_upper": finite(s.ci_upper),
                    "p_value": finite(s.p_value),
                    "replicates_used": s.replicates_used,
                    "failures": s.failures,
                    "status": "ok",
                }),
                Err(e) => error_object(e),
            };
            methods.insert(cell.method.clone(), v);
        }
        results.insert(er.estimand.clone(), methods.into());
    }
    let ps: Map<String, Value> = report
        .propensity
        .iter()
        .map(|s| {
            let mut m = Map::new();
            m.insert("n".into(), s.n.into());
            for (stat, v) in s.quantiles {
                m.insert(stat.into(), finite(v));
            }
            (s.arm.to_string(), m.into())
        })
        .collect();
    let doc = json!({
        "tool": TOOL,
        "version": VERSION,
        "config": cfg,
        "diagnostics": { "ess": ess, "asmd": asmd, "ps_summary": ps },
        "results": results,
    });
    json_bytes(&doc)
}

pub fn run(cfg: &EstimateConfig) -> Result<Vec<u8>, CliError> {
    let ds = Dataset::load_csv(&cfg.input, &cfg.treatment_col, &cfg.outcome_col).map_err(|e| match e {
        WateError::MissingColumn { .. } => CliError::from(e),
        other => CliError::Run(anyhow::Error::new(other).context(format!("loading {}", cfg.input.display()))),
    })?;
    let specs = specs_for(&ds, cfg)?;
    let analysis = analyze(&ds, &specs, &cfg.variance.analysis(), StreamSeed::new(cfg.seed))?;
    let report = build(&ds, &analysis, cfg)?;
    let bytes = match cfg.format {
        Format::Csv => to_csv(&report, cfg)?,
        Format::Json => to_json(&report, cfg)?,
    };
    Ok(bytes)
}
