//! `wate truth`: super-population true WATEs and, per working-model
//! scenario, the pseudo-true values the augmented estimator converges to.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use wate_core::rng::purpose;
use wate_core::simulation::{pseudo_true_wate_many, true_wate_many, EffectType, SimModel};
use wate_core::StreamSeed;

use crate::config::TruthConfig;
use crate::output::{csv_bytes, json_bytes};
use crate::{CliError, Format, TOOL, VERSION};

/// An empty `scenario` marks the true WATE; otherwise `truth` holds the
/// pseudo-true value under that scenario's working models.
#[derive(Debug, Serialize)]
struct TruthRow {
    model: u8,
    effect: String,
    estimand: String,
    scenario: String,
    truth: f64,
    n_super: usize,
    seed: u64,
}

fn cell(cfg: &TruthConfig, model: &SimModel, effect: EffectType) -> wate_core::Result<Vec<TruthRow>> {
    let root = StreamSeed::new(cfg.seed);
    let row = |est: &wate_core::Estimand, scenario: String, truth: f64| TruthRow {
        model: model.id(),
        effect: effect.to_string(),
        estimand: est.to_string(),
        scenario,
        truth,
        n_super: cfg.n_super,
        seed: cfg.seed,
    };
    let truths = true_wate_many(model, effect, &cfg.estimands, cfg.n_super, root.child(purpose::SUPER_POPULATION))?;
    let mut rows: Vec<TruthRow> = cfg.estimands.iter().zip(truths).map(|(e, t)| row(e, String::new(), t)).collect();
    for &scenario in &cfg.scenarios {
        // The same draw serves every scenario, so differences between
        // scenarios are not Monte Carlo noise.
        let pseudo = pseudo_true_wate_many(
            model,
            effect,
            &cfg.estimands,
            scenario,
            cfg.n_super,
            root.child(purpose::DATA),
        )?;
        rows.extend(cfg.estimands.iter().zip(pseudo).map(|(e, t)| row(e, scenario.to_string(), t)));
    }
    Ok(rows)
}

pub fn run(cfg: &TruthConfig) -> Result<Vec<u8>, CliError> {
    let cells: Vec<(SimModel, EffectType)> = cfg
        .models
        .iter()
        .flat_map(|m| cfg.effects.iter().map(move |&e| (m.clone(), e)))
        .collect();
    let tables = cells
        .par_iter()
        .map(|(m, e)| cell(cfg, m, *e))
        .collect::<wate_core::Result<Vec<_>>>()?;
    let rows: Vec<TruthRow> = tables.into_iter().flatten().collect();
    let bytes = match cfg.format {
        Format::Csv => csv_bytes(&rows)?,
        Format::Json => json_bytes(&json!({
            "tool": TOOL,
            "version": VERSION,
            "config": cfg,
            "rows": rows,
        }))?,
    };
    Ok(bytes)
}
