//! `wate simulate`: one Monte Carlo cell, summarised per estimand × method.

use serde_json::json;
use wate_core::simulation::run_monte_carlo;

use crate::config::SimulateConfig;
use crate::output::{csv_bytes, json_bytes};
use crate::{CliError, Format, TOOL, VERSION};

pub fn run(cfg: &SimulateConfig) -> Result<Vec<u8>, CliError> {
    let mc = run_monte_carlo(&cfg.monte_carlo())?;
    let rows = mc.metrics(cfg.variance.alpha);
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
