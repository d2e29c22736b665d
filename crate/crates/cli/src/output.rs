use std::io::Write;
use std::path::Path;

use anyhow::Context;

use crate::CliError;

/// Writes the finished report. Files are written to a sibling temporary and
/// renamed, so a failed run never leaves a truncated report behind.
pub fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes).context("writing to standard output")?;
            stdout.flush().context("writing to standard output")?;
        }
        Some(path) => {
            let mut tmp = path.as_os_str().to_owned();
            tmp.push(".partial");
            let tmp = std::path::PathBuf::from(tmp);
            std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
            std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
        }
    }
    Ok(())
}

/// Serialises rows with a header into CSV bytes.
pub fn csv_bytes<T: serde::Serialize>(rows: &[T]) -> anyhow::Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for row in rows {
        wtr.serialize(row)?;
    }
    Ok(wtr.into_inner().map_err(|e| anyhow::anyhow!(e.to_string()))?)
}

pub fn json_bytes(value: &serde_json::Value) -> anyhow::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// JSON has no non-finite numbers; they become `null`.
pub fn finite(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::Value::from(x)
    } else {
        serde_json::Value::Null
    }
}
