//! Tilting functions `g(e)`, their derivatives, and balancing weights.
//!
//! | estimand | `g(e)` |
//! |---|---|
//! | ATE | `1` |
//! | ATT | `e` |
//! | ATC | `1 - e` |
//! | ATO (overlap) | `e(1 - e)` |
//! | ATM (matching) | `min(e, 1 - e)` |
//! | ATEN (entropy) | `-e ln e - (1 - e) ln(1 - e)` |
//! | TRIM(α) | `1{α ≤ e ≤ 1 - α}` |
//!
//! Weights are `ω1 = g/e` for treated units and `ω0 = g/(1 - e)` for controls.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WateError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Estimand {
    Ate,
    Att,
    Atc,
    Ato,
    Atm,
    Aten,
    /// Trimmed population with threshold `α ∈ (0, 0.5)`.
    Trim(f64),
}

impl Estimand {
    /// The five estimands of the simulation study.
    pub const STUDY: [Estimand; 5] = [
        Estimand::Ate,
        Estimand::Att,
        Estimand::Ato,
        Estimand::Atm,
        Estimand::Aten,
    ];

    pub fn trim(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 0.5 {
            Ok(Estimand::Trim(alpha))
        } else {
            Err(WateError::ConfigError(format!(
                "trimming threshold {alpha} outside (0, 0.5)"
            )))
        }
    }

    /// Whether `g` is constant in `e`, so the propensity-derivative terms vanish.
    pub fn has_constant_tilt(&self) -> bool {
        matches!(self, Estimand::Ate | Estimand::Trim(_))
    }
}

impl fmt::Display for Estimand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimand::Ate => f.write_str("ate"),
            Estimand::Att => f.write_str("att"),
            Estimand::Atc => f.write_str("atc"),
            Estimand::Ato => f.write_str("ato"),
            Estimand::Atm => f.write_str("atm"),
            Estimand::Aten => f.write_str("aten"),
            Estimand::Trim(a) => write!(f, "trim:{a}"),
        }
    }
}

impl FromStr for Estimand {
    type Err = WateError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "ate" => Ok(Estimand::Ate),
            "att" => Ok(Estimand::Att),
            "atc" => Ok(Estimand::Atc),
            "ato" => Ok(Estimand::Ato),
            "atm" => Ok(Estimand::Atm),
            "aten" => Ok(Estimand::Aten),
            other => match other.strip_prefix("trim:") {
                Some(a) => {
                    let alpha: f64 = a.parse().map_err(|_| {
                        WateError::ConfigError(format!("bad trimming threshold `{a}`"))
                    })?;
                    Estimand::trim(alpha)
                }
                None => Err(WateError::ConfigError(format!("unknown estimand `{s}`"))),
            },
        }
    }
}

fn check_domain(e: f64) -> Result<()> {
    if e > 0.0 && e < 1.0 {
        Ok(())
    } else {
        Err(WateError::DomainError(e))
    }
}

/// `g(e)`.
pub fn tilt(est: Estimand, e: f64) -> Result<f64> {
    check_domain(e)?;
    Ok(match est {
        Estimand::Ate => 1.0,
        Estimand::Att => e,
        Estimand::Atc => 1.0 - e,
        Estimand::Ato => e * (1.0 - e),
        Estimand::Atm => e.min(1.0 - e),
        Estimand::Aten => -e * e.ln() - (1.0 - e) * (1.0 - e).ln(),
        Estimand::Trim(a) => {
            if a <= e && e <= 1.0 - a {
                1.0
            } else {
                0.0
            }
        }
    })
}

/// `∂g/∂e`. ATM takes the subgradient 0 at its kink `e = 0.5`; TRIM uses
/// the almost-everywhere derivative 0.
pub fn tilt_derivative(est: Estimand, e: f64) -> Result<f64> {
    check_domain(e)?;
    Ok(match est {
        Estimand::Ate | Estimand::Trim(_) => 0.0,
        Estimand::Att => 1.0,
        Estimand::Atc => -1.0,
        Estimand::Ato => 1.0 - 2.0 * e,
        Estimand::Atm => {
            if e < 0.5 {
                1.0
            } else if e > 0.5 {
                -1.0
            } else {
                0.0
            }
        }
        Estimand::Aten => ((1.0 - e) / e).ln(),
    })
}

/// `(ω0, ω1) = (g/(1-e), g/e)`.
pub fn weights(est: Estimand, e: f64) -> Result<(f64, f64)> {
    let g = tilt(est, e)?;
    Ok((g / (1.0 - e), g / e))
}

/// Derivative of the tilt with respect to the linear predictor of a
/// logistic propensity model: `g'(e) e (1 - e)`. Multiply by `v_i` for `∂g/∂β`.
pub fn tilt_link_derivative(est: Estimand, e: f64) -> Result<f64> {
    Ok(tilt_derivative(est, e)? * e * (1.0 - e))
}
