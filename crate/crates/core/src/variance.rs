//! Variance of the augmented estimator: M-estimation sandwich, standard
//! bootstrap, post-weighting bootstrap and wild bootstrap, plus Wald intervals.
//!
//! Every [`VarianceEstimate::variance`] is `Var(τ̂)` on the estimator scale.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{design_matrix, Dataset, ModelSpecs};
use crate::error::{Result, WateError};
use crate::estimands::{self, Estimand};
use crate::estimator::{augmented_wate, IfVariant, NuisanceFit};
use crate::glm;
use crate::linalg::PivotedQr;
use crate::rng::StreamSeed;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Sand,
    BootI,
    BootII,
    Wb,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Sand => "SAND",
            Method::BootI => "BOOT_I",
            Method::BootII => "BOOT_II",
            Method::Wb => "WB",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Perturbation {
    Exp1,
    Rademacher,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum ScaleEstimator {
    #[default]
    Sd,
    /// `IQR / 1.349`.
    Iqr,
}

impl fmt::Display for ScaleEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleEstimator::Sd => "sd",
            ScaleEstimator::Iqr => "iqr",
        })
    }
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Perturbation::Exp1 => "exp1",
            Perturbation::Rademacher => "rademacher",
        })
    }
}

impl fmt::Display for IfVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IfVariant::IfI => "if1",
            IfVariant::IfII => "if2",
        })
    }
}

impl FromStr for ScaleEstimator {
    type Err = WateError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sd" => Ok(ScaleEstimator::Sd),
            "iqr" => Ok(ScaleEstimator::Iqr),
            _ => Err(WateError::ConfigError(format!("unknown scale estimator `{s}`"))),
        }
    }
}

impl FromStr for Perturbation {
    type Err = WateError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exp1" | "exp" => Ok(Perturbation::Exp1),
            "rademacher" | "rad" => Ok(Perturbation::Rademacher),
            _ => Err(WateError::ConfigError(format!("unknown perturbation `{s}`"))),
        }
    }
}

impl FromStr for IfVariant {
    type Err = WateError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "if1" | "i" => Ok(IfVariant::IfI),
            "if2" | "ii" => Ok(IfVariant::IfII),
            _ => Err(WateError::ConfigError(format!("unknown influence-function variant `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WildConfig {
    pub if_variant: IfVariant,
    pub perturbation: Perturbation,
    pub scale: ScaleEstimator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub method: Method,
    pub variance: f64,
    pub se: f64,
    pub replicates_requested: usize,
    pub replicates_used: usize,
    pub failures: usize,
    pub wb_config: Option<WildConfig>,
}

impl VarianceEstimate {
    fn new(method: Method, variance: f64, requested: usize, used: usize) -> Self {
        Self {
            method,
            variance,
            se: variance.sqrt(),
            replicates_requested: requested,
            replicates_used: used,
            failures: requested - used,
            wb_config: None,
        }
    }
}

/// One of the seven variance variants compared in the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MethodSpec {
    Sand,
    BootI,
    BootII,
    Wild {
        perturbation: Perturbation,
        if_variant: IfVariant,
    },
}

impl MethodSpec {
    pub const ALL: [MethodSpec; 7] = [
        MethodSpec::BootI,
        MethodSpec::BootII,
        MethodSpec::Wild { perturbation: Perturbation::Exp1, if_variant: IfVariant::IfI },
        MethodSpec::Wild { perturbation: Perturbation::Rademacher, if_variant: IfVariant::IfI },
        MethodSpec::Wild { perturbation: Perturbation::Exp1, if_variant: IfVariant::IfII },
        MethodSpec::Wild { perturbation: Perturbation::Rademacher, if_variant: IfVariant::IfII },
        MethodSpec::Sand,
    ];

    pub fn method(&self) -> Method {
        match self {
            MethodSpec::Sand => Method::Sand,
            MethodSpec::BootI => Method::BootI,
            MethodSpec::BootII => Method::BootII,
            MethodSpec::Wild { .. } => Method::Wb,
        }
    }

    pub fn is_resampling(&self) -> bool {
        !matches!(self, MethodSpec::Sand)
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodSpec::Sand => f.write_str("sand"),
            MethodSpec::BootI => f.write_str("boot1"),
            MethodSpec::BootII => f.write_str("boot2"),
            MethodSpec::Wild { perturbation, if_variant } => {
                let p = match perturbation {
                    Perturbation::Exp1 => "exp",
                    Perturbation::Rademacher => "rad",
                };
                let v = match if_variant {
                    IfVariant::IfI => 1,
                    IfVariant::IfII => 2,
                };
                write!(f, "wb{p}{v}")
            }
        }
    }
}

impl FromStr for MethodSpec {
    type Err = WateError;

    /// Accepts the seven display tokens. The bare `wb` token needs flag
    /// defaults and is resolved by the caller.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        MethodSpec::ALL
            .into_iter()
            .find(|m| m.to_string() == lower)
            .ok_or_else(|| WateError::ConfigError(format!("unknown variance method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl WaldInterval {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// `τ̂ ± z_{1-α/2} · se`.
pub fn wald_ci(tau_hat: f64, ve: &VarianceEstimate, alpha: f64) -> WaldInterval {
    let half = stats::normal_quantile(1.0 - alpha / 2.0) * ve.se;
    WaldInterval {
        lower: tau_hat - half,
        upper: tau_hat + half,
        level: 1.0 - alpha,
    }
}

/// Two-sided normal p-value for `H0: τ = 0`.
pub fn wald_p_value(tau_hat: f64, ve: &VarianceEstimate) -> f64 {
    if ve.se > 0.0 {
        2.0 * (1.0 - stats::normal_cdf((tau_hat / ve.se).abs()))
    } else if tau_hat == 0.0 {
        1.0
    } else {
        0.0
    }
}

fn check_replicates(r: usize) -> Result<()> {
    if r < 2 {
        return Err(WateError::ConfigError(format!(
            "at least 2 replicates are required, got {r}"
        )));
    }
    Ok(())
}

fn spread_variance(values: &[f64], scale: ScaleEstimator) -> f64 {
    match scale {
        ScaleEstimator::Sd => stats::sample_variance(values),
        ScaleEstimator::Iqr => (stats::iqr(values) / stats::IQR_SCALE).powi(2),
    }
}

// ---------------------------------------------------------------------------
// Sandwich

/// Stacked M-estimation parameter `(β, α1, α0, τ1, τ0, μ1, μ0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaAug {
    pub beta: DVector<f64>,
    pub alpha1: DVector<f64>,
    pub alpha0: DVector<f64>,
    pub tau1: f64,
    pub tau0: f64,
    pub mu1: f64,
    pub mu0: f64,
}

impl ThetaAug {
    pub fn tau_hat(&self) -> f64 {
        self.tau1 - self.tau0 + self.mu1 - self.mu0
    }

    pub fn dim(&self) -> usize {
        self.beta.len() + self.alpha1.len() + self.alpha0.len() + 4
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let mut v: Vec<f64> = Vec::with_capacity(self.dim());
        v.extend(self.beta.iter());
        v.extend(self.alpha1.iter());
        v.extend(self.alpha0.iter());
        v.extend([self.tau1, self.tau0, self.mu1, self.mu0]);
        DVector::from_vec(v)
    }

    /// Inverse of [`ThetaAug::to_vector`] for the given block widths.
    pub fn from_vector(v: &DVector<f64>, kv: usize, kw: usize) -> Self {
        assert_eq!(v.len(), kv + 2 * kw + 4);
        let o = kv + 2 * kw;
        Self {
            beta: v.rows(0, kv).into_owned(),
            alpha1: v.rows(kv, kw).into_owned(),
            alpha0: v.rows(kv + kw, kw).into_owned(),
            tau1: v[o],
            tau0: v[o + 1],
            mu1: v[o + 2],
            mu0: v[o + 3],
        }
    }
}

/// Solves the stacked estimating equations from already fitted nuisances.
pub fn theta_from_fit(ds: &Dataset, fit: &NuisanceFit, est: Estimand) -> Result<ThetaAug> {
    let ps = fit.ps.as_ref().ok_or_else(|| {
        WateError::ConfigError("the sandwich needs a fitted propensity model".into())
    })?;
    let nus = fit.for_estimand(est)?;
    let (mut sg, mut t1, mut t0) = (0.0, 0.0, 0.0);
    let (mut s1, mut r1, mut s0, mut r0) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..ds.n() {
        sg += nus.g[i];
        t1 += nus.g[i] * nus.m1[i];
        t0 += nus.g[i] * nus.m0[i];
        if ds.z()[i] {
            s1 += nus.w1[i];
            r1 += nus.w1[i] * (ds.y()[i] - nus.m1[i]);
        } else {
            s0 += nus.w0[i];
            r0 += nus.w0[i] * (ds.y()[i] - nus.m0[i]);
        }
    }
    if !(sg > 0.0 && s1 > 0.0 && s0 > 0.0) {
        return Err(WateError::DegenerateWeights("zero weight mass"));
    }
    Ok(ThetaAug {
        beta: ps.beta.clone(),
        alpha1: fit.or1.alpha.clone(),
        alpha0: fit.or0.alpha.clone(),
        tau1: t1 / sg,
        tau0: t0 / sg,
        mu1: r1 / s1,
        mu0: r0 / s0,
    })
}

pub fn solve_theta(ds: &Dataset, specs: &ModelSpecs, est: Estimand) -> Result<ThetaAug> {
    let fit = NuisanceFit::fit(ds, &specs.ps, &specs.or)?;
    theta_from_fit(ds, &fit, est)
}

/// Per-observation quantities shared by `ψ` and its Jacobian.
struct Pieces {
    v: DMatrix<f64>,
    w: DMatrix<f64>,
    e: Vec<f64>,
    m1: Vec<f64>,
    m0: Vec<f64>,
    g: Vec<f64>,
    /// `g'(e) e (1 - e)`.
    dg: Vec<f64>,
}

fn pieces(ds: &Dataset, specs: &ModelSpecs, est: Estimand, theta: &ThetaAug) -> Result<Pieces> {
    let v = design_matrix(ds, &specs.ps)?;
    let w = design_matrix(ds, &specs.or)?;
    let e = glm::propensity(&v, &theta.beta);
    let m1: Vec<f64> = (&w * &theta.alpha1).iter().copied().collect();
    let m0: Vec<f64> = (&w * &theta.alpha0).iter().copied().collect();
    let g = e.iter().map(|&p| estimands::tilt(est, p)).collect::<Result<Vec<_>>>()?;
    let dg = e
        .iter()
        .map(|&p| estimands::tilt_link_derivative(est, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(Pieces { v, w, e, m1, m0, g, dg })
}

/// Rows are `ψ(O_i; θ)`, stacked in the order of [`ThetaAug::to_vector`].
pub fn estimating_function(
    ds: &Dataset,
    specs: &ModelSpecs,
    est: Estimand,
    theta: &ThetaAug,
) -> Result<DMatrix<f64>> {
    let pc = pieces(ds, specs, est, theta)?;
    let (kv, kw) = (pc.v.ncols(), pc.w.ncols());
    let o = kv + 2 * kw;
    let mut psi = DMatrix::zeros(ds.n(), o + 4);
    for i in 0..ds.n() {
        let z = ds.z()[i];
        let y = ds.y()[i];
        let zf = f64::from(u8::from(z));
        let e = pc.e[i];
        for j in 0..kv {
            psi[(i, j)] = (zf - e) * pc.v[(i, j)];
        }
        for j in 0..kw {
            if z {
                psi[(i, kv + j)] = (y - pc.m1[i]) * pc.w[(i, j)];
            } else {
                psi[(i, kv + kw + j)] = (y - pc.m0[i]) * pc.w[(i, j)];
            }
        }
        psi[(i, o)] = pc.g[i] * (pc.m1[i] - theta.tau1);
        psi[(i, o + 1)] = pc.g[i] * (pc.m0[i] - theta.tau0);
        if z {
            psi[(i, o + 2)] = pc.g[i] / e * (y - pc.m1[i] - theta.mu1);
        } else {
            psi[(i, o + 3)] = pc.g[i] / (1.0 - e) * (y - pc.m0[i] - theta.mu0);
        }
    }
    Ok(psi)
}

/// Analytic bread `A = -E_N[∂ψ/∂θ']`, block lower-triangular.
pub fn bread_matrix(
    ds: &Dataset,
    specs: &ModelSpecs,
    est: Estimand,
    theta: &ThetaAug,
) -> Result<DMatrix<f64>> {
    let pc = pieces(ds, specs, est, theta)?;
    let (kv, kw) = (pc.v.ncols(), pc.w.ncols());
    let (b1, b0, o) = (kv, kv + kw, kv + 2 * kw);
    let n = ds.n();
    let mut a = DMatrix::zeros(o + 4, o + 4);
    for i in 0..n {
        let z = ds.z()[i];
        let y = ds.y()[i];
        let e = pc.e[i];
        let g = pc.g[i];
        let dg = pc.dg[i];
        let v = pc.v.row(i);
        let w = pc.w.row(i);
        let q = e * (1.0 - e);
        for r in 0..kv {
            for c in 0..kv {
                a[(r, c)] += q * v[r] * v[c];
            }
        }
        if z {
            for r in 0..kw {
                for c in 0..kw {
                    a[(b1 + r, b1 + c)] += w[r] * w[c];
                }
            }
        } else {
            for r in 0..kw {
                for c in 0..kw {
                    a[(b0 + r, b0 + c)] += w[r] * w[c];
                }
            }
        }
        for c in 0..kv {
            a[(o, c)] -= dg * v[c] * (pc.m1[i] - theta.tau1);
            a[(o + 1, c)] -= dg * v[c] * (pc.m0[i] - theta.tau0);
        }
        for c in 0..kw {
            a[(o, b1 + c)] -= g * w[c];
            a[(o + 1, b0 + c)] -= g * w[c];
        }
        a[(o, o)] += g;
        a[(o + 1, o + 1)] += g;
        if z {
            let res = y - pc.m1[i] - theta.mu1;
            for c in 0..kv {
                a[(o + 2, c)] -= (dg - (1.0 - e) * g) * v[c] / e * res;
            }
            for c in 0..kw {
                a[(o + 2, b1 + c)] += g / e * w[c];
            }
            a[(o + 2, o + 2)] += g / e;
        } else {
            let res = y - pc.m0[i] - theta.mu0;
            for c in 0..kv {
                a[(o + 3, c)] -= (dg + e * g) * v[c] / (1.0 - e) * res;
            }
            for c in 0..kw {
                a[(o + 3, b0 + c)] += g / (1.0 - e) * w[c];
            }
            a[(o + 3, o + 3)] += g / (1.0 - e);
        }
    }
    a /= n as f64;
    Ok(a)
}

/// `c = (0, 0, 0, 1, -1, 1, -1)` expanded to the block widths.
pub fn contrast_vector(kv: usize, kw: usize) -> DVector<f64> {
    let o = kv + 2 * kw;
    let mut c = DVector::zeros(o + 4);
    c[o] = 1.0;
    c[o + 1] = -1.0;
    c[o + 2] = 1.0;
    c[o + 3] = -1.0;
    c
}

fn solve_block(a: &DMatrix<f64>, start: usize, len: usize, rhs: DVector<f64>, name: &str) -> Result<DVector<f64>> {
    let block = a.view((start, start), (len, len)).into_owned();
    PivotedQr::new(block)
        .solve(&rhs)
        .ok_or_else(|| WateError::SandwichUnobtainable(format!("{name} block is singular")))
}

/// `(1/N) c' A⁻¹ B A⁻ᵀ c` via the block-triangular structure of `A`.
pub fn sandwich_variance(
    ds: &Dataset,
    theta: &ThetaAug,
    specs: &ModelSpecs,
    est: Estimand,
) -> Result<VarianceEstimate> {
    let a = bread_matrix(ds, specs, est, theta)?;
    let psi = estimating_function(ds, specs, est, theta)?;
    let (kv, kw) = (theta.beta.len(), theta.alpha1.len());
    let (b1, b0, o) = (kv, kv + kw, kv + 2 * kw);

    // a' = c' A⁻¹: the lower-right block is diagonal, so its part is explicit.
    let mut d = [0.0; 4];
    let sign = [1.0, -1.0, 1.0, -1.0];
    for k in 0..4 {
        let diag = a[(o + k, o + k)];
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(WateError::SandwichUnobtainable(format!(
                "diagonal entry {k} of the lower block is {diag}"
            )));
        }
        d[k] = sign[k] / diag;
    }
    // rhs = C21' d, solved against the symmetric block-diagonal C11.
    let mut rhs = DVector::zeros(o);
    for k in 0..4 {
        for c in 0..o {
            rhs[c] += a[(o + k, c)] * d[k];
        }
    }
    let x_beta = solve_block(&a, 0, kv, rhs.rows(0, kv).into_owned(), "propensity")?;
    let x_a1 = solve_block(&a, b1, kw, rhs.rows(b1, kw).into_owned(), "treated outcome")?;
    let x_a0 = solve_block(&a, b0, kw, rhs.rows(b0, kw).into_owned(), "control outcome")?;

    let mut coef = DVector::zeros(o + 4);
    coef.rows_mut(0, kv).copy_from(&(-x_beta));
    coef.rows_mut(b1, kw).copy_from(&(-x_a1));
    coef.rows_mut(b0, kw).copy_from(&(-x_a0));
    for k in 0..4 {
        coef[o + k] = d[k];
    }
    let proj = &psi * &coef;
    let n = ds.n() as f64;
    let variance = proj.norm_squared() / n / n;
    if !variance.is_finite() {
        return Err(WateError::SandwichUnobtainable("non-finite variance".into()));
    }
    Ok(VarianceEstimate::new(Method::Sand, variance, 0, 0))
}

// ---------------------------------------------------------------------------
// Resampling

fn resample_indices(n: usize, seed: StreamSeed) -> Vec<usize> {
    let mut rng = seed.rng();
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

fn summarise_replicates(
    method: Method,
    draws: &[Vec<Option<f64>>],
    k: usize,
    scale: ScaleEstimator,
) -> Result<VarianceEstimate> {
    let requested = draws.len();
    let ok: Vec<f64> = draws.iter().filter_map(|d| d[k]).collect();
    // Fewer than ten requested replicates must all succeed.
    let required = 10.max(requested / 4).min(requested).max(2);
    if ok.len() < required {
        return Err(WateError::TooFewSuccessfulReplicates {
            used: ok.len(),
            requested,
            required,
        });
    }
    Ok(VarianceEstimate::new(method, spread_variance(&ok, scale), requested, ok.len()))
}

fn replicate_estimates(ds: &Dataset, fit: Result<NuisanceFit>, ests: &[Estimand]) -> Vec<Option<f64>> {
    match fit {
        Err(_) => vec![None; ests.len()],
        Ok(fit) => ests
            .iter()
            .map(|&est| {
                fit.for_estimand(est)
                    .and_then(|nus| augmented_wate(ds, &nus))
                    .ok()
                    .map(|p| p.tau_hat)
            })
            .collect(),
    }
}

/// Standard bootstrap for several estimands sharing the same resamples.
/// Each entry of the result is `Err` only when too few replicates succeeded
/// for that estimand.
pub fn bootstrap_standard_multi(
    ds: &Dataset,
    specs: &ModelSpecs,
    ests: &[Estimand],
    r: usize,
    seed: StreamSeed,
    scale: ScaleEstimator,
) -> Result<Vec<Result<VarianceEstimate>>> {
    check_replicates(r)?;
    let draws: Vec<Vec<Option<f64>>> = (0..r as u64)
        .into_par_iter()
        .map(|b| {
            let rows = resample_indices(ds.n(), seed.child(b));
            let boot = ds.resample(&rows);
            let fit = NuisanceFit::fit(&boot, &specs.ps, &specs.or);
            replicate_estimates(&boot, fit, ests)
        })
        .collect();
    Ok((0..ests.len())
        .map(|k| summarise_replicates(Method::BootI, &draws, k, scale))
        .collect())
}

/// BOOT I: resample rows, refit both nuisance models, re-estimate.
pub fn bootstrap_standard(
    ds: &Dataset,
    specs: &ModelSpecs,
    est: Estimand,
    r: usize,
    seed: StreamSeed,
) -> Result<VarianceEstimate> {
    bootstrap_standard_multi(ds, specs, &[est], r, seed, ScaleEstimator::Sd)?
        .pop()
        .expect("one estimand")
}

/// Post-weighting bootstrap for several estimands sharing the same resamples.
/// `e` are the original-sample propensity scores, carried into each replicate.
pub fn bootstrap_post_weighting_multi(
    ds: &Dataset,
    e: &[f64],
    specs: &ModelSpecs,
    ests: &[Estimand],
    r: usize,
    seed: StreamSeed,
    scale: ScaleEstimator,
) -> Result<Vec<Result<VarianceEstimate>>> {
    check_replicates(r)?;
    assert_eq!(e.len(), ds.n(), "one propensity per row");
    let draws: Vec<Vec<Option<f64>>> = (0..r as u64)
        .into_par_iter()
        .map(|b| {
            let rows = resample_indices(ds.n(), seed.child(b));
            let boot = ds.resample(&rows);
            let eb: Vec<f64> = rows.iter().map(|&i| e[i]).collect();
            let fit = NuisanceFit::with_propensity(&boot, eb, &specs.or);
            replicate_estimates(&boot, fit, ests)
        })
        .collect();
    Ok((0..ests.len())
        .map(|k| summarise_replicates(Method::BootII, &draws, k, scale))
        .collect())
}

/// BOOT II: resample `(Z, X, Y, ê)` jointly and refit only the outcome models.
/// The point estimate to report alongside is the original-sample one.
pub fn bootstrap_post_weighting(
    ds: &Dataset,
    nus: &crate::estimator::FittedNuisances,
    specs: &ModelSpecs,
    est: Estimand,
    r: usize,
    seed: StreamSeed,
    scale: ScaleEstimator,
) -> Result<VarianceEstimate> {
    bootstrap_post_weighting_multi(ds, &nus.e, specs, &[est], r, seed, scale)?
        .pop()
        .expect("one estimand")
}

/// Wild bootstrap for several influence vectors sharing the same multipliers.
pub fn wild_bootstrap_many(
    phis: &[&[f64]],
    r: usize,
    seed: StreamSeed,
    perturbation: Perturbation,
    scale: ScaleEstimator,
) -> Result<Vec<VarianceEstimate>> {
    check_replicates(r)?;
    let n = phis.first().map_or(0, |p| p.len());
    for phi in phis {
        if phi.len() != n || phi.iter().any(|v| !v.is_finite()) {
            return Err(WateError::InvalidDataset(
                "influence values must be finite and of equal length".into(),
            ));
        }
    }
    if n == 0 {
        return Err(WateError::InvalidDataset("empty influence vector".into()));
    }
    let root_n = (n as f64).sqrt();
    let deltas: Vec<Vec<f64>> = (0..r as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = seed.child(b).rng();
            let mut acc = vec![0.0; phis.len()];
            for i in 0..n {
                let xi: f64 = match perturbation {
                    Perturbation::Exp1 => rng.sample(Exp1),
                    Perturbation::Rademacher => {
                        if rng.random::<bool>() {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                };
                for (a, phi) in acc.iter_mut().zip(phis) {
                    *a += xi * phi[i];
                }
            }
            acc.iter().map(|a| a / root_n).collect()
        })
        .collect();
    Ok((0..phis.len())
        .map(|k| {
            let d: Vec<f64> = deltas.iter().map(|row| row[k]).collect();
            let sigma = spread_variance(&d, scale);
            VarianceEstimate::new(Method::Wb, sigma / n as f64, r, r)
        })
        .collect())
}

/// Wild bootstrap: `Δ_r = N^{-1/2} Σ ξ_i φ_i`, variance `scale(Δ)² / N`.
pub fn wild_bootstrap(
    phi: &crate::estimator::InfluenceVector,
    r: usize,
    seed: StreamSeed,
    perturbation: Perturbation,
    scale: ScaleEstimator,
) -> Result<VarianceEstimate> {
    let mut ve = wild_bootstrap_many(&[&phi.phi], r, seed, perturbation, scale)?
        .pop()
        .expect("one vector");
    ve.wb_config = Some(WildConfig {
        if_variant: phi.variant,
        perturbation,
        scale,
    });
    Ok(ve)
}
