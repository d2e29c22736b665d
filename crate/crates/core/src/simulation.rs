//! Synthetic data-generating process, true and pseudo-true estimands, and the
//! Monte Carlo harness with its summary metrics.
//!
//! Covariates: `X4 ~ Bern(0.5)`, `X3 | X4 ~ Bern(0.2 X4 + 0.4)`,
//! `(X1, X2) | X3, X4 ~ N(μ, Σ)` with
//! `μ = (-X3 + X4 + 0.5 X3 X4, X3 - X4 + X3 X4)` and
//! `Σ = X3 [[1, .5], [.5, 1]] + (1 - X3) [[2, .25], [.25, 2]]`,
//! then `X5 = X1²`, `X6 = X1 X2`, `X7 = X2²`.
//! Outcomes: `Y(z) = 0.5 + X1 + 0.6 X2 + 2.2 X3 - 1.2 X4 + (X1 + X2)² + z δ(X) + ε(z)`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, AnalysisConfig};
use crate::data::{Dataset, DesignSpec, ModelSpecs};
use crate::error::{Result, WateError};
use crate::estimands::{self, Estimand};
use crate::estimator::{augmented_wate, NuisanceFit};
use crate::glm;
use crate::linalg::PivotedQr;
use crate::rng::{purpose, StreamSeed};
use crate::stats;
use crate::variance::{MethodSpec, ScaleEstimator};

pub const COVARIATE_NAMES: [&str; 7] = ["x1", "x2", "x3", "x4", "x5", "x6", "x7"];

/// Super-population size used for truths.
pub const N_SUPER: usize = 1_000_000;
/// Seed reserved for the cached truth super-population.
pub const TRUTH_SEED: u64 = 20_240_601;

const SLOPES: [f64; 7] = [0.3, 0.4, 0.4, 0.4, -0.1, -0.1, 0.1];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimModel {
    id: u8,
    beta: [f64; 8],
    n_default: usize,
}

impl SimModel {
    pub fn new(id: u8) -> Result<Self> {
        let shared = |b0: f64| {
            let mut b = [b0; 8];
            b[1..].copy_from_slice(&SLOPES);
            b
        };
        let (beta, n_default) = match id {
            1 => (shared(-2.17), 1000),
            2 => (shared(-0.78), 1000),
            3 => (shared(0.98), 1000),
            4 => ([0.2, 1.0, -0.9, -0.9, 0.9, 0.15, 0.15, -0.2], 1000),
            5 => (shared(0.98), 50),
            _ => return Err(WateError::ConfigError(format!("unknown simulation model {id}"))),
        };
        Ok(Self { id, beta, n_default })
    }

    pub fn id(&self) -> u8 {
        self.id
    }

    pub fn beta(&self) -> &[f64; 8] {
        &self.beta
    }

    pub fn n_default(&self) -> usize {
        self.n_default
    }

    /// `expit(β'(1, X1, …, X7))`.
    pub fn propensity(&self, x: &[f64; 7]) -> f64 {
        let eta = self.beta[0] + (0..7).map(|j| self.beta[j + 1] * x[j]).sum::<f64>();
        glm::expit(eta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EffectType {
    Homogeneous,
    Heterogeneous,
}

impl EffectType {
    pub fn delta(&self, x: &[f64; 7]) -> f64 {
        match self {
            EffectType::Homogeneous => 4.0,
            EffectType::Heterogeneous => 4.0 + 3.0 * (x[0] + x[1]).powi(2) + x[0] * x[2],
        }
    }
}

impl fmt::Display for EffectType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EffectType::Homogeneous => "homogeneous",
            EffectType::Heterogeneous => "heterogeneous",
        })
    }
}

impl FromStr for EffectType {
    type Err = WateError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "homogeneous" | "hom" | "constant" => Ok(EffectType::Homogeneous),
            "heterogeneous" | "het" => Ok(EffectType::Heterogeneous),
            _ => Err(WateError::ConfigError(format!("unknown effect type `{s}`"))),
        }
    }
}

/// Which nuisance models are correctly specified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// Both correct.
    A1,
    /// Propensity model only.
    A2,
    /// Outcome model only.
    A3,
    /// Neither.
    A4,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::A1, Scenario::A2, Scenario::A3, Scenario::A4];

    fn spec(correct: bool) -> DesignSpec {
        DesignSpec::new(if correct { (0..7).collect() } else { (0..4).collect() })
    }

    pub fn specs(&self) -> ModelSpecs {
        let (ps, or) = match self {
            Scenario::A1 => (true, true),
            Scenario::A2 => (true, false),
            Scenario::A3 => (false, true),
            Scenario::A4 => (false, false),
        };
        ModelSpecs::new(Self::spec(ps), Self::spec(or))
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Scenario {
    type Err = WateError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A1" => Ok(Scenario::A1),
            "A2" => Ok(Scenario::A2),
            "A3" => Ok(Scenario::A3),
            "A4" => Ok(Scenario::A4),
            _ => Err(WateError::ConfigError(format!("unknown scenario `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub dataset: Dataset,
    pub true_e: Vec<f64>,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub delta: Vec<f64>,
}

/// The random inputs of one covariate draw: `X3`, `X4` and the two standard
/// normals behind `(X1, X2)`.
#[derive(Debug, Clone, Copy)]
struct CovariateNoise {
    x3: f64,
    x4: f64,
    u1: f64,
    u2: f64,
}

impl CovariateNoise {
    fn draw<R: Rng>(rng: &mut R) -> Self {
        let x4 = f64::from(u8::from(rng.random::<f64>() < 0.5));
        let x3 = f64::from(u8::from(rng.random::<f64>() < 0.2 * x4 + 0.4));
        let u1 = rng.sample(StandardNormal);
        let u2 = rng.sample(StandardNormal);
        Self { x3, x4, u1, u2 }
    }

    fn cell(&self) -> usize {
        (self.x3 as usize) + 2 * (self.x4 as usize)
    }

    fn covariates(&self) -> [f64; 7] {
        let (x3, x4) = (self.x3, self.x4);
        let m1 = -x3 + x4 + 0.5 * x3 * x4;
        let m2 = x3 - x4 + x3 * x4;
        let (s11, s12, s22) = if x3 == 1.0 { (1.0, 0.5, 1.0) } else { (2.0, 0.25, 2.0) };
        let l11 = f64::sqrt(s11);
        let l21 = s12 / l11;
        let l22 = (s22 - l21 * l21).sqrt();
        let x1 = m1 + l11 * self.u1;
        let x2 = m2 + l21 * self.u1 + l22 * self.u2;
        [x1, x2, x3, x4, x1 * x1, x1 * x2, x2 * x2]
    }
}

/// `P(X3 = a, X4 = b)` indexed by `a + 2b`.
const CELL_PROBABILITIES: [f64; 4] = [0.3, 0.2, 0.2, 0.3];

/// Draws `n` units from the given model.
pub fn generate(model: &SimModel, n: usize, effect: EffectType, seed: StreamSeed) -> Result<SyntheticDataset> {
    if n < 2 {
        return Err(WateError::ConfigError(format!("sample size {n} is below 2")));
    }
    let mut rng = seed.rng();
    let mut cov = DMatrix::zeros(n, 7);
    let (mut z, mut y, mut y0, mut y1) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    let (mut true_e, mut delta) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let x = CovariateNoise::draw(&mut rng).covariates();
        let base = 0.5 + x[0] + 0.6 * x[1] + 2.2 * x[2] - 1.2 * x[3] + (x[0] + x[1]).powi(2);
        let d = effect.delta(&x);
        let e0: f64 = rng.sample(StandardNormal);
        let e1: f64 = rng.sample(StandardNormal);
        let e = model.propensity(&x);
        let zi = rng.random::<f64>() < e;
        let (a, b) = (base + e0, base + d + e1);
        for (j, v) in x.iter().enumerate() {
            cov[(i, j)] = *v;
        }
        z.push(zi);
        y.push(if zi { b } else { a });
        y0.push(a);
        y1.push(b);
        true_e.push(e);
        delta.push(d);
    }
    let dataset = Dataset::new(z, y, cov, COVARIATE_NAMES.iter().map(|s| s.to_string()).collect())?;
    Ok(SyntheticDataset {
        dataset,
        true_e,
        y0,
        y1,
        delta,
    })
}

/// Units of a truth super-population.
struct Population {
    noise: Vec<CovariateNoise>,
    e: Vec<f64>,
    delta: Vec<f64>,
}

fn draw_population(model: &SimModel, n: usize, effect: EffectType, seed: StreamSeed) -> Population {
    let mut rng = seed.rng();
    let noise: Vec<CovariateNoise> = (0..n).map(|_| CovariateNoise::draw(&mut rng)).collect();
    let (e, delta) = noise
        .iter()
        .map(|u| {
            let x = u.covariates();
            (model.propensity(&x), effect.delta(&x))
        })
        .unzip();
    Population { noise, e, delta }
}

const CONTROLS_PER_CELL: usize = 6;

/// Cell-interacted functions of the noise whose expectations are known:
/// `1{cell} · (1, u1, u2, u1² - 1, u2² - 1, u1 u2)`.
fn controls(u: &CovariateNoise, out: &mut [f64; 4 * CONTROLS_PER_CELL]) {
    out.fill(0.0);
    let o = u.cell() * CONTROLS_PER_CELL;
    out[o..o + CONTROLS_PER_CELL].copy_from_slice(&[
        1.0,
        u.u1,
        u.u2,
        u.u1 * u.u1 - 1.0,
        u.u2 * u.u2 - 1.0,
        u.u1 * u.u2,
    ]);
}

/// Regression (control-variate) estimates of `E[y_k]` for several responses
/// sharing the same units: fit `y_k` on the controls by least squares and
/// evaluate the fit at the controls' known means.
fn control_variate_means(pop: &Population, responses: &[Vec<f64>]) -> Result<Vec<f64>> {
    const K: usize = 4 * CONTROLS_PER_CELL;
    let mut gram = DMatrix::<f64>::zeros(K, K);
    let mut cross = DMatrix::<f64>::zeros(K, responses.len());
    let mut h = [0.0; K];
    for (i, u) in pop.noise.iter().enumerate() {
        controls(u, &mut h);
        let o = u.cell() * CONTROLS_PER_CELL;
        for a in o..o + CONTROLS_PER_CELL {
            for b in o..o + CONTROLS_PER_CELL {
                gram[(a, b)] += h[a] * h[b];
            }
            for (k, y) in responses.iter().enumerate() {
                cross[(a, k)] += h[a] * y[i];
            }
        }
    }
    let qr = PivotedQr::new(gram);
    let mut known = DVector::<f64>::zeros(K);
    for (c, p) in CELL_PROBABILITIES.iter().enumerate() {
        known[c * CONTROLS_PER_CELL] = *p;
    }
    (0..responses.len())
        .map(|k| {
            let b = qr
                .solve(&cross.column(k).into_owned())
                .ok_or_else(|| WateError::InvalidDataset("super-population too small".into()))?;
            Ok(b.dot(&known))
        })
        .collect()
}

/// `E[g(e) δ] / E[g(e)]` for each estimand over true propensities and effects.
fn tilted_means(pop: &Population, ests: &[Estimand]) -> Result<Vec<f64>> {
    let mut responses = Vec::with_capacity(2 * ests.len());
    for &est in ests {
        let g = pop.e.iter().map(|&p| estimands::tilt(est, p)).collect::<Result<Vec<_>>>()?;
        responses.push(g.iter().zip(&pop.delta).map(|(g, d)| g * d).collect());
        responses.push(g);
    }
    let means = control_variate_means(pop, &responses)?;
    means
        .chunks(2)
        .map(|nd| {
            if nd[1] > 0.0 {
                Ok(nd[0] / nd[1])
            } else {
                Err(WateError::DegenerateWeights("no super-population mass"))
            }
        })
        .collect()
}

/// Super-population plug-in of `E[g(e) δ] / E[g(e)]`, one value per estimand.
pub fn true_wate_many(
    model: &SimModel,
    effect: EffectType,
    ests: &[Estimand],
    n_super: usize,
    seed: StreamSeed,
) -> Result<Vec<f64>> {
    if n_super < 2 {
        return Err(WateError::ConfigError(format!("super-population size {n_super} is below 2")));
    }
    tilted_means(&draw_population(model, n_super, effect, seed), ests)
}

pub fn true_wate(model: &SimModel, effect: EffectType, est: Estimand, n_super: usize, seed: StreamSeed) -> Result<f64> {
    Ok(true_wate_many(model, effect, &[est], n_super, seed)?[0])
}

type TruthKey = (u8, EffectType);
type SharedPopulation = Arc<Population>;

fn truth_cache() -> &'static Mutex<HashMap<TruthKey, SharedPopulation>> {
    static CACHE: OnceLock<Mutex<HashMap<TruthKey, SharedPopulation>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// True WATEs from a process-wide cached super-population of [`N_SUPER`]
/// units drawn with [`TRUTH_SEED`].
pub fn cached_true_wate(model: &SimModel, effect: EffectType, ests: &[Estimand]) -> Result<Vec<f64>> {
    let key = (model.id(), effect);
    let pop = {
        let mut cache = truth_cache().lock().expect("truth cache poisoned");
        match cache.get(&key) {
            Some(p) => Arc::clone(p),
            None => {
                let seed = StreamSeed(TRUTH_SEED).child(purpose::SUPER_POPULATION);
                let p = Arc::new(draw_population(model, N_SUPER, effect, seed));
                cache.insert(key, Arc::clone(&p));
                p
            }
        }
    };
    tilted_means(&pop, ests)
}

/// Probability limit of the augmented estimator when the scenario's
/// (possibly misspecified) working models are fitted: the estimator itself
/// evaluated on a super-population draw.
pub fn pseudo_true_wate_many(
    model: &SimModel,
    effect: EffectType,
    ests: &[Estimand],
    scenario: Scenario,
    n_super: usize,
    seed: StreamSeed,
) -> Result<Vec<f64>> {
    let pop = generate(model, n_super, effect, seed)?;
    let specs = scenario.specs();
    let fit = NuisanceFit::fit(&pop.dataset, &specs.ps, &specs.or)?;
    ests.iter()
        .map(|&est| Ok(augmented_wate(&pop.dataset, &fit.for_estimand(est)?)?.tau_hat))
        .collect()
}

pub fn pseudo_true_wate(
    model: &SimModel,
    effect: EffectType,
    est: Estimand,
    scenario: Scenario,
    n_super: usize,
    seed: StreamSeed,
) -> Result<f64> {
    Ok(pseudo_true_wate_many(model, effect, &[est], scenario, n_super, seed)?[0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub model: SimModel,
    pub n: usize,
    pub effect: EffectType,
    pub scenario: Scenario,
    pub estimands: Vec<Estimand>,
    pub methods: Vec<MethodSpec>,
    pub m: usize,
    pub r: usize,
    pub seed: u64,
    pub scale: ScaleEstimator,
}

impl MonteCarloConfig {
    pub fn analysis(&self) -> AnalysisConfig {
        AnalysisConfig {
            estimands: self.estimands.clone(),
            methods: self.methods.clone(),
            replicates: self.r,
            scale: self.scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.analysis().validate()?;
        if self.m < 2 {
            return Err(WateError::ConfigError(format!(
                "at least 2 Monte Carlo replicates are required, got {}",
                self.m
            )));
        }
        if self.n < 2 {
            return Err(WateError::ConfigError(format!("sample size {} is below 2", self.n)));
        }
        Ok(())
    }
}

/// Outputs of one Monte Carlo replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub index: usize,
    /// Per estimand; `None` when the point estimate failed.
    pub estimates: Vec<Option<f64>>,
    /// `variances[estimand][method]`; `None` when that method failed.
    pub variances: Vec<Vec<Option<f64>>>,
    /// First error met, for diagnostics.
    pub error: Option<WateError>,
}

#[derive(Debug, Clone)]
pub struct MonteCarloRun {
    pub config: MonteCarloConfig,
    pub truths: Vec<f64>,
    pub records: Vec<ReplicateRecord>,
}

/// One summary row per estimand × method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub model: u8,
    pub n: usize,
    pub effect: String,
    pub scenario: String,
    pub estimand: String,
    pub method: String,
    pub arbias_pct: f64,
    pub rmse: f64,
    pub esd: f64,
    pub median_se: f64,
    pub median_re: f64,
    pub cp: f64,
    pub failures: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "R")]
    pub r: usize,
    pub seed: u64,
}

fn run_replicate(config: &MonteCarloConfig, analysis: &AnalysisConfig, index: usize) -> ReplicateRecord {
    let root = StreamSeed(config.seed).child(index as u64);
    let k = config.estimands.len();
    let nm = config.methods.len();
    let failed = |e: WateError| ReplicateRecord {
        index,
        estimates: vec![None; k],
        variances: vec![vec![None; nm]; k],
        error: Some(e),
    };
    let data = match generate(&config.model, config.n, config.effect, root.child(purpose::DATA)) {
        Ok(d) => d,
        Err(e) => return failed(e),
    };
    let out = match analyze(&data.dataset, &config.scenario.specs(), analysis, root) {
        Ok(a) => a,
        Err(e) => return failed(e),
    };
    let mut error = None;
    let mut note = |e: &WateError| {
        if error.is_none() {
            error = Some(e.clone());
        }
    };
    let mut estimates = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    for res in &out.results {
        match &res.point {
            Ok(p) => estimates.push(Some(p.tau_hat)),
            Err(e) => {
                note(e);
                estimates.push(None);
            }
        }
        variances.push(
            res.variances
                .iter()
                .map(|v| match v {
                    Ok(ve) => Some(ve.variance),
                    Err(e) => {
                        note(e);
                        None
                    }
                })
                .collect(),
        );
    }
    ReplicateRecord {
        index,
        estimates,
        variances,
        error,
    }
}

/// Runs all replicates with the given truths (one per estimand).
pub fn run_monte_carlo_with_truths(config: &MonteCarloConfig, truths: Vec<f64>) -> Result<MonteCarloRun> {
    config.validate()?;
    assert_eq!(truths.len(), config.estimands.len(), "one truth per estimand");
    let analysis = config.analysis();
    let records: Vec<ReplicateRecord> = (0..config.m)
        .into_par_iter()
        .map(|i| run_replicate(config, &analysis, i))
        .collect();
    Ok(MonteCarloRun {
        config: config.clone(),
        truths,
        records,
    })
}

/// Runs all replicates against the cached super-population truths.
pub fn run_monte_carlo(config: &MonteCarloConfig) -> Result<MonteCarloRun> {
    config.validate()?;
    let truths = cached_true_wate(&config.model, config.effect, &config.estimands)?;
    run_monte_carlo_with_truths(config, truths)
}

impl MonteCarloRun {
    /// Successful point estimates of estimand `k`.
    pub fn estimates(&self, k: usize) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.estimates[k]).collect()
    }

    /// `(estimate, variance)` pairs where both estimand `k` and method `j` succeeded.
    pub fn pairs(&self, k: usize, j: usize) -> Vec<(f64, f64)> {
        self.records
            .iter()
            .filter_map(|r| Some((r.estimates[k]?, r.variances[k][j]?)))
            .collect()
    }

    pub fn esd(&self, k: usize) -> f64 {
        let est = self.estimates(k);
        if est.len() < 2 {
            f64::NAN
        } else {
            stats::sample_sd(&est)
        }
    }

    /// Per-replicate `ESD² / var̂` for method `j`.
    pub fn relative_efficiencies(&self, k: usize, j: usize) -> Vec<f64> {
        let esd2 = self.esd(k).powi(2);
        self.pairs(k, j).iter().map(|&(_, v)| esd2 / v).collect()
    }

    /// Number of replicates in which method `j` gave no variance for estimand `k`.
    pub fn failures(&self, k: usize, j: usize) -> usize {
        self.config.m - self.pairs(k, j).len()
    }

    pub fn metrics(&self, alpha: f64) -> Vec<MetricsRow> {
        let c = &self.config;
        let z = stats::normal_quantile(1.0 - alpha / 2.0);
        let mut rows = Vec::new();
        for (k, est) in c.estimands.iter().enumerate() {
            let tau = self.truths[k];
            let est_k = self.estimates(k);
            let nan_if_empty = |v: f64| if est_k.is_empty() { f64::NAN } else { v };
            let arbias = nan_if_empty(100.0 * stats::mean(&est_k.iter().map(|t| (t - tau) / tau).collect::<Vec<_>>()).abs());
            let rmse = nan_if_empty(stats::mean(&est_k.iter().map(|t| (t - tau).powi(2)).collect::<Vec<_>>()).sqrt());
            let esd = self.esd(k);
            for (j, method) in c.methods.iter().enumerate() {
                let pairs = self.pairs(k, j);
                let (median_se, median_re, cp) = if pairs.is_empty() {
                    (f64::NAN, f64::NAN, f64::NAN)
                } else {
                    let ses: Vec<f64> = pairs.iter().map(|p| p.1.sqrt()).collect();
                    let res = self.relative_efficiencies(k, j);
                    let covered = pairs
                        .iter()
                        .filter(|&&(t, v)| (t - tau).abs() <= z * v.sqrt())
                        .count();
                    (stats::median(&ses), stats::median(&res), covered as f64 / pairs.len() as f64)
                };
                rows.push(MetricsRow {
                    model: c.model.id(),
                    n: c.n,
                    effect: c.effect.to_string(),
                    scenario: c.scenario.to_string(),
                    estimand: est.to_string(),
                    method: method.to_string(),
                    arbias_pct: arbias,
                    rmse,
                    esd,
                    median_se,
                    median_re,
                    cp,
                    failures: c.m - pairs.len(),
                    m: c.m,
                    r: c.r,
                    seed: c.seed,
                });
            }
        }
        rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_parameters() {
        assert_eq!(SimModel::new(2).unwrap().beta()[0], -0.78);
        assert_eq!(SimModel::new(5).unwrap().beta(), SimModel::new(3).unwrap().beta());
        assert_eq!(SimModel::new(5).unwrap().n_default(), 50);
        assert!(SimModel::new(6).is_err());
    }

    #[test]
    fn potential_outcome_consistency() {
        let s = generate(&SimModel::new(2).unwrap(), 500, EffectType::Heterogeneous, StreamSeed(1)).unwrap();
        let ds = &s.dataset;
        for i in 0..ds.n() {
            let expect = if ds.z()[i] { s.y1[i] } else { s.y0[i] };
            assert_eq!(ds.y()[i], expect);
            let x = ds.covariates();
            assert_eq!(x[(i, 4)], x[(i, 0)] * x[(i, 0)]);
            assert_eq!(x[(i, 5)], x[(i, 0)] * x[(i, 1)]);
            assert_eq!(x[(i, 6)], x[(i, 1)] * x[(i, 1)]);
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let m = SimModel::new(1).unwrap();
        let a = generate(&m, 50, EffectType::Homogeneous, StreamSeed(4)).unwrap();
        let b = generate(&m, 50, EffectType::Homogeneous, StreamSeed(4)).unwrap();
        assert_eq!(a.dataset, b.dataset);
    }

    #[test]
    fn homogeneous_truth_is_four() {
        let m = SimModel::new(4).unwrap();
        let t = true_wate_many(&m, EffectType::Homogeneous, &Estimand::STUDY, 20_000, StreamSeed(2)).unwrap();
        for v in t {
            assert!((v - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn scenario_specs() {
        let s = Scenario::A2.specs();
        assert_eq!(s.ps.column_indices(), &[0, 1, 2, 3, 4, 5, 6]);
        assert_eq!(s.or.column_indices(), &[0, 1, 2, 3]);
        assert_eq!("a3".parse::<Scenario>().unwrap(), Scenario::A3);
    }

    fn small_config() -> MonteCarloConfig {
        MonteCarloConfig {
            model: SimModel::new(2).unwrap(),
            n: 200,
            effect: EffectType::Heterogeneous,
            scenario: Scenario::A1,
            estimands: vec![Estimand::Ate, Estimand::Ato],
            methods: MethodSpec::ALL.to_vec(),
            m: 6,
            r: 10,
            seed: 3,
            scale: ScaleEstimator::Sd,
        }
    }

    #[test]
    fn metrics_are_recomputable_from_records() {
        let run = run_monte_carlo_with_truths(&small_config(), vec![17.22, 15.07]).unwrap();
        let rows = run.metrics(0.05);
        assert_eq!(rows.len(), 14);
        for (idx, row) in rows.iter().enumerate() {
            let (k, j) = (idx / 7, idx % 7);
            let res = run.relative_efficiencies(k, j);
            assert_eq!(row.median_re, stats::median(&res));
            assert!((0.0..=1.0).contains(&row.cp));
            assert!(row.rmse.powi(2) + 1e-12 >= (row.arbias_pct / 100.0 * run.truths[k]).powi(2));
        }
        let wide = run.metrics(0.10);
        for (a, b) in rows.iter().zip(&wide) {
            assert!(b.cp <= a.cp);
        }
    }

    #[test]
    fn empty_lists_are_config_errors() {
        let mut c = small_config();
        c.methods.clear();
        assert!(matches!(run_monte_carlo_with_truths(&c, vec![1.0, 1.0]), Err(WateError::ConfigError(_))));
    }
}
