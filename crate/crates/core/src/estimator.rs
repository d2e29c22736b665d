//! The augmented WATE estimator, its estimated influence function, and
//! weighting diagnostics.
//!
//! The estimator combines an outcome-regression contrast with Hájek-normalised
//! residual corrections in each arm:
//!
//! ```text
//! τ̂ = Σ g (m1 - m0) / Σ g
//!   + Σ_{z=1} ω1 (y - m1) / Σ_{z=1} ω1
//!   - Σ_{z=0} ω0 (y - m0) / Σ_{z=0} ω0
//! ```

use serde::{Deserialize, Serialize};

use crate::data::{design_matrix, Dataset, DesignSpec};
use crate::error::{Result, WateError};
use crate::estimands::{self, Estimand};
use crate::glm::{self, Arm, LinearFit, LogisticFit};

/// Estimand-free nuisance fits: propensity scores and arm-specific outcome
/// predictions for all `N` rows.
#[derive(Debug, Clone)]
pub struct NuisanceFit {
    /// `None` when the propensities were supplied rather than fitted.
    pub ps: Option<LogisticFit>,
    pub e: Vec<f64>,
    pub or1: LinearFit,
    pub or0: LinearFit,
    pub m1: Vec<f64>,
    pub m0: Vec<f64>,
}

/// Nuisances specialised to one estimand.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedNuisances {
    pub estimand: Estimand,
    pub e: Vec<f64>,
    pub m0: Vec<f64>,
    pub m1: Vec<f64>,
    pub g: Vec<f64>,
    pub w0: Vec<f64>,
    pub w1: Vec<f64>,
    pub mu_g_hat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub estimand: Estimand,
    pub tau_hat: f64,
    pub n: usize,
}

/// Choice of the propensity-derivative term in the influence function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IfVariant {
    /// No derivative term.
    IfI,
    /// Adds `g'(e) (τ(X) - τ) (Z - e)`.
    IfII,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceVector {
    pub phi: Vec<f64>,
    pub variant: IfVariant,
}

fn check_arm_sizes(ds: &Dataset, or_spec: &DesignSpec) -> Result<()> {
    let required = or_spec.width() + 1;
    let n1 = ds.n_treated();
    if n1 == 0 || n1 == ds.n() {
        return Err(WateError::SingleClass);
    }
    for (arm, size) in [(Arm::Control, ds.n_control()), (Arm::Treated, n1)] {
        if size < required {
            return Err(WateError::ArmTooSmall {
                arm: arm.code(),
                size,
                required,
            });
        }
    }
    Ok(())
}

fn fit_outcomes(ds: &Dataset, or_spec: &DesignSpec) -> Result<(LinearFit, LinearFit, Vec<f64>, Vec<f64>)> {
    let w = design_matrix(ds, or_spec)?;
    let or1 = glm::fit_arm_ols(&w, ds.y(), ds.z(), Arm::Treated)?;
    let or0 = glm::fit_arm_ols(&w, ds.y(), ds.z(), Arm::Control)?;
    let m1 = or1.predict(&w);
    let m0 = or0.predict(&w);
    Ok((or1, or0, m1, m0))
}

impl NuisanceFit {
    /// Fits the propensity model on all rows and one outcome model per arm.
    pub fn fit(ds: &Dataset, ps_spec: &DesignSpec, or_spec: &DesignSpec) -> Result<Self> {
        check_arm_sizes(ds, or_spec)?;
        let v = design_matrix(ds, ps_spec)?;
        let ps = glm::fit_logistic(&v, ds.z())?;
        let (or1, or0, m1, m0) = fit_outcomes(ds, or_spec)?;
        Ok(Self {
            e: ps.fitted.clone(),
            ps: Some(ps),
            or1,
            or0,
            m1,
            m0,
        })
    }

    /// Outcome models only; propensities are taken as given.
    pub fn with_propensity(ds: &Dataset, e: Vec<f64>, or_spec: &DesignSpec) -> Result<Self> {
        assert_eq!(e.len(), ds.n(), "one propensity per row");
        check_arm_sizes(ds, or_spec)?;
        let (or1, or0, m1, m0) = fit_outcomes(ds, or_spec)?;
        Ok(Self {
            ps: None,
            e,
            or1,
            or0,
            m1,
            m0,
        })
    }

    pub fn for_estimand(&self, est: Estimand) -> Result<FittedNuisances> {
        FittedNuisances::from_parts(est, self.e.clone(), self.m0.clone(), self.m1.clone())
    }
}

impl FittedNuisances {
    pub fn from_parts(est: Estimand, e: Vec<f64>, m0: Vec<f64>, m1: Vec<f64>) -> Result<Self> {
        let n = e.len();
        let mut g = Vec::with_capacity(n);
        let mut w0 = Vec::with_capacity(n);
        let mut w1 = Vec::with_capacity(n);
        for &ei in &e {
            let gi = estimands::tilt(est, ei)?;
            g.push(gi);
            w0.push(gi / (1.0 - ei));
            w1.push(gi / ei);
        }
        let mu_g_hat = g.iter().sum::<f64>() / n as f64;
        Ok(Self {
            estimand: est,
            e,
            m0,
            m1,
            g,
            w0,
            w1,
            mu_g_hat,
        })
    }
}

/// Fits both nuisance models and specialises them to `est`.
pub fn fit_nuisances(
    ds: &Dataset,
    ps_spec: &DesignSpec,
    or_spec: &DesignSpec,
    est: Estimand,
) -> Result<FittedNuisances> {
    NuisanceFit::fit(ds, ps_spec, or_spec)?.for_estimand(est)
}

/// The augmented point estimate.
pub fn augmented_wate(ds: &Dataset, nus: &FittedNuisances) -> Result<PointEstimate> {
    let (mut sg, mut sgm) = (0.0, 0.0);
    let (mut s1, mut r1) = (0.0, 0.0);
    let (mut s0, mut r0) = (0.0, 0.0);
    for i in 0..ds.n() {
        sg += nus.g[i];
        sgm += nus.g[i] * (nus.m1[i] - nus.m0[i]);
        if ds.z()[i] {
            s1 += nus.w1[i];
            r1 += nus.w1[i] * (ds.y()[i] - nus.m1[i]);
        } else {
            s0 += nus.w0[i];
            r0 += nus.w0[i] * (ds.y()[i] - nus.m0[i]);
        }
    }
    if !(sg > 0.0) {
        return Err(WateError::DegenerateWeights("sum of tilting values is zero"));
    }
    if !(s1 > 0.0) {
        return Err(WateError::DegenerateWeights("treated weights sum to zero"));
    }
    if !(s0 > 0.0) {
        return Err(WateError::DegenerateWeights("control weights sum to zero"));
    }
    let tau_hat = sgm / sg + r1 / s1 - r0 / s0;
    if !tau_hat.is_finite() {
        return Err(WateError::DegenerateWeights("non-finite estimate"));
    }
    Ok(PointEstimate {
        estimand: nus.estimand,
        tau_hat,
        n: ds.n(),
    })
}

/// Estimated influence function with `τ(X) = m1 - m0` and `τ = tau_hat` plugged in.
pub fn influence_vector(
    ds: &Dataset,
    nus: &FittedNuisances,
    tau_hat: f64,
    variant: IfVariant,
) -> Result<InfluenceVector> {
    if !(nus.mu_g_hat > 0.0) {
        return Err(WateError::DegenerateWeights("mean tilting value is zero"));
    }
    let mu = nus.mu_g_hat;
    let mut phi = Vec::with_capacity(ds.n());
    for i in 0..ds.n() {
        let e = nus.e[i];
        let z = f64::from(u8::from(ds.z()[i]));
        let y = ds.y()[i];
        let cate = nus.m1[i] - nus.m0[i];
        let f = z * (y - nus.m1[i]) / e - (1.0 - z) * (y - nus.m0[i]) / (1.0 - e);
        let mut v = nus.g[i] / mu * (f + cate - tau_hat);
        if variant == IfVariant::IfII {
            let dg = estimands::tilt_derivative(nus.estimand, e)?;
            v += dg * (cate - tau_hat) * (z - e) / mu;
        }
        phi.push(v);
    }
    Ok(InfluenceVector { phi, variant })
}

/// Kish effective sample size `(Σw)² / Σw²`.
pub fn effective_sample_size(weights: &[f64]) -> Result<f64> {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if !(s > 0.0) || !(s2 > 0.0) {
        return Err(WateError::AllZeroWeights);
    }
    Ok(s * s / s2)
}

/// Kish ESS of the weighted sample, each unit carrying the weight of its own
/// arm (`ω1` if treated, `ω0` otherwise).
pub fn weighted_effective_sample_size(ds: &Dataset, nus: &FittedNuisances) -> Result<f64> {
    let w: Vec<f64> = (0..ds.n())
        .map(|i| if ds.z()[i] { nus.w1[i] } else { nus.w0[i] })
        .collect();
    effective_sample_size(&w)
}

/// Absolute standardised mean difference per covariate.
///
/// `w_treated` and `w_control` are length-`N` vectors; only treated entries of
/// the first and control entries of the second are read. The denominator is
/// the unweighted pooled SD `sqrt((s1² + s0²)/2)`. A zero-variance covariate
/// yields 0 when the weighted means agree and `+∞` otherwise.
pub fn weighted_asmd(ds: &Dataset, w_treated: &[f64], w_control: &[f64]) -> Result<Vec<f64>> {
    let n = ds.n();
    assert!(w_treated.len() == n && w_control.len() == n, "weights must be length N");
    let treated: Vec<usize> = (0..n).filter(|&i| ds.z()[i]).collect();
    let control: Vec<usize> = (0..n).filter(|&i| !ds.z()[i]).collect();
    let mass1: f64 = treated.iter().map(|&i| w_treated[i]).sum();
    let mass0: f64 = control.iter().map(|&i| w_control[i]).sum();
    if !(mass1 > 0.0) || !(mass0 > 0.0) {
        return Err(WateError::DegenerateWeights("an arm has no weight mass"));
    }

    let x = ds.covariates();
    let mut out = Vec::with_capacity(ds.p());
    for j in 0..ds.p() {
        let wmean = |rows: &[usize], w: &[f64], mass: f64| {
            rows.iter().map(|&i| w[i] * x[(i, j)]).sum::<f64>() / mass
        };
        let var = |rows: &[usize]| {
            let k = rows.len() as f64;
            let m = rows.iter().map(|&i| x[(i, j)]).sum::<f64>() / k;
            if rows.len() < 2 {
                0.0
            } else {
                rows.iter().map(|&i| (x[(i, j)] - m).powi(2)).sum::<f64>() / (k - 1.0)
            }
        };
        let diff = (wmean(&treated, w_treated, mass1) - wmean(&control, w_control, mass0)).abs();
        let sd = ((var(&treated) + var(&control)) / 2.0).sqrt();
        out.push(if sd > 0.0 {
            diff / sd
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn dataset(z: &[u8], y: &[f64], x: &[f64]) -> Dataset {
        Dataset::new(
            z.iter().map(|&v| v == 1).collect(),
            y.to_vec(),
            DMatrix::from_column_slice(z.len(), 1, x),
            vec!["x".into()],
        )
        .unwrap()
    }

    #[test]
    fn four_unit_hand_example() {
        let ds = dataset(&[1, 1, 0, 0], &[3.0, 5.0, 1.0, 1.0], &[0.0; 4]);
        let nus =
            FittedNuisances::from_parts(Estimand::Ate, vec![0.5; 4], vec![1.0; 4], vec![4.0; 4])
                .unwrap();
        let est = augmented_wate(&ds, &nus).unwrap();
        assert_eq!(est.tau_hat, 3.0);
    }

    #[test]
    fn zero_residuals_leave_regression_contrast() {
        let e = vec![0.2, 0.4, 0.6, 0.3, 0.5, 0.7];
        let m1 = vec![5.0, 6.0, 7.0, 4.0, 3.0, 8.0];
        let m0 = vec![1.0, 2.0, 1.5, 0.5, 2.5, 3.0];
        let z = [1u8, 0, 1, 0, 1, 0];
        let y: Vec<f64> = (0..6).map(|i| if z[i] == 1 { m1[i] } else { m0[i] }).collect();
        let ds = dataset(&z, &y, &[0.0; 6]);
        let nus = FittedNuisances::from_parts(Estimand::Ato, e, m0.clone(), m1.clone()).unwrap();
        let est = augmented_wate(&ds, &nus).unwrap();
        let sg: f64 = nus.g.iter().sum();
        let contrast: f64 = (0..6).map(|i| nus.g[i] * (m1[i] - m0[i])).sum::<f64>() / sg;
        assert_eq!(est.tau_hat, contrast);
    }

    fn six_unit() -> (Dataset, Vec<f64>, Vec<f64>, Vec<f64>) {
        let e = vec![0.2, 0.4, 0.6, 0.3, 0.5, 0.7];
        let m1 = vec![5.0, 6.5, 7.0, 4.0, 3.0, 8.0];
        let m0 = vec![1.0, 2.0, 1.5, 0.5, 2.5, 3.0];
        let ds = dataset(&[1, 0, 1, 0, 1, 0], &[5.5, 1.2, 6.1, 0.9, 4.0, 2.2], &[0.0; 6]);
        (ds, e, m0, m1)
    }

    #[test]
    fn six_unit_example_matches_scalar_oracle() {
        let (ds, e, m0, m1) = six_unit();
        let y = ds.y().to_vec();
        let z = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        for est in [Estimand::Ate, Estimand::Att, Estimand::Ato, Estimand::Aten] {
            // independent scalar evaluation
            let g: Vec<f64> = e
                .iter()
                .map(|&p: &f64| match est {
                    Estimand::Ate => 1.0,
                    Estimand::Att => p,
                    Estimand::Ato => p * (1.0 - p),
                    _ => -p * p.ln() - (1.0 - p) * (1.0 - p).ln(),
                })
                .collect();
            let (mut a, mut b, mut c, mut d, mut f, mut h) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..6 {
                a += g[i] * (m1[i] - m0[i]);
                b += g[i];
                c += z[i] * g[i] / e[i] * (y[i] - m1[i]);
                d += z[i] * g[i] / e[i];
                f += (1.0 - z[i]) * g[i] / (1.0 - e[i]) * (y[i] - m0[i]);
                h += (1.0 - z[i]) * g[i] / (1.0 - e[i]);
            }
            let oracle = a / b + c / d - f / h;
            let nus = FittedNuisances::from_parts(est, e.clone(), m0.clone(), m1.clone()).unwrap();
            let got = augmented_wate(&ds, &nus).unwrap().tau_hat;
            assert!((got - oracle).abs() < 1e-12, "{est}: {got} vs {oracle}");
        }
    }

    #[test]
    fn hajek_terms_are_scale_invariant() {
        let (ds, e, m0, m1) = six_unit();
        let nus = FittedNuisances::from_parts(Estimand::Ato, e, m0, m1).unwrap();
        let base = augmented_wate(&ds, &nus).unwrap().tau_hat;
        let mut scaled = nus.clone();
        for v in scaled
            .g
            .iter_mut()
            .chain(scaled.w0.iter_mut())
            .chain(scaled.w1.iter_mut())
        {
            *v *= 7.3;
        }
        let s = augmented_wate(&ds, &scaled).unwrap().tau_hat;
        assert!((s - base).abs() < 1e-12);
    }

    #[test]
    fn degenerate_trim_weights() {
        let (ds, _, m0, m1) = six_unit();
        let nus =
            FittedNuisances::from_parts(Estimand::Trim(0.1), vec![0.05; 6], m0, m1).unwrap();
        assert!(matches!(
            augmented_wate(&ds, &nus),
            Err(WateError::DegenerateWeights(_))
        ));
        assert!(matches!(
            influence_vector(&ds, &nus, 0.0, IfVariant::IfI),
            Err(WateError::DegenerateWeights(_))
        ));
    }

    #[test]
    fn ate_influence_variants_coincide() {
        let (ds, e, m0, m1) = six_unit();
        let nus = FittedNuisances::from_parts(Estimand::Ate, e, m0, m1).unwrap();
        let tau = augmented_wate(&ds, &nus).unwrap().tau_hat;
        let a = influence_vector(&ds, &nus, tau, IfVariant::IfI).unwrap();
        let b = influence_vector(&ds, &nus, tau, IfVariant::IfII).unwrap();
        assert_eq!(a.phi, b.phi);
    }

    #[test]
    fn influence_vanishes_for_perfect_fit() {
        let z = [1u8, 0, 1, 0];
        let m0 = vec![1.0, 2.0, 3.0, 4.0];
        let m1: Vec<f64> = m0.iter().map(|m| m + 2.0).collect();
        let y: Vec<f64> = (0..4).map(|i| if z[i] == 1 { m1[i] } else { m0[i] }).collect();
        let ds = dataset(&z, &y, &[0.0; 4]);
        let nus =
            FittedNuisances::from_parts(Estimand::Ato, vec![0.3, 0.4, 0.6, 0.5], m0, m1).unwrap();
        for v in [IfVariant::IfI, IfVariant::IfII] {
            let phi = influence_vector(&ds, &nus, 2.0, v).unwrap();
            assert!(phi.phi.iter().all(|p| p.abs() < 1e-15));
        }
    }

    #[test]
    fn ato_influence_matches_scalar_oracle() {
        let (ds, e, m0, m1) = six_unit();
        let nus = FittedNuisances::from_parts(Estimand::Ato, e.clone(), m0.clone(), m1.clone())
            .unwrap();
        let tau = 2.75;
        let got = influence_vector(&ds, &nus, tau, IfVariant::IfII).unwrap();
        let mu: f64 = e.iter().map(|p| p * (1.0 - p)).sum::<f64>() / 6.0;
        for i in 0..6 {
            let p = e[i];
            let z = if ds.z()[i] { 1.0 } else { 0.0 };
            let y = ds.y()[i];
            let f = if z == 1.0 { (y - m1[i]) / p } else { -(y - m0[i]) / (1.0 - p) };
            let g = p * (1.0 - p);
            let psi = (1.0 - 2.0 * p) * (m1[i] - m0[i] - tau) * (z - p);
            let oracle = g / mu * (f + m1[i] - m0[i] - tau) + psi / mu;
            assert!((got.phi[i] - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn ess_examples() {
        assert!((effective_sample_size(&[1.0; 7]).unwrap() - 7.0).abs() < 1e-12);
        assert_eq!(effective_sample_size(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 1.0);
        assert!((effective_sample_size(&[1.0, 1.0, 2.0]).unwrap() - 16.0 / 6.0).abs() < 1e-12);
        assert_eq!(effective_sample_size(&[0.0, 0.0]), Err(WateError::AllZeroWeights));

        // treated weights 1/e = (2, 4), control weights 1/(1-e) = (2, 4/3)
        let ds = dataset(&[1, 1, 0, 0], &[0.0; 4], &[0.0; 4]);
        let nus = FittedNuisances::from_parts(
            Estimand::Ate,
            vec![0.5, 0.25, 0.5, 0.25],
            vec![0.0; 4],
            vec![0.0; 4],
        )
        .unwrap();
        let total: f64 = 2.0 + 4.0 + 2.0 + 4.0 / 3.0;
        let squares: f64 = 4.0 + 16.0 + 4.0 + 16.0 / 9.0;
        let ess = weighted_effective_sample_size(&ds, &nus).unwrap();
        assert!((ess - total * total / squares).abs() < 1e-12);
    }

    #[test]
    fn asmd_examples() {
        // identical arms
        let ds = dataset(&[1, 1, 0, 0], &[0.0; 4], &[1.0, 2.0, 1.0, 2.0]);
        let asmd = weighted_asmd(&ds, &[1.0; 4], &[1.0; 4]).unwrap();
        assert!(asmd[0].abs() < 1e-15);

        // treated mean 1, control mean 0, each arm variance 1
        let ds = dataset(
            &[1, 1, 0, 0],
            &[0.0; 4],
            &[1.0 - 0.5f64.sqrt(), 1.0 + 0.5f64.sqrt(), -(0.5f64.sqrt()), 0.5f64.sqrt()],
        );
        let asmd = weighted_asmd(&ds, &[1.0; 4], &[1.0; 4]).unwrap();
        assert!((asmd[0] - 1.0).abs() < 1e-12);

        let flat = dataset(&[1, 1, 0, 0], &[0.0; 4], &[2.0, 2.0, 3.0, 3.0]);
        assert_eq!(weighted_asmd(&flat, &[1.0; 4], &[1.0; 4]).unwrap()[0], f64::INFINITY);
        let same = dataset(&[1, 1, 0, 0], &[0.0; 4], &[2.0; 4]);
        assert_eq!(weighted_asmd(&same, &[1.0; 4], &[1.0; 4]).unwrap()[0], 0.0);
    }

    #[test]
    fn constant_outcome_gives_constant_predictions() {
        let x = [0.1, -0.4, 1.2, 0.8, -1.0, 0.3, 0.0, 2.1];
        let ds = dataset(&[1, 0, 1, 0, 1, 0, 1, 0], &[5.0; 8], &x);
        let nus = fit_nuisances(&ds, &DesignSpec::all(1), &DesignSpec::all(1), Estimand::Ate)
            .unwrap();
        assert!(nus.m0.iter().chain(&nus.m1).all(|m| (m - 5.0).abs() < 1e-12));
    }

    #[test]
    fn all_treated_is_single_class() {
        let ds = dataset(&[1, 1, 1, 1], &[1.0, 2.0, 3.0, 4.0], &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(
            fit_nuisances(&ds, &DesignSpec::all(1), &DesignSpec::all(1), Estimand::Ate)
                .unwrap_err(),
            WateError::SingleClass
        );
    }

    #[test]
    fn small_arm_is_rejected() {
        let ds = dataset(&[1, 0, 0, 0, 0], &[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0, 1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(
            fit_nuisances(&ds, &DesignSpec::all(1), &DesignSpec::all(1), Estimand::Ate),
            Err(WateError::ArmTooSmall { arm: 1, .. })
        ));
    }
}
