//! Propensity-score (logistic) and outcome-regression (linear) fits.
//!
//! The logistic model is fitted by IRLS with step-halving; each Newton step
//! is a weighted least-squares solve through [`PivotedQr`]. Fitted
//! probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` for the
//! downstream `1/e` and `1/(1-e)` terms; `beta` itself is never altered.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, WateError};
use crate::linalg::PivotedQr;

pub const PROB_CLAMP: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 100;
/// Convergence threshold on `max_j |score_j| / N`.
pub const SCORE_TOL: f64 = 1e-10;
/// `|beta|_inf` above which the fit is declared separated.
pub const DIVERGENCE_NORM: f64 = 1e6;

/// Treatment arm of an outcome model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arm {
    Control,
    Treated,
}

impl Arm {
    pub fn contains(self, z: bool) -> bool {
        z == (self == Arm::Treated)
    }

    pub fn code(self) -> u8 {
        match self {
            Arm::Control => 0,
            Arm::Treated => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub beta: DVector<f64>,
    /// Clamped `expit(v_i' beta)`.
    pub fitted: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub alpha: DVector<f64>,
    /// Arm the fit was restricted to, when fitted through [`fit_arm_ols`].
    pub which_arm: Option<Arm>,
}

impl LinearFit {
    pub fn predict(&self, design: &DMatrix<f64>) -> Vec<f64> {
        (design * &self.alpha).iter().copied().collect()
    }
}

pub fn expit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let t = eta.exp();
        t / (1.0 + t)
    }
}

pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Clamped fitted probabilities for a coefficient vector.
pub fn propensity(design: &DMatrix<f64>, beta: &DVector<f64>) -> Vec<f64> {
    (design * beta)
        .iter()
        .map(|&eta| clamp_probability(expit(eta)))
        .collect()
}

fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

/// Bernoulli log-likelihood at `beta`.
pub fn logistic_log_likelihood(design: &DMatrix<f64>, z: &[bool], beta: &DVector<f64>) -> f64 {
    let eta = design * beta;
    eta.iter()
        .zip(z)
        .map(|(&e, &zi)| if zi { e } else { 0.0 } - softplus(e))
        .sum()
}

fn check_classes(z: &[bool]) -> Result<()> {
    let treated = z.iter().filter(|&&t| t).count();
    if treated == 0 || treated == z.len() {
        return Err(WateError::SingleClass);
    }
    Ok(())
}

fn check_rank(design: &DMatrix<f64>) -> Result<()> {
    let qr = PivotedQr::new(design.clone());
    if !qr.is_full_rank() {
        return Err(WateError::RankDeficientDesign {
            rank: qr.rank(),
            columns: design.ncols(),
        });
    }
    Ok(())
}

/// Maximum-likelihood logistic regression of `z` on `design`.
pub fn fit_logistic(design: &DMatrix<f64>, z: &[bool]) -> Result<LogisticFit> {
    let (n, k) = design.shape();
    assert_eq!(z.len(), n, "design rows must match z");
    check_classes(z)?;
    if n < k {
        return Err(WateError::TooFewObservations { rows: n, columns: k });
    }
    check_rank(design)?;

    let zf: Vec<f64> = z.iter().map(|&t| f64::from(u8::from(t))).collect();
    let mut beta = DVector::zeros(k);
    let mut loglik = logistic_log_likelihood(design, z, &beta);
    let mut converged = false;
    let mut iterations = 0;
    let mut weighted = DMatrix::zeros(n, k);
    let mut rhs = DVector::zeros(n);

    loop {
        let eta = design * &beta;
        let probs: Vec<f64> = eta.iter().map(|&v| expit(v)).collect();
        let resid: Vec<f64> = zf.iter().zip(&probs).map(|(zi, p)| zi - p).collect();
        let score = design.tr_mul(&DVector::from_column_slice(&resid));
        if score.amax() / n as f64 <= SCORE_TOL {
            converged = true;
            break;
        }
        if iterations == MAX_ITERATIONS {
            break;
        }
        iterations += 1;

        // Newton step as weighted least squares: sqrt(W) X d = (z - p) / sqrt(W)
        for i in 0..n {
            let w = probs[i] * (1.0 - probs[i]);
            if w > 1e-300 {
                let sw = w.sqrt();
                for j in 0..k {
                    weighted[(i, j)] = design[(i, j)] * sw;
                }
                rhs[i] = resid[i] / sw;
            } else {
                for j in 0..k {
                    weighted[(i, j)] = 0.0;
                }
                rhs[i] = 0.0;
            }
        }
        let step = PivotedQr::new(weighted.clone())
            .solve(&rhs)
            .ok_or(WateError::Diverged { norm: beta.amax() })?;

        // Near the optimum the predicted gain is below the rounding error of
        // the log-likelihood, so the comparison is meaningless: take the step.
        let gain = score.dot(&step);
        if gain <= 64.0 * f64::EPSILON * (1.0 + loglik.abs()) {
            beta += &step;
            loglik = logistic_log_likelihood(design, z, &beta);
            continue;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let candidate = &beta + &step * t;
            let ll = logistic_log_likelihood(design, z, &candidate);
            if ll >= loglik {
                accepted = Some((candidate, ll));
                break;
            }
            t *= 0.5;
        }
        let Some((candidate, ll)) = accepted else {
            // no ascent direction left at working precision
            break;
        };
        beta = candidate;
        loglik = ll;
        if beta.amax() > DIVERGENCE_NORM {
            return Err(WateError::Diverged { norm: beta.amax() });
        }
    }

    if !beta.iter().all(|b| b.is_finite()) {
        return Err(WateError::Diverged { norm: f64::INFINITY });
    }
    let fitted = propensity(design, &beta);
    Ok(LogisticFit {
        beta,
        fitted,
        converged,
        iterations,
    })
}

/// Ordinary least squares of `y` on `design`.
pub fn fit_ols(design: &DMatrix<f64>, y: &[f64]) -> Result<LinearFit> {
    let (n, k) = design.shape();
    assert_eq!(y.len(), n, "design rows must match y");
    if n < k {
        return Err(WateError::TooFewObservations { rows: n, columns: k });
    }
    let qr = PivotedQr::new(design.clone());
    let alpha = qr
        .solve(&DVector::from_column_slice(y))
        .ok_or(WateError::RankDeficientDesign {
            rank: qr.rank(),
            columns: k,
        })?;
    Ok(LinearFit {
        alpha,
        which_arm: None,
    })
}

/// OLS restricted to the rows of one treatment arm.
pub fn fit_arm_ols(design: &DMatrix<f64>, y: &[f64], z: &[bool], arm: Arm) -> Result<LinearFit> {
    let rows: Vec<usize> = (0..z.len()).filter(|&i| arm.contains(z[i])).collect();
    let sub = design.select_rows(&rows);
    let ys: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    let mut fit = fit_ols(&sub, &ys)?;
    fit.which_arm = Some(arm);
    Ok(fit)
}

/// Per-observation logistic scores `(z_i - e_i) v_i` as rows.
pub fn logistic_score(fit: &LogisticFit, design: &DMatrix<f64>, z: &[bool]) -> DMatrix<f64> {
    let (n, k) = design.shape();
    DMatrix::from_fn(n, k, |i, j| {
        (f64::from(u8::from(z[i])) - fit.fitted[i]) * design[(i, j)]
    })
}

/// Per-observation least-squares scores `(y_i - w_i' alpha) w_i` as rows.
/// Arm masking is left to the caller.
pub fn ols_score(fit: &LinearFit, design: &DMatrix<f64>, y: &[f64]) -> DMatrix<f64> {
    let pred = design * &fit.alpha;
    let (n, k) = design.shape();
    DMatrix::from_fn(n, k, |i, j| (y[i] - pred[i]) * design[(i, j)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intercept(n: usize) -> DMatrix<f64> {
        DMatrix::from_element(n, 1, 1.0)
    }

    fn with_covariate(x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(x.len(), 2, |i, j| if j == 0 { 1.0 } else { x[i] })
    }

    #[test]
    fn balanced_intercept_only() {
        let fit = fit_logistic(&intercept(4), &[false, false, true, true]).unwrap();
        assert!(fit.converged);
        assert!(fit.beta[0].abs() < 1e-12);
        assert!(fit.fitted.iter().all(|&p| (p - 0.5).abs() < 1e-12));
    }

    #[test]
    fn three_quarters_intercept_only() {
        let fit = fit_logistic(&intercept(4), &[false, true, true, true]).unwrap();
        assert!((fit.beta[0] - 3f64.ln()).abs() < 1e-10);
    }

    /// MLE located by successive dense grid refinement of the log-likelihood.
    fn grid_mle(design: &DMatrix<f64>, z: &[bool]) -> (f64, f64) {
        let (mut c0, mut c1, mut half) = (0.0, 0.0, 8.0);
        for _ in 0..40 {
            let mut best = (f64::NEG_INFINITY, c0, c1);
            let steps = 40;
            for a in 0..=steps {
                for b in 0..=steps {
                    let b0 = c0 - half + 2.0 * half * a as f64 / steps as f64;
                    let b1 = c1 - half + 2.0 * half * b as f64 / steps as f64;
                    let ll = logistic_log_likelihood(design, z, &DVector::from_vec(vec![b0, b1]));
                    if ll > best.0 {
                        best = (ll, b0, b1);
                    }
                }
            }
            c0 = best.1;
            c1 = best.2;
            half *= 0.25;
        }
        (c0, c1)
    }

    #[test]
    fn six_row_fit_matches_grid_oracle() {
        let x = [-1.2, -0.4, 0.3, 0.5, 1.1, 2.0];
        let z = [false, true, false, true, false, true];
        let design = with_covariate(&x);
        let fit = fit_logistic(&design, &z).unwrap();
        let (b0, b1) = grid_mle(&design, &z);
        assert!((fit.beta[0] - b0).abs() < 1e-6, "{} vs {b0}", fit.beta[0]);
        assert!((fit.beta[1] - b1).abs() < 1e-6, "{} vs {b1}", fit.beta[1]);
    }

    #[test]
    fn single_class_is_rejected() {
        assert_eq!(
            fit_logistic(&intercept(3), &[true, true, true]),
            Err(WateError::SingleClass)
        );
    }

    #[test]
    fn separated_data_fail() {
        let design = with_covariate(&[-2.0, -1.0, 1.0, 2.0]);
        let res = fit_logistic(&design, &[false, false, true, true]);
        // either flagged as diverged or left unconverged with probabilities at the clamp
        match res {
            Err(WateError::Diverged { .. }) => {}
            Ok(fit) => assert!(!fit.converged || fit.beta[1] > 10.0),
            Err(other) => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn collinear_design_is_rejected() {
        let design = DMatrix::from_fn(5, 3, |i, j| match j {
            0 => 1.0,
            1 => i as f64,
            _ => 2.0 * i as f64,
        });
        assert!(matches!(
            fit_logistic(&design, &[false, true, false, true, true]),
            Err(WateError::RankDeficientDesign { .. })
        ));
    }

    #[test]
    fn irls_does_not_decrease_likelihood() {
        let x = [-1.0, -0.5, 0.0, 0.2, 0.9, 1.4, 2.2, -0.3];
        let z = [false, false, true, false, true, true, true, true];
        let design = with_covariate(&x);
        let fit = fit_logistic(&design, &z).unwrap();
        let start = logistic_log_likelihood(&design, &z, &DVector::zeros(2));
        assert!(logistic_log_likelihood(&design, &z, &fit.beta) >= start);
    }

    #[test]
    fn logistic_score_columns_average_to_zero() {
        let x = [-1.0, -0.5, 0.0, 0.2, 0.9, 1.4, 2.2, -0.3];
        let z = [false, false, true, false, true, true, true, true];
        let design = with_covariate(&x);
        let fit = fit_logistic(&design, &z).unwrap();
        let s = logistic_score(&fit, &design, &z);
        for j in 0..2 {
            assert!((s.column(j).sum() / 8.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn logistic_score_row_vanishes_when_z_equals_e() {
        let design = DMatrix::from_row_slice(1, 1, &[1.0]);
        let fit = LogisticFit {
            beta: DVector::from_vec(vec![0.0]),
            fitted: vec![1.0],
            converged: true,
            iterations: 0,
        };
        let s = logistic_score(&fit, &design, &[true]);
        assert_eq!(s[(0, 0)], 0.0);
    }

    #[test]
    fn logistic_score_matches_finite_differences() {
        let x = [-1.0, 0.4, 0.1, 1.3, -0.7];
        let z = [true, false, true, true, false];
        let design = with_covariate(&x);
        let beta = DVector::from_vec(vec![0.3, -0.8]);
        let fit = LogisticFit {
            fitted: propensity(&design, &beta),
            beta: beta.clone(),
            converged: false,
            iterations: 0,
        };
        let s = logistic_score(&fit, &design, &z);
        let h = 1e-5;
        for j in 0..2 {
            let mut up = beta.clone();
            let mut down = beta.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (logistic_log_likelihood(&design, &z, &up)
                - logistic_log_likelihood(&design, &z, &down))
                / (2.0 * h);
            assert!((fd - s.column(j).sum()).abs() < 1e-6);
        }
    }

    #[test]
    fn ols_interpolates() {
        let design = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let fit = fit_ols(&design, &[1.0, 3.0]).unwrap();
        assert!((fit.alpha[0] - 1.0).abs() < 1e-12);
        assert!((fit.alpha[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ols_constant_response() {
        let design = with_covariate(&[0.1, 0.7, -0.3, 2.0]);
        let fit = fit_ols(&design, &[2.5; 4]).unwrap();
        assert!((fit.alpha[0] - 2.5).abs() < 1e-12);
        assert!(fit.alpha[1].abs() < 1e-12);
    }

    /// Explicit 3×3 inverse by cofactors.
    fn inverse3(m: &DMatrix<f64>) -> DMatrix<f64> {
        let c = |r: usize, c: usize| {
            let rows: Vec<usize> = (0..3).filter(|&i| i != r).collect();
            let cols: Vec<usize> = (0..3).filter(|&j| j != c).collect();
            m[(rows[0], cols[0])] * m[(rows[1], cols[1])]
                - m[(rows[0], cols[1])] * m[(rows[1], cols[0])]
        };
        let det = m[(0, 0)] * c(0, 0) - m[(0, 1)] * c(0, 1) + m[(0, 2)] * c(0, 2);
        DMatrix::from_fn(3, 3, |i, j| {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            sign * c(j, i) / det
        })
    }

    #[test]
    fn ols_matches_normal_equations_oracle() {
        // deterministic pseudo-random 20×3 system
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let design = DMatrix::from_fn(20, 3, |_, j| if j == 0 { 1.0 } else { 0.0 });
        let mut design = design;
        for i in 0..20 {
            design[(i, 1)] = next();
            design[(i, 2)] = next() * 3.0;
        }
        let y: Vec<f64> = (0..20).map(|_| next() * 5.0).collect();
        let fit = fit_ols(&design, &y).unwrap();
        let xtx = design.transpose() * &design;
        let xty = design.transpose() * DVector::from_vec(y.clone());
        let oracle = inverse3(&xtx) * xty;
        assert!((fit.alpha - oracle).amax() < 1e-10);
    }

    #[test]
    fn ols_residuals_orthogonal_to_design() {
        let design = with_covariate(&[0.1, 0.7, -0.3, 2.0, 1.1]);
        let y = [1.0, 2.0, 0.5, 4.0, 3.3];
        let fit = fit_ols(&design, &y).unwrap();
        let s = ols_score(&fit, &design, &y);
        for j in 0..2 {
            assert!(s.column(j).sum().abs() <= 1e-8 * 5.0);
        }
    }

    #[test]
    fn ols_score_matches_finite_differences() {
        let design = with_covariate(&[0.1, 0.7, -0.3, 2.0, 1.1]);
        let y = [1.0, 2.0, 0.5, 4.0, 3.3];
        let alpha = DVector::from_vec(vec![0.2, 1.1]);
        let fit = LinearFit {
            alpha: alpha.clone(),
            which_arm: None,
        };
        let loss = |a: &DVector<f64>| -> f64 {
            let r = DVector::from_column_slice(&y) - &design * a;
            -0.5 * r.norm_squared()
        };
        let s = ols_score(&fit, &design, &y);
        let h = 1e-5;
        for j in 0..2 {
            let mut up = alpha.clone();
            let mut down = alpha.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (loss(&up) - loss(&down)) / (2.0 * h);
            assert!((fd - s.column(j).sum()).abs() < 1e-6);
        }
    }

    #[test]
    fn ols_zero_residual_row_is_zero() {
        let design = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let fit = fit_ols(&design, &[1.0, 3.0]).unwrap();
        let s = ols_score(&fit, &design, &[1.0, 3.0]);
        assert!(s.amax() < 1e-12);
    }

    #[test]
    fn ols_rank_checks() {
        let design = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(matches!(
            fit_ols(&design, &[1.0, 2.0, 3.0]),
            Err(WateError::RankDeficientDesign { .. })
        ));
        let wide = DMatrix::from_element(1, 2, 1.0);
        assert!(matches!(
            fit_ols(&wide, &[1.0]),
            Err(WateError::TooFewObservations { .. })
        ));
    }

    #[test]
    fn arm_fit_uses_only_arm_rows() {
        let design = with_covariate(&[0.0, 1.0, 0.0, 1.0]);
        let y = [1.0, 3.0, 10.0, 10.0];
        let z = [true, true, false, false];
        let fit = fit_arm_ols(&design, &y, &z, Arm::Treated).unwrap();
        assert_eq!(fit.which_arm, Some(Arm::Treated));
        assert!((fit.alpha[0] - 1.0).abs() < 1e-12 && (fit.alpha[1] - 2.0).abs() < 1e-12);
    }
}
