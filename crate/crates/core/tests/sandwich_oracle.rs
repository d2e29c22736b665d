//! The block-structured sandwich against a brute-force M-estimation oracle:
//! finite-difference Jacobian of the mean estimating function and a dense
//! inverse of the full bread matrix.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use wate_core::variance::{bread_matrix, contrast_vector, estimating_function, sandwich_variance, solve_theta, ThetaAug};
use wate_core::{Dataset, DesignSpec, Estimand, ModelSpecs, StreamSeed};

const ESTIMANDS: [Estimand; 7] = [
    Estimand::Ate,
    Estimand::Att,
    Estimand::Atc,
    Estimand::Ato,
    Estimand::Atm,
    Estimand::Aten,
    Estimand::Trim(0.1),
];

fn dataset(seed: u64, n: usize) -> Dataset {
    let mut rng = StreamSeed(seed).rng();
    let mut x = DMatrix::zeros(n, 2);
    let (mut z, mut y) = (Vec::new(), Vec::new());
    for i in 0..n {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        let e = 1.0 / (1.0 + (-(0.3 + 0.5 * a - 0.4 * b)).exp());
        let t = rng.random::<f64>() < e;
        let noise: f64 = rng.sample(StandardNormal);
        x[(i, 0)] = a;
        x[(i, 1)] = b;
        z.push(t);
        y.push(1.0 + a + b + if t { 2.0 + a } else { 0.0 } + noise);
    }
    Dataset::new(z, y, x, vec!["a".into(), "b".into()]).unwrap()
}

fn specs() -> ModelSpecs {
    ModelSpecs::new(DesignSpec::all(2), DesignSpec::all(2))
}

fn mean_psi(ds: &Dataset, est: Estimand, theta: &DVector<f64>) -> DVector<f64> {
    let t = ThetaAug::from_vector(theta, 3, 3);
    let psi = estimating_function(ds, &specs(), est, &t).unwrap();
    psi.row_sum().transpose() / ds.n() as f64
}

/// `-∂ mean ψ / ∂θ'` by central differences with relative step `1e-5`.
fn numerical_bread(ds: &Dataset, est: Estimand, theta: &ThetaAug) -> DMatrix<f64> {
    let base = theta.to_vector();
    let d = base.len();
    let mut a = DMatrix::zeros(d, d);
    for j in 0..d {
        let h = 1e-5 * base[j].abs().max(1.0);
        let mut up = base.clone();
        let mut dn = base.clone();
        up[j] += h;
        dn[j] -= h;
        let col = (mean_psi(ds, est, &up) - mean_psi(ds, est, &dn)) / (2.0 * h);
        a.set_column(j, &(-col));
    }
    a
}

fn brute_force_variance(ds: &Dataset, est: Estimand, theta: &ThetaAug) -> f64 {
    let a = numerical_bread(ds, est, theta);
    let psi = estimating_function(ds, &specs(), est, theta).unwrap();
    let n = ds.n() as f64;
    let b = psi.transpose() * &psi / n;
    let a_inv = a.try_inverse().expect("bread invertible");
    let sigma = &a_inv * b * a_inv.transpose();
    let c = contrast_vector(3, 3);
    (c.transpose() * sigma * c)[(0, 0)] / n
}

/// Propensities away from the kinks of ATM (0.5) and TRIM(0.1) (0.1, 0.9),
/// where a finite-difference Jacobian is not meaningful.
fn away_from_kinks(ds: &Dataset, theta: &ThetaAug) -> bool {
    let v = wate_core::design_matrix(ds, &specs().ps).unwrap();
    wate_core::glm::propensity(&v, &theta.beta)
        .iter()
        .all(|&e| [0.1, 0.5, 0.9].iter().all(|k| (e - k).abs() > 1e-3))
}

#[test]
fn bread_matches_finite_differences() {
    for seed in 0..5 {
        let ds = dataset(seed, 60);
        for est in ESTIMANDS {
            let theta = solve_theta(&ds, &specs(), est).unwrap();
            if !away_from_kinks(&ds, &theta) {
                continue;
            }
            let analytic = bread_matrix(&ds, &specs(), est, &theta).unwrap();
            let numeric = numerical_bread(&ds, est, &theta);
            let err = (&analytic - &numeric).amax();
            assert!(err < 1e-4, "{est} seed {seed}: max abs difference {err:e}");
        }
    }
}

#[test]
fn block_sandwich_matches_dense_oracle() {
    let mut checked = 0;
    let mut seed = 100;
    while checked < 10 {
        seed += 1;
        let ds = dataset(seed, 60);
        let thetas: Vec<_> = ESTIMANDS.iter().map(|&e| solve_theta(&ds, &specs(), e).unwrap()).collect();
        if !thetas.iter().all(|t| away_from_kinks(&ds, t)) {
            continue;
        }
        for (est, theta) in ESTIMANDS.iter().zip(&thetas) {
            let fast = sandwich_variance(&ds, theta, &specs(), *est).unwrap().variance;
            let oracle = brute_force_variance(&ds, *est, theta);
            let rel = (fast - oracle).abs() / oracle;
            assert!(rel < 1e-6, "{est} seed {seed}: {fast} vs {oracle} (rel {rel:e})");
        }
        checked += 1;
    }
}

#[test]
fn bread_is_block_lower_triangular() {
    let ds = dataset(7, 80);
    let theta = solve_theta(&ds, &specs(), Estimand::Ato).unwrap();
    let a = bread_matrix(&ds, &specs(), Estimand::Ato, &theta).unwrap();
    // parameter blocks β, α1, α0 never depend on later blocks
    for r in 0..9 {
        for c in 0..a.ncols() {
            let same_block = r / 3 == c / 3 && c < 9;
            if !same_block {
                assert_eq!(a[(r, c)], 0.0, "entry ({r}, {c})");
            }
        }
    }
    for r in 9..13 {
        for c in 9..13 {
            if r != c {
                assert_eq!(a[(r, c)], 0.0);
            }
        }
    }
}

#[test]
fn singular_outcome_block_is_unobtainable() {
    // a covariate constant within the treated arm makes that outcome block singular
    let base = dataset(3, 60);
    let mut x = base.covariates().clone();
    for i in 0..base.n() {
        if base.z()[i] {
            x[(i, 1)] = 1.0;
        }
    }
    let ds = Dataset::new(base.z().to_vec(), base.y().to_vec(), x, base.covariate_names().to_vec()).unwrap();
    let theta = ThetaAug {
        beta: DVector::from_vec(vec![0.1, 0.2, 0.0]),
        alpha1: DVector::zeros(3),
        alpha0: DVector::zeros(3),
        tau1: 0.0,
        tau0: 0.0,
        mu1: 0.0,
        mu0: 0.0,
    };
    let err = sandwich_variance(&ds, &theta, &specs(), Estimand::Ate).unwrap_err();
    assert!(matches!(err, wate_core::WateError::SandwichUnobtainable(_)), "{err}");
}
