//! Regenerates `data/nhanes_like.csv`, a synthetic stand-in shaped like the
//! fish-consumption / blood-mercury extract: 1107 adults, binary high fish
//! intake, log2 blood mercury, and eight covariates.
//!
//! ```text
//! cargo run -p wate-cli --example nhanes_like > crates/cli/data/nhanes_like.csv
//! ```

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use wate_core::StreamSeed;

const N: usize = 1107;
const SEED: u64 = 2_024_0915;

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn main() {
    let mut rng = StreamSeed::new(SEED).rng();
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut out = csv::Writer::from_writer(std::io::stdout());
    out.write_record([
        "fish",
        "log2_mercury",
        "female",
        "age",
        "income",
        "income_missing",
        "race",
        "education",
        "smoking_ever",
        "cigarettes",
    ])
    .unwrap();

    for _ in 0..N {
        let female = rng.random_bool(0.5) as u8;
        let age = rng.random_range(18..=80) as f64;
        let income_missing = rng.random_bool(0.08) as u8;
        // Poverty-income ratio, capped at 5 as in the survey release.
        let income = if income_missing == 1 {
            0.0
        } else {
            ((0.4 + 4.6 * rng.random::<f64>().powf(0.8)) * 100.0).round() / 100.0
        }
        .min(5.0);
        let race = match rng.random::<f64>() {
            u if u < 0.40 => 3.0,
            u if u < 0.60 => 4.0,
            u if u < 0.75 => 1.0,
            u if u < 0.87 => 6.0,
            u if u < 0.95 => 2.0,
            _ => 7.0,
        };
        let education = rng.random_range(1..=5) as f64;
        let smoking_ever = rng.random_bool(0.42) as u8;
        let cigarettes = if smoking_ever == 1 && rng.random_bool(0.45) {
            Poisson::new(180.0).unwrap().sample(&mut rng)
        } else {
            0.0
        };

        let asian = if race == 6.0 { 1.0 } else { 0.0 };
        let eta = -4.2 + 0.025 * age + 0.30 * income + 1.4 * asian + 0.22 * education
            - 0.25 * smoking_ever as f64
            - 0.002 * cigarettes
            - 0.3 * income_missing as f64
            + 0.1 * female as f64;
        let fish = rng.random_bool(expit(eta));

        let effect = 1.2 + 0.01 * (age - 45.0) + 0.15 * income + 0.4 * asian;
        let y = -0.6 + 0.012 * age + 0.18 * income + 0.9 * asian + 0.08 * education - 0.15 * female as f64
            + 0.001 * cigarettes
            + if fish { effect } else { 0.0 }
            + 0.9 * noise.sample(&mut rng);

        out.write_record([
            (fish as u8).to_string(),
            format!("{:.4}", y),
            female.to_string(),
            age.to_string(),
            income.to_string(),
            income_missing.to_string(),
            race.to_string(),
            education.to_string(),
            smoking_ever.to_string(),
            cigarettes.to_string(),
        ])
        .unwrap();
    }
    out.flush().unwrap();
}
