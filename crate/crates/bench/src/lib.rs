//! Shared fixtures for the benchmarks.

use wate_core::simulation::{generate, EffectType, Scenario, SimModel};
use wate_core::{Dataset, ModelSpecs, StreamSeed};

/// A Model 2 heterogeneous-effect sample of size `n` with correctly
/// specified working models.
pub fn model2_sample(n: usize, seed: u64) -> (Dataset, ModelSpecs) {
    let model = SimModel::new(2).expect("model 2 exists");
    let data = generate(&model, n, EffectType::Heterogeneous, StreamSeed::new(seed)).expect("generation succeeds");
    (data.dataset, Scenario::A1.specs())
}
