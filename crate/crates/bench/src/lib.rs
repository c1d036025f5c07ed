//! Fixed inputs shared by the benchmarks.

use forestview_core::synth::{random_forest, unit_features};
use forestview_core::{forest_rules, Forest, Rule};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A synthetic forest over unit features with its rules, seeded so every run
/// measures the same input.
pub fn synthetic(n_trees: usize, n_features: usize, max_depth: usize) -> (Forest, Vec<Vec<Rule>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xbe7c);
    let features = unit_features(n_features);
    let forest = random_forest(&mut rng, &features, 3, n_trees, max_depth);
    let rules = forest_rules(&forest, &features);
    (forest, rules)
}
