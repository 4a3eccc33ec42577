//! Random policies, logs and system scripts for property tests, plus the checks that
//! compare the two evaluators and audit enforcer runs.

pub mod campaign;
pub mod gen;
pub mod oracle;

use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

/// `n` deterministic draws from `s`, seeded by `seed`.
pub fn sample<S: Strategy>(s: S, n: usize, seed: u64) -> impl Iterator<Item = S::Value> {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    let rng = TestRng::from_seed(RngAlgorithm::ChaCha, &bytes);
    let mut runner = TestRunner::new_with_rng(Config::default(), rng);
    (0..n).map(move |_| s.new_tree(&mut runner).expect("strategy without filters").current())
}
