//! Property suites shared by the `invariants` test target and the
//! acceptance run. Each property takes the number of random instances and
//! reports the first failure.
#![allow(dead_code)]

pub mod folding;
pub mod itebd;
pub mod mps;
pub mod oracles;
pub mod tensors;
pub mod transverse;
pub mod trotter;

use proptest::strategy::Strategy;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

pub const CASES: u32 = 100;

pub type Property = (&'static str, fn(u32) -> Result<(), String>);

/// Runs `test` on `cases` instances drawn from `strategy` with a fixed seed.
pub fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config { cases, failure_persistence: None, max_shrink_iters: 32, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

/// Turns a library error into a test failure.
pub fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, TestCaseError> {
    r.map_err(|e| TestCaseError::fail(e.to_string()))
}

pub fn all() -> Vec<Property> {
    let mut out = Vec::new();
    out.extend(tensors::all());
    out.extend(mps::all());
    out.extend(trotter::all());
    out.extend(transverse::all());
    out.extend(folding::all());
    out.extend(itebd::all());
    out.extend(oracles::all());
    out
}

pub fn run_all(cases: u32) -> Vec<(&'static str, Result<(), String>)> {
    all().into_iter().map(|(name, f)| (name, f(cases))).collect()
}
