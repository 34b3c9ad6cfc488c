//! Properties of the experiment driver, shared by the `invariants` test
//! target and the acceptance run.
#![allow(dead_code)]

use std::collections::HashSet;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use transfold::itebd::{Itebd, ItebdOptions, UniformState};
use transfold::transverse::{environment, expectation, EigenOptions, Network};
use transfold::trotter::{plus_state, Evolution, ModelSpec, Schedule, Splitting, TrotterPlan};
use transfold_cli::{run, Command, Method, ResultRecord, RunConfig};

pub const CASES: u32 = 100;

pub type Property = (&'static str, fn(u32) -> Result<(), String>);

pub fn all() -> Vec<Property> {
    vec![
        ("reruns give identical records", reruns_are_identical),
        ("record truncation errors are auditable", trunc_errors_are_auditable),
    ]
}

pub fn run_all(cases: u32) -> Vec<(&'static str, Result<(), String>)> {
    all().into_iter().map(|(name, f)| (name, f(cases))).collect()
}

fn check<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let config = Config { cases, failure_persistence: None, max_shrink_iters: 16, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, TestCaseError> {
    r.map_err(|e| TestCaseError::fail(e.to_string()))
}

fn records(cfg: &RunConfig) -> Result<Vec<ResultRecord>, TestCaseError> {
    let mut out = Vec::new();
    ok(run(cfg, &mut |r| {
        out.push(r);
        Ok(())
    }))?;
    Ok(out)
}

fn method() -> impl Strategy<Value = Method> {
    prop_oneof![Just(Method::Folded), Just(Method::Transverse), Just(Method::Itebd), Just(Method::Oracle)]
}

/// Short quenches, small enough to run hundreds of times.
fn quench() -> impl Strategy<Value = RunConfig> {
    let fields = (0.5..1.5f64, prop_oneof![Just(0.0), 0.0..0.5f64]);
    let sizes = (0usize..5, 2usize..12, 1usize..3, 1usize..3, any::<u64>());
    (method(), fields, sizes).prop_map(|(method, (g, h), (steps, bond, stride, jobs, seed))| {
        let mut c = RunConfig::defaults(Command::Quench);
        c.method = method;
        c.g = g;
        c.h = h;
        c.delta = 0.05;
        c.tmax = 0.05 * steps as f64;
        c.bond = bond;
        c.stride = stride;
        c.jobs = jobs;
        c.seed = seed;
        c
    })
}

fn same(a: &ResultRecord, b: &ResultRecord) -> bool {
    let bits = |x: f64| x.to_bits();
    a.t.to_bits() == b.t.to_bits()
        && a.observable == b.observable
        && a.site == b.site
        && bits(a.value_re) == bits(b.value_re)
        && bits(a.value_im) == bits(b.value_im)
        && bits(a.lambda_abs) == bits(b.lambda_abs)
        && a.bond == b.bond
        && bits(a.trunc_error) == bits(b.trunc_error)
        && a.method == b.method
        && a.config_hash == b.config_hash
}

/// Wall-clock time is the one field allowed to differ between reruns.
pub fn reruns_are_identical(cases: u32) -> Result<(), String> {
    check(cases, quench(), |cfg| {
        ok(cfg.validate())?;
        let first = records(&cfg)?;
        let second = records(&cfg)?;
        prop_assert_eq!(first.len(), second.len());
        for (a, b) in first.iter().zip(&second) {
            prop_assert!(same(a, b), "{a:?} vs {b:?}");
        }
        let keys: HashSet<(u64, &str, i64)> = first.iter().map(|r| (r.t.to_bits(), r.observable.as_str(), r.site)).collect();
        prop_assert_eq!(keys.len(), first.len(), "repeated (t, observable, site)");
        Ok(())
    })
}

/// Truncation errors recomputed from the library calls behind each record.
pub fn trunc_errors_are_auditable(cases: u32) -> Result<(), String> {
    let m = prop_oneof![Just(Method::Transverse), Just(Method::Itebd)];
    check(cases, (quench(), m), |(mut cfg, method)| {
        cfg.method = method;
        cfg.jobs = 1;
        let recs = records(&cfg)?;
        let plan = ok(TrotterPlan::new(ModelSpec::ising(cfg.g, cfg.h, Evolution::Real), cfg.delta, Splitting::FieldZz))?;
        let mut itebd = Itebd::new(ok(UniformState::product(&plus_state()))?, ItebdOptions { max_bond: cfg.bond, ..Default::default() });
        let mut done = 0;
        for r in &recs {
            let n = (r.t / cfg.delta).round() as usize;
            let expected = match method {
                Method::Itebd => {
                    ok(itebd.run(&plan, n - done))?;
                    done = n;
                    itebd.trunc_error
                }
                _ => {
                    let opts = EigenOptions { max_bond: cfg.bond, tol: cfg.tol, max_iters: cfg.max_iters, seed: cfg.seed, ..Default::default() };
                    let net = ok(Network::new(Schedule::uniform(plan.clone(), n), plus_state(), false))?;
                    let env = ok(environment(&net, &opts, None))?;
                    let v = ok(expectation(&env, &net, &cfg.op.matrix(), 0, &opts))?;
                    env.trunc_error() + v.trunc_error
                }
            };
            prop_assert_eq!(r.trunc_error.to_bits(), expected.to_bits(), "t = {}: {} vs {}", r.t, r.trunc_error, expected);
        }
        Ok(())
    })
}
