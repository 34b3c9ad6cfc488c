use num_complex::Complex64 as C64;
use proptest::prelude::*;
use transfold::itebd::{Itebd, ItebdOptions, UniformState};
use transfold::mps::{apply_mpo, sandwich, Mps};
use transfold::oracles::{Chain, DenseState};
use transfold::tensor::Tensor;
use transfold::transverse::{environment, expectation, two_time_correlator, EigenOptions, Network};
use transfold::trotter::{plus_state, Evolution, ModelSpec, Pauli, Schedule, Splitting, TrotterPlan};

use super::{check, ok, Property};

pub fn all() -> Vec<Property> {
    vec![
        ("left and right eigenvectors are consistent", eigenvectors_are_consistent),
        ("real-time expectations are real", expectations_are_real),
        ("unfolded transverse agrees with itebd", agrees_with_itebd),
        ("equal-time correlator matches the evolved state", equal_time_correlator),
    ]
}

fn exact() -> EigenOptions {
    EigenOptions { max_bond: 256, tol: 1e-14, rel_cutoff: 0.0, max_iters: 2000, ..Default::default() }
}

fn network(g: f64, h: f64, delta: f64, n: usize, evolution: Evolution, folded: bool) -> Result<Network, TestCaseError> {
    let plan = ok(TrotterPlan::new(ModelSpec::ising(g, h, evolution), delta, Splitting::FieldZz))?;
    ok(Network::new(Schedule::uniform(plan, n), plus_state(), folded))
}

fn evolution() -> impl Strategy<Value = Evolution> {
    prop_oneof![Just(Evolution::Real), Just(Evolution::Imaginary)]
}

fn scaled(mut v: Mps, f: C64) -> Mps {
    v.scale(f);
    v
}

pub fn eigenvectors_are_consistent(cases: u32) -> Result<(), String> {
    let s = (0.3..1.5f64, 0.0..0.8f64, 0.02..0.15f64, 1usize..4, evolution(), any::<bool>());
    check(cases, s, |(g, h, delta, n, e, folded)| {
        let net = network(g, h, delta, n, e, folded)?;
        let env = ok(environment(&net, &exact(), None))?;
        let (l, col, r) = (&env.left.vector, &env.column, &env.right.vector);
        let inv = 1.0 / env.lambda;
        let base = ok(sandwich(l, col, r))? * inv;
        let r2 = scaled(ok(apply_mpo(col, r))?, inv);
        let l2 = scaled(ok(apply_mpo(&col.transpose(), l))?, inv);
        for other in [ok(sandwich(l, col, &r2))? * inv, ok(sandwich(&l2, col, r))? * inv] {
            let drift = (other - base).norm() / base.norm();
            prop_assert!(drift < 1e-8, "relative drift {drift:e}");
        }
        Ok(())
    })
}

fn hermitian(a: f64, b: f64, c: f64, d: f64) -> Tensor {
    Tensor::matrix(2, 2, vec![C64::new(a, 0.0), C64::new(b, c), C64::new(b, -c), C64::new(d, 0.0)]).expect("2x2")
}

pub fn expectations_are_real(cases: u32) -> Result<(), String> {
    let op = (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64);
    let s = (0.3..1.5f64, 0.0..0.8f64, 0.02..0.15f64, 0usize..4, any::<bool>(), op);
    check(cases, s, |(g, h, delta, n, folded, (a, b, c, d))| {
        let net = network(g, h, delta, n, Evolution::Real, folded)?;
        let opts = exact();
        let env = ok(environment(&net, &opts, None))?;
        let v = ok(expectation(&env, &net, &hermitian(a, b, c, d), 0, &opts))?;
        prop_assert!(v.value.im.abs() <= 1e-8, "imaginary part {:e}", v.value.im);
        Ok(())
    })
}

pub fn agrees_with_itebd(cases: u32) -> Result<(), String> {
    let s = (0.3..1.5f64, 0.0..0.8f64, 1usize..9, prop_oneof![Just(Pauli::X), Just(Pauli::Z)]);
    check(cases, s, |(g, h, n, op)| {
        let delta = 0.05;
        let net = network(g, h, delta, n, Evolution::Real, false)?;
        let opts = EigenOptions { max_bond: 32, tol: 1e-12, max_iters: 1000, ..Default::default() };
        let env = ok(environment(&net, &opts, None))?;
        let v = ok(expectation(&env, &net, &op.matrix(), 0, &opts))?;
        let plan = ok(TrotterPlan::new(ModelSpec::ising(g, h, Evolution::Real), delta, Splitting::FieldZz))?;
        let mut run = Itebd::new(ok(UniformState::product(&plus_state()))?, ItebdOptions { max_bond: 32, ..Default::default() });
        ok(run.run(&plan, n))?;
        let w = ok(run.state.local_expectation(&op.matrix()))?;
        let trunc = env.trunc_error() + v.trunc_error;
        if trunc < 1e-8 && run.trunc_error < 1e-8 {
            prop_assert!((v.value - w).norm() <= 1e-6, "transverse {} vs itebd {w}", v.value);
        }
        Ok(())
    })
}

fn pauli() -> impl Strategy<Value = Pauli> {
    prop_oneof![Just(Pauli::X), Just(Pauli::Y), Just(Pauli::Z)]
}

pub fn equal_time_correlator(cases: u32) -> Result<(), String> {
    let s = (0.3..1.5f64, 0.0..0.8f64, 0usize..4, 1i64..4, pauli(), pauli(), any::<bool>());
    check(cases, s, |(g, h, n, dx, o1, o2, folded)| {
        let delta = 0.05;
        let net = network(g, h, delta, n, Evolution::Real, folded)?;
        let opts = exact();
        let env = ok(environment(&net, &opts, None))?;
        let c = ok(two_time_correlator(&env, &net, &o1.matrix(), n, &o2.matrix(), dx, &opts))?;

        let sites = 12;
        let plan = ok(TrotterPlan::new(ModelSpec::ising(g, h, Evolution::Real), delta, Splitting::FieldZz))?;
        let chain = Chain::centered(*plan.model(), sites);
        let psi = ok(chain.evolve_trotter(&ok(DenseState::uniform_product(&plus_state(), sites))?, &plan, n))?;
        let x = ok(chain.position(0))?;
        let direct = ok(psi.correlation(&o2.matrix(), x, &o1.matrix(), x + dx as usize))?;
        // eigenvectors converge to about the square root of the eigenvalue tolerance
        prop_assert!((c.value - direct).norm() <= 1e-6, "transverse {} vs dense {direct}", c.value);
        Ok(())
    })
}
