use transfold::mps::{Mpo, Mps};
use transfold::oracles::{ed_evolve_expectation, ed_two_time_correlator, tfim_ground_sigma_x, Chain, Propagator};
use transfold::tensor::{eig, Tensor};
use transfold::transverse::{
    dominant_eigenpair, environment, expectation, impurity_profile, two_time_correlator, EigenOptions, Network, Side,
};
use transfold::trotter::{plus_state, Evolution, ModelSpec, Pauli, Schedule, Splitting, TrotterPlan};
use transfold::C64;

fn plan(g: f64, h: f64, delta: f64, evolution: Evolution) -> TrotterPlan {
    TrotterPlan::new(ModelSpec::ising(g, h, evolution), delta, Splitting::FieldZz).unwrap()
}

fn quench(g: f64, delta: f64, n: usize, folded: bool) -> Network {
    Network::new(Schedule::uniform(plan(g, 0.0, delta, Evolution::Real), n), plus_state(), folded).unwrap()
}

fn exact() -> EigenOptions {
    EigenOptions { max_bond: 1 << 12, tol: 1e-14, rel_cutoff: 0.0, max_iters: 2000, ..Default::default() }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[test]
fn two_step_column_matches_dense_evolution() {
    let delta = 0.1;
    let net = quench(1.0, delta, 2, false);
    let env = environment(&net, &exact(), None).unwrap();
    let v = expectation(&env, &net, &Pauli::X.matrix(), 0, &exact()).unwrap();
    let p = plan(1.0, 0.0, delta, Evolution::Real);
    let ed = ed_evolve_expectation(p.model(), 12, 2.0 * delta, &Propagator::Trotter(p.clone()), Pauli::X, &plus_state()).unwrap();
    assert!((v.value - ed).norm() < 1e-10, "{} vs {ed}", v.value);
}

#[test]
fn product_column_has_trace_eigenvalue() {
    // rank-one local factors u vᵀ: the dominant eigenvector is the product of
    // the u's and the eigenvalue the product of the traces vᵀu
    let u = [c(1.0, 0.5), c(0.3, -0.2)];
    let v = [c(0.7, 0.0), c(-0.4, 0.1)];
    let m = Tensor::from_fn(&[2, 2], |i| u[i[0]] * v[i[1]]);
    let trace = u[0] * v[0] + u[1] * v[1];
    let col = Mpo::product(&[m.clone(), m.clone(), m]).unwrap();
    let start = Mps::product(&vec![vec![c(1.0, 0.0), c(1.0, 0.0)]; 3]).unwrap();
    let pair = dominant_eigenpair(&col, Side::Right, &start, &EigenOptions::default()).unwrap();
    assert!((pair.lambda - trace * trace * trace).norm() < 1e-12);
    assert_eq!(pair.vector.max_bond(), 1);
    assert!(pair.iterations <= 3, "{} iterations", pair.iterations);
}

#[test]
fn zero_step_column_has_unit_eigenvalue() {
    let env = environment(&quench(1.0, 0.1, 0, false), &EigenOptions::default(), None).unwrap();
    assert!((env.lambda - 1.0).norm() < 1e-12);
}

#[test]
fn imaginary_time_eigenvalue_matches_dense_transfer_matrix() {
    let net = Network::new(Schedule::uniform(plan(1.0, 0.0, 0.1, Evolution::Imaginary), 3), plus_state(), false).unwrap();
    let env = environment(&net, &exact(), None).unwrap();
    let (vals, _) = eig(&env.column.to_dense().unwrap()).unwrap();
    let top = vals.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
    assert!((env.lambda - top).norm() < 1e-10 * top.norm(), "{} vs {top}", env.lambda);
}

#[test]
fn identity_and_initial_expectations() {
    let opts = EigenOptions { max_bond: 32, ..Default::default() };
    let net = quench(1.0, 0.05, 6, false);
    let env = environment(&net, &opts, None).unwrap();
    let one = expectation(&env, &net, &Tensor::eye(2), 0, &opts).unwrap();
    assert!((one.value - 1.0).norm() < 1e-12);
    let net0 = quench(1.0, 0.05, 0, false);
    let env0 = environment(&net0, &opts, None).unwrap();
    let x = expectation(&env0, &net0, &Pauli::X.matrix(), 0, &opts).unwrap();
    assert!((x.value - 1.0).norm() < 1e-12);
}

#[test]
fn quench_to_unit_time_matches_dense_evolution() {
    let delta = 0.01;
    let net = quench(1.0, delta, 100, false);
    let opts = EigenOptions { max_bond: 32, ..Default::default() };
    let env = environment(&net, &opts, None).unwrap();
    let v = expectation(&env, &net, &Pauli::X.matrix(), 0, &opts).unwrap();
    let p = plan(1.0, 0.0, delta, Evolution::Real);
    let ed = ed_evolve_expectation(p.model(), 16, 1.0, &Propagator::Trotter(p.clone()), Pauli::X, &plus_state()).unwrap();
    assert!((v.value - ed).norm() < 1e-4, "{} vs {ed}", v.value);
}

#[test]
fn equal_time_correlators_of_the_initial_state() {
    let opts = EigenOptions { max_bond: 32, ..Default::default() };
    let z = Pauli::Z.matrix();
    let net = quench(1.0, 0.05, 4, false);
    let env = environment(&net, &opts, None).unwrap();
    let squared = two_time_correlator(&env, &net, &z, 4, &z, 0, &opts).unwrap();
    assert!((squared.value - 1.0).norm() < 1e-10);
    let net0 = quench(1.0, 0.05, 0, false);
    let env0 = environment(&net0, &opts, None).unwrap();
    let separated = two_time_correlator(&env0, &net0, &z, 0, &z, 1, &opts).unwrap();
    assert!(separated.value.norm() < 1e-12);
}

#[test]
fn two_time_correlator_matches_dense_evolution() {
    let delta = 0.05;
    let net = quench(1.0, delta, 20, false);
    let opts = EigenOptions { max_bond: 64, tol: 1e-10, ..Default::default() };
    let env = environment(&net, &opts, None).unwrap();
    let z = Pauli::Z.matrix();
    let v = two_time_correlator(&env, &net, &z, 10, &z, 2, &opts).unwrap();
    let p = plan(1.0, 0.0, delta, Evolution::Real);
    let ed = ed_two_time_correlator(p.model(), 16, &Propagator::Trotter(p.clone()), &plus_state(), Pauli::Z, 0.5, Pauli::Z, 1.0, 2)
        .unwrap();
    assert!((v.value - ed).norm() < 1e-4, "{} vs {ed}", v.value);
}

#[test]
fn strong_impurity_raises_local_magnetization() {
    let (g, g0) = (1.5, 2.0);
    let mut schedule = Schedule::uniform(plan(g, 0.0, 0.1, Evolution::Imaginary), 50);
    schedule.push(plan(g, 0.0, 0.01, Evolution::Imaginary), 100);
    let bulk_net = Network::new(schedule.clone(), plus_state(), false).unwrap();
    let model = ModelSpec::ising(g, 0.0, Evolution::Imaginary).with_impurity(g0);
    let net = Network::new(schedule.with_model(model).unwrap(), plus_state(), false).unwrap();
    let opts = EigenOptions { max_bond: 16, max_iters: 1000, ..Default::default() };
    let env = environment(&net, &opts, None).unwrap();
    let x = Pauli::X.matrix();
    let bulk = expectation(&env, &bulk_net, &x, 0, &opts).unwrap().value.re;
    let profile = impurity_profile(&env, &net, &x, &[-8, 0, 8], &opts).unwrap();
    let at = profile[1].1.value.re;
    assert!(at > bulk + 0.01, "impurity {at} vs bulk {bulk}");
    let mut ed = Vec::new();
    for n in [13, 15, 17] {
        let chain = Chain::centered(ModelSpec::ising(g, 0.0, Evolution::Real).with_impurity(g0), n);
        let (_, gs) = chain.ground_state(1e-10, 7).unwrap();
        ed.push(gs.expectation(&x, chain.position(0).unwrap()).unwrap().re);
    }
    // the open chains converge geometrically; Aitken's Δ² gives the limit
    let (d1, d2) = (ed[1] - ed[0], ed[2] - ed[1]);
    assert!(d2.abs() < d1.abs());
    let limit = ed[2] - d2 * d2 / (d2 - d1);
    assert!((at - ed[2]).abs() < 1e-4, "impurity {at} vs N = 17 chain {}", ed[2]);
    assert!((at - limit).abs() < 1e-4, "impurity {at} vs extrapolated {limit}");
    let exact_bulk = tfim_ground_sigma_x(g).unwrap();
    for far in [profile[0].1.value.re, profile[2].1.value.re, bulk] {
        assert!((far - exact_bulk).abs() < 1e-4, "{far} vs {exact_bulk}");
    }
}

#[test]
fn folded_and_unfolded_quench_agree_at_short_times() {
    let opts = EigenOptions { max_bond: 64, tol: 1e-12, ..Default::default() };
    for n in [5, 10, 20] {
        let mut values = Vec::new();
        for folded in [false, true] {
            let net = quench(1.0, 0.05, n, folded);
            let env = environment(&net, &opts, None).unwrap();
            values.push(expectation(&env, &net, &Pauli::X.matrix(), 0, &opts).unwrap().value);
        }
        assert!((values[0] - values[1]).norm() < 1e-8, "n = {n}: {values:?}");
    }
}
