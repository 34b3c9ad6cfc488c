use proptest::prelude::*;
use transfold::oracles::{Chain, DenseState};
use transfold::tensor::{eigh, Tensor};
use transfold::trotter::{plus_state, Evolution, ModelSpec, Pauli, Splitting, TrotterPlan};

use super::{check, ok, Property};

pub fn all() -> Vec<Property> {
    vec![
        ("real-time gates are unitary", real_gates_are_unitary),
        ("imaginary-time gates are positive contractions", imaginary_gates_are_positive),
        ("trotter error is second order", trotter_error_is_second_order),
        ("trivial impurity leaves the plan unchanged", trivial_impurity_is_bitwise_uniform),
    ]
}

fn splitting() -> impl Strategy<Value = Splitting> {
    prop_oneof![Just(Splitting::BondSymmetric), Just(Splitting::FieldZz)]
}

fn model_params() -> impl Strategy<Value = (f64, f64, Option<f64>)> {
    (-2.0..2.0f64, -1.0..1.0f64, prop::option::of(-2.0..2.0f64))
}

fn model((g, h, g0): (f64, f64, Option<f64>), evolution: Evolution) -> ModelSpec {
    let m = ModelSpec::ising(g, h, evolution);
    match g0 {
        Some(g0) => m.with_impurity(g0),
        None => m,
    }
}

fn gates(plan: &TrotterPlan) -> Result<Vec<Tensor>, TestCaseError> {
    // a segment straddling the impurity
    Ok(ok(plan.step_gates(-3, 6))?.into_iter().map(|g| g.matrix).collect())
}

pub fn real_gates_are_unitary(cases: u32) -> Result<(), String> {
    check(cases, (model_params(), 1e-3..0.5f64, splitting()), |(p, delta, s)| {
        let plan = ok(TrotterPlan::new(model(p, Evolution::Real), delta, s))?;
        for g in gates(&plan)? {
            let n = g.shape()[0];
            let d = ok(ok(ok(g.dagger())?.matmul(&g))?.distance(&Tensor::eye(n)))?;
            prop_assert!(d <= 1e-12, "U†U off identity by {d:e}");
        }
        Ok(())
    })
}

pub fn imaginary_gates_are_positive(cases: u32) -> Result<(), String> {
    check(cases, (model_params(), 1e-3..0.5f64, splitting()), |(p, delta, s)| {
        let plan = ok(TrotterPlan::new(model(p, Evolution::Imaginary), delta, s))?;
        for g in gates(&plan)? {
            let h = ok(ok(g.dagger())?.distance(&g))?;
            prop_assert!(h <= 1e-12, "not Hermitian by {h:e}");
            let (vals, _) = ok(eigh(&g))?;
            prop_assert!(vals.iter().all(|&v| v > 0.0 && v <= 1.0 + 1e-12), "spectrum {vals:?}");
        }
        Ok(())
    })
}

/// Largest single-site `X`/`Z` deviation between two states of a chain.
fn observable_gap(a: &DenseState, b: &DenseState, n: usize) -> Result<f64, TestCaseError> {
    let mut worst: f64 = 0.0;
    for op in [Pauli::X.matrix(), Pauli::Z.matrix()] {
        for site in 0..n {
            worst = worst.max((ok(a.expectation(&op, site))? - ok(b.expectation(&op, site))?).norm());
        }
    }
    Ok(worst)
}

pub fn trotter_error_is_second_order(cases: u32) -> Result<(), String> {
    let n = 8;
    check(cases, (0.3..1.5f64, 0.0..1.0f64, splitting()), move |(g, h, s)| {
        let model = ModelSpec::ising(g, h, Evolution::Real);
        let chain = Chain::centered(model, n);
        let psi = ok(DenseState::uniform_product(&plus_state(), n))?;
        let exact = ok(chain.evolve_exact(&psi, 1.0))?;
        let mut errs = Vec::new();
        for steps in [10usize, 20] {
            let plan = ok(TrotterPlan::new(model, 1.0 / steps as f64, s))?;
            errs.push(observable_gap(&ok(chain.evolve_trotter(&psi, &plan, steps))?, &exact, n)?);
        }
        let slope = (errs[0] / errs[1]).log2();
        prop_assert!((slope - 2.0).abs() <= 0.4, "slope {slope} from errors {errs:?}");
        Ok(())
    })
}

pub fn trivial_impurity_is_bitwise_uniform(cases: u32) -> Result<(), String> {
    let evolution = prop_oneof![Just(Evolution::Real), Just(Evolution::Imaginary)];
    check(cases, (-2.0..2.0f64, -1.0..1.0f64, 1e-3..0.5f64, splitting(), evolution), |(g, h, delta, s, e)| {
        let uniform = ok(TrotterPlan::new(ModelSpec::ising(g, h, e), delta, s))?;
        let trivial = ok(TrotterPlan::new(ModelSpec::ising(g, h, e).with_impurity(g), delta, s))?;
        let same = |a: &Tensor, b: &Tensor| a.shape() == b.shape() && a.data() == b.data();
        for (a, b) in gates(&uniform)?.iter().zip(&gates(&trivial)?) {
            prop_assert!(same(a, b));
        }
        for first in -2..2 {
            prop_assert!(same(&ok(uniform.cell_step(first))?, &ok(trivial.cell_step(first))?));
        }
        prop_assert!(uniform.bond_gate(0, 1.0).is_ok_and(|a| trivial.bond_gate(0, 1.0).is_ok_and(|b| same(&a, &b))));
        Ok(())
    })
}
