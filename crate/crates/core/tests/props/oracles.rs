use proptest::prelude::*;
use transfold::oracles::{ed_evolve_expectation, tfim_quench_sigma_x, Chain, DenseState, Propagator};
use transfold::trotter::{plus_state, Evolution, ModelSpec, Pauli, Splitting, TrotterPlan};

use super::{check, ok, Property};

pub fn all() -> Vec<Property> {
    vec![
        ("free-fermion quench matches dense evolution", free_fermion_matches_dense),
        ("dense evolution conserves the norm", dense_evolution_conserves_norm),
    ]
}

pub fn free_fermion_matches_dense(cases: u32) -> Result<(), String> {
    check(cases, (0.2..2.0f64, 0usize..11), |(g, k)| {
        let t = 0.1 * k as f64;
        let model = ModelSpec::ising(g, 0.0, Evolution::Real);
        let dense = ok(ed_evolve_expectation(&model, 14, t, &Propagator::Exact { dt: 0.1 }, Pauli::X, &plus_state()))?;
        let exact = ok(tfim_quench_sigma_x(g, t))?;
        prop_assert!((dense.re - exact).abs() <= 1e-7, "dense {dense} vs free fermion {exact} at t = {t}");
        Ok(())
    })
}

pub fn dense_evolution_conserves_norm(cases: u32) -> Result<(), String> {
    let s = (-2.0..2.0f64, -1.0..1.0f64, -2.0..2.0f64, 4usize..11, 0.01..0.2f64, 1usize..30, any::<bool>());
    check(cases, s, |(g, h, g0, n, delta, steps, trotter)| {
        let model = ModelSpec::ising(g, h, Evolution::Real).with_impurity(g0);
        let chain = Chain::centered(model, n);
        let psi = ok(DenseState::uniform_product(&plus_state(), n))?;
        let out = if trotter {
            let plan = ok(TrotterPlan::new(model, delta, Splitting::FieldZz))?;
            ok(chain.evolve_trotter(&psi, &plan, steps))?
        } else {
            ok(chain.evolve_exact(&psi, delta * steps as f64))?
        };
        prop_assert!((out.norm_sqr() - 1.0).abs() <= 1e-10, "norm² {}", out.norm_sqr());
        Ok(())
    })
}
