use proptest::prelude::*;
use transfold::itebd::{Bond, Itebd, ItebdOptions, UniformState};
use transfold::trotter::{plus_state, Evolution, ModelSpec, Splitting, TrotterPlan};

use super::{check, ok, Property};

pub fn all() -> Vec<Property> {
    vec![
        ("itebd norm drift is bounded by truncation", norm_drift_is_bounded),
        ("imaginary-time energy decreases across stages", energy_decreases_across_stages),
    ]
}

pub fn norm_drift_is_bounded(cases: u32) -> Result<(), String> {
    let s = (0.3..1.5f64, 0.0..0.8f64, 0.02..0.1f64, 1usize..40, 2usize..10);
    check(cases, s, |(g, h, delta, n, bond)| {
        let plan = ok(TrotterPlan::new(ModelSpec::ising(g, h, Evolution::Real), delta, Splitting::FieldZz))?;
        let mut run = Itebd::new(ok(UniformState::product(&plus_state()))?, ItebdOptions { max_bond: bond, ..Default::default() });
        ok(run.run(&plan, n))?;
        for b in [Bond::AB, Bond::BA] {
            let drift = (ok(run.state.cell_norm_sqr(b))? - 1.0).abs();
            prop_assert!(drift <= 10.0 * run.trunc_error + 1e-12, "drift {drift:e}, truncation {:e}", run.trunc_error);
        }
        Ok(())
    })
}

pub fn energy_decreases_across_stages(cases: u32) -> Result<(), String> {
    let s = (0.3..1.5f64, 0.0..0.8f64, 2usize..12, 5usize..30);
    check(cases, s, |(g, h, bond, steps)| {
        let model = ModelSpec::ising(g, h, Evolution::Imaginary);
        let mut run = Itebd::new(ok(UniformState::product(&plus_state()))?, ItebdOptions { max_bond: bond, ..Default::default() });
        let mut last = f64::INFINITY;
        for delta in [0.2, 0.1, 0.05, 0.02] {
            let plan = ok(TrotterPlan::new(model, delta, Splitting::FieldZz))?;
            ok(run.run(&plan, steps))?;
            let e = ok(run.state.energy_per_site(&plan))?;
            prop_assert!(e <= last + 1e-10, "energy rose from {last} to {e} at delta {delta}");
            last = e;
        }
        Ok(())
    })
}
