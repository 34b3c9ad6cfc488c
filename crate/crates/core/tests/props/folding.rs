use num_complex::Complex64 as C64;
use proptest::prelude::*;
use transfold::mps::Mps;
use transfold::folding::unfold_vector;
use transfold::tensor::{singular_values, Tensor};
use transfold::transverse::{environment, expectation, EigenOptions, Network};
use transfold::trotter::{Evolution, ModelSpec, Schedule, Splitting, TrotterPlan};

use super::{check, ok, Property};

pub fn all() -> Vec<Property> {
    vec![
        ("folded and unfolded columns agree", fold_unfold_equivalence),
        ("folded interior extents are d squared", folded_extent_is_d_squared),
        ("folding disentangles a free excitation", folded_entropy_is_bounded),
    ]
}

fn exact() -> EigenOptions {
    EigenOptions { max_bond: 1 << 12, tol: 1e-14, rel_cutoff: 0.0, max_iters: 2000, ..Default::default() }
}

fn plan(g: f64, h: f64, delta: f64) -> Result<TrotterPlan, TestCaseError> {
    ok(TrotterPlan::new(ModelSpec::ising(g, h, Evolution::Real), delta, Splitting::FieldZz))
}

fn unit(re0: f64, im0: f64, re1: f64, im1: f64) -> Vec<C64> {
    let v = [C64::new(re0, im0), C64::new(re1, im1)];
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter().map(|z| z / n).collect()
}

fn state() -> impl Strategy<Value = Vec<C64>> {
    (0.2..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b, c, d)| unit(a, b, c, d))
}

pub fn fold_unfold_equivalence(cases: u32) -> Result<(), String> {
    let op = (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64);
    let s = (0.3..1.5f64, 0.0..0.8f64, 0.02..0.2f64, 1usize..5, state(), op);
    check(cases, s, |(g, h, delta, n, initial, (a, b, c, d))| {
        let p = plan(g, h, delta)?;
        let o = ok(Tensor::matrix(2, 2, vec![C64::new(a, 0.0), C64::new(b, c), C64::new(b, -c), C64::new(d, 0.0)]))?;
        let opts = exact();
        let mut values = Vec::new();
        for folded in [false, true] {
            let net = ok(Network::new(Schedule::uniform(p.clone(), n), initial.clone(), folded))?;
            let env = ok(environment(&net, &opts, None))?;
            values.push(ok(expectation(&env, &net, &o, 0, &opts))?.value);
        }
        let gap = (values[0] - values[1]).norm();
        prop_assert!(gap <= 1e-10, "folded {} vs unfolded {}", values[1], values[0]);
        Ok(())
    })
}

pub fn folded_extent_is_d_squared(cases: u32) -> Result<(), String> {
    check(cases, (0.3..1.5f64, 0.0..0.8f64, 0.02..0.2f64, 1usize..12, state()), |(g, h, delta, n, initial)| {
        let net = ok(Network::new(Schedule::uniform(plan(g, h, delta)?, n), initial, true))?;
        let col = ok(net.column(0, &[]))?;
        prop_assert_eq!(col.len(), n + 1);
        for k in 1..col.len() - 1 {
            prop_assert_eq!(col.in_dims()[k], 4);
            prop_assert_eq!(col.out_dims()[k], 4);
        }
        Ok(())
    })
}

fn entropy(s: &[f64]) -> f64 {
    let total: f64 = s.iter().map(|x| x * x).sum();
    s.iter().map(|x| x * x / total).filter(|&p| p > 1e-300).map(|p| -p * p.ln()).sum()
}

fn pair(v: &[C64]) -> Result<Vec<C64>, TestCaseError> {
    let t = ok(Tensor::new(vec![4], v.to_vec()))?;
    Ok(t.scaled(C64::new(1.0 / t.norm(), 0.0)).into_data())
}

/// A freely propagating excitation links one time step to its mirror
/// partner; every other time site is a product. Folding pairs exactly those
/// two sites, so the folded vector is a product while the unfolded one is
/// entangled across every cut between them.
pub fn folded_entropy_is_bounded(cases: u32) -> Result<(), String> {
    let amp = || (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| C64::new(a, b));
    let local = prop::collection::vec(amp(), 2);
    let s = (1usize..6, any::<prop::sample::Index>(), prop::collection::vec(amp(), 4), prop::collection::vec((local.clone(), local), 6));
    check(cases, s, |(n, at, excitation, products)| {
        let k = at.index(n + 1);
        let mut sites = Vec::with_capacity(n + 1);
        for (j, (ket, bra)) in products.iter().enumerate().take(n + 1) {
            let v = if j == k {
                pair(&excitation)?
            } else {
                pair(&[ket[0] * bra[0], ket[0] * bra[1], ket[1] * bra[0], ket[1] * bra[1]])?
            };
            sites.push(v);
        }
        let folded = ok(Mps::product(&sites))?;
        let unfolded = ok(unfold_vector(&folded))?;
        let height = 2 * (n + 1);
        let linked = ok(singular_values(&ok(Tensor::new(vec![2, 2], sites[k].clone()))?, &[0]))?;
        for cut in 0..height - 1 {
            let rows = 1usize << (cut + 1);
            let m = ok(unfolded.reshaped(&[rows, unfolded.len() / rows]))?;
            let s_unfolded = entropy(&ok(singular_values(&m, &[0]))?);
            let spans = cut >= k && cut < height - 1 - k;
            let expected = if spans { entropy(&linked) } else { 0.0 };
            prop_assert!((s_unfolded - expected).abs() <= 1e-10, "unfolded cut {cut}: {s_unfolded} vs {expected}");
            if cut < n {
                let s_folded = ok(folded.entanglement_entropy(cut))?;
                prop_assert!(s_folded <= 1e-10, "folded cut {cut} carries {s_folded}");
                prop_assert!(s_folded <= s_unfolded + 1e-10);
            }
        }
        Ok(())
    })
}
