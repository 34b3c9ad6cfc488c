use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use transfold::tensor::{contract, svd_truncate, Tensor};

use super::{check, ok, Property};

pub fn all() -> Vec<Property> {
    vec![
        ("tensor contraction is bilinear", contraction_is_bilinear),
        ("full-rank svd reconstructs", full_svd_reconstructs),
        ("norm survives permute and reshape", norm_is_layout_invariant),
        ("svd factors are ordered isometries", svd_factors_are_isometries),
    ]
}

fn shape() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..5, 2..5)
}

fn random(shape: &[usize], seed: u64) -> Tensor {
    Tensor::random(shape, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn contraction_is_bilinear(cases: u32) -> Result<(), String> {
    let s = (shape(), prop::collection::vec(1usize..5, 0..3), any::<u64>(), -2.0..2.0f64, -2.0..2.0f64);
    check(cases, s, |(shared, free_b, seed, re, im)| {
        let alpha = C64::new(re, im);
        let mut a_shape = vec![2];
        a_shape.extend(&shared);
        let mut b_shape = shared.clone();
        b_shape.extend(&free_b);
        let a = random(&a_shape, seed);
        let a2 = random(&a_shape, seed ^ 1);
        let b = random(&b_shape, seed ^ 2);
        let axes_a: Vec<usize> = (1..=shared.len()).collect();
        let axes_b: Vec<usize> = (0..shared.len()).collect();
        let base = ok(contract(&a, &axes_a, &b, &axes_b))?;
        let scaled = ok(contract(&a.scaled(alpha), &axes_a, &b, &axes_b))?;
        let d = ok(scaled.distance(&base.scaled(alpha)))?;
        prop_assert!(d <= 1e-12 * (1.0 + scaled.norm()), "homogeneity off by {d:e}");
        let sum = ok(a.add_scaled(&a2, alpha))?;
        let lhs = ok(contract(&sum, &axes_a, &b, &axes_b))?;
        let rhs = ok(base.add_scaled(&ok(contract(&a2, &axes_a, &b, &axes_b))?, alpha))?;
        let d = ok(lhs.distance(&rhs))?;
        prop_assert!(d <= 1e-12 * (1.0 + lhs.norm()), "additivity off by {d:e}");
        prop_assert!(lhs.is_finite());
        Ok(())
    })
}

pub fn full_svd_reconstructs(cases: u32) -> Result<(), String> {
    check(cases, (shape(), any::<u64>(), any::<prop::sample::Index>()), |(shape, seed, split)| {
        let t = random(&shape, seed);
        let k = split.index(shape.len());
        let rows: Vec<usize> = (0..k.max(1)).collect();
        let svd = ok(svd_truncate(&t, &rows, usize::MAX, 0.0))?;
        let back = ok(svd.reconstruct())?;
        let d = ok(back.distance(&t))? / t.norm();
        prop_assert!(d <= 1e-10, "relative reconstruction error {d:e}");
        Ok(())
    })
}

pub fn norm_is_layout_invariant(cases: u32) -> Result<(), String> {
    check(cases, (shape(), any::<u64>(), any::<prop::sample::Index>()), |(shape, seed, pick)| {
        let t = random(&shape, seed);
        let mut order: Vec<usize> = (0..shape.len()).collect();
        // a rotation by a random amount, then a swap of the first two axes
        order.rotate_left(pick.index(shape.len()));
        if order.len() > 1 {
            order.swap(0, 1);
        }
        let p = ok(t.permute(&order))?;
        let flat = ok(p.reshaped(&[p.len()]))?;
        let n = t.norm();
        prop_assert!((p.norm() - n).abs() <= 1e-12 * n);
        prop_assert!((flat.norm() - n).abs() <= 1e-12 * n);
        Ok(())
    })
}

pub fn svd_factors_are_isometries(cases: u32) -> Result<(), String> {
    check(cases, (shape(), any::<u64>(), 1usize..6), |(shape, seed, max_rank)| {
        let t = random(&shape, seed);
        let svd = ok(svd_truncate(&t, &[0], max_rank, 1e-12))?;
        prop_assert!(svd.s.windows(2).all(|w| w[0] >= w[1]), "unsorted {:?}", svd.s);
        prop_assert!(svd.s.iter().all(|&s| s >= 0.0));
        prop_assert!(svd.discarded_weight >= 0.0);
        let k = svd.s.len();
        let r = svd.u.rank();
        let uu = ok(contract(&svd.u.conj(), &(0..r - 1).collect::<Vec<_>>(), &svd.u, &(0..r - 1).collect::<Vec<_>>()))?;
        let c = svd.vdag.rank();
        let vv = ok(contract(&svd.vdag, &(1..c).collect::<Vec<_>>(), &svd.vdag.conj(), &(1..c).collect::<Vec<_>>()))?;
        prop_assert!(ok(uu.distance(&Tensor::eye(k)))? <= 1e-10);
        prop_assert!(ok(vv.distance(&Tensor::eye(k)))? <= 1e-10);
        prop_assert!(svd.u.is_finite() && svd.vdag.is_finite());
        // kept plus discarded weight is the full weight
        let kept: f64 = svd.s.iter().map(|s| s * s).sum();
        prop_assert!((kept + svd.discarded_weight - t.norm_sqr()).abs() <= 1e-10 * t.norm_sqr());
        Ok(())
    })
}
