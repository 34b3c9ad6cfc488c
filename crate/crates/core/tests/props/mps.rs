use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use transfold::mps::{apply_mpo, compress, fit, inner, Mpo, Mps};
use transfold::tensor::{contract, Tensor};

use super::{check, ok, Property};

pub fn all() -> Vec<Property> {
    vec![
        ("compression is norm-contractive", compression_is_norm_contractive),
        ("mpo application matches dense", application_matches_dense),
        ("variational sweeps never lose overlap", sweeps_are_monotone),
        ("canonical form keeps the state", canonical_form_keeps_state),
    ]
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn compression_is_norm_contractive(cases: u32) -> Result<(), String> {
    check(cases, (2usize..7, 1usize..6, 1usize..5, 0usize..3, any::<u64>()), |(n, bond, keep, sweeps, seed)| {
        let psi = ok(Mps::random(&vec![2; n], bond, &mut rng(seed)))?;
        let psi = ok(psi.normalized(0))?.with_log_norm(0.0);
        let (out, err) = ok(compress(&psi, keep, 0.0, sweeps))?;
        let norm = ok(out.norm())?;
        prop_assert!((1.0 - norm).abs() <= err + 1e-10, "norm {norm}, reported {err:e}");
        prop_assert!(out.max_bond() <= keep);
        Ok(())
    })
}

pub fn application_matches_dense(cases: u32) -> Result<(), String> {
    check(cases, (1usize..6, 1usize..4, 1usize..4, any::<u64>()), |(n, bond, op_bond, seed)| {
        let mut r = rng(seed);
        let psi = ok(Mps::random(&vec![2; n], bond, &mut r))?;
        let op = ok(Mpo::random(&vec![2; n], op_bond, &mut r))?;
        let applied = ok(apply_mpo(&op, &psi))?;
        let (out, _) = ok(compress(&applied, usize::MAX, 0.0, 0))?;
        let dense_op = ok(op.to_dense())?;
        let dense_psi = ok(psi.to_dense())?;
        let expected = ok(contract(&dense_op, &[1], &dense_psi, &[0]))?;
        let got = ok(out.to_dense())?;
        let d = ok(got.distance(&expected))? / expected.norm();
        prop_assert!(d <= 1e-10, "relative deviation {d:e}");
        Ok(())
    })
}

pub fn sweeps_are_monotone(cases: u32) -> Result<(), String> {
    check(cases, (2usize..7, 1usize..4, 1usize..3, 1usize..4, any::<u64>()), |(n, bond, op_bond, guess_bond, seed)| {
        let mut r = rng(seed);
        let x = ok(Mps::random(&vec![2; n], bond, &mut r))?;
        let op = ok(Mpo::random(&vec![2; n], op_bond, &mut r))?;
        let guess = ok(Mps::random(&vec![2; n], guess_bond, &mut r))?;
        let outcome = ok(fit(&op, &x, &guess, 3))?;
        let top = outcome.overlap().max(1e-300);
        for w in outcome.overlaps.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12 * top, "overlap fell from {} to {}", w[0], w[1]);
        }
        Ok(())
    })
}

pub fn canonical_form_keeps_state(cases: u32) -> Result<(), String> {
    check(cases, (2usize..7, 1usize..5, any::<prop::sample::Index>(), any::<u64>()), |(n, bond, c, seed)| {
        let psi = ok(Mps::random(&vec![2; n], bond, &mut rng(seed)))?;
        let center = c.index(n);
        let can = ok(psi.canonicalize(center))?;
        let nn = ok(inner(&psi, &psi))?;
        let overlap = ok(inner(&psi, &can))?;
        prop_assert!((overlap - nn).norm() <= 1e-12 * nn.norm(), "overlap {overlap} vs {nn}");
        for (i, s) in can.sites().iter().enumerate() {
            let k = s.shape();
            let gram = if i < center {
                ok(contract(&s.conj(), &[0, 1], s, &[0, 1]))?.add_scaled(&Tensor::eye(k[2]), C64::new(-1.0, 0.0))
            } else if i > center {
                ok(contract(s, &[1, 2], &s.conj(), &[1, 2]))?.add_scaled(&Tensor::eye(k[0]), C64::new(-1.0, 0.0))
            } else {
                continue;
            };
            prop_assert!(ok(gram)?.norm() <= 1e-10, "site {i} is not an isometry");
        }
        Ok(())
    })
}
