//! Folding of transfer columns about the operator insertion.
//!
//! An unfolded column of height `2n+2` stacks the ket layers (initial state,
//! steps `1..n`) below the bra layers (steps `n..1`, initial state). Folding
//! pairs site `k` with site `2n+1−k`, so each folded site holds one time step
//! together with its conjugate. Combined indices are ket-major: the pair
//! `(a, ā)` maps to `a·dim(ā) + ā`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::mps::{Mpo, Mps};
use crate::tensor::{contract, Tensor};

/// Regroups an unfolded column into a folded one of half the height.
pub fn fold_column(column: &Mpo) -> Result<Mpo> {
    let len = column.len();
    if !len.is_multiple_of(2) || len < 2 {
        return Err(Error::AsymmetricColumn(len));
    }
    let half = len / 2;
    let sites = column.sites();
    let mut folded = Vec::with_capacity(half);
    for k in 0..half {
        let ket = &sites[k];
        let bra = &sites[len - 1 - k];
        if k + 1 < half {
            // [a, l, r, b] x [d', l', r', u'] -> [(a u'), (l l'), (r r'), (b d')]
            let t = contract(ket, &[], bra, &[])?.permute(&[0, 7, 1, 5, 2, 6, 3, 4])?;
            let s = t.shape().to_vec();
            folded.push(t.reshape(&[s[0] * s[1], s[2] * s[3], s[4] * s[5], s[6] * s[7]])?);
        } else {
            // the fold: the ket's upper bond meets the bra's lower bond
            let t = contract(ket, &[3], bra, &[0])?.permute(&[0, 5, 1, 3, 2, 4])?;
            let s = t.shape().to_vec();
            folded.push(t.reshape(&[s[0] * s[1], s[2] * s[3], s[4] * s[5], 1])?);
        }
    }
    Mpo::new(folded)
}

/// Product of normalized identity pairs `Σ_a |a ā⟩/√χ` on every folded site,
/// the transverse image of the maximally entangled closure.
pub fn identity_pairs(phys: &[usize]) -> Result<Mps> {
    let vectors: Vec<Vec<C64>> = phys
        .iter()
        .map(|&d| {
            let chi = (d as f64).sqrt().round() as usize;
            if chi * chi != d {
                return Err(Error::Dimension(format!("folded extent {d} is not a square")));
            }
            let w = 1.0 / (chi as f64).sqrt();
            Ok((0..d).map(|i| if i / chi == i % chi { C64::new(w, 0.0) } else { C64::new(0.0, 0.0) }).collect())
        })
        .collect::<Result<_>>()?;
    Mps::product(&vectors)
}

/// Extends a folded transverse vector to a taller column by appending
/// identity pairs on the new sites next to the fold. A good starting point
/// for the eigenvector at a later time.
pub fn extend_with_identity_pairs(v: &Mps, phys: &[usize]) -> Result<Mps> {
    let n = v.len();
    if phys.len() < n || phys[..n] != v.phys_dims()[..] {
        return Err(Error::Dimension("extension must keep the existing sites".into()));
    }
    let mut sites = v.sites().to_vec();
    if n < phys.len() {
        sites.extend(identity_pairs(&phys[n..])?.into_sites());
    }
    Ok(Mps::new(sites)?.with_log_norm(v.log_norm()))
}

/// Maps a folded transverse vector back to the unfolded layout, pairing
/// site `k` with site `2n+1−k`. Only intended for small instances.
pub fn unfold_vector(folded: &Mps) -> Result<Tensor> {
    let n = folded.len();
    let dense = folded.to_dense()?;
    let mut dims = Vec::with_capacity(2 * n);
    for &d in &folded.phys_dims() {
        let chi = (d as f64).sqrt().round() as usize;
        dims.push(chi);
        dims.push(chi);
    }
    // axes (k0, k0', k1, k1', ...) -> (k0, k1, ..., k1', k0')
    let t = dense.reshape(&dims)?;
    let mut order: Vec<usize> = (0..n).map(|k| 2 * k).collect();
    order.extend((0..n).rev().map(|k| 2 * k + 1));
    let total: usize = dims.iter().product();
    t.permute(&order)?.reshape(&[total])
}
