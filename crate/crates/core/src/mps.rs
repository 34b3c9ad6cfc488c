//! Open-boundary matrix product states and operators.
//!
//! MPS tensors carry axes `(left, physical, right)`, MPO tensors
//! `(left, out, in, right)`. Boundary bonds have extent 1.
//!
//! A state stores an out-of-band scale: the represented vector is
//! `exp(log_norm)` times the contraction of its tensors. Compression and
//! fitting return unit-norm tensors and move the norm into `log_norm`, which
//! keeps repeated applications of large operators free of overflow.

use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{contract, lq, qr, svd_truncate, Tensor};

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

#[derive(Clone, Debug)]
pub struct Mps {
    sites: Vec<Tensor>,
    center: Option<usize>,
    log_norm: f64,
}

impl Mps {
    pub fn new(sites: Vec<Tensor>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Dimension("an MPS needs at least one site".into()));
        }
        for (i, s) in sites.iter().enumerate() {
            if s.rank() != 3 {
                return Err(Error::Dimension(format!("site {i} has rank {}, expected 3", s.rank())));
            }
        }
        if sites[0].shape()[0] != 1 || sites[sites.len() - 1].shape()[2] != 1 {
            return Err(Error::Dimension("boundary bonds must have extent 1".into()));
        }
        for i in 1..sites.len() {
            if sites[i - 1].shape()[2] != sites[i].shape()[0] {
                return Err(Error::Dimension(format!(
                    "bond between sites {} and {i} has extents {} and {}",
                    i - 1,
                    sites[i - 1].shape()[2],
                    sites[i].shape()[0]
                )));
            }
        }
        Ok(Self { sites, center: None, log_norm: 0.0 })
    }

    /// Product state from one local vector per site.
    pub fn product(vectors: &[Vec<C64>]) -> Result<Self> {
        let sites = vectors
            .iter()
            .map(|v| Tensor::new(vec![1, v.len(), 1], v.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(sites)
    }

    /// Random state with the given physical extents and bonds capped at `bond`.
    pub fn random(phys: &[usize], bond: usize, rng: &mut impl Rng) -> Result<Self> {
        let n = phys.len();
        let dims = capped_bonds(phys, bond);
        let sites = (0..n).map(|i| Tensor::random(&[dims[i], phys[i], dims[i + 1]], rng)).collect();
        Self::new(sites)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Tensor] {
        &self.sites
    }

    pub fn site(&self, i: usize) -> &Tensor {
        &self.sites[i]
    }

    pub fn into_sites(self) -> Vec<Tensor> {
        self.sites
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    pub fn with_log_norm(mut self, log_norm: f64) -> Self {
        self.log_norm = log_norm;
        self
    }

    pub fn phys_dims(&self) -> Vec<usize> {
        self.sites.iter().map(|s| s.shape()[1]).collect()
    }

    /// Bond extents including both boundary bonds.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.sites.iter().map(|s| s.shape()[0]).collect();
        d.push(1);
        d
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Full state vector; only sensible for a handful of sites.
    pub fn to_dense(&self) -> Result<Tensor> {
        let mut acc = self.sites[0].clone();
        for s in &self.sites[1..] {
            let r = acc.rank();
            acc = contract(&acc, &[r - 1], s, &[0])?;
        }
        let n: usize = self.phys_dims().iter().product();
        let mut v = acc.reshape(&[n])?;
        v.scale(C64::new(self.log_norm.exp(), 0.0));
        Ok(v)
    }

    pub fn conj(&self) -> Self {
        Self { sites: self.sites.iter().map(Tensor::conj).collect(), center: self.center, log_norm: self.log_norm }
    }

    /// QR-based mixed canonical form with orthogonality center at `center`.
    /// The represented vector is unchanged.
    pub fn canonicalize(&self, center: usize) -> Result<Self> {
        let n = self.len();
        if center >= n {
            return Err(Error::InvalidParameter(format!("center {center} outside chain of {n} sites")));
        }
        let mut sites = self.sites.clone();
        for i in 0..center {
            let (q, r) = qr(&sites[i], &[0, 1])?;
            sites[i] = q;
            sites[i + 1] = contract(&r, &[1], &sites[i + 1], &[0])?;
        }
        for i in (center + 1..n).rev() {
            let (l, q) = lq(&sites[i], &[0])?;
            sites[i] = q;
            sites[i - 1] = contract(&sites[i - 1], &[2], &l, &[0])?;
        }
        Ok(Self { sites, center: Some(center), log_norm: self.log_norm })
    }

    /// Canonical form at `center` with the norm moved into `log_norm`.
    pub fn normalized(&self, center: usize) -> Result<Self> {
        let mut out = self.canonicalize(center)?;
        let nrm = out.sites[center].norm();
        if !(nrm > 0.0) || !nrm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        out.sites[center].scale(C64::new(1.0 / nrm, 0.0));
        out.log_norm += nrm.ln();
        Ok(out)
    }

    /// Euclidean norm of the represented vector.
    pub fn norm(&self) -> Result<f64> {
        Ok(inner(self, self)?.re.max(0.0).sqrt())
    }

    /// Pads every bond up to `min(max_bond, attainable)` with entries of size
    /// `noise`; used to give a variational fit room to grow.
    pub fn expanded(&self, max_bond: usize, noise: f64, rng: &mut impl Rng) -> Result<Self> {
        let phys = self.phys_dims();
        let cap = capped_bonds(&phys, max_bond);
        let old = self.bond_dims();
        let target: Vec<usize> = old.iter().zip(&cap).map(|(&o, &c)| o.max(c)).collect();
        let sites = self
            .sites
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let (l0, d, r0) = (old[i], phys[i], old[i + 1]);
                Tensor::from_fn(&[target[i], d, target[i + 1]], |idx| {
                    if idx[0] < l0 && idx[2] < r0 {
                        s.get(idx)
                    } else {
                        C64::new(rng.gen_range(-noise..noise), rng.gen_range(-noise..noise))
                    }
                })
            })
            .collect();
        Ok(Self { sites, center: None, log_norm: self.log_norm })
    }

    /// Whether some bond is below the largest extent allowed by `max_bond`
    /// and the physical dimensions.
    pub fn can_grow(&self, max_bond: usize) -> bool {
        let cap = capped_bonds(&self.phys_dims(), max_bond);
        self.bond_dims().iter().zip(&cap).any(|(b, c)| b < c)
    }

    /// Multiplies the represented vector by `factor` (absorbed into site 0).
    pub fn scale(&mut self, factor: C64) {
        let nrm = factor.norm();
        if nrm > 0.0 {
            self.sites[0].scale(factor / nrm);
            self.log_norm += nrm.ln();
        } else {
            self.sites[0].scale(factor);
        }
    }

    /// Von Neumann entropy of the Schmidt spectrum across the bond right of `site`.
    pub fn entanglement_entropy(&self, site: usize) -> Result<f64> {
        if site + 1 >= self.len() {
            return Err(Error::InvalidParameter(format!("no bond to the right of site {site}")));
        }
        let c = self.canonicalize(site)?;
        let svd = svd_truncate(&c.sites[site], &[0, 1], usize::MAX, 0.0)?;
        let total: f64 = svd.s.iter().map(|s| s * s).sum();
        Ok(svd
            .s
            .iter()
            .map(|s| s * s / total)
            .filter(|&p| p > 0.0)
            .map(|p| -p * p.ln())
            .sum())
    }
}

/// Largest bond extents compatible with the physical extents, capped at `bond`.
fn capped_bonds(phys: &[usize], bond: usize) -> Vec<usize> {
    let n = phys.len();
    let mut dims = vec![1usize; n + 1];
    for i in 1..n {
        let left: usize = phys[..i].iter().try_fold(1usize, |a, &d| a.checked_mul(d)).unwrap_or(usize::MAX);
        let right: usize = phys[i..].iter().try_fold(1usize, |a, &d| a.checked_mul(d)).unwrap_or(usize::MAX);
        dims[i] = bond.min(left).min(right);
    }
    dims
}

#[derive(Clone, Debug)]
pub struct Mpo {
    sites: Vec<Tensor>,
}

impl Mpo {
    pub fn new(sites: Vec<Tensor>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Dimension("an MPO needs at least one site".into()));
        }
        for (i, s) in sites.iter().enumerate() {
            if s.rank() != 4 {
                return Err(Error::Dimension(format!("site {i} has rank {}, expected 4", s.rank())));
            }
        }
        if sites[0].shape()[0] != 1 || sites[sites.len() - 1].shape()[3] != 1 {
            return Err(Error::Dimension("boundary bonds must have extent 1".into()));
        }
        for i in 1..sites.len() {
            if sites[i - 1].shape()[3] != sites[i].shape()[0] {
                return Err(Error::Dimension(format!("MPO bond mismatch between sites {} and {i}", i - 1)));
            }
        }
        Ok(Self { sites })
    }

    pub fn identity(phys: &[usize]) -> Self {
        let sites = phys
            .iter()
            .map(|&d| Tensor::eye(d).reshape(&[1, d, d, 1]).expect("identity reshape"))
            .collect();
        Self { sites }
    }

    /// Product operator from one local matrix `(out, in)` per site.
    pub fn product(ops: &[Tensor]) -> Result<Self> {
        let sites = ops
            .iter()
            .map(|o| {
                if o.rank() != 2 {
                    return Err(Error::Dimension("local operators must be matrices".into()));
                }
                let (a, b) = (o.shape()[0], o.shape()[1]);
                o.reshaped(&[1, a, b, 1])
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sites)
    }

    pub fn random(phys: &[usize], bond: usize, rng: &mut impl Rng) -> Result<Self> {
        let n = phys.len();
        let sites = (0..n)
            .map(|i| {
                let l = if i == 0 { 1 } else { bond };
                let r = if i == n - 1 { 1 } else { bond };
                Tensor::random(&[l, phys[i], phys[i], r], rng)
            })
            .collect();
        Self::new(sites)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Tensor] {
        &self.sites
    }

    pub fn in_dims(&self) -> Vec<usize> {
        self.sites.iter().map(|s| s.shape()[2]).collect()
    }

    pub fn out_dims(&self) -> Vec<usize> {
        self.sites.iter().map(|s| s.shape()[1]).collect()
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.sites.iter().map(|s| s.shape()[0]).collect();
        d.push(1);
        d
    }

    /// Exchanges the out and in legs of every tensor.
    pub fn transpose(&self) -> Self {
        Self { sites: self.sites.iter().map(|s| s.permute(&[0, 2, 1, 3]).expect("rank 4")).collect() }
    }

    /// Dense `(out, in)` matrix; only sensible for a handful of sites.
    pub fn to_dense(&self) -> Result<Tensor> {
        let mut acc = self.sites[0].clone();
        for s in &self.sites[1..] {
            let r = acc.rank();
            acc = contract(&acc, &[r - 1], s, &[0])?;
        }
        let n = self.len();
        // axes: 0, (out_k, in_k) for each k, last
        let mut order: Vec<usize> = (0..n).map(|k| 1 + 2 * k).collect();
        order.extend((0..n).map(|k| 2 + 2 * k));
        let inner = acc.shape()[1..acc.rank() - 1].to_vec();
        let squeezed = acc.reshape(&inner)?;
        let out: usize = self.out_dims().iter().product();
        let inp: usize = self.in_dims().iter().product();
        let order: Vec<usize> = order.into_iter().map(|a| a - 1).collect();
        squeezed.permute(&order)?.reshape(&[out, inp])
    }
}

/// Exact MPO application; bond extents multiply.
pub fn apply_mpo(op: &Mpo, psi: &Mps) -> Result<Mps> {
    if op.len() != psi.len() {
        return Err(Error::Dimension(format!("MPO has {} sites, MPS has {}", op.len(), psi.len())));
    }
    let mut sites = Vec::with_capacity(psi.len());
    for (w, a) in op.sites.iter().zip(&psi.sites) {
        if w.shape()[2] != a.shape()[1] {
            return Err(Error::Dimension("MPO input extent differs from MPS physical extent".into()));
        }
        // [wl, out, wr, al, ar] -> [wl, al, out, wr, ar]
        let t = contract(w, &[2], a, &[1])?.permute(&[0, 3, 1, 2, 4])?;
        let s = t.shape().to_vec();
        sites.push(t.reshape(&[s[0] * s[1], s[2], s[3] * s[4]])?);
    }
    Ok(Mps { sites, center: None, log_norm: psi.log_norm })
}

fn check_pair(a: &Mps, b: &Mps) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("chains of length {} and {}", a.len(), b.len())));
    }
    if a.phys_dims() != b.phys_dims() {
        return Err(Error::Dimension("physical extents differ".into()));
    }
    Ok(())
}

/// Bilinear contraction `Σ a(s) b(s)` without complex conjugation.
pub fn dot(a: &Mps, b: &Mps) -> Result<C64> {
    check_pair(a, b)?;
    let mut env = Tensor::new(vec![1, 1], vec![one()])?;
    for (x, y) in a.sites.iter().zip(&b.sites) {
        let t = contract(&env, &[0], x, &[0])?; // [bl, s, ar]
        env = contract(&t, &[0, 1], y, &[0, 1])?; // [ar, br]
    }
    Ok(env.data()[0] * (a.log_norm + b.log_norm).exp())
}

/// `⟨bra|ket⟩` with the bra conjugated.
pub fn inner(bra: &Mps, ket: &Mps) -> Result<C64> {
    dot(&bra.conj(), ket)
}

/// Bilinear `Σ a(s) W(s, s') b(s')`.
pub fn sandwich(a: &Mps, op: &Mpo, b: &Mps) -> Result<C64> {
    if op.len() != a.len() || op.len() != b.len() {
        return Err(Error::Dimension("sandwich lengths differ".into()));
    }
    let mut env = Tensor::new(vec![1, 1, 1], vec![one()])?;
    for ((x, w), y) in a.sites.iter().zip(&op.sites).zip(&b.sites) {
        if x.shape()[1] != w.shape()[1] || y.shape()[1] != w.shape()[2] {
            return Err(Error::Dimension("sandwich physical extents differ".into()));
        }
        env = env_step_left(&env, x, w, y)?;
    }
    Ok(env.data()[0] * (a.log_norm + b.log_norm).exp())
}

/// `env[al, wl, bl]` through one site, giving `[ar, wr, br]`.
fn env_step_left(env: &Tensor, a: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let t1 = contract(env, &[2], b, &[0])?; // [al, wl, t, br]
    let t2 = contract(&t1, &[1, 2], w, &[0, 2])?; // [al, br, s, wr]
    let t3 = contract(a, &[0, 1], &t2, &[0, 2])?; // [ar, br, wr]
    t3.permute(&[0, 2, 1])
}

/// `env[ar, wr, br]` through one site, giving `[al, wl, bl]`.
fn env_step_right(env: &Tensor, a: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let u1 = contract(b, &[2], env, &[2])?; // [bl, t, ar, wr]
    let u2 = contract(&u1, &[1, 3], w, &[2, 3])?; // [bl, ar, wl, s]
    let u3 = contract(a, &[1, 2], &u2, &[3, 1])?; // [al, bl, wl]
    u3.permute(&[0, 2, 1])
}

/// Local projection of `W·x` onto the environment of one site: `[yl, s, yr]`.
fn local_target(left: &Tensor, x: &Tensor, w: &Tensor, right: &Tensor) -> Result<Tensor> {
    let t1 = contract(left, &[2], x, &[0])?; // [yl, wl, t, xr]
    let t2 = contract(&t1, &[1, 2], w, &[0, 2])?; // [yl, xr, s, wr]
    contract(&t2, &[1, 3], right, &[2, 1]) // [yl, s, yr]
}

/// `‖W x‖²`, contracted exactly.
pub fn applied_norm_sqr(op: &Mpo, x: &Mps) -> Result<f64> {
    if op.len() != x.len() || op.in_dims() != x.phys_dims() {
        return Err(Error::Dimension("operator and state do not match".into()));
    }
    // env[xc, wc, w, x]
    let mut env = Tensor::new(vec![1, 1, 1, 1], vec![one()])?;
    for (w, a) in op.sites.iter().zip(&x.sites) {
        let t1 = contract(&env, &[3], a, &[0])?; // [xc, wc, w, t, xr]
        let t2 = contract(&t1, &[2, 3], w, &[0, 2])?; // [xc, wc, xr, s, wr]
        let t3 = contract(&t2, &[1, 3], &w.conj(), &[0, 1])?; // [xc, xr, wr, tc, wcr]
        let t4 = contract(&t3, &[0, 3], &a.conj(), &[0, 1])?; // [xr, wr, wcr, xcr]
        env = t4.permute(&[3, 2, 1, 0])?;
    }
    Ok(env.data()[0].re * (2.0 * x.log_norm).exp())
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    /// Unit-norm approximation `ŷ`, canonical at site 0, carrying the input's
    /// `log_norm`.
    pub state: Mps,
    /// `⟨ŷ|W x⟩` (real, non-negative) after every local update, in units of
    /// the input scale.
    pub overlaps: Vec<f64>,
}

impl FitOutcome {
    pub fn overlap(&self) -> f64 {
        self.overlaps.last().copied().unwrap_or(0.0)
    }
}

/// Variational single-site fit of `W·x` within the bond structure of `guess`.
///
/// Each local update maximizes `|⟨y|W x⟩|` with `‖y‖ = 1`, so the recorded
/// overlaps never decrease. One sweep is a left-to-right plus a
/// right-to-left pass. The overlap phase is absorbed into `ŷ`, hence
/// `W x ≈ overlap · ŷ`.
pub fn fit(op: &Mpo, x: &Mps, guess: &Mps, sweeps: usize) -> Result<FitOutcome> {
    let n = x.len();
    if op.len() != n || guess.len() != n {
        return Err(Error::Dimension("fit lengths differ".into()));
    }
    if op.in_dims() != x.phys_dims() || op.out_dims() != guess.phys_dims() {
        return Err(Error::Dimension("fit physical extents differ".into()));
    }
    let start = if n > 1 { guess.canonicalize(n - 1)?.canonicalize(0)? } else { guess.clone() };
    let mut y: Vec<Tensor> = start.sites.iter().map(Tensor::conj).collect();
    let trivial = Tensor::new(vec![1, 1, 1], vec![one()])?;
    let mut left: Vec<Tensor> = vec![trivial.clone(); n + 1];
    let mut right: Vec<Tensor> = vec![trivial; n + 1];
    for i in (1..n).rev() {
        right[i] = env_step_right(&right[i + 1], &y[i], &op.sites[i], &x.sites[i])?;
    }
    let mut overlaps = Vec::new();
    let mut last = Tensor::zeros(&[1]);
    for _ in 0..sweeps.max(1) {
        for i in 0..n {
            let p = local_target(&left[i], &x.sites[i], &op.sites[i], &right[i + 1])?;
            overlaps.push(p.norm());
            if i + 1 < n {
                let (q, _) = qr(&p, &[0, 1])?;
                y[i] = q.conj();
                left[i + 1] = env_step_left(&left[i], &y[i], &op.sites[i], &x.sites[i])?;
            } else {
                last = p;
            }
        }
        for i in (0..n).rev() {
            let p = if i + 1 == n {
                last.clone()
            } else {
                let p = local_target(&left[i], &x.sites[i], &op.sites[i], &right[i + 1])?;
                overlaps.push(p.norm());
                p
            };
            if i > 0 {
                let (_, q) = lq(&p, &[0])?;
                y[i] = q.conj();
                right[i] = env_step_right(&right[i + 1], &y[i], &op.sites[i], &x.sites[i])?;
            } else {
                last = p;
            }
        }
    }
    let nrm = last.norm();
    if !(nrm > 0.0) || !nrm.is_finite() {
        return Err(Error::ZeroNorm);
    }
    let mut sites: Vec<Tensor> = y.iter().map(Tensor::conj).collect();
    sites[0] = last.scaled(C64::new(1.0 / nrm, 0.0));
    let state = Mps { sites, center: Some(0), log_norm: x.log_norm };
    Ok(FitOutcome { state, overlaps })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    LeftToRight,
    RightToLeft,
}

#[derive(Clone, Debug)]
pub struct PassOutcome {
    /// Unit-norm approximation `ŷ` carrying the input's `log_norm`, canonical
    /// at the end where the pass finished.
    pub state: Mps,
    /// `|⟨ŷ|W x⟩|` in units of the input scale.
    pub overlap: f64,
    /// Singular weight dropped by the truncation, relative to each local norm².
    pub discarded: f64,
}

/// A single pass of the variational fit of `W·x` within the bonds of `guess`.
///
/// With `trim = Some((max_bond, rel_cutoff))` each local target is split by
/// a truncated SVD, so bonds can shrink; otherwise by QR or LQ. The guess is
/// brought into canonical form at the starting end if it is not already
/// there.
pub fn fit_pass(op: &Mpo, x: &Mps, guess: &Mps, direction: Direction, trim: Option<(usize, f64)>) -> Result<PassOutcome> {
    let n = x.len();
    if op.len() != n || guess.len() != n {
        return Err(Error::Dimension("fit lengths differ".into()));
    }
    if op.in_dims() != x.phys_dims() || op.out_dims() != guess.phys_dims() {
        return Err(Error::Dimension("fit physical extents differ".into()));
    }
    let start = match direction {
        Direction::LeftToRight => 0,
        Direction::RightToLeft => n - 1,
    };
    let guess = if guess.center == Some(start) { guess.clone() } else { guess.canonicalize(start)? };
    let mut y: Vec<Tensor> = guess.sites.iter().map(Tensor::conj).collect();
    let trivial = Tensor::new(vec![1, 1, 1], vec![one()])?;
    let mut left: Vec<Tensor> = vec![trivial.clone(); n + 1];
    let mut right: Vec<Tensor> = vec![trivial; n + 1];
    let mut discarded = 0.0;
    let last = match direction {
        Direction::LeftToRight => {
            for i in (1..n).rev() {
                right[i] = env_step_right(&right[i + 1], &y[i], &op.sites[i], &x.sites[i])?;
            }
            for i in 0..n - 1 {
                // [yl, xr, s, wr], shared by the local target and the new environment
                let t1 = contract(&left[i], &[2], &x.sites[i], &[0])?;
                let t2 = contract(&t1, &[1, 2], &op.sites[i], &[0, 2])?;
                let p = contract(&t2, &[1, 3], &right[i + 1], &[2, 1])?;
                y[i] = match trim {
                    Some((max_bond, rel_cutoff)) => {
                        let svd = svd_truncate(&p, &[0, 1], max_bond, rel_cutoff)?;
                        discarded += svd.discarded_weight / p.norm_sqr();
                        svd.u.conj()
                    }
                    None => qr(&p, &[0, 1])?.0.conj(),
                };
                left[i + 1] = contract(&y[i], &[0, 1], &t2, &[0, 2])?.permute(&[0, 2, 1])?;
            }
            local_target(&left[n - 1], &x.sites[n - 1], &op.sites[n - 1], &right[n])?
        }
        Direction::RightToLeft => {
            for i in 0..n - 1 {
                left[i + 1] = env_step_left(&left[i], &y[i], &op.sites[i], &x.sites[i])?;
            }
            for i in (1..n).rev() {
                // [xl, yr, wl, s]
                let u1 = contract(&x.sites[i], &[2], &right[i + 1], &[2])?;
                let u2 = contract(&u1, &[1, 3], &op.sites[i], &[2, 3])?;
                let p = contract(&left[i], &[1, 2], &u2, &[2, 0])?.permute(&[0, 2, 1])?;
                y[i] = match trim {
                    Some((max_bond, rel_cutoff)) => {
                        let svd = svd_truncate(&p, &[0], max_bond, rel_cutoff)?;
                        discarded += svd.discarded_weight / p.norm_sqr();
                        svd.vdag.conj()
                    }
                    None => lq(&p, &[0])?.1.conj(),
                };
                right[i] = contract(&y[i], &[1, 2], &u2, &[3, 1])?.permute(&[0, 2, 1])?;
            }
            local_target(&left[0], &x.sites[0], &op.sites[0], &right[1])?
        }
    };
    let nrm = last.norm();
    if !(nrm > 0.0) || !nrm.is_finite() {
        return Err(Error::ZeroNorm);
    }
    let end = n - 1 - start;
    let mut sites: Vec<Tensor> = y.iter().map(Tensor::conj).collect();
    sites[end] = last.scaled(C64::new(1.0 / nrm, 0.0));
    let state = Mps { sites, center: Some(end), log_norm: x.log_norm };
    Ok(PassOutcome { state, overlap: nrm, discarded })
}

/// SVD sweep on a left-canonical copy, right to left. Returns the truncated
/// state (unit-norm tensors, canonical at 0, norm in `log_norm`) and the
/// discarded weight relative to the input norm².
pub fn svd_compress(psi: &Mps, max_bond: usize, rel_cutoff: f64) -> Result<(Mps, f64)> {
    let n = psi.len();
    let mut c = psi.canonicalize(n - 1)?;
    let total = c.sites[n - 1].norm_sqr();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::ZeroNorm);
    }
    let mut discarded = 0.0;
    for i in (1..n).rev() {
        let svd = svd_truncate(&c.sites[i], &[0], max_bond, rel_cutoff)?;
        discarded += svd.discarded_weight;
        c.sites[i] = svd.vdag;
        let mut us = svd.u;
        let k = svd.s.len();
        for (j, z) in us.data_mut().iter_mut().enumerate() {
            *z *= svd.s[j % k];
        }
        c.sites[i - 1] = contract(&c.sites[i - 1], &[2], &us, &[0])?;
    }
    let kept = c.sites[0].norm();
    if !(kept > 0.0) {
        return Err(Error::Underflow);
    }
    c.sites[0].scale(C64::new(1.0 / kept, 0.0));
    c.log_norm += kept.ln();
    c.center = Some(0);
    Ok((c, discarded / total))
}

/// One SVD sweep followed by `variational_sweeps` fitting sweeps. The result
/// has unit-norm tensors and carries the norm of the retained projection in
/// `log_norm`; the error is relative to the input norm².
pub fn compress(psi: &Mps, max_bond: usize, rel_cutoff: f64, variational_sweeps: usize) -> Result<(Mps, f64)> {
    let (svd_state, svd_error) = svd_compress(psi, max_bond, rel_cutoff)?;
    if variational_sweeps == 0 {
        return Ok((svd_state, svd_error));
    }
    let input = psi.clone().with_log_norm(0.0);
    let input_norm_sqr = inner(&input, &input)?.re;
    let outcome = fit(&Mpo::identity(&psi.phys_dims()), &input, &svd_state, variational_sweeps)?;
    let ov = outcome.overlap();
    let fit_error = (1.0 - ov * ov / input_norm_sqr).max(0.0);
    if fit_error <= svd_error {
        let state = outcome.state.with_log_norm(psi.log_norm + ov.ln());
        Ok((state, fit_error))
    } else {
        Ok((svd_state, svd_error))
    }
}
