//! State-vector simulation of finite Ising chains.
//!
//! Basis index bit `N−1−k` holds the spin of site `k`, so site 0 is the most
//! significant factor, matching the Kronecker convention of the gate
//! matrices. A chain of `N` sites covers the coordinates
//! `first, …, first+N−1`; the impurity, if any, sits at coordinate 0.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::tensor::{eigh, Tensor};
use crate::trotter::{Evolution, ModelSpec, Pauli, TrotterPlan};

pub const MAX_SITES: usize = 24;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    n: usize,
    amps: Vec<C64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Open,
    Periodic,
}

/// Finite chain geometry shared by the Hamiltonian and the gate executor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Chain {
    pub model: ModelSpec,
    pub n: usize,
    /// Coordinate of the first site.
    pub first: i64,
    pub boundary: Boundary,
}

impl Chain {
    pub fn open(model: ModelSpec, n: usize, first: i64) -> Self {
        Self { model, n, first, boundary: Boundary::Open }
    }

    /// Open chain whose middle site has coordinate 0.
    pub fn centered(model: ModelSpec, n: usize) -> Self {
        Self::open(model, n, -((n / 2) as i64))
    }

    pub fn periodic(model: ModelSpec, n: usize) -> Self {
        Self { model, n, first: 0, boundary: Boundary::Periodic }
    }

    /// Position of coordinate `x` inside the chain.
    pub fn position(&self, x: i64) -> Result<usize> {
        let k = x - self.first;
        if k < 0 || k >= self.n as i64 {
            return Err(Error::InvalidParameter(format!("coordinate {x} is outside the chain")));
        }
        Ok(k as usize)
    }

    fn bonds(&self) -> Vec<(usize, usize)> {
        let mut b: Vec<(usize, usize)> = (0..self.n - 1).map(|k| (k, k + 1)).collect();
        if self.boundary == Boundary::Periodic && self.n > 2 {
            b.push((self.n - 1, 0));
        }
        b
    }

    /// Diagonal of `H` in the computational basis.
    fn diagonal(&self) -> Vec<f64> {
        let n = self.n;
        let bonds = self.bonds();
        let m = &self.model;
        (0..1usize << n)
            .map(|idx| {
                let zz: f64 = bonds.iter().map(|&(p, q)| if bit(idx, p, n) == bit(idx, q, n) { 1.0 } else { -1.0 }).sum();
                let z: f64 = (0..n).map(|k| if bit(idx, k, n) == 0 { 1.0 } else { -1.0 }).sum();
                -m.j * zz - m.h * z
            })
            .collect()
    }

    fn apply_split(&self, diag: &[f64], psi: &DenseState) -> DenseState {
        let n = self.n;
        let mut out: Vec<C64> = psi.amps.iter().zip(diag).map(|(a, d)| a * d).collect();
        for k in 0..n {
            let g = self.model.field_at(self.first + k as i64);
            let b = mask(k, n);
            for (idx, o) in out.iter_mut().enumerate() {
                *o -= psi.amps[idx ^ b] * g;
            }
        }
        DenseState { n, amps: out }
    }

    /// `H|ψ⟩`.
    pub fn apply_hamiltonian(&self, psi: &DenseState) -> Result<DenseState> {
        check_size(self.n, psi)?;
        Ok(self.apply_split(&self.diagonal(), psi))
    }

    /// `⟨ψ|H|ψ⟩/⟨ψ|ψ⟩`.
    pub fn energy(&self, psi: &DenseState) -> Result<f64> {
        let hpsi = self.apply_hamiltonian(psi)?;
        Ok(psi.dot(&hpsi).re / psi.norm_sqr())
    }

    /// Dense Hamiltonian matrix; only for small chains.
    pub fn hamiltonian_matrix(&self) -> Result<Tensor> {
        let dim = 1usize << self.n;
        let mut h = Tensor::zeros(&[dim, dim]);
        for j in 0..dim {
            let col = self.apply_hamiltonian(&DenseState::basis(self.n, j)?)?;
            for (i, z) in col.amps.iter().enumerate() {
                h.set(&[i, j], *z);
            }
        }
        Ok(h)
    }

    /// Applies `steps` Trotter steps of `plan`; imaginary-time results are
    /// renormalized.
    pub fn evolve_trotter(&self, psi: &DenseState, plan: &TrotterPlan, steps: usize) -> Result<DenseState> {
        if self.boundary != Boundary::Open {
            return Err(Error::InvalidParameter("Trotter execution needs an open chain".into()));
        }
        check_size(self.n, psi)?;
        let gates = plan.step_gates(self.first, self.n)?;
        let mut out = psi.clone();
        for _ in 0..steps {
            for g in &gates {
                out.apply(&g.matrix, &g.sites)?;
            }
            if plan.model().evolution == Evolution::Imaginary {
                out.normalize()?;
            }
        }
        Ok(out)
    }

    /// `exp(−iHt)|ψ⟩` by a Taylor series in short chunks, accurate to
    /// rounding.
    pub fn evolve_exact(&self, psi: &DenseState, t: f64) -> Result<DenseState> {
        check_size(self.n, psi)?;
        let m = &self.model;
        let gmax = (0..self.n).map(|k| m.field_at(self.first + k as i64).abs()).fold(0.0, f64::max);
        let bound = self.n as f64 * (m.j.abs() + gmax + m.h.abs());
        let chunks = (t.abs() * bound / 0.5).ceil().max(1.0) as usize;
        let tau = t / chunks as f64;
        let diag = self.diagonal();
        let mut out = psi.clone();
        for _ in 0..chunks {
            let mut term = out.clone();
            let mut acc = out.clone();
            for order in 1..60 {
                term = self.apply_split(&diag, &term);
                let f = C64::new(0.0, -tau / order as f64);
                term.amps.iter_mut().for_each(|z| *z *= f);
                acc.axpy(C64::new(1.0, 0.0), &term);
                if term.norm_sqr().sqrt() < 1e-17 * acc.norm_sqr().sqrt() {
                    break;
                }
            }
            out = acc;
        }
        Ok(out)
    }

    /// Ground state by restarted Lanczos with full reorthogonalization.
    pub fn ground_state(&self, tol: f64, seed: u64) -> Result<(f64, DenseState)> {
        let dim = 1usize << self.n;
        let mut state = seed;
        let mut v = DenseState {
            n: self.n,
            amps: (0..dim)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    C64::new(((state >> 11) as f64) / (1u64 << 53) as f64 - 0.5, 0.0)
                })
                .collect(),
        };
        v.normalize()?;
        let krylov = 60.min(dim);
        let diag = self.diagonal();
        let mut energy = f64::INFINITY;
        for _restart in 0..100 {
            let mut basis: Vec<DenseState> = vec![v.clone()];
            let mut alpha = Vec::new();
            let mut beta: Vec<f64> = Vec::new();
            for j in 0..krylov {
                let mut w = self.apply_split(&diag, &basis[j]);
                let a = basis[j].dot(&w).re;
                alpha.push(a);
                for b in &basis {
                    let c = b.dot(&w);
                    w.axpy(-c, b);
                }
                let nb = w.norm_sqr().sqrt();
                if j + 1 == krylov || nb < 1e-12 {
                    break;
                }
                beta.push(nb);
                w.amps.iter_mut().for_each(|z| *z /= nb);
                basis.push(w);
            }
            let k = alpha.len();
            let tri = Tensor::from_fn(&[k, k], |i| {
                let (r, c) = (i[0], i[1]);
                let x = if r == c {
                    alpha[r]
                } else if r + 1 == c {
                    beta[r]
                } else if c + 1 == r {
                    beta[c]
                } else {
                    0.0
                };
                C64::new(x, 0.0)
            });
            let (vals, vecs) = eigh(&tri)?;
            let mut ritz = DenseState { n: self.n, amps: vec![C64::new(0.0, 0.0); dim] };
            for (i, b) in basis.iter().take(k).enumerate() {
                ritz.axpy(vecs.get(&[i, 0]), b);
            }
            ritz.normalize()?;
            let hr = self.apply_split(&diag, &ritz);
            let e = ritz.dot(&hr).re;
            let mut res = hr.clone();
            res.axpy(C64::new(-e, 0.0), &ritz);
            energy = vals[0];
            v = ritz;
            if res.norm_sqr().sqrt() < tol {
                return Ok((e, v));
            }
        }
        Err(Error::NonConvergence { iterations: 100, residual: energy })
    }
}

fn check_size(n: usize, psi: &DenseState) -> Result<()> {
    if psi.n != n {
        return Err(Error::Dimension(format!("state has {} sites, chain has {n}", psi.n)));
    }
    Ok(())
}

fn bit(idx: usize, site: usize, n: usize) -> usize {
    (idx >> (n - 1 - site)) & 1
}

fn mask(site: usize, n: usize) -> usize {
    1 << (n - 1 - site)
}

impl DenseState {
    pub fn product(locals: &[Vec<C64>]) -> Result<Self> {
        let n = locals.len();
        if n == 0 || n > MAX_SITES {
            return Err(Error::InvalidParameter(format!("dense chains hold 1..={MAX_SITES} sites, got {n}")));
        }
        let mut amps = vec![C64::new(1.0, 0.0)];
        for v in locals {
            if v.len() != 2 {
                return Err(Error::Dimension("local states must be two-dimensional".into()));
            }
            amps = amps.iter().flat_map(|a| [a * v[0], a * v[1]]).collect();
        }
        Ok(Self { n, amps })
    }

    pub fn uniform_product(local: &[C64], n: usize) -> Result<Self> {
        Self::product(&vec![local.to_vec(); n])
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        if n == 0 || n > MAX_SITES || index >= 1 << n {
            return Err(Error::InvalidParameter("basis state out of range".into()));
        }
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { n, amps })
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let nrm = self.norm_sqr().sqrt();
        if !(nrm > 0.0) {
            return Err(Error::ZeroNorm);
        }
        self.amps.iter_mut().for_each(|z| *z /= nrm);
        Ok(())
    }

    /// `⟨self|other⟩`.
    pub fn dot(&self, other: &DenseState) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    fn axpy(&mut self, a: C64, x: &DenseState) {
        self.amps.iter_mut().zip(&x.amps).for_each(|(y, xv)| *y += a * xv);
    }

    /// Applies a one-site (2×2) or two-site (4×4) matrix in place.
    pub fn apply(&mut self, op: &Tensor, sites: &[usize]) -> Result<()> {
        let n = self.n;
        if sites.iter().any(|&s| s >= n) {
            return Err(Error::InvalidParameter(format!("sites {sites:?} outside chain of {n}")));
        }
        let d = op.shape();
        let m: Vec<C64> = op.data().to_vec();
        match sites {
            [s] if d == [2, 2] => {
                let b = mask(*s, n);
                for idx in 0..self.amps.len() {
                    if idx & b == 0 {
                        let (x0, x1) = (self.amps[idx], self.amps[idx | b]);
                        self.amps[idx] = m[0] * x0 + m[1] * x1;
                        self.amps[idx | b] = m[2] * x0 + m[3] * x1;
                    }
                }
            }
            [s, t] if d == [4, 4] && s != t => {
                let (bs, bt) = (mask(*s, n), mask(*t, n));
                let diagonal = (0..4).all(|i| (0..4).all(|j| i == j || m[4 * i + j] == C64::new(0.0, 0.0)));
                for idx in 0..self.amps.len() {
                    if idx & (bs | bt) != 0 {
                        continue;
                    }
                    let ids = [idx, idx | bt, idx | bs, idx | bs | bt];
                    if diagonal {
                        for (k, &i) in ids.iter().enumerate() {
                            self.amps[i] *= m[5 * k];
                        }
                    } else {
                        let x = [self.amps[ids[0]], self.amps[ids[1]], self.amps[ids[2]], self.amps[ids[3]]];
                        for (r, &i) in ids.iter().enumerate() {
                            self.amps[i] = (0..4).map(|c| m[4 * r + c] * x[c]).sum();
                        }
                    }
                }
            }
            _ => {
                return Err(Error::Dimension(format!("cannot apply a {d:?} matrix to sites {sites:?}")));
            }
        }
        Ok(())
    }

    /// `⟨ψ|O_site|ψ⟩/⟨ψ|ψ⟩`.
    pub fn expectation(&self, op: &Tensor, site: usize) -> Result<C64> {
        let mut o = self.clone();
        o.apply(op, &[site])?;
        Ok(self.dot(&o) / self.norm_sqr())
    }

    /// `⟨ψ|A_a B_b|ψ⟩/⟨ψ|ψ⟩` for single-site operators on distinct or equal sites.
    pub fn correlation(&self, a: &Tensor, site_a: usize, b: &Tensor, site_b: usize) -> Result<C64> {
        let mut o = self.clone();
        o.apply(b, &[site_b])?;
        o.apply(a, &[site_a])?;
        Ok(self.dot(&o) / self.norm_sqr())
    }
}

/// How a finite chain is propagated in real time.
#[derive(Clone, Debug)]
pub enum Propagator {
    Trotter(TrotterPlan),
    Exact { dt: f64 },
}

impl Propagator {
    fn step(&self) -> f64 {
        match self {
            Propagator::Trotter(p) => p.delta(),
            Propagator::Exact { dt } => *dt,
        }
    }

    fn advance(&self, chain: &Chain, psi: &DenseState, steps: usize) -> Result<DenseState> {
        match self {
            Propagator::Trotter(p) => chain.evolve_trotter(psi, p, steps),
            Propagator::Exact { dt } => chain.evolve_exact(psi, dt * steps as f64),
        }
    }
}

/// Largest signal speed used to size finite chains: `2·max(1, |g|)`.
pub fn light_cone_velocity(model: &ModelSpec) -> f64 {
    let gmax = model.g.abs().max(model.impurity.map_or(0.0, f64::abs));
    2.0 * gmax.max(1.0) * model.j.abs().max(1.0)
}

/// Sites kept between the causal region and each chain end.
pub const LIGHT_CONE_BUFFER: f64 = 4.0;

/// Checks `2·v·t + buffer < N`.
pub fn check_light_cone(model: &ModelSpec, n: usize, t: f64) -> Result<()> {
    let need = 2.0 * light_cone_velocity(model) * t + LIGHT_CONE_BUFFER;
    if need >= n as f64 {
        return Err(Error::LightCone(format!(
            "time {t} needs more than {need:.1} sites, chain has {n}"
        )));
    }
    Ok(())
}

fn steps_for(t: f64, dt: f64) -> Result<usize> {
    let k = (t / dt).round();
    if !(k >= 0.0) || (k * dt - t).abs() > 1e-9 * t.max(1.0) {
        return Err(Error::InvalidParameter(format!("time {t} is not a multiple of the step {dt}")));
    }
    Ok(k as usize)
}

/// `⟨σ(t)⟩` on the middle site of an open chain started in the uniform
/// product of `initial`.
pub fn ed_evolve_expectation(
    model: &ModelSpec,
    n: usize,
    t: f64,
    propagator: &Propagator,
    op: Pauli,
    initial: &[C64],
) -> Result<C64> {
    check_light_cone(model, n, t)?;
    let chain = Chain::centered(*model, n);
    let psi = DenseState::uniform_product(initial, n)?;
    let steps = steps_for(t, propagator.step())?;
    let out = propagator.advance(&chain, &psi, steps)?;
    out.expectation(&op.matrix(), chain.position(0)?)
}

/// Samples of `⟨σ(t)⟩` on the middle site at every `stride`-th step up to `t_max`.
pub fn ed_trajectory(
    model: &ModelSpec,
    n: usize,
    t_max: f64,
    propagator: &Propagator,
    stride: usize,
    op: Pauli,
    initial: &[C64],
) -> Result<Vec<(f64, C64)>> {
    check_light_cone(model, n, t_max)?;
    let chain = Chain::centered(*model, n);
    let mut psi = DenseState::uniform_product(initial, n)?;
    let steps = steps_for(t_max, propagator.step())?;
    let site = chain.position(0)?;
    let o = op.matrix();
    let mut out = vec![(0.0, psi.expectation(&o, site)?)];
    let mut done = 0;
    while done < steps {
        let k = stride.min(steps - done);
        psi = propagator.advance(&chain, &psi, k)?;
        done += k;
        out.push((done as f64 * propagator.step(), psi.expectation(&o, site)?));
    }
    Ok(out)
}

/// `⟨ψ0| U(t2)† O2_x U(t2,t1) O1_{x+Δ} U(t1) |ψ0⟩` with `x = 0` at the middle
/// of the chain.
#[allow(clippy::too_many_arguments)]
pub fn ed_two_time_correlator(
    model: &ModelSpec,
    n: usize,
    propagator: &Propagator,
    initial: &[C64],
    o1: Pauli,
    t1: f64,
    o2: Pauli,
    t2: f64,
    dx: usize,
) -> Result<C64> {
    if t2 < t1 {
        return Err(Error::InvalidParameter("correlators need t2 >= t1".into()));
    }
    check_light_cone(model, n.saturating_sub(dx), t2)?;
    let chain = Chain::open(*model, n, -(((n - dx) / 2) as i64));
    let x = chain.position(0)?;
    let psi0 = DenseState::uniform_product(initial, n)?;
    let n1 = steps_for(t1, propagator.step())?;
    let n2 = steps_for(t2, propagator.step())?;
    let at_t1 = propagator.advance(&chain, &psi0, n1)?;
    let mut phi = at_t1.clone();
    phi.apply(&o1.matrix(), &[x + dx])?;
    let phi = propagator.advance(&chain, &phi, n2 - n1)?;
    let mut chi = propagator.advance(&chain, &at_t1, n2 - n1)?;
    chi.apply(&o2.matrix().dagger()?, &[x])?;
    Ok(chi.dot(&phi))
}
