//! Ising chain models and second-order Trotter plans.
//!
//! The Hamiltonian is `H = −Σ_i (J Z_i Z_{i+1} + g_i X_i + h Z_i)` with
//! `g_i = g` everywhere except an optional impurity `g_0` at site 0.
//!
//! A plan is a symmetric sequence of layers. Gates are generated on demand
//! from `(site, fraction)` so that any two callers asking for the same gate
//! receive bitwise-identical matrices.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::tensor::{contract, eigh, expm_hermitian, svd_truncate, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Evolution {
    Real,
    Imaginary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> Tensor {
        let (o, z, i) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0));
        let data = match self {
            Pauli::I => vec![o, z, z, o],
            Pauli::X => vec![z, o, o, z],
            Pauli::Y => vec![z, -i, i, z],
            Pauli::Z => vec![o, z, z, -o],
        };
        Tensor::matrix(2, 2, data).expect("2x2")
    }

    pub fn name(self) -> &'static str {
        match self {
            Pauli::I => "identity",
            Pauli::X => "sigma_x",
            Pauli::Y => "sigma_y",
            Pauli::Z => "sigma_z",
        }
    }
}

/// Eigenvector of `X` with eigenvalue +1, the initial state of every quench.
pub fn plus_state() -> Vec<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    vec![C64::new(s, 0.0), C64::new(s, 0.0)]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelSpec {
    pub j: f64,
    pub g: f64,
    pub h: f64,
    /// Transverse field on site 0, replacing `g` there.
    pub impurity: Option<f64>,
    pub evolution: Evolution,
}

impl ModelSpec {
    pub fn ising(g: f64, h: f64, evolution: Evolution) -> Self {
        Self { j: 1.0, g, h, impurity: None, evolution }
    }

    pub fn with_impurity(mut self, g0: f64) -> Self {
        self.impurity = Some(g0);
        self
    }

    pub fn without_impurity(mut self) -> Self {
        self.impurity = None;
        self
    }

    pub fn field_at(&self, site: i64) -> f64 {
        match self.impurity {
            Some(g0) if site == 0 => g0,
            _ => self.g,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.j, self.g, self.h].iter().all(|x| x.is_finite())
            && self.impurity.is_none_or(f64::is_finite);
        if !ok {
            return Err(Error::InvalidParameter("model couplings must be finite".into()));
        }
        Ok(())
    }

    /// Local term of one site with weight `w` on its field, as a 2×2 matrix.
    pub fn site_term(&self, site: i64, weight: f64) -> Tensor {
        let gx = Pauli::X.matrix().scaled(C64::new(-weight * self.field_at(site), 0.0));
        let hz = Pauli::Z.matrix().scaled(C64::new(-weight * self.h, 0.0));
        gx.add_scaled(&hz, C64::new(1.0, 0.0)).expect("same shape")
    }

    /// Bond term on `(site, site+1)` with the given field weights on either end,
    /// as a 4×4 matrix with the left site as the major factor.
    pub fn bond_term(&self, site: i64, left_weight: f64, right_weight: f64) -> Tensor {
        let zz = Pauli::Z.matrix().kron(&Pauli::Z.matrix()).expect("kron");
        let mut term = zz.scaled(C64::new(-self.j, 0.0));
        let id = Tensor::eye(2);
        if left_weight != 0.0 {
            let l = self.site_term(site, left_weight).kron(&id).expect("kron");
            term = term.add_scaled(&l, C64::new(1.0, 0.0)).expect("same shape");
        }
        if right_weight != 0.0 {
            let r = id.kron(&self.site_term(site + 1, right_weight)).expect("kron");
            term = term.add_scaled(&r, C64::new(1.0, 0.0)).expect("same shape");
        }
        term
    }
}

/// How the Hamiltonian is split into exactly exponentiable pieces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Splitting {
    /// `e^{−iH_eδ/2} e^{−iH_oδ} e^{−iH_eδ/2}` with each field shared half and
    /// half by its two bonds; period 2 in space.
    BondSymmetric,
    /// `e^{−iH_fδ/2} e^{−iH_zzδ} e^{−iH_fδ/2}` with pure `ZZ` bond gates;
    /// period 1 in space.
    FieldZz,
}

impl Splitting {
    pub fn period(self) -> usize {
        match self {
            Splitting::BondSymmetric => 2,
            Splitting::FieldZz => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Layer {
    Fields { fraction: f64 },
    /// Bonds `(s, s+1)` with `s ≡ parity (mod 2)`, or all bonds when `None`.
    Bonds { parity: Option<usize>, fraction: f64 },
}

/// A gate on a finite segment, with positions relative to the segment start.
#[derive(Clone, Debug)]
pub struct Gate {
    pub sites: Vec<usize>,
    pub matrix: Tensor,
}

#[derive(Clone, Debug)]
pub struct TrotterPlan {
    model: ModelSpec,
    delta: f64,
    splitting: Splitting,
    layers: Vec<Layer>,
}

/// Plan with the bond-symmetric splitting.
pub fn build_plan(model: ModelSpec, delta: f64) -> Result<TrotterPlan> {
    TrotterPlan::new(model, delta, Splitting::BondSymmetric)
}

impl TrotterPlan {
    pub fn new(model: ModelSpec, delta: f64, splitting: Splitting) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {delta}")));
        }
        model.validate()?;
        let layers = match splitting {
            Splitting::BondSymmetric => vec![
                Layer::Bonds { parity: Some(0), fraction: 0.5 },
                Layer::Bonds { parity: Some(1), fraction: 1.0 },
                Layer::Bonds { parity: Some(0), fraction: 0.5 },
            ],
            Splitting::FieldZz => vec![
                Layer::Fields { fraction: 0.5 },
                Layer::Bonds { parity: None, fraction: 1.0 },
                Layer::Fields { fraction: 0.5 },
            ],
        };
        Ok(Self { model, delta, splitting, layers })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn splitting(&self) -> Splitting {
        self.splitting
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn period(&self) -> usize {
        self.splitting.period()
    }

    /// `exp(−i τ term)` or the imaginary-time `exp(−τ (term − e_min))`.
    fn exponentiate(&self, term: &Tensor, fraction: f64) -> Result<Tensor> {
        let tau = self.delta * fraction;
        match self.model.evolution {
            Evolution::Real => expm_hermitian(term, C64::new(0.0, -tau)),
            Evolution::Imaginary => {
                let (vals, _) = eigh(term)?;
                let n = term.shape()[0];
                let shifted = term.add_scaled(&Tensor::eye(n), C64::new(-vals[0], 0.0))?;
                expm_hermitian(&shifted, C64::new(-tau, 0.0))
            }
        }
    }

    fn field_weights(&self, site: i64, segment: Option<(i64, i64)>) -> (f64, f64) {
        match self.splitting {
            Splitting::FieldZz => (0.0, 0.0),
            Splitting::BondSymmetric => {
                let (first, last) = segment.unwrap_or((i64::MIN, i64::MAX));
                let l = if site == first { 1.0 } else { 0.5 };
                let r = if site + 1 == last { 1.0 } else { 0.5 };
                (l, r)
            }
        }
    }

    /// Bond gate on `(site, site+1)` of the infinite chain, 4×4.
    pub fn bond_gate(&self, site: i64, fraction: f64) -> Result<Tensor> {
        self.bond_gate_in(site, fraction, None)
    }

    fn bond_gate_in(&self, site: i64, fraction: f64, segment: Option<(i64, i64)>) -> Result<Tensor> {
        let (wl, wr) = self.field_weights(site, segment);
        self.exponentiate(&self.model.bond_term(site, wl, wr), fraction)
    }

    /// Single-site field gate, 2×2; identity for the bond-symmetric splitting.
    pub fn site_gate(&self, site: i64, fraction: f64) -> Result<Tensor> {
        match self.splitting {
            Splitting::BondSymmetric => Ok(Tensor::eye(2)),
            Splitting::FieldZz => self.exponentiate(&self.model.site_term(site, 1.0), fraction),
        }
    }

    /// Concrete gate list of one step on the open segment of `n` sites whose
    /// first site has chain coordinate `first`, in application order.
    pub fn step_gates(&self, first: i64, n: usize) -> Result<Vec<Gate>> {
        if n < 2 {
            return Err(Error::InvalidParameter("a segment needs at least two sites".into()));
        }
        let last = first + n as i64 - 1;
        let segment = Some((first, last));
        let mut gates = Vec::new();
        for layer in &self.layers {
            match *layer {
                Layer::Fields { fraction } => {
                    for k in 0..n {
                        let matrix = self.site_gate(first + k as i64, fraction)?;
                        gates.push(Gate { sites: vec![k], matrix });
                    }
                }
                Layer::Bonds { parity, fraction } => {
                    for k in 0..n.saturating_sub(1) {
                        let s = first + k as i64;
                        if parity.is_none_or(|p| s.rem_euclid(2) as usize == p) {
                            let matrix = self.bond_gate_in(s, fraction, segment)?;
                            gates.push(Gate { sites: vec![k, k + 1], matrix });
                        }
                    }
                }
            }
        }
        Ok(gates)
    }

    /// One step for the unit cell of `period()` sites starting at `first`, as a
    /// tensor `[left, out, in, right]`. `out`/`in` run over the cell's spins
    /// (first site major); the horizontal legs combine the bond halves that
    /// cross each cell edge, earliest layer major.
    pub fn cell_step(&self, first: i64) -> Result<Tensor> {
        let p = self.period();
        let q = 1usize << p;
        let mut acc: Option<Tensor> = None;
        for layer in &self.layers {
            let factors = self.layer_factors(layer, first, p, q)?;
            for f in factors {
                acc = Some(match acc {
                    None => f,
                    Some(cur) => compose_after(&f, &cur)?,
                });
            }
        }
        Ok(acc.expect("plans have layers"))
    }

    /// Factors `[l, out, in, r]` of one layer restricted to a cell, in
    /// application order.
    fn layer_factors(&self, layer: &Layer, first: i64, p: usize, q: usize) -> Result<Vec<Tensor>> {
        let mut out = Vec::new();
        match *layer {
            Layer::Fields { fraction } => {
                let mut op = Tensor::eye(1);
                for k in 0..p {
                    op = op.kron(&self.site_gate(first + k as i64, fraction)?)?;
                }
                out.push(op.reshape(&[1, q, q, 1])?);
            }
            Layer::Bonds { parity, fraction } => {
                let active = |s: i64| parity.is_none_or(|pp| s.rem_euclid(2) as usize == pp);
                // left-crossing bond (first−1, first): its right half acts on site `first`
                if active(first - 1) {
                    let (_, right) = gate_to_mpo_tensors(&self.bond_gate(first - 1, fraction)?)?;
                    // right: [b, out, in] on local site 0
                    out.push(embed_half(&right, 0, p, true)?);
                }
                for k in 0..p.saturating_sub(1) {
                    let s = first + k as i64;
                    if active(s) {
                        let g = self.bond_gate(s, fraction)?;
                        out.push(embed_pair(&g, k, p)?.reshape(&[1, q, q, 1])?);
                    }
                }
                let edge = first + p as i64 - 1;
                if active(edge) {
                    let (left, _) = gate_to_mpo_tensors(&self.bond_gate(edge, fraction)?)?;
                    out.push(embed_half(&left, p - 1, p, false)?);
                }
            }
        }
        Ok(out)
    }
}

/// `later · earlier` on the cell spins, horizontal legs combined earliest-major.
fn compose_after(later: &Tensor, earlier: &Tensor) -> Result<Tensor> {
    // later [l2, o, m, r2], earlier [l1, m, i, r1]
    let t = contract(later, &[2], earlier, &[1])?; // [l2, o, r2, l1, i, r1]
    let t = t.permute(&[3, 0, 1, 4, 5, 2])?; // [l1, l2, o, i, r1, r2]
    let s = t.shape().to_vec();
    t.reshape(&[s[0] * s[1], s[2], s[3], s[4] * s[5]])
}

/// Two-site gate on local sites `(k, k+1)` of a `p`-site cell, as a `q×q` matrix.
fn embed_pair(gate: &Tensor, k: usize, p: usize) -> Result<Tensor> {
    let before = Tensor::eye(1usize << k);
    let after = Tensor::eye(1usize << (p - k - 2));
    before.kron(gate)?.kron(&after)
}

/// Gate half on local site `k` of a `p`-site cell as `[l, out, in, r]`, with the
/// bond leg on the left (`bond_left`) or on the right.
fn embed_half(half: &Tensor, k: usize, p: usize, bond_left: bool) -> Result<Tensor> {
    let q = 1usize << p;
    let b = if bond_left { half.shape()[0] } else { half.shape()[2] };
    // normalize to [b, out, in]
    let half = if bond_left { half.clone() } else { half.permute(&[2, 0, 1])? };
    let before = Tensor::eye(1usize << k);
    let after = Tensor::eye(1usize << (p - k - 1));
    let mut slices = Vec::with_capacity(b);
    for beta in 0..b {
        let m = Tensor::from_fn(&[2, 2], |i| half.get(&[beta, i[0], i[1]]));
        slices.push(before.kron(&m)?.kron(&after)?);
    }
    let data: Vec<C64> = slices.iter().flat_map(|s| s.data().iter().copied()).collect();
    let t = Tensor::new(vec![b, q, q], data)?;
    if bond_left {
        t.reshape(&[b, q, q, 1])
    } else {
        t.permute(&[1, 2, 0])?.reshape(&[1, q, q, b])
    }
}

/// Splits a two-site gate `(out1 out2, in1 in2)` across the bond into
/// `left [out1, in1, b]` and `right [b, out2, in2]` with balanced weights.
pub fn gate_to_mpo_tensors(gate: &Tensor) -> Result<(Tensor, Tensor)> {
    if gate.shape() != [4, 4] {
        return Err(Error::Dimension(format!("expected a 4x4 two-site gate, got {:?}", gate.shape())));
    }
    // [o1, o2, i1, i2] -> [o1, i1, o2, i2]
    let t = gate.reshaped(&[2, 2, 2, 2])?.permute(&[0, 2, 1, 3])?;
    let svd = svd_truncate(&t, &[0, 1], 4, 0.0)?;
    let k = svd.s.len();
    let mut left = svd.u;
    for (j, z) in left.data_mut().iter_mut().enumerate() {
        *z *= svd.s[j % k].sqrt();
    }
    let mut right = svd.vdag;
    for (j, z) in right.data_mut().iter_mut().enumerate() {
        *z *= svd.s[j / 4].sqrt();
    }
    Ok((left, right.reshape(&[k, 2, 2])?))
}

/// Time steps of a run: consecutive stages of `(plan, n_steps)`.
#[derive(Clone, Debug, Default)]
pub struct Schedule {
    stages: Vec<(TrotterPlan, usize)>,
}

impl Schedule {
    pub fn uniform(plan: TrotterPlan, n_steps: usize) -> Self {
        Self { stages: vec![(plan, n_steps)] }
    }

    pub fn push(&mut self, plan: TrotterPlan, n_steps: usize) {
        self.stages.push((plan, n_steps));
    }

    pub fn stages(&self) -> &[(TrotterPlan, usize)] {
        &self.stages
    }

    pub fn n_steps(&self) -> usize {
        self.stages.iter().map(|s| s.1).sum()
    }

    pub fn total_time(&self) -> f64 {
        self.stages.iter().map(|(p, n)| p.delta() * *n as f64).sum()
    }

    /// Plans in step order, one entry per step.
    pub fn steps(&self) -> impl Iterator<Item = &TrotterPlan> {
        self.stages.iter().flat_map(|(p, n)| std::iter::repeat_n(p, *n))
    }

    /// Same stages with the model replaced (all stages share it).
    pub fn with_model(&self, model: ModelSpec) -> Result<Self> {
        let stages = self
            .stages
            .iter()
            .map(|(p, n)| Ok((TrotterPlan::new(model, p.delta(), p.splitting())?, *n)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { stages })
    }

    /// The first `n` steps.
    pub fn truncated(&self, mut n: usize) -> Self {
        let mut stages = Vec::new();
        for (p, k) in &self.stages {
            if n == 0 {
                break;
            }
            let take = (*k).min(n);
            stages.push((p.clone(), take));
            n -= take;
        }
        Self { stages }
    }
}
