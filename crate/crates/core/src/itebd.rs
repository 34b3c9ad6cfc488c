//! Infinite time-evolving block decimation on a two-site unit cell.
//!
//! The state `… λ_B Γ_A λ_A Γ_B λ_B …` is kept in Vidal form: `λ_A` sits on
//! the bond from A to B, `λ_B` on the bond from B to the next A. Site A has
//! even chain coordinates.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::tensor::{contract, eigh, svd_truncate, Tensor};
use crate::trotter::{Evolution, Splitting, TrotterPlan};

/// Weights below this fraction of the largest are treated as zero when
/// dividing by a singular-value vector.
const PINV_CUTOFF: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bond {
    /// From A to the B on its right; weights `λ_A`.
    AB,
    /// From B to the A on its right; weights `λ_B`.
    BA,
}

#[derive(Clone, Debug)]
pub struct UniformState {
    gamma: [Tensor; 2],
    lambda: [Vec<f64>; 2],
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn pinv(values: &[f64]) -> Vec<f64> {
    let top = values.iter().copied().fold(0.0, f64::max);
    values.iter().map(|&v| if v > PINV_CUTOFF * top { 1.0 / v } else { 0.0 }).collect()
}

/// Scales axis `axis` of `t` by `w`.
fn scale_axis(t: &Tensor, axis: usize, w: &[f64]) -> Tensor {
    let shape = t.shape().to_vec();
    let inner: usize = shape[axis + 1..].iter().product();
    let extent = shape[axis];
    let mut out = t.clone();
    for (k, z) in out.data_mut().iter_mut().enumerate() {
        *z *= w[(k / inner) % extent];
    }
    out
}

fn normalize(values: &mut [f64]) -> f64 {
    let n = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        values.iter_mut().for_each(|v| *v /= n);
    }
    n
}

impl UniformState {
    /// Translation-invariant product state.
    pub fn product(local: &[C64]) -> Result<Self> {
        let nrm = local.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(nrm > 0.0) {
            return Err(Error::ZeroNorm);
        }
        let v: Vec<C64> = local.iter().map(|z| z / nrm).collect();
        let g = Tensor::new(vec![1, v.len(), 1], v)?;
        Ok(Self { gamma: [g.clone(), g], lambda: [vec![1.0], vec![1.0]] })
    }

    pub fn gamma(&self, site: usize) -> &Tensor {
        &self.gamma[site]
    }

    pub fn lambda(&self, bond: Bond) -> &[f64] {
        match bond {
            Bond::AB => &self.lambda[0],
            Bond::BA => &self.lambda[1],
        }
    }

    pub fn bond_dims(&self) -> [usize; 2] {
        [self.lambda[0].len(), self.lambda[1].len()]
    }

    pub fn max_bond(&self) -> usize {
        self.lambda[0].len().max(self.lambda[1].len())
    }

    /// `(left site, right site, inner weights, outer weights)` of a bond.
    fn roles(bond: Bond) -> (usize, usize, usize, usize) {
        match bond {
            Bond::AB => (0, 1, 0, 1),
            Bond::BA => (1, 0, 1, 0),
        }
    }

    /// `λ_out Γ_L λ_in Γ_R λ_out` as `[a, s, t, b]`.
    fn theta(&self, bond: Bond) -> Result<Tensor> {
        let (l, r, inner, outer) = Self::roles(bond);
        let left = scale_axis(&scale_axis(&self.gamma[l], 0, &self.lambda[outer]), 2, &self.lambda[inner]);
        let right = scale_axis(&self.gamma[r], 2, &self.lambda[outer]);
        contract(&left, &[2], &right, &[0])
    }

    /// `‖θ‖²` of the cell across `bond`; one in exact canonical form.
    pub fn cell_norm_sqr(&self, bond: Bond) -> Result<f64> {
        Ok(self.theta(bond)?.norm_sqr())
    }

    /// Applies a 4×4 gate (left site major) across `bond` and truncates.
    /// Returns the discarded weight relative to the updated norm².
    pub fn apply_bond_gate(&mut self, bond: Bond, gate: &Tensor, max_bond: usize, rel_cutoff: f64) -> Result<f64> {
        let d = self.gamma[0].shape()[1];
        if gate.shape() != [d * d, d * d] {
            return Err(Error::Dimension(format!("bond gate must be {0}x{0}", d * d)));
        }
        let (l, r, inner, outer) = Self::roles(bond);
        let theta = self.theta(bond)?;
        let g = gate.reshaped(&[d, d, d, d])?;
        let updated = contract(&g, &[2, 3], &theta, &[1, 2])?.permute(&[2, 0, 1, 3])?;
        let total = updated.norm_sqr();
        if !(total > f64::MIN_POSITIVE) || !total.is_finite() {
            return Err(Error::Underflow);
        }
        let svd = svd_truncate(&updated, &[0, 1], max_bond, rel_cutoff).map_err(|e| match e {
            Error::ZeroTensor => Error::Underflow,
            other => other,
        })?;
        let mut s = svd.s;
        normalize(&mut s);
        let inv = pinv(&self.lambda[outer]);
        self.gamma[l] = scale_axis(&svd.u, 0, &inv);
        self.gamma[r] = scale_axis(&svd.vdag, 2, &inv);
        self.lambda[inner] = s;
        Ok(svd.discarded_weight / total)
    }

    /// Applies a single-site gate to both sites of the cell.
    pub fn apply_site_gate(&mut self, gate: &Tensor) -> Result<()> {
        for g in &mut self.gamma {
            *g = contract(gate, &[1], g, &[1])?.permute(&[1, 0, 2])?;
        }
        Ok(())
    }

    /// Largest violation of the four Vidal orthonormality conditions, each
    /// weighted by the Schmidt values on its open bonds. This is the
    /// fixed-point test of the cell transfer matrices; unweighted, directions
    /// with vanishing weight would amplify rounding by `1/λ_min²`.
    pub fn canonical_deviation(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (site, left_w, right_w) in [(0, 1, 0), (1, 0, 1)] {
            let g = &self.gamma[site];
            // Σ_{s,b} Γ[a,s,b] λr[b]² Γ*[a',s,b] = δ, weighted by λl[a] λl[a']
            let gr = scale_axis(g, 2, &self.lambda[right_w]);
            let right = contract(&gr, &[1, 2], &gr.conj(), &[1, 2])?;
            // Σ_{a,s} λl[a]² Γ*[a,s,b] Γ[a,s,b'] = δ, weighted by λr[b] λr[b']
            let gl = scale_axis(g, 0, &self.lambda[left_w]);
            let left = contract(&gl.conj(), &[0, 1], &gl, &[0, 1])?;
            for (m, w) in [(right, &self.lambda[left_w]), (left, &self.lambda[right_w])] {
                let n = m.shape()[0];
                let diff = m.add_scaled(&Tensor::eye(n), c(-1.0))?;
                worst = worst.max(scale_axis(&scale_axis(&diff, 0, w), 1, w).norm());
            }
        }
        Ok(worst)
    }

    /// Restores canonical form by the fixed-point gauge transformation of
    /// the two-site cell, keeping at most `max_bond` weights on each bond.
    pub fn recanonicalize(&mut self, max_bond: usize) -> Result<()> {
        let d = self.gamma[0].shape()[1];
        // cell tensor Γ_A λ_A Γ_B as [a, (s t), b] with outer weights λ_B
        let ga = scale_axis(&self.gamma[0], 2, &self.lambda[0]);
        let cell = contract(&ga, &[2], &self.gamma[1], &[0])?;
        let (da, db) = (cell.shape()[0], cell.shape()[3]);
        let cell = cell.reshape(&[da, d * d, db])?;
        let lam = self.lambda[1].clone();

        let m = scale_axis(&cell, 2, &lam); // Γ λ
        let nl = scale_axis(&cell, 0, &lam); // λ Γ
        let right = fixed_point(|x| {
            let t = contract(&m, &[2], x, &[0])?; // [a, s, b']
            contract(&t, &[1, 2], &m.conj(), &[1, 2])
        }, da)?;
        let left = fixed_point(|y| {
            let t = contract(y, &[1], &nl, &[0])?; // [a', s, b]
            contract(&nl.conj(), &[0, 1], &t, &[0, 1])
        }, da)?;

        let (rv, ru) = eigh(&right)?;
        let (lv, lu) = eigh(&left)?;
        let keep = |vals: &[f64]| -> Vec<usize> {
            let top = vals.iter().copied().fold(0.0, f64::max);
            (0..vals.len()).filter(|&i| vals[i] > PINV_CUTOFF * top).collect()
        };
        let kr = keep(&rv);
        let kl = keep(&lv);
        // X = U_r √r (columns kept), Y = √l U_l†
        let x = Tensor::from_fn(&[da, kr.len()], |i| ru.get(&[i[0], kr[i[1]]]) * rv[kr[i[1]]].sqrt());
        let x_inv = Tensor::from_fn(&[kr.len(), da], |i| ru.get(&[i[1], kr[i[0]]]).conj() / rv[kr[i[0]]].sqrt());
        let y = Tensor::from_fn(&[kl.len(), da], |i| lu.get(&[i[1], kl[i[0]]]).conj() * lv[kl[i[0]]].sqrt());
        let y_inv = Tensor::from_fn(&[da, kl.len()], |i| lu.get(&[i[0], kl[i[1]]]) / lv[kl[i[1]]].sqrt());

        let core = scale_axis(&y, 1, &lam).matmul(&x)?;
        let svd = svd_truncate(&core, &[0], usize::MAX, 0.0)?;
        let mut new_lam = svd.s.clone();
        normalize(&mut new_lam);
        // Γ'' = Q X⁻¹ Γ Y⁻¹ P
        let left_map = svd.vdag.matmul(&x_inv)?;
        let right_map = y_inv.matmul(&svd.u)?;
        let t = contract(&left_map, &[1], &cell, &[0])?;
        let new_cell = contract(&t, &[2], &right_map, &[0])?;

        // split back: λ' Γ'' λ' = U S V
        let k = new_lam.len();
        let theta = scale_axis(&scale_axis(&new_cell, 0, &new_lam), 2, &new_lam).reshape(&[k, d, d, k])?;
        let split = svd_truncate(&theta, &[0, 1], max_bond, 0.0)?;
        let mut s = split.s;
        normalize(&mut s);
        let inv = pinv(&new_lam);
        self.gamma[0] = scale_axis(&split.u, 0, &inv);
        self.gamma[1] = scale_axis(&split.vdag, 2, &inv);
        self.lambda = [s, new_lam];
        // fix the overall scale so the orthonormality conditions hold exactly
        for site in 0..2 {
            let right_w = site;
            let gr = scale_axis(&self.gamma[site], 2, &self.lambda[right_w]);
            let tr = gr.norm_sqr() / gr.shape()[0] as f64;
            if tr > 0.0 {
                self.gamma[site].scale(c(1.0 / tr.sqrt()));
            }
        }
        Ok(())
    }

    /// Single-site expectation value averaged over the cell.
    pub fn local_expectation(&self, op: &Tensor) -> Result<C64> {
        let mut total = C64::new(0.0, 0.0);
        for (site, left_w, right_w) in [(0, 1, 0), (1, 0, 1)] {
            let th = scale_axis(&scale_axis(&self.gamma[site], 0, &self.lambda[left_w]), 2, &self.lambda[right_w]);
            let oth = contract(op, &[1], &th, &[1])?.permute(&[1, 0, 2])?;
            let num: C64 = th.data().iter().zip(oth.data()).map(|(a, b)| a.conj() * b).sum();
            total += num / th.norm_sqr();
        }
        Ok(total * 0.5)
    }

    /// Two-site expectation value of a 4×4 operator across `bond`.
    pub fn bond_expectation(&self, bond: Bond, op: &Tensor) -> Result<C64> {
        let d = self.gamma[0].shape()[1];
        let th = self.theta(bond)?;
        let o = op.reshaped(&[d, d, d, d])?;
        let oth = contract(&o, &[2, 3], &th, &[1, 2])?.permute(&[2, 0, 1, 3])?;
        let num: C64 = th.data().iter().zip(oth.data()).map(|(a, b)| a.conj() * b).sum();
        Ok(num / th.norm_sqr())
    }

    /// Energy per site of the plan's model.
    pub fn energy_per_site(&self, plan: &TrotterPlan) -> Result<f64> {
        let m = plan.model();
        let e_ab = self.bond_expectation(Bond::AB, &m.bond_term(0, 0.5, 0.5))?;
        let e_ba = self.bond_expectation(Bond::BA, &m.bond_term(1, 0.5, 0.5))?;
        Ok(0.5 * (e_ab.re + e_ba.re))
    }
}

/// Dominant fixed point of a completely positive map on `n×n` matrices,
/// normalized to unit trace.
fn fixed_point(map: impl Fn(&Tensor) -> Result<Tensor>, n: usize) -> Result<Tensor> {
    let mut x = Tensor::eye(n).scaled(c(1.0 / n as f64));
    for _ in 0..20_000 {
        let mut y = map(&x)?;
        // keep it Hermitian against rounding drift
        let yh = y.dagger()?;
        y = y.add_scaled(&yh, c(1.0))?.scaled(c(0.5));
        let tr = y.trace()?.re;
        if !(tr.abs() > 0.0) || !tr.is_finite() {
            return Err(Error::Underflow);
        }
        y.scale(c(1.0 / tr));
        let change = y.distance(&x)?;
        x = y;
        if change < 1e-13 {
            return Ok(x);
        }
    }
    Err(Error::NonConvergence { iterations: 20_000, residual: f64::NAN })
}

/// Ordered bond updates realizing one step of `plan` on the infinite chain.
/// The half-field layers of the field/ZZ splitting are merged into the ZZ
/// gates on either side, which is exact because all ZZ gates commute.
pub fn bond_sequence(plan: &TrotterPlan) -> Result<Vec<(Bond, Tensor)>> {
    if plan.model().impurity.is_some_and(|g0| g0 != plan.model().g) {
        return Err(Error::InvalidParameter("iTEBD needs a translation-invariant model".into()));
    }
    match plan.splitting() {
        Splitting::BondSymmetric => Ok(vec![
            (Bond::AB, plan.bond_gate(0, 0.5)?),
            (Bond::BA, plan.bond_gate(1, 1.0)?),
            (Bond::AB, plan.bond_gate(0, 0.5)?),
        ]),
        Splitting::FieldZz => {
            let f = plan.site_gate(0, 0.5)?;
            let ff = f.kron(&f)?;
            Ok(vec![
                (Bond::BA, plan.bond_gate(1, 1.0)?.matmul(&ff)?),
                (Bond::AB, ff.matmul(&plan.bond_gate(0, 1.0)?)?),
            ])
        }
    }
}

#[derive(Clone, Debug)]
pub struct ItebdOptions {
    pub max_bond: usize,
    pub rel_cutoff: f64,
}

impl Default for ItebdOptions {
    fn default() -> Self {
        Self { max_bond: 32, rel_cutoff: 1e-12 }
    }
}

/// Evolution driver accumulating the discarded weight.
#[derive(Clone, Debug)]
pub struct Itebd {
    pub state: UniformState,
    pub trunc_error: f64,
    pub steps: usize,
    opts: ItebdOptions,
}

impl Itebd {
    pub fn new(state: UniformState, opts: ItebdOptions) -> Self {
        Self { state, trunc_error: 0.0, steps: 0, opts }
    }

    /// One Trotter step. Imaginary-time steps end with a re-canonicalization.
    pub fn step(&mut self, plan: &TrotterPlan, gates: &[(Bond, Tensor)]) -> Result<f64> {
        let mut err = 0.0;
        for (bond, gate) in gates {
            err += self.state.apply_bond_gate(*bond, gate, self.opts.max_bond, self.opts.rel_cutoff)?;
        }
        if plan.model().evolution == Evolution::Imaginary {
            self.state.recanonicalize(self.opts.max_bond)?;
        }
        self.trunc_error += err;
        self.steps += 1;
        Ok(err)
    }

    /// `n` steps of `plan`.
    pub fn run(&mut self, plan: &TrotterPlan, n: usize) -> Result<()> {
        let gates = bond_sequence(plan)?;
        for _ in 0..n {
            self.step(plan, &gates)?;
        }
        Ok(())
    }
}
