//! Transverse contraction of the space-time network of an infinite chain.
//!
//! The network `⟨ψ(t)|O|ψ(t)⟩` is cut into columns, one per spatial unit
//! cell. Each column is an MPO along the time direction whose "physical"
//! legs are the horizontal bonds to the neighbouring columns. Its MPO bonds
//! are the vertical spin indices:
//!
//! * site `0`: the initial state of the cell (ket),
//! * site `k = 1..n`: Trotter step `k` (ket), with insertions applied after it,
//! * site `2n+1−k`: the conjugate of step `k` (bra),
//! * site `2n+1`: the conjugate initial state.
//!
//! A column acts on a right vector through its right legs; left vectors are
//! handled through the transposed column. All contractions `⟨L|X|R⟩` are
//! bilinear.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::folding::{fold_column, identity_pairs};
use crate::mps::{applied_norm_sqr, fit_pass, inner, sandwich, Direction, Mpo, Mps};
use crate::tensor::{contract, Tensor};
use crate::trotter::Schedule;

/// A single-site operator applied to the ket after `slot` steps at chain
/// coordinate `site`.
#[derive(Clone, Debug)]
pub struct Insertion {
    pub slot: usize,
    pub site: i64,
    pub op: Tensor,
}

/// The time-direction network of a uniform product initial state evolved by
/// a schedule, cut into cell columns.
#[derive(Clone, Debug)]
pub struct Network {
    schedule: Schedule,
    initial: Vec<C64>,
    folded: bool,
}

impl Network {
    pub fn new(schedule: Schedule, initial: Vec<C64>, folded: bool) -> Result<Self> {
        if initial.len() != 2 {
            return Err(Error::Dimension("initial site state must be two-dimensional".into()));
        }
        let periods: Vec<usize> = schedule.stages().iter().map(|(p, _)| p.period()).collect();
        if periods.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::InvalidParameter("all stages must share one splitting".into()));
        }
        Ok(Self { schedule, initial, folded })
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn is_folded(&self) -> bool {
        self.folded
    }

    pub fn n_steps(&self) -> usize {
        self.schedule.n_steps()
    }

    pub fn period(&self) -> usize {
        self.schedule.stages().first().map_or(1, |(p, _)| p.period())
    }

    /// Cell index and offset within the cell of a chain coordinate.
    pub fn cell_of(&self, site: i64) -> (i64, usize) {
        let p = self.period() as i64;
        (site.div_euclid(p), site.rem_euclid(p) as usize)
    }

    /// The same network with the impurity removed.
    pub fn uniform(&self) -> Result<Self> {
        let model = match self.schedule.stages().first() {
            Some((p, _)) => p.model().without_impurity(),
            None => return Ok(self.clone()),
        };
        Ok(Self { schedule: self.schedule.with_model(model)?, initial: self.initial.clone(), folded: self.folded })
    }

    pub fn has_impurity(&self) -> bool {
        self.schedule.stages().iter().any(|(p, _)| {
            let m = p.model();
            m.impurity.is_some_and(|g0| g0 != m.g)
        })
    }

    /// Range of cells whose columns differ from the uniform column.
    pub fn defect_cells(&self) -> Option<(i64, i64)> {
        if !self.has_impurity() {
            return None;
        }
        // bond-symmetric gates carry site 0's field into the bond (−1, 0),
        // which belongs to cell −1
        if self.period() == 2 {
            Some((-1, 0))
        } else {
            Some((0, 0))
        }
    }

    /// Unfolded column of height `2n+2` for one cell.
    pub fn unfolded_column(&self, cell: i64, insertions: &[Insertion]) -> Result<Mpo> {
        let p = self.period();
        let first = cell * p as i64;
        let n = self.n_steps();
        for ins in insertions {
            if ins.slot > n {
                return Err(Error::InvalidParameter(format!("insertion slot {} beyond {n} steps", ins.slot)));
            }
        }
        let local = |slot: usize| -> Result<Option<Tensor>> {
            let mut op: Option<Tensor> = None;
            for ins in insertions.iter().filter(|i| i.slot == slot && self.cell_of(i.site).0 == cell) {
                let off = self.cell_of(ins.site).1;
                let eye = Tensor::eye(2);
                let mut m = Tensor::eye(1);
                for k in 0..p {
                    m = m.kron(if k == off { &ins.op } else { &eye })?;
                }
                op = Some(match op {
                    None => m,
                    Some(prev) => m.matmul(&prev)?,
                });
            }
            Ok(op)
        };

        let mut init = Tensor::new(vec![1], vec![C64::new(1.0, 0.0)])?;
        for _ in 0..p {
            init = contract(&init, &[], &Tensor::new(vec![2], self.initial.clone())?, &[])?;
            let len = init.len();
            init = init.reshape(&[len])?;
        }
        let q = init.len();
        // the bra layer keeps the bare initial state
        let bra = init.conj().reshape(&[q, 1, 1, 1])?;
        if let Some(op) = local(0)? {
            init = contract(&op, &[1], &init, &[0])?;
        }

        let mut ket = Vec::with_capacity(n + 1);
        ket.push(init.reshape(&[1, 1, 1, q])?);
        let mut steps = Vec::with_capacity(n);
        for (k, plan) in self.schedule.steps().enumerate() {
            let s = plan.cell_step(first)?; // [l, out, in, r]
            let k_s = match local(k + 1)? {
                Some(op) => contract(&op, &[1], &s, &[1])?.permute(&[1, 0, 2, 3])?,
                None => s.clone(),
            };
            ket.push(k_s.permute(&[2, 0, 3, 1])?);
            steps.push(s);
        }
        let mut sites = ket;
        for s in steps.iter().rev() {
            sites.push(s.conj().permute(&[1, 0, 3, 2])?);
        }
        sites.push(bra);
        Mpo::new(sites)
    }

    /// The column used by this network: folded or unfolded.
    pub fn column(&self, cell: i64, insertions: &[Insertion]) -> Result<Mpo> {
        let col = self.unfolded_column(cell, insertions)?;
        if self.folded {
            fold_column(&col)
        } else {
            Ok(col)
        }
    }

    /// Starting vector for the power iteration: identity pairs when folded,
    /// a seeded random product otherwise.
    pub fn start_vector(&self, column: &Mpo, seed: u64) -> Result<Mps> {
        let phys = column.in_dims();
        if self.folded {
            identity_pairs(&phys)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Mps::random(&phys, 1, &mut rng)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Debug)]
pub struct EigenOptions {
    pub max_bond: usize,
    /// Convergence threshold on the relative eigenvalue change and on
    /// `1 − |⟨v_k|v_{k+1}⟩|`.
    pub tol: f64,
    pub max_iters: usize,
    /// Fitting passes per application of the column.
    pub sweeps: usize,
    /// Singular values below this fraction of the largest are dropped after
    /// every application.
    pub rel_cutoff: f64,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { max_bond: 32, tol: 1e-10, max_iters: 200, sweeps: 1, rel_cutoff: 1e-12, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct EigenPair {
    /// Unit-norm dominant eigenvector.
    pub vector: Mps,
    pub lambda: C64,
    /// `‖E v − λ v‖` for the final iterate.
    pub residual: f64,
    pub iterations: usize,
    /// Norm² lost in the final application: fit infidelity plus discarded
    /// singular weight.
    pub trunc_error: f64,
}

/// Applies `op` to `x` within bond `max_bond`. Returns the result with its
/// norm in `log_norm` and the relative norm² lost.
pub fn apply_compressed(op: &Mpo, x: &Mps, opts: &EigenOptions, rng: &mut ChaCha8Rng) -> Result<(Mps, f64)> {
    let guess = if op.out_dims() == x.phys_dims() {
        x.expanded(opts.max_bond, 1e-4, rng)?
    } else {
        Mps::random(&op.out_dims(), opts.max_bond, rng)?
    };
    let unit = x.clone().with_log_norm(0.0);
    let mut pass = fit_pass(op, &unit, &guess, Direction::LeftToRight, Some((opts.max_bond, opts.rel_cutoff)))?;
    for k in 1..(2 * opts.sweeps).max(2) {
        let direction = if k % 2 == 1 { Direction::RightToLeft } else { Direction::LeftToRight };
        pass = fit_pass(op, &unit, &pass.state, direction, Some((opts.max_bond, opts.rel_cutoff)))?;
    }
    let ov = pass.overlap;
    let fit_loss = (1.0 - ov * ov / applied_norm_sqr(op, &unit)?).max(0.0);
    let log = x.log_norm() + ov.ln();
    Ok((pass.state.with_log_norm(log), fit_loss + pass.discarded))
}

/// Dominant eigenvector of a column by power iteration. Every application
/// is a single truncating fit pass; passes alternate direction so that each
/// iterate is already canonical where the next pass starts.
pub fn dominant_eigenpair(column: &Mpo, side: Side, start: &Mps, opts: &EigenOptions) -> Result<EigenPair> {
    let op = match side {
        Side::Right => column.clone(),
        Side::Left => column.transpose(),
    };
    let tag = match side {
        Side::Right => 0x5eed_0001,
        Side::Left => 0x5eed_0002,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ tag);
    let n = start.len();
    let mut v = start.normalized(0)?.with_log_norm(0.0);
    let mut previous: Option<Mps> = None;
    let mut lambda_prev: Option<C64> = None;
    let mut alternating = 0usize;
    let mut residual = f64::INFINITY;
    let mut settled = false;
    let loose = opts.tol.sqrt();
    let mut discarded = 0.0;
    for it in 1..=opts.max_iters {
        let direction = if v.center() == Some(n - 1) && n > 1 { Direction::RightToLeft } else { Direction::LeftToRight };
        // Expanding and trimming is the expensive part of an application, so
        // the bond structure is frozen once the iteration has settled.
        let expand = !settled && v.can_grow(opts.max_bond);
        let (guess, trim) = if expand {
            (v.expanded(opts.max_bond, 1e-4, &mut rng)?, Some((opts.max_bond, opts.rel_cutoff)))
        } else {
            (v.clone(), None)
        };
        let mut pass = fit_pass(&op, &v, &guess, direction, trim)?;
        for _ in 1..opts.sweeps {
            let back = match pass.state.center() {
                Some(0) => Direction::LeftToRight,
                _ => Direction::RightToLeft,
            };
            pass = fit_pass(&op, &v, &pass.state, back, trim)?;
        }
        if trim.is_some() {
            discarded = pass.discarded;
        }
        let ov = pass.overlap;
        let mut y = pass.state.with_log_norm(0.0);
        let c = inner(&v, &y)?;
        let lambda = c * ov;
        if c.norm() > 0.0 {
            y.scale(c.conj() / c.norm());
        }
        residual = ov * (1.0 - c.norm_sqr()).max(0.0).sqrt();
        let dl = lambda_prev.map_or(f64::INFINITY, |p| (lambda - p).norm() / lambda.norm().max(f64::MIN_POSITIVE));
        if dl < loose && c.norm() > 1.0 - loose {
            settled = true;
        }
        if dl < opts.tol && c.norm() > 1.0 - opts.tol {
            let norm_sqr = applied_norm_sqr(&op, &v)?;
            let fit_loss = (1.0 - ov * ov / norm_sqr).max(0.0);
            return Ok(EigenPair { vector: y, lambda, residual, iterations: it, trunc_error: fit_loss + discarded });
        }
        if let Some(prev) = &previous {
            let back = inner(prev, &y)?.norm();
            if back > 1.0 - 1e-6 && c.norm() < 1.0 - 1e-3 {
                alternating += 1;
                if alternating >= 3 {
                    let l0 = lambda_prev.unwrap_or(lambda);
                    return Err(Error::Degenerate { first: format!("{l0:.6e}"), second: format!("{lambda:.6e}") });
                }
            } else {
                alternating = 0;
            }
        }
        lambda_prev = Some(lambda);
        previous = Some(std::mem::replace(&mut v, y));
    }
    Err(Error::NonConvergence { iterations: opts.max_iters, residual })
}

/// Dominant left and right eigenvectors of the uniform column.
#[derive(Clone, Debug)]
pub struct Environment {
    pub left: EigenPair,
    pub right: EigenPair,
    pub column: Mpo,
    /// `⟨L|E|R⟩ / ⟨L|R⟩`.
    pub lambda: C64,
}

impl Environment {
    pub fn trunc_error(&self) -> f64 {
        self.left.trunc_error + self.right.trunc_error
    }

    pub fn bond(&self) -> usize {
        self.left.vector.max_bond().max(self.right.vector.max_bond())
    }
}

/// Converges `⟨L|` and `|R⟩` of the uniform column of `network`, starting
/// from `warm` vectors when their shape fits.
pub fn environment(network: &Network, opts: &EigenOptions, warm: Option<(&Mps, &Mps)>) -> Result<Environment> {
    let uniform = network.uniform()?;
    let column = uniform.column(0, &[])?;
    let fits = |m: &Mps, dims: &[usize]| m.phys_dims() == dims;
    let (l0, r0) = match warm {
        Some((l, r)) if fits(l, &column.out_dims()) && fits(r, &column.in_dims()) => (l.clone(), r.clone()),
        _ => {
            let r = uniform.start_vector(&column, opts.seed)?;
            let l = uniform.start_vector(&column.transpose(), opts.seed.wrapping_add(1))?;
            (l, r)
        }
    };
    let right = dominant_eigenpair(&column, Side::Right, &r0, opts)?;
    let left = dominant_eigenpair(&column, Side::Left, &l0, opts)?;
    let num = sandwich(&left.vector, &column, &right.vector)?;
    let den = crate::mps::dot(&left.vector, &right.vector)?;
    if den.norm() < 1e-14 {
        return Err(Error::IllConditioned(den.norm()));
    }
    Ok(Environment { left, right, column, lambda: num / den })
}

/// Value of a finite window together with the truncation it incurred.
#[derive(Clone, Copy, Debug)]
pub struct WindowValue {
    pub value: C64,
    pub trunc_error: f64,
}

/// `⟨L| C_0 C_1 … C_m |R⟩` contracted from both ends towards the middle column.
/// Window contraction as `(value, log_scale, trunc_error)`: the true value
/// is `value · exp(log_scale)`, which keeps long imaginary-time windows
/// representable.
fn window_contract(env: &Environment, columns: &[Mpo], opts: &EigenOptions) -> Result<(C64, f64, f64)> {
    let m = columns.len();
    let mid = m / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x0077_1d0e);
    let mut err = 0.0;
    let mut right = env.right.vector.clone();
    for c in columns[mid + 1..].iter().rev() {
        let (v, w) = apply_compressed(c, &right, opts, &mut rng)?;
        right = v;
        err += w;
    }
    let mut left = env.left.vector.clone();
    for c in &columns[..mid] {
        let (v, w) = apply_compressed(&c.transpose(), &left, opts, &mut rng)?;
        left = v;
        err += w;
    }
    let log = left.log_norm() + right.log_norm();
    let value = sandwich(&left.with_log_norm(0.0), &columns[mid], &right.with_log_norm(0.0))?;
    Ok((value, log, err))
}

fn ratio(num: C64, den: C64) -> Result<C64> {
    if den.norm() < 1e-14 || !den.norm().is_finite() {
        return Err(Error::IllConditioned(den.norm()));
    }
    Ok(num / den)
}

/// Normalized `⟨L| X_lo … X_hi |R⟩ / ⟨L| C_lo … C_hi |R⟩` over the cells
/// spanned by the insertions and the network's defect cells.
pub fn window(env: &Environment, network: &Network, insertions: &[Insertion], opts: &EigenOptions) -> Result<WindowValue> {
    let mut lo = i64::MAX;
    let mut hi = i64::MIN;
    for ins in insertions {
        let c = network.cell_of(ins.site).0;
        lo = lo.min(c);
        hi = hi.max(c);
    }
    if let Some((a, b)) = network.defect_cells() {
        lo = lo.min(a);
        hi = hi.max(b);
    }
    if lo > hi {
        lo = 0;
        hi = 0;
    }
    let mut with = Vec::new();
    let mut without = Vec::new();
    for c in lo..=hi {
        with.push(network.column(c, insertions)?);
        without.push(network.column(c, &[])?);
    }
    let (num, log_num, e1) = window_contract(env, &with, opts)?;
    let (den, log_den, e2) = window_contract(env, &without, opts)?;
    let value = ratio(num, den)? * (log_num - log_den).exp();
    Ok(WindowValue { value, trunc_error: e1 + e2 })
}

/// `⟨O(t)⟩` at chain coordinate `site` (Eq. `⟨L|E_O|R⟩/⟨L|E|R⟩` when the
/// chain is uniform).
pub fn expectation(env: &Environment, network: &Network, op: &Tensor, site: i64, opts: &EigenOptions) -> Result<WindowValue> {
    let ins = [Insertion { slot: network.n_steps(), site, op: op.clone() }];
    if network.defect_cells().is_none() {
        let (cell, _) = network.cell_of(site);
        let col = network.column(cell, &ins)?;
        let num = sandwich(&env.left.vector, &col, &env.right.vector)?;
        let den = sandwich(&env.left.vector, &env.column, &env.right.vector)?;
        return Ok(WindowValue { value: ratio(num, den)?, trunc_error: 0.0 });
    }
    window(env, network, &ins, opts)
}

/// Energy per site of the final stage's model in a uniform network, from
/// `⟨Z_0 Z_1⟩`, `⟨X_0⟩` and `⟨Z_0⟩`.
pub fn energy_per_site(env: &Environment, network: &Network, opts: &EigenOptions) -> Result<WindowValue> {
    if network.has_impurity() {
        return Err(Error::InvalidParameter("energy per site needs a uniform chain".into()));
    }
    let Some((plan, _)) = network.schedule().stages().last() else {
        return Err(Error::InvalidParameter("empty schedule".into()));
    };
    let m = plan.model();
    let n = network.n_steps();
    let z = crate::trotter::Pauli::Z.matrix();
    let zz = window(
        env,
        network,
        &[Insertion { slot: n, site: 0, op: z.clone() }, Insertion { slot: n, site: 1, op: z.clone() }],
        opts,
    )?;
    let x = expectation(env, network, &crate::trotter::Pauli::X.matrix(), 0, opts)?;
    let zl = expectation(env, network, &z, 0, opts)?;
    Ok(WindowValue {
        value: -(zz.value * m.j + x.value * m.g + zl.value * m.h),
        trunc_error: zz.trunc_error + x.trunc_error + zl.trunc_error,
    })
}

/// `⟨ψ0| U(t2)† O2_x U(t2,t1) O1_{x+Δ} U(t1) |ψ0⟩` with `x = 0`; `slot1` is
/// the number of steps up to `t1`.
pub fn two_time_correlator(
    env: &Environment,
    network: &Network,
    o1: &Tensor,
    slot1: usize,
    o2: &Tensor,
    dx: i64,
    opts: &EigenOptions,
) -> Result<WindowValue> {
    if slot1 > network.n_steps() {
        return Err(Error::InvalidParameter("t1 must not exceed t2".into()));
    }
    let ins = [
        Insertion { slot: slot1, site: dx, op: o1.clone() },
        Insertion { slot: network.n_steps(), site: 0, op: o2.clone() },
    ];
    window(env, network, &ins, opts)
}

/// `⟨O⟩` at every coordinate in `sites`, reusing partial contractions:
/// each value costs one column application plus two sandwiches.
pub fn impurity_profile(
    env: &Environment,
    network: &Network,
    op: &Tensor,
    sites: &[i64],
    opts: &EigenOptions,
) -> Result<Vec<(i64, WindowValue)>> {
    let n = network.n_steps();
    let Some((d_lo, d_hi)) = network.defect_cells() else {
        return sites.iter().map(|&x| Ok((x, expectation(env, network, op, x, opts)?))).collect();
    };
    let cells: Vec<i64> = sites.iter().map(|&x| network.cell_of(x).0).collect();
    let c_min = cells.iter().copied().min().unwrap_or(0).min(d_lo);
    let c_max = cells.iter().copied().max().unwrap_or(0).max(d_hi);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x0070_f11e);

    // lefts[c − d_lo] = ⟨L| C_{d_lo} … C_{c−1}, for c ≥ d_lo
    let mut lefts = vec![(env.left.vector.clone(), 0.0)];
    for c in d_lo..c_max {
        let (prev, e) = lefts.last().expect("non-empty").clone();
        let (v, w) = apply_compressed(&network.column(c, &[])?.transpose(), &prev, opts, &mut rng)?;
        lefts.push((v, e + w));
    }
    // rights[d_hi − c] = C_{c+1} … C_{d_hi} |R⟩, for c ≤ d_hi
    let mut rights = vec![(env.right.vector.clone(), 0.0)];
    for c in (c_min + 1..=d_hi).rev() {
        let (prev, e) = rights.last().expect("non-empty").clone();
        let (v, w) = apply_compressed(&network.column(c, &[])?, &prev, opts, &mut rng)?;
        rights.push((v, e + w));
    }
    let left_at = |c: i64| if c <= d_lo { &lefts[0] } else { &lefts[(c - d_lo) as usize] };
    let right_at = |c: i64| if c >= d_hi { &rights[0] } else { &rights[(d_hi - c) as usize] };

    let mut out = Vec::with_capacity(sites.len());
    for (&x, &c) in sites.iter().zip(&cells) {
        // cells strictly between the window edge and the defect are uniform
        // and already folded into the partial contractions
        let (l, el) = left_at(c);
        let (r, er) = right_at(c);
        let ins = [Insertion { slot: n, site: x, op: op.clone() }];
        // the scales of l and r cancel in the ratio
        let l = l.clone().with_log_norm(0.0);
        let r = r.clone().with_log_norm(0.0);
        let num = sandwich(&l, &network.column(c, &ins)?, &r)?;
        let den = sandwich(&l, &network.column(c, &[])?, &r)?;
        out.push((x, WindowValue { value: ratio(num, den)?, trunc_error: el + er }));
    }
    Ok(out)
}
