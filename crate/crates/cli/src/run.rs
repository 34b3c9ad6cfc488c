//! Subcommand runners. Each produces a deterministic record stream for a
//! given configuration; only `wall_ms` varies between reruns.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Mutex};
use std::time::Instant;

use transfold::folding::extend_with_identity_pairs;
use transfold::itebd::{Itebd, ItebdOptions, UniformState};
use transfold::mps::{inner, Mps};
use transfold::oracles::{
    check_light_cone, ed_trajectory, ed_two_time_correlator, tfim_ground_energy_per_site, tfim_ground_sigma_x,
    tfim_quench_plateau, tfim_quench_sigma_x, Propagator,
};
use transfold::transverse::{
    dominant_eigenpair, energy_per_site, environment, expectation, impurity_profile, two_time_correlator,
    EigenOptions, EigenPair, Environment, Network, Side,
};
use transfold::trotter::{plus_state, Evolution, ModelSpec, Pauli, Schedule, Splitting, TrotterPlan};
use transfold::C64;

use crate::config::{Command, Method, RunConfig};
use crate::record::ResultRecord;
use crate::CliError;

/// Largest chain the dense oracle accepts.
const ED_MAX_SITES: usize = 24;

type Emit<'a> = &'a mut dyn FnMut(ResultRecord) -> Result<(), CliError>;

/// Runs the configured subcommand, handing records to `emit` in order.
pub fn run(cfg: &RunConfig, emit: Emit<'_>) -> Result<(), CliError> {
    cfg.validate()?;
    let ctx = Ctx { cfg, hash: cfg.hash() };
    match cfg.command {
        Command::Quench => quench(&ctx, emit),
        Command::Ground => ground(&ctx, emit),
        Command::Corr => corr(&ctx, emit),
        Command::Dscan => dscan(&ctx, emit),
        Command::Oracle => oracle(&ctx, emit),
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    hash: String,
}

/// Fields of a record that are not measurement values.
struct Meta {
    lambda_abs: f64,
    bond: usize,
    trunc_error: f64,
    wall_ms: f64,
}

impl Meta {
    fn oracle(start: Instant) -> Self {
        Self { lambda_abs: f64::NAN, bond: 0, trunc_error: 0.0, wall_ms: ms(start) }
    }
}

impl Ctx<'_> {
    fn record(&self, t: f64, observable: &str, site: i64, value: C64, meta: Meta) -> ResultRecord {
        ResultRecord {
            t,
            observable: observable.to_string(),
            site,
            value_re: value.re,
            value_im: value.im,
            lambda_abs: meta.lambda_abs,
            bond: meta.bond,
            trunc_error: meta.trunc_error,
            wall_ms: meta.wall_ms,
            method: self.cfg.method.name().to_string(),
            config_hash: self.hash.clone(),
        }
    }

    fn model(&self, evolution: Evolution) -> ModelSpec {
        let m = ModelSpec::ising(self.cfg.g, self.cfg.h, evolution);
        match self.cfg.g0 {
            Some(g0) => m.with_impurity(g0),
            None => m,
        }
    }

    fn plan(&self, evolution: Evolution, delta: f64) -> Result<TrotterPlan, CliError> {
        TrotterPlan::new(self.model(evolution), delta, Splitting::FieldZz).map_err(CliError::numerical("trotter plan"))
    }

    fn eigen_options(&self, max_bond: usize) -> EigenOptions {
        EigenOptions {
            max_bond,
            tol: self.cfg.tol,
            max_iters: self.cfg.max_iters,
            seed: self.cfg.seed,
            ..Default::default()
        }
    }

    fn folded(&self) -> bool {
        self.cfg.method == Method::Folded
    }

    /// Sample points `0, stride, 2·stride, …` up to and including the last step.
    fn sample_steps(&self) -> Vec<usize> {
        let n = steps_of(self.cfg.tmax, self.cfg.delta);
        let mut out: Vec<usize> = (0..=n).step_by(self.cfg.stride).collect();
        if out.last() != Some(&n) {
            out.push(n);
        }
        out
    }

    fn observable(&self) -> &'static str {
        self.cfg.op.name()
    }
}

fn steps_of(t: f64, delta: f64) -> usize {
    (t / delta).round() as usize
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Runs `f` on every item with at most `jobs` workers and hands the results
/// to `sink` in item order from the calling thread.
fn ordered_par<T: Send, R: Send>(
    items: Vec<T>,
    jobs: usize,
    f: impl Fn(T) -> Result<Vec<R>, CliError> + Sync,
    mut sink: impl FnMut(R) -> Result<(), CliError>,
) -> Result<(), CliError> {
    if jobs <= 1 || items.len() <= 1 {
        for item in items {
            for r in f(item)? {
                sink(r)?;
            }
        }
        return Ok(());
    }
    let workers = jobs.min(items.len());
    let queue = Mutex::new(items.into_iter().enumerate());
    let stop = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|s| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (queue, stop, f) = (&queue, &stop, &f);
            s.spawn(move || loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let next = queue.lock().map(|mut q| q.next()).unwrap_or(None);
                let Some((i, item)) = next else { break };
                let r = f(item);
                if r.is_err() {
                    stop.store(true, Ordering::Relaxed);
                }
                if tx.send((i, r)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending = BTreeMap::new();
        let mut next = 0;
        let result = (|| {
            for (i, r) in rx {
                pending.insert(i, r);
                while let Some(r) = pending.remove(&next) {
                    for x in r? {
                        sink(x)?;
                    }
                    next += 1;
                }
            }
            Ok(())
        })();
        if result.is_err() {
            stop.store(true, Ordering::Relaxed);
        }
        result
    })
}

/// Splits `xs` into at most `parts` contiguous, nearly equal chunks.
fn chunks<T: Clone>(xs: &[T], parts: usize) -> Vec<Vec<T>> {
    let parts = parts.clamp(1, xs.len().max(1));
    let base = xs.len() / parts;
    let extra = xs.len() % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for k in 0..parts {
        let len = base + usize::from(k < extra);
        out.push(xs[start..start + len].to_vec());
        start += len;
    }
    out
}

/// Warm start for the next time point: the previous eigenvectors extended
/// by identity pairs (folded columns only).
fn extend_warm(prev: &Option<(Mps, Mps)>, env_column: &transfold::mps::Mpo) -> Option<(Mps, Mps)> {
    let (l, r) = prev.as_ref()?;
    let l = extend_with_identity_pairs(l, &env_column.out_dims()).ok()?;
    let r = extend_with_identity_pairs(r, &env_column.in_dims()).ok()?;
    Some((l, r))
}

fn env_meta(env: &Environment, extra_trunc: f64, start: Instant) -> Meta {
    Meta { lambda_abs: env.lambda.norm(), bond: env.bond(), trunc_error: env.trunc_error() + extra_trunc, wall_ms: ms(start) }
}

fn quench(ctx: &Ctx, emit: Emit<'_>) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let steps = ctx.sample_steps();
    match cfg.method {
        Method::Folded | Method::Transverse => {
            let plan = ctx.plan(Evolution::Real, cfg.delta)?;
            let opts = ctx.eigen_options(cfg.bond);
            if cfg.jobs <= 1 {
                return quench_points(ctx, &plan, &opts, &steps, emit);
            }
            // each chunk of time points is one warm-started chain
            let chain = |points: Vec<usize>| {
                let mut out = Vec::with_capacity(points.len());
                quench_points(ctx, &plan, &opts, &points, &mut |r| {
                    out.push(r);
                    Ok(())
                })?;
                Ok(out)
            };
            ordered_par(chunks(&steps, cfg.jobs), cfg.jobs, chain, emit)
        }
        Method::Itebd => {
            let plan = ctx.plan(Evolution::Real, cfg.delta)?;
            let mut run = Itebd::new(
                UniformState::product(&plus_state()).map_err(CliError::numerical("itebd"))?,
                ItebdOptions { max_bond: cfg.bond, ..Default::default() },
            );
            let gates = transfold::itebd::bond_sequence(&plan).map_err(CliError::numerical("itebd"))?;
            let mut done = 0;
            let start = Instant::now();
            for n in steps {
                while done < n {
                    run.step(&plan, &gates).map_err(CliError::numerical(format!("itebd step {done}")))?;
                    done += 1;
                }
                let v = run.state.local_expectation(&cfg.op.matrix()).map_err(CliError::numerical("itebd"))?;
                let meta = Meta { lambda_abs: f64::NAN, bond: run.state.max_bond(), trunc_error: run.trunc_error, wall_ms: ms(start) };
                emit(ctx.record(n as f64 * cfg.delta, ctx.observable(), 0, v, meta))?;
            }
            Ok(())
        }
        Method::Oracle => {
            let model = ctx.model(Evolution::Real);
            let free = cfg.h == 0.0 && cfg.op == Pauli::X && cfg.g0.is_none_or(|g0| g0 == cfg.g);
            if free {
                for n in steps {
                    let start = Instant::now();
                    let t = n as f64 * cfg.delta;
                    let v = tfim_quench_sigma_x(cfg.g, t).map_err(CliError::numerical(format!("oracle at t = {t}")))?;
                    emit(ctx.record(t, ctx.observable(), 0, C64::new(v, 0.0), Meta::oracle(start)))?;
                }
                return Ok(());
            }
            let n_sites = ed_sites(&model, 0, cfg.tmax)?;
            let plan = ctx.plan(Evolution::Real, cfg.delta)?;
            let start = Instant::now();
            let traj = ed_trajectory(&model, n_sites, cfg.tmax, &Propagator::Trotter(plan), cfg.stride, cfg.op, &plus_state())
                .map_err(CliError::numerical("dense oracle"))?;
            for (t, v) in traj {
                emit(ctx.record(t, ctx.observable(), 0, v, Meta { bond: n_sites, ..Meta::oracle(start) }))?;
            }
            Ok(())
        }
    }
}

/// Warm-started quench over consecutive sample points, emitting each point
/// as it finishes.
fn quench_points(ctx: &Ctx, plan: &TrotterPlan, opts: &EigenOptions, points: &[usize], emit: Emit<'_>) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let mut warm: Option<(Mps, Mps)> = None;
    for &n in points {
        let start = Instant::now();
        let t = n as f64 * cfg.delta;
        let ctx_err = format!("quench at t = {t}");
        let net = Network::new(Schedule::uniform(plan.clone(), n), plus_state(), ctx.folded())
            .map_err(CliError::numerical(&ctx_err))?;
        let column = net.uniform().and_then(|u| u.column(0, &[])).map_err(CliError::numerical(&ctx_err))?;
        let w = if ctx.folded() { extend_warm(&warm, &column) } else { None };
        let env = environment(&net, opts, w.as_ref().map(|(l, r)| (l, r))).map_err(CliError::numerical(&ctx_err))?;
        let v = expectation(&env, &net, &cfg.op.matrix(), 0, opts).map_err(CliError::numerical(&ctx_err))?;
        emit(ctx.record(t, ctx.observable(), 0, v.value, env_meta(&env, v.trunc_error, start)))?;
        warm = Some((env.left.vector.clone(), env.right.vector.clone()));
    }
    Ok(())
}

/// Smallest even chain (at least 16 sites) whose light cone contains
/// `time`, with `dx` extra sites for a separated pair.
fn ed_sites(model: &ModelSpec, dx: usize, time: f64) -> Result<usize, CliError> {
    let mut last = None;
    for n in (16..=ED_MAX_SITES).step_by(2) {
        match check_light_cone(model, n - dx.min(n), time) {
            Ok(()) => return Ok(n),
            Err(e) => last = Some(e),
        }
    }
    Err(CliError::numerical("dense oracle")(last.expect("non-empty range")))
}

/// Imaginary-time schedule: `coarse` steps up to `β − 1`, then `delta`
/// steps for the final unit of β. Short runs use `delta` throughout.
pub fn ground_schedule(cfg: &RunConfig, model: ModelSpec) -> Result<Schedule, CliError> {
    let plan = |d: f64| TrotterPlan::new(model, d, Splitting::FieldZz).map_err(CliError::numerical("trotter plan"));
    let beta = cfg.tmax;
    let is_multiple = |t: f64, d: f64| ((t / d) - (t / d).round()).abs() < 1e-9;
    if beta > 1.0 + 1e-12 && cfg.coarse > cfg.delta {
        if !is_multiple(beta - 1.0, cfg.coarse) || !is_multiple(1.0, cfg.delta) {
            return Err(CliError::Config("beta - 1 must be a multiple of coarse and 1 a multiple of delta".into()));
        }
        let mut s = Schedule::uniform(plan(cfg.coarse)?, steps_of(beta - 1.0, cfg.coarse));
        s.push(plan(cfg.delta)?, steps_of(1.0, cfg.delta));
        Ok(s)
    } else {
        Ok(Schedule::uniform(plan(cfg.delta)?, steps_of(beta, cfg.delta)))
    }
}

fn ground(ctx: &Ctx, emit: Emit<'_>) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let beta = cfg.tmax;
    let model = ctx.model(Evolution::Imaginary);
    match cfg.method {
        Method::Folded | Method::Transverse => {
            let schedule = ground_schedule(cfg, model)?;
            let opts = ctx.eigen_options(cfg.bond);
            let start = Instant::now();
            let net = Network::new(schedule, plus_state(), ctx.folded()).map_err(CliError::numerical("ground network"))?;
            let env = environment(&net, &opts, None).map_err(CliError::numerical("ground environment"))?;
            let bulk = net.uniform().map_err(CliError::numerical("ground network"))?;
            let e = energy_per_site(&env, &bulk, &opts).map_err(CliError::numerical("ground energy"))?;
            emit(ctx.record(beta, "energy", 0, e.value, env_meta(&env, e.trunc_error, start)))?;
            let sites: Vec<i64> = if cfg.g0.is_some() { (-cfg.xmax..=cfg.xmax).collect() } else { vec![0] };
            let start = Instant::now();
            let profile = impurity_profile(&env, &net, &cfg.op.matrix(), &sites, &opts)
                .map_err(CliError::numerical("impurity profile"))?;
            for (x, v) in profile {
                emit(ctx.record(beta, ctx.observable(), x, v.value, env_meta(&env, v.trunc_error, start)))?;
            }
            Ok(())
        }
        Method::Itebd => {
            let schedule = ground_schedule(cfg, model)?;
            let start = Instant::now();
            let mut run = Itebd::new(
                UniformState::product(&plus_state()).map_err(CliError::numerical("itebd"))?,
                ItebdOptions { max_bond: cfg.bond, ..Default::default() },
            );
            for (plan, n) in schedule.stages() {
                run.run(plan, *n).map_err(CliError::numerical("itebd ground state"))?;
            }
            let last = &schedule.stages().last().expect("beta > 0").0;
            let e = run.state.energy_per_site(last).map_err(CliError::numerical("itebd energy"))?;
            let v = run.state.local_expectation(&cfg.op.matrix()).map_err(CliError::numerical("itebd"))?;
            let meta = || Meta { lambda_abs: f64::NAN, bond: run.state.max_bond(), trunc_error: run.trunc_error, wall_ms: ms(start) };
            emit(ctx.record(beta, "energy", 0, C64::new(e, 0.0), meta()))?;
            emit(ctx.record(beta, ctx.observable(), 0, v, meta()))
        }
        Method::Oracle => {
            if cfg.h != 0.0 || cfg.g0.is_some_and(|g0| g0 != cfg.g) {
                return Err(CliError::Domain("free-fermion ground state needs h = 0 and no impurity".into()));
            }
            let start = Instant::now();
            let e = tfim_ground_energy_per_site(cfg.g).map_err(CliError::numerical("ground oracle"))?;
            emit(ctx.record(f64::INFINITY, "energy", 0, C64::new(e, 0.0), Meta::oracle(start)))?;
            let v = match cfg.op {
                Pauli::X => tfim_ground_sigma_x(cfg.g).map_err(CliError::numerical("ground oracle"))?,
                // the ground state is even under the global spin flip
                Pauli::Y | Pauli::Z | Pauli::I => 0.0,
            };
            emit(ctx.record(f64::INFINITY, ctx.observable(), 0, C64::new(v, 0.0), Meta::oracle(start)))
        }
    }
}

fn corr(ctx: &Ctx, emit: Emit<'_>) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let (t1, t2) = (cfg.t1.unwrap_or(0.0), cfg.t2.unwrap_or(0.0));
    let observable = format!("corr_{}_t1={t1}", cfg.op.name());
    let start = Instant::now();
    match cfg.method {
        Method::Folded | Method::Transverse => {
            let plan = ctx.plan(Evolution::Real, cfg.delta)?;
            let opts = ctx.eigen_options(cfg.bond);
            let net = Network::new(Schedule::uniform(plan, steps_of(t2, cfg.delta)), plus_state(), ctx.folded())
                .map_err(CliError::numerical("correlator network"))?;
            let env = environment(&net, &opts, None).map_err(CliError::numerical("correlator environment"))?;
            let o = cfg.op.matrix();
            let v = two_time_correlator(&env, &net, &o, steps_of(t1, cfg.delta), &o, cfg.dx, &opts)
                .map_err(CliError::numerical("correlator"))?;
            emit(ctx.record(t2, &observable, cfg.dx, v.value, env_meta(&env, v.trunc_error, start)))
        }
        Method::Oracle => {
            if cfg.dx < 0 {
                return Err(CliError::Domain("the dense correlator oracle needs dx >= 0".into()));
            }
            let model = ctx.model(Evolution::Real);
            let dx = cfg.dx as usize;
            let n = ed_sites(&model, dx, t2)?;
            let plan = ctx.plan(Evolution::Real, cfg.delta)?;
            let v = ed_two_time_correlator(&model, n, &Propagator::Trotter(plan), &plus_state(), cfg.op, t1, cfg.op, t2, dx)
                .map_err(CliError::numerical("dense correlator"))?;
            emit(ctx.record(t2, &observable, cfg.dx, v, Meta { bond: n, ..Meta::oracle(start) }))
        }
        Method::Itebd => Err(CliError::Config("corr supports folded, transverse and oracle".into())),
    }
}

/// Eigenvectors `|R_D(t)⟩` of one bond dimension along all sample times.
fn right_chain(ctx: &Ctx, d: usize, steps: &[usize]) -> Result<Vec<(EigenPair, f64)>, CliError> {
    let cfg = ctx.cfg;
    let plan = ctx.plan(Evolution::Real, cfg.delta)?;
    let opts = ctx.eigen_options(d);
    let mut out: Vec<(EigenPair, f64)> = Vec::with_capacity(steps.len());
    for &n in steps {
        let start = Instant::now();
        let err = format!("dscan D = {d}, t = {}", n as f64 * cfg.delta);
        let net = Network::new(Schedule::uniform(plan.clone(), n), plus_state(), ctx.folded())
            .map_err(CliError::numerical(&err))?;
        let column = net.column(0, &[]).map_err(CliError::numerical(&err))?;
        let warm = match out.last() {
            Some((prev, _)) if ctx.folded() => extend_with_identity_pairs(&prev.vector, &column.in_dims()).ok(),
            _ => None,
        };
        let x0 = match warm {
            Some(v) => v,
            None => net.start_vector(&column, cfg.seed).map_err(CliError::numerical(&err))?,
        };
        let pair = dominant_eigenpair(&column, Side::Right, &x0, &opts).map_err(CliError::numerical(&err))?;
        out.push((pair, ms(start)));
    }
    Ok(out)
}

/// Smallest ladder entry from which every larger entry meets `target`.
pub fn d_required(ladder: &[usize], errors: &[f64], target: f64) -> usize {
    let mut need = *ladder.last().expect("non-empty ladder");
    for (d, e) in ladder.iter().zip(errors).rev() {
        if *e <= target {
            need = *d;
        } else {
            break;
        }
    }
    need
}

fn dscan(ctx: &Ctx, emit: Emit<'_>) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let steps = ctx.sample_steps();
    let ladder = &cfg.bonds;
    let best_d = *ladder.last().expect("validated");
    let best = right_chain(ctx, best_d, &steps)?;
    let best_ref = &best;
    let steps_ref = &steps;

    // errors[k][i]: ladder entry k at sample i
    let mut errors: Vec<Vec<(f64, EigenPair, f64)>> = Vec::with_capacity(ladder.len());
    let lower: Vec<usize> = ladder[..ladder.len() - 1].to_vec();
    ordered_par(
        lower,
        cfg.jobs,
        |d| {
            let chain = right_chain(ctx, d, steps_ref)?;
            let row = chain
                .into_iter()
                .zip(best_ref)
                .map(|((pair, wall), (b, _))| {
                    let ov = inner(&pair.vector, &b.vector).map_err(CliError::numerical("dscan overlap"))?;
                    Ok(((1.0 - ov.norm()).max(0.0), pair, wall))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            Ok(vec![row])
        },
        |row| {
            errors.push(row);
            Ok(())
        },
    )?;
    errors.push(best.into_iter().map(|(p, w)| (0.0, p, w)).collect());

    for (i, &n) in steps.iter().enumerate() {
        let t = n as f64 * cfg.delta;
        for (k, &d) in ladder.iter().enumerate() {
            let (eps, pair, wall) = &errors[k][i];
            let meta = Meta { lambda_abs: pair.lambda.norm(), bond: pair.vector.max_bond(), trunc_error: pair.trunc_error, wall_ms: *wall };
            emit(ctx.record(t, "eps", d as i64, C64::new(*eps, 0.0), meta))?;
        }
        let column: Vec<f64> = errors.iter().map(|row| row[i].0).collect();
        for &target in &cfg.eps {
            let need = d_required(ladder, &column, target);
            let meta = Meta { lambda_abs: f64::NAN, bond: need, trunc_error: 0.0, wall_ms: 0.0 };
            emit(ctx.record(t, &format!("d_required@{target:e}"), 0, C64::new(need as f64, 0.0), meta))?;
        }
    }
    Ok(())
}

fn oracle(ctx: &Ctx, emit: Emit<'_>) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    if cfg.h != 0.0 || cfg.g0.is_some_and(|g0| g0 != cfg.g) || cfg.op != Pauli::X {
        return Err(CliError::Domain("free-fermion tables need h = 0, no impurity and op = x".into()));
    }
    for n in ctx.sample_steps() {
        let start = Instant::now();
        let t = n as f64 * cfg.delta;
        let v = tfim_quench_sigma_x(cfg.g, t).map_err(CliError::numerical(format!("oracle at t = {t}")))?;
        emit(ctx.record(t, ctx.observable(), 0, C64::new(v, 0.0), Meta::oracle(start)))?;
    }
    let start = Instant::now();
    let plateau = tfim_quench_plateau(cfg.g).map_err(CliError::numerical("plateau"))?;
    emit(ctx.record(f64::INFINITY, "quench_plateau_sigma_x", 0, C64::new(plateau, 0.0), Meta::oracle(start)))?;
    let e = tfim_ground_energy_per_site(cfg.g).map_err(CliError::numerical("ground oracle"))?;
    emit(ctx.record(f64::INFINITY, "ground_energy", 0, C64::new(e, 0.0), Meta::oracle(start)))?;
    let x = tfim_ground_sigma_x(cfg.g).map_err(CliError::numerical("ground oracle"))?;
    emit(ctx.record(f64::INFINITY, "ground_sigma_x", 0, C64::new(x, 0.0), Meta::oracle(start)))
}
