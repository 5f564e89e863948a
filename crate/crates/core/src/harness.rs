//! Monte Carlo experiments confronting simulation with the closed forms.
//!
//! Every replica draws its tree and walk from streams keyed by
//! `(seed, experiment, replica)`. Replicas run on the rayon pool and results
//! are folded in replica order, so reports do not depend on thread count.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::closed_form::{
    self, block_probability, conditional_tau1, einstein_sigma2, speed, speed_continued, tail_exponent,
    trap_mean_time, BlockEvent, ModelParams, TrapKind, TrapShape,
};
use crate::error::{domain, Error, Result};
use crate::oracle::{escape_probability, TrapGadget};
use crate::rng::{geometric, StreamKey};
use crate::stats::{hill_bootstrap, ks_test_normal, mean_se, variance_se};
use crate::tree::{ray_of, traps_of, OriginBlock, Side, TreeSampler, TreeWindow, Vertex, GROWTH_QUANTUM, RAY};
use crate::walk::{TrapSimulator, Walker};

/// Default per-replica step cap for passage-time experiments.
pub const DEFAULT_STEP_CAP: u64 = 100_000_000;

const INITIAL_BLOCKS: usize = GROWTH_QUANTUM;

#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Experiment {
    Speed = 1,
    Tau1 = 2,
    Tail = 3,
    Clt = 4,
    Escape = 5,
    RayStats = 6,
}

fn replica_key(seed: u64, exp: Experiment, replica: u64) -> StreamKey {
    StreamKey::new(seed).child(exp as u64).child(replica)
}

fn tree_key(k: StreamKey) -> StreamKey {
    k.child(1)
}

fn walk_key(k: StreamKey) -> StreamKey {
    k.child(2)
}

/// Runs `f` for each replica index in parallel; results come back in order.
fn replicate<T: Send>(n: u64, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..n).into_par_iter().map(f).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateCI {
    pub point: f64,
    pub std_error: f64,
    pub replicas: u64,
    pub steps_per_replica: u64,
    pub seed: u64,
    pub capped_fraction: f64,
}

impl EstimateCI {
    /// `|point - target| <= z * std_error`.
    pub fn within(&self, target: f64, z: f64) -> bool {
        (self.point - target).abs() <= z * self.std_error
    }
}

fn fresh_walker(params: &ModelParams, key: StreamKey) -> Result<Walker> {
    let sampler = TreeSampler::new(tree_key(key), params.alpha())?;
    let window = TreeWindow::build(sampler, INITIAL_BLOCKS, INITIAL_BLOCKS)?;
    Walker::new(window, params.beta(), walk_key(key))
}

/// Annealed speed: displacement per step after a burn-in of `steps/10`.
pub fn estimate_speed(params: &ModelParams, steps: u64, replicas: u64) -> Result<EstimateCI> {
    if steps < 10_000 || replicas < 10 {
        return Err(domain("estimate_speed needs steps >= 1e4 and replicas >= 10"));
    }
    let burn = steps / 10;
    let measured = steps - burn;
    let speeds = replicate(replicas, |r| {
        let mut w = fresh_walker(params, replica_key(params.seed(), Experiment::Speed, r))?;
        w.advance(burn)?;
        let x0 = w.vertex().1;
        w.advance(measured)?;
        Ok((w.vertex().1 - x0) as f64 / measured as f64)
    })?;
    let (point, std_error) = mean_se(&speeds);
    Ok(EstimateCI { point, std_error, replicas, steps_per_replica: steps, seed: params.seed(), capped_fraction: 0.0 })
}

fn summarize_passages(taus: &[Option<u64>], params: &ModelParams, cap: u64) -> Result<EstimateCI> {
    let done: Vec<f64> = taus.iter().flatten().map(|&t| t as f64).collect();
    if done.is_empty() {
        return Err(Error::InsufficientTail("every replica hit the step cap".into()));
    }
    let (point, std_error) = mean_se(&done);
    Ok(EstimateCI {
        point,
        std_error,
        replicas: taus.len() as u64,
        steps_per_replica: cap,
        seed: params.seed(),
        capped_fraction: 1.0 - done.len() as f64 / taus.len() as f64,
    })
}

/// Mean first time the ray projection reaches column 1, on trees whose
/// origin block realizes `A_{a,b,k,sigma}`.
pub fn estimate_tau1_conditional(
    params: &ModelParams,
    event: BlockEvent,
    replicas: u64,
    step_cap: u64,
) -> Result<EstimateCI> {
    let BlockEvent { a, b, k, sigma } = event;
    let g0 = a + b + 1;
    let origin_for = |w0| OriginBlock::new(g0, -k - a as i64, a, w0);
    origin_for(0)?;
    let taus = replicate(replicas, |r| {
        let key = replica_key(params.seed(), Experiment::Tau1, r);
        let w0 = (tree_key(key).child(u64::MAX).word(0) >> 63) as u8;
        let sampler = TreeSampler::new(tree_key(key), params.alpha())?
            .with_origin(origin_for(w0)?)
            .with_w(1, w0 ^ sigma)?;
        let window = TreeWindow::build(sampler, INITIAL_BLOCKS, INITIAL_BLOCKS)?;
        let mut w = Walker::new(window, params.beta(), walk_key(key))?;
        let p = w.run_passage(1, step_cap)?;
        Ok((!p.capped).then_some(p.tau))
    })?;
    summarize_passages(&taus, params, step_cap)
}

/// Unconditional annealed `E_0[tau_1]`.
pub fn estimate_tau1(params: &ModelParams, replicas: u64, step_cap: u64) -> Result<EstimateCI> {
    let taus = replicate(replicas, |r| {
        let mut w = fresh_walker(params, replica_key(params.seed(), Experiment::Tau1, r))?;
        let p = w.run_passage(1, step_cap)?;
        Ok((!p.capped).then_some(p.tau))
    })?;
    summarize_passages(&taus, params, step_cap)
}

/// Closed-form `E_0[tau_1 | A]` for the same event, for side-by-side reports.
pub fn tau1_conditional_formula(params: &ModelParams, event: BlockEvent) -> Result<f64> {
    conditional_tau1(params.alpha(), params.beta(), event)
}

/// Sum of `P[A] E[tau_1 | A]` over all events with `a + b <= max_gap`.
pub fn tau1_mixture_formula(alpha: f64, beta: f64, max_gap: u32) -> Result<(f64, f64)> {
    let (mut mass, mut mean) = (0.0, 0.0);
    for a in 0..=max_gap {
        for b in 0..=(max_gap - a) {
            for k in -(a as i64)..=b as i64 {
                for sigma in 0..=1 {
                    let e = BlockEvent::new(a, b, k, sigma)?;
                    let p = block_probability(alpha, a, b, k, sigma)?;
                    mass += p;
                    mean += p * conditional_tau1(alpha, beta, e)?;
                }
            }
        }
    }
    Ok((mass, mean))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub kind: TrapKind,
    pub hill: EstimateCI,
    pub rho: f64,
    /// Hill index at other tail fractions, reported but not asserted.
    pub sensitivity: Vec<(f64, f64)>,
    pub second_moment: f64,
    pub max_duration: u64,
}

fn random_trap_shape(kind: TrapKind, key: StreamKey, alpha: f64) -> TrapShape {
    let mut rng = key.stream();
    let (k, l) = match kind {
        TrapKind::A => (1 + geometric(&mut rng, alpha) as i64, 0),
        TrapKind::B => (0, 1 + geometric(&mut rng, alpha) as i64),
        TrapKind::C => (geometric(&mut rng, alpha) as i64, geometric(&mut rng, alpha) as i64),
    };
    TrapShape::new(kind, k, l).expect("sampled arms are valid")
}

/// Samples trap durations of random traps of `kind` (arms drawn from the
/// tree's law given the trap exists) and estimates the tail index.
pub fn trap_tail_exponent(params: &ModelParams, kind: TrapKind, n_samples: u64) -> Result<TailReport> {
    let (alpha, beta) = (params.alpha(), params.beta());
    if beta == 1.0 {
        return Err(Error::InsufficientTail("no heavy tail at beta = 1".into()));
    }
    if !(beta > 1.0 && alpha * beta < 1.0) {
        return Err(domain(format!("tail exponent needs 1 < beta < 1/alpha, got beta={beta}")));
    }
    let rho = tail_exponent(alpha, beta)?;
    let root = StreamKey::new(params.seed()).child(Experiment::Tail as u64);
    let shapes: Vec<TrapShape> = (0..n_samples).map(|i| random_trap_shape(kind, root.child(2 * i), alpha)).collect();
    let mut sims: HashMap<TrapShape, TrapSimulator> = HashMap::new();
    for s in &shapes {
        if !sims.contains_key(s) {
            sims.insert(*s, TrapSimulator::new(*s, beta)?);
        }
    }
    let durations: Vec<u64> = shapes
        .par_iter()
        .enumerate()
        .map(|(i, s)| sims[s].sample(&mut root.child(2 * i as u64 + 1).stream()))
        .collect();
    let xs: Vec<f64> = durations.iter().map(|&d| d as f64).collect();
    let mut boot_rng = root.child(u64::MAX).stream();
    let h = hill_bootstrap(&xs, 0.05, 200, &mut boot_rng)?;
    let sensitivity = [0.01, 0.025, 0.1]
        .iter()
        .filter_map(|&f| hill_bootstrap(&xs, f, 0, &mut boot_rng).ok().map(|e| (f, e.index)))
        .collect();
    let second_moment = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
    Ok(TailReport {
        kind,
        hill: EstimateCI {
            point: h.index,
            std_error: h.std_error,
            replicas: n_samples,
            steps_per_replica: 1,
            seed: params.seed(),
            capped_fraction: 0.0,
        },
        rho,
        sensitivity,
        second_moment,
        max_duration: durations.iter().copied().max().unwrap_or(0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CltMode {
    Annealed,
    Quenched,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltReport {
    pub mode: CltMode,
    pub n: u64,
    /// Raw endpoints `X_n` (column).
    pub endpoints: Vec<i64>,
    pub samples: Vec<f64>,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    /// Variance of the standardized samples.
    pub sample_variance: f64,
    pub sample_variance_se: f64,
    pub center: f64,
    pub scale: f64,
}

/// A window wide enough that quenched walks of `n` steps rarely extend it.
fn quenched_window(params: &ModelParams, n: u64) -> Result<TreeWindow> {
    let key = StreamKey::new(params.seed()).child(Experiment::Clt as u64);
    let sampler = TreeSampler::new(tree_key(key), params.alpha())?;
    let a = params.alpha();
    let mean_gap = (1.0 + a) / (1.0 - a);
    let reach = 8.0 * (n as f64).sqrt() + 10.0;
    let blocks = (reach / mean_gap).ceil() as usize + INITIAL_BLOCKS;
    TreeWindow::build(sampler, blocks, blocks)
}

pub fn clt_experiment(params: &ModelParams, n: u64, replicas: u64, mode: CltMode) -> Result<CltReport> {
    let (alpha, beta) = (params.alpha(), params.beta());
    if replicas < 5 || n == 0 {
        return Err(domain("need n >= 1 and at least 5 replicas"));
    }
    let endpoints: Vec<i64> = match mode {
        CltMode::Annealed => {
            if !(beta > 1.0 && beta < 1.0 / alpha.sqrt()) {
                return Err(domain(format!("annealed CLT needs 1 < beta < 1/sqrt(alpha), got {beta}")));
            }
            replicate(replicas, |r| {
                let mut w = fresh_walker(params, replica_key(params.seed(), Experiment::Clt, r))?;
                w.advance(n)?;
                Ok(w.vertex().1)
            })?
        }
        CltMode::Quenched => {
            if beta != 1.0 {
                return Err(domain(format!("quenched CLT needs beta = 1, got {beta}")));
            }
            let window = quenched_window(params, n)?;
            replicate(replicas, |r| {
                let key = replica_key(params.seed(), Experiment::Clt, r);
                let mut w = Walker::new(window.clone(), 1.0, walk_key(key))?;
                w.advance(n)?;
                Ok(w.vertex().1)
            })?
        }
    };
    let rn = (n as f64).sqrt();
    let (center, scale) = match mode {
        CltMode::Annealed => {
            let v = speed(alpha, beta)?.v;
            let centered: Vec<f64> = endpoints.iter().map(|&x| (x as f64 - v * n as f64) / rn).collect();
            let m2 = centered.iter().map(|x| x * x).sum::<f64>() / (centered.len() - 1) as f64;
            (v * n as f64, rn * m2.sqrt())
        }
        CltMode::Quenched => (0.0, (einstein_sigma2(alpha)? * n as f64).sqrt()),
    };
    let samples: Vec<f64> = endpoints.iter().map(|&x| (x as f64 - center) / scale).collect();
    let ks = ks_test_normal(&samples)?;
    let (sample_variance, sample_variance_se) = variance_se(&samples);
    Ok(CltReport {
        mode,
        n,
        endpoints,
        samples,
        ks_statistic: ks.statistic,
        ks_p_value: ks.p_value,
        sample_variance,
        sample_variance_se,
        center,
        scale,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EinsteinReport {
    pub sigma2_mc: EstimateCI,
    pub sigma2_formula: f64,
    /// `v_mc(1 + eps) / eps`.
    pub slope_mc: EstimateCI,
    pub epsilon: f64,
    /// `2 v(1 + eps) / eps` from the closed form: what `2 slope_mc` estimates.
    pub slope_formula_at_eps: f64,
    /// `2 dv/dbeta` at 1 by central difference of the closed form.
    pub twice_derivative_formula: f64,
}

pub fn einstein_check(params: &ModelParams, n: u64, replicas: u64) -> Result<EinsteinReport> {
    if n < 100_000 {
        return Err(domain("einstein_check needs n >= 1e5"));
    }
    let alpha = params.alpha();
    let at_one = params.with_beta(1.0)?;
    let q = clt_experiment(&at_one, n, replicas, CltMode::Quenched)?;
    let raw: Vec<f64> = q.endpoints.iter().map(|&x| x as f64 / (n as f64).sqrt()).collect();
    let (var, var_se) = variance_se(&raw);
    let eps = 0.05;
    let v = estimate_speed(&params.with_beta(1.0 + eps)?, n, replicas)?;
    let h = 1e-5;
    let deriv = (speed_continued(alpha, 1.0 + h) - speed_continued(alpha, 1.0 - h)) / (2.0 * h);
    Ok(EinsteinReport {
        sigma2_mc: EstimateCI {
            point: var,
            std_error: var_se,
            replicas,
            steps_per_replica: n,
            seed: params.seed(),
            capped_fraction: 0.0,
        },
        sigma2_formula: einstein_sigma2(alpha)?,
        slope_mc: EstimateCI { point: v.point / eps, std_error: v.std_error / eps, ..v },
        epsilon: eps,
        slope_formula_at_eps: 2.0 * speed(alpha, 1.0 + eps)?.v / eps,
        twice_derivative_formula: 2.0 * deriv,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EscapePoint {
    pub ray_index: i64,
    pub vertex: Vertex,
    pub oracle: f64,
    pub empirical: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegenerationPoint {
    pub block: i64,
    pub start: Vertex,
    pub empirical: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapeReport {
    pub lower: f64,
    pub upper: f64,
    pub regeneration_bound: f64,
    pub points: Vec<EscapePoint>,
    pub regeneration: Vec<RegenerationPoint>,
}

/// Columns beyond which a return to the start has probability below `tol`.
fn safe_distance(beta: f64, tol: f64) -> i64 {
    ((2.0 * beta / tol).ln() / beta.ln()).ceil() as i64
}

/// Simulates from `start` and reports whether the walk escapes to `+inf`
/// before the ray walk comes back to `start` (or, with `forbidden`, before
/// visiting that vertex).
fn escapes(walker: &mut Walker, start: Vertex, forbidden: Option<Vertex>, horizon: i64, cap: u64) -> Result<bool> {
    let mut prev = start;
    for _ in 0..cap {
        walker.step()?;
        let now = walker.vertex();
        let on_ray = walker.window().cell(now) & RAY != 0;
        if let Some(f) = forbidden {
            if now == f {
                return Ok(false);
            }
        } else if now == start && on_ray && walker.window().cell(prev) & RAY != 0 {
            return Ok(false);
        }
        if on_ray && now.1 >= horizon {
            return Ok(true);
        }
        prev = now;
    }
    Err(domain(format!("escape walk from {start:?} exceeded {cap} steps")))
}

fn frequency(hits: &[bool]) -> (f64, f64) {
    let n = hits.len() as f64;
    let p = hits.iter().filter(|&&h| h).count() as f64 / n;
    (p, (p * (1.0 - p) / n).sqrt())
}

/// Escape probabilities at random ray positions of `n_points` independent
/// trees: the resistance formula against simulated never-return frequencies,
/// plus the crossing bound at the missing-edge columns.
pub fn escape_bound_check(params: &ModelParams, n_points: u64, replicas: u64) -> Result<EscapeReport> {
    let beta = params.beta();
    if beta.is_nan() || beta <= 1.0 {
        return Err(domain("escape probabilities need beta > 1"));
    }
    let horizon_len = safe_distance(beta, 1e-8);
    let cap = 1_000_000_000;
    let mut points = Vec::new();
    let mut regeneration = Vec::new();
    for p in 0..n_points {
        let key = replica_key(params.seed(), Experiment::Escape, p);
        let sampler = TreeSampler::new(tree_key(key), params.alpha())?;
        let mut window = TreeWindow::build(sampler, 8, 8)?;
        let mut pick = key.child(3).stream();
        let ray = ray_of(&window);
        let n = crate::rng::below(&mut pick, ray.last_index().min(40) as u64 + 1) as i64;
        let oracle = loop {
            match escape_probability(&ray_of(&window), n, beta, 1e-12) {
                Ok(v) => break v,
                Err(Error::Unmaterialized(_)) => window.extend(Side::Right, GROWTH_QUANTUM)?,
                Err(e) => return Err(e),
            }
        };
        let start = ray_of(&window).get(n).expect("index chosen inside the ray");
        let hits = replicate(replicas, |r| {
            let mut w = Walker::new(window.clone(), beta, key.child(4).child(r))?.start_at(start)?;
            escapes(&mut w, start, None, start.1 + horizon_len, cap)
        })?;
        let (empirical, std_error) = frequency(&hits);
        points.push(EscapePoint { ray_index: n, vertex: start, oracle, empirical, std_error });

        let m = 1 + crate::rng::below(&mut pick, window.n_max().min(8) as u64 - 1) as i64;
        let row = 1 - window.block(m).w;
        let from = (row, window.h(m));
        let behind = (row, window.h(m) - 1);
        let hits = replicate(replicas, |r| {
            let mut w = Walker::new(window.clone(), beta, key.child(5).child(r))?.start_at(from)?;
            escapes(&mut w, from, Some(behind), from.1 + horizon_len, cap)
        })?;
        let (empirical, std_error) = frequency(&hits);
        regeneration.push(RegenerationPoint { block: m, start: from, empirical, std_error });
    }
    Ok(EscapeReport {
        lower: 0.5 * (beta - 1.0) / (beta + 1.0),
        upper: (beta - 1.0) / (beta + 1.0),
        regeneration_bound: (beta - 1.0) / (2.0 * beta),
        points,
        regeneration,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RayStatsReport {
    pub alpha: f64,
    pub blocks: usize,
    pub ray_ratio: f64,
    pub ray_ratio_formula: f64,
    pub holding_mean: f64,
    pub holding_mean_formula: f64,
    pub rung_step_fraction: f64,
}

/// Ergodic averages along the ray of one sampled window of `blocks` blocks:
/// column reached per ray index, and the mean holding `1 + (trap edges)` per ray vertex.
pub fn ergodic_ray_stats(alpha: f64, blocks: usize, seed: u64) -> Result<RayStatsReport> {
    let key = StreamKey::new(seed).child(Experiment::RayStats as u64);
    let sampler = TreeSampler::new(tree_key(key), alpha)?;
    let window = TreeWindow::build(sampler, 1, blocks)?;
    let ray = ray_of(&window);
    let traps: HashMap<Vertex, u64> = traps_of(&window).into_iter().map(|t| (t.anchor, t.shape.edge_count())).collect();
    let last = ray.last_index();
    let (mut hold, mut rungs) = (0u64, 0u64);
    let mut prev = ray.get(0).expect("column 0 on the ray");
    for i in 0..last {
        let v = ray.get(i).expect("index in range");
        hold += 1 + traps.get(&v).copied().unwrap_or(0);
        if i > 0 {
            rungs += (v.1 == prev.1) as u64;
        }
        prev = v;
    }
    let end = ray.get(last).expect("last index");
    let stats = closed_form::ray_statistics(alpha)?;
    Ok(RayStatsReport {
        alpha,
        blocks,
        ray_ratio: end.1 as f64 / last as f64,
        ray_ratio_formula: stats.ray_ratio,
        holding_mean: hold as f64 / last as f64,
        holding_mean_formula: stats.holding_mean,
        rung_step_fraction: rungs as f64 / (last - 1) as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedPoint {
    pub alpha: f64,
    pub beta: f64,
    pub v_formula: f64,
    pub estimate: EstimateCI,
}

pub fn speed_curve(params: &ModelParams, betas: &[f64], steps: u64, replicas: u64) -> Result<Vec<SpeedPoint>> {
    betas
        .iter()
        .map(|&beta| {
            let p = params.with_beta(beta)?;
            Ok(SpeedPoint {
                alpha: p.alpha(),
                beta,
                v_formula: speed(p.alpha(), beta)?.v,
                estimate: estimate_speed(&p, steps, replicas)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrapTimeRow {
    pub shape: TrapShape,
    pub beta: f64,
    pub mean_formula: f64,
    pub mean_oracle: f64,
    pub mean_mc: f64,
    pub std_err: f64,
}

pub fn trap_time_row(shape: TrapShape, beta: f64, samples: u64, seed: u64) -> Result<TrapTimeRow> {
    let sim = TrapSimulator::new(shape, beta)?;
    let root = StreamKey::new(seed).child(Experiment::Tail as u64).child(0x7261_7073);
    let xs: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| sim.sample(&mut root.child(i).stream()) as f64)
        .collect();
    let (mean_mc, std_err) = mean_se(&xs);
    Ok(TrapTimeRow {
        shape,
        beta,
        mean_formula: trap_mean_time(shape, beta)?,
        mean_oracle: TrapGadget::new(shape, beta)?.trap_time()?,
        mean_mc,
        std_err,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: f64,
    pub observed: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn abs(name: &str, expected: f64, observed: f64, tolerance: f64) -> Self {
        Check {
            name: name.to_string(),
            expected,
            observed,
            tolerance,
            pass: (observed - expected).abs() <= tolerance,
        }
    }

    fn rel(name: &str, expected: f64, observed: f64, tolerance: f64) -> Self {
        let mut c = Check::abs(name, expected, observed, tolerance * expected.abs());
        c.tolerance = tolerance;
        c
    }
}

/// Invariant suite at one parameter point. `quick` trims the Monte Carlo sizes.
pub fn verify_suite(params: &ModelParams, quick: bool) -> Result<Vec<Check>> {
    let (alpha, beta) = (params.alpha(), params.beta());
    let mut checks = Vec::new();
    let ballistic = beta > 1.0 && alpha * beta < 1.0;

    if ballistic {
        let s = speed(alpha, beta)?;
        let e = s.e_tau1.finite().expect("finite in the ballistic regime");
        checks.push(Check::rel("speed_dual_formula", 1.0 / s.v, e, 1e-10));
        let c = closed_form::weight_sum_c(alpha, beta)?;
        checks.push(Check::rel("weight_sum_c_two_forms", c, closed_form::weight_sum_c_from_s_minus(alpha, beta), 1e-12));
        let (mass, mixture) = tau1_mixture_formula(alpha, beta, 300)?;
        checks.push(Check::abs("block_probability_mass", 1.0, mass, 1e-9));
        checks.push(Check::rel("tau1_mixture", e, mixture, 1e-6));
    }

    let h = 1e-5;
    let d = (speed_continued(alpha, 1.0 + h) - speed_continued(alpha, 1.0 - h)) / (2.0 * h);
    let s2 = einstein_sigma2(alpha)?;
    checks.push(Check::rel("einstein_derivative", s2, 2.0 * d, 1e-6));

    let mut worst: f64 = 0.0;
    for kind in [TrapKind::A, TrapKind::B, TrapKind::C] {
        for k in 0..=6i64 {
            for l in 0..=6i64 {
                let Ok(shape) = TrapShape::new(kind, k, l) else { continue };
                let exact = TrapGadget::new(shape, beta)?.trap_time()?;
                let f = trap_mean_time(shape, beta)?;
                worst = worst.max((exact - f).abs() / f.abs().max(1e-300));
            }
        }
    }
    checks.push(Check::abs("trap_time_exactness_max_rel_err", 0.0, worst, 1e-9));

    let blocks = if quick { 20_000 } else { 100_000 };
    let rs = ergodic_ray_stats(alpha, blocks, params.seed())?;
    checks.push(Check::rel("ray_ratio", rs.ray_ratio_formula, rs.ray_ratio, 0.01));
    checks.push(Check::rel("holding_mean", rs.holding_mean_formula, rs.holding_mean, 0.01));

    if ballistic {
        let (steps, replicas) = if quick { (20_000, 50) } else { (100_000, 500) };
        let est = estimate_speed(params, steps, replicas)?;
        let v = speed(alpha, beta)?.v;
        checks.push(Check::abs("speed_mc_3se", v, est.point, 3.0 * est.std_error));
    } else if beta == 1.0 {
        let (n, replicas) = if quick { (20_000, 500) } else { (100_000, 2_000) };
        let q = clt_experiment(params, n, replicas, CltMode::Quenched)?;
        checks.push(Check::abs("quenched_variance_ratio", 1.0, q.sample_variance, 4.0 * q.sample_variance_se));
        checks.push(Check {
            name: "quenched_ks_p_value".into(),
            expected: 0.01,
            observed: q.ks_p_value,
            tolerance: 0.0,
            pass: q.ks_p_value > 0.01,
        });
    }
    Ok(checks)
}
