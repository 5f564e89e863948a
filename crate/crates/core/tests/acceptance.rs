//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). A criterion that evaluates to
//! FAIL is reported as such; the process exits nonzero only when the
//! machinery itself errors, so the report is always produced in full.

use std::process::ExitCode;
use std::time::Instant;

use ladderwalk::closed_form::{
    block_probability, critical_values, expected_tau1, geometric_pmf, inverse_speed, origin_gap_pmf, speed,
    speed_continued, trap_mean_time, BlockEvent,
};
use ladderwalk::harness::{
    clt_experiment, ergodic_ray_stats, escape_bound_check, estimate_speed, trap_tail_exponent, CltMode,
};
use ladderwalk::oracle::TrapGadget;
use ladderwalk::rng::{open_unit, StreamKey};
use ladderwalk::stats::chi_square_gof;
use ladderwalk::tree::{sample_interior_block, sample_origin_block, TreeSampler};
use ladderwalk::{ModelParams, Result, TrapKind, TrapShape};

const SEED: u64 = 2023;

type Criterion = fn() -> Result<Verdict>;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn alpha_star() -> f64 {
    2.0 - 3f64.sqrt()
}

fn trap_exactness() -> Result<Verdict> {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for beta in [1.0, 1.1, 1.5, 2.0, 3.0] {
        for kind in [TrapKind::A, TrapKind::B, TrapKind::C] {
            for k in 0..=12 {
                for l in 0..=12 {
                    let Ok(shape) = TrapShape::new(kind, k, l) else { continue };
                    let exact = TrapGadget::new(shape, beta)?.trap_time()?;
                    let f = trap_mean_time(shape, beta)?;
                    worst = worst.max((exact - f).abs() / f.abs().max(f64::MIN_POSITIVE));
                    count += 1;
                }
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-9 && secs < 10.0,
        format!("{count} shapes, max rel err {worst:.2e} (tol 1e-9), {secs:.2}s (limit 10s)"),
    )
}

fn speed_grid() -> Result<Verdict> {
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [0.15, alpha_star(), 0.5] {
        let top = 0.95 / alpha;
        let mut hits = 0;
        for i in 1..=15 {
            let beta = 1.0 + (top - 1.0) * i as f64 / 16.0;
            let p = ModelParams::from_alpha(alpha, beta, SEED)?;
            let est = estimate_speed(&p, 100_000, 500)?;
            if est.within(speed(alpha, beta)?.v, 3.0) {
                hits += 1;
            }
        }
        pass &= hits >= 14;
        parts.push(format!("alpha={alpha:.4}: {hits}/15"));
    }
    verdict(pass, format!("{} within 3 s.e. (need >= 14/15 each)", parts.join(", ")))
}

fn zero_speed() -> Result<Verdict> {
    let alpha = 0.9;
    let p = ModelParams::from_alpha(alpha, 1.05 / alpha, SEED)?;
    let est = estimate_speed(&p, 1_000_000, 500)?;
    verdict(
        est.point.abs() < 3.0 * est.std_error && est.std_error < 0.005,
        format!(
            "alpha={alpha}, beta=1.05/alpha, 500 x 1e6 steps: X_n/n = {:.5} +- {:.5} (need |point| < 3 s.e., s.e. < 0.005), capped {}",
            est.point, est.std_error, est.capped_fraction
        ),
    )
}

fn derivation_consistency() -> Result<Verdict> {
    let key = StreamKey::new(SEED).child(4);
    let mut rng = key.stream();
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let alpha = 0.01 + 0.98 * open_unit(&mut rng);
        let beta = 1.0 + (1.0 / alpha - 1.0) * (0.001 + 0.998 * open_unit(&mut rng));
        let a = inverse_speed(alpha, beta);
        let b = expected_tau1(alpha, beta)?;
        worst = worst.max((a - b).abs() / a.abs());
    }
    verdict(worst <= 1e-10, format!("500 random points, max rel diff {worst:.2e} (tol 1e-10)"))
}

fn limits() -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    for beta in [1.5, 2.0, 3.0, 5.0] {
        let lim = 2.0 * (beta - 1.0) / (5.0 * beta + 7.0);
        worst = worst.max((speed(1e-6, beta)?.v - lim).abs());
    }
    let d = |beta: f64| {
        let h = 1e-6;
        (speed_continued(1e-5 + h, beta) - speed_continued(1e-5 - h, beta)) / (2.0 * h)
    };
    let (d2, d3, d4) = (d(2.0), d(3.0), d(4.0));
    let pass = worst <= 1e-4 && d2 > 0.0 && d3.abs() < 1e-3 && d4 < 0.0;
    verdict(
        pass,
        format!("max |v - limit| {worst:.2e} (tol 1e-4); dv/dalpha at 1e-5: beta=2 {d2:.5}, beta=3 {d3:.2e}, beta=4 {d4:.5}"),
    )
}

fn quenched_clt() -> Result<Verdict> {
    let p = ModelParams::from_alpha(alpha_star(), 1.0, SEED)?;
    let r = clt_experiment(&p, 100_000, 10_000, CltMode::Quenched)?;
    verdict(
        r.ks_p_value > 0.01 && (0.95..=1.05).contains(&r.sample_variance),
        format!(
            "n=1e5, 1e4 replicas: KS p = {:.4} (need > 0.01), variance ratio {:.4} (need [0.95, 1.05])",
            r.ks_p_value, r.sample_variance
        ),
    )
}

fn annealed_clt() -> Result<Verdict> {
    let p = ModelParams::from_alpha(alpha_star(), 1.5, SEED)?;
    let r = clt_experiment(&p, 100_000, 5_000, CltMode::Annealed)?;
    verdict(r.ks_p_value > 0.01, format!("n=1e5, 5e3 replicas: KS p = {:.4} (need > 0.01)", r.ks_p_value))
}

fn escape_bounds() -> Result<Verdict> {
    let p = ModelParams::from_alpha(0.5, 2.0, SEED)?;
    let r = escape_bound_check(&p, 100, 2_000)?;
    let in_interval = r.points.iter().filter(|x| x.oracle >= r.lower - 1e-12 && x.oracle <= r.upper + 1e-12).count();
    let matched = r.points.iter().filter(|x| (x.empirical - x.oracle).abs() <= 4.0 * x.std_error).count();
    let regen = r
        .regeneration
        .iter()
        .filter(|x| x.empirical >= r.regeneration_bound - 4.0 * x.std_error)
        .count();
    let n = r.points.len();
    verdict(
        in_interval == n && matched == n && regen == r.regeneration.len(),
        format!(
            "oracle in [1/6, 1/3]: {in_interval}/{n}; empirical within 4 s.e.: {matched}/{n}; regeneration >= 1/4 - 4 s.e.: {regen}/{}",
            r.regeneration.len()
        ),
    )
}

fn ray_statistics() -> Result<Verdict> {
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [0.2, 0.5, 0.8] {
        let r = ergodic_ray_stats(alpha, 100_000, SEED)?;
        let e1 = (r.ray_ratio / r.ray_ratio_formula - 1.0).abs();
        let e2 = (r.holding_mean / r.holding_mean_formula - 1.0).abs();
        pass &= e1 <= 0.01 && e2 <= 0.01;
        parts.push(format!("alpha={alpha}: ratio err {e1:.4}, holding err {e2:.4}"));
    }
    verdict(pass, format!("{} (tol 0.01)", parts.join("; ")))
}

fn tail_exponent() -> Result<Verdict> {
    let p = ModelParams::from_alpha(0.5, 1.2, SEED)?;
    let r = trap_tail_exponent(&p, TrapKind::A, 100_000)?;
    let rel = (r.hill.point / r.rho - 1.0).abs();
    verdict(
        rel <= 0.15,
        format!(
            "Hill {:.3} +- {:.3} vs rho {:.3}: rel err {rel:.3} (tol 0.15); other tail fractions {}",
            r.hill.point,
            r.hill.std_error,
            r.rho,
            r.sensitivity.iter().map(|(f, h)| format!("{f}: {h:.3}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn structural() -> Result<Verdict> {
    let mut argmax_ok = 0;
    let mut convex_ok = 0;
    for i in 1..=20 {
        let alpha = 0.04 * i as f64 + 0.01;
        let cv = critical_values(alpha, None)?;
        let grid: Vec<f64> = (1..2000).map(|j| 1.0 + (cv.beta_c1 - 1.0) * j as f64 / 2000.0).collect();
        let vs: Vec<f64> = grid.iter().map(|&b| speed_continued(alpha, b)).collect();
        let arg = vs.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(j, _)| grid[j]).unwrap_or(1.0);
        argmax_ok += (arg > cv.beta_c2) as usize;
        let inv: Vec<f64> = grid.iter().map(|&b| inverse_speed(alpha, b)).collect();
        let convex = inv.windows(3).all(|w| w[0] + w[2] - 2.0 * w[1] >= -1e-9 * w[1].abs());
        convex_ok += convex as usize;
    }

    let alpha = 0.5;
    let key = StreamKey::new(SEED).child(11);
    let mut rng = key.stream();
    let n = 200_000;
    let mut f_counts = vec![0u64; 41];
    for _ in 0..n {
        let b = sample_interior_block(&mut rng, alpha);
        f_counts[(b.f as usize).min(40)] += 1;
    }
    let mut f_probs: Vec<f64> = (0..40).map(|k| geometric_pmf(alpha, k)).collect();
    f_probs.push(1.0 - f_probs.iter().sum::<f64>());
    let chi_f = chi_square_gof(&f_counts, &f_probs)?;

    let mut g_counts = vec![0u64; 61];
    let mut events = std::collections::HashMap::new();
    for i in 0..n {
        let o = sample_origin_block(&mut rng, alpha);
        g_counts[(o.g0 as usize).min(60)] += 1;
        let w1 = TreeSampler::new(key.child(1).child(i), alpha)?.block(1).w;
        let a = o.f0_prime;
        let b = o.g0 - 1 - a;
        let k = -o.h0 - a as i64;
        *events.entry((a, b, k, o.w0 ^ w1)).or_insert(0u64) += 1;
    }
    let mut g_probs: Vec<f64> = (0..60).map(|g| origin_gap_pmf(alpha, g)).collect();
    g_probs.push(1.0 - g_probs.iter().sum::<f64>());
    let chi_g = chi_square_gof(&g_counts, &g_probs)?;

    let (mut obs, mut probs) = (Vec::new(), Vec::new());
    let mut mass = 0.0;
    for a in 0..=8u32 {
        for b in 0..=(8 - a) {
            for k in -(a as i64)..=b as i64 {
                for sigma in 0..=1u8 {
                    BlockEvent::new(a, b, k, sigma)?;
                    let p = block_probability(alpha, a, b, k, sigma)?;
                    mass += p;
                    probs.push(p);
                    obs.push(events.get(&(a, b, k, sigma)).copied().unwrap_or(0));
                }
            }
        }
    }
    let seen: u64 = obs.iter().sum();
    obs.push(n - seen);
    probs.push(1.0 - mass);
    let chi_e = chi_square_gof(&obs, &probs)?;
    let mut total = 0.0;
    for a in 0..=60u32 {
        for b in 0..=(60 - a) {
            for k in -(a as i64)..=b as i64 {
                for sigma in 0..=1u8 {
                    total += block_probability(alpha, a, b, k, sigma)?;
                }
            }
        }
    }

    let pass = argmax_ok == 20
        && convex_ok == 20
        && chi_f.p_value > 0.01
        && chi_g.p_value > 0.01
        && chi_e.p_value > 0.01
        && (total - 1.0).abs() < 1e-10;
    verdict(
        pass,
        format!(
            "argmax > beta_c2: {argmax_ok}/20; 1/v convex: {convex_ok}/20; chi2 p: F {:.3}, G0 {:.3}, block events {:.3}; event mass {total:.12}",
            chi_f.p_value, chi_g.p_value, chi_e.p_value
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 11] = [
        ("trap-time exactness", trap_exactness),
        ("speed formula vs simulation", speed_grid),
        ("zero-speed regime", zero_speed),
        ("derivation consistency", derivation_consistency),
        ("small-alpha limits", limits),
        ("quenched CLT and Einstein variance", quenched_clt),
        ("annealed CLT", annealed_clt),
        ("escape-probability bounds", escape_bounds),
        ("ergodic ray statistics", ray_statistics),
        ("tail exponent", tail_exponent),
        ("structural properties", structural),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut errors = 0;
    let mut passed = 0;
    let mut run = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        run += 1;
        let t = Instant::now();
        match f() {
            Ok(v) => {
                passed += v.pass as usize;
                let tag = if v.pass { "PASS" } else { "FAIL" };
                println!("{tag} {id:>2} {name}: {} [{:.1}s]", v.detail, t.elapsed().as_secs_f64());
            }
            Err(e) => {
                errors += 1;
                println!("FAIL {id:>2} {name}: error: {e}");
            }
        }
    }
    println!("acceptance: {passed}/{run} criteria passed");
    if errors > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
