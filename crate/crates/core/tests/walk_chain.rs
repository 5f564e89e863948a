use std::collections::HashMap;

use ladderwalk::closed_form::{conditional_tau1, BlockEvent};
use ladderwalk::harness::{estimate_tau1, estimate_tau1_conditional, DEFAULT_STEP_CAP};
use ladderwalk::oracle::{stationary_distribution, window_graph};
use ladderwalk::rng::StreamKey;
use ladderwalk::stats::chi_square_gof;
use ladderwalk::tree::{ray_of, TreeSampler, TreeWindow};
use ladderwalk::walk::{transition_distribution, Walker};
use ladderwalk::ModelParams;

fn small_window(seed: u64, alpha: f64, blocks: usize) -> TreeWindow {
    let s = TreeSampler::new(StreamKey::new(seed), alpha).unwrap();
    TreeWindow::build(s, blocks, blocks).unwrap()
}

#[test]
fn transition_law_is_detailed_balanced() {
    let beta = 1.7;
    let w = small_window(21, 0.5, 6);
    let (g, labels) = window_graph(&w, beta).unwrap();
    let pi = stationary_distribution(&g).unwrap();
    let index: HashMap<_, _> = labels.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let interior = |v: (u8, i64)| v.1 > w.left_col() && v.1 < w.right_col();
    for (i, &v) in labels.iter().enumerate().filter(|(_, v)| interior(**v)) {
        for (u, p) in transition_distribution(&w, v, beta).unwrap().into_iter().filter(|x| interior(x.0)) {
            let back = transition_distribution(&w, u, beta).unwrap();
            let q = back.iter().find(|x| x.0 == v).expect("edges are symmetric").1;
            let j = index[&u];
            assert!((pi[i] * p - pi[j] * q).abs() < 1e-12 * (pi[i] * p).max(1e-300));
        }
    }
}

#[test]
fn single_step_frequencies_match_kernel() {
    let beta = 2.5;
    let w = small_window(22, 0.5, 6);
    let ray = ray_of(&w);
    let v = (0..ray.last_index())
        .filter_map(|i| ray.get(i))
        .find(|&v| w.neighbors(v).unwrap().len() == 3)
        .expect("a degree-3 ray vertex");
    let law = transition_distribution(&w, v, beta).unwrap();
    let mut counts = vec![0u64; law.len()];
    for r in 0..60_000 {
        let mut walker = Walker::new(w.clone(), beta, StreamKey::new(23).child(r)).unwrap().start_at(v).unwrap();
        walker.step().unwrap();
        let to = walker.vertex();
        counts[law.iter().position(|x| x.0 == to).unwrap()] += 1;
    }
    let probs: Vec<f64> = law.iter().map(|x| x.1).collect();
    assert!(chi_square_gof(&counts, &probs).unwrap().p_value > 1e-3);
}

#[test]
fn confined_walk_occupation_matches_stationary_law() {
    let beta = 1.3;
    let w = small_window(24, 0.5, 2);
    let (g, labels) = window_graph(&w, beta).unwrap();
    let pi = stationary_distribution(&g).unwrap();
    let steps = 4_000_000u64;
    let mut walker = Walker::new(w, beta, StreamKey::new(25)).unwrap().confined().with_local_time();
    walker.advance(steps).unwrap();
    let lt = walker.state().local_time.clone().unwrap();
    for (i, v) in labels.iter().enumerate() {
        if pi[i] < 0.01 {
            continue;
        }
        let freq = lt.get(v).copied().unwrap_or(0) as f64 / (steps + 1) as f64;
        assert!((freq / pi[i] - 1.0).abs() < 0.05, "{v:?}: {freq} vs {}", pi[i]);
    }
    assert_eq!(walker.state().step_count, steps);
}

#[test]
fn replay_is_deterministic() {
    let p = ModelParams::from_alpha(0.4, 1.6, 99).unwrap();
    let run = || {
        let s = TreeSampler::new(StreamKey::new(p.seed()), p.alpha()).unwrap();
        let w = TreeWindow::build(s, 8, 8).unwrap();
        let mut walker = Walker::new(w, p.beta(), StreamKey::new(5)).unwrap();
        walker.advance(200_000).unwrap();
        (walker.vertex(), walker.window().n_max())
    };
    assert_eq!(run(), run());
}

#[test]
fn passage_accounting_adds_up() {
    let s = TreeSampler::new(StreamKey::new(26), 0.5).unwrap();
    let w = TreeWindow::build(s, 8, 8).unwrap();
    let mut walker = Walker::new(w, 1.4, StreamKey::new(27)).unwrap();
    let p = walker.run_passage(40, DEFAULT_STEP_CAP).unwrap();
    assert!(!p.capped);
    let held: u64 = p.sojourns.iter().map(|s| s.1).sum();
    assert_eq!(p.tau, held + p.ray_steps);
    assert_eq!(p.tau, walker.state().step_count);
    let traps = p.trap_times(walker.window());
    assert_eq!(traps.iter().map(|t| t.1).sum::<u64>(), held);
}

#[test]
fn conditional_passage_times_match_formula() {
    let p = ModelParams::from_alpha(0.5, 1.2, 31).unwrap();
    for (a, b, k, sigma) in [(0, 0, 0, 0), (0, 0, 0, 1), (1, 2, -1, 0), (2, 1, 1, 1), (0, 3, 2, 0)] {
        let e = BlockEvent::new(a, b, k, sigma).unwrap();
        let est = estimate_tau1_conditional(&p, e, 40_000, DEFAULT_STEP_CAP).unwrap();
        let f = conditional_tau1(p.alpha(), p.beta(), e).unwrap();
        assert!(est.within(f, 4.0), "{e:?}: {} +- {} vs {f}", est.point, est.std_error);
        assert_eq!(est.capped_fraction, 0.0);
    }
}

#[test]
fn unconditional_passage_time_is_inverse_speed() {
    let p = ModelParams::from_alpha(0.3, 1.3, 32).unwrap();
    let est = estimate_tau1(&p, 40_000, DEFAULT_STEP_CAP).unwrap();
    let f = ladderwalk::closed_form::expected_tau1(p.alpha(), p.beta()).unwrap();
    assert!(est.within(f, 4.0), "{} +- {} vs {f}", est.point, est.std_error);
}
