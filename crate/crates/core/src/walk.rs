//! The conductance-weighted walk on a lazily extended tree window.
//!
//! The edge between columns `j-1` and `j` and the rung at column `j` both
//! carry conductance `beta^j`. Seen from a vertex in column `j` the left edge
//! and the rung therefore weigh 1 and the right edge weighs `beta`, so the
//! kernel only ever needs exponent differences in `{0, 1}`.

use std::collections::HashMap;

use rand_core::RngCore;
use serde::Serialize;

use crate::closed_form::TrapShape;
use crate::error::{domain, Error, Result};
use crate::oracle::{TrapGadget, WeightedGraph};
use crate::rng::{CounterRng, StreamKey};
use crate::tree::{ray_of, traps_of, Side, TrapDescriptor, TreeWindow, Vertex, GROWTH_QUANTUM, LEFT, RAY, RIGHT, RUNG};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Move {
    Left,
    Rung,
    Right,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    thresholds: [u64; 2],
    moves: [Move; 3],
}

/// Precomputed transition table indexed by the edge mask of a vertex.
#[derive(Debug, Clone)]
pub struct Kernel {
    beta: f64,
    table: [Entry; 8],
}

fn to_threshold(p: f64) -> u64 {
    if p >= 1.0 {
        u64::MAX
    } else {
        (p * 18_446_744_073_709_551_616.0) as u64
    }
}

impl Kernel {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 1.0) {
            return Err(domain(format!("beta must be finite and >= 1, got {beta}")));
        }
        let empty = Entry { thresholds: [0, 0], moves: [Move::Left; 3] };
        let mut table = [empty; 8];
        for (mask, entry) in table.iter_mut().enumerate().skip(1) {
            let mask = mask as u8;
            let mut opts: Vec<(Move, f64)> = Vec::new();
            if mask & LEFT != 0 {
                opts.push((Move::Left, 1.0));
            }
            if mask & RUNG != 0 {
                opts.push((Move::Rung, 1.0));
            }
            if mask & RIGHT != 0 {
                opts.push((Move::Right, beta));
            }
            let total: f64 = opts.iter().map(|o| o.1).sum();
            let mut acc = 0.0;
            for i in 0..3 {
                let (mv, w) = opts[i.min(opts.len() - 1)];
                entry.moves[i] = mv;
                if i < 2 {
                    acc += if i < opts.len() - 1 { w } else { total };
                    entry.thresholds[i] = to_threshold(acc / total);
                }
            }
        }
        Ok(Kernel { beta, table })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    #[inline(always)]
    pub fn choose(&self, mask: u8, word: u64) -> Move {
        let e = &self.table[(mask & 7) as usize];
        if word < e.thresholds[0] {
            e.moves[0]
        } else if word < e.thresholds[1] {
            e.moves[1]
        } else {
            e.moves[2]
        }
    }
}

/// Normalized `beta^(e_i - min e)`; invariant under shifting all exponents.
pub fn kernel_from_exponents(exponents: &[i64], beta: f64) -> Vec<f64> {
    let Some(&lo) = exponents.iter().min() else { return Vec::new() };
    let w: Vec<f64> = exponents.iter().map(|&e| beta.powf((e - lo) as f64)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

pub fn transition_distribution(window: &TreeWindow, v: Vertex, beta: f64) -> Result<Vec<(Vertex, f64)>> {
    let nb = window.neighbors(v)?;
    let exps: Vec<i64> = nb.iter().map(|p| p.1).collect();
    let probs = kernel_from_exponents(&exps, beta);
    Ok(nb.into_iter().map(|p| p.0).zip(probs).collect())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WalkerState {
    pub vertex: Vertex,
    pub step_count: u64,
    /// Visit counts, kept only when enabled.
    pub local_time: Option<HashMap<Vertex, u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassageStats {
    pub tau: u64,
    pub ray_steps: u64,
    pub capped: bool,
    /// One entry per arrival at a trap anchor: `(anchor, steps spent off the
    /// ray before the next ray step)`.
    pub sojourns: Vec<(Vertex, u64)>,
}

impl PassageStats {
    /// Pairs each sojourn with the trap anchored at its vertex.
    pub fn trap_times(&self, window: &TreeWindow) -> Vec<(TrapDescriptor, u64)> {
        let by_anchor: HashMap<Vertex, TrapDescriptor> = traps_of(window).into_iter().map(|t| (t.anchor, t)).collect();
        self.sojourns
            .iter()
            .filter_map(|(a, d)| by_anchor.get(a).map(|t| (*t, *d)))
            .collect()
    }
}

/// A walker owning its tree window, kernel and random stream.
#[derive(Debug, Clone)]
pub struct Walker {
    window: TreeWindow,
    kernel: Kernel,
    rng: CounterRng,
    state: WalkerState,
    confined: bool,
}

impl Walker {
    /// Starts at `phi(0)`.
    pub fn new(window: TreeWindow, beta: f64, key: StreamKey) -> Result<Self> {
        let start = ray_of(&window).get(0).expect("column 0 is always on the ray");
        let kernel = Kernel::new(beta)?;
        Ok(Walker {
            window,
            kernel,
            rng: key.stream(),
            state: WalkerState { vertex: start, step_count: 0, local_time: None },
            confined: false,
        })
    }

    pub fn start_at(mut self, v: Vertex) -> Result<Self> {
        if self.window.cell_checked(v).is_none() {
            return Err(Error::Unmaterialized(format!("start {v:?} outside the window")));
        }
        self.state.vertex = v;
        Ok(self)
    }

    /// Keeps the walk inside the current window: edges leaving it are removed
    /// and the window is never extended.
    pub fn confined(mut self) -> Self {
        self.confined = true;
        self
    }

    pub fn with_local_time(mut self) -> Self {
        let mut lt = HashMap::new();
        lt.insert(self.state.vertex, 1);
        self.state.local_time = Some(lt);
        self
    }

    pub fn state(&self) -> &WalkerState {
        &self.state
    }

    pub fn window(&self) -> &TreeWindow {
        &self.window
    }

    pub fn into_window(self) -> TreeWindow {
        self.window
    }

    pub fn vertex(&self) -> Vertex {
        self.state.vertex
    }

    fn ensure_room(&mut self) -> Result<()> {
        if self.confined {
            return Ok(());
        }
        let c = self.state.vertex.1;
        while c >= self.window.guard_right() {
            self.window.extend(Side::Right, GROWTH_QUANTUM)?;
        }
        while c < self.window.guard_left() {
            self.window.extend(Side::Left, GROWTH_QUANTUM)?;
        }
        Ok(())
    }

    #[inline(always)]
    fn mask(&self, v: Vertex) -> u8 {
        let mut m = self.window.cell(v);
        if self.confined {
            if v.1 == self.window.left_col() {
                m &= !LEFT;
            }
            if v.1 == self.window.right_col() {
                m &= !RIGHT;
            }
        }
        m
    }

    /// One transition. Returns the move taken.
    pub fn step(&mut self) -> Result<Move> {
        self.ensure_room()?;
        let (r, c) = self.state.vertex;
        let mv = self.kernel.choose(self.mask((r, c)), self.rng.next_u64());
        self.state.vertex = match mv {
            Move::Left => (r, c - 1),
            Move::Right => (r, c + 1),
            Move::Rung => (1 - r, c),
        };
        self.state.step_count += 1;
        if let Some(lt) = self.state.local_time.as_mut() {
            *lt.entry(self.state.vertex).or_insert(0) += 1;
        }
        Ok(mv)
    }

    /// Takes `n` steps.
    pub fn advance(&mut self, n: u64) -> Result<()> {
        if self.confined || self.state.local_time.is_some() {
            for _ in 0..n {
                self.step()?;
            }
            return Ok(());
        }
        let mut left = n;
        while left > 0 {
            self.ensure_room()?;
            let (lo_guard, hi_guard) = (self.window.guard_left(), self.window.guard_right());
            let base = self.window.left_col();
            let cells = self.window.cells();
            let (mut r, mut c) = self.state.vertex;
            let mut taken = 0;
            while taken < left && c >= lo_guard && c < hi_guard {
                let m = cells[(c - base) as usize][r as usize];
                match self.kernel.choose(m, self.rng.next_u64()) {
                    Move::Left => c -= 1,
                    Move::Right => c += 1,
                    Move::Rung => r ^= 1,
                }
                taken += 1;
            }
            self.state.vertex = (r, c);
            self.state.step_count += taken;
            left -= taken;
        }
        Ok(())
    }

    /// Walks until the last visited ray vertex lies in `target_column`, or
    /// until `step_cap` steps have been taken in this call.
    pub fn run_passage(&mut self, target_column: i64, step_cap: u64) -> Result<PassageStats> {
        let start = self.state.vertex;
        if !self.window.is_on_ray(start) {
            return Err(domain(format!("passage must start on the ray, got {start:?}")));
        }
        if target_column <= start.1 {
            return Err(domain("target column must lie right of the start"));
        }
        let mut stats = PassageStats { tau: 0, ray_steps: 0, capped: false, sojourns: Vec::new() };
        let is_anchor = |m: u8| (m & LEFT != 0) as u8 + (m & RIGHT != 0) as u8 + (m & RUNG != 0) as u8 == 3;
        let mut open: Option<(Vertex, u64)> = is_anchor(self.window.cell(start)).then_some((start, 0));
        let mut prev = start;
        while stats.tau < step_cap {
            self.step()?;
            stats.tau += 1;
            let now = self.state.vertex;
            let on_ray = self.window.cell(now) & RAY != 0;
            if on_ray && self.window.cell(prev) & RAY != 0 {
                stats.ray_steps += 1;
                if let Some(s) = open.take() {
                    stats.sojourns.push(s);
                }
                if now.1 >= target_column {
                    return Ok(stats);
                }
                if is_anchor(self.window.cell(now)) {
                    open = Some((now, 0));
                }
            } else if let Some(s) = open.as_mut() {
                s.1 += 1;
            }
            prev = now;
        }
        stats.capped = true;
        if let Some(s) = open.take() {
            stats.sojourns.push(s);
        }
        Ok(stats)
    }
}

/// Random walk on an arbitrary finite network.
#[derive(Debug, Clone)]
pub struct GraphChain {
    steps: Vec<Vec<(u64, usize)>>,
}

impl GraphChain {
    pub fn new(g: &WeightedGraph) -> Self {
        let steps = (0..g.len())
            .map(|u| {
                let nb = g.neighbors(u);
                let total: f64 = nb.iter().map(|p| p.1).sum();
                let mut acc = 0.0;
                nb.iter()
                    .enumerate()
                    .map(|(i, &(v, w))| {
                        acc += w;
                        let t = if i + 1 == nb.len() { u64::MAX } else { to_threshold(acc / total) };
                        (t, v)
                    })
                    .collect()
            })
            .collect();
        GraphChain { steps }
    }

    #[inline]
    pub fn next(&self, u: usize, rng: &mut impl RngCore) -> usize {
        let x = rng.next_u64();
        let row = &self.steps[u];
        row.iter().find(|p| x < p.0).unwrap_or(row.last().unwrap()).1
    }

    /// Steps until the first visit to a vertex flagged in `stop`.
    pub fn hitting_time(&self, start: usize, stop: &[bool], rng: &mut impl RngCore) -> u64 {
        let mut u = start;
        let mut n = 0;
        loop {
            u = self.next(u, rng);
            n += 1;
            if stop[u] {
                return n;
            }
        }
    }
}

/// A trap gadget prepared for repeated simulation.
#[derive(Debug, Clone)]
pub struct TrapSimulator {
    chain: GraphChain,
    stop: Vec<bool>,
}

impl TrapSimulator {
    pub fn new(shape: TrapShape, beta: f64) -> Result<Self> {
        let g = TrapGadget::new(shape, beta)?.graph();
        let mut stop = vec![false; g.len()];
        for e in TrapGadget::EXITS {
            stop[e] = true;
        }
        Ok(TrapSimulator { chain: GraphChain::new(&g), stop })
    }

    /// Steps spent before the first ray step out of the anchor.
    pub fn sample(&self, rng: &mut impl RngCore) -> u64 {
        self.chain.hitting_time(TrapGadget::ANCHOR, &self.stop, rng) - 1
    }
}

pub fn simulate_trap_exit(shape: TrapShape, beta: f64, rng: &mut impl RngCore) -> Result<u64> {
    Ok(TrapSimulator::new(shape, beta)?.sample(rng))
}
