//! Random spanning tree of the ladder `{0,1} x Z`, built from its i.i.d.
//! block decomposition.
//!
//! Block `n` occupies columns `H_n .. H_{n+1}-1`. Inside a block both rows are
//! connected horizontally and joined by a single rung at `V_n = H_n + F'_n`.
//! The horizontal edge entering column `H_n` is present only in row `1 - W_n`.

use std::fmt::Write as _;

use rand_core::RngCore;
use serde::Serialize;

use crate::closed_form::{TrapKind, TrapShape};
use crate::error::{domain, Error, Result};
use crate::rng::{below, geometric, StreamKey};

pub const LEFT: u8 = 1;
pub const RIGHT: u8 = 2;
pub const RUNG: u8 = 4;
/// The vertex lies on the ray. Only set where the ray is determined.
pub const RAY: u8 = 8;

/// Blocks added per lazy extension.
pub const GROWTH_QUANTUM: usize = 64;

/// A vertex `(row, column)`.
pub type Vertex = (u8, i64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Block {
    /// Gap to the right of the rung.
    pub f: u32,
    /// Gap to the left of the rung.
    pub f_prime: u32,
    /// Row of the missing horizontal edge at the block's left end.
    pub w: u8,
}

impl Block {
    pub fn len(&self) -> i64 {
        self.f as i64 + self.f_prime as i64 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct OriginBlock {
    pub g0: u32,
    pub h0: i64,
    pub f0_prime: u32,
    pub w0: u8,
}

impl OriginBlock {
    pub fn new(g0: u32, h0: i64, f0_prime: u32, w0: u8) -> Result<Self> {
        if g0 == 0 || h0 > 0 || h0 <= -(g0 as i64) || f0_prime >= g0 || w0 > 1 {
            return Err(domain(format!(
                "invalid origin block g0={g0}, h0={h0}, f0'={f0_prime}, w0={w0}"
            )));
        }
        Ok(OriginBlock { g0, h0, f0_prime, w0 })
    }

    pub fn f0(&self) -> u32 {
        self.g0 - 1 - self.f0_prime
    }

    pub fn v0(&self) -> i64 {
        self.h0 + self.f0_prime as i64
    }

    pub fn as_block(&self) -> Block {
        Block { f: self.f0(), f_prime: self.f0_prime, w: self.w0 }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("alpha must lie in (0,1), got {alpha}")))
    }
}

/// Draws `F`, `F'` (in that order) and then `W` from `rng`.
pub fn sample_interior_block(rng: &mut impl RngCore, alpha: f64) -> Block {
    let f = geometric(rng, alpha);
    let f_prime = geometric(rng, alpha);
    let w = (rng.next_u64() >> 63) as u8;
    Block { f, f_prime, w }
}

/// Size-biased origin block.
///
/// `G_0 - 1` is drawn by rejection from the negative binomial sum of three
/// geometrics, whose weights `(j+1)(j+2) alpha^j` are thinned by `(j+1)/(j+2)`.
pub fn sample_origin_block(rng: &mut impl RngCore, alpha: f64) -> OriginBlock {
    let g0 = loop {
        let j = geometric(rng, alpha) as u64 + geometric(rng, alpha) as u64 + geometric(rng, alpha) as u64;
        if below(rng, j + 2) <= j {
            break u32::try_from(j + 1).unwrap_or(u32::MAX);
        }
    };
    let h0 = -(below(rng, g0 as u64) as i64);
    let f0_prime = below(rng, g0 as u64) as u32;
    let w0 = (rng.next_u64() >> 63) as u8;
    OriginBlock { g0, h0, f0_prime, w0 }
}

fn zigzag(n: i64) -> u64 {
    ((n << 1) ^ (n >> 63)) as u64
}

/// Deterministic source of blocks: block `n` depends only on `(key, n)`.
/// Selected blocks may be pinned, which is how conditioned trees are built.
#[derive(Debug, Clone)]
pub struct TreeSampler {
    key: StreamKey,
    alpha: f64,
    origin: Option<OriginBlock>,
    pinned_w: Vec<(i64, u8)>,
}

impl TreeSampler {
    pub fn new(key: StreamKey, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(TreeSampler { key, alpha, origin: None, pinned_w: Vec::new() })
    }

    pub fn with_origin(mut self, origin: OriginBlock) -> Self {
        self.origin = Some(origin);
        self
    }

    /// Forces `W_n = w` for an interior block `n`.
    pub fn with_w(mut self, n: i64, w: u8) -> Result<Self> {
        if n == 0 || w > 1 {
            return Err(domain(format!("cannot pin W_{n} = {w}")));
        }
        self.pinned_w.retain(|&(m, _)| m != n);
        self.pinned_w.push((n, w));
        Ok(self)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    pub fn origin(&self) -> OriginBlock {
        self.origin
            .unwrap_or_else(|| sample_origin_block(&mut self.key.child(0).stream(), self.alpha))
    }

    pub fn block(&self, n: i64) -> Block {
        debug_assert!(n != 0);
        let mut b = sample_interior_block(&mut self.key.child(zigzag(n)).stream(), self.alpha);
        if let Some(&(_, w)) = self.pinned_w.iter().find(|&&(m, _)| m == n) {
            b.w = w;
        }
        b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Left,
    Right,
}

/// A finite, materialized range of blocks `n_min ..= n_max` of the infinite
/// tree, together with a per-column adjacency table.
#[derive(Debug, Clone)]
pub struct TreeWindow {
    sampler: Option<TreeSampler>,
    origin: OriginBlock,
    /// Blocks `1, 2, ..`.
    right: Vec<Block>,
    /// Blocks `-1, -2, ..`.
    left: Vec<Block>,
    /// `H_1, H_2, .., H_{n_max + 1}`.
    h_right: Vec<i64>,
    /// `H_{-1}, H_{-2}, ..`.
    h_left: Vec<i64>,
    cells: Vec<[u8; 2]>,
    left_col: i64,
}

impl TreeWindow {
    /// Materializes the origin block and `n_left`/`n_right` blocks on each side.
    pub fn build(sampler: TreeSampler, n_left: usize, n_right: usize) -> Result<Self> {
        if n_left == 0 || n_right == 0 {
            return Err(domain("a window needs at least one block on each side"));
        }
        let origin = sampler.origin();
        let mut w = TreeWindow::bare(Some(sampler), origin);
        w.extend(Side::Right, n_right)?;
        w.extend(Side::Left, n_left)?;
        Ok(w)
    }

    /// A fixed window from explicit blocks; it cannot be extended.
    pub fn from_blocks(origin: OriginBlock, left: Vec<Block>, right: Vec<Block>) -> Result<Self> {
        if left.is_empty() || right.is_empty() {
            return Err(domain("a window needs at least one block on each side"));
        }
        if origin.g0 as i64 != origin.as_block().len() || origin.w0 > 1 {
            return Err(domain("inconsistent origin block"));
        }
        if left.iter().chain(&right).any(|b| b.w > 1) {
            return Err(domain("W must be 0 or 1"));
        }
        let mut w = TreeWindow::bare(None, origin);
        w.push_right(&right);
        w.push_left(&left);
        Ok(w)
    }

    fn bare(sampler: Option<TreeSampler>, origin: OriginBlock) -> Self {
        let h1 = origin.h0 + origin.g0 as i64;
        let mut w = TreeWindow {
            sampler,
            origin,
            right: Vec::new(),
            left: Vec::new(),
            h_right: vec![h1],
            h_left: Vec::new(),
            cells: vec![[0, 0]; origin.g0 as usize],
            left_col: origin.h0,
        };
        w.paint(0);
        w
    }

    /// Appends `n_blocks` sampled blocks on `side`. Existing blocks are untouched.
    pub fn extend(&mut self, side: Side, n_blocks: usize) -> Result<()> {
        if n_blocks == 0 {
            return Ok(());
        }
        let sampler = self
            .sampler
            .as_ref()
            .ok_or_else(|| Error::Unmaterialized("window has no block source".into()))?;
        let blocks: Vec<Block> = match side {
            Side::Right => {
                let start = self.n_max() + 1;
                (start..start + n_blocks as i64).map(|n| sampler.block(n)).collect()
            }
            Side::Left => {
                let start = self.n_min() - 1;
                (0..n_blocks as i64).map(|i| sampler.block(start - i)).collect()
            }
        };
        match side {
            Side::Right => self.push_right(&blocks),
            Side::Left => self.push_left(&blocks),
        }
        Ok(())
    }

    fn push_right(&mut self, blocks: &[Block]) {
        let old_max = self.n_max();
        for b in blocks {
            let h = *self.h_right.last().unwrap();
            self.right.push(*b);
            self.h_right.push(h + b.len());
        }
        let new_len = (self.h(self.n_max() + 1) - self.left_col) as usize;
        self.cells.resize(new_len, [0, 0]);
        for n in old_max..=self.n_max() {
            self.paint(n);
        }
    }

    /// `blocks[0]` becomes the new `n_min - 1`, `blocks[1]` the one before it.
    fn push_left(&mut self, blocks: &[Block]) {
        let old_min = self.n_min();
        let mut h = self.h(old_min);
        for b in blocks {
            h -= b.len();
            self.left.push(*b);
            self.h_left.push(h);
        }
        let added = (self.left_col - h) as usize;
        let mut cells = vec![[0u8, 0u8]; added + self.cells.len()];
        cells[added..].copy_from_slice(&self.cells);
        self.cells = cells;
        self.left_col = h;
        for n in self.n_min()..=old_min {
            self.paint(n);
        }
    }

    /// ORs block `n`'s edges, and its ray if determined, into the cell table.
    fn paint(&mut self, n: i64) {
        let b = self.block(n);
        let (h, next) = (self.h(n), self.h(n + 1));
        let v = h + b.f_prime as i64;
        let base = self.left_col;
        let idx = |c: i64| (c - base) as usize;
        for c in h..next {
            let cell = &mut self.cells[idx(c)];
            for r in 0..2 {
                if c > h {
                    cell[r] |= LEFT;
                }
                if c < next - 1 {
                    cell[r] |= RIGHT;
                }
            }
        }
        self.cells[idx(v)][0] |= RUNG;
        self.cells[idx(v)][1] |= RUNG;
        let open = (1 - b.w) as usize;
        self.cells[idx(h)][open] |= LEFT;
        if h > base {
            self.cells[idx(h - 1)][open] |= RIGHT;
        }
        if n < self.n_max() {
            let out = (1 - self.block(n + 1).w) as usize;
            if out == open {
                for c in h..next {
                    self.cells[idx(c)][open] |= RAY;
                }
            } else {
                for c in h..=v {
                    self.cells[idx(c)][open] |= RAY;
                }
                for c in v..next {
                    self.cells[idx(c)][out] |= RAY;
                }
            }
        }
    }

    pub fn sampler(&self) -> Option<&TreeSampler> {
        self.sampler.as_ref()
    }

    pub fn origin(&self) -> OriginBlock {
        self.origin
    }

    pub fn n_min(&self) -> i64 {
        -(self.left.len() as i64)
    }

    pub fn n_max(&self) -> i64 {
        self.right.len() as i64
    }

    pub fn block(&self, n: i64) -> Block {
        match n {
            0 => self.origin.as_block(),
            n if n > 0 => self.right[(n - 1) as usize],
            n => self.left[(-n - 1) as usize],
        }
    }

    /// `H_n`, defined for `n_min <= n <= n_max + 1`.
    pub fn h(&self, n: i64) -> i64 {
        match n {
            0 => self.origin.h0,
            n if n > 0 => self.h_right[(n - 1) as usize],
            n => self.h_left[(-n - 1) as usize],
        }
    }

    pub fn v(&self, n: i64) -> i64 {
        self.h(n) + self.block(n).f_prime as i64
    }

    pub fn left_col(&self) -> i64 {
        self.left_col
    }

    pub fn right_col(&self) -> i64 {
        self.left_col + self.cells.len() as i64 - 1
    }

    /// First column of the outermost right block; walkers at or beyond it
    /// need the window extended.
    pub fn guard_right(&self) -> i64 {
        self.h(self.n_max())
    }

    /// First column of the second-outermost left block.
    pub fn guard_left(&self) -> i64 {
        self.h(self.n_min() + 1)
    }

    /// Block containing column `c`, if materialized.
    pub fn block_of(&self, c: i64) -> Option<i64> {
        if c < self.left_col || c > self.right_col() {
            return None;
        }
        if c >= self.origin.h0 {
            let i = self.h_right.partition_point(|&h| h <= c);
            Some(i as i64)
        } else {
            let i = self.h_left.partition_point(|&h| h > c);
            Some(-(i as i64) - 1)
        }
    }

    #[inline(always)]
    pub fn cell(&self, v: Vertex) -> u8 {
        self.cells[(v.1 - self.left_col) as usize][v.0 as usize]
    }

    pub fn cell_checked(&self, v: Vertex) -> Option<u8> {
        if v.0 > 1 || v.1 < self.left_col || v.1 > self.right_col() {
            None
        } else {
            Some(self.cell(v))
        }
    }

    pub fn cells(&self) -> &[[u8; 2]] {
        &self.cells
    }

    pub fn is_on_ray(&self, v: Vertex) -> bool {
        self.cell_checked(v).is_some_and(|m| m & RAY != 0)
    }

    /// Tree neighbours of `v`, each with its conductance exponent.
    pub fn neighbors(&self, v: Vertex) -> Result<Vec<(Vertex, i64)>> {
        let m = self
            .cell_checked(v)
            .ok_or_else(|| Error::Unmaterialized(format!("vertex {v:?} outside the window")))?;
        let (r, c) = v;
        if m & RIGHT == 0 && c == self.right_col() {
            return Err(Error::Unmaterialized(format!("right edge of {v:?} not yet sampled")));
        }
        let mut out = Vec::with_capacity(3);
        if m & LEFT != 0 {
            out.push(((r, c - 1), c));
        }
        if m & RUNG != 0 {
            out.push(((1 - r, c), c));
        }
        if m & RIGHT != 0 {
            out.push(((r, c + 1), c + 1));
        }
        Ok(out)
    }

    /// Number of tree edges with both ends in the window.
    pub fn edge_count(&self) -> u64 {
        let mut n = 0u64;
        for cell in &self.cells {
            for &m in cell {
                n += (m & RIGHT != 0) as u64;
            }
            n += (cell[0] & RUNG != 0) as u64;
        }
        n
    }

    /// Text dump: an `O g0 h0 f0' w0` line, then `n H_n V_n F_n F'_n W_n` per block.
    pub fn dump(&self) -> String {
        let o = self.origin;
        let mut s = format!("O {} {} {} {}\n", o.g0, o.h0, o.f0_prime, o.w0);
        for n in self.n_min()..=self.n_max() {
            let b = self.block(n);
            let _ = writeln!(s, "{} {} {} {} {} {}", n, self.h(n), self.v(n), b.f, b.f_prime, b.w);
        }
        s
    }

    /// Checks the ordering, cell-table and tree invariants. Used by tests.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Domain(msg));
        if !(self.origin.h0 <= 0 && self.h(1) > 0) {
            return bad("origin block does not cover column 0".into());
        }
        for n in self.n_min()..=self.n_max() {
            let b = self.block(n);
            if self.h(n + 1) - self.h(n) != b.len() {
                return bad(format!("gap of block {n} does not match F + F' + 1"));
            }
            if !(self.h(n) <= self.v(n) && self.v(n) < self.h(n + 1)) {
                return bad(format!("rung of block {n} outside its block"));
            }
        }
        for c in self.left_col..=self.right_col() {
            let cell = self.cell((0, c));
            let other = self.cell((1, c));
            if (cell & RUNG != 0) != (other & RUNG != 0) {
                return bad(format!("rung bits disagree at column {c}"));
            }
            if c < self.right_col() {
                for r in 0..2u8 {
                    let here = self.cell((r, c)) & RIGHT != 0;
                    let there = self.cell((r, c + 1)) & LEFT != 0;
                    if here != there {
                        return bad(format!("asymmetric edge at ({r},{c})"));
                    }
                }
                let missing = (self.cell((0, c)) & RIGHT == 0) as u8 + (self.cell((1, c)) & RIGHT == 0) as u8;
                let boundary = self.block_of(c + 1).is_some_and(|n| self.h(n) == c + 1);
                if missing != boundary as u8 {
                    return bad(format!("wrong number of missing edges between {c} and {}", c + 1));
                }
            }
        }
        let rungs = self.cells.iter().filter(|c| c[0] & RUNG != 0).count() as i64;
        if rungs != self.n_max() - self.n_min() + 1 {
            return bad("expected exactly one rung per block".into());
        }
        let vertices = 2 * self.cells.len() as u64;
        if self.edge_count() + 1 != vertices {
            return bad("edge count is not |V| - 1".into());
        }
        // connected with |V|-1 edges implies a tree
        let mut seen = vec![[false; 2]; self.cells.len()];
        let mut stack = vec![(0u8, self.left_col)];
        seen[0][0] = true;
        let mut count = 1u64;
        while let Some((r, c)) = stack.pop() {
            let m = self.cell((r, c));
            let mut push = |v: Vertex| {
                let s = &mut seen[(v.1 - self.left_col) as usize][v.0 as usize];
                if !*s {
                    *s = true;
                    count += 1;
                    stack.push(v);
                }
            };
            if m & LEFT != 0 && c > self.left_col {
                push((r, c - 1));
            }
            if m & RIGHT != 0 {
                push((r, c + 1));
            }
            if m & RUNG != 0 {
                push((1 - r, c));
            }
        }
        if count != vertices {
            return bad("window is not connected".into());
        }
        Ok(())
    }
}

/// The ray, enumerated left to right over the blocks where it is determined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RayEnumeration {
    first_index: i64,
    vertices: Vec<Vertex>,
    /// Offset into `vertices` of the first ray vertex of each column.
    col_start: Vec<usize>,
    first_col: i64,
}

impl RayEnumeration {
    pub fn first_index(&self) -> i64 {
        self.first_index
    }

    pub fn last_index(&self) -> i64 {
        self.first_index + self.vertices.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn get(&self, i: i64) -> Option<Vertex> {
        let k = i.checked_sub(self.first_index)?;
        if k < 0 {
            return None;
        }
        self.vertices.get(k as usize).copied()
    }

    pub fn index_of(&self, v: Vertex) -> Option<i64> {
        let k = v.1.checked_sub(self.first_col)?;
        if k < 0 || k as usize >= self.col_start.len() {
            return None;
        }
        let s = self.col_start[k as usize];
        for j in s..(s + 2).min(self.vertices.len()) {
            if self.vertices[j] == v {
                return Some(self.first_index + j as i64);
            }
        }
        None
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Vertex)> + '_ {
        self.vertices.iter().enumerate().map(move |(j, &v)| (self.first_index + j as i64, v))
    }
}

/// Enumerates the ray of blocks `n_min ..= n_max - 1`; index 0 is the first ray
/// vertex reached in column 0.
pub fn ray_of(window: &TreeWindow) -> RayEnumeration {
    let mut vertices = Vec::new();
    for n in window.n_min()..window.n_max() {
        let b = window.block(n);
        let (h, next) = (window.h(n), window.h(n + 1));
        let r_in = 1 - b.w;
        let r_out = 1 - window.block(n + 1).w;
        if r_in == r_out {
            vertices.extend((h..next).map(|c| (r_in, c)));
        } else {
            let v = h + b.f_prime as i64;
            vertices.extend((h..=v).map(|c| (r_in, c)));
            vertices.extend((v..next).map(|c| (r_out, c)));
        }
    }
    let first_col = vertices.first().map_or(0, |v| v.1);
    let mut col_start = Vec::new();
    for (j, v) in vertices.iter().enumerate() {
        if (v.1 - first_col) as usize == col_start.len() {
            col_start.push(j);
        }
    }
    let zero = col_start[(0 - first_col) as usize] as i64;
    RayEnumeration { first_index: -zero, vertices, col_start, first_col }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrapDescriptor {
    pub shape: TrapShape,
    pub anchor: Vertex,
    /// Block the trap belongs to.
    pub block: i64,
}

/// All traps of the blocks whose ray is determined.
pub fn traps_of(window: &TreeWindow) -> Vec<TrapDescriptor> {
    let mut out = Vec::new();
    for n in window.n_min()..window.n_max() {
        let b = window.block(n);
        let v = window.v(n);
        let r_in = 1 - b.w;
        let r_out = 1 - window.block(n + 1).w;
        let (k, l) = (b.f as i64, b.f_prime as i64);
        let mut push = |kind, anchor, k, l| {
            let shape = TrapShape::new(kind, k, l).expect("arm lengths are valid by construction");
            out.push(TrapDescriptor { shape, anchor, block: n });
        };
        if r_in == r_out {
            push(TrapKind::C, (r_in, v), k, l);
        } else {
            if k >= 1 {
                push(TrapKind::A, (r_in, v), k, 0);
            }
            if l >= 1 {
                push(TrapKind::B, (r_out, v), 0, l);
            }
        }
    }
    out
}
