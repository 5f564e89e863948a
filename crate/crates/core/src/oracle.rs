//! Exact computations on finite electrical networks: stationary laws, mean
//! hitting times by dense linear solves, and escape probabilities along the
//! ray from effective resistances.

use nalgebra::{DMatrix, DVector};

use crate::closed_form::{TrapKind, TrapShape};
use crate::error::{domain, Error, Result};
use crate::tree::{RayEnumeration, TreeWindow, Vertex, LEFT, RIGHT, RUNG};

/// Undirected graph on `0..n` with positive edge weights (conductances).
#[derive(Debug, Clone, Default)]
pub struct WeightedGraph {
    adj: Vec<Vec<(usize, f64)>>,
    edges: Vec<(usize, usize, f64)>,
}

impl WeightedGraph {
    pub fn new(n: usize) -> Self {
        WeightedGraph { adj: vec![Vec::new(); n], edges: Vec::new() }
    }

    pub fn add_edge(&mut self, u: usize, v: usize, weight: f64) -> Result<()> {
        if u >= self.len() || v >= self.len() || u == v {
            return Err(domain(format!("bad edge ({u},{v}) on {} vertices", self.len())));
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(domain(format!("edge weight must be positive and finite, got {weight}")));
        }
        self.adj[u].push((v, weight));
        self.adj[v].push((u, weight));
        self.edges.push((u, v, weight));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn neighbors(&self, u: usize) -> &[(usize, f64)] {
        &self.adj[u]
    }

    /// `C(x)`, the sum of the weights at `x`.
    pub fn vertex_weight(&self, x: usize) -> f64 {
        self.adj[x].iter().map(|&(_, w)| w).sum()
    }

    /// `C(V) = sum_x C(x)`, twice the total edge weight.
    pub fn total_weight(&self) -> f64 {
        2.0 * self.edges.iter().map(|e| e.2).sum::<f64>()
    }

    pub fn is_connected(&self) -> bool {
        if self.is_empty() {
            return false;
        }
        let mut seen = vec![false; self.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &(v, _) in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    fn check(&self) -> Result<()> {
        if self.len() < 2 || !self.is_connected() {
            return Err(domain("graph must be connected with at least two vertices"));
        }
        Ok(())
    }

    fn check_vertex(&self, x: usize) -> Result<()> {
        if x < self.len() {
            Ok(())
        } else {
            Err(domain(format!("vertex {x} not in graph")))
        }
    }

    /// Row-stochastic transition matrix of the network walk.
    pub fn transition_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut p = DMatrix::zeros(n, n);
        for u in 0..n {
            let c = self.vertex_weight(u);
            for &(v, w) in &self.adj[u] {
                p[(u, v)] += w / c;
            }
        }
        p
    }
}

/// `pi(x) = C(x) / C(V)`.
pub fn stationary_distribution(g: &WeightedGraph) -> Result<Vec<f64>> {
    g.check()?;
    let total = g.total_weight();
    Ok((0..g.len()).map(|x| g.vertex_weight(x) / total).collect())
}

/// `E_x[tau_x^+] = C(V) / C(x)`.
pub fn expected_return_time(g: &WeightedGraph, x: usize) -> Result<f64> {
    g.check()?;
    g.check_vertex(x)?;
    Ok(g.total_weight() / g.vertex_weight(x))
}

/// First-return time from one step plus the hitting times of `x`.
pub fn expected_return_time_linear(g: &WeightedGraph, x: usize) -> Result<f64> {
    g.check()?;
    g.check_vertex(x)?;
    let h = hitting_times(g, &[x])?;
    let c = g.vertex_weight(x);
    Ok(1.0 + g.neighbors(x).iter().map(|&(y, w)| w / c * h.times[y]).sum::<f64>())
}

#[derive(Debug, Clone)]
pub struct HittingTimes {
    /// Mean hitting time of the boundary from each vertex (0 on the boundary).
    pub times: Vec<f64>,
    /// `||(I - P)h - 1||_inf / (1 + ||h||_inf)` over interior vertices.
    pub residual: f64,
}

/// Solves `(I - P_int) h = 1` by dense LU.
pub fn hitting_times(g: &WeightedGraph, boundary: &[usize]) -> Result<HittingTimes> {
    g.check()?;
    if boundary.is_empty() {
        return Err(domain("boundary must be nonempty"));
    }
    let mut is_boundary = vec![false; g.len()];
    for &b in boundary {
        g.check_vertex(b)?;
        is_boundary[b] = true;
    }
    let interior: Vec<usize> = (0..g.len()).filter(|&u| !is_boundary[u]).collect();
    let mut slot = vec![usize::MAX; g.len()];
    for (i, &u) in interior.iter().enumerate() {
        slot[u] = i;
    }
    let m = interior.len();
    // Row u scaled by C(u): C(u) h_u - sum_int w(u,v) h_v = C(u).
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for (i, &u) in interior.iter().enumerate() {
        let c = g.vertex_weight(u);
        a[(i, i)] = c;
        rhs[i] = c;
        for &(v, w) in g.neighbors(u) {
            if !is_boundary[v] {
                a[(i, slot[v])] -= w;
            }
        }
    }
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("hitting-time system is singular".into()))?;
    let mut times = vec![0.0; g.len()];
    for (i, &u) in interior.iter().enumerate() {
        times[u] = sol[i];
    }
    let scale = 1.0 + times.iter().fold(0.0f64, |m, &t| m.max(t.abs()));
    let mut residual = 0.0f64;
    for &u in &interior {
        let c = g.vertex_weight(u);
        let next: f64 = g.neighbors(u).iter().map(|&(v, w)| w / c * times[v]).sum();
        residual = residual.max((times[u] - next - 1.0).abs());
    }
    Ok(HittingTimes { times, residual: residual / scale })
}

/// Mean number of steps to reach `boundary` from `start`.
pub fn expected_exit_time(g: &WeightedGraph, start: usize, boundary: &[usize]) -> Result<f64> {
    g.check_vertex(start)?;
    if boundary.contains(&start) {
        return Err(domain("start must not lie on the boundary"));
    }
    Ok(hitting_times(g, boundary)?.times[start])
}

/// A trap together with its anchor and the anchor's two ray neighbours,
/// weighted relative to the anchor column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapGadget {
    pub shape: TrapShape,
    pub beta: f64,
}

impl TrapGadget {
    pub const ANCHOR: usize = 0;
    pub const EXITS: [usize; 2] = [1, 2];

    pub fn new(shape: TrapShape, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 1.0) {
            return Err(domain(format!("beta must be finite and >= 1, got {beta}")));
        }
        Ok(TrapGadget { shape, beta })
    }

    /// Vertex 0 is the anchor, 1 and 2 the ray neighbours, then the trap.
    pub fn graph(&self) -> WeightedGraph {
        let TrapShape { kind, k, l } = self.shape;
        let b = self.beta;
        let n = 3 + self.shape.edge_count() as usize;
        let mut g = WeightedGraph::new(n);
        let mut add = |u, v, w| g.add_edge(u, v, w).expect("gadget edges are valid");
        let arm = |add: &mut dyn FnMut(usize, usize, f64), root: usize, first: usize, len: u32, exp0: i32, dir: i32| {
            let mut prev = root;
            for j in 0..len as i32 {
                let v = first + j as usize;
                add(prev, v, b.powi(exp0 + dir * j));
                prev = v;
            }
        };
        match kind {
            TrapKind::A => {
                add(0, 1, 1.0);
                add(0, 2, 1.0);
                arm(&mut add, 0, 3, k, 1, 1);
            }
            TrapKind::B => {
                add(0, 1, 1.0);
                add(0, 2, b);
                arm(&mut add, 0, 3, l, 0, -1);
            }
            TrapKind::C => {
                add(0, 1, 1.0);
                add(0, 2, b);
                add(0, 3, 1.0);
                arm(&mut add, 3, 4, k, 1, 1);
                arm(&mut add, 3, 4 + k as usize, l, 0, -1);
            }
        }
        g
    }

    /// Mean steps from the anchor to a ray neighbour, excluding that last step.
    pub fn trap_time(&self) -> Result<f64> {
        Ok(expected_exit_time(&self.graph(), Self::ANCHOR, &Self::EXITS)? - 1.0)
    }
}

/// The finite tree of a window as a network; edge `e` carries `beta^(x_e - x_0)`
/// with `x_0` the window's leftmost column. Returns the vertex labels too.
pub fn window_graph(window: &TreeWindow, beta: f64) -> Result<(WeightedGraph, Vec<Vertex>)> {
    let (lo, hi) = (window.left_col(), window.right_col());
    let width = (hi - lo + 1) as usize;
    let id = |v: Vertex| (v.1 - lo) as usize * 2 + v.0 as usize;
    let mut g = WeightedGraph::new(2 * width);
    let labels = (0..2 * width).map(|i| ((i % 2) as u8, lo + (i / 2) as i64)).collect();
    for c in lo..=hi {
        for r in 0..2u8 {
            let m = window.cell((r, c));
            if m & RIGHT != 0 && c < hi {
                g.add_edge(id((r, c)), id((r, c + 1)), beta.powi((c + 1 - lo) as i32))?;
            }
            if r == 0 && m & RUNG != 0 {
                g.add_edge(id((0, c)), id((1, c)), beta.powi((c - lo) as i32))?;
            }
            debug_assert!(m & LEFT == 0 || c == lo || window.cell((r, c - 1)) & RIGHT != 0);
        }
    }
    Ok((g, labels))
}

/// Conductance exponent of the ray edge between consecutive ray vertices.
fn ray_edge_exponent(a: Vertex, b: Vertex) -> i64 {
    if a.1 == b.1 {
        a.1
    } else {
        b.1
    }
}

/// Probability that the walk restricted to the ray, started at `phi(n)`,
/// never returns there: `1 / ((C_left + C_right) R_eff(n <-> inf))`.
pub fn escape_probability(ray: &RayEnumeration, n: i64, beta: f64, rel_tol: f64) -> Result<f64> {
    if !(beta.is_finite() && beta > 1.0) {
        return Err(domain(format!("escape probability needs beta > 1, got {beta}")));
    }
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(domain(format!("rel_tol must lie in (0,1), got {rel_tol}")));
    }
    let unmat = || Error::Unmaterialized(format!("ray around index {n} is not materialized"));
    let here = ray.get(n).ok_or_else(unmat)?;
    let prev = ray.get(n - 1).ok_or_else(unmat)?;
    let col = here.1;
    let weight = |a: Vertex, b: Vertex| beta.powi((ray_edge_exponent(a, b) - col) as i32);
    let c_left = weight(prev, here);
    let tail_factor = 2.0 * beta / (beta - 1.0);
    let mut resistance = 0.0;
    let mut c_right = None;
    let mut m = n;
    loop {
        let a = ray.get(m).ok_or_else(unmat)?;
        let b = ray.get(m + 1).ok_or_else(unmat)?;
        let w = weight(a, b);
        c_right.get_or_insert(w);
        resistance += 1.0 / w;
        m += 1;
        let advance = (b.1 - col) as i32;
        if tail_factor * beta.powi(-advance) < rel_tol * resistance {
            break;
        }
    }
    Ok(1.0 / ((c_left + c_right.unwrap()) * resistance))
}
