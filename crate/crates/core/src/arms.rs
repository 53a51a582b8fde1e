//! Arm events in annuli: existence and exact counts of pairwise
//! vertex-disjoint open (primal) and vacant (dual) crossings of
//! `A(m,n)`, plus the rectangle crossing pair used for the self-duality
//! check.

use alloc::vec;
use alloc::vec::Vec;

use crate::lattice::{Annulus, Configuration, DualEdge, DualVertex, Edge, Vertex};

/// An arm-count query on `A(m,n)` centered at `base`: at least `open_arms`
/// disjoint open crossings and at least `closed_arms` disjoint vacant dual
/// crossings.
#[derive(Clone, Copy, Debug)]
pub struct ArmQuery {
    pub m: i32,
    pub n: i32,
    pub open_arms: u32,
    pub closed_arms: u32,
    pub base: Vertex,
}

impl ArmQuery {
    pub fn new(m: i32, n: i32, open_arms: u32, closed_arms: u32) -> Self {
        assert!(m < n && m >= 0);
        assert!(open_arms + closed_arms >= 1);
        ArmQuery { m, n, open_arms, closed_arms, base: Vertex::ORIGIN }
    }
}

/// Exact disjoint-crossing counts and the resulting event indicator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArmResult {
    pub max_open_disjoint: usize,
    pub max_closed_disjoint: usize,
    pub event_holds: bool,
}

/// True iff an open path inside `A(m,n)` joins `∂B(m)` to `∂B(n)`.
/// Multi-source BFS with early exit; agrees with `count >= 1`.
pub fn one_arm(cfg: &Configuration, m: i32, n: i32) -> bool {
    assert!(0 <= m && m < n);
    let region = cfg.region();
    let ann = Annulus::new(m, n);
    let mut seen = vec![false; region.vertex_count()];
    let mut queue: Vec<Vertex> = Vec::new();
    for v in ring(Vertex::ORIGIN, m) {
        if region.contains(v) {
            seen[region.vertex_index(v)] = true;
            queue.push(v);
        }
    }
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        if v.norm_inf() == n {
            return true;
        }
        for w in v.neighbors() {
            if !ann.contains(w) {
                continue;
            }
            let wi = region.vertex_index(w);
            if !seen[wi] && cfg.is_open(Edge::new(v, w)) {
                seen[wi] = true;
                queue.push(w);
            }
        }
    }
    false
}

/// True iff a vacant dual path crosses the dual annulus (the dual edges of
/// primal `A(m,n)` edges) from the faces adjacent to `B(m)` out to the
/// faces adjacent to `∂B(n)`.
pub fn closed_dual_arm(cfg: &Configuration, m: i32, n: i32) -> bool {
    count_closed_capped(cfg, Vertex::ORIGIN, m, n, 1) >= 1
}

/// Exact maximum number of pairwise vertex-disjoint open crossings of
/// `A(m,n)`, as a unit-vertex-capacity maximum flow from `∂B(m)` to
/// `∂B(n)` over the open annulus subgraph.
pub fn count_disjoint_open_crossings(cfg: &Configuration, m: i32, n: i32) -> usize {
    count_open_capped(cfg, Vertex::ORIGIN, m, n, usize::MAX)
}

/// Exact maximum number of pairwise vertex-disjoint vacant crossings of the
/// dual annulus.
pub fn count_disjoint_closed_crossings(cfg: &Configuration, m: i32, n: i32) -> usize {
    count_closed_capped(cfg, Vertex::ORIGIN, m, n, usize::MAX)
}

/// Exact counts for both colors plus the event indicator.
pub fn arm_event(cfg: &Configuration, q: &ArmQuery) -> ArmResult {
    let max_open = count_open_capped(cfg, q.base, q.m, q.n, usize::MAX);
    let max_closed = count_closed_capped(cfg, q.base, q.m, q.n, usize::MAX);
    ArmResult {
        max_open_disjoint: max_open,
        max_closed_disjoint: max_closed,
        event_holds: max_open >= q.open_arms as usize && max_closed >= q.closed_arms as usize,
    }
}

/// Event indicator only, stopping each flow as soon as the requested count
/// is reached. Equal to `arm_event(..).event_holds`.
pub fn arm_event_holds(cfg: &Configuration, q: &ArmQuery) -> bool {
    let i = q.open_arms as usize;
    let j = q.closed_arms as usize;
    if i > 0 && count_open_capped(cfg, q.base, q.m, q.n, i) < i {
        return false;
    }
    if j > 0 && count_closed_capped(cfg, q.base, q.m, q.n, j) < j {
        return false;
    }
    true
}

// ---------------------------------------------------------------------------
// unit-capacity max flow

struct Arc {
    to: u32,
    cap: u8,
}

/// Residual graph with paired forward/backward arcs; arc `i ^ 1` is the
/// reverse of arc `i`. Adjacency is built once into a flat CSR layout so
/// bulk sampling does not pay a per-node allocation.
struct FlowGraph {
    nodes: usize,
    arcs: Vec<Arc>,
    tails: Vec<u32>,
    off: Vec<u32>,
    adj: Vec<u32>,
}

impl FlowGraph {
    fn new(nodes: usize) -> Self {
        FlowGraph { nodes, arcs: Vec::new(), tails: Vec::new(), off: Vec::new(), adj: Vec::new() }
    }

    fn add_arc(&mut self, u: usize, v: usize) {
        self.arcs.push(Arc { to: v as u32, cap: 1 });
        self.arcs.push(Arc { to: u as u32, cap: 0 });
        self.tails.push(u as u32);
        self.tails.push(v as u32);
    }

    fn finalize(&mut self) {
        let mut off = vec![0u32; self.nodes + 1];
        for &t in &self.tails {
            off[t as usize + 1] += 1;
        }
        for i in 0..self.nodes {
            off[i + 1] += off[i];
        }
        let mut cursor = off.clone();
        let mut adj = vec![0u32; self.tails.len()];
        for (id, &t) in self.tails.iter().enumerate() {
            adj[cursor[t as usize] as usize] = id as u32;
            cursor[t as usize] += 1;
        }
        self.off = off;
        self.adj = adj;
    }

    /// Max flow from `s` to `t`, stopping once `limit` is reached. With unit
    /// capacities each breadth-first augmentation adds exactly one.
    fn max_flow(&mut self, s: usize, t: usize, limit: usize) -> usize {
        self.finalize();
        let n = self.nodes;
        let mut flow = 0;
        let mut pred: Vec<u32> = vec![u32::MAX; n];
        let mut queue: Vec<u32> = Vec::with_capacity(n);
        while flow < limit {
            for p in pred.iter_mut() {
                *p = u32::MAX;
            }
            queue.clear();
            queue.push(s as u32);
            pred[s] = u32::MAX - 1; // mark visited with no incoming arc
            let mut head = 0;
            let mut reached = false;
            'bfs: while head < queue.len() {
                let u = queue[head] as usize;
                head += 1;
                for &aid in &self.adj[self.off[u] as usize..self.off[u + 1] as usize] {
                    let arc = &self.arcs[aid as usize];
                    let v = arc.to as usize;
                    if arc.cap > 0 && pred[v] == u32::MAX {
                        pred[v] = aid;
                        if v == t {
                            reached = true;
                            break 'bfs;
                        }
                        queue.push(v as u32);
                    }
                }
            }
            if !reached {
                break;
            }
            let mut v = t;
            while v != s {
                let aid = pred[v] as usize;
                self.arcs[aid].cap -= 1;
                self.arcs[aid ^ 1].cap += 1;
                v = self.arcs[aid ^ 1].to as usize;
            }
            flow += 1;
        }
        flow
    }
}

/// The vertices at max-norm distance exactly `r` from `base`.
fn ring(base: Vertex, r: i32) -> Vec<Vertex> {
    if r == 0 {
        let mut out = Vec::with_capacity(1);
        out.push(base);
        return out;
    }
    let mut out = Vec::with_capacity(8 * r as usize);
    for x in -r..=r {
        out.push(Vertex::new(base.x + x, base.y - r));
        out.push(Vertex::new(base.x + x, base.y + r));
    }
    for y in (1 - r)..r {
        out.push(Vertex::new(base.x - r, base.y + y));
        out.push(Vertex::new(base.x + r, base.y + y));
    }
    out
}

/// Vertex-disjoint open crossings, translated so the annulus is centered at
/// `base`, with the flow capped at `limit`.
///
/// Only the subgraph reachable from `∂B(m)` through open annulus edges is
/// materialized; every crossing lives inside it, so the count is unchanged
/// and bulk runs pay for cluster size rather than box size.
pub fn count_open_capped(
    cfg: &Configuration,
    base: Vertex,
    m: i32,
    n: i32,
    limit: usize,
) -> usize {
    assert!(0 <= m && m < n);
    let region = cfg.region();
    let ann = Annulus::new(m, n);
    let rel = |v: Vertex| Vertex::new(v.x - base.x, v.y - base.y);

    // node ids: split each reachable vertex into in (2k) / out (2k+1)
    let mut id = vec![u32::MAX; region.vertex_count()];
    let mut members: Vec<Vertex> = Vec::new();
    for v in ring(base, m) {
        if region.contains(v) {
            id[region.vertex_index(v)] = members.len() as u32;
            members.push(v);
        }
    }
    let mut any_sink = false;
    let mut head = 0;
    while head < members.len() {
        let v = members[head];
        head += 1;
        if rel(v).norm_inf() == n {
            any_sink = true;
            continue;
        }
        for w in v.neighbors() {
            if !region.contains(w) || !ann.contains(rel(w)) {
                continue;
            }
            let wi = region.vertex_index(w);
            if id[wi] == u32::MAX && cfg.is_open(Edge::new(v, w)) {
                id[wi] = members.len() as u32;
                members.push(w);
            }
        }
    }
    if !any_sink {
        return 0;
    }
    let source = 2 * members.len();
    let sink = source + 1;
    let mut g = FlowGraph::new(2 * members.len() + 2);
    for (k, v) in members.iter().enumerate() {
        g.add_arc(2 * k, 2 * k + 1);
        let r = rel(*v).norm_inf();
        if r == m {
            g.add_arc(source, 2 * k);
        }
        if r == n {
            g.add_arc(2 * k + 1, sink);
        }
    }
    for v in members.iter() {
        // emit each edge once from its lexicographically smaller endpoint
        for w in [Vertex::new(v.x + 1, v.y), Vertex::new(v.x, v.y + 1)] {
            if !region.contains(w) || !ann.contains(rel(w)) {
                continue;
            }
            let b = id[region.vertex_index(w)];
            if b == u32::MAX || !cfg.is_open(Edge::new(*v, w)) {
                continue;
            }
            let a = id[region.vertex_index(*v)] as usize;
            let b = b as usize;
            g.add_arc(2 * a + 1, 2 * b);
            g.add_arc(2 * b + 1, 2 * a);
        }
    }
    g.max_flow(source, sink, limit)
}

/// Vertex-disjoint vacant crossings of the dual annulus (dual edges whose
/// primal edge lies in `A(m,n)` around `base`), capped at `limit`. Sources
/// are the dual vertices hugging `B(m)` (doubled max-norm at most `2m+1`),
/// sinks those hugging `∂B(n)` from either side (at least `2n-1`).
pub fn count_closed_capped(
    cfg: &Configuration,
    base: Vertex,
    m: i32,
    n: i32,
    limit: usize,
) -> usize {
    assert!(0 <= m && m < n);
    let region = cfg.region();
    let ann = Annulus::new(m, n);
    let rel = |v: Vertex| Vertex::new(v.x - base.x, v.y - base.y);
    let rel_norm = |d: DualVertex| {
        let x = 2 * (d.a - base.x) as i64 + 1;
        let y = 2 * (d.b - base.y) as i64 + 1;
        x.abs().max(y.abs())
    };

    let lo = 2 * m as i64 + 1;
    let hi = 2 * n as i64 - 1;

    // a dual edge is traversable when its primal edge is a closed annulus edge
    let passable = |a: DualVertex, b: DualVertex| {
        let e = DualEdge::new(a, b).primal();
        region.contains_edge(e)
            && ann.contains(rel(e.a))
            && ann.contains(rel(e.b))
            && !cfg.is_open(e)
    };
    let dual_neighbors = |d: DualVertex| {
        [
            DualVertex::new(d.a + 1, d.b),
            DualVertex::new(d.a - 1, d.b),
            DualVertex::new(d.a, d.b + 1),
            DualVertex::new(d.a, d.b - 1),
        ]
    };

    // index dual vertices over the face grid of the configuration's box,
    // extended one ring outward
    let nr = region.radius();
    let stride = (2 * nr + 2) as usize;
    let fid = |d: DualVertex| ((d.a + nr + 1) as usize) + ((d.b + nr + 1) as usize) * stride;
    let in_grid =
        |d: DualVertex| d.a >= -nr - 1 && d.a <= nr && d.b >= -nr - 1 && d.b <= nr;

    // explore only what the inner dual ring reaches through vacant duals
    let mut id = vec![u32::MAX; stride * stride];
    let mut members: Vec<DualVertex> = Vec::new();
    for da in -(m + 1)..=m {
        for db in -(m + 1)..=m {
            let d = DualVertex::new(base.x + da, base.y + db);
            if !in_grid(d) || id[fid(d)] != u32::MAX {
                continue;
            }
            if dual_neighbors(d).iter().any(|&d2| passable(d, d2)) {
                id[fid(d)] = members.len() as u32;
                members.push(d);
            }
        }
    }
    let mut any_sink = false;
    let mut head = 0;
    while head < members.len() {
        let d = members[head];
        head += 1;
        if rel_norm(d) >= hi {
            any_sink = true;
            continue;
        }
        for d2 in dual_neighbors(d) {
            if !in_grid(d2) || id[fid(d2)] != u32::MAX || !passable(d, d2) {
                continue;
            }
            id[fid(d2)] = members.len() as u32;
            members.push(d2);
        }
    }
    if !any_sink {
        return 0;
    }
    let source = 2 * members.len();
    let sink = source + 1;
    let mut g = FlowGraph::new(2 * members.len() + 2);
    for (k, d) in members.iter().enumerate() {
        g.add_arc(2 * k, 2 * k + 1);
        let r = rel_norm(*d);
        if r <= lo {
            g.add_arc(source, 2 * k);
        }
        if r >= hi {
            g.add_arc(2 * k + 1, sink);
        }
    }
    for (ka, d) in members.iter().enumerate() {
        // emit each dual edge once from its lexicographically smaller end
        for d2 in [DualVertex::new(d.a + 1, d.b), DualVertex::new(d.a, d.b + 1)] {
            if !in_grid(d2) {
                continue;
            }
            let kb = id[fid(d2)];
            if kb == u32::MAX || !passable(*d, d2) {
                continue;
            }
            let kb = kb as usize;
            g.add_arc(2 * ka + 1, 2 * kb);
            g.add_arc(2 * kb + 1, 2 * ka);
        }
    }
    g.max_flow(source, sink, limit)
}

// ---------------------------------------------------------------------------
// rectangle crossings

/// All edges of the rectangle with vertex set `{0..=n+1} x {0..=n}` (an
/// `(n+1) x n` rectangle in edge lengths), in a fixed order.
pub fn rectangle_edges(n: i32) -> Vec<Edge> {
    assert!(n >= 1);
    let mut edges = Vec::new();
    for y in 0..=n {
        for x in 0..=n {
            edges.push(Edge::new(Vertex::new(x, y), Vertex::new(x + 1, y)));
        }
        if y < n {
            for x in 0..=n + 1 {
                edges.push(Edge::new(Vertex::new(x, y), Vertex::new(x, y + 1)));
            }
        }
    }
    edges
}

/// Open left-right crossing of the `(n+1) x n` rectangle: an open path from
/// the column `x = 0` to the column `x = n+1`.
pub fn open_horizontal_crossing(n: i32, is_open: &mut dyn FnMut(Edge) -> bool) -> bool {
    let w = (n + 2) as usize;
    let h = (n + 1) as usize;
    let idx = |v: Vertex| v.x as usize + v.y as usize * w;
    let inside = |v: Vertex| (0..=n + 1).contains(&v.x) && (0..=n).contains(&v.y);
    let mut seen = vec![false; w * h];
    let mut queue: Vec<Vertex> = (0..=n).map(|y| Vertex::new(0, y)).collect();
    for v in queue.iter() {
        seen[idx(*v)] = true;
    }
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        if v.x == n + 1 {
            return true;
        }
        for u in v.neighbors() {
            if inside(u) && !seen[idx(u)] && is_open(Edge::new(v, u)) {
                seen[idx(u)] = true;
                queue.push(u);
            }
        }
    }
    false
}

/// Vacant top-bottom crossing of the rectangle's dual: a path of closed dual
/// edges from the faces below the bottom row (`b = -1`) to the faces above
/// the top row (`b = n`). Usable dual edges are the duals of the rectangle's
/// horizontal edges and of its interior vertical edges; exactly one of this
/// event and [`open_horizontal_crossing`] occurs in every configuration.
pub fn closed_dual_vertical_crossing(n: i32, is_open: &mut dyn FnMut(Edge) -> bool) -> bool {
    let w = (n + 1) as usize; // faces a in 0..=n
    let h = (n + 2) as usize; // faces b in -1..=n
    let idx = |d: DualVertex| d.a as usize + (d.b + 1) as usize * w;
    let inside = |d: DualVertex| (0..=n).contains(&d.a) && (-1..=n).contains(&d.b);
    // dual step is traversable iff the bisected primal edge is a rectangle
    // edge other than a side vertical, and is closed
    let mut passable = |f: DualVertex, g: DualVertex| {
        let e = crate::lattice::DualEdge::new(f, g).primal();
        if e.orientation() == crate::lattice::Orientation::Vertical && (e.a.x == 0 || e.a.x == n + 1)
        {
            return false;
        }
        !is_open(e)
    };
    let mut seen = vec![false; w * h];
    let mut queue: Vec<DualVertex> = (0..=n).map(|a| DualVertex::new(a, -1)).collect();
    for d in queue.iter() {
        seen[idx(*d)] = true;
    }
    let mut head = 0;
    while head < queue.len() {
        let f = queue[head];
        head += 1;
        if f.b == n {
            return true;
        }
        for g in [
            DualVertex::new(f.a + 1, f.b),
            DualVertex::new(f.a - 1, f.b),
            DualVertex::new(f.a, f.b + 1),
            DualVertex::new(f.a, f.b - 1),
        ] {
            if inside(g) && !seen[idx(g)] && passable(f, g) {
                seen[idx(g)] = true;
                queue.push(g);
            }
        }
    }
    false
}
