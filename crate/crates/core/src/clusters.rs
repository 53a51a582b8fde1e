//! Open-cluster labeling and the two volume observables: the conditioned
//! cluster volume `T_n = |C(0) ∩ B(n)|` and the unconditioned count
//! `S_n = #{v in B(n) : v -> ∂B(2n)}`.

use alloc::vec;
use alloc::vec::Vec;

use crate::lattice::{BoxRegion, Configuration, Vertex};

/// Union-find over a fixed index range, path-halving finds and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    /// Reset to all-singletons without reallocating.
    pub fn reset(&mut self) {
        for (i, p) in self.parent.iter_mut().enumerate() {
            *p = i as u32;
        }
        for s in self.size.iter_mut() {
            *s = 1;
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let gp = self.parent[self.parent[x] as usize];
            self.parent[x] = gp;
            x = gp as usize;
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            core::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn connected(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }

    /// Component size of the set containing `x`.
    pub fn component_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r] as usize
    }
}

/// Per-vertex open-cluster labels for one configuration on a box, with
/// component sizes and a boundary-contact flag per component.
pub struct ClusterLabeling {
    region: BoxRegion,
    uf: UnionFind,
}

impl ClusterLabeling {
    pub fn region(&self) -> BoxRegion {
        self.region
    }

    /// Canonical label (union-find root) of the cluster containing `v`.
    pub fn label(&mut self, v: Vertex) -> usize {
        let i = self.region.vertex_index(v);
        self.uf.find(i)
    }

    pub fn connected(&mut self, u: Vertex, v: Vertex) -> bool {
        let (i, j) = (self.region.vertex_index(u), self.region.vertex_index(v));
        self.uf.connected(i, j)
    }

    /// Number of vertices in the cluster of `v` (within the box).
    pub fn size(&mut self, v: Vertex) -> usize {
        let i = self.region.vertex_index(v);
        self.uf.component_size(i)
    }

    /// Whether the cluster of `v` contains a vertex of `∂B(n)`.
    pub fn touches_boundary(&mut self, v: Vertex) -> bool {
        let root = self.label(v);
        let n = self.region.radius();
        if n == 0 {
            return true;
        }
        for w in self.region.vertices() {
            if self.region.on_boundary(w) && self.label(w) == root {
                return true;
            }
        }
        false
    }
}

/// Label the open clusters of a configuration by sweeping every open edge
/// through a union-find.
pub fn label_clusters(cfg: &Configuration) -> ClusterLabeling {
    let region = cfg.region();
    let mut uf = UnionFind::new(region.vertex_count());
    for (i, e) in region.edges().enumerate() {
        if cfg.is_open_index(i) {
            uf.union(region.vertex_index(e.a), region.vertex_index(e.b));
        }
    }
    ClusterLabeling { region, uf }
}

/// Open-cluster vertex set of `start` within the box, by breadth-first
/// search. Independent of the union-find route; used as an oracle.
pub fn bfs_cluster(cfg: &Configuration, start: Vertex) -> Vec<Vertex> {
    let region = cfg.region();
    let mut seen = vec![false; region.vertex_count()];
    let mut queue = vec![start];
    seen[region.vertex_index(start)] = true;
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        for w in v.neighbors() {
            if !region.contains(w) {
                continue;
            }
            let wi = region.vertex_index(w);
            if seen[wi] {
                continue;
            }
            let e = crate::lattice::Edge::new(v, w);
            if cfg.is_open(e) {
                seen[wi] = true;
                queue.push(w);
            }
        }
    }
    queue
}

/// Whether the origin's open cluster reaches `∂B(n)` (`n` = box radius).
pub fn origin_reaches_boundary(cfg: &Configuration) -> bool {
    let region = cfg.region();
    if region.radius() == 0 {
        return true;
    }
    let mut labels = label_clusters(cfg);
    labels.touches_boundary(Vertex::ORIGIN)
}

/// `T_n`: volume of the origin cluster inside `B(n)`, defined only on the
/// conditioning event `{0 -> ∂B(n)}`; `None` otherwise.
pub fn observable_t(cfg: &Configuration) -> Option<usize> {
    let region = cfg.region();
    let mut labels = label_clusters(cfg);
    if region.radius() > 0 && !labels.touches_boundary(Vertex::ORIGIN) {
        return None;
    }
    Some(labels.size(Vertex::ORIGIN))
}

/// `S_n`: the number of vertices of `B(n)` whose open cluster reaches
/// `∂B(2n)`. The configuration must live on `B(2n)`.
pub fn observable_s(cfg: &Configuration, n: i32) -> usize {
    let region = cfg.region();
    assert!(region.radius() == 2 * n, "S_n needs a configuration on B(2n)");
    boundary_reach_count(cfg, n)
}

/// Reusable visit buffers for [`boundary_reach_count_with`], sized for one
/// box and reset on every call.
pub struct ReachScratch {
    seen: Vec<bool>,
    queue: Vec<u32>,
}

impl ReachScratch {
    pub fn new(vertex_count: usize) -> Self {
        ReachScratch { seen: vec![false; vertex_count], queue: Vec::with_capacity(vertex_count) }
    }
}

/// Count vertices of `B(inner)` connected to the boundary of the
/// configuration's own box. One multi-source search from the boundary;
/// equals the per-vertex BFS definition.
pub fn boundary_reach_count(cfg: &Configuration, inner: i32) -> usize {
    let mut scratch = ReachScratch::new(cfg.region().vertex_count());
    boundary_reach_count_with(cfg, inner, &mut scratch)
}

/// As [`boundary_reach_count`], but reusing caller-owned buffers. Only the
/// boundary-connected subgraph is visited, so bulk runs pay for the reached
/// set rather than the edge count. Row/column indices are carried along to
/// keep the inner loop arithmetic incremental (vertex `(x, y)` sits at
/// `(x + r) + (y + r) (2r + 1)`, its edges in the row blocks of stride
/// `4r + 1`: `2r` horizontal then `2r + 1` vertical).
pub fn boundary_reach_count_with(
    cfg: &Configuration,
    inner: i32,
    scratch: &mut ReachScratch,
) -> usize {
    let region = cfg.region();
    assert!(0 <= inner && inner <= region.radius());
    let nv = region.vertex_count();
    assert_eq!(scratch.seen.len(), nv);
    let seen = &mut scratch.seen;
    let queue = &mut scratch.queue;
    seen.fill(false);
    queue.clear();

    let r = region.radius() as usize;
    let side = 2 * r + 1;
    let estride = 4 * r + 1;
    let (ilo, ihi) = (r - inner as usize, r + inner as usize);
    let mut count = 0;
    let push = |seen: &mut [bool], queue: &mut Vec<u32>, count: &mut usize, idx: usize, row: usize, col: usize| {
        if !seen[idx] {
            seen[idx] = true;
            queue.push(idx as u32);
            if (ilo..=ihi).contains(&row) && (ilo..=ihi).contains(&col) {
                *count += 1;
            }
        }
    };
    for k in 0..side {
        push(seen, queue, &mut count, k, 0, k);
        push(seen, queue, &mut count, (side - 1) * side + k, side - 1, k);
        push(seen, queue, &mut count, k * side, k, 0);
        push(seen, queue, &mut count, k * side + side - 1, k, side - 1);
    }
    let mut head = 0;
    while head < queue.len() {
        let idx = queue[head] as usize;
        head += 1;
        let row = idx / side;
        let col = idx % side;
        let ebase = row * estride;
        if col + 1 < side && cfg.is_open_index(ebase + col) {
            push(seen, queue, &mut count, idx + 1, row, col + 1);
        }
        if col > 0 && cfg.is_open_index(ebase + col - 1) {
            push(seen, queue, &mut count, idx - 1, row, col - 1);
        }
        if row + 1 < side && cfg.is_open_index(ebase + 2 * r + col) {
            push(seen, queue, &mut count, idx + side, row + 1, col);
        }
        if row > 0 && cfg.is_open_index(ebase - estride + 2 * r + col) {
            push(seen, queue, &mut count, idx - side, row - 1, col);
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Edge;

    #[test]
    fn union_find_basics() {
        let mut uf = UnionFind::new(5);
        assert!(uf.union(0, 1));
        assert!(uf.union(1, 2));
        assert!(!uf.union(0, 2));
        assert!(uf.connected(0, 2));
        assert!(!uf.connected(0, 3));
        assert_eq!(uf.component_size(2), 3);
        assert_eq!(uf.component_size(4), 1);
        uf.reset();
        assert!(!uf.connected(0, 1));
        assert_eq!(uf.component_size(0), 1);
    }

    #[test]
    fn all_open_box_is_one_cluster() {
        let cfg = Configuration::all_open(BoxRegion::new(2));
        let mut labels = label_clusters(&cfg);
        assert_eq!(labels.size(Vertex::ORIGIN), 25);
        assert!(labels.touches_boundary(Vertex::ORIGIN));
        assert_eq!(observable_t(&cfg), Some(25));
    }

    #[test]
    fn all_closed_box_is_singletons() {
        let cfg = Configuration::all_closed(BoxRegion::new(2));
        let mut labels = label_clusters(&cfg);
        assert_eq!(labels.size(Vertex::ORIGIN), 1);
        assert!(!labels.touches_boundary(Vertex::ORIGIN));
        assert_eq!(observable_t(&cfg), None);
    }

    #[test]
    fn single_path_to_boundary() {
        // open only (0,0)-(1,0) and (1,0)-(2,0) on B(2)
        let mut cfg = Configuration::all_closed(BoxRegion::new(2));
        cfg.set_state(Edge::new(Vertex::new(0, 0), Vertex::new(1, 0)), true);
        cfg.set_state(Edge::new(Vertex::new(1, 0), Vertex::new(2, 0)), true);
        assert_eq!(observable_t(&cfg), Some(3));
        let mut labels = label_clusters(&cfg);
        assert!(labels.connected(Vertex::ORIGIN, Vertex::new(2, 0)));
        assert!(!labels.connected(Vertex::ORIGIN, Vertex::new(0, 1)));
    }

    #[test]
    fn s_n_extremes() {
        let n = 2;
        let open = Configuration::all_open(BoxRegion::new(2 * n));
        assert_eq!(observable_s(&open, n), 25);
        let closed = Configuration::all_closed(BoxRegion::new(2 * n));
        assert_eq!(observable_s(&closed, n), 0);
    }

    #[test]
    fn s_n_counts_by_bfs_oracle() {
        // boundary_reach_count against per-vertex BFS on random configurations
        let n = 3;
        let region = BoxRegion::new(2 * n);
        for replica in 0..50u64 {
            let cfg = Configuration::sample(region, 0.5, 77, replica);
            let fast = observable_s(&cfg, n);
            let mut slow = 0;
            for v in BoxRegion::new(n).vertices() {
                let cluster = bfs_cluster(&cfg, v);
                if cluster.iter().any(|w| region.on_boundary(*w)) {
                    slow += 1;
                }
            }
            assert_eq!(fast, slow, "replica {replica}");
        }
    }

    #[test]
    fn labeling_matches_bfs_oracle() {
        let region = BoxRegion::new(4);
        for replica in 0..50u64 {
            let cfg = Configuration::sample(region, 0.5, 31, replica);
            let mut labels = label_clusters(&cfg);
            let cluster = bfs_cluster(&cfg, Vertex::ORIGIN);
            assert_eq!(labels.size(Vertex::ORIGIN), cluster.len());
            let touches = cluster.iter().any(|w| region.on_boundary(*w));
            assert_eq!(labels.touches_boundary(Vertex::ORIGIN), touches);
            for v in cluster {
                assert!(labels.connected(Vertex::ORIGIN, v));
            }
        }
    }
}
