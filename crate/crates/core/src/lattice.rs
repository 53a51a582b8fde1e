//! Square-lattice geometry: boxes, annuli, edge indexing, the dual lattice,
//! and deterministic i.i.d. configuration sampling.

use alloc::vec;
use alloc::vec::Vec;

/// A lattice vertex.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Vertex {
    pub x: i32,
    pub y: i32,
}

impl Vertex {
    pub const ORIGIN: Vertex = Vertex { x: 0, y: 0 };

    pub fn new(x: i32, y: i32) -> Self {
        Vertex { x, y }
    }

    /// Max-norm distance from the origin; `∂B(n)` is the set with norm exactly n.
    pub fn norm_inf(self) -> i32 {
        self.x.abs().max(self.y.abs())
    }

    /// The four nearest neighbors `(x±1,y)`, `(x,y±1)`.
    pub fn neighbors(self) -> [Vertex; 4] {
        [
            Vertex::new(self.x + 1, self.y),
            Vertex::new(self.x - 1, self.y),
            Vertex::new(self.x, self.y + 1),
            Vertex::new(self.x, self.y - 1),
        ]
    }

    pub fn is_adjacent(self, other: Vertex) -> bool {
        (self.x - other.x).abs() + (self.y - other.y).abs() == 1
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// A lattice edge in canonical form: `a` is the lexicographically smaller
/// endpoint, so each unordered pair has a unique representation.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Edge {
    pub a: Vertex,
    pub b: Vertex,
}

impl Edge {
    pub fn new(u: Vertex, v: Vertex) -> Self {
        debug_assert!(u.is_adjacent(v), "edge endpoints must be adjacent");
        if u <= v {
            Edge { a: u, b: v }
        } else {
            Edge { a: v, b: u }
        }
    }

    pub fn orientation(self) -> Orientation {
        if self.a.y == self.b.y {
            Orientation::Horizontal
        } else {
            Orientation::Vertical
        }
    }

    /// Midpoint in doubled coordinates, exact in integers.
    pub fn midpoint_doubled(self) -> (i64, i64) {
        (
            self.a.x as i64 + self.b.x as i64,
            self.a.y as i64 + self.b.y as i64,
        )
    }

    /// The other endpoint.
    pub fn opposite(self, v: Vertex) -> Vertex {
        debug_assert!(v == self.a || v == self.b);
        if v == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// A dual-lattice vertex, stored in face coordinates: `(a, b)` is the dual
/// vertex at `(a + 0.5, b + 0.5)`, the center of the plaquette with corners
/// `(a, b)..(a+1, b+1)`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct DualVertex {
    pub a: i32,
    pub b: i32,
}

impl DualVertex {
    pub fn new(a: i32, b: i32) -> Self {
        DualVertex { a, b }
    }

    /// Position in doubled coordinates: `(2a+1, 2b+1)`.
    pub fn doubled(self) -> (i64, i64) {
        (2 * self.a as i64 + 1, 2 * self.b as i64 + 1)
    }

    /// Max-norm from the origin in doubled coordinates (the dual ring just
    /// outside `∂B(m)` has doubled norm `2m+1`).
    pub fn norm_inf_doubled(self) -> i64 {
        let (x, y) = self.doubled();
        x.abs().max(y.abs())
    }
}

/// A dual edge in canonical form (smaller face first). Unit dual edges join
/// faces that share a side; the edge bisects exactly one primal edge.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct DualEdge {
    pub a: DualVertex,
    pub b: DualVertex,
}

impl DualEdge {
    pub fn new(u: DualVertex, v: DualVertex) -> Self {
        debug_assert!((u.a - v.a).abs() + (u.b - v.b).abs() == 1);
        if u <= v {
            DualEdge { a: u, b: v }
        } else {
            DualEdge { a: v, b: u }
        }
    }

    /// The primal edge bisected by this dual edge.
    pub fn primal(self) -> Edge {
        if self.a.a == self.b.a {
            // faces (a,b) and (a,b+1): crosses the horizontal primal edge
            // (a, b+1)-(a+1, b+1)
            let b = self.a.b.max(self.b.b);
            Edge::new(Vertex::new(self.a.a, b), Vertex::new(self.a.a + 1, b))
        } else {
            // faces (a,b) and (a+1,b): crosses the vertical primal edge
            // (a+1, b)-(a+1, b+1)
            let a = self.a.a.max(self.b.a);
            Edge::new(Vertex::new(a, self.a.b), Vertex::new(a, self.a.b + 1))
        }
    }
}

/// The dual edge `e*` bisecting `e`.
pub fn dual_edge(e: Edge) -> DualEdge {
    match e.orientation() {
        Orientation::Horizontal => {
            // (x,y)-(x+1,y) -> (x+0.5, y-0.5)-(x+0.5, y+0.5)
            DualEdge::new(
                DualVertex::new(e.a.x, e.a.y - 1),
                DualVertex::new(e.a.x, e.a.y),
            )
        }
        Orientation::Vertical => {
            // (x,y)-(x,y+1) -> (x-0.5, y+0.5)-(x+0.5, y+0.5)
            DualEdge::new(
                DualVertex::new(e.a.x - 1, e.a.y),
                DualVertex::new(e.a.x, e.a.y),
            )
        }
    }
}

/// The box `B(n) = [-n, n]^2` with its edge set `B_e(n)` (both endpoints in
/// the box).
///
/// Edges carry a fixed canonical index: row-major over midpoints, which
/// interleaves a row of horizontal edges with the row of vertical edges
/// above it. The order is what keys the per-edge RNG, so it must never
/// change.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct BoxRegion {
    n: i32,
}

impl BoxRegion {
    pub fn new(n: i32) -> Self {
        assert!(n >= 0, "box radius must be nonnegative");
        BoxRegion { n }
    }

    pub fn radius(self) -> i32 {
        self.n
    }

    pub fn side(self) -> i32 {
        2 * self.n + 1
    }

    pub fn vertex_count(self) -> usize {
        let s = self.side() as usize;
        s * s
    }

    /// `2 * (2n+1) * 2n` edges.
    pub fn edge_count(self) -> usize {
        let n = self.n as usize;
        4 * n * (2 * n + 1)
    }

    pub fn contains(self, v: Vertex) -> bool {
        v.norm_inf() <= self.n
    }

    pub fn on_boundary(self, v: Vertex) -> bool {
        v.norm_inf() == self.n
    }

    pub fn contains_edge(self, e: Edge) -> bool {
        self.contains(e.a) && self.contains(e.b)
    }

    pub fn vertex_index(self, v: Vertex) -> usize {
        debug_assert!(self.contains(v));
        let s = self.side() as usize;
        (v.x + self.n) as usize + (v.y + self.n) as usize * s
    }

    pub fn vertex_at(self, idx: usize) -> Vertex {
        let s = self.side() as usize;
        Vertex::new((idx % s) as i32 - self.n, (idx / s) as i32 - self.n)
    }

    pub fn vertices(self) -> impl Iterator<Item = Vertex> {
        let r = self;
        (0..r.vertex_count()).map(move |i| r.vertex_at(i))
    }

    /// Canonical edge index. Each integer row `y` holds `2n` horizontal
    /// edges followed (for `y < n`) by the `2n+1` vertical edges rooted at
    /// height `y`.
    pub fn edge_index(self, e: Edge) -> usize {
        debug_assert!(self.contains_edge(e));
        let n = self.n;
        let stride = (4 * n + 1) as usize;
        let row = (e.a.y + n) as usize;
        match e.orientation() {
            Orientation::Horizontal => row * stride + (e.a.x + n) as usize,
            Orientation::Vertical => row * stride + (2 * n) as usize + (e.a.x + n) as usize,
        }
    }

    pub fn edge_at(self, idx: usize) -> Edge {
        debug_assert!(idx < self.edge_count());
        let n = self.n;
        let stride = (4 * n + 1) as usize;
        let row = (idx / stride) as i32 - n;
        let o = idx % stride;
        if o < (2 * n) as usize {
            let x = o as i32 - n;
            Edge::new(Vertex::new(x, row), Vertex::new(x + 1, row))
        } else {
            let x = (o - (2 * n) as usize) as i32 - n;
            Edge::new(Vertex::new(x, row), Vertex::new(x, row + 1))
        }
    }

    pub fn edges(self) -> impl Iterator<Item = Edge> {
        let r = self;
        (0..r.edge_count()).map(move |i| r.edge_at(i))
    }
}

/// All edges of `B_e(n)` in their canonical deterministic order.
pub fn enumerate_edges(region: BoxRegion) -> Vec<Edge> {
    region.edges().collect()
}

/// The annulus `A(m,n) = (B(n) \ B(m)) ∪ ∂B(m)`, i.e. vertices with
/// max-norm in `[m, n]`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Annulus {
    pub m: i32,
    pub n: i32,
}

impl Annulus {
    pub fn new(m: i32, n: i32) -> Self {
        assert!(0 <= m && m < n, "annulus needs 0 <= m < n");
        Annulus { m, n }
    }

    pub fn contains(self, v: Vertex) -> bool {
        let r = v.norm_inf();
        self.m <= r && r <= self.n
    }

    pub fn contains_edge(self, e: Edge) -> bool {
        self.contains(e.a) && self.contains(e.b)
    }
}

/// Membership test for `A(m,n)`.
pub fn annulus_membership(a: Annulus, v: Vertex) -> bool {
    a.contains(v)
}

const MIX_C1: u64 = 0xbf58_476d_1ce4_e5b9;
const MIX_C2: u64 = 0x94d0_49bb_1331_11eb;
const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer; the whole RNG is this bijective mix applied to a
/// counter, so any edge's state can be recomputed in isolation.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(MIX_C1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_C2);
    z ^ (z >> 31)
}

/// Derives the stream id used for attempt `t` of replica `r` in rejection
/// sampling, so rejected proposals never alias another replica's stream.
#[inline]
pub fn attempt_stream(replica: u64, attempt: u64) -> u64 {
    mix64(replica ^ mix64(attempt ^ 0x5bf0_3635_dcd4_89e5))
}

/// Counter-based edge-state generator: `open(i)` is a pure function of
/// `(seed, stream, p, i)`, independent of evaluation order, so lazy cluster
/// scans and fully materialized configurations agree bit for bit.
#[derive(Clone, Copy, Debug)]
pub struct EdgeSampler {
    key: u64,
    threshold: u64,
    always_open: bool,
    half: bool,
}

impl EdgeSampler {
    pub fn new(seed: u64, stream: u64, p: f64) -> Self {
        assert!((0.0..=1.0).contains(&p), "probability out of range");
        let key = mix64(seed ^ mix64(stream ^ 0x243f_6a88_85a3_08d3));
        let always_open = p >= 1.0;
        // p * 2^64, exact for p = 0.5; strict `<` makes p = 0 all-closed.
        let threshold = if always_open {
            u64::MAX
        } else {
            (p * 18_446_744_073_709_551_616.0) as u64
        };
        // the critical density is sampled a word at a time: every bit of a
        // mixed word is a fair coin, which is 64x cheaper in bulk runs
        let half = !always_open && threshold == 1u64 << 63;
        EdgeSampler { key, threshold, always_open, half }
    }

    /// 64 consecutive edge states at once (edge `64*w + b` is bit `b`).
    /// Only meaningful at p = 1/2.
    #[inline]
    pub fn word_bits(&self, word_index: u64) -> u64 {
        mix64(self.key ^ word_index.wrapping_mul(GOLDEN))
    }

    #[inline]
    pub fn is_half_density(&self) -> bool {
        self.half
    }

    #[inline]
    pub fn is_open(&self, edge_index: usize) -> bool {
        if self.always_open {
            return true;
        }
        if self.half {
            return self.word_bits(edge_index as u64 >> 6) >> (edge_index & 63) & 1 == 1;
        }
        mix64(self.key ^ (edge_index as u64).wrapping_mul(GOLDEN)) < self.threshold
    }
}

/// An open/closed assignment for every edge of a box, one bit per edge.
///
/// The dual configuration is implied: `e*` is closed-dual exactly when `e`
/// is closed.
#[derive(Clone, Debug)]
pub struct Configuration {
    region: BoxRegion,
    bits: Vec<u64>,
    pub p: f64,
    pub seed: u64,
    pub stream: u64,
}

impl Configuration {
    /// Sample each edge independently open with probability `p`; bit-identical
    /// across runs for equal `(region, p, seed, replica)`.
    pub fn sample(region: BoxRegion, p: f64, seed: u64, replica: u64) -> Self {
        Self::sample_stream(region, p, seed, replica)
    }

    /// Like [`Configuration::sample`] but with an explicit stream id
    /// (rejection sampling derives one per attempt via [`attempt_stream`]).
    pub fn sample_stream(region: BoxRegion, p: f64, seed: u64, stream: u64) -> Self {
        let sampler = EdgeSampler::new(seed, stream, p);
        let mut cfg = Configuration::all_closed(region);
        cfg.p = p;
        cfg.seed = seed;
        cfg.stream = stream;
        cfg.fill_from(&sampler);
        cfg
    }

    /// Refill in place from a sampler, reusing the bit buffer.
    pub fn fill_from(&mut self, sampler: &EdgeSampler) {
        let count = self.region.edge_count();
        if sampler.is_half_density() {
            for (w, word) in self.bits.iter_mut().enumerate() {
                *word = sampler.word_bits(w as u64);
            }
        } else {
            for w in self.bits.iter_mut() {
                *w = 0;
            }
            for i in 0..count {
                if sampler.is_open(i) {
                    self.bits[i >> 6] |= 1u64 << (i & 63);
                }
            }
        }
        // bits past the last edge stay zero
        let tail = count & 63;
        if tail != 0 {
            *self.bits.last_mut().unwrap() &= (1u64 << tail) - 1;
        }
    }

    pub fn all_closed(region: BoxRegion) -> Self {
        Configuration {
            region,
            bits: vec![0u64; region.edge_count().div_ceil(64).max(1)],
            p: 0.0,
            seed: 0,
            stream: 0,
        }
    }

    pub fn all_open(region: BoxRegion) -> Self {
        let mut cfg = Configuration::all_closed(region);
        cfg.p = 1.0;
        for i in 0..region.edge_count() {
            cfg.bits[i >> 6] |= 1u64 << (i & 63);
        }
        cfg
    }

    /// Build from a bitmask over canonical edge indices (low bit = edge 0).
    /// Only meaningful for regions with at most 64 edges; used by the
    /// exhaustive enumerators.
    pub fn from_mask(region: BoxRegion, mask: u64) -> Self {
        assert!(region.edge_count() <= 64);
        let mut cfg = Configuration::all_closed(region);
        cfg.bits[0] = mask;
        cfg
    }

    pub fn region(&self) -> BoxRegion {
        self.region
    }

    #[inline]
    pub fn is_open_index(&self, idx: usize) -> bool {
        self.bits[idx >> 6] & (1u64 << (idx & 63)) != 0
    }

    #[inline]
    pub fn is_open(&self, e: Edge) -> bool {
        self.is_open_index(self.region.edge_index(e))
    }

    pub fn set_state(&mut self, e: Edge, open: bool) {
        let idx = self.region.edge_index(e);
        if open {
            self.bits[idx >> 6] |= 1u64 << (idx & 63);
        } else {
            self.bits[idx >> 6] &= !(1u64 << (idx & 63));
        }
    }

    /// Bit words backing the edge states (low bit of word 0 = edge 0).
    pub fn words(&self) -> &[u64] {
        &self.bits
    }

    /// Set this configuration to `(base & mask) | (fill & !mask)`, i.e. keep
    /// `base` on the masked edge set and take `fill` elsewhere. All three
    /// configurations must share a region.
    pub fn overlay_from(&mut self, base: &Configuration, mask: &[u64], fill: &Configuration) {
        debug_assert_eq!(self.region, base.region);
        debug_assert_eq!(self.region, fill.region);
        debug_assert_eq!(mask.len(), self.bits.len());
        for i in 0..self.bits.len() {
            self.bits[i] = (base.bits[i] & mask[i]) | (fill.bits[i] & !mask[i]);
        }
    }

    pub fn open_count(&self) -> usize {
        let count = self.region.edge_count();
        let mut total = 0usize;
        for (w, word) in self.bits.iter().enumerate() {
            let mut word = *word;
            if (w + 1) * 64 > count {
                let valid = count - w * 64;
                if valid < 64 {
                    word &= (1u64 << valid) - 1;
                }
            }
            total += word.count_ones() as usize;
        }
        total
    }
}
