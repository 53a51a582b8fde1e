//! Pivotal edges, exterior-boundary dual contours, the large-enclosure
//! pivotal events, the spiral bubble decomposition, and exact verification
//! of the induced martingale identities for the conditioned volume.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::clusters;
use crate::error::PercError;
use crate::incipient;
use crate::lattice::{
    attempt_stream, dual_edge, mix64, BoxRegion, Configuration, DualEdge, DualVertex, Edge,
    Orientation, Vertex,
};
use crate::{ONE_ARM_EXPONENT, P_CRITICAL};

/// Contour step direction on the dual lattice.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Dir {
    N,
    E,
    S,
    W,
}

impl Dir {
    /// Counterclockwise quarter turn.
    fn left(self) -> Dir {
        match self {
            Dir::N => Dir::W,
            Dir::W => Dir::S,
            Dir::S => Dir::E,
            Dir::E => Dir::N,
        }
    }

    fn right(self) -> Dir {
        self.left().left().left()
    }

    fn step(self, f: DualVertex) -> DualVertex {
        match self {
            Dir::N => DualVertex::new(f.a, f.b + 1),
            Dir::S => DualVertex::new(f.a, f.b - 1),
            Dir::E => DualVertex::new(f.a + 1, f.b),
            Dir::W => DualVertex::new(f.a - 1, f.b),
        }
    }

    /// The primal edge bisected by the directed dual edge leaving `f`.
    fn crossed(self, f: DualVertex) -> Edge {
        match self {
            Dir::N => Edge::new(Vertex::new(f.a, f.b + 1), Vertex::new(f.a + 1, f.b + 1)),
            Dir::S => Edge::new(Vertex::new(f.a, f.b), Vertex::new(f.a + 1, f.b)),
            Dir::E => Edge::new(Vertex::new(f.a + 1, f.b), Vertex::new(f.a + 1, f.b + 1)),
            Dir::W => Edge::new(Vertex::new(f.a, f.b), Vertex::new(f.a, f.b + 1)),
        }
    }

    /// Primal vertex to the left of the directed dual edge leaving `f`.
    fn left_vertex(self, f: DualVertex) -> Vertex {
        match self {
            Dir::N => Vertex::new(f.a, f.b + 1),
            Dir::S => Vertex::new(f.a + 1, f.b),
            Dir::E => Vertex::new(f.a + 1, f.b + 1),
            Dir::W => Vertex::new(f.a, f.b),
        }
    }

    fn right_vertex(self, f: DualVertex) -> Vertex {
        match self {
            Dir::N => Vertex::new(f.a + 1, f.b + 1),
            Dir::S => Vertex::new(f.a, f.b),
            Dir::E => Vertex::new(f.a + 1, f.b),
            Dir::W => Vertex::new(f.a, f.b + 1),
        }
    }
}

/// A closed dual circuit as a cyclic list of directed dual steps
/// `(tail face, direction)`; the traced cluster always lies on the left.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualContour {
    pub steps: Vec<(DualVertex, Dir)>,
}

impl DualContour {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Undirected dual edges in cyclic order.
    pub fn dual_edges(&self) -> Vec<DualEdge> {
        self.steps
            .iter()
            .map(|&(f, d)| DualEdge::new(f, d.step(f)))
            .collect()
    }

    /// Primal edges bisected by the circuit, in cyclic order.
    pub fn crossed_primal_edges(&self) -> Vec<Edge> {
        self.steps.iter().map(|&(f, d)| d.crossed(f)).collect()
    }

    /// Whether any bisected primal edge leaves the box, i.e. the circuit
    /// runs along the outside of `∂B(n)` through virtual dual edges.
    pub fn touches_region_boundary(&self, region: BoxRegion) -> bool {
        self.steps
            .iter()
            .any(|&(f, d)| !region.contains_edge(d.crossed(f)))
    }

    /// Ray-casting parity: whether `v` lies strictly inside the circuit.
    /// Only vertical steps cross the eastward ray at integer height.
    pub fn encloses(&self, v: Vertex) -> bool {
        let mut crossings = 0u32;
        for &(f, d) in &self.steps {
            let height = match d {
                Dir::N => f.b + 1,
                Dir::S => f.b,
                _ => continue,
            };
            if height == v.y && f.a >= v.x {
                crossings += 1;
            }
        }
        crossings % 2 == 1
    }

    /// Circuit sanity: closed (the walk returns to its start) and
    /// edge-simple (no undirected dual edge is used twice).
    pub fn is_simple_circuit(&self) -> bool {
        if self.steps.len() < 4 {
            return false;
        }
        let (f0, d0) = self.steps[0];
        let (fl, dl) = self.steps[self.steps.len() - 1];
        if dl.step(fl) != f0 {
            return false;
        }
        let _ = d0;
        let mut edges = self.dual_edges();
        edges.sort();
        let before = edges.len();
        edges.dedup();
        edges.len() == before
    }
}

/// Wall-follower with the set on the left: from a directed dual edge that
/// separates the set from its complement, repeatedly take the first of
/// {left turn, straight, right turn} that still separates, until the start
/// edge recurs.
fn trace_contour(
    region: BoxRegion,
    in_set: &[bool],
    start: (DualVertex, Dir),
) -> DualContour {
    let is_cut = |f: DualVertex, d: Dir| {
        let l = d.left_vertex(f);
        let r = d.right_vertex(f);
        region.contains(l)
            && in_set[region.vertex_index(l)]
            && !(region.contains(r) && in_set[region.vertex_index(r)])
    };
    debug_assert!(is_cut(start.0, start.1), "start edge must separate the set");
    let mut steps = Vec::new();
    let mut cur = start;
    let guard = 8 * region.edge_count() + 16;
    loop {
        steps.push(cur);
        let head = cur.1.step(cur.0);
        let mut next = None;
        for d in [cur.1.left(), cur.1, cur.1.right()] {
            if is_cut(head, d) {
                next = Some((head, d));
                break;
            }
        }
        cur = next.expect("contour walk must continue");
        if cur == start {
            break;
        }
        assert!(steps.len() <= guard, "contour walk failed to close");
    }
    DualContour { steps }
}

/// Directed dual edge crossing the primal edge `(v', v'')` with `v'` on the
/// left.
fn start_step(v_prime: Vertex, v_second: Vertex) -> (DualVertex, Dir) {
    let dx = v_second.x - v_prime.x;
    let dy = v_second.y - v_prime.y;
    match (dx, dy) {
        (0, 1) => (DualVertex::new(v_prime.x, v_prime.y), Dir::W),
        (0, -1) => (DualVertex::new(v_prime.x - 1, v_prime.y - 1), Dir::E),
        (1, 0) => (DualVertex::new(v_prime.x, v_prime.y - 1), Dir::N),
        (-1, 0) => (DualVertex::new(v_prime.x - 1, v_prime.y), Dir::S),
        _ => unreachable!("endpoints must be adjacent"),
    }
}

/// A pivotal edge together with its separating dual circuit.
#[derive(Clone, Debug)]
pub struct PivotalRecord {
    pub edge: Edge,
    /// The endpoint whose origin connection hinges on the edge.
    pub v_prime: Vertex,
    /// The endpoint connected to the origin even with the edge closed.
    pub v_second: Vertex,
    /// The circuit `D*(v') ∪ e*` separating `v'` from `v''`.
    pub contour: DualContour,
    /// Vertices of the open cluster of `v'` (edge forced closed).
    pub cluster_size: usize,
    /// Circuit runs through virtual dual edges along `∂B(n)`.
    pub touches_dual_boundary: bool,
}

fn reach_from_origin(cfg: &Configuration, forced_closed: Option<Edge>) -> Vec<bool> {
    let region = cfg.region();
    let mut seen = vec![false; region.vertex_count()];
    let mut queue = vec![Vertex::ORIGIN];
    seen[region.vertex_index(Vertex::ORIGIN)] = true;
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        for w in v.neighbors() {
            if !region.contains(w) {
                continue;
            }
            let e = Edge::new(v, w);
            if Some(e) == forced_closed || !cfg.is_open(e) {
                continue;
            }
            let wi = region.vertex_index(w);
            if !seen[wi] {
                seen[wi] = true;
                queue.push(w);
            }
        }
    }
    seen
}

fn cluster_membership(
    cfg: &Configuration,
    start: Vertex,
    forced_closed: Option<Edge>,
) -> (Vec<bool>, usize) {
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
            let e = Edge::new(v, w);
            if Some(e) == forced_closed || !cfg.is_open(e) {
                continue;
            }
            let wi = region.vertex_index(w);
            if !seen[wi] {
                seen[wi] = true;
                queue.push(w);
            }
        }
    }
    let size = queue.len();
    (seen, size)
}

/// Decide pivotality of `e` for the origin connection of one of its
/// endpoints: with `e` forced closed, exactly one endpoint must reach the
/// origin. Returns the record with `v'` the dependent endpoint and the
/// traced circuit `D*(v') ∪ e*`.
pub fn is_pivotal(cfg: &Configuration, e: Edge) -> Option<PivotalRecord> {
    let region = cfg.region();
    debug_assert!(region.contains_edge(e));
    let reach = reach_from_origin(cfg, Some(e));
    let ca = reach[region.vertex_index(e.a)];
    let cb = reach[region.vertex_index(e.b)];
    if ca == cb {
        return None;
    }
    let (v_second, v_prime) = if ca { (e.a, e.b) } else { (e.b, e.a) };
    Some(build_record(cfg, e, v_prime, v_second))
}

fn build_record(cfg: &Configuration, e: Edge, v_prime: Vertex, v_second: Vertex) -> PivotalRecord {
    let region = cfg.region();
    let (members, cluster_size) = cluster_membership(cfg, v_prime, Some(e));
    let contour = trace_contour(region, &members, start_step(v_prime, v_second));
    let touches = contour.touches_region_boundary(region);
    PivotalRecord {
        edge: e,
        v_prime,
        v_second,
        contour,
        cluster_size,
        touches_dual_boundary: touches,
    }
}

/// Pivotality decision alone, using a precomputed origin-reachability map of
/// the unmodified configuration: closed edges resolve in O(1), open edges
/// need one origin search with the edge removed.
fn pivotal_endpoints(
    cfg: &Configuration,
    e: Edge,
    origin_reach: &[bool],
) -> Option<(Vertex, Vertex)> {
    let region = cfg.region();
    let ca0 = origin_reach[region.vertex_index(e.a)];
    let cb0 = origin_reach[region.vertex_index(e.b)];
    if !cfg.is_open(e) {
        // already closed: the map is the e-closed connectivity
        return match (ca0, cb0) {
            (true, false) => Some((e.b, e.a)),
            (false, true) => Some((e.a, e.b)),
            _ => None,
        };
    }
    // open edge: both endpoints share a cluster; if it misses the origin,
    // closing e changes nothing
    if !ca0 {
        return None;
    }
    let reach = reach_from_origin(cfg, Some(e));
    let ca = reach[region.vertex_index(e.a)];
    let cb = reach[region.vertex_index(e.b)];
    match (ca, cb) {
        (true, false) => Some((e.b, e.a)),
        (false, true) => Some((e.a, e.b)),
        _ => None,
    }
}

/// Exterior boundary of the open cluster containing `v`: the minimal closed
/// dual circuit around it. Errors when the cluster touches `∂B(n)`, where
/// no interior circuit exists.
pub fn exterior_boundary(cfg: &Configuration, v: Vertex) -> Result<DualContour, PercError> {
    let region = cfg.region();
    let (members, _) = cluster_membership(cfg, v, None);
    for w in region.vertices() {
        if region.on_boundary(w) && members[region.vertex_index(w)] {
            return Err(PercError::ClusterTouchesBoundary);
        }
    }
    // start above the topmost (then leftmost) cluster vertex, heading west
    let mut top: Option<Vertex> = None;
    for w in region.vertices() {
        if members[region.vertex_index(w)] {
            let better = match top {
                None => true,
                Some(t) => w.y > t.y || (w.y == t.y && w.x < t.x),
            };
            if better {
                top = Some(w);
            }
        }
    }
    let u = top.expect("cluster is nonempty");
    Ok(trace_contour(region, &members, (DualVertex::new(u.x, u.y), Dir::W)))
}

/// Pivotal-edge threshold events: `e` pivotal, circuit clear of `∂B*(n)`,
/// and the cluster of `v'` at least `n^{2 - 5/48 - ε}` vertices. Returns the
/// qualifying edges.
pub fn detect_h_epsilon(cfg: &Configuration, epsilon: f64) -> Vec<Edge> {
    let region = cfg.region();
    let n = region.radius();
    let threshold = libm::pow(
        n as f64,
        2.0 - ONE_ARM_EXPONENT.0 as f64 / ONE_ARM_EXPONENT.1 as f64 - epsilon,
    );
    let origin_reach = reach_from_origin(cfg, None);
    let mut found = Vec::new();
    for e in region.edges() {
        let Some((v_prime, v_second)) = pivotal_endpoints(cfg, e, &origin_reach) else {
            continue;
        };
        let rec = build_record(cfg, e, v_prime, v_second);
        if rec.touches_dual_boundary {
            continue;
        }
        if !rec.contour.encloses(rec.v_prime) {
            continue;
        }
        if (rec.cluster_size as f64) >= threshold {
            found.push(e);
        }
    }
    found
}

/// What a decomposition cell is.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BubbleKind {
    /// Non-pivotal scan edge, absorbed alone.
    Single,
    /// Pivotal with the scan edge open.
    OpenPivot,
    /// Pivotal with the scan edge closed.
    ClosedPivot,
}

/// One cell of the decomposition: the scan edge plus every edge it absorbs.
#[derive(Clone, Debug)]
pub struct Bubble {
    pub pivot: Edge,
    pub kind: BubbleKind,
    /// Absorbed edges (canonical indices into the region's edge order).
    pub edges: Vec<u32>,
    /// Whether the enclosed edge set was untouched by earlier cells, i.e.
    /// the cell is exactly the enclosed region rather than a remainder.
    pub bubble_condition: bool,
}

/// The spiral-scan decomposition of a configuration's edge set into single
/// edges and pivotal bubbles.
#[derive(Clone, Debug)]
pub struct BubbleDecomposition {
    pub bubbles: Vec<Bubble>,
}

impl BubbleDecomposition {
    /// Cumulative bit masks of revealed edges after each cell; index 0 is
    /// the empty mask.
    pub fn cumulative_masks(&self, region: BoxRegion) -> Vec<Vec<u64>> {
        let words = region.edge_count().div_ceil(64).max(1);
        let mut out = Vec::with_capacity(self.bubbles.len() + 1);
        let mut cur = vec![0u64; words];
        out.push(cur.clone());
        for b in &self.bubbles {
            for &i in &b.edges {
                cur[(i >> 6) as usize] |= 1u64 << (i & 63);
            }
            out.push(cur.clone());
        }
        out
    }
}

/// Deterministic scan order: shell by shell outward, each shell swept
/// counterclockwise from due east by exact midpoint angle; ties broken by
/// radius, then horizontal before vertical.
pub fn spiral_edge_order(n: i32) -> Vec<Edge> {
    let region = BoxRegion::new(n);
    let mut edges: Vec<Edge> = region.edges().collect();
    let shell = |e: &Edge| e.a.norm_inf().max(e.b.norm_inf());
    let half = |p: (i64, i64)| -> u8 {
        // 0 for angles in [0, π) starting due east, 1 for [π, 2π)
        if p.1 < 0 || (p.1 == 0 && p.0 < 0) {
            1
        } else {
            0
        }
    };
    edges.sort_by(|x, y| {
        shell(x)
            .cmp(&shell(y))
            .then_with(|| {
                let p = x.midpoint_doubled();
                let q = y.midpoint_doubled();
                half(p).cmp(&half(q)).then_with(|| {
                    let cross = p.0 * q.1 - p.1 * q.0;
                    cross.cmp(&0).reverse() // positive cross: x strictly first
                })
            })
            .then_with(|| {
                let p = x.midpoint_doubled();
                let q = y.midpoint_doubled();
                (p.0 * p.0 + p.1 * p.1).cmp(&(q.0 * q.0 + q.1 * q.1))
            })
            .then_with(|| {
                let oh = |e: &Edge| (e.orientation() == Orientation::Vertical) as u8;
                oh(x).cmp(&oh(y))
            })
            .then_with(|| region.edge_index(*x).cmp(&region.edge_index(*y)))
    });
    edges
}

/// Decompose a configuration by walking the spiral order: an already
/// absorbed edge is skipped; a pivotal edge absorbs everything on the `v'`
/// side of its circuit (plus the circuit's own primal edges); anything else
/// is a single-edge cell.
pub fn bubble_decomposition(cfg: &Configuration) -> BubbleDecomposition {
    let region = cfg.region();
    let order = spiral_edge_order(region.radius());
    let mut absorbed = vec![false; region.edge_count()];
    let origin_reach = reach_from_origin(cfg, None);
    let mut bubbles = Vec::new();
    for e in order {
        let ei = region.edge_index(e);
        if absorbed[ei] {
            continue;
        }
        match pivotal_endpoints(cfg, e, &origin_reach) {
            None => {
                absorbed[ei] = true;
                bubbles.push(Bubble {
                    pivot: e,
                    kind: BubbleKind::Single,
                    edges: vec![ei as u32],
                    bubble_condition: true,
                });
            }
            Some((v_prime, v_second)) => {
                let rec = build_record(cfg, e, v_prime, v_second);
                // the circuit separates v' from v''; keep the v' side
                let inside = rec.contour.encloses(rec.v_prime);
                let loop_duals = rec.contour.dual_edges();
                let mut cell = Vec::new();
                let mut untouched = true;
                for (fi, f) in region.edges().enumerate() {
                    let on_loop = loop_duals.contains(&dual_edge(f));
                    let enclosed = on_loop
                        || (rec.contour.encloses(f.a) == inside
                            && rec.contour.encloses(f.b) == inside);
                    if !enclosed {
                        continue;
                    }
                    if absorbed[fi] {
                        untouched = false;
                    } else {
                        absorbed[fi] = true;
                        cell.push(fi as u32);
                    }
                }
                debug_assert!(cell.contains(&(ei as u32)));
                bubbles.push(Bubble {
                    pivot: e,
                    kind: if cfg.is_open(e) {
                        BubbleKind::OpenPivot
                    } else {
                        BubbleKind::ClosedPivot
                    },
                    edges: cell,
                    bubble_condition: untouched,
                });
            }
        }
    }
    debug_assert!(absorbed.iter().all(|a| *a));
    BubbleDecomposition { bubbles }
}

/// Exact verification of the conditioned-volume martingale on a tiny box,
/// by full enumeration.
#[derive(Clone, Debug)]
pub struct MartingaleReport {
    pub n: i32,
    pub p_connect: f64,
    pub mean_t: f64,
    pub variance: f64,
    /// max over conditioned configurations of |M_m - T| (telescoping end).
    pub max_telescoping_error: f64,
    /// max over k of |E Δ_k|.
    pub max_increment_mean: f64,
    /// max over j < k of |E Δ_j Δ_k|.
    pub max_orthogonality_error: f64,
    /// |σ² - Σ_k E Δ_k²|.
    pub variance_decomposition_error: f64,
    /// max over realized information sets of |Σ conditional weights - 1|.
    pub max_conditional_sum_error: f64,
    /// max over realized atoms of |cylinder mass - atom mass|: zero exactly
    /// when revealing an information set pins down the scan prefix.
    pub max_atom_cylinder_gap: f64,
    /// atoms refine as k grows (prefix truncation is single-valued).
    pub refinement_ok: bool,
    /// (revealed set, revealed states) determines the cell sequence.
    pub union_determines_prefix: bool,
    /// recomputing every decomposition reproduces it bit for bit.
    pub decomposition_deterministic: bool,
}

/// Enumerate every configuration of `B(n)`, build the exact conditional
/// expectations over the scan filtration's atoms, and measure each identity.
pub fn verify_martingale_identities(n: i32) -> Result<MartingaleReport, PercError> {
    let region = BoxRegion::new(n);
    let ec = region.edge_count();
    if ec > 16 {
        return Err(PercError::RegionTooLarge { edges: ec, max: 16 });
    }
    let total = 1usize << ec;
    let base_w = 1.0 / total as f64;

    // pass 1: volumes, support, decompositions
    let mut tval = vec![0.0f64; total];
    let mut support = vec![false; total];
    let mut seqs: Vec<Vec<u64>> = Vec::with_capacity(total);
    let mut p_connect = 0.0;
    for mask in 0..total as u64 {
        let cfg = Configuration::from_mask(region, mask);
        if let Some(t) = clusters::observable_t(&cfg) {
            support[mask as usize] = true;
            tval[mask as usize] = t as f64;
            p_connect += base_w;
        }
        let d = bubble_decomposition(&cfg);
        let seq: Vec<u64> = d
            .bubbles
            .iter()
            .map(|b| b.edges.iter().fold(0u64, |m, &i| m | (1u64 << i)))
            .collect();
        seqs.push(seq);
    }
    let nu = |c: usize| if support[c] { base_w / p_connect } else { 0.0 };

    let mean_t: f64 = (0..total).map(|c| nu(c) * tval[c]).sum();
    let variance: f64 = (0..total)
        .map(|c| nu(c) * (tval[c] - mean_t) * (tval[c] - mean_t))
        .sum();

    // determinism: rebuild every decomposition and compare
    let mut decomposition_deterministic = true;
    for mask in 0..total as u64 {
        let cfg = Configuration::from_mask(region, mask);
        let d = bubble_decomposition(&cfg);
        let seq: Vec<u64> = d
            .bubbles
            .iter()
            .map(|b| b.edges.iter().fold(0u64, |m, &i| m | (1u64 << i)))
            .collect();
        if seq != seqs[mask as usize] {
            decomposition_deterministic = false;
        }
    }

    // atoms per level k = 0..=ec, keyed by (cell-sequence prefix, revealed
    // states); conditional means over ν per atom
    let levels = ec + 1;
    let mut m_val = vec![0.0f64; total * levels]; // conditional means per config
    let mut atom_of = vec![0usize; total * levels];
    let mut refinement_ok = true;
    let mut union_determines_prefix = true;
    let mut max_conditional_sum_error: f64 = 0.0;
    let mut max_atom_cylinder_gap: f64 = 0.0;
    let mut prev_atom_of: Vec<usize> = Vec::new();

    for k in 0..levels {
        let mut atoms: BTreeMap<(Vec<u64>, u64), usize> = BTreeMap::new();
        let mut mass: Vec<f64> = Vec::new();
        let mut t_mass: Vec<f64> = Vec::new();
        let mut gamma_of_atom: Vec<u64> = Vec::new();
        let mut bits_of_atom: Vec<u64> = Vec::new();
        let mut union_keys: BTreeMap<(u64, u64), Vec<u64>> = BTreeMap::new();
        for c in 0..total {
            if !support[c] {
                continue;
            }
            let seq = &seqs[c];
            let kk = k.min(seq.len());
            let gamma: u64 = seq[..kk].iter().fold(0, |m, s| m | s);
            let bits = c as u64 & gamma;
            let prefix = seq[..kk].to_vec();
            match union_keys.get(&(gamma, bits)) {
                None => {
                    union_keys.insert((gamma, bits), prefix.clone());
                }
                Some(p) if *p != prefix => union_determines_prefix = false,
                _ => {}
            }
            let id = *atoms.entry((prefix, bits)).or_insert_with(|| {
                mass.push(0.0);
                t_mass.push(0.0);
                gamma_of_atom.push(gamma);
                bits_of_atom.push(bits);
                mass.len() - 1
            });
            mass[id] += nu(c);
            t_mass[id] += nu(c) * tval[c];
            atom_of[c * levels + k] = id;
        }
        for c in 0..total {
            if support[c] {
                let id = atom_of[c * levels + k];
                m_val[c * levels + k] = t_mass[id] / mass[id];
            }
        }
        // conditional weights over residual configurations sum to one
        for id in 0..mass.len() {
            let mut s = 0.0;
            for c in 0..total {
                if support[c] && atom_of[c * levels + k] == id {
                    s += nu(c) / mass[id];
                }
            }
            max_conditional_sum_error = max_conditional_sum_error.max((s - 1.0).abs());
        }
        // cylinder mass vs atom mass
        for id in 0..mass.len() {
            let gamma = gamma_of_atom[id];
            let bits = bits_of_atom[id];
            let mut cyl = 0.0;
            for c in 0..total {
                if support[c] && (c as u64 & gamma) == bits {
                    cyl += nu(c);
                }
            }
            max_atom_cylinder_gap = max_atom_cylinder_gap.max((cyl - mass[id]).abs());
        }
        // refinement: the coarser atom must be a function of the finer one
        if k > 0 {
            let mut fine_to_coarse: BTreeMap<usize, usize> = BTreeMap::new();
            for c in 0..total {
                if !support[c] {
                    continue;
                }
                let fine = atom_of[c * levels + k];
                let coarse = prev_atom_of[c];
                match fine_to_coarse.get(&fine) {
                    None => {
                        fine_to_coarse.insert(fine, coarse);
                    }
                    Some(&x) if x != coarse => refinement_ok = false,
                    _ => {}
                }
            }
        }
        prev_atom_of = (0..total).map(|c| atom_of[c * levels + k]).collect();
    }

    // identities
    let mut max_telescoping_error: f64 = 0.0;
    for c in 0..total {
        if support[c] {
            max_telescoping_error =
                max_telescoping_error.max((m_val[c * levels + ec] - tval[c]).abs());
        }
    }
    let delta = |c: usize, k: usize| m_val[c * levels + k] - m_val[c * levels + k - 1];
    let mut max_increment_mean: f64 = 0.0;
    let mut sum_e_delta_sq = 0.0;
    for k in 1..levels {
        let mut ed = 0.0;
        let mut ed2 = 0.0;
        for c in 0..total {
            if support[c] {
                let d = delta(c, k);
                ed += nu(c) * d;
                ed2 += nu(c) * d * d;
            }
        }
        max_increment_mean = max_increment_mean.max(ed.abs());
        sum_e_delta_sq += ed2;
    }
    let mut max_orthogonality_error: f64 = 0.0;
    for j in 1..levels {
        for k in (j + 1)..levels {
            let mut cross = 0.0;
            for c in 0..total {
                if support[c] {
                    cross += nu(c) * delta(c, j) * delta(c, k);
                }
            }
            max_orthogonality_error = max_orthogonality_error.max(cross.abs());
        }
    }

    Ok(MartingaleReport {
        n,
        p_connect,
        mean_t,
        variance,
        max_telescoping_error,
        max_increment_mean,
        max_orthogonality_error,
        variance_decomposition_error: (variance - sum_e_delta_sq).abs(),
        max_conditional_sum_error,
        max_atom_cylinder_gap,
        refinement_ok,
        union_determines_prefix,
        decomposition_deterministic,
    })
}

/// Per-edge conditioned masses of the threshold pivotal event split by the
/// edge's own state, by exhaustive enumeration: `(edge, mass with edge open,
/// mass with edge closed)`.
pub fn exhaustive_h_epsilon_symmetry(
    n: i32,
    epsilon: f64,
) -> Result<Vec<(Edge, f64, f64)>, PercError> {
    let region = BoxRegion::new(n);
    let ec = region.edge_count();
    if ec > 16 {
        return Err(PercError::RegionTooLarge { edges: ec, max: 16 });
    }
    let mut open_mass = vec![0.0f64; ec];
    let mut closed_mass = vec![0.0f64; ec];
    let mut p_connect = 0.0;
    let base_w = 1.0 / (1u64 << ec) as f64;
    for mask in 0..(1u64 << ec) {
        let cfg = Configuration::from_mask(region, mask);
        if clusters::observable_t(&cfg).is_none() {
            continue;
        }
        p_connect += base_w;
        for e in detect_h_epsilon(&cfg, epsilon) {
            let i = region.edge_index(e);
            if cfg.is_open(e) {
                open_mass[i] += base_w;
            } else {
                closed_mass[i] += base_w;
            }
        }
    }
    Ok(region
        .edges()
        .enumerate()
        .map(|(i, e)| (e, open_mass[i] / p_connect, closed_mass[i] / p_connect))
        .collect())
}

/// Monte Carlo check of the variance decomposition at scales beyond
/// enumeration: for conditioned outer samples, each increment is estimated
/// by two independent inner batches of conditional resamples over the
/// revealed edge set, and the products give an unbiased estimate of the
/// squared increments.
#[derive(Clone, Copy, Debug)]
pub struct VarianceDecompositionCheck {
    pub n: i32,
    pub outer: u64,
    pub inner: u64,
    pub increment_sum: f64,
    pub increment_sum_stderr: f64,
    pub direct_variance: f64,
    pub direct_variance_stderr: f64,
}

impl VarianceDecompositionCheck {
    /// |Σ E Δ² − σ²| in units of the combined standard error.
    pub fn discrepancy_se(&self) -> f64 {
        let se = libm::sqrt(
            self.increment_sum_stderr * self.increment_sum_stderr
                + self.direct_variance_stderr * self.direct_variance_stderr,
        );
        libm::fabs(self.increment_sum - self.direct_variance) / se
    }
}

pub fn mc_variance_decomposition(
    n: i32,
    outer: u64,
    inner: u64,
    seed: u64,
) -> Result<VarianceDecompositionCheck, PercError> {
    assert!(outer >= 2 && inner >= 1);
    let region = BoxRegion::new(n);
    let mut sampler = incipient::ConditionedSampler::new(n, n, seed);
    let mut sum_acc = incipient::MomentAccumulator::new(1);
    let mut fill = Configuration::all_closed(region);
    let mut cand = Configuration::all_closed(region);

    // inner conditional mean of T over the cylinder fixing `mask`, by
    // rejection; attempt streams shared across levels for common random
    // numbers
    let inner_cap = incipient::DEFAULT_ATTEMPT_CAP;
    for rep in 0..outer {
        let omega = sampler.sample(rep)?;
        let decomp = bubble_decomposition(&omega);
        let masks = decomp.cumulative_masks(region);
        let mut x = 0.0;
        let mut prev = [f64::NAN; 2];
        for (k, mask) in masks.iter().enumerate() {
            let mut cur = [0.0f64; 2];
            for group in 0..2usize {
                let mut total = 0.0;
                for j in 0..inner {
                    let key = mix64(rep ^ mix64(j * 2 + group as u64) ^ 0x1f3a_9d52_c8b4_7e61);
                    let mut t = None;
                    for attempt in 0..inner_cap {
                        let stream = attempt_stream(key, attempt);
                        fill.fill_from(&crate::lattice::EdgeSampler::new(seed, stream, P_CRITICAL));
                        cand.overlay_from(&omega, mask, &fill);
                        if clusters::origin_reaches_boundary(&cand) {
                            t = Some(clusters::observable_t(&cand).unwrap() as f64);
                            break;
                        }
                    }
                    match t {
                        Some(t) => total += t,
                        None => {
                            return Err(PercError::AcceptanceBudgetExceeded {
                                attempts: inner_cap,
                            })
                        }
                    }
                }
                cur[group] = total / inner as f64;
            }
            if k > 0 {
                x += (cur[0] - prev[0]) * (cur[1] - prev[1]);
            }
            prev = cur;
        }
        sum_acc.add(x);
    }

    // independent, much larger direct-variance run
    let mut direct = incipient::MomentAccumulator::new(2);
    let mut stats = incipient::SamplerStats::default();
    incipient::accumulate_t(
        n,
        n,
        seed ^ 0x5ca1_ab1e,
        0..(outer * 50).max(20_000),
        incipient::DEFAULT_ATTEMPT_CAP,
        &mut direct,
        &mut stats,
    )?;

    Ok(VarianceDecompositionCheck {
        n,
        outer,
        inner,
        increment_sum: sum_acc.moment(1)?,
        increment_sum_stderr: sum_acc.moment_stderr(1)?,
        direct_variance: direct.variance()?,
        direct_variance_stderr: direct.variance_jackknife_stderr()?,
    })
}
