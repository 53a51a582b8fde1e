//! Sampling from the conditioned measure ν_m (critical percolation given
//! `0 -> ∂B(m)`), moment estimation for `T_n` and `S_n`, and the exhaustive
//! enumeration oracle used by the exact tests.

use alloc::vec;
use alloc::vec::Vec;

use crate::clusters::{self, ReachScratch};
use crate::error::PercError;
use crate::lattice::{attempt_stream, BoxRegion, Configuration, Edge, EdgeSampler, Vertex};
use crate::P_CRITICAL;

/// Which volume observable a moment estimate refers to.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Observable {
    /// `T_n`: origin-cluster volume in `B(n)` under ν_m.
    ConditionedVolume,
    /// `S_n`: vertices of `B(n)` reaching `∂B(2n)`, unconditioned.
    BoundaryCount,
}

/// A Monte Carlo moment with its standard error and provenance.
#[derive(Clone, Copy, Debug)]
pub struct MomentEstimate {
    pub observable: Observable,
    pub order: u32,
    pub n: i32,
    pub m: i32,
    pub estimate: f64,
    pub stderr: f64,
    pub count: u64,
}

/// Rejection-sampling statistics.
#[derive(Clone, Copy, Debug, Default)]
pub struct SamplerStats {
    pub attempts: u64,
    pub accepts: u64,
}

impl SamplerStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            return 0.0;
        }
        self.accepts as f64 / self.attempts as f64
    }

    pub fn merge(&mut self, other: &SamplerStats) {
        self.attempts += other.attempts;
        self.accepts += other.accepts;
    }
}

/// Default cap on rejection attempts per replica. Acceptance decays like a
/// small power of `m`, so this is astronomically conservative at desk scales.
pub const DEFAULT_ATTEMPT_CAP: u64 = 1 << 24;

/// Exact rejection sampler for ν_m on `B(m)`: propose i.i.d. critical
/// configurations, keep the first with `0 -> ∂B(m)`.
#[derive(Clone, Debug)]
pub struct ConditionedSampler {
    pub m: i32,
    pub n: i32,
    pub p: f64,
    pub seed: u64,
    pub attempt_cap: u64,
    pub stats: SamplerStats,
}

impl ConditionedSampler {
    pub fn new(m: i32, n: i32, seed: u64) -> Self {
        assert!(1 <= n && n <= m);
        ConditionedSampler {
            m,
            n,
            p: P_CRITICAL,
            seed,
            attempt_cap: DEFAULT_ATTEMPT_CAP,
            stats: SamplerStats::default(),
        }
    }

    /// Accepted configuration for this replica, fully materialized.
    pub fn sample(&mut self, replica: u64) -> Result<Configuration, PercError> {
        let region = BoxRegion::new(self.m);
        for attempt in 0..self.attempt_cap {
            self.stats.attempts += 1;
            let stream = attempt_stream(replica, attempt);
            let cfg = Configuration::sample_stream(region, self.p, self.seed, stream);
            if clusters::origin_reaches_boundary(&cfg) {
                self.stats.accepts += 1;
                return Ok(cfg);
            }
        }
        Err(PercError::AcceptanceBudgetExceeded { attempts: self.attempt_cap })
    }
}

/// Convenience wrapper: one accepted configuration from ν_m.
pub fn sample_incipient(
    m: i32,
    n: i32,
    seed: u64,
    replica: u64,
) -> Result<Configuration, PercError> {
    ConditionedSampler::new(m, n, seed).sample(replica)
}

/// Lazy origin-cluster scan: explores only the origin's open cluster of a
/// virtual configuration on `B(m)`, querying edge states straight from the
/// counter-based sampler. Reports whether the cluster reaches `∂B(m)` and
/// how many of its vertices lie in `B(n)`. Agrees exactly with
/// materializing the configuration and labeling it.
pub struct OriginClusterScan {
    region: BoxRegion,
    n: i32,
    stamp: Vec<u32>,
    generation: u32,
    queue: Vec<Vertex>,
}

impl OriginClusterScan {
    pub fn new(m: i32, n: i32) -> Self {
        assert!(1 <= n && n <= m);
        let region = BoxRegion::new(m);
        OriginClusterScan {
            region,
            n,
            stamp: vec![0; region.vertex_count()],
            generation: 0,
            queue: Vec::new(),
        }
    }

    /// `(reaches ∂B(m), |C(0) ∩ B(n)|, |C(0) ∩ B(m)|)` for the configuration
    /// defined by `sampler` over the canonical edge order of `B(m)`.
    pub fn scan(&mut self, sampler: &EdgeSampler) -> (bool, usize, usize) {
        self.generation += 1;
        if self.generation == 0 {
            // stamp wrap: wipe and restart
            for s in self.stamp.iter_mut() {
                *s = 0;
            }
            self.generation = 1;
        }
        let gen = self.generation;
        let region = self.region;
        let m = region.radius();
        self.queue.clear();
        self.queue.push(Vertex::ORIGIN);
        self.stamp[region.vertex_index(Vertex::ORIGIN)] = gen;
        let mut head = 0;
        let mut reached = false;
        let mut inner = 0usize;
        let mut total = 0usize;
        while head < self.queue.len() {
            let v = self.queue[head];
            head += 1;
            total += 1;
            if v.norm_inf() <= self.n {
                inner += 1;
            }
            if v.norm_inf() == m {
                reached = true;
            }
            for w in v.neighbors() {
                if !region.contains(w) {
                    continue;
                }
                let wi = region.vertex_index(w);
                if self.stamp[wi] == gen {
                    continue;
                }
                if sampler.is_open(region.edge_index(Edge::new(v, w))) {
                    self.stamp[wi] = gen;
                    self.queue.push(w);
                }
            }
        }
        (reached, inner, total)
    }
}

/// Streaming power sums of an observable, mergeable across workers.
/// Tracks raw sums `Σ y^j` up to `2 * max_order` so that any moment up to
/// `max_order` carries a standard error and the variance a jackknife one.
#[derive(Clone, Debug)]
pub struct MomentAccumulator {
    max_order: u32,
    pub count: u64,
    sums: Vec<f64>,
}

impl MomentAccumulator {
    pub fn new(max_order: u32) -> Self {
        assert!(max_order >= 1);
        MomentAccumulator {
            max_order,
            count: 0,
            sums: vec![0.0; (2 * max_order) as usize],
        }
    }

    pub fn add(&mut self, y: f64) {
        self.count += 1;
        let mut p = 1.0;
        for s in self.sums.iter_mut() {
            p *= y;
            *s += p;
        }
    }

    /// Componentwise merge; associative and commutative up to float rounding,
    /// so callers fix the merge order when bit-reproducibility matters.
    pub fn merge(&mut self, other: &MomentAccumulator) {
        assert_eq!(self.max_order, other.max_order);
        self.count += other.count;
        for (a, b) in self.sums.iter_mut().zip(other.sums.iter()) {
            *a += *b;
        }
    }

    pub fn power_sum(&self, order: u32) -> Result<f64, PercError> {
        if order == 0 {
            return Ok(self.count as f64);
        }
        if order > 2 * self.max_order {
            return Err(PercError::UnsupportedMomentOrder { order, max: 2 * self.max_order });
        }
        Ok(self.sums[(order - 1) as usize])
    }

    /// Raw sums, count first; the merge-file format serializes these.
    pub fn raw_parts(&self) -> (u64, &[f64]) {
        (self.count, &self.sums)
    }

    pub fn from_raw_parts(count: u64, sums: &[f64]) -> Self {
        assert!(!sums.is_empty() && sums.len() % 2 == 0);
        MomentAccumulator {
            max_order: (sums.len() / 2) as u32,
            count,
            sums: sums.to_vec(),
        }
    }

    /// Mean of `y^order`.
    pub fn moment(&self, order: u32) -> Result<f64, PercError> {
        assert!(self.count > 0);
        Ok(self.power_sum(order)? / self.count as f64)
    }

    /// Standard error of the `order`-th moment estimate from independent
    /// replicas: sd(y^order)/√N.
    pub fn moment_stderr(&self, order: u32) -> Result<f64, PercError> {
        let n = self.count as f64;
        if self.count < 2 {
            return Ok(f64::INFINITY);
        }
        let m1 = self.moment(order)?;
        let m2 = self.moment(2 * order)?;
        let var = ((m2 - m1 * m1) * n / (n - 1.0)).max(0.0);
        Ok(libm::sqrt(var / n))
    }

    /// Central power sums `Σ (y-ȳ)^j` for j = 2,3,4, from the raw sums.
    fn central_sums(&self) -> Result<(f64, f64, f64), PercError> {
        let n = self.count as f64;
        let s1 = self.power_sum(1)?;
        let s2 = self.power_sum(2)?;
        let s3 = self.power_sum(3)?;
        let s4 = self.power_sum(4)?;
        let mu = s1 / n;
        let c2 = s2 - n * mu * mu;
        let c3 = s3 - 3.0 * mu * s2 + 2.0 * n * mu * mu * mu;
        let c4 = s4 - 4.0 * mu * s3 + 6.0 * mu * mu * s2 - 3.0 * n * mu * mu * mu * mu;
        let _ = c3;
        Ok((c2, c3, c4))
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> Result<f64, PercError> {
        assert!(self.count >= 2);
        let (c2, _, _) = self.central_sums()?;
        Ok((c2 / (self.count as f64 - 1.0)).max(0.0))
    }

    /// Jackknife standard error of the sample variance, in closed form from
    /// the power sums: with centered values z_i, the leave-one-out variances
    /// are affine in z_i², giving SE² = (N-1)/N · k² (Σz⁴ - (Σz²)²/N),
    /// k = N/((N-1)(N-2)).
    pub fn variance_jackknife_stderr(&self) -> Result<f64, PercError> {
        let n = self.count as f64;
        if self.count < 3 {
            return Ok(f64::INFINITY);
        }
        let (c2, _, c4) = self.central_sums()?;
        let k = n / ((n - 1.0) * (n - 2.0));
        let spread = (c4 - c2 * c2 / n).max(0.0);
        Ok(libm::sqrt((n - 1.0) / n * k * k * spread))
    }
}

/// Accumulate `T_n^1..` power sums over a replica range using the lazy scan.
/// Each replica index yields exactly one accepted sample, so results are
/// independent of how the range is split across workers.
pub fn accumulate_t(
    m: i32,
    n: i32,
    seed: u64,
    replicas: core::ops::Range<u64>,
    attempt_cap: u64,
    acc: &mut MomentAccumulator,
    stats: &mut SamplerStats,
) -> Result<(), PercError> {
    let mut scan = OriginClusterScan::new(m, n);
    for replica in replicas {
        let mut accepted = false;
        for attempt in 0..attempt_cap {
            stats.attempts += 1;
            let sampler = EdgeSampler::new(seed, attempt_stream(replica, attempt), P_CRITICAL);
            let (reached, inner, _) = scan.scan(&sampler);
            if reached {
                stats.accepts += 1;
                acc.add(inner as f64);
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(PercError::AcceptanceBudgetExceeded { attempts: attempt_cap });
        }
    }
    Ok(())
}

/// Accumulate `S_n` power sums over a replica range (unconditioned, one
/// union-find pass over `B(2n)` per replica, buffers reused).
pub fn accumulate_s(
    n: i32,
    seed: u64,
    replicas: core::ops::Range<u64>,
    acc: &mut MomentAccumulator,
) {
    let region = BoxRegion::new(2 * n);
    let mut cfg = Configuration::all_closed(region);
    let mut scratch = ReachScratch::new(region.vertex_count());
    for replica in replicas {
        let sampler = EdgeSampler::new(seed, replica, P_CRITICAL);
        cfg.fill_from(&sampler);
        acc.add(clusters::boundary_reach_count_with(&cfg, n, &mut scratch) as f64);
    }
}

/// Mean of `observable^order` with standard error over independent replicas.
pub fn estimate_moment(
    observable: Observable,
    order: u32,
    n: i32,
    m: i32,
    replicas: u64,
    seed: u64,
) -> Result<MomentEstimate, PercError> {
    let acc = run_accumulator(observable, n, m, replicas, seed)?;
    Ok(MomentEstimate {
        observable,
        order,
        n,
        m,
        estimate: acc.moment(order)?,
        stderr: acc.moment_stderr(order)?,
        count: acc.count,
    })
}

/// Unbiased sample variance of the observable with jackknife standard error.
pub fn estimate_variance(
    observable: Observable,
    n: i32,
    m: i32,
    replicas: u64,
    seed: u64,
) -> Result<MomentEstimate, PercError> {
    assert!(replicas >= 2);
    let acc = run_accumulator(observable, n, m, replicas, seed)?;
    Ok(MomentEstimate {
        observable,
        order: 2,
        n,
        m,
        estimate: acc.variance()?,
        stderr: acc.variance_jackknife_stderr()?,
        count: acc.count,
    })
}

fn run_accumulator(
    observable: Observable,
    n: i32,
    m: i32,
    replicas: u64,
    seed: u64,
) -> Result<MomentAccumulator, PercError> {
    let mut acc = MomentAccumulator::new(2);
    match observable {
        Observable::ConditionedVolume => {
            let mut stats = SamplerStats::default();
            accumulate_t(m, n, seed, 0..replicas, DEFAULT_ATTEMPT_CAP, &mut acc, &mut stats)?;
        }
        Observable::BoundaryCount => {
            accumulate_s(n, seed, 0..replicas, &mut acc);
        }
    }
    Ok(acc)
}

/// Monte Carlo estimate of `P(S_n >= threshold)` with binomial standard
/// error.
pub fn tail_probability_s(n: i32, threshold: f64, replicas: u64, seed: u64) -> (f64, f64) {
    let region = BoxRegion::new(2 * n);
    let mut cfg = Configuration::all_closed(region);
    let mut scratch = ReachScratch::new(region.vertex_count());
    let mut hits = 0u64;
    for replica in 0..replicas {
        let sampler = EdgeSampler::new(seed, replica, P_CRITICAL);
        cfg.fill_from(&sampler);
        if clusters::boundary_reach_count_with(&cfg, n, &mut scratch) as f64 >= threshold {
            hits += 1;
        }
    }
    let p = hits as f64 / replicas as f64;
    (p, libm::sqrt(p * (1.0 - p) / replicas as f64))
}

/// The `S_n` tail threshold `n^{2 - 5/48 - ε}`.
pub fn s_tail_threshold(n: i32, epsilon: f64) -> f64 {
    libm::pow(n as f64, 2.0 - 5.0 / 48.0 - epsilon)
}

/// Hard bound on exhaustively enumerable regions: 2^26 configurations.
pub const MAX_ENUM_EDGES: usize = 26;

/// Exhaustive distribution of `(conditioning event, T_n)` on a small box,
/// under both the product measure and the conditioned measure.
#[derive(Clone, Debug)]
pub struct ExactDistribution {
    pub n: i32,
    /// `P(0 -> ∂B(n))`.
    pub p_connect: f64,
    /// `atom_nu[t]` = ν_n(T_n = t); index 0 unused (T ≥ 1 when conditioned).
    pub atom_nu: Vec<f64>,
    /// Total product-measure mass (should be 1).
    pub total_mass: f64,
}

impl ExactDistribution {
    pub fn nu_mass(&self) -> f64 {
        self.atom_nu.iter().sum()
    }

    /// Exact `E_ν T_n^order`.
    pub fn moment(&self, order: u32) -> f64 {
        let mut total = 0.0;
        for (t, p) in self.atom_nu.iter().enumerate() {
            let mut y = 1.0;
            for _ in 0..order {
                y *= t as f64;
            }
            total += y * p;
        }
        total
    }

    /// Exact `σ²_ν(T_n)`.
    pub fn variance(&self) -> f64 {
        let m1 = self.moment(1);
        self.moment(2) - m1 * m1
    }
}

/// Run `f(config, weight)` over every configuration of the box, with
/// `weight = 2^{-|edges|}` the critical product-measure mass.
pub fn enumerate_with(
    region: BoxRegion,
    mut f: impl FnMut(&Configuration, f64),
) -> Result<(), PercError> {
    let edges = region.edge_count();
    if edges > MAX_ENUM_EDGES {
        return Err(PercError::RegionTooLarge { edges, max: MAX_ENUM_EDGES });
    }
    let weight = 1.0 / (1u64 << edges) as f64;
    for mask in 0..(1u64 << edges) {
        let cfg = Configuration::from_mask(region, mask);
        f(&cfg, weight);
    }
    Ok(())
}

/// Exhaustive enumeration oracle for tiny boxes.
pub fn exact_enumerate(n: i32) -> Result<ExactDistribution, PercError> {
    let region = BoxRegion::new(n);
    let mut total_mass = 0.0;
    let mut p_connect = 0.0;
    let mut atom_raw = vec![0.0; region.vertex_count() + 1];
    enumerate_with(region, |cfg, w| {
        total_mass += w;
        if let Some(t) = clusters::observable_t(cfg) {
            p_connect += w;
            atom_raw[t] += w;
        }
    })?;
    let atom_nu: Vec<f64> = atom_raw.iter().map(|raw| raw / p_connect).collect();
    Ok(ExactDistribution { n, p_connect, atom_nu, total_mass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_normalization_and_connect_probability() {
        let d = exact_enumerate(1).unwrap();
        assert!((d.total_mass - 1.0).abs() < 1e-12);
        assert!((d.nu_mass() - 1.0).abs() < 1e-12);
        // connection fails only when all four origin edges are closed
        assert!((d.p_connect - 15.0 / 16.0).abs() < 1e-12);
        assert!(d.atom_nu[0] == 0.0);
    }

    #[test]
    fn oracle_moment_ordering() {
        let d = exact_enumerate(1).unwrap();
        let m1 = d.moment(1);
        let m2 = d.moment(2);
        assert!(m2 >= m1 * m1);
        assert!(d.variance() >= 0.0);
        assert!(m1 >= 1.0 && m1 <= 9.0);
    }

    #[test]
    fn region_too_large_rejected() {
        assert!(matches!(
            exact_enumerate(3),
            Err(PercError::RegionTooLarge { .. })
        ));
    }

    #[test]
    fn sampler_only_emits_conditioned_configs() {
        let mut s = ConditionedSampler::new(2, 2, 41);
        for replica in 0..200 {
            let cfg = s.sample(replica).unwrap();
            assert!(clusters::origin_reaches_boundary(&cfg));
        }
        assert!(s.stats.accepts == 200);
        assert!(s.stats.attempts >= 200);
    }

    #[test]
    fn acceptance_rate_near_oracle_at_n1() {
        let mut s = ConditionedSampler::new(1, 1, 7);
        for replica in 0..2000 {
            s.sample(replica).unwrap();
        }
        let rate = s.stats.acceptance_rate();
        // 15/16 with binomial noise over >= 2000 attempts
        assert!((rate - 15.0 / 16.0).abs() < 0.03, "rate {rate}");
    }

    #[test]
    fn lazy_scan_matches_materialized_labeling() {
        let m = 4;
        let n = 2;
        let region = BoxRegion::new(m);
        let mut scan = OriginClusterScan::new(m, n);
        for replica in 0..300u64 {
            let sampler = EdgeSampler::new(17, replica, P_CRITICAL);
            let (reached, inner, total) = scan.scan(&sampler);
            let mut cfg = Configuration::all_closed(region);
            cfg.fill_from(&sampler);
            let cluster = clusters::bfs_cluster(&cfg, Vertex::ORIGIN);
            assert_eq!(total, cluster.len());
            assert_eq!(reached, cluster.iter().any(|v| v.norm_inf() == m));
            assert_eq!(inner, cluster.iter().filter(|v| v.norm_inf() <= n).count());
        }
    }

    #[test]
    fn accumulator_merge_equals_single_pass() {
        let mut whole = MomentAccumulator::new(2);
        let mut left = MomentAccumulator::new(2);
        let mut right = MomentAccumulator::new(2);
        accumulate_s(2, 5, 0..200, &mut whole);
        accumulate_s(2, 5, 0..120, &mut left);
        accumulate_s(2, 5, 120..200, &mut right);
        left.merge(&right);
        assert_eq!(whole.count, left.count);
        for order in 1..=4 {
            let a = whole.power_sum(order).unwrap();
            let b = left.power_sum(order).unwrap();
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn variance_and_jackknife_against_direct_formulas() {
        let ys = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        let mut acc = MomentAccumulator::new(2);
        for y in ys {
            acc.add(y);
        }
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (n - 1.0);
        assert!((acc.variance().unwrap() - var).abs() < 1e-12);

        // direct leave-one-out jackknife
        let loo_var = |skip: usize| {
            let vals: Vec<f64> = ys
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, y)| *y)
                .collect();
            let k = vals.len() as f64;
            let mu = vals.iter().sum::<f64>() / k;
            vals.iter().map(|y| (y - mu) * (y - mu)).sum::<f64>() / (k - 1.0)
        };
        let loos: Vec<f64> = (0..ys.len()).map(loo_var).collect();
        let lmean = loos.iter().sum::<f64>() / n;
        let se = ((n - 1.0) / n * loos.iter().map(|v| (v - lmean) * (v - lmean)).sum::<f64>())
            .sqrt();
        assert!((acc.variance_jackknife_stderr().unwrap() - se).abs() < 1e-10);
    }

    #[test]
    fn estimate_matches_oracle_at_n1() {
        let d = exact_enumerate(1).unwrap();
        let replicas = 20_000;
        for order in [1, 2] {
            let est =
                estimate_moment(Observable::ConditionedVolume, order, 1, 1, replicas, 99).unwrap();
            let exact = d.moment(order);
            assert!(
                (est.estimate - exact).abs() < 3.0 * est.stderr,
                "order {order}: {} vs {exact} (se {})",
                est.estimate,
                est.stderr
            );
        }
        let v = estimate_variance(Observable::ConditionedVolume, 1, 1, replicas, 99).unwrap();
        assert!((v.estimate - d.variance()).abs() < 3.0 * v.stderr);
    }

    #[test]
    fn tail_probability_extremes() {
        let (p0, _) = tail_probability_s(2, 0.0, 200, 3);
        assert_eq!(p0, 1.0);
        let impossible = (5.0f64 * 5.0 + 1.0) as f64;
        let (p1, _) = tail_probability_s(2, impossible, 200, 3);
        assert_eq!(p1, 0.0);
    }
}
