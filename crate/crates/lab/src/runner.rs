//! Command implementations: deterministic block-parallel replica execution,
//! series assembly, fitting and merging.

use std::collections::HashMap;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use perc_core::arms;
use perc_core::clusters::{self, ReachScratch};
use perc_core::incipient::{self, MomentAccumulator, SamplerStats, DEFAULT_ATTEMPT_CAP};
use perc_core::lattice::{mix64, BoxRegion, Configuration, Edge, EdgeSampler, Vertex};
use perc_core::martingale;
use perc_core::scaling::{
    compare_targets, fit_exponent, ExponentEstimate, RationalExponent, ScalingSeries,
    SeriesPoint, Verdict,
};
use perc_core::P_CRITICAL;

use crate::config::{ExperimentConfig, OutputFormat};
use crate::io::{Series, SeriesMeta, SeriesRow, SCHEMA_VERSION};
use crate::LabError;

/// Replicas per work unit. Blocks are merged in index order, so accumulated
/// sums do not depend on the worker count.
pub const BLOCK: u64 = 1 << 10;

/// Run `work` over fixed-size sub-ranges of `range` on `workers` threads and
/// return the per-block results in block order.
pub fn run_blocks<A, F>(range: Range<u64>, workers: usize, work: F) -> Result<Vec<A>, LabError>
where
    A: Send,
    F: Fn(Range<u64>) -> Result<A, LabError> + Sync,
{
    let mut blocks: Vec<Range<u64>> = Vec::new();
    let mut at = range.start;
    while at < range.end {
        let hi = (at + BLOCK).min(range.end);
        blocks.push(at..hi);
        at = hi;
    }
    let slots: Vec<Mutex<Option<Result<A, LabError>>>> =
        blocks.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..workers.max(1).min(blocks.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= blocks.len() {
                    break;
                }
                let result = work(blocks[i].clone());
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });
    let mut out = Vec::with_capacity(blocks.len());
    for slot in slots {
        out.push(slot.into_inner().unwrap().expect("worker left a block unfinished")?);
    }
    Ok(out)
}

fn scale_seed(seed: u64, salt: u64, n: i32) -> u64 {
    mix64(seed ^ mix64(salt.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ n as u64))
}

fn binomial_row(n: i32, samples: u64, successes: u64) -> SeriesRow {
    let p = successes as f64 / samples as f64;
    SeriesRow {
        n,
        samples,
        estimate: p,
        stderr: (p * (1.0 - p) / samples as f64).sqrt(),
        extras: vec![successes as f64],
    }
}

/// Everything a command produces before it is written to disk.
pub struct CommandOutput {
    pub command: &'static str,
    /// (file stem, series) pairs.
    pub series: Vec<(String, Series)>,
    pub results: serde_json::Value,
}

fn meta(cfg: &ExperimentConfig, command: &str) -> SeriesMeta {
    SeriesMeta {
        schema: SCHEMA_VERSION,
        command: command.to_string(),
        hash: cfg.identity_hash(command.split('_').next().unwrap_or(command)),
        offset: cfg.offset,
        replicas: cfg.replicas,
    }
}

fn replica_range(cfg: &ExperimentConfig) -> Range<u64> {
    cfg.offset..cfg.offset + cfg.replicas
}

// ---------------------------------------------------------------------------
// commands

/// Exhaustive n = 1 reference distribution (the golden values every
/// statistical run is checked against).
pub fn cmd_oracle(cfg: &ExperimentConfig) -> Result<CommandOutput, LabError> {
    let exact = incipient::exact_enumerate(1)?;
    let atoms: Vec<serde_json::Value> = exact
        .atom_nu
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(t, p)| serde_json::json!({ "t": t, "nu_mass": p }))
        .collect();
    let series = Series {
        meta: meta(cfg, "oracle"),
        extra_names: vec!["variance".into(), "p_connect".into()],
        rows: vec![SeriesRow {
            n: 1,
            samples: 1 << 12,
            estimate: exact.moment(1),
            stderr: 0.0,
            extras: vec![exact.variance(), exact.p_connect],
        }],
    };
    Ok(CommandOutput {
        command: "oracle",
        series: vec![("oracle".into(), series)],
        results: serde_json::json!({
            "n": exact.n,
            "total_mass": exact.total_mass,
            "nu_mass": exact.nu_mass(),
            "p_connect": exact.p_connect,
            "mean_t": exact.moment(1),
            "variance_t": exact.variance(),
            "atoms": atoms,
        }),
    })
}

/// Conditioned cluster-volume moments: `T_n` under ν_{m_factor·n}.
pub fn cmd_incipient(cfg: &ExperimentConfig) -> Result<CommandOutput, LabError> {
    let mut rows = Vec::new();
    let mut per_scale = Vec::new();
    for &n in &cfg.n_grid {
        let m = cfg.m_factor * n;
        let seed = scale_seed(cfg.seed, 1, n);
        let parts = run_blocks(replica_range(cfg), cfg.workers, |range| {
            let mut acc = MomentAccumulator::new(2);
            let mut stats = SamplerStats::default();
            incipient::accumulate_t(m, n, seed, range, DEFAULT_ATTEMPT_CAP, &mut acc, &mut stats)?;
            Ok((acc, stats))
        })?;
        let mut acc = MomentAccumulator::new(2);
        let mut stats = SamplerStats::default();
        for (a, s) in &parts {
            acc.merge(a);
            stats.merge(s);
        }
        rows.push(moment_row(n, &acc, &[stats.attempts as f64])?);
        per_scale.push(serde_json::json!({
            "n": n, "m": m, "acceptance_rate": stats.acceptance_rate(),
        }));
    }
    let series = Series {
        meta: meta(cfg, "incipient"),
        extra_names: moment_extra_names(&["attempts"]),
        rows,
    };
    let fits = moment_fits(&series, (91, 48), (91, 24));
    Ok(CommandOutput {
        command: "incipient",
        series: vec![("incipient".into(), series)],
        results: serde_json::json!({ "scales": per_scale, "fits": fits }),
    })
}

/// Unconditioned boundary-connected volume `S_n` in `B(n)` against
/// `∂B(2n)`, with the `n^{2 - 5/48 - ε}` tail frequency alongside.
pub fn cmd_sn(cfg: &ExperimentConfig) -> Result<CommandOutput, LabError> {
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        let seed = scale_seed(cfg.seed, 2, n);
        let threshold = incipient::s_tail_threshold(n, cfg.epsilon);
        let parts = run_blocks(replica_range(cfg), cfg.workers, |range| {
            let region = BoxRegion::new(2 * n);
            let mut c = Configuration::all_closed(region);
            let mut scratch = ReachScratch::new(region.vertex_count());
            let mut acc = MomentAccumulator::new(2);
            let mut tail = 0u64;
            for replica in range {
                c.fill_from(&EdgeSampler::new(seed, replica, P_CRITICAL));
                let s = clusters::boundary_reach_count_with(&c, n, &mut scratch) as f64;
                acc.add(s);
                if s >= threshold {
                    tail += 1;
                }
            }
            Ok((acc, tail))
        })?;
        let mut acc = MomentAccumulator::new(2);
        let mut tail = 0u64;
        for (a, t) in &parts {
            acc.merge(a);
            tail += t;
        }
        rows.push(moment_row(n, &acc, &[tail as f64, threshold])?);
    }
    let series = Series {
        meta: meta(cfg, "sn"),
        extra_names: moment_extra_names(&["tail_hits", "tail_threshold"]),
        rows,
    };
    let fits = moment_fits(&series, (91, 48), (91, 24));
    let tails: Vec<serde_json::Value> = series
        .rows
        .iter()
        .map(|r| {
            serde_json::json!({
                "n": r.n,
                "threshold": r.extras[7],
                "tail_probability": r.extras[6] / r.samples as f64,
            })
        })
        .collect();
    Ok(CommandOutput {
        command: "sn",
        series: vec![("sn".into(), series)],
        results: serde_json::json!({ "fits": fits, "tail": tails }),
    })
}

/// Annulus crossing frequencies for (open, closed) arm counts
/// (1,0), (1,1) and (2,2) over `A(1,n)`.
pub fn cmd_arms(cfg: &ExperimentConfig) -> Result<CommandOutput, LabError> {
    let mut rows10 = Vec::new();
    let mut rows11 = Vec::new();
    let mut rows22 = Vec::new();
    for &n in &cfg.n_grid {
        if n < 2 {
            return Err(LabError::Usage("arm scales must be >= 2".into()));
        }
        let seed = scale_seed(cfg.seed, 3, n);
        let parts = run_blocks(replica_range(cfg), cfg.workers, |range| {
            let region = BoxRegion::new(n);
            let mut c = Configuration::all_closed(region);
            let mut hits = [0u64; 3];
            for replica in range {
                c.fill_from(&EdgeSampler::new(seed, replica, P_CRITICAL));
                // one capped flow per color decides all three events
                let open = arms::count_open_capped(&c, Vertex::ORIGIN, 1, n, 2);
                if open == 0 {
                    continue;
                }
                hits[0] += 1;
                let closed = arms::count_closed_capped(&c, Vertex::ORIGIN, 1, n, 2);
                if closed >= 1 {
                    hits[1] += 1;
                    if open >= 2 && closed >= 2 {
                        hits[2] += 1;
                    }
                }
            }
            Ok(hits)
        })?;
        let mut hits = [0u64; 3];
        for part in &parts {
            for (h, p) in hits.iter_mut().zip(part) {
                *h += p;
            }
        }
        rows10.push(binomial_row(n, cfg.replicas, hits[0]));
        rows11.push(binomial_row(n, cfg.replicas, hits[1]));
        rows22.push(binomial_row(n, cfg.replicas, hits[2]));
    }
    let make = |stem: &str, rows: Vec<SeriesRow>| Series {
        meta: meta(cfg, stem),
        extra_names: vec!["successes".into()],
        rows,
    };
    let series = vec![
        ("arms_q10".to_string(), make("arms_q10", rows10)),
        ("arms_q11".to_string(), make("arms_q11", rows11)),
        ("arms_q22".to_string(), make("arms_q22", rows22)),
    ];
    let fits: Vec<serde_json::Value> = series
        .iter()
        .zip([(5i64, 48i64), (3, 12), (15, 12)])
        .map(|((stem, s), (num, den))| {
            match decay_fit(s, RationalExponent::new(num, den)) {
                Ok((est, verdict)) => fit_json(stem, &est, Some(&verdict)),
                Err(e) => serde_json::json!({ "series": stem, "error": e.to_string() }),
            }
        })
        .collect();
    Ok(CommandOutput {
        command: "arms",
        series,
        results: serde_json::json!({ "fits": fits }),
    })
}

/// Frequencies of large-cluster interior pivotal edges under ν_n, plus the
/// exact open/closed symmetry table at n = 1.
pub fn cmd_pivotal(cfg: &ExperimentConfig) -> Result<CommandOutput, LabError> {
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        let seed = scale_seed(cfg.seed, 4, n);
        let eps = cfg.epsilon;
        let parts = run_blocks(replica_range(cfg), cfg.workers, |range| {
            let mut sampler = incipient::ConditionedSampler::new(n, n, seed);
            let mut acc = MomentAccumulator::new(1);
            let mut nonempty = 0u64;
            for replica in range {
                let c = sampler.sample(replica)?;
                let edges = martingale::detect_h_epsilon(&c, eps);
                acc.add(edges.len() as f64);
                if !edges.is_empty() {
                    nonempty += 1;
                }
            }
            Ok((acc, nonempty))
        })?;
        let mut acc = MomentAccumulator::new(1);
        let mut nonempty = 0u64;
        for (a, k) in &parts {
            acc.merge(a);
            nonempty += k;
        }
        rows.push(SeriesRow {
            n,
            samples: acc.raw_parts().0,
            estimate: acc.moment(1)?,
            stderr: acc.moment_stderr(1)?,
            extras: vec![
                acc.power_sum(1)?,
                acc.power_sum(2)?,
                nonempty as f64,
            ],
        });
    }
    let table = martingale::exhaustive_h_epsilon_symmetry(1, cfg.epsilon)?;
    let max_asym = table
        .iter()
        .map(|(_, open, closed)| (open - closed).abs())
        .fold(0.0f64, f64::max);
    let series = Series {
        meta: meta(cfg, "pivotal"),
        extra_names: vec!["s1".into(), "s2".into(), "nonempty".into()],
        rows,
    };
    Ok(CommandOutput {
        command: "pivotal",
        series: vec![("pivotal".into(), series)],
        results: serde_json::json!({
            "epsilon": cfg.epsilon,
            "symmetry_n1": { "edges": table.len(), "max_asymmetry": max_asym },
        }),
    })
}

/// Exact martingale identity report at n = 1, and (for a small grid scale)
/// the Monte Carlo check that increment variances add up to the variance.
pub fn cmd_bubble(cfg: &ExperimentConfig) -> Result<CommandOutput, LabError> {
    let report = martingale::verify_martingale_identities(1)?;
    let mc_scale = cfg.n_grid.iter().copied().find(|&n| (2..=4).contains(&n));
    let mc = match mc_scale {
        Some(n) if cfg.replicas >= 2 => {
            let outer = cfg.replicas.clamp(2, 512);
            let check = martingale::mc_variance_decomposition(n, outer, 64, cfg.seed)?;
            serde_json::json!({
                "n": check.n,
                "outer": check.outer,
                "inner": check.inner,
                "increment_sum": check.increment_sum,
                "increment_sum_stderr": check.increment_sum_stderr,
                "direct_variance": check.direct_variance,
                "direct_variance_stderr": check.direct_variance_stderr,
                "discrepancy_se": check.discrepancy_se(),
            })
        }
        _ => serde_json::Value::Null,
    };
    let series = Series {
        meta: meta(cfg, "bubble"),
        extra_names: vec![
            "mean_t".into(),
            "p_connect".into(),
            "max_telescoping_error".into(),
            "max_increment_mean".into(),
            "max_orthogonality_error".into(),
            "variance_decomposition_error".into(),
            "max_conditional_sum_error".into(),
        ],
        rows: vec![SeriesRow {
            n: report.n,
            samples: 1 << 12,
            estimate: report.variance,
            stderr: 0.0,
            extras: vec![
                report.mean_t,
                report.p_connect,
                report.max_telescoping_error,
                report.max_increment_mean,
                report.max_orthogonality_error,
                report.variance_decomposition_error,
                report.max_conditional_sum_error,
            ],
        }],
    };
    Ok(CommandOutput {
        command: "bubble",
        series: vec![("bubble".into(), series)],
        results: serde_json::json!({
            "identities": {
                "n": report.n,
                "p_connect": report.p_connect,
                "mean_t": report.mean_t,
                "variance": report.variance,
                "max_telescoping_error": report.max_telescoping_error,
                "max_increment_mean": report.max_increment_mean,
                "max_orthogonality_error": report.max_orthogonality_error,
                "variance_decomposition_error": report.variance_decomposition_error,
                "max_conditional_sum_error": report.max_conditional_sum_error,
                "max_atom_cylinder_gap": report.max_atom_cylinder_gap,
                "refinement_ok": report.refinement_ok,
                "union_determines_prefix": report.union_determines_prefix,
                "decomposition_deterministic": report.decomposition_deterministic,
            },
            "variance_decomposition_mc": mc,
        }),
    })
}

/// Self-dual rectangle crossing frequency; every sample is also checked for
/// the exclusion between the open crossing and the vacant dual crossing.
pub fn cmd_crossing(cfg: &ExperimentConfig) -> Result<CommandOutput, LabError> {
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        let seed = scale_seed(cfg.seed, 5, n);
        let parts = run_blocks(replica_range(cfg), cfg.workers, |range| {
            let edges = arms::rectangle_edges(n);
            let index: HashMap<Edge, usize> =
                edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
            let mut hits = 0u64;
            for replica in range {
                let sampler = EdgeSampler::new(seed, replica, P_CRITICAL);
                let open =
                    arms::open_horizontal_crossing(n, &mut |e| sampler.is_open(index[&e]));
                let closed =
                    arms::closed_dual_vertical_crossing(n, &mut |e| sampler.is_open(index[&e]));
                if open == closed {
                    return Err(LabError::Invariant(format!(
                        "duality exclusion violated at n={n}, replica={replica}"
                    )));
                }
                if open {
                    hits += 1;
                }
            }
            Ok(hits)
        })?;
        rows.push(binomial_row(n, cfg.replicas, parts.iter().sum()));
    }

    // exhaustive 2x1 rectangle: exactly half of all configurations cross
    let edges = arms::rectangle_edges(1);
    let index: HashMap<Edge, usize> = edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let mut crossings = 0u64;
    for mask in 0u64..(1 << edges.len()) {
        if arms::open_horizontal_crossing(1, &mut |e| mask >> index[&e] & 1 == 1) {
            crossings += 1;
        }
    }
    let series = Series {
        meta: meta(cfg, "crossing"),
        extra_names: vec!["successes".into()],
        rows,
    };
    Ok(CommandOutput {
        command: "crossing",
        series: vec![("crossing".into(), series)],
        results: serde_json::json!({
            "exhaustive_2x1": {
                "configurations": 1u64 << edges.len(),
                "crossings": crossings,
                "probability": crossings as f64 / (1u64 << edges.len()) as f64,
            }
        }),
    })
}

// ---------------------------------------------------------------------------
// shared moment-series plumbing

fn moment_extra_names(trailing: &[&str]) -> Vec<String> {
    let mut names = vec![
        "variance".to_string(),
        "variance_se".to_string(),
        "s1".to_string(),
        "s2".to_string(),
        "s3".to_string(),
        "s4".to_string(),
    ];
    names.extend(trailing.iter().map(|s| s.to_string()));
    names
}

fn moment_row(n: i32, acc: &MomentAccumulator, trailing: &[f64]) -> Result<SeriesRow, LabError> {
    let (count, sums) = acc.raw_parts();
    let mut extras = vec![
        acc.variance()?,
        acc.variance_jackknife_stderr()?,
        sums[0],
        sums[1],
        sums[2],
        sums[3],
    ];
    extras.extend_from_slice(trailing);
    Ok(SeriesRow {
        n,
        samples: count,
        estimate: acc.moment(1)?,
        stderr: acc.moment_stderr(1)?,
        extras,
    })
}

fn series_points(series: &Series, value: impl Fn(&SeriesRow) -> (f64, f64)) -> Vec<SeriesPoint> {
    series
        .rows
        .iter()
        .map(|r| {
            let (estimate, stderr) = value(r);
            SeriesPoint { n: r.n, estimate, stderr, count: r.samples }
        })
        .collect()
}

fn fit_json(label: &str, est: &ExponentEstimate, verdict: Option<&Verdict>) -> serde_json::Value {
    let mut v = serde_json::json!({
        "series": label,
        "slope": est.slope,
        "slope_stderr": est.slope_stderr,
        "intercept": est.intercept,
        "scales": est.scales,
        "drop_smallest_shift": est.drop_smallest_shift,
    });
    if let Some(t) = est.target {
        v["target"] = serde_json::json!({
            "numerator": t.num, "denominator": t.den, "value": t.value(),
        });
    }
    if let Some(verdict) = verdict {
        v["band"] = serde_json::json!({
            "lo": verdict.lo, "hi": verdict.hi,
            "within": verdict.within_band, "distance_se": verdict.distance_se,
        });
    }
    v
}

fn moment_fits(series: &Series, mean_target: (i64, i64), var_target: (i64, i64)) -> serde_json::Value {
    let mut out = Vec::new();
    if series.rows.len() >= 3 {
        let mean = ScalingSeries::new(
            "mean".into(),
            series_points(series, |r| (r.estimate, r.stderr)),
        );
        let var = ScalingSeries::new(
            "variance".into(),
            series_points(series, |r| (r.extras[0], r.extras[1])),
        );
        for (s, (num, den)) in [(mean, mean_target), (var, var_target)] {
            let label = s.label.clone();
            match fit_exponent(&s) {
                Ok(mut est) => {
                    est.target = Some(RationalExponent::new(num, den));
                    out.push(fit_json(&label, &est, None));
                }
                Err(e) => out.push(serde_json::json!({ "series": label, "error": e.to_string() })),
            }
        }
    }
    serde_json::Value::Array(out)
}

/// Fit a decaying frequency series; the reported exponent is the negated
/// log-log slope, compared against `target` with a band centered on it.
pub fn decay_fit(
    series: &Series,
    target: RationalExponent,
) -> Result<(ExponentEstimate, Verdict), LabError> {
    let pts = series_points(series, |r| (r.estimate, r.stderr));
    for p in &pts {
        if p.estimate <= 0.0 {
            return Err(LabError::Invariant(format!(
                "cannot fit log frequency 0 at n={}", p.n
            )));
        }
    }
    let fitted = fit_exponent(&ScalingSeries::new("decay".into(), pts))?;
    let mut est = fitted.clone();
    est.slope = -fitted.slope;
    est.target = Some(target);
    let t = target.value();
    let verdict = compare_targets(&est, target, t - 0.5 * t.abs(), t + 0.5 * t.abs());
    Ok((est, verdict))
}

// ---------------------------------------------------------------------------
// fit command

#[derive(Clone, Debug)]
pub struct FitArgs {
    pub input: PathBuf,
    pub value_col: String,
    pub stderr_col: String,
    /// Fit `-slope`, for decaying series whose exponent is quoted positive.
    pub negate: bool,
    pub target: Option<RationalExponent>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub output: Option<PathBuf>,
}

pub fn cmd_fit(args: &FitArgs) -> Result<serde_json::Value, LabError> {
    let series = Series::read(&args.input)?;
    let value = series.column(&args.value_col)?;
    let stderr = series.column(&args.stderr_col)?;
    let pts: Vec<SeriesPoint> = series
        .rows
        .iter()
        .map(|r| SeriesPoint {
            n: r.n,
            estimate: value.get(r),
            stderr: stderr.get(r),
            count: r.samples,
        })
        .collect();
    if pts.iter().any(|p| p.estimate <= 0.0) {
        return Err(LabError::Invariant("series has non-positive estimates".into()));
    }
    let mut est = fit_exponent(&ScalingSeries::new(args.value_col.clone(), pts))?;
    if args.negate {
        est.slope = -est.slope;
    }
    est.target = args.target;
    let verdict = args.target.map(|t| {
        let lo = args.lo.unwrap_or(t.value() - 0.5 * t.value().abs());
        let hi = args.hi.unwrap_or(t.value() + 0.5 * t.value().abs());
        compare_targets(&est, t, lo, hi)
    });
    let mut out = fit_json(&args.value_col, &est, verdict.as_ref());
    out["input"] = serde_json::json!(args.input.display().to_string());
    out["negated"] = serde_json::json!(args.negate);
    Ok(out)
}

// ---------------------------------------------------------------------------
// merge command

/// Combine partial series over disjoint replica ranges: counts and power
/// sums add, derived columns are recomputed. Inputs are processed in
/// replica-offset order, so the result does not depend on argument order.
pub fn merge_series(mut inputs: Vec<Series>) -> Result<Series, LabError> {
    if inputs.is_empty() {
        return Err(LabError::Usage("nothing to merge".into()));
    }
    inputs.sort_by_key(|s| s.meta.offset);
    let first = &inputs[0];
    for s in &inputs[1..] {
        if s.meta.hash != first.meta.hash
            || s.meta.command != first.meta.command
            || s.extra_names != first.extra_names
        {
            return Err(LabError::Invariant("config mismatch".into()));
        }
    }
    let kind = MergeKind::for_command(&first.meta.command)?;
    let mut spans: Vec<(u64, u64)> =
        inputs.iter().map(|s| (s.meta.offset, s.meta.replicas)).collect();
    spans.sort_unstable();
    for w in spans.windows(2) {
        if w[0].0 + w[0].1 > w[1].0 {
            return Err(LabError::Invariant("overlapping replica ranges".into()));
        }
    }
    let mut rows: Vec<SeriesRow> = inputs[0].rows.clone();
    for s in &inputs[1..] {
        if s.rows.len() != rows.len() || s.rows.iter().zip(&rows).any(|(a, b)| a.n != b.n) {
            return Err(LabError::Invariant("config mismatch".into()));
        }
        for (into, from) in rows.iter_mut().zip(&s.rows) {
            kind.fold(into, from)?;
        }
    }
    for row in rows.iter_mut() {
        kind.finish(row)?;
    }
    let offset = inputs.iter().map(|s| s.meta.offset).min().unwrap();
    let replicas = inputs.iter().map(|s| s.meta.replicas).sum();
    Ok(Series {
        meta: SeriesMeta { offset, replicas, ..first.meta.clone() },
        extra_names: first.extra_names.clone(),
        rows,
    })
}

enum MergeKind {
    /// extras: variance, variance_se, s1..s4, then additive tails at
    /// `add_from`, then per-run constants that must agree at `fixed_from`.
    Moments { add_from: usize, fixed_from: usize },
    /// extras: successes.
    Binomial,
    /// extras: s1, s2, nonempty.
    MeanCount,
}

impl MergeKind {
    fn for_command(command: &str) -> Result<MergeKind, LabError> {
        match command {
            "incipient" => Ok(MergeKind::Moments { add_from: 6, fixed_from: 7 }),
            "sn" => Ok(MergeKind::Moments { add_from: 6, fixed_from: 7 }),
            "arms_q10" | "arms_q11" | "arms_q22" | "crossing" => Ok(MergeKind::Binomial),
            "pivotal" => Ok(MergeKind::MeanCount),
            other => Err(LabError::Usage(format!("series from {other:?} are exact, not mergeable"))),
        }
    }

    fn fold(&self, into: &mut SeriesRow, from: &SeriesRow) -> Result<(), LabError> {
        into.samples += from.samples;
        match *self {
            MergeKind::Moments { add_from, fixed_from } => {
                for i in 2..6 {
                    into.extras[i] += from.extras[i];
                }
                for i in add_from..fixed_from {
                    into.extras[i] += from.extras[i];
                }
                for i in fixed_from..into.extras.len() {
                    if into.extras[i] != from.extras[i] {
                        return Err(LabError::Invariant("config mismatch".into()));
                    }
                }
            }
            MergeKind::Binomial => into.extras[0] += from.extras[0],
            MergeKind::MeanCount => {
                into.extras[0] += from.extras[0];
                into.extras[1] += from.extras[1];
                into.extras[2] += from.extras[2];
            }
        }
        Ok(())
    }

    fn finish(&self, row: &mut SeriesRow) -> Result<(), LabError> {
        match *self {
            MergeKind::Moments { .. } => {
                let acc = MomentAccumulator::from_raw_parts(
                    row.samples,
                    &row.extras[2..6],
                );
                row.estimate = acc.moment(1)?;
                row.stderr = acc.moment_stderr(1)?;
                row.extras[0] = acc.variance()?;
                row.extras[1] = acc.variance_jackknife_stderr()?;
            }
            MergeKind::Binomial => {
                *row = binomial_row(row.n, row.samples, row.extras[0] as u64);
            }
            MergeKind::MeanCount => {
                let acc = MomentAccumulator::from_raw_parts(row.samples, &row.extras[0..2]);
                row.estimate = acc.moment(1)?;
                row.stderr = acc.moment_stderr(1)?;
            }
        }
        Ok(())
    }
}

pub fn cmd_merge(inputs: &[PathBuf], output: &Path) -> Result<serde_json::Value, LabError> {
    let series: Vec<Series> = inputs.iter().map(|p| Series::read(p)).collect::<Result<_, _>>()?;
    let merged = merge_series(series)?;
    merged.write(output)?;
    Ok(serde_json::json!({
        "inputs": inputs.len(),
        "output": output.display().to_string(),
        "replicas": merged.meta.replicas,
        "rows": merged.rows.len(),
    }))
}

// ---------------------------------------------------------------------------
// dispatch and emission

pub fn run_command(command: &str, cfg: &ExperimentConfig) -> Result<CommandOutput, LabError> {
    match command {
        "oracle" => cmd_oracle(cfg),
        "incipient" => cmd_incipient(cfg),
        "sn" => cmd_sn(cfg),
        "arms" => cmd_arms(cfg),
        "pivotal" => cmd_pivotal(cfg),
        "bubble" => cmd_bubble(cfg),
        "crossing" => cmd_crossing(cfg),
        other => Err(LabError::Usage(format!("unknown command {other:?}"))),
    }
}

/// Run a command and write its artifacts; returns the JSON summary.
pub fn run_and_emit(command: &str, cfg: &ExperimentConfig) -> Result<serde_json::Value, LabError> {
    let started = Instant::now();
    let out = run_command(command, cfg)?;
    let wall = started.elapsed().as_secs_f64();
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| LabError::Io(format!("create {}: {e}", cfg.out_dir.display())))?;
    let mut series_json = Vec::new();
    for (stem, series) in &out.series {
        match cfg.format {
            OutputFormat::Csv => {
                series.write(&cfg.out_dir.join(format!("{stem}.csv")))?;
                series_json.push(serde_json::json!({
                    "stem": stem,
                    "path": format!("{stem}.csv"),
                    "rows": series.rows.len(),
                }));
            }
            OutputFormat::Json => {
                let rows: Vec<serde_json::Value> = series
                    .rows
                    .iter()
                    .map(|r| {
                        serde_json::json!({
                            "n": r.n, "samples": r.samples,
                            "estimate": r.estimate, "stderr": r.stderr,
                            "extras": r.extras,
                        })
                    })
                    .collect();
                series_json.push(serde_json::json!({
                    "stem": stem,
                    "extra_names": series.extra_names,
                    "rows": rows,
                }));
            }
        }
    }
    let summary = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "command": out.command,
        "config": cfg,
        "config_hash": cfg.identity_hash(out.command),
        "targets": crate::io::target_table(),
        "wall_clock_seconds": wall,
        "series": series_json,
        "results": out.results,
    });
    let path = cfg.out_dir.join(format!("{command}_summary.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&summary).unwrap() + "\n")
        .map_err(|e| LabError::Io(format!("write {}: {e}", path.display())))?;
    Ok(summary)
}
