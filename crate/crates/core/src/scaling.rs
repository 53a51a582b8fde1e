//! Log-log regression of Monte Carlo series against scale, with exponent
//! targets kept as exact rationals.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::PercError;

/// One estimate at one scale.
#[derive(Clone, Copy, Debug)]
pub struct SeriesPoint {
    pub n: i32,
    pub estimate: f64,
    pub stderr: f64,
    pub count: u64,
}

/// A labeled series of estimates over strictly increasing scales.
#[derive(Clone, Debug)]
pub struct ScalingSeries {
    pub label: String,
    pub points: Vec<SeriesPoint>,
}

impl ScalingSeries {
    pub fn new(label: String, points: Vec<SeriesPoint>) -> Self {
        assert!(
            points.windows(2).all(|w| w[0].n < w[1].n),
            "scales must be strictly increasing"
        );
        ScalingSeries { label, points }
    }
}

/// An exponent stored as an exact fraction alongside its decimal value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RationalExponent {
    pub num: i64,
    pub den: i64,
}

impl RationalExponent {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0);
        RationalExponent { num, den }
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// A fitted exponent with uncertainty and a finite-size sensitivity note.
#[derive(Clone, Debug)]
pub struct ExponentEstimate {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub target: Option<RationalExponent>,
    pub scales: Vec<i32>,
    /// Slope shift when the smallest scale is dropped from the fit; a
    /// recorded diagnostic, never asserted against.
    pub drop_smallest_shift: f64,
}

/// Band verdict for a fitted exponent against its target.
#[derive(Clone, Copy, Debug)]
pub struct Verdict {
    pub slope: f64,
    pub target: f64,
    pub lo: f64,
    pub hi: f64,
    pub within_band: bool,
    /// |slope - target| in units of the slope standard error (infinite when
    /// the fit is exact).
    pub distance_se: f64,
}

fn wls_line(xs: &[f64], ys: &[f64], ws: &[f64]) -> (f64, f64, f64) {
    let sw: f64 = ws.iter().sum();
    let xbar = xs.iter().zip(ws).map(|(x, w)| x * w).sum::<f64>() / sw;
    let ybar = ys.iter().zip(ws).map(|(y, w)| y * w).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((x, y), w) in xs.iter().zip(ys).zip(ws) {
        sxx += w * (x - xbar) * (x - xbar);
        sxy += w * (x - xbar) * (y - ybar);
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    (slope, intercept, sxx)
}

fn fit_points(pts: &[(f64, f64, f64)]) -> (f64, f64, f64) {
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let weighted = pts.iter().all(|p| p.2 > 0.0 && p.2.is_finite());
    if weighted {
        let ws: Vec<f64> = pts.iter().map(|p| 1.0 / (p.2 * p.2)).collect();
        let (slope, intercept, sxx) = wls_line(&xs, &ys, &ws);
        (slope, intercept, libm::sqrt(1.0 / sxx))
    } else {
        // unweighted fit; slope error from residual scatter (zero for an
        // exact power law)
        let ws: Vec<f64> = pts.iter().map(|_| 1.0).collect();
        let (slope, intercept, sxx) = wls_line(&xs, &ys, &ws);
        let dof = (pts.len() as f64 - 2.0).max(1.0);
        let ss_res: f64 = pts
            .iter()
            .map(|p| {
                let r = p.1 - (intercept + slope * p.0);
                r * r
            })
            .sum();
        (slope, intercept, libm::sqrt(ss_res / dof / sxx))
    }
}

/// Weighted least squares of `log(estimate)` on `log(n)`. Weights come from
/// delta-method errors `stderr/estimate`; series with exact points (zero
/// stderr) fall back to an unweighted fit with residual-based errors.
pub fn fit_exponent(series: &ScalingSeries) -> Result<ExponentEstimate, PercError> {
    if series.points.len() < 3 {
        return Err(PercError::TooFewScales { got: series.points.len() });
    }
    for (i, p) in series.points.iter().enumerate() {
        if !(p.estimate > 0.0) {
            return Err(PercError::NonpositiveEstimate { index: i });
        }
    }
    let logged: Vec<(f64, f64, f64)> = series
        .points
        .iter()
        .map(|p| {
            (
                libm::log(p.n as f64),
                libm::log(p.estimate),
                p.stderr / p.estimate,
            )
        })
        .collect();
    let (slope, intercept, slope_stderr) = fit_points(&logged);
    let drop_smallest_shift = if logged.len() > 3 {
        let (s2, _, _) = fit_points(&logged[1..]);
        s2 - slope
    } else {
        0.0
    };
    Ok(ExponentEstimate {
        slope,
        intercept,
        slope_stderr,
        target: None,
        scales: series.points.iter().map(|p| p.n).collect(),
        drop_smallest_shift,
    })
}

/// Compare a fitted slope to its target within a configured band; desk-scale
/// consistency only, never an asymptotic claim.
pub fn compare_targets(est: &ExponentEstimate, target: RationalExponent, lo: f64, hi: f64) -> Verdict {
    let t = target.value();
    let distance_se = if est.slope_stderr > 0.0 {
        libm::fabs(est.slope - t) / est.slope_stderr
    } else if est.slope == t {
        0.0
    } else {
        f64::INFINITY
    };
    Verdict {
        slope: est.slope,
        target: t,
        lo,
        hi,
        within_band: est.slope >= lo && est.slope <= hi,
        distance_se,
    }
}
