//! Transience diagnostics: escape statistics, exponential growth rates,
//! ratio pinning (T2), the two-step axis cycle (T1), and the constants
//! entering the transience argument.
//!
//! In the T2 regime trajectories grow like `theta^n`, with `theta` the
//! dominant root of `x^2 - a x - b`. The constants are a growth threshold
//! `r` strictly between 1 and `theta` and, for negative `b`, a ratio
//! tolerance `eps`; both are picked deterministically and re-checked by
//! substitution. In the T1 regime the chain rides the axes: a large count
//! next to a zero forces another zero two steps apart, and the axis value
//! multiplies by roughly `b` per cycle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::dominant_eigenvalue;
use crate::error::Error;
use crate::fit::linear_fit;
use crate::process::{Params, State};
use crate::sim::{simulate_stream, Trajectory, TrajectoryStatus};

pub const DEFAULT_ESCAPE_LEVEL: u64 = 1_000_000;
pub const DEFAULT_HORIZON: usize = 500;
pub const DEFAULT_RATIO_THRESHOLD: u64 = 10_000;
pub const DEFAULT_RATIO_EPS: f64 = 0.05;

/// Growth threshold strictly between 1 and `theta` with `r^2 - a r - b < 0`.
///
/// The polynomial is negative only between its roots, and for `a >= 2` the
/// smaller root can itself exceed 1, so `r` is the midpoint of
/// `(max(1, theta_minus), theta)` rather than of `(1, theta)`.
pub fn choose_r(p: &Params) -> Result<f64, Error> {
    let theta = dominant_eigenvalue(p)
        .filter(|&t| t > 1.0)
        .ok_or(Error::NotTransientT2)?;
    let theta_minus = (p.a - (p.a * p.a + 4.0 * p.b).sqrt()) / 2.0;
    let r = (theta_minus.max(1.0) + theta) / 2.0;
    assert!(r * r - p.a * r - p.b < 0.0);
    assert!(1.0 < r && r < theta);
    Ok(r)
}

/// Ratio tolerance for the T2 sub-case with `b < 0`: halves from
/// `(theta - 1) / 2` until both
/// `r^2 - a (r - eps) - b < 0` and `theta^2 - theta eps + b > 0` hold.
/// Both inequalities are strict at `eps = 0`, so the schedule terminates.
pub fn choose_eps_t2b(p: &Params, r: f64) -> f64 {
    debug_assert!(p.b < 0.0);
    let theta = dominant_eigenvalue(p).expect("caller obtained r from choose_r");
    let mut eps = (theta - 1.0) / 2.0;
    loop {
        let growth_ok = r * r - p.a * (r - eps) - p.b < 0.0;
        let ratio_ok = theta * theta - theta * eps + p.b > 0.0;
        if growth_ok && ratio_ok {
            assert!(eps < theta);
            return eps;
        }
        eps /= 2.0;
    }
}

/// Least-squares slope of `log(x_n + 1)` over the final half of the recorded
/// counts — an estimate of `log theta` for escaped T2 trajectories.
///
/// Returns `None` for short trajectories (< 20 counts) or when the fitted
/// tail contains a zero (no growth to speak of).
pub fn growth_rate(t: &Trajectory) -> Option<f64> {
    if t.counts.len() < 20 {
        return None;
    }
    let start = t.counts.len() / 2;
    let tail = &t.counts[start..];
    if tail.contains(&0) {
        return None;
    }
    let xs: Vec<f64> = (start..t.counts.len()).map(|n| n as f64).collect();
    let ys: Vec<f64> = tail.iter().map(|&x| ((x + 1) as f64).ln()).collect();
    let (slope, _, _) = linear_fit(&xs, &ys);
    Some(slope)
}

/// Fraction of large-count steps whose one-step ratio is pinned to `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioFraction {
    /// Fraction of qualifying indices with `|x_{n+1}/x_n - theta| <= eps`;
    /// reported as 1 when no index qualifies.
    pub fraction: f64,
    /// Number of qualifying indices; 0 flags a vacuous fraction.
    pub count: usize,
}

/// Among indices with `x_n >= threshold`, the fraction whose successor ratio
/// lies within `eps` of `theta`.
pub fn ratio_theta_fraction(t: &Trajectory, theta: f64, eps: f64, threshold: u64) -> RatioFraction {
    debug_assert!(theta > 1.0);
    let mut count = 0usize;
    let mut pinned = 0usize;
    for n in 0..t.counts.len().saturating_sub(1) {
        if t.counts[n] >= threshold {
            count += 1;
            let ratio = t.counts[n + 1] as f64 / t.counts[n] as f64;
            if (ratio - theta).abs() <= eps {
                pinned += 1;
            }
        }
    }
    RatioFraction {
        fraction: if count == 0 {
            1.0
        } else {
            pinned as f64 / count as f64
        },
        count,
    }
}

/// Observable consequences of the T1 axis cycle in one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisCycleReport {
    /// Smallest count that clamps the intensity from an axis state.
    pub threshold: u64,
    /// Number of indices with `x_{n-1} = 0` and `x_n >= threshold`.
    pub qualifying: usize,
    /// Whether every qualifying index was followed by a zero.
    pub deterministic_zero_ok: bool,
    /// Ratios `x_{n+2} / x_n` at qualifying indices; their long-run average
    /// estimates `b`.
    pub two_step_factors: Vec<f64>,
}

/// Scans a T1 trajectory for the two-step axis cycle: a count of at least
/// `ceil(lambda / -a)` sitting next to a zero forces the next count to zero,
/// and the count after that is Poisson with mean about `b` times the current
/// one.
pub fn axis_cycle_check(p: &Params, t: &Trajectory) -> Result<AxisCycleReport, Error> {
    if !(p.a < 0.0 && p.b > 1.0) {
        return Err(Error::RegionMismatch {
            a: p.a,
            b: p.b,
            region: "T1".to_string(),
        });
    }
    let threshold = (p.lambda / -p.a).ceil() as u64;
    let mut qualifying = 0usize;
    let mut deterministic_zero_ok = true;
    let mut two_step_factors = Vec::new();
    for n in 1..t.counts.len() {
        if t.counts[n - 1] != 0 || t.counts[n] < threshold {
            continue;
        }
        if n + 1 < t.counts.len() {
            qualifying += 1;
            if t.counts[n + 1] != 0 {
                deterministic_zero_ok = false;
            }
            if n + 2 < t.counts.len() {
                two_step_factors.push(t.counts[n + 2] as f64 / t.counts[n] as f64);
            }
        }
    }
    Ok(AxisCycleReport {
        threshold,
        qualifying,
        deterministic_zero_ok,
        two_step_factors,
    })
}

/// First index `n` with `x_n + x_{n+1} >= level`.
pub fn escape_step(t: &Trajectory, level: u64) -> Option<usize> {
    (0..t.counts.len().saturating_sub(1))
        .find(|&n| t.counts[n].saturating_add(t.counts[n + 1]) >= level)
}

/// Escape frequency of a seeded ensemble started at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeStats {
    pub runs: usize,
    pub escaped: usize,
    pub escape_fraction: f64,
    pub mean_escape_step: Option<f64>,
}

/// Simulates `runs` trajectories of `horizon` steps from the origin and
/// counts those whose consecutive-count sum reaches `escape_level`.
pub fn escape_statistics(
    p: &Params,
    runs: usize,
    horizon: usize,
    escape_level: u64,
    master_seed: u64,
) -> Result<EscapeStats, Error> {
    if runs == 0 {
        return Err(Error::InvalidArgument(
            "runs must be at least 1".to_string(),
        ));
    }
    let steps: Vec<Option<usize>> = (0..runs as u64)
        .into_par_iter()
        .map(|index| {
            let t = simulate_stream(p, State::ORIGIN, horizon, master_seed, index);
            escape_step(&t, escape_level)
        })
        .collect();
    let escaped: Vec<usize> = steps.iter().flatten().copied().collect();
    Ok(EscapeStats {
        runs,
        escaped: escaped.len(),
        escape_fraction: escaped.len() as f64 / runs as f64,
        mean_escape_step: if escaped.is_empty() {
            None
        } else {
            Some(escaped.iter().sum::<usize>() as f64 / escaped.len() as f64)
        },
    })
}

/// Per-trajectory summary in a transience ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransienceRun {
    /// Stream index under the ensemble's master seed.
    pub index: u64,
    pub status: TrajectoryStatus,
    pub escaped: bool,
    pub escape_step: Option<usize>,
    pub growth_rate: Option<f64>,
    /// Present when the parameters have `theta > 1`.
    pub ratio: Option<RatioFraction>,
}

/// Ensemble-level transience report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransienceReport {
    pub params: Params,
    pub seed: u64,
    pub horizon: usize,
    pub escape_level: u64,
    pub theta: Option<f64>,
    pub stats: EscapeStats,
    pub runs: Vec<TransienceRun>,
}

/// Runs a seeded ensemble from the origin and gathers per-run escape,
/// growth, and ratio summaries. Parallel over trajectories; the output is
/// identical to sequential execution.
pub fn transience_ensemble(
    p: &Params,
    runs: usize,
    horizon: usize,
    escape_level: u64,
    master_seed: u64,
    ratio_threshold: u64,
    ratio_eps: f64,
) -> Result<TransienceReport, Error> {
    if runs == 0 {
        return Err(Error::InvalidArgument(
            "runs must be at least 1".to_string(),
        ));
    }
    let theta = dominant_eigenvalue(p).filter(|&t| t > 1.0);
    let run_reports: Vec<TransienceRun> = (0..runs as u64)
        .into_par_iter()
        .map(|index| {
            let t = simulate_stream(p, State::ORIGIN, horizon, master_seed, index);
            let escape_step = escape_step(&t, escape_level);
            TransienceRun {
                index,
                status: t.status,
                escaped: escape_step.is_some(),
                escape_step,
                growth_rate: growth_rate(&t),
                ratio: theta.map(|th| ratio_theta_fraction(&t, th, ratio_eps, ratio_threshold)),
            }
        })
        .collect();
    let escaped: Vec<usize> = run_reports.iter().filter_map(|r| r.escape_step).collect();
    Ok(TransienceReport {
        params: *p,
        seed: master_seed,
        horizon,
        escape_level,
        theta,
        stats: EscapeStats {
            runs,
            escaped: escaped.len(),
            escape_fraction: escaped.len() as f64 / runs as f64,
            mean_escape_step: if escaped.is_empty() {
                None
            } else {
                Some(escaped.iter().sum::<usize>() as f64 / escaped.len() as f64)
            },
        },
        runs: run_reports,
    })
}
