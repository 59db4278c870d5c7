//! Truncated transition kernels, closed-form multi-step probabilities,
//! stationary distributions, and convergence-rate estimation.
//!
//! Kernels are restricted to the box `[0, N]^2` substochastically: mass that
//! would leave the box is dropped and tracked per row as a defect, never
//! redistributed. Every probability computed from a truncated kernel is
//! therefore an honest lower bound, with the defect as the error bar.
//!
//! States are enumerated row-major: `(i, j) -> i * (N + 1) + j`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::fit::linear_fit;
use crate::process::{intensity, poisson_pmf, poisson_pmf_row, Params, State};

/// Per-row Poisson tails are cut once the cumulative mass reaches `1 - TAIL_CUT`.
const TAIL_CUT: f64 = 1e-14;

/// Default cap on the accepted per-row mass defect.
pub const DEFAULT_DEFECT_BUDGET: f64 = 0.5;

/// Default iteration cap for the stationary power iteration.
pub const DEFAULT_MAX_ITERATIONS: usize = 200_000;

/// Row-substochastic transition matrix on the box `[0, N]^2`.
///
/// Each source `(i, j)` reaches only targets `(k, i)`, so a row stores the
/// Poisson pmf over `k = 0..=k_max` plus the dropped tail mass.
#[derive(Debug, Clone)]
pub struct TruncatedKernel {
    n: u64,
    params: Params,
    rows: Vec<KernelRow>,
}

#[derive(Debug, Clone)]
struct KernelRow {
    probs: Vec<f64>,
    defect: f64,
}

impl TruncatedKernel {
    /// Builds the kernel for the box `[0, N]^2` with exact pmf entries.
    pub fn build(p: &Params, n: u64) -> Self {
        assert!(n >= 1, "box bound must be at least 1");
        let side = (n + 1) as usize;
        let rows: Vec<KernelRow> = (0..side * side)
            .into_par_iter()
            .map(|idx| {
                let i = (idx / side) as u64;
                let j = (idx % side) as u64;
                let mut probs = Vec::new();
                let mass = poisson_pmf_row(intensity(p, State::new(i, j)), n, TAIL_CUT, &mut probs);
                KernelRow {
                    probs,
                    defect: (1.0 - mass).max(0.0),
                }
            })
            .collect();
        Self {
            n,
            params: *p,
            rows,
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    fn side(&self) -> usize {
        (self.n + 1) as usize
    }

    /// Row-major index of an in-box state.
    pub fn state_index(&self, s: State) -> usize {
        debug_assert!(s.i <= self.n && s.j <= self.n);
        s.i as usize * self.side() + s.j as usize
    }

    /// Stored entry `P(from, to)`; zero off the shift structure or past the
    /// row's tail cut.
    pub fn entry(&self, from: State, to: State) -> f64 {
        if to.j != from.i {
            return 0.0;
        }
        let row = &self.rows[self.state_index(from)];
        row.probs.get(to.i as usize).copied().unwrap_or(0.0)
    }

    pub fn row_defect(&self, from: State) -> f64 {
        self.rows[self.state_index(from)].defect
    }

    pub fn max_row_defect(&self) -> f64 {
        self.rows.iter().map(|r| r.defect).fold(0.0, f64::max)
    }

    /// One application of the kernel to a distribution: `d -> d P`.
    /// Substochastic, so the output mass may shrink.
    pub fn apply(&self, d: &Distribution) -> Distribution {
        assert_eq!(d.n, self.n, "distribution box does not match the kernel");
        let side = self.side();
        let mut out = vec![0.0; side * side];
        for (idx, &w) in d.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let i = idx / side;
            let row = &self.rows[idx];
            // targets are (k, i) for k in the stored support
            for (k, &prob) in row.probs.iter().enumerate() {
                out[k * side + i] += w * prob;
            }
        }
        Distribution {
            n: self.n,
            weights: out,
        }
    }
}

/// A nonnegative weight vector over the box `[0, N]^2` with mass in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    n: u64,
    weights: Vec<f64>,
}

impl Distribution {
    pub fn point_mass(n: u64, s: State) -> Self {
        assert!(s.i <= n && s.j <= n, "state outside the box");
        let side = (n + 1) as usize;
        let mut weights = vec![0.0; side * side];
        weights[s.i as usize * side + s.j as usize] = 1.0;
        Self { n, weights }
    }

    /// Empirical distribution of a sequence of states; entries outside the
    /// box are dropped (they show up as missing mass).
    pub fn from_states<I: IntoIterator<Item = State>>(n: u64, states: I) -> Self {
        let side = (n + 1) as usize;
        let mut counts = vec![0u64; side * side];
        let mut total = 0u64;
        for s in states {
            total += 1;
            if s.i <= n && s.j <= n {
                counts[s.i as usize * side + s.j as usize] += 1;
            }
        }
        assert!(total > 0, "empty state sequence");
        let weights = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Self { n, weights }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn weight(&self, s: State) -> f64 {
        let side = (self.n + 1) as usize;
        self.weights[s.i as usize * side + s.j as usize]
    }

    /// Rescales to total mass one.
    pub fn normalized(&self) -> Self {
        let mass = self.mass();
        assert!(mass > 0.0, "cannot normalize a zero-mass distribution");
        Self {
            n: self.n,
            weights: self.weights.iter().map(|w| w / mass).collect(),
        }
    }

    /// Iterates `(state, weight)` pairs in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (State, f64)> + '_ {
        let side = (self.n + 1) as usize;
        self.weights
            .iter()
            .enumerate()
            .map(move |(idx, &w)| (State::new((idx / side) as u64, (idx % side) as u64), w))
    }
}

/// Total variation distance after normalizing both sides to mass one.
/// Clamped to `[0, 1]` against accumulated rounding.
pub fn tv_distance(d1: &Distribution, d2: &Distribution) -> f64 {
    assert_eq!(d1.n, d2.n, "distributions live on different boxes");
    let a = d1.normalized();
    let b = d2.normalized();
    let total: f64 = a
        .weights
        .iter()
        .zip(&b.weights)
        .map(|(x, y)| (x - y).abs())
        .sum();
    (0.5 * total).min(1.0)
}

/// Exact two-step transition probability
/// `P^2((i,j),(k,l)) = exp(-(s_ij + s_li)) * s_ij^l * s_li^k / (l! k!)`,
/// i.e. the pmf product along the forced intermediate `(l, i)`.
pub fn p2_closed_form(p: &Params, from: State, to: State) -> f64 {
    let s1 = intensity(p, from);
    let s2 = intensity(p, State::new(to.j, from.i));
    poisson_pmf(s1, to.j) * poisson_pmf(s2, to.i)
}

/// Lower bound on the `n`-step probability (`n >= 3`) by summing the path
/// probabilities over all intermediate counts `<= cap`.
///
/// Monotone nondecreasing in `cap` and equal to `P^n` in the limit. A path
/// from `(i,j)` to `(k,l)` is the count sequence `j, i, m_1, ..., m_{n-2}, l, k`;
/// its probability is the product of one-step pmfs along it.
pub fn pn_closed_form(p: &Params, from: State, to: State, n: usize, cap: u64) -> f64 {
    assert!(n >= 3, "use transition_prob or p2_closed_form for n < 3");
    let walker = PathSum {
        params: *p,
        to,
        steps: n,
        cap,
        ln_factorial: {
            let side = (cap.max(from.i).max(from.j).max(to.i).max(to.j) + 1) as usize;
            let mut table = vec![0.0; side];
            for k in 1..side {
                table[k] = table[k - 1] + (k as f64).ln();
            }
            table
        },
    };
    walker.descend(1, from.j, from.i, 1.0)
}

/// Depth-first sum over intermediate counts with zero-product pruning.
struct PathSum {
    params: Params,
    to: State,
    steps: usize,
    cap: u64,
    ln_factorial: Vec<f64>,
}

impl PathSum {
    fn pmf(&self, mean: f64, k: u64) -> f64 {
        if mean == 0.0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        (k as f64 * mean.ln() - mean - self.ln_factorial[k as usize]).exp()
    }

    /// At depth `t` the path has counts `..., prev2, prev`; `acc` is the
    /// probability of the prefix.
    fn descend(&self, t: usize, prev2: u64, prev: u64, acc: f64) -> f64 {
        let mean = intensity(&self.params, State::new(prev, prev2));
        if t == self.steps - 1 {
            // the two final counts are pinned to the target state
            let through = acc * self.pmf(mean, self.to.j);
            if through == 0.0 {
                return 0.0;
            }
            let last_mean = intensity(&self.params, State::new(self.to.j, prev));
            return through * self.pmf(last_mean, self.to.i);
        }
        let mut sum = 0.0;
        for m in 0..=self.cap {
            let factor = self.pmf(mean, m);
            if factor == 0.0 {
                continue;
            }
            sum += self.descend(t + 1, prev, m, acc * factor);
        }
        sum
    }
}

/// A stationary distribution computed by power iteration, with its
/// self-consistency residual and the kernel's truncation defect.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationaryResult {
    pub distribution: Distribution,
    /// `tv(pi, pi P)` at the returned fixed point.
    pub residual: f64,
    pub iterations: usize,
    pub max_row_defect: f64,
    /// Probability mass lost per application of the kernel at the fixed point.
    pub mass_loss_per_step: f64,
}

/// Power iteration for the invariant distribution, from the point mass at the
/// origin, renormalizing each step, until successive iterates differ by less
/// than `tol` in total variation.
///
/// Fails with `DefectTooLarge` when the kernel's worst row defect exceeds
/// `defect_budget` (typical for transient parameters, where mass drains off
/// any finite box).
pub fn stationary(
    kernel: &TruncatedKernel,
    tol: f64,
    defect_budget: f64,
    max_iterations: usize,
) -> Result<StationaryResult, Error> {
    let max_defect = kernel.max_row_defect();
    if max_defect > defect_budget {
        return Err(Error::DefectTooLarge {
            max_defect,
            budget: defect_budget,
        });
    }
    let mut current = Distribution::point_mass(kernel.n(), State::ORIGIN);
    let mut delta = f64::INFINITY;
    for iteration in 1..=max_iterations {
        let next = kernel.apply(&current).normalized();
        delta = tv_distance(&next, &current);
        current = next;
        if delta < tol {
            let advanced = kernel.apply(&current);
            let residual = tv_distance(&current, &advanced);
            return Ok(StationaryResult {
                residual,
                iterations: iteration,
                max_row_defect: max_defect,
                mass_loss_per_step: 1.0 - advanced.mass(),
                distribution: current,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iterations,
        delta,
    })
}

/// The total-variation decay of `Law(X_n)` towards `pi` and its fitted
/// geometric rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    /// Fitted decay base: `d_n ~ beta_hat^(-n)`.
    pub beta_hat: f64,
    pub r_squared: f64,
    /// `(n, tv(Law(X_n), pi))` for every horizon step.
    pub tv_sequence: Vec<(usize, f64)>,
    /// Half-open index range of the points entering the fit.
    pub fit_window: (usize, usize),
}

/// Window bounds for the log-linear fit: distances must have left the
/// initial plateau but not yet hit numerical noise.
const FIT_UPPER: f64 = 0.5;
const FIT_LOWER: f64 = 1e-12;

/// Computes `d_n = tv(Law(X_n), pi)` for `n <= horizon` by repeated kernel
/// application and fits `log d_n` on the window `1e-12 < d_n < 0.5`.
pub fn geometric_rate(
    kernel: &TruncatedKernel,
    init: State,
    horizon: usize,
    pi: &StationaryResult,
) -> Result<RateReport, Error> {
    let mut law = Distribution::point_mass(kernel.n(), init);
    let mut tv_sequence = Vec::with_capacity(horizon + 1);
    tv_sequence.push((0, tv_distance(&law, &pi.distribution)));
    for n in 1..=horizon {
        law = kernel.apply(&law);
        tv_sequence.push((n, tv_distance(&law, &pi.distribution)));
    }

    let in_window: Vec<(usize, f64)> = tv_sequence
        .iter()
        .copied()
        .filter(|&(_, d)| d > FIT_LOWER && d < FIT_UPPER)
        .collect();
    if in_window.len() < 2 {
        return Err(Error::WindowEmpty);
    }
    let xs: Vec<f64> = in_window.iter().map(|&(n, _)| n as f64).collect();
    let ys: Vec<f64> = in_window.iter().map(|&(_, d)| d.ln()).collect();
    let (slope, _, r_squared) = linear_fit(&xs, &ys);
    Ok(RateReport {
        beta_hat: (-slope).exp(),
        r_squared,
        fit_window: (
            in_window.first().map(|&(n, _)| n).unwrap_or(0),
            in_window.last().map(|&(n, _)| n + 1).unwrap_or(0),
        ),
        tv_sequence,
    })
}
