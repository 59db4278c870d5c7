//! Drift functions and verified drift certificates for the recurrent regime.
//!
//! A certificate pins down `(V, epsilon, K, A, C)` such that
//!
//! ```text
//! E[V(X_1) | X_0 = x] - V(x) <= -epsilon * V(x) + K * 1_{A u C}(x)
//! ```
//!
//! holds at every state of a verification box, where `A` is the set of states
//! with zero intensity and `C` is the finite set of states violating the bare
//! inequality. Three drift functions cover the recurrent sub-regions:
//!
//! * R1 — linear `V(i,j) = alpha*i + beta*j + 1`,
//! * R2 — angular `V(i,j) = i/(j+1) + 1`, which decreases as trajectories
//!   swing counterclockwise towards the j-axis,
//! * R3 — quadratic `V(i,j) = 1 + (i^2 - a*i*j + (b^2+1)/2 * j^2) 1_{A^c}`.
//!
//! Expected values under the kernel are closed-form in the Poisson moments;
//! a truncated-series mode exists so tests can cross-check every closed form.
//! Finiteness of `C` is certified by the analytic negative-definiteness of
//! the leading form (checked at parameter-selection time) together with a
//! strictly negative drift margin on the outer shell of the box.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{classify, Phase, Sublabel, BOUNDARY_TOL};
use crate::error::Error;
use crate::process::{intensity, poisson_pmf, Params, State};

/// Verification boxes double from here on `BoxTooSmall`.
pub const INITIAL_BOX: u64 = 64;
/// Hard cap on the verification box.
pub const MAX_BOX: u64 = 4096;

/// States whose intensity is clamped to zero; from here the chain moves
/// deterministically to `(0, i)`.
pub fn in_a(p: &Params, s: State) -> bool {
    p.a * s.i as f64 + p.b * s.j as f64 + p.lambda <= 0.0
}

/// The three drift-function shapes. The quadratic stores the model
/// coefficients because `V` itself depends on them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftFunction {
    Linear { alpha: f64, beta: f64 },
    Angular,
    Quadratic { a: f64, b: f64 },
}

/// `V(s) >= 1`.
pub fn evaluate_v(f: &DriftFunction, p: &Params, s: State) -> f64 {
    let (i, j) = (s.i as f64, s.j as f64);
    match *f {
        DriftFunction::Linear { alpha, beta } => alpha * i + beta * j + 1.0,
        DriftFunction::Angular => i / (j + 1.0) + 1.0,
        DriftFunction::Quadratic { a, b } => {
            if in_a(p, s) {
                1.0
            } else {
                1.0 + i * i - a * i * j + (b * b + 1.0) / 2.0 * j * j
            }
        }
    }
}

/// `E[V(X_1) | X_0 = s]` from the Poisson moments `E[k] = s_ij` and
/// `E[k^2] = s_ij (s_ij + 1)`.
///
/// Linear and angular values are exact. The quadratic value is exact on `A`
/// (the move is deterministic) and otherwise the certified upper bound that
/// drops the indicator inside the expectation.
pub fn expected_v_after(f: &DriftFunction, p: &Params, s: State) -> f64 {
    let i = s.i as f64;
    let mean = intensity(p, s);
    match *f {
        DriftFunction::Linear { alpha, beta } => alpha * mean + beta * i + 1.0,
        DriftFunction::Angular => mean / (i + 1.0) + 1.0,
        DriftFunction::Quadratic { a, b } => {
            if in_a(p, s) {
                evaluate_v(f, p, State::new(0, s.i))
            } else {
                1.0 + mean * (mean + 1.0) - a * i * mean + (b * b + 1.0) / 2.0 * i * i
            }
        }
    }
}

/// `E[V(X_1)]` by direct summation of `pmf(k) V(k, i)` with the Poisson tail
/// cut far beyond the mean. Slow; kept as the independent oracle for the
/// closed forms above.
pub fn expected_v_after_series(f: &DriftFunction, p: &Params, s: State) -> f64 {
    let mean = intensity(p, s);
    if mean == 0.0 {
        return evaluate_v(f, p, State::new(0, s.i));
    }
    let k_max = (mean + 20.0 * mean.sqrt() + 60.0).ceil() as u64;
    (0..=k_max)
        .map(|k| poisson_pmf(mean, k) * evaluate_v(f, p, State::new(k, s.i)))
        .sum()
}

/// One-step drift `E[V(X_1)] - V(s)`; an upper bound in the quadratic case.
pub fn drift(f: &DriftFunction, p: &Params, s: State) -> f64 {
    expected_v_after(f, p, s) - evaluate_v(f, p, s)
}

/// `drift + epsilon * V`, the quantity that must be nonpositive off `A u C`.
pub fn drift_margin(f: &DriftFunction, p: &Params, epsilon: f64, s: State) -> f64 {
    drift(f, p, s) + epsilon * evaluate_v(f, p, s)
}

/// Picks a drift function and a contraction rate for a parameter point lying
/// in the given recurrent sub-region.
///
/// Selection is deterministic: `epsilon` follows a halving schedule from 1/2
/// until the sub-region's defining inequalities admit a solution, and `beta`
/// (R1) sits at the midpoint of its admissible interval. The returned pair is
/// re-checked by substitution before being handed out.
pub fn choose_parameters(p: &Params, label: Sublabel) -> Result<(DriftFunction, f64), Error> {
    let region_label = classify(p, BOUNDARY_TOL);
    if !region_label.has(label) {
        return Err(Error::RegionMismatch {
            a: p.a,
            b: p.b,
            region: label.to_string(),
        });
    }
    let (a, b) = (p.a, p.b);
    match label {
        Sublabel::R1 => {
            let mut epsilon = 0.5;
            for _ in 0..200 {
                let lower = if b > 0.0 { b / (1.0 - epsilon) } else { 0.0 };
                let upper = (1.0 - a - epsilon).min(1.0 - epsilon);
                if lower < upper {
                    let beta = 0.5 * (lower + upper);
                    assert!(beta > 0.0 && beta < 1.0 - epsilon);
                    assert!(beta < 1.0 - a - epsilon);
                    assert!(b <= 0.0 || beta > b / (1.0 - epsilon));
                    return Ok((DriftFunction::Linear { alpha: 1.0, beta }, epsilon));
                }
                epsilon /= 2.0;
            }
            unreachable!("the beta interval is nonempty for small epsilon when a+b < 1");
        }
        Sublabel::R2 => {
            // midpoint of the admissible interval (0, (a^2/4 + b) / b)
            let epsilon = (a * a / 4.0 + b) / (2.0 * b);
            assert!(epsilon > 0.0 && epsilon < 1.0);
            assert!(a * a / 4.0 + b < b * epsilon && b * epsilon < 0.0);
            assert!(a * a + 4.0 * b * (1.0 - epsilon) < 0.0);
            Ok((DriftFunction::Angular, epsilon))
        }
        Sublabel::R3 => {
            let mut epsilon = 0.5;
            for _ in 0..200 {
                if r3_conditions(a, b, epsilon) {
                    return Ok((DriftFunction::Quadratic { a, b }, epsilon));
                }
                epsilon /= 2.0;
            }
            unreachable!("the R3 conditions hold for small epsilon when b < 1 - a");
        }
        other => Err(Error::RegionMismatch {
            a,
            b,
            region: format!("{other} is not a recurrent sub-region"),
        }),
    }
}

/// The two negative-definiteness conditions on the quadratic drift form.
fn r3_conditions(a: f64, b: f64, epsilon: f64) -> bool {
    let lead_i = (b * b - 1.0) / 2.0 + epsilon;
    let lead_j = (b * b * (1.0 + epsilon) + epsilon - 1.0) / 2.0;
    let cross = a * (b + 1.0 - epsilon);
    lead_i < 0.0 && lead_i * lead_j - cross * cross / 4.0 > 0.0
}

/// The violating states inside a box, plus the drift margin on its outer shell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExceptionalSet {
    /// States outside `A` with positive drift margin, in row-major order.
    pub c: Vec<State>,
    /// Max of `drift + epsilon V` over the shell `max(i,j) in {B-1, B}`
    /// excluding `A`; `-inf` when the whole shell lies in `A`.
    pub boundary_margin: f64,
}

/// Scans the box `[0, B]^2` for states violating the drift inequality.
///
/// Fails with `BoxTooSmall` if the violating set reaches the outer shell, in
/// which case nothing bounded can be concluded and the caller should enlarge
/// the box.
pub fn exceptional_set(
    f: &DriftFunction,
    p: &Params,
    epsilon: f64,
    box_size: u64,
) -> Result<ExceptionalSet, Error> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0,1), got {epsilon}"
        )));
    }
    let shell_start = box_size.saturating_sub(1);
    let per_row: Vec<(Vec<State>, f64)> = (0..=box_size)
        .into_par_iter()
        .map(|i| {
            let mut c_row = Vec::new();
            let mut shell_max = f64::NEG_INFINITY;
            for j in 0..=box_size {
                let s = State::new(i, j);
                if in_a(p, s) {
                    continue;
                }
                let margin = drift_margin(f, p, epsilon, s);
                if margin > 0.0 {
                    c_row.push(s);
                }
                if i >= shell_start || j >= shell_start {
                    shell_max = shell_max.max(margin);
                }
            }
            (c_row, shell_max)
        })
        .collect();

    let mut c = Vec::new();
    let mut boundary_margin = f64::NEG_INFINITY;
    for (c_row, shell_max) in per_row {
        c.extend(c_row);
        boundary_margin = boundary_margin.max(shell_max);
    }
    if c.iter().any(|s| s.i >= shell_start || s.j >= shell_start) {
        return Err(Error::BoxTooSmall { box_size });
    }
    Ok(ExceptionalSet { c, boundary_margin })
}

/// A verified drift certificate on a finite box.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftReport {
    pub sublabel: Sublabel,
    pub function: DriftFunction,
    pub epsilon: f64,
    /// Drift bound on `A u C`: `K = max(1, sup over A u C of E[V(X_1)])`
    /// (margin-based over `A` for the linear fallback case).
    pub k: f64,
    pub c: Vec<State>,
    /// The box is `[0, box_size]^2`.
    pub box_size: u64,
    pub boundary_margin: f64,
    /// Set when `K` over the infinite part of `A` could only be certified on
    /// the box (linear function with nonempty `A`).
    pub k_box_only: bool,
}

impl DriftReport {
    /// Exhaustively re-checks `drift(x) <= -epsilon V(x) + K 1_{A u C}(x)` on
    /// the whole box, plus the structural side conditions.
    pub fn verify(&self, p: &Params) -> bool {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) || self.k < 1.0 {
            return false;
        }
        if self.boundary_margin >= 0.0 {
            return false;
        }
        let c_set: HashSet<State> = self.c.iter().copied().collect();
        if c_set.iter().any(|s| in_a(p, *s)) {
            return false;
        }
        let shell_start = self.box_size.saturating_sub(1);
        if c_set
            .iter()
            .any(|s| s.i >= shell_start || s.j >= shell_start)
        {
            return false;
        }
        (0..=self.box_size).into_par_iter().all(|i| {
            (0..=self.box_size).all(|j| {
                let x = State::new(i, j);
                let help = if in_a(p, x) || c_set.contains(&x) {
                    self.k
                } else {
                    0.0
                };
                drift(&self.function, p, x)
                    <= -self.epsilon * evaluate_v(&self.function, p, x) + help
            })
        })
    }
}

/// Assembles a drift certificate for recurrent parameters.
///
/// Prefers R1, then R2, then R3 — except that the linear function is only
/// used when `A` is empty or no other sub-region applies, since `E[V]` is
/// unbounded over an infinite `A` for linear `V`. The box doubles from
/// [`INITIAL_BOX`] until the violating set is strictly interior, up to
/// [`MAX_BOX`].
pub fn certify(p: &Params) -> Result<DriftReport, Error> {
    certify_with_box(p, INITIAL_BOX)
}

/// As [`certify`], with the box search starting from `initial_box`.
pub fn certify_with_box(p: &Params, initial_box: u64) -> Result<DriftReport, Error> {
    let label = classify(p, BOUNDARY_TOL);
    if label.phase != Phase::Recurrent {
        return Err(Error::RegionMismatch {
            a: p.a,
            b: p.b,
            region: "recurrent".to_string(),
        });
    }
    let a_is_empty = p.a >= 0.0 && p.b >= 0.0;
    let sublabel = if label.has(Sublabel::R1) && (a_is_empty || label.sublabels.len() == 1) {
        Sublabel::R1
    } else if label.has(Sublabel::R2) {
        Sublabel::R2
    } else {
        Sublabel::R3
    };
    run_certification(p, sublabel, initial_box)
}

/// As [`certify`], with the sub-region (and so the drift function) chosen by
/// the caller.
pub fn certify_with(p: &Params, sublabel: Sublabel) -> Result<DriftReport, Error> {
    run_certification(p, sublabel, INITIAL_BOX)
}

fn run_certification(
    p: &Params,
    sublabel: Sublabel,
    initial_box: u64,
) -> Result<DriftReport, Error> {
    let (function, epsilon) = choose_parameters(p, sublabel)?;
    let mut box_size = initial_box.clamp(2, MAX_BOX);
    let exc = loop {
        match exceptional_set(&function, p, epsilon, box_size) {
            Ok(exc) => break exc,
            Err(Error::BoxTooSmall { .. }) if box_size < MAX_BOX => box_size *= 2,
            Err(e) => return Err(e),
        }
    };

    let mut k = 1.0f64;
    for s in &exc.c {
        k = k.max(expected_v_after(&function, p, *s));
    }
    let mut k_box_only = false;
    match function {
        DriftFunction::Angular => {
            // from any A-state the move is deterministic and V(0, i) = 1
        }
        DriftFunction::Quadratic { .. } => {
            // E over an A-state is V(0, i), which exceeds 1 only while
            // (0, i) itself is outside A, i.e. for finitely many i
            let mut i = 0u64;
            while p.b * i as f64 + p.lambda > 0.0 {
                k = k.max(evaluate_v(&function, p, State::new(0, i)));
                i += 1;
            }
        }
        DriftFunction::Linear { .. } => {
            if !(p.a >= 0.0 && p.b >= 0.0) {
                // A is infinite and V unbounded on it; bound the drift margin
                // over A within the box and flag the certificate
                let a_margin = (0..=box_size)
                    .into_par_iter()
                    .map(|i| {
                        let mut row_max = f64::NEG_INFINITY;
                        for j in 0..=box_size {
                            let s = State::new(i, j);
                            if in_a(p, s) {
                                row_max = row_max.max(drift_margin(&function, p, epsilon, s));
                            }
                        }
                        row_max
                    })
                    .reduce(|| f64::NEG_INFINITY, f64::max);
                if a_margin.is_finite() {
                    k = k.max(a_margin);
                }
                k_box_only = true;
            }
        }
    }

    Ok(DriftReport {
        sublabel,
        function,
        epsilon,
        k,
        c: exc.c,
        box_size,
        boundary_margin: exc.boundary_margin,
        k_box_only,
    })
}
