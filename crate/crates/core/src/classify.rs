//! Phase classification of the parameter plane.
//!
//! The critical curve `b_c(a)` splits the plane into a region where the chain
//! is geometrically ergodic (`b < b_c(a)`) and one where it is transient
//! (`b > b_c(a)`). Points within `tol` of the curve are reported as
//! `Boundary` and never labelled: nothing is claimed there.
//!
//! Recurrent parameters carry the sub-regions R1/R2/R3 that select the drift
//! function used for certification, transient ones the mechanism labels
//! T1/T2a/T2b. Sub-regions overlap by construction, and every satisfied label
//! is reported.

use serde::{Deserialize, Serialize};

use crate::process::{Params, State};

/// Default half-width of the boundary band around `b_c(a)`.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Critical curve: recurrence below, transience above.
pub fn critical_b(a: f64) -> f64 {
    if a <= 0.0 {
        1.0
    } else if a < 2.0 {
        1.0 - a
    } else {
        -a * a / 4.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Recurrent,
    Transient,
    Boundary,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Recurrent => "recurrent",
            Phase::Transient => "transient",
            Phase::Boundary => "boundary",
        })
    }
}

/// Sub-region labels. R-labels select a drift function; T-labels select a
/// transience mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sublabel {
    R1,
    R2,
    R3,
    T1,
    T2a,
    T2b,
}

impl std::fmt::Display for Sublabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sublabel::R1 => "R1",
            Sublabel::R2 => "R2",
            Sublabel::R3 => "R3",
            Sublabel::T1 => "T1",
            Sublabel::T2a => "T2a",
            Sublabel::T2b => "T2b",
        })
    }
}

/// Classification outcome: a phase plus every satisfied sub-region label.
/// `Boundary` carries no labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionLabel {
    pub phase: Phase,
    pub sublabels: Vec<Sublabel>,
}

impl RegionLabel {
    pub fn has(&self, label: Sublabel) -> bool {
        self.sublabels.contains(&label)
    }
}

/// Classifies `(a, b)` against `b_c(a)` with a boundary band of width `tol`.
pub fn classify(p: &Params, tol: f64) -> RegionLabel {
    let (a, b) = (p.a, p.b);
    let gap = b - critical_b(a);
    if gap.abs() <= tol {
        return RegionLabel {
            phase: Phase::Boundary,
            sublabels: Vec::new(),
        };
    }
    if gap < 0.0 {
        let mut sublabels = Vec::new();
        if a < 1.0 && b < 1.0 && a + b < 1.0 {
            sublabels.push(Sublabel::R1);
        }
        if a > 0.0 && a * a + 4.0 * b < 0.0 {
            sublabels.push(Sublabel::R2);
        }
        if (1.0..2.0).contains(&a) && -1.0 < b && b < 1.0 - a {
            sublabels.push(Sublabel::R3);
        }
        RegionLabel {
            phase: Phase::Recurrent,
            sublabels,
        }
    } else {
        let mut sublabels = Vec::new();
        if a < 0.0 && b > 1.0 {
            sublabels.push(Sublabel::T1);
        }
        let t2 = ((0.0..2.0).contains(&a) && a + b > 1.0) || (a >= 2.0 && a * a + 4.0 * b > 0.0);
        if t2 {
            sublabels.push(if b >= 0.0 {
                Sublabel::T2a
            } else {
                Sublabel::T2b
            });
        }
        RegionLabel {
            phase: Phase::Transient,
            sublabels,
        }
    }
}

/// Largest root of `x^2 - a x - b` when real, i.e. `(a + sqrt(a^2+4b))/2`.
/// This is the asymptotic growth ratio in the transient T2 regime.
pub fn dominant_eigenvalue(p: &Params) -> Option<f64> {
    let disc = p.a * p.a + 4.0 * p.b;
    (disc >= 0.0).then(|| (p.a + disc.sqrt()) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IrreducibilityVerdict {
    /// Every state is reachable from every state.
    StronglyIrreducible,
    /// The communicating class of the origin is exactly the two axes plus
    /// the origin.
    ClassOfOriginIsS,
    /// Some state is unreachable; the communicating class of the origin is
    /// not identified in this regime.
    NotStronglyIrreducible,
}

/// Outcome of the strong-irreducibility test, with an unreachable witness
/// state when the chain is reducible in the unresolved regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrreducibilityReport {
    pub verdict: IrreducibilityVerdict,
    pub witness: Option<State>,
    pub k_star: Option<u64>,
    /// False when the chain is reducible but the communicating class of the
    /// origin is not identified.
    pub origin_class_identified: bool,
}

/// Smallest `k` with `coef * k + lambda <= 0`, for `coef < 0`.
fn min_unreachable_k(coef: f64, lambda: f64) -> u64 {
    debug_assert!(coef < 0.0);
    let mut k = (lambda / -coef).floor().max(0.0) as u64;
    while coef * k as f64 + lambda > 0.0 {
        k += 1;
    }
    while k > 0 && coef * (k - 1) as f64 + lambda <= 0.0 {
        k -= 1;
    }
    k
}

/// Decides strong irreducibility from the signs of `a`, `a + b`, and
/// `a + lambda`.
///
/// In the remaining regime (`-lambda < a < 0` and `a + b < 0`) the chain is
/// reducible: the state `(1, k*)` is unreachable, where `k*` is the smallest
/// count whose inhibition already clamps the intensity.
pub fn irreducibility(p: &Params) -> IrreducibilityReport {
    if p.a >= 0.0 || (p.a > -p.lambda && p.a + p.b >= 0.0) {
        return IrreducibilityReport {
            verdict: IrreducibilityVerdict::StronglyIrreducible,
            witness: None,
            k_star: None,
            origin_class_identified: true,
        };
    }
    if p.a <= -p.lambda {
        return IrreducibilityReport {
            verdict: IrreducibilityVerdict::ClassOfOriginIsS,
            witness: None,
            k_star: None,
            origin_class_identified: true,
        };
    }
    let k_star = if p.b <= 0.0 {
        min_unreachable_k(p.a, p.lambda)
    } else {
        min_unreachable_k(p.a + p.b, p.lambda)
    };
    IrreducibilityReport {
        verdict: IrreducibilityVerdict::NotStronglyIrreducible,
        witness: Some(State::new(1, k_star)),
        k_star: Some(k_star),
        origin_class_identified: false,
    }
}
