//! Model definition: parameters, states, and the one-step transition law.
//!
//! The process is an integer-valued autoregression of order two. Conditioned
//! on the two previous counts, the next count is Poisson with mean
//!
//! ```text
//! s(i, j) = (a*i + b*j + lambda)_+
//! ```
//!
//! where `i` is the latest count and `j` the one before it. Negative
//! coefficients model inhibition; the ReLU clamp keeps the mean admissible.
//! The pair `(i, j)` is a Markov chain on the quarter lattice, and everything
//! else in this crate is derived from its transition kernel
//!
//! ```text
//! P((i,j), (k,l)) = delta(i, l) * exp(-s(i,j)) * s(i,j)^k / k!
//! ```
//!
//! with the convention `0^0 = 1`, so a state with zero intensity moves to
//! `(0, i)` deterministically.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::Error;

/// Model parameters: lag-1 coefficient `a`, lag-2 coefficient `b`, and
/// baseline rate `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
}

impl Params {
    /// Validates `lambda > 0` and finiteness of all three coefficients.
    pub fn new(a: f64, b: f64, lambda: f64) -> Result<Self, Error> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParams(format!(
                "a and b must be finite (got a={a}, b={b})"
            )));
        }
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "lambda must be strictly positive (got {lambda})"
            )));
        }
        Ok(Self { a, b, lambda })
    }
}

/// A chain state `(i, j)`: current count `i`, previous count `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct State {
    pub i: u64,
    pub j: u64,
}

impl State {
    pub const fn new(i: u64, j: u64) -> Self {
        Self { i, j }
    }

    pub const ORIGIN: State = State::new(0, 0);
}

impl std::fmt::Display for State {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.i, self.j)
    }
}

/// Poisson mean of the next count from state `s`: `(a*i + b*j + lambda)_+`.
pub fn intensity(p: &Params, s: State) -> f64 {
    (p.a * s.i as f64 + p.b * s.j as f64 + p.lambda).max(0.0)
}

/// One-step transition probability `P(from, to)`.
///
/// Zero unless `to.j == from.i`; otherwise the Poisson pmf at `to.i` for the
/// intensity of `from`. Zero intensity puts the whole mass on `(0, from.i)`.
pub fn transition_prob(p: &Params, from: State, to: State) -> f64 {
    if to.j != from.i {
        return 0.0;
    }
    poisson_pmf(intensity(p, from), to.i)
}

/// Poisson pmf `exp(-mean) * mean^k / k!`, with `0^0 = 1` so that a zero mean
/// is a point mass at `k = 0`.
///
/// Evaluated in saddle-point form `exp(-stirlerr(k) - bd0(k, mean)) /
/// sqrt(2 pi k)`: the naive log-space exponent cancels terms of size
/// `k ln(mean)` and loses ~1e-11 at means past 1e4, while this form keeps
/// row sums within 1e-12 of one across the admissible mean range.
pub fn poisson_pmf(mean: f64, k: u64) -> f64 {
    debug_assert!(mean >= 0.0);
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if k == 0 {
        return (-mean).exp();
    }
    let x = k as f64;
    (-stirlerr(x) - bd0(x, mean)).exp() / (2.0 * std::f64::consts::PI * x).sqrt()
}

/// `ln(n!) - ln(sqrt(2 pi n) (n/e)^n)`, by series for large `n` where the
/// direct difference would cancel.
fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        return ln_gamma(n + 1.0) - (n + 0.5) * n.ln() + n
            - 0.5 * (2.0 * std::f64::consts::PI).ln();
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// `x ln(x/m) + m - x`, by series when `x` is close to `m`.
fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut term = 2.0 * x * v;
        let v_squared = v * v;
        let mut j = 1.0;
        loop {
            term *= v_squared;
            let next = s + term / (2.0 * j + 1.0);
            if next == s {
                return next;
            }
            s = next;
            j += 1.0;
        }
    }
    x * (x / m).ln() + m - x
}

/// Fills `out` with pmf values for `k = 0..=k_max`, stopping early once the
/// cumulative mass reaches `1 - tail_cut`. Returns the accumulated mass.
///
/// Uses the multiplicative recurrence when `exp(-mean)` does not underflow,
/// and per-term log-space evaluation otherwise.
pub(crate) fn poisson_pmf_row(mean: f64, k_max: u64, tail_cut: f64, out: &mut Vec<f64>) -> f64 {
    out.clear();
    if mean == 0.0 {
        out.push(1.0);
        return 1.0;
    }
    let stop = 1.0 - tail_cut;
    let mut total = 0.0;
    if mean < 700.0 {
        let mut pmf = (-mean).exp();
        for k in 0..=k_max {
            out.push(pmf);
            total += pmf;
            if total >= stop {
                break;
            }
            pmf *= mean / (k + 1) as f64;
        }
    } else {
        for k in 0..=k_max {
            let pmf = poisson_pmf(mean, k);
            out.push(pmf);
            total += pmf;
            if total >= stop {
                break;
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(a: f64, b: f64, lambda: f64) -> Params {
        Params::new(a, b, lambda).unwrap()
    }

    #[test]
    fn params_reject_nonpositive_lambda() {
        assert!(Params::new(0.5, 0.5, 0.0).is_err());
        assert!(Params::new(0.5, 0.5, -1.0).is_err());
        assert!(Params::new(f64::NAN, 0.5, 1.0).is_err());
        assert!(Params::new(0.5, f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn intensity_matches_formula() {
        let p = params(0.6, 0.3, 1.0);
        assert_relative_eq!(intensity(&p, State::new(2, 1)), 2.5);
    }

    #[test]
    fn intensity_clamps_at_zero() {
        let p = params(-1.0, 0.0, 1.0);
        assert_eq!(intensity(&p, State::new(2, 0)), 0.0);
    }

    #[test]
    fn intensity_at_origin_is_lambda() {
        for (a, b) in [(0.6, 0.3), (-5.0, 10.0), (3.0, -2.5)] {
            let p = params(a, b, 1.5);
            assert_eq!(intensity(&p, State::ORIGIN), 1.5);
        }
    }

    #[test]
    fn transition_prob_origin_loop_is_exp_minus_lambda() {
        let p = params(0.6, 0.3, 1.0);
        assert_relative_eq!(
            transition_prob(&p, State::ORIGIN, State::ORIGIN),
            (-1.0f64).exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn transition_prob_zero_off_the_shift_structure() {
        let p = params(0.6, 0.3, 1.0);
        // target second coordinate must equal source first coordinate
        assert_eq!(transition_prob(&p, State::new(2, 1), State::new(3, 5)), 0.0);
    }

    #[test]
    fn zero_intensity_forces_deterministic_move() {
        let p = params(-1.0, 0.0, 1.0);
        assert_eq!(transition_prob(&p, State::new(2, 0), State::new(0, 2)), 1.0);
        assert_eq!(transition_prob(&p, State::new(2, 0), State::new(1, 2)), 0.0);
    }

    #[test]
    fn pmf_normalizes() {
        // a fixed summation range far past the mean avoids stalling on the
        // float limit of the cumulative sum
        for mean in [0.0f64, 1e-6, 1.0, 46.0, 700.5, 1e4] {
            let k_max = (mean + 40.0 * mean.sqrt() + 100.0) as u64;
            let sum: f64 = (0..=k_max).map(|k| poisson_pmf(mean, k)).sum();
            assert!((sum - 1.0).abs() <= 1e-12, "mean {mean}: sum {sum}");
        }
    }

    #[test]
    fn pmf_row_matches_pointwise_pmf() {
        let mut row = Vec::new();
        for mean in [0.5, 12.0, 650.0, 800.0] {
            poisson_pmf_row(mean, 2000, 1e-14, &mut row);
            for (k, &v) in row.iter().enumerate() {
                assert_relative_eq!(v, poisson_pmf(mean, k as u64), max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn pmf_zero_mean_is_point_mass() {
        assert_eq!(poisson_pmf(0.0, 0), 1.0);
        assert_eq!(poisson_pmf(0.0, 1), 0.0);
        assert_eq!(poisson_pmf(0.0, 10), 0.0);
    }

    #[test]
    fn pmf_large_mean_mode_is_sane() {
        // near the mode the pmf is ~ 1/sqrt(2 pi mean)
        let mean = 1e12;
        let approx = 1.0 / (2.0 * std::f64::consts::PI * mean).sqrt();
        let got = poisson_pmf(mean, mean as u64);
        assert_relative_eq!(got, approx, max_relative = 1e-2);
    }
}
