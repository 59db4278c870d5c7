//! Seeded trajectory simulation.
//!
//! Sampling is exact for every admissible mean: the Poisson draw comes from
//! `rand_distr` (inversion for small means, transformed rejection for large
//! ones), and means above [`MEAN_CAP`] abort the trajectory instead of
//! degrading into approximation. Counts saturating the integer range are
//! likewise flagged rather than wrapped.
//!
//! Ensembles derive one ChaCha stream per trajectory index under a master
//! seed, so parallel runs are bit-identical to sequential ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as RandDistribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::process::{intensity, Params, State};

/// Largest Poisson mean the simulator will draw from. Beyond this the
/// trajectory is marked escaped: the regime is already decided and counts
/// this large add nothing but floating-point noise.
pub const MEAN_CAP: f64 = 1e12;

/// Counts at or above `2^62` mark the trajectory as overflowed.
pub const COUNT_OVERFLOW_LIMIT: u64 = 1 << 62;

/// Terminal status of a simulated trajectory. The step index is the index of
/// the last recorded count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "step", rename_all = "snake_case")]
pub enum TrajectoryStatus {
    /// All requested steps were taken.
    Completed,
    /// The intensity out of the state at `step` exceeded [`MEAN_CAP`].
    Escaped(usize),
    /// The count recorded at `step` reached [`COUNT_OVERFLOW_LIMIT`].
    Overflow(usize),
}

impl TrajectoryStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, TrajectoryStatus::Completed)
    }
}

/// A realized trajectory: `counts[n]` holds the count at time `n`, starting
/// from `counts[0..2] = [init.j, init.i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub params: Params,
    pub status: TrajectoryStatus,
    pub counts: Vec<u64>,
}

impl Trajectory {
    /// The initial state `(counts[1], counts[0])`.
    pub fn init(&self) -> State {
        State::new(self.counts[1], self.counts[0])
    }

    /// The chain state at time `n >= 1`, i.e. `(counts[n], counts[n-1])`.
    pub fn state_at(&self, n: usize) -> State {
        State::new(self.counts[n], self.counts[n - 1])
    }

    /// CSV rendering with header `n,x`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,x\n");
        for (n, x) in self.counts.iter().enumerate() {
            out.push_str(&format!("{n},{x}\n"));
        }
        out
    }
}

/// Deterministic per-trajectory generator: ChaCha8 keyed by the master seed,
/// with the trajectory index selecting the stream.
pub fn ensemble_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// One chain step: draws `k ~ Poisson(intensity)` and moves to `(k, s.i)`.
/// Zero intensity moves to `(0, s.i)` without consuming randomness.
pub fn step<R: Rng + ?Sized>(p: &Params, s: State, rng: &mut R) -> Result<State, Error> {
    let mean = intensity(p, s);
    if mean > MEAN_CAP {
        return Err(Error::MeanCapExceeded { mean });
    }
    let k = if mean == 0.0 {
        0
    } else {
        let draw: f64 = Poisson::new(mean)
            .expect("mean is positive and finite")
            .sample(rng);
        draw as u64
    };
    Ok(State::new(k, s.i))
}

/// Simulates `n_steps` steps from `init`, deterministically in `seed`.
///
/// A mean above [`MEAN_CAP`] or a count at [`COUNT_OVERFLOW_LIMIT`] truncates
/// the trajectory; the failure mode lands in the status, never in an error.
pub fn simulate(p: &Params, init: State, n_steps: usize, seed: u64) -> Trajectory {
    simulate_stream(p, init, n_steps, seed, 0)
}

/// Simulates one member of a seeded ensemble: stream `index` under `master_seed`.
pub fn simulate_stream(
    p: &Params,
    init: State,
    n_steps: usize,
    master_seed: u64,
    index: u64,
) -> Trajectory {
    let mut rng = ensemble_rng(master_seed, index);
    let mut counts = Vec::with_capacity(n_steps + 2);
    counts.push(init.j);
    counts.push(init.i);
    let mut state = init;
    let mut status = TrajectoryStatus::Completed;
    for _ in 0..n_steps {
        match step(p, state, &mut rng) {
            Ok(next) => {
                counts.push(next.i);
                if next.i >= COUNT_OVERFLOW_LIMIT {
                    status = TrajectoryStatus::Overflow(counts.len() - 1);
                    break;
                }
                state = next;
            }
            Err(Error::MeanCapExceeded { .. }) => {
                status = TrajectoryStatus::Escaped(counts.len() - 1);
                break;
            }
            Err(e) => unreachable!("step returns only MeanCapExceeded: {e}"),
        }
    }
    Trajectory {
        seed: master_seed,
        params: *p,
        status,
        counts,
    }
}
