//! Simulation and stability analysis of the two-lag Poisson autoregression
//! with inhibition.
//!
//! Conditioned on the two previous counts, the next count is Poisson with
//! mean `(a x[n-1] + b x[n-2] + lambda)_+`. Depending on where `(a, b)` falls
//! relative to the critical curve `b_c(a)`, the associated Markov chain on
//! count pairs is either geometrically ergodic or transient, and this crate
//! provides the machinery to check both sides numerically:
//!
//! * [`process`] / [`sim`] — the transition law and exact seeded simulation;
//! * [`classify`] — phase diagram, growth ratio, strong irreducibility;
//! * [`lyapunov`] — drift functions and verified drift certificates;
//! * [`kernel`] — truncated kernels, stationary distributions, and
//!   total-variation convergence rates;
//! * [`transience`] — escape statistics, growth rates, and the T1/T2
//!   mechanism checks.

pub mod classify;
pub mod error;
pub mod fit;
pub mod kernel;
pub mod lyapunov;
pub mod process;
pub mod sim;
pub mod transience;

pub use classify::{
    classify, critical_b, dominant_eigenvalue, irreducibility, IrreducibilityReport,
    IrreducibilityVerdict, Phase, RegionLabel, Sublabel,
};
pub use error::Error;
pub use kernel::{
    geometric_rate, p2_closed_form, pn_closed_form, stationary, tv_distance, Distribution,
    RateReport, StationaryResult, TruncatedKernel,
};
pub use lyapunov::{certify, certify_with, certify_with_box, DriftFunction, DriftReport};
pub use process::{intensity, poisson_pmf, transition_prob, Params, State};
pub use sim::{simulate, simulate_stream, step, Trajectory, TrajectoryStatus, MEAN_CAP};
pub use transience::{
    axis_cycle_check, choose_eps_t2b, choose_r, escape_statistics, growth_rate,
    ratio_theta_fraction, transience_ensemble, AxisCycleReport, EscapeStats, RatioFraction,
    TransienceReport, TransienceRun,
};
