//! Closed-loop inertial gradient descent ("whiplash" dynamics).
//!
//! The crate is organised around a small number of building blocks:
//!
//! - [`oracle`]: the black-box cost interface and a zoo of benchmark costs.
//! - [`discrete`]: the discrete whiplash scheme, its naive and momentum-stopped
//!   runners, and the per-step relaxation diagnostics.
//! - [`explorer`]: the restarting exploration algorithm that escapes saddles.
//! - [`continuous`]: a fixed-step forward Euler simulator for the underlying
//!   ODE `x'' + (1 + t|x'|^2) x' + grad f(x) = 0` and its Lyapunov energy.
//! - [`envelope`]: rate certification by scanning time-scaled trajectories
//!   `P(t)(x(t) - x*)` for the bounded-to-divergent transition.
//!
//! Independent runs (rate scans, condition-number sweeps) are dispatched
//! through [`parallel::Execution`], which uses rayon when the `parallel`
//! feature is enabled and falls back to a plain loop otherwise.

pub mod continuous;
pub mod discrete;
pub mod envelope;
pub mod error;
pub mod explorer;
pub mod format;
pub mod oracle;
pub mod parallel;
pub mod point;
pub mod sampling;

pub use error::{Error, Result};
pub use oracle::{Benchmark, BenchmarkKind, CostOracle};
pub use parallel::Execution;
pub use point::Point;
