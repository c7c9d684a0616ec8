//! Joint trajectory and transmit-power planning for a covert UAV downlink.
//!
//! A fixed-altitude UAV sends to a ground receiver ("Bob") while a ground
//! warden ("Willie") runs a radiometer detector under log-uniform noise
//! uncertainty. Both ground nodes are known only up to Gaussian location
//! errors. The planner maximizes the average rate over `N` slots subject to a
//! per-slot transmission-outage chance constraint at Bob and a covertness
//! constraint on Willie's average minimum total error rate.
//!
//! The crate is `no_std` (it needs `alloc`) and is organised bottom-up:
//!
//! * [`scenario`]: parameters, decision-variable containers, mobility and
//!   power feasibility margins.
//! * [`detection`]: radiometer error rates, optimal threshold, the
//!   noncentral chi-square distance statistic and the closed-form lower
//!   bound on the averaged error rate.
//! * [`convexify`]: first-order surrogates and the convex restricted
//!   subproblem built around an expansion point.
//! * [`cvxsolver`]: a primal log-barrier interior-point solver for the
//!   subproblem.
//! * [`sca`]: line-segment initializer, the successive convex approximation
//!   loop (joint scheme) and the fixed-trajectory baseline.
//!
//! IO, configuration files, Monte Carlo validation and the CLI live in the
//! companion `covert-uav` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod convexify;
pub mod cvxsolver;
pub mod detection;
mod error;
pub mod math;
pub mod sca;
pub mod scenario;

pub use error::{Error, Result};
pub use math::Vec2;
