//! Bottleneck commuting model with normal vehicles (NV) and shared
//! autonomous vehicles (SAV).
//!
//! Solvers cover departure-time equilibria for a given mode split, mode
//! choice under marginal-cost, average-cost and monopoly fares, day-to-day
//! stability, the tolled system optimum, fare-only optimum and the regime
//! social-cost ranking. Each closed form has a brute-force counterpart in
//! [`oracle`] and [`verify`].
//!
//! ```
//! use sav_bottleneck::{params::validate, scenarios, fares};
//!
//! let vp = validate(scenarios::fig2()).unwrap();
//! let mc = fares::solve_mc(&vp);
//! assert!((mc.split.n_a - 960.0).abs() < 1e-9);
//! ```

pub mod departure;
pub mod error;
pub mod fares;
pub mod first_best;
pub mod oracle;
pub mod params;
pub mod scenarios;
pub mod stability;
pub mod verify;
pub mod welfare;

pub use error::{ModelError, Result};
pub use params::{validate, validate_with_tol, ModelParams, ValidatedParams};
