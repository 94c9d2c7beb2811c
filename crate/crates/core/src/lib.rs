//! Strongly monotonic polygonal (tamed) Euler scheme for SDEs whose drift
//! grows superlinearly but is strongly monotone.
//!
//! - [`model`]: problems and built-in examples
//! - [`taming`]: the tamed drift and its verifiers
//! - [`paths`]: reproducible Brownian increments and coarsening
//! - [`solver`]: explicit schemes
//! - [`experiment`]: Monte Carlo error tables, rates and moments
//! - [`config`], [`cli`]: problem files and the command-line front end

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod model;
pub mod paths;
pub mod solver;
pub mod taming;

pub use error::{Error, Result};
pub use experiment::{fit_rate, strong_error, ErrorTable, FitWindow, MonteCarlo, RateFit};
pub use model::{InitialLaw, SdeProblem};
pub use paths::{generate, sample_initial, IncrementGrid};
pub use solver::{simulate, simulate_pair, Integrator, SchemeKind, SimulationOutput};
pub use taming::{TamedDrift, TamingRadius};
