//! Exact-arithmetic engine for the multi-species stochastic higher-spin
//! vertex model with horizontal capacity one: vertex weights, one-step
//! transition matrices on lattice windows, duality functions and the
//! identities relating them, and Monte Carlo cross-checks.

pub mod cli;
pub mod duality;
pub mod error;
pub mod evolve;
pub mod examples;
pub mod exec;
pub mod montecarlo;
pub mod params;
pub mod qarith;
pub mod report;
pub mod state;
pub mod suite;
pub mod vertex;

pub use error::{Error, Result};
pub use exec::Exec;
pub use qarith::Rational;
pub use report::{CheckReport, Status};
