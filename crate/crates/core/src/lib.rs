//! Damped quantum harmonic oscillator coupled to a thermal bath.
//!
//! The oscillator evolves under a Lindblad master equation with linear
//! environment operators, so an initial Gaussian state stays Gaussian and is
//! fully described by its first and second moments. The crate computes that
//! evolution along three independent routes:
//!
//! * closed-form expressions for the uncertainty function and the
//!   position-momentum covariance ([`moments::sigma_closed`],
//!   [`moments::sigma_pq_closed`]);
//! * adaptive integration of the moment ODEs ([`moments::evolve`]);
//! * finite-difference integration of the Wigner-function Fokker-Planck
//!   equation on a phase-space grid ([`fokker_planck::run_fp`]).
//!
//! On top of those, [`classicality`] evaluates the degree of quantum
//! decoherence, the degree of classical correlations, the decoherence and
//! thermal time scales and the time windows where the state behaves
//! classically. [`cli`] wires everything into a scenario/sweep runner.

pub mod classicality;
pub mod cli;
pub mod error;
pub mod fokker_planck;
pub mod model;
pub mod moments;
pub mod ode;
pub mod quadrature;
pub mod states;

pub use error::{Error, Result};
pub use model::{DiffusionCoefficients, InitialGaussian, ModelParams, MomentState};

/// Version string written into every output file header.
pub const TOOL_VERSION: &str = concat!("dqho ", env!("CARGO_PKG_VERSION"));
