//! Reconstructing indicator sceneries on the torus from the trace of an
//! infinitely divisible process.
//!
//! The chain runs from temporal correlations of the observed trace, through
//! the Fourier coefficients of the spatial correlations, to a grid
//! approximation of the hidden set:
//!
//! - [`torus`]: points, box sceneries, shift/reflection aligned distance
//! - [`step_law`]: Brownian and compound Poisson step laws, Fourier coefficients, sampling
//! - [`correlations`]: spatial correlations and three independent routes to temporal ones
//! - [`vandermonde`]: Vandermonde solves, explicit inverses, recurrent rotations
//! - [`inversion`]: temporal moments to spatial Fourier tables, symmetric and Laplace routes
//! - [`reconstruct`]: maximal feasible grid subsets and the end-to-end pipeline

pub mod acceptance;
pub mod config;
pub mod correlations;
pub mod error;
pub mod inversion;
pub mod reconstruct;
pub mod step_law;
pub mod torus;
pub mod vandermonde;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use step_law::StepLaw;
pub use torus::{Scenery, TorusPoint};
