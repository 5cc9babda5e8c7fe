//! Numerical toolkit for directionally quenched Cahn–Hilliard fronts in a
//! two-dimensional channel.
//!
//! Layers, bottom up: [`spectral`] (periodic Fourier discretization),
//! [`model`] (nonlinearity and heterogeneity), [`dispersion`] (constant
//! coefficient spectral theory), [`linop`] (discretized linearization and
//! Hopf localization), [`reduction`] (cubic coefficients of the reduced
//! bifurcation equation) and [`sim`] (pseudospectral time stepping).

pub mod dispersion;
pub mod error;
pub mod linalg;
pub mod linop;
pub mod model;
pub mod poly;
pub mod reduction;
pub mod sim;
pub mod spectral;

pub use error::{QuenchError, Result};
pub use num_complex::Complex64 as C64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
