//! Numerical toolkit for the geometric Lorenz attractor: the linearized flow
//! model and its Poincare section map, the one-dimensional interval map with
//! its expansion machinery, Cantor subset construction, fractal dimension
//! bounds, and maximizing spectra (dynamical and continued-fraction).
//!
//! Everything is plain `f64`; root finding is bisection; interval endpoints
//! carry a global comparison tolerance of 1e-9 unless an operation states a
//! tighter one.

pub mod cantor;
pub mod dim;
pub mod error;
pub mod geo;
pub mod interval;
pub mod one_d;
pub mod spectra;

pub use error::{Error, Result};
pub use interval::Interval;

/// Global endpoint comparison tolerance for interval identities.
pub const ENDPOINT_TOL: f64 = 1e-9;

/// Bisection and root-finding tolerance.
pub const ROOT_TOL: f64 = 1e-12;
