//! Simulation of the stochastic time-fractional diffusion equation
//!
//! ```text
//! ∂_t u + ∂_t^{1-α} A^s u = f(u) + Ẇ^H_Q   in (0, 1) × (0, T]
//! u(·, 0) = 0,   u = 0 on the boundary
//! ```
//!
//! with the spectral fractional Laplacian `A^s`, a Riemann–Liouville time
//! derivative of order `1 - α`, and fractional Gaussian noise of Hurst index
//! `H ∈ (0, 1)` whose covariance operator has eigenvalues `Λ_k = k^m`.
//!
//! The discretization is spectral Galerkin in space (first `N` sine modes)
//! and backward-Euler convolution quadrature in time, with the nonlinearity
//! treated explicitly. The [`experiments`] module estimates strong
//! convergence rates by Monte Carlo and compares them with the predicted
//! rates.
//!
//! Module map:
//!
//! * [`spectral`]: eigenpairs, sine transforms, `A^s`.
//! * [`fbm`]: fractional Brownian motion samplers and seeded ensembles.
//! * [`cq`]: convolution quadrature weights.
//! * [`mlf`]: Mittag-Leffler function and scalar reference solutions.
//! * [`solver`]: the fully discrete time stepper.
//! * [`experiments`]: convergence studies, error tables, rate predictions.
//! * [`cli`]: configuration files and the command-line runner.
//! * [`selftest`]: built-in oracle suites.

pub mod cli;
pub mod cq;
mod error;
pub mod experiments;
pub mod fbm;
pub mod mlf;
mod quad;
pub mod selftest;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
