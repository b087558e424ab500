//! Numerical solver and verification harness for a determinant-type
//! Monge-Ampere equation on the curvature tensor of a Hermitian bundle over
//! a flat complex torus:
//!
//! ```text
//! det_{TX (x) E}(F + i ddbar u (x) Id_E)^(1/r) = e^(lambda r u + phi) omega^n
//! ```
//!
//! The unknown is a real potential `u` confined to the cone where the
//! curvature tensor stays Nakano positive. The solver runs a continuity
//! method in a homotopy parameter `t` from the trivially solvable start down
//! to the target data, advancing with damped Newton steps, a
//! Krylov-plus-FFT linear solver, and pointwise positivity guards. A slow
//! dense-direct oracle and a rank-one classical reduction cross-check the
//! main path.

pub mod continuation;
pub mod curvature;
pub mod error;
pub mod fft;
pub mod grid;
pub mod hermitian;
// pub mod io;
pub mod linsolve;
// pub mod oracle;
pub mod residual;
pub mod scenario;

pub use error::{Error, Result};
pub use grid::{GridSpec, HermitianMetricField, ScalarField, StencilOrder, VectorField};
