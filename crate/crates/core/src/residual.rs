//! The nonlinear operator, its homotopy targets, and the full residual
//!
//! ```text
//! R(u, t, c) = (1/r) log det(F + Hess u (x) Id) - log(n! det g)
//!              - lambda r u - phi_t - c
//! ```
//!
//! evaluated in log form. The homotopy target is phi_t = phi + t (phi_1 - phi)
//! with phi_1 the value that makes u = 0 an exact solution at t = 1. The
//! constant c is the extra unknown of the lambda = 0 problem and is required
//! to be zero when lambda > 0.

use crate::curvature::{self, NakanoTensorField};
use crate::error::{Error, Result};
use crate::grid::{complex_hessian, ScalarField};
use crate::scenario::Scenario;

/// Residual of the equation at (u, t, c), with cone diagnostics.
#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub residual: ScalarField,
    pub sup_norm: f64,
    /// Global minimum eigenvalue of the assembled tensor F + Hess u (x) Id.
    pub theta_min_eig: f64,
    /// The volume density n! det g used in the comparison.
    pub volume_density: ScalarField,
}

/// Start target phi_1 = (1/r) log det F - log(n! det g): the value of the
/// operator at u = 0, so the homotopy is exactly solvable at t = 1.
pub fn phi_one(sc: &Scenario) -> Result<ScalarField> {
    let logdet = curvature::log_det_power(sc.background()).map_err(promote_cone)?;
    Ok(logdet.sub(&sc.log_volume_density()))
}

/// Affine homotopy target phi_t = phi + t (phi_1 - phi). The endpoints are
/// returned verbatim so t = 1 cancels against phi_1 bitwise.
pub fn phi_t(phi: &ScalarField, phi1: &ScalarField, t: f64) -> ScalarField {
    debug_assert_eq!(phi.grid(), phi1.grid());
    if t == 1.0 {
        phi1.clone()
    } else if t == 0.0 {
        phi.clone()
    } else {
        phi.add_scaled(t, &phi1.sub(phi))
    }
}

fn promote_cone(e: Error) -> Error {
    match e {
        Error::NotPositive { min_eig, .. } => Error::OutsideCone { min_eig },
        other => other,
    }
}

/// Assembled tensor and residual field; the workhorse shared by the public
/// report and the Newton inner loop.
pub struct ResidualEval {
    pub theta: NakanoTensorField,
    pub residual: ScalarField,
    pub sup_norm: f64,
}

/// Evaluates the residual, failing with `OutsideCone` when the assembled
/// tensor loses positivity. The constant `c` is subtracted as the final
/// operation, so R(u, t, c) == R(u, t, 0) - c holds bitwise.
pub fn evaluate(sc: &Scenario, u: &ScalarField, t: f64, c: f64) -> Result<ResidualEval> {
    u.grid().same_grid(&sc.grid())?;
    if sc.lambda() > 0.0 {
        debug_assert_eq!(c, 0.0, "c must be zero when lambda > 0");
    }
    let hu = complex_hessian(u);
    let theta = curvature::assemble_theta(sc.background(), &hu)?;
    let logdet = curvature::log_det_power(&theta).map_err(promote_cone)?;
    let phi1 = phi_one(sc)?;
    let target = phi_t(sc.phi(), &phi1, t);
    let core = logdet
        .sub(&sc.log_volume_density())
        .sub(&u.scale(sc.lambda() * sc.rank() as f64))
        .sub(&target);
    let residual = if c == 0.0 { core } else { core.shift(-c) };
    let sup_norm = residual.sup_norm();
    Ok(ResidualEval {
        theta,
        residual,
        sup_norm,
    })
}

/// Full residual report including the cone margin of the assembled tensor.
pub fn residual(sc: &Scenario, u: &ScalarField, t: f64, c: f64) -> Result<ResidualReport> {
    let eval = evaluate(sc, u, t, c)?;
    let theta_min_eig = curvature::min_nakano_eigenvalue(&eval.theta);
    Ok(ResidualReport {
        residual: eval.residual,
        sup_norm: eval.sup_norm,
        theta_min_eig,
        volume_density: volume_density(sc),
    })
}

fn volume_density(sc: &Scenario) -> ScalarField {
    let vf = sc.volume_factor();
    let g = sc.metric();
    let values = (0..sc.grid().len()).map(|idx| vf * g.det_at(idx)).collect();
    ScalarField::from_values(sc.grid(), values).expect("validated metric")
}
