//! statFEM likelihood: observations modeled as `y = ρ P u_h + d + e` with a
//! scaling parameter `ρ` and a squared-exponential misspecification
//! component `d`, whose hyperparameters `η = (ρ, ℓ_d, σ_d)` are inferred
//! jointly with the physical parameters.

use nalgebra::{DMatrix, DVector};

use crate::fem::{LinearSystem, ObservationOperator};
use crate::inference::mvn_logpdf;
use crate::{Error, Result};

/// Hyperparameters `η` of the statFEM observation model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatfemHyperparams {
    /// Solution scaling `ρ` (dimensionless).
    pub rho: f64,
    /// Misspecification length scale `ℓ_d` (same units as the mesh).
    pub ell_d: f64,
    /// Misspecification standard deviation `σ_d` (solution units).
    pub sigma_d: f64,
}

impl StatfemHyperparams {
    /// Checks `ℓ_d > 0`, `σ_d ≥ 0`, and finiteness.
    ///
    /// # Errors
    /// [`Error::InvalidParameter`] describing the offending field.
    pub fn validate(&self) -> Result<()> {
        if !self.rho.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "statFEM scaling rho must be finite, got {}",
                self.rho
            )));
        }
        if !(self.ell_d > 0.0) || !self.ell_d.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "statFEM length scale ell_d must be positive, got {}",
                self.ell_d
            )));
        }
        if !(self.sigma_d >= 0.0) || !self.sigma_d.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "statFEM misspecification std sigma_d must be nonnegative, got {}",
                self.sigma_d
            )));
        }
        Ok(())
    }
}

/// Squared-exponential covariance `k_d(x, x') = σ_d² exp(−‖x−x'‖²/(2ℓ_d²))`
/// over the observation locations.
///
/// With `dofs_per_point > 1` (vector observations), components at one
/// location share the spatial kernel but are mutually independent — the
/// block structure `k_d ⊗ I`, interleaved to match the observation layout.
///
/// # Panics
/// If `ell_d ≤ 0` (callers validate via [`StatfemHyperparams::validate`]).
pub fn sq_exp_covariance(
    points: &[[f64; 2]],
    dofs_per_point: usize,
    ell_d: f64,
    sigma_d: f64,
) -> DMatrix<f64> {
    assert!(ell_d > 0.0, "ell_d must be positive, got {ell_d}");
    let m = points.len();
    let dpn = dofs_per_point;
    let var = sigma_d * sigma_d;
    let mut cov = DMatrix::zeros(m * dpn, m * dpn);
    for i in 0..m {
        for j in 0..m {
            let dx = points[i][0] - points[j][0];
            let dy = points[i][1] - points[j][1];
            let k = var * (-(dx * dx + dy * dy) / (2.0 * ell_d * ell_d)).exp();
            for a in 0..dpn {
                cov[(dpn * i + a, dpn * j + a)] = k;
            }
        }
    }
    cov
}

/// statFEM Gaussian log-likelihood: `log N(y; ρ Φ u_h, k_d(X,X) + σ_e² I)`.
///
/// At `ρ = 1, σ_d = 0` this equals [`crate::fem::fem_log_likelihood`]
/// bit-for-bit (same observation-mean construction, same Gaussian code
/// path).
///
/// # Errors
/// [`Error::InvalidParameter`] for invalid `η` or `σ_e`;
/// [`Error::NotPositiveDefinite`] when the total covariance has no Cholesky
/// factorization (pathological `ℓ_d`/`σ_d` combinations); otherwise
/// propagates solver errors.
pub fn statfem_log_likelihood(
    system: &LinearSystem,
    op: &ObservationOperator,
    eta: &StatfemHyperparams,
    y: &DVector<f64>,
    sigma_e: f64,
) -> Result<f64> {
    eta.validate()?;
    if !(sigma_e > 0.0) || !sigma_e.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "observation noise must be positive, got {sigma_e}"
        )));
    }
    let w = system.solve()?;
    let (phi, offset) = system.observation_parts(op);
    let mean = eta.rho * (&phi * w + offset);
    let m = mean.len();
    let dpn = m / op.points.len();
    let kd = sq_exp_covariance(&op.points, dpn, eta.ell_d, eta.sigma_d);
    let total = kd + DMatrix::identity(m, m) * (sigma_e * sigma_e);
    mvn_logpdf(y, &mean, &total)
}

/// Joint log-posterior kernel `log p(θ) + log p(η) + log p(y|θ,η)` up to
/// the evidence constant. The likelihood is only evaluated when both priors
/// have support — out-of-support parameters short-circuit to `−∞` without
/// touching the forward model.
///
/// # Errors
/// Propagates likelihood evaluation errors (assembly, solve, factorization).
pub fn joint_log_posterior<L>(
    log_prior_theta: f64,
    log_prior_eta: f64,
    log_likelihood: L,
) -> Result<f64>
where
    L: FnOnce() -> Result<f64>,
{
    if log_prior_theta == f64::NEG_INFINITY || log_prior_eta == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(log_prior_theta + log_prior_eta + log_likelihood()?)
}
