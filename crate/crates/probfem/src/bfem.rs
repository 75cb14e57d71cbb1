//! Bayesian FEM likelihood: the posterior mean over observations equals the
//! FEM prediction, while the covariance carries the discretization error
//! `σ_u² P (D⁻¹ − L* K⁻¹ L) P*`, approximated with a hierarchically refined
//! reference space and an evidence-maximizing scale `σ̂_u`.

use nalgebra::{DMatrix, DVector};

use crate::fem::{LinearSystem, ObservationOperator};
use crate::inference::mvn_logpdf;
use crate::{Error, Result};

/// Gaussian observation likelihood `N(mean, cov + σ_e² I)`.
#[derive(Debug, Clone)]
pub struct BfemLikelihood {
    /// FEM prediction `P u_h` at the observation points.
    pub mean: DVector<f64>,
    /// Discretization-error covariance (symmetric positive semidefinite).
    pub cov: DMatrix<f64>,
    /// Evidence-maximizing solution scale `σ̂_u`.
    pub sigma_u: f64,
    /// Observation noise standard deviation.
    pub sigma_e: f64,
}

/// Evidence-maximizing solution scale `σ̂_u = sqrt(fᵀu / n)`, the energy norm
/// of the FEM solution normalized by the number of unknowns.
///
/// # Errors
/// [`Error::NegativeEnergy`] when `fᵀu < 0` beyond rounding — for an SPD
/// stiffness matrix `fᵀu = fᵀK⁻¹f ≥ 0`, so a genuinely negative value
/// signals an assembly bug.
///
/// # Examples
/// ```
/// use nalgebra::DVector;
/// use probfem::bfem::sigma_u_hat;
///
/// let f = DVector::from_column_slice(&[2.0, 2.0]);
/// let u = DVector::from_column_slice(&[2.0, 2.0]);
/// assert_eq!(sigma_u_hat(&f, &u, 2).unwrap(), 2.0);
/// assert_eq!(sigma_u_hat(&(0.0 * &f), &u, 2).unwrap(), 0.0);
/// ```
pub fn sigma_u_hat(f: &DVector<f64>, u: &DVector<f64>, n: usize) -> Result<f64> {
    if f.len() != u.len() || n == 0 {
        return Err(Error::InvalidParameter(format!(
            "sigma_u_hat needs matching vectors and n > 0, got |f| = {}, |u| = {}, n = {n}",
            f.len(),
            u.len()
        )));
    }
    let energy = f.dot(u);
    if energy < -1e-12 * f.norm() * u.norm() {
        return Err(Error::NegativeEnergy(energy));
    }
    Ok((energy.max(0.0) / n as f64).sqrt())
}

/// Observation-space Gram matrix `Φ K⁻¹ Φᵀ` of a solved system. The raw
/// (unclipped) BFEM error covariance is `σ̂_u²` times the difference of the
/// fine and coarse Gram matrices; exposing it lets callers audit how far
/// from PSD the nesting identity drifts in floating point.
///
/// # Errors
/// Factorization errors propagate.
pub fn observation_gram(system: &LinearSystem, op: &ObservationOperator) -> Result<DMatrix<f64>> {
    let (phi, _) = system.observation_parts(op);
    let factor = system.factorize()?;
    Ok(&phi * factor.solve_matrix(&phi.transpose()))
}

/// Symmetrizes a matrix and clips negative eigenvalues to zero.
fn clip_to_psd(mat: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = 0.5 * (mat + mat.transpose());
    let eig = nalgebra::SymmetricEigen::new(sym);
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose()
}

/// Builds the BFEM likelihood from a coarse system and its hierarchically
/// refined reference system (assembled for the *same* parameters): the mean
/// is the coarse FEM prediction and the covariance is
/// `σ̂_u² (Φ_f K_f⁻¹ Φ_fᵀ − Φ_c K_c⁻¹ Φ_cᵀ)`, symmetrized and clipped to
/// positive semidefinite. The Galerkin nesting property makes the difference
/// PSD up to rounding (eigenvalues above `−1e-10 · trace`).
///
/// # Errors
/// [`Error::ObservationMismatch`] when the two operators observe different
/// points; [`Error::NonNestedMeshes`] when the fine mesh does not contain
/// the coarse nodes as a prefix (the [`crate::mesh::refine_hierarchical`]
/// layout); [`Error::InvalidParameter`] for a non-positive `sigma_e`.
pub fn bfem_likelihood(
    coarse: &LinearSystem,
    fine: &LinearSystem,
    p_coarse: &ObservationOperator,
    p_fine: &ObservationOperator,
    sigma_e: f64,
) -> Result<BfemLikelihood> {
    if !(sigma_e > 0.0) || !sigma_e.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "observation noise must be positive, got {sigma_e}"
        )));
    }
    if p_coarse.points != p_fine.points {
        return Err(Error::ObservationMismatch(format!(
            "operators observe different points ({} vs {})",
            p_coarse.points.len(),
            p_fine.points.len()
        )));
    }
    // Hierarchical refinement keeps the coarse nodes as a bit-identical
    // prefix of the fine node list; use that as the nesting witness.
    let n_c = coarse.mesh.n_nodes();
    if fine.mesh.n_nodes() < n_c || fine.mesh.nodes[..n_c] != coarse.mesh.nodes[..] {
        return Err(Error::NonNestedMeshes(format!(
            "fine mesh ({} nodes) does not extend the coarse mesh ({} nodes)",
            fine.mesh.n_nodes(),
            n_c
        )));
    }

    let factor_c = coarse.factorize()?;
    let w = coarse.solve_with(&factor_c)?;
    let (phi_c, offset) = coarse.observation_parts(p_coarse);
    let mean = &phi_c * &w + offset;
    let sigma_u = sigma_u_hat(&coarse.load, &w, coarse.n_free())?;

    let gram_c = &phi_c * factor_c.solve_matrix(&phi_c.transpose());
    let gram_f = observation_gram(fine, p_fine)?;
    let cov = clip_to_psd(&(sigma_u * sigma_u * (gram_f - gram_c)));

    Ok(BfemLikelihood {
        mean,
        cov,
        sigma_u,
        sigma_e,
    })
}

/// Log-likelihood of the observations `y`: the multivariate normal
/// log-density with mean `like.mean` and covariance `like.cov + σ_e² I`.
///
/// # Errors
/// Propagates [`Error::NotPositiveDefinite`] from the Cholesky factorization
/// (an invariant breach — the stored covariance is PSD by construction).
pub fn bfem_log_likelihood(y: &DVector<f64>, like: &BfemLikelihood) -> Result<f64> {
    let m = like.mean.len();
    let total = &like.cov + DMatrix::identity(m, m) * (like.sigma_e * like.sigma_e);
    mvn_logpdf(y, &like.mean, &total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_bar, observation_matrix, MaterialParams1D};
    use crate::mesh::{generate_interval_mesh, refine_hierarchical, Mesh};
    use approx::assert_relative_eq;

    const PULLOUT: MaterialParams1D = MaterialParams1D {
        ea: 0.8,
        k: 70.0,
        f: 10.0,
    };

    /// Coarse and hierarchically refined pullout systems plus observation
    /// operators at the given points.
    fn pullout_pair(
        n: usize,
        mat: &MaterialParams1D,
        points: &[[f64; 2]],
    ) -> (
        LinearSystem,
        LinearSystem,
        ObservationOperator,
        ObservationOperator,
    ) {
        let mesh = generate_interval_mesh(1.0, n).unwrap();
        let fine_mesh = refine_hierarchical(&mesh).unwrap().fine;
        let p_c = observation_matrix(&mesh, points).unwrap();
        let p_f = observation_matrix(&fine_mesh, points).unwrap();
        let coarse = assemble_bar(&mesh, mat).unwrap();
        let fine = assemble_bar(&fine_mesh, mat).unwrap();
        (coarse, fine, p_c, p_f)
    }

    #[test]
    fn sigma_u_hat_examples() {
        let f = DVector::from_column_slice(&[2.0, 2.0]);
        let u = DVector::from_column_slice(&[2.0, 2.0]);
        assert_eq!(sigma_u_hat(&f, &u, 2).unwrap(), 2.0);
        assert_eq!(sigma_u_hat(&DVector::zeros(2), &u, 2).unwrap(), 0.0);

        // Hand-solved one-element pullout system: f = (0, 10),
        // u = (−0.234027…, 0.519742…), n = 2 → sqrt(5.19742/2).
        let mesh = generate_interval_mesh(1.0, 1).unwrap();
        let system = assemble_bar(&mesh, &PULLOUT).unwrap();
        let w = system.solve().unwrap();
        let s = sigma_u_hat(&system.load, &w, system.n_free()).unwrap();
        assert_relative_eq!(s, 1.612050813354988, epsilon = 1e-12);
    }

    #[test]
    fn sigma_u_hat_rejects_negative_energy() {
        let f = DVector::from_column_slice(&[1.0, 0.0]);
        let u = DVector::from_column_slice(&[-1.0, 0.0]);
        assert!(matches!(
            sigma_u_hat(&f, &u, 2),
            Err(Error::NegativeEnergy(e)) if e == -1.0
        ));
        assert!(matches!(
            sigma_u_hat(&f, &DVector::zeros(3), 2),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn identical_spaces_give_zero_covariance() {
        let mesh = generate_interval_mesh(1.0, 4).unwrap();
        let system = assemble_bar(&mesh, &PULLOUT).unwrap();
        let op = observation_matrix(&mesh, &[[1.0, 0.0]]).unwrap();
        let like = bfem_likelihood(&system, &system, &op, &op, 1e-3).unwrap();
        assert!(like.cov.amax() <= 1e-12, "cov = {}", like.cov);
    }

    #[test]
    fn pullout_scalar_oracle() {
        // h = 1 coarse, h = 1/2 reference, observed at x = 1. By hand:
        // C_c = A/((A−B)(A+B)) with A = 362/15, B = 163/15 → 362/6965;
        // C_f = (2a²−b²)/(2a(a²−b²)) with a = 199/15, b = 127/30
        //     = 4 510 185/56 625 450;
        // σ̂_u² = 5·u_h(1) = 18 100/6965, and
        // cov = σ̂_u² (C_f − C_c) = 271 500/3 775 030.
        let (coarse, fine, p_c, p_f) = pullout_pair(1, &PULLOUT, &[[1.0, 0.0]]);
        let like = bfem_likelihood(&coarse, &fine, &p_c, &p_f, 1e-3).unwrap();
        assert_relative_eq!(like.mean[0], 0.519741564967696, epsilon = 1e-12);
        assert_relative_eq!(like.sigma_u, 1.612050813354988, epsilon = 1e-12);
        assert_relative_eq!(like.cov[(0, 0)], 271_500.0 / 3_775_030.0, epsilon = 1e-12);
    }

    #[test]
    fn mean_equals_fem_prediction_for_every_theta() {
        for (ea, k) in [(0.5, 50.0), (0.8, 70.0), (1.3, 120.0)] {
            let mat = MaterialParams1D { ea, k, f: 10.0 };
            let (coarse, fine, p_c, p_f) = pullout_pair(4, &mat, &[[1.0, 0.0]]);
            let like = bfem_likelihood(&coarse, &fine, &p_c, &p_f, 1e-3).unwrap();
            let w = coarse.solve().unwrap();
            let fem = crate::fem::evaluate_solution(&coarse, &w, &[[1.0, 0.0]]).unwrap();
            assert_relative_eq!(like.mean[0], fem[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn log_likelihood_examples_and_dense_oracle() {
        // y = mean, cov = 0, σ_e = 1, m = 1 → −0.5 log 2π.
        let like = BfemLikelihood {
            mean: DVector::from_element(1, 0.3),
            cov: DMatrix::zeros(1, 1),
            sigma_u: 0.0,
            sigma_e: 1.0,
        };
        let y = DVector::from_element(1, 0.3);
        assert_relative_eq!(
            bfem_log_likelihood(&y, &like).unwrap(),
            -0.5 * (2.0 * std::f64::consts::PI).ln(),
            epsilon = 1e-15
        );

        // Scalar case with y − mean = σ and total variance σ².
        let sigma = 0.7;
        let like = BfemLikelihood {
            mean: DVector::from_element(1, 1.0),
            cov: DMatrix::zeros(1, 1),
            sigma_u: 0.0,
            sigma_e: sigma,
        };
        let y = DVector::from_element(1, 1.0 + sigma);
        assert_relative_eq!(
            bfem_log_likelihood(&y, &like).unwrap(),
            -0.5 * (2.0 * std::f64::consts::PI * sigma * sigma).ln() - 0.5,
            epsilon = 1e-14
        );
    }

    #[test]
    fn zero_covariance_matches_fem_likelihood_bitwise() {
        // With cov = 0 the BFEM log-likelihood must equal the plain FEM
        // Gaussian log-likelihood exactly — both run through `mvn_logpdf`.
        let mesh = generate_interval_mesh(1.0, 4).unwrap();
        let system = assemble_bar(&mesh, &PULLOUT).unwrap();
        let op = observation_matrix(&mesh, &[[0.5, 0.0], [1.0, 0.0]]).unwrap();
        let w = system.solve().unwrap();
        let (phi, offset) = system.observation_parts(&op);
        let mean = &phi * &w + offset;
        let sigma_e = 1e-3;

        let like = BfemLikelihood {
            mean: mean.clone(),
            cov: DMatrix::zeros(2, 2),
            sigma_u: 0.0,
            sigma_e,
        };
        let y = DVector::from_column_slice(&[0.6, 1.4]);
        let fem = crate::fem::fem_log_likelihood(&system, &op, &y, sigma_e).unwrap();
        let bfem = bfem_log_likelihood(&y, &like).unwrap();
        assert_eq!(bfem, fem);
    }

    #[test]
    fn scale_equivariance_in_the_load() {
        let points = [[0.5, 0.0], [1.0, 0.0]];
        let (c1, f1, pc1, pf1) = pullout_pair(4, &PULLOUT, &points);
        let scaled = MaterialParams1D { f: 100.0, ..PULLOUT };
        let (c10, f10, pc10, pf10) = pullout_pair(4, &scaled, &points);
        let base = bfem_likelihood(&c1, &f1, &pc1, &pf1, 1e-3).unwrap();
        let big = bfem_likelihood(&c10, &f10, &pc10, &pf10, 1e-3).unwrap();
        assert_relative_eq!(big.sigma_u, 10.0 * base.sigma_u, epsilon = 1e-12);
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(
                    big.cov[(i, j)],
                    100.0 * base.cov[(i, j)],
                    epsilon = 1e-12,
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn refinement_shrinks_uncertainty() {
        let points = [[0.25, 0.0], [0.5, 0.0], [1.0, 0.0]];
        let trace_at = |n: usize| {
            let (coarse, fine, p_c, p_f) = pullout_pair(n, &PULLOUT, &points);
            let like = bfem_likelihood(&coarse, &fine, &p_c, &p_f, 1e-3).unwrap();
            like.cov.trace()
        };
        // h = 1 leaves the ν ≈ 9.35 boundary layer unresolved, so the error
        // estimate legitimately grows on the first refinement…
        assert!(trace_at(1) < trace_at(2));
        // …and shrinks monotonically once the layer is resolved.
        let mut last = trace_at(2);
        for n in [4usize, 8, 16, 32, 64] {
            let trace = trace_at(n);
            assert!(
                trace < last,
                "trace grew from {last} to {trace} at n = {n}"
            );
            last = trace;
        }
    }

    #[test]
    fn nesting_gives_psd_covariance_before_clipping() {
        let points = [[0.25, 0.0], [0.5, 0.0], [1.0, 0.0]];
        for (ea, k) in [(0.5, 50.0), (0.8, 70.0), (1.2, 90.0), (2.0, 200.0)] {
            let mat = MaterialParams1D { ea, k, f: 10.0 };
            let (coarse, fine, p_c, p_f) = pullout_pair(4, &mat, &points);
            // Raw (unclipped) covariance recomputed from the public pieces.
            let gram_c = observation_gram(&coarse, &p_c).unwrap();
            let gram_f = observation_gram(&fine, &p_f).unwrap();
            let raw = gram_f - gram_c;
            let sym = 0.5 * (&raw + raw.transpose());
            let eigs = sym.symmetric_eigenvalues();
            let min = eigs.min();
            let trace = sym.trace();
            assert!(
                min >= -1e-10 * trace,
                "min eigenvalue {min} below −1e-10·trace {trace}"
            );
        }
    }

    #[test]
    fn rejects_mismatched_observations_and_non_nested_meshes() {
        let (coarse, fine, p_c, _) = pullout_pair(2, &PULLOUT, &[[1.0, 0.0]]);
        let p_other = observation_matrix(&fine.mesh, &[[0.5, 0.0]]).unwrap();
        assert!(matches!(
            bfem_likelihood(&coarse, &fine, &p_c, &p_other, 1e-3),
            Err(Error::ObservationMismatch(_))
        ));

        // A directly assembled h = 1/3 mesh shares no interior nodes with
        // the h = 1/2 coarse mesh.
        let coarse2 = assemble_bar(&generate_interval_mesh(1.0, 2).unwrap(), &PULLOUT).unwrap();
        let thirds: Mesh = generate_interval_mesh(1.0, 3).unwrap();
        let p_c2 = observation_matrix(&coarse2.mesh, &[[1.0, 0.0]]).unwrap();
        let p_t = observation_matrix(&thirds, &[[1.0, 0.0]]).unwrap();
        let not_nested = assemble_bar(&thirds, &PULLOUT).unwrap();
        assert!(matches!(
            bfem_likelihood(&coarse2, &not_nested, &p_c2, &p_t, 1e-3),
            Err(Error::NonNestedMeshes(_))
        ));

        assert!(matches!(
            bfem_likelihood(&coarse, &fine, &p_c, &p_c, 0.0),
            Err(Error::InvalidParameter(_))
        ));
    }
}
