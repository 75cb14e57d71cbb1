//! RM-FEM pseudomarginal likelihood: the marginal likelihood over random
//! mesh perturbations `x̃_i = x_i + h_i^p α_i` is approximated by averaging
//! `M` plain FEM likelihoods on independently perturbed meshes (Monte Carlo
//! within Metropolis).

use std::collections::BTreeSet;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::fem::{fem_log_likelihood, observation_matrix, LinearSystem};
use crate::mesh::{perturb_mesh_with, Mesh, PerturbConfig};
use crate::{Error, Result};

/// Settings of the pseudomarginal estimator. Fresh perturbations are drawn
/// on every call — both the proposed and the current state are re-estimated
/// each Metropolis step.
#[derive(Debug, Clone)]
pub struct PseudomarginalConfig {
    /// Replica count `M`.
    pub m: usize,
    /// Node perturbation law (`p`, ball radius, retry budget).
    pub perturb: PerturbConfig,
}

impl Default for PseudomarginalConfig {
    fn default() -> Self {
        PseudomarginalConfig {
            m: 100,
            perturb: PerturbConfig::default(),
        }
    }
}

/// `log Σ exp(vᵢ)` computed stably; `-∞` for an empty slice.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// FEM Gaussian log-likelihood `log N(y; P ũ_h, σ_e² I)` on one perturbed
/// mesh: assembles the system with `assemble`, solves, and observes at
/// `points` (which must coincide with unperturbed nodes or stay inside the
/// perturbed mesh).
///
/// # Errors
/// Propagates assembly, solver, and observation errors.
pub fn rmfem_replica_log_likelihood<F>(
    assemble: &F,
    mesh: &Mesh,
    points: &[[f64; 2]],
    y: &DVector<f64>,
    sigma_e: f64,
) -> Result<f64>
where
    F: Fn(&Mesh) -> Result<LinearSystem>,
{
    let system = assemble(mesh)?;
    let op = observation_matrix(&system.mesh, points)?;
    fem_log_likelihood(&system, &op, y, sigma_e)
}

/// Pseudomarginal log-likelihood: `logsumexp` of the replica values minus
/// the log replica count. The `M` perturbation seeds are drawn sequentially
/// from `rng` (so the estimate is reproducible for a fixed generator state)
/// and the replicas are evaluated in parallel in deterministic order.
///
/// Replicas whose perturbation keeps inverting elements are dropped and the
/// average is taken over the survivors; the second return value counts the
/// drops.
///
/// # Errors
/// [`Error::LikelihoodEvaluation`] when every replica fails perturbation;
/// any other replica error (assembly, solve, observation) aborts.
#[allow(clippy::too_many_arguments)]
pub fn pseudomarginal_log_likelihood<F>(
    base: &Mesh,
    fixed_nodes: &BTreeSet<usize>,
    config: &PseudomarginalConfig,
    assemble: &F,
    points: &[[f64; 2]],
    y: &DVector<f64>,
    sigma_e: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, usize)>
where
    F: Fn(&Mesh) -> Result<LinearSystem> + Sync,
{
    if config.m == 0 {
        return Err(Error::InvalidParameter(
            "pseudomarginal replica count M must be at least 1".into(),
        ));
    }
    let seeds: Vec<u64> = (0..config.m).map(|_| rng.random()).collect();
    let results: Vec<Result<f64>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut replica_rng = ChaCha8Rng::seed_from_u64(seed);
            let mesh = perturb_mesh_with(base, &config.perturb, fixed_nodes, &mut replica_rng)?;
            rmfem_replica_log_likelihood(assemble, &mesh, points, y, sigma_e)
        })
        .collect();

    let mut values = Vec::with_capacity(config.m);
    let mut dropped = 0usize;
    for result in results {
        match result {
            Ok(v) => values.push(v),
            Err(Error::PerturbationFailed { .. }) => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    if values.is_empty() {
        return Err(Error::LikelihoodEvaluation(format!(
            "all {} replicas failed mesh perturbation",
            config.m
        )));
    }
    Ok((logsumexp(&values) - (values.len() as f64).ln(), dropped))
}
