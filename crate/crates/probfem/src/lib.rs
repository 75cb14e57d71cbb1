//! Probabilistic finite elements for Bayesian inverse problems.
//!
//! This crate solves linear elasticity inverse problems while accounting for
//! finite element discretization error through three competing likelihood
//! models:
//!
//! * **BFEM** ([`bfem`]) — a Bayesian reinterpretation of the finite element
//!   method whose posterior mean is the ordinary FEM solution and whose
//!   covariance captures the discretization error via a hierarchically
//!   refined reference mesh.
//! * **RM-FEM** ([`rmfem`]) — a random-mesh approach that perturbs node
//!   locations to induce a distribution over FEM solutions, integrated into
//!   MCMC as a pseudomarginal (Monte Carlo within Metropolis) likelihood.
//! * **statFEM** ([`statfem`]) — a statistical observation model that adds a
//!   scaling factor and a Gaussian-process misspecification component to the
//!   likelihood, with hyperparameters inferred jointly.
//!
//! Two benchmark problems exercise the machinery end to end (see
//! [`experiments`]): a 1D bar-pullout problem with a closed-form solution and
//! a 2D plane-stress three-point bending test where the unknown is a
//! rounded-square hole in the beam.
//!
//! The building blocks are deliberately small and composable: simplicial
//! meshes ([`mesh`]), parametric hole geometry and triangulation
//! ([`geometry`]), linear-element assembly and direct solves ([`fem`]), and a
//! tempered adaptive random-walk Metropolis sampler ([`inference`]).

// `!(x > 0.0)` in validation code is deliberate: unlike `x <= 0.0` it also
// rejects NaN. Index loops in the numeric kernels mirror the matrix algebra
// they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod bfem;
pub mod fem;
pub mod geometry;
pub mod inference;
pub mod linalg;
pub mod mesh;
pub mod rmfem;
pub mod statfem;

pub mod experiments;

#[cfg(doctest)]
mod book;

use thiserror::Error;

/// Unified error type for all probfem operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// A mesh failed validation (inverted/degenerate elements, bad indices).
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    /// Node perturbation kept producing inverted elements after all retries.
    #[error("mesh perturbation failed after {attempts} attempts: {reason}")]
    PerturbationFailed { attempts: usize, reason: String },
    /// The triangulator could not meet its quality targets.
    #[error("triangulation failed: {0}")]
    TriangulationFailed(String),
    /// The requested hole cannot be meshed (intersects the beam boundary).
    #[error("hole is not admissible: {0}")]
    InadmissibleHole(String),
    /// The assembled system is singular (e.g. rigid-body modes remain).
    #[error("singular system: {0}")]
    SingularSystem(String),
    /// A symmetric factorization hit a non-positive pivot.
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    /// An evaluation point lies outside the mesh.
    #[error("point ({0}, {1}) lies outside the domain")]
    PointOutsideDomain(f64, f64),
    /// A quantity that must be nonnegative (e.g. f'u for SPD K) was negative.
    #[error("negative energy f'u = {0}; assembly is not SPD")]
    NegativeEnergy(f64),
    /// Observation operators passed to a likelihood disagree.
    #[error("observation mismatch: {0}")]
    ObservationMismatch(String),
    /// The BFEM reference space is not nested in the coarse space.
    #[error("meshes are not nested: {0}")]
    NonNestedMeshes(String),
    /// A likelihood evaluation failed (e.g. every pseudomarginal replica died).
    #[error("likelihood evaluation failed: {0}")]
    LikelihoodEvaluation(String),
    /// The sampler could not find an in-support starting point.
    #[error("chain initialization failed: {0}")]
    ChainInit(String),
    /// A configuration file or value is malformed.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// Malformed mesh file or unsupported format feature.
    #[error("mesh format error: {0}")]
    MeshFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
