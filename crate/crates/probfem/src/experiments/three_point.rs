//! The 2D three-point-bending benchmark: a beam on two stiff support tabs,
//! loaded by a prescribed midspan displacement, with a rounded-square hole
//! at an unknown location. Infers the hole parameters `(x, y, d, α, r)`
//! from 48 boundary displacement observations (24 sensors × 2 components).

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Method;
use crate::bfem::{bfem_likelihood, bfem_log_likelihood};
use crate::fem::{
    assemble_elasticity_with_moduli, element_moduli, fem_log_likelihood, observation_matrix,
    DirichletBc, LinearSystem, MaterialParams2D,
};
use crate::geometry::{hole_admissible, triangulate_beam, BeamGeometry, HoleParams};
use crate::inference::{Distribution, LogLikelihood, PriorSpec};
use crate::mesh::{refine_hierarchical, Mesh, PerturbConfig};
use crate::rmfem::{pseudomarginal_log_likelihood, PseudomarginalConfig};
use crate::statfem::{statfem_log_likelihood, StatfemHyperparams};
use crate::{Error, Result};

/// Young's modulus of the beam (Pa): 30 GPa, typical of concrete.
pub const E_BEAM: f64 = 30e9;

/// Poisson ratio of beam and supports.
pub const NU: f64 = 0.2;

/// Young's modulus of the stiff support tabs (Pa): 10⁶ GPa.
pub const E_SUPPORT: f64 = 1e15;

/// Prescribed downward midspan displacement (m).
pub const LOAD_W: f64 = 0.01;

/// The benchmark material set.
pub fn material() -> MaterialParams2D {
    MaterialParams2D {
        e: E_BEAM,
        nu: NU,
        e_support: E_SUPPORT,
        w: LOAD_W,
    }
}

/// The ground-truth hole as a parameter vector `[x, y, d, alpha, r]`.
pub fn ground_truth_vector() -> [f64; 5] {
    let hole = HoleParams::ground_truth();
    [hole.x, hole.y, hole.d, hole.alpha, hole.r]
}

/// Decodes a parameter vector prefix into hole parameters.
pub fn hole_from(theta: &[f64]) -> HoleParams {
    HoleParams {
        x: theta[0],
        y: theta[1],
        d: theta[2],
        alpha: theta[3],
        r: theta[4],
    }
}

/// The 24 sensor coordinates of the default beam.
pub fn sensors() -> Vec<[f64; 2]> {
    BeamGeometry::default().sensor_positions()
}

/// Dirichlet constraints of the bending problem: both displacement
/// components clamped along the support-tab bottoms, and the vertical
/// component prescribed to `−w` at the midspan load node. The mesher
/// guarantees exact nodes at all of these locations.
///
/// # Errors
/// [`Error::InvalidMesh`] when the mesh carries no support-bottom nodes or
/// no node at the load point.
pub fn dirichlet_bcs(mesh: &Mesh, beam: &BeamGeometry, w: f64) -> Result<Vec<DirichletBc>> {
    let bottom = -beam.support_height;
    let mut bcs = Vec::new();
    for (node, p) in mesh.nodes.iter().enumerate() {
        if (p[1] - bottom).abs() < 1e-9 {
            bcs.push((node, 0, 0.0));
            bcs.push((node, 1, 0.0));
        }
    }
    if bcs.is_empty() {
        return Err(Error::InvalidMesh(
            "mesh has no nodes on the support bottoms".into(),
        ));
    }
    let (load_node, dist) = mesh.nearest_node(beam.load_point());
    if dist > 1e-9 {
        return Err(Error::InvalidMesh(format!(
            "mesh has no node at the load point (nearest is {dist:e} away)"
        )));
    }
    bcs.push((load_node, 1, -w));
    Ok(bcs)
}

/// Meshes the beam with the given hole and assembles the constrained
/// plane-stress system.
///
/// # Errors
/// Geometry errors ([`Error::InadmissibleHole`],
/// [`Error::TriangulationFailed`]) and assembly errors propagate.
pub fn forward_system(
    beam: &BeamGeometry,
    hole: &HoleParams,
    h: f64,
    mat: &MaterialParams2D,
) -> Result<LinearSystem> {
    let mesh = triangulate_beam(beam, hole, h)?;
    let bcs = dirichlet_bcs(&mesh, beam, mat.w)?;
    let moduli = element_moduli(&mesh, mat)?;
    assemble_elasticity_with_moduli(&mesh, mat, &moduli, &bcs)
}

/// Synthesizes the 48 sensor observations: a fine-mesh (`data_h`) solve with
/// the ground-truth hole plus i.i.d. `N(0, σ_e²)` noise from `seed`.
///
/// # Errors
/// Forward-model errors propagate.
pub fn observations(truth: &[f64], sigma_e: f64, data_h: f64, seed: u64) -> Result<DVector<f64>> {
    let beam = BeamGeometry::default();
    let hole = hole_from(truth);
    let system = forward_system(&beam, &hole, data_h, &material())?;
    let w = system.solve()?;
    let full = system.full_field(&w);
    let op = observation_matrix(&system.mesh, &beam.sensor_positions())?;
    let mut y = op.apply(&full);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in y.iter_mut() {
        let z: f64 = rand::Rng::sample(&mut rng, StandardNormal);
        *v += sigma_e * z;
    }
    Ok(y)
}

/// The three-point prior: independent uniforms
/// `x ~ U(0,5)`, `y ~ U(0,1)`, `d ~ U(0,0.5)`, `α ~ U(0,2π)`, `r ~ U(0,0.5)`,
/// conditioned on the hole being fully enclosed by the beam. For statFEM the
/// hyperparameters are appended with `ρ ~ LN(0, 0.5²)`,
/// `ℓ_d ~ LN(log 0.5, 0.5²)` (the sensor spacing `h_m`) and
/// `σ_d ~ LN(log σ_e, 1²)`.
///
/// # Errors
/// [`Error::InvalidParameter`] for a non-positive `σ_e` under statFEM.
pub fn prior(method: Method, sigma_e: f64) -> Result<PriorSpec> {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut params = vec![
        ("x", Distribution::Uniform { a: 0.0, b: 5.0 }),
        ("y", Distribution::Uniform { a: 0.0, b: 1.0 }),
        ("d", Distribution::Uniform { a: 0.0, b: 0.5 }),
        ("alpha", Distribution::Uniform { a: 0.0, b: two_pi }),
        ("r", Distribution::Uniform { a: 0.0, b: 0.5 }),
    ];
    if method == Method::Statfem {
        params.push(("rho", Distribution::LogNormal { mu: 0.0, sigma: 0.5 }));
        params.push((
            "ell_d",
            Distribution::LogNormal {
                mu: 0.5f64.ln(),
                sigma: 0.5,
            },
        ));
        params.push((
            "sigma_d",
            Distribution::LogNormal {
                mu: sigma_e.ln(),
                sigma: 1.0,
            },
        ));
    }
    let beam = BeamGeometry::default();
    Ok(PriorSpec::new(params)?.with_admissibility(Arc::new(move |theta: &[f64]| {
        theta[2] > 0.0 && hole_admissible(&hole_from(theta), &beam)
    })))
}

/// The three-point likelihood under a chosen method. Every evaluation
/// re-meshes the beam for the proposed hole; mesh-quality failures surface
/// as recoverable errors that reject the proposal.
pub struct ThreePointLikelihood {
    method: Method,
    beam: BeamGeometry,
    mat: MaterialParams2D,
    sensors: Vec<[f64; 2]>,
    h: f64,
    y: DVector<f64>,
    sigma_e: f64,
    pseudomarginal: PseudomarginalConfig,
}

impl ThreePointLikelihood {
    /// Builds the likelihood for observation-mesh size `h`.
    ///
    /// # Errors
    /// [`Error::Config`] for a non-positive mesh size.
    pub fn new(
        method: Method,
        h: f64,
        y: DVector<f64>,
        sigma_e: f64,
        replicas: usize,
    ) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Config(format!(
                "three-point mesh size must be positive, got {h}"
            )));
        }
        let beam = BeamGeometry::default();
        let sensors = beam.sensor_positions();
        Ok(ThreePointLikelihood {
            method,
            beam,
            mat: material(),
            sensors,
            h,
            y,
            sigma_e,
            pseudomarginal: PseudomarginalConfig {
                m: replicas,
                perturb: PerturbConfig::default(),
            },
        })
    }
}

impl LogLikelihood for ThreePointLikelihood {
    fn log_likelihood(&self, theta: &[f64], rng: &mut ChaCha8Rng) -> Result<f64> {
        let hole = hole_from(theta);
        match self.method {
            Method::Exact => Err(Error::Config(
                "the three-point problem has no closed-form solution".into(),
            )),
            Method::Fem => {
                let system = forward_system(&self.beam, &hole, self.h, &self.mat)?;
                let op = observation_matrix(&system.mesh, &self.sensors)?;
                fem_log_likelihood(&system, &op, &self.y, self.sigma_e)
            }
            Method::Bfem => {
                let coarse_mesh = triangulate_beam(&self.beam, &hole, self.h)?;
                let coarse_moduli = element_moduli(&coarse_mesh, &self.mat)?;
                let coarse_bcs = dirichlet_bcs(&coarse_mesh, &self.beam, self.mat.w)?;
                let coarse = assemble_elasticity_with_moduli(
                    &coarse_mesh,
                    &self.mat,
                    &coarse_moduli,
                    &coarse_bcs,
                )?;
                let map = refine_hierarchical(&coarse_mesh)?;
                let fine_moduli = crate::fem::inherit_moduli(&map, &coarse_moduli);
                let fine_bcs = dirichlet_bcs(&map.fine, &self.beam, self.mat.w)?;
                let fine = assemble_elasticity_with_moduli(
                    &map.fine,
                    &self.mat,
                    &fine_moduli,
                    &fine_bcs,
                )?;
                let p_coarse = observation_matrix(&coarse_mesh, &self.sensors)?;
                let p_fine = observation_matrix(&map.fine, &self.sensors)?;
                let like = bfem_likelihood(&coarse, &fine, &p_coarse, &p_fine, self.sigma_e)?;
                bfem_log_likelihood(&self.y, &like)
            }
            Method::Rmfem => {
                // The base mesh fixes the material field and constraint set:
                // perturbation preserves connectivity, keeps clamped nodes on
                // their facets, and leaves sensor and load nodes untouched,
                // so both carry over to every replica.
                let base = triangulate_beam(&self.beam, &hole, self.h)?;
                let moduli = element_moduli(&base, &self.mat)?;
                let bcs = dirichlet_bcs(&base, &self.beam, self.mat.w)?;
                let mut fixed = BTreeSet::new();
                for point in self
                    .sensors
                    .iter()
                    .copied()
                    .chain([self.beam.load_point()])
                {
                    let (node, dist) = base.nearest_node(point);
                    if dist > 1e-9 {
                        return Err(Error::InvalidMesh(format!(
                            "mesh has no node at observation point {point:?}"
                        )));
                    }
                    fixed.insert(node);
                }
                let assemble = |mesh: &Mesh| {
                    assemble_elasticity_with_moduli(mesh, &self.mat, &moduli, &bcs)
                };
                let (value, _dropped) = pseudomarginal_log_likelihood(
                    &base,
                    &fixed,
                    &self.pseudomarginal,
                    &assemble,
                    &self.sensors,
                    &self.y,
                    self.sigma_e,
                    rng,
                )?;
                Ok(value)
            }
            Method::Statfem => {
                let eta = StatfemHyperparams {
                    rho: theta[5],
                    ell_d: theta[6],
                    sigma_d: theta[7],
                };
                let system = forward_system(&self.beam, &hole, self.h, &self.mat)?;
                let op = observation_matrix(&system.mesh, &self.sensors)?;
                statfem_log_likelihood(&system, &op, &eta, &self.y, self.sigma_e)
            }
        }
    }

    fn is_stochastic(&self) -> bool {
        self.method == Method::Rmfem
    }
}
