//! Finite element assembly and solution for the two benchmark problems:
//! the 1D pullout bar on an elastic foundation and 2D plane-stress
//! elasticity on the three-point bending beam.
//!
//! Linear (hat / constant-strain triangle) elements throughout. Dirichlet
//! data is imposed by a lifting construction: the system is assembled over
//! free unknowns only, and the load vector gains `-K_ic û_c` from the lifted
//! boundary values. Observation operators evaluate the displacement field at
//! arbitrary interior points as sparse combinations of nodal values.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::linalg::{relative_residual, Factor, SymmetricSparse};
use crate::mesh::{Mesh, RefinementMap};
use crate::{Error, Result};

/// Material and loading data for the pullout bar on `[0, 1]`.
///
/// Governing equation: `-(EA u')' + k u = 0` with `u'(0) = 0` natural and
/// `EA u'(1) = F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams1D {
    /// Axial stiffness `EA` (N); must be positive.
    pub ea: f64,
    /// Foundation stiffness `k` (N/m²); must be positive (zero leaves a
    /// rigid-body mode because both ends carry Neumann data).
    pub k: f64,
    /// End load `F` (N) applied at `x = 1`.
    pub f: f64,
}

/// Material data for the plane-stress beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams2D {
    /// Young's modulus of the beam material (Pa).
    pub e: f64,
    /// Poisson ratio, shared by beam and supports; in `[0, 0.5)`.
    pub nu: f64,
    /// Young's modulus of the stiff support tabs (Pa).
    pub e_support: f64,
    /// Prescribed downward midspan displacement magnitude (m).
    pub w: f64,
}

/// Mapping from (node, component) pairs to free unknowns or fixed values.
#[derive(Debug, Clone)]
pub struct DofMap {
    /// Displacement components per node: 1 for the bar, 2 for elasticity.
    pub dofs_per_node: usize,
    /// For each global slot `node * dofs_per_node + component`: `Some(i)` if
    /// it is the `i`-th free unknown, `None` if constrained.
    free_index: Vec<Option<usize>>,
    n_free: usize,
}

impl DofMap {
    /// Builds a map with the given constrained slots.
    pub fn new(n_nodes: usize, dofs_per_node: usize, fixed_slots: &[usize]) -> Self {
        let total = n_nodes * dofs_per_node;
        let mut free_index = vec![Some(0usize); total];
        for &s in fixed_slots {
            assert!(s < total, "fixed slot out of range");
            free_index[s] = None;
        }
        let mut n_free = 0;
        for slot in free_index.iter_mut() {
            if slot.is_some() {
                *slot = Some(n_free);
                n_free += 1;
            }
        }
        DofMap {
            dofs_per_node,
            free_index,
            n_free,
        }
    }

    /// Number of free unknowns.
    pub fn n_free(&self) -> usize {
        self.n_free
    }

    /// Total number of displacement slots (free plus fixed).
    pub fn n_total(&self) -> usize {
        self.free_index.len()
    }

    /// Free-unknown index of `(node, component)`, or `None` if constrained.
    pub fn free_of(&self, node: usize, component: usize) -> Option<usize> {
        self.free_index[node * self.dofs_per_node + component]
    }

    /// Scatters free coefficients onto the full displacement vector `base`
    /// (which already carries the lifting values at constrained slots).
    pub fn scatter(&self, w: &DVector<f64>, base: &DVector<f64>) -> DVector<f64> {
        assert_eq!(w.len(), self.n_free);
        assert_eq!(base.len(), self.free_index.len());
        let mut full = base.clone();
        for (slot, idx) in self.free_index.iter().enumerate() {
            if let Some(i) = *idx {
                full[slot] += w[i];
            }
        }
        full
    }
}

/// A Dirichlet constraint: `(node, component, prescribed value)`.
pub type DirichletBc = (usize, usize, f64);

/// An assembled linear system `K w = f` over free unknowns, together with
/// the mesh, dof bookkeeping, and the lifting field carrying Dirichlet data.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    /// The mesh the system was assembled on.
    pub mesh: Mesh,
    /// Symmetric positive definite stiffness over free unknowns.
    pub stiffness: SymmetricSparse,
    /// Load vector over free unknowns (includes `-K_ic û_c` lifting terms).
    pub load: DVector<f64>,
    /// Node/component to unknown bookkeeping.
    pub dof_map: DofMap,
    /// Full-length nodal vector: prescribed values at fixed slots, zero at
    /// free slots. The FEM field is `lifting + scatter(w)`.
    pub lifting: DVector<f64>,
}

impl LinearSystem {
    /// Number of free unknowns.
    pub fn n_free(&self) -> usize {
        self.dof_map.n_free()
    }

    /// Factorizes the stiffness matrix for repeated solves.
    pub fn factorize(&self) -> Result<Factor> {
        self.stiffness.factorize()
    }

    /// Solves `K w = f` and verifies the relative residual is below `1e-10`
    /// (one step of iterative refinement is applied if needed).
    pub fn solve(&self) -> Result<DVector<f64>> {
        self.solve_with(&self.factorize()?)
    }

    /// Like [`LinearSystem::solve`] but reusing an existing factorization.
    pub fn solve_with(&self, factor: &Factor) -> Result<DVector<f64>> {
        let mut w = factor.solve(&self.load);
        let mut res = relative_residual(&self.stiffness, &w, &self.load);
        if res > 1e-10 {
            let r = &self.load - self.stiffness.mul_vec(&w);
            w += factor.solve(&r);
            res = relative_residual(&self.stiffness, &w, &self.load);
            if res > 1e-10 {
                return Err(Error::SingularSystem(format!(
                    "solution residual {res:e} exceeds 1e-10 after refinement"
                )));
            }
        }
        Ok(w)
    }

    /// Full nodal displacement vector `lifting + scatter(w)`.
    pub fn full_field(&self, w: &DVector<f64>) -> DVector<f64> {
        self.dof_map.scatter(w, &self.lifting)
    }

    /// Splits an observation operator into its action on free unknowns and
    /// the constant offset contributed by the lifting:
    /// `observed = phi_free · w + offset`.
    pub fn observation_parts(&self, op: &ObservationOperator) -> (DMatrix<f64>, DVector<f64>) {
        let m = op.matrix.nrows();
        let mut phi = DMatrix::zeros(m, self.dof_map.n_free());
        for (slot, idx) in self.dof_map.free_index.iter().enumerate() {
            if let Some(i) = *idx {
                phi.set_column(i, &op.matrix.column(slot));
            }
        }
        let offset = &op.matrix * &self.lifting;
        (phi, offset)
    }
}

/// Pointwise evaluation of the FEM field at a fixed set of points, as a
/// matrix acting on the full nodal vector (all components, free and fixed).
#[derive(Debug, Clone)]
pub struct ObservationOperator {
    /// The observation points (1D meshes use only the first coordinate).
    pub points: Vec<[f64; 2]>,
    /// `(m · dofs_per_node) × (n_nodes · dofs_per_node)` shape-function
    /// evaluation matrix; 2D rows interleave the x and y components of each
    /// point. Rows are compactly supported (at most 3 nodes).
    pub matrix: DMatrix<f64>,
}

impl ObservationOperator {
    /// Applies the operator to a full nodal vector.
    pub fn apply(&self, full_field: &DVector<f64>) -> DVector<f64> {
        &self.matrix * full_field
    }
}

/// Assembles the pullout bar: per-element stiffness
/// `EA/h·[[1,-1],[-1,1]] + k·h/6·[[2,1],[1,2]]` and load `F` at the right
/// end node. Both ends carry natural boundary data, so no dofs are fixed.
///
/// # Errors
/// [`Error::InvalidParameter`] for non-positive `EA` or negative `k`;
/// [`Error::SingularSystem`] for `k = 0` (rigid-body mode).
pub fn assemble_bar(mesh: &Mesh, mat: &MaterialParams1D) -> Result<LinearSystem> {
    if !(mat.ea > 0.0) || !mat.ea.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "EA must be positive and finite, got {}",
            mat.ea
        )));
    }
    if !(mat.k >= 0.0) || !mat.k.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "k must be nonnegative and finite, got {}",
            mat.k
        )));
    }
    if mat.k == 0.0 {
        return Err(Error::SingularSystem(
            "k = 0 leaves a rigid-body translation (both ends are Neumann)".into(),
        ));
    }
    let segments = mesh.segments()?;
    let dof_map = DofMap::new(mesh.n_nodes(), 1, &[]);
    let mut stiffness = SymmetricSparse::new(dof_map.n_free());
    let mut load = DVector::zeros(dof_map.n_free());
    for seg in segments {
        let [a, b] = *seg;
        let h = (mesh.nodes[b][0] - mesh.nodes[a][0]).abs();
        let ke_ax = mat.ea / h;
        let ke_fo = mat.k * h / 6.0;
        let k_local = [
            [ke_ax + 2.0 * ke_fo, -ke_ax + ke_fo],
            [-ke_ax + ke_fo, ke_ax + 2.0 * ke_fo],
        ];
        let dofs = [a, b];
        for (la, &ga) in dofs.iter().enumerate() {
            for (lb, &gb) in dofs.iter().enumerate() {
                if ga <= gb {
                    stiffness.add(ga, gb, k_local[la][lb]);
                }
            }
        }
    }
    // Right end: the node with the largest coordinate.
    let right = (0..mesh.n_nodes())
        .max_by(|&a, &b| mesh.nodes[a][0].total_cmp(&mesh.nodes[b][0]))
        .expect("nonempty mesh");
    load[right] += mat.f;
    Ok(LinearSystem {
        mesh: mesh.clone(),
        stiffness,
        load,
        dof_map,
        lifting: DVector::zeros(mesh.n_nodes()),
    })
}

/// Per-element Young's moduli for the beam: `e_support` where the element
/// centroid lies in a support tab (below `y = 0`), `e` elsewhere.
pub fn element_moduli(mesh: &Mesh, mat: &MaterialParams2D) -> Result<Vec<f64>> {
    let triangles = mesh.triangles()?;
    Ok(triangles
        .iter()
        .map(|tri| {
            let cy = tri.iter().map(|&v| mesh.nodes[v][1]).sum::<f64>() / 3.0;
            if cy < 0.0 {
                mat.e_support
            } else {
                mat.e
            }
        })
        .collect())
}

/// Propagates per-element moduli from a parent mesh to its hierarchical
/// refinement: every child element inherits the parent's modulus, so coarse
/// and fine systems discretize the same piecewise-constant material field.
pub fn inherit_moduli(map: &RefinementMap, coarse_moduli: &[f64]) -> Vec<f64> {
    assert_eq!(coarse_moduli.len(), map.n_parents());
    let mut fine = vec![0.0; map.fine.n_elements()];
    for (parent, &m) in coarse_moduli.iter().enumerate() {
        for &child in map.children(parent) {
            fine[child] = m;
        }
    }
    fine
}

/// Plane-stress constitutive matrix for modulus `e` and Poisson ratio `nu`.
fn plane_stress_c(e: f64, nu: f64) -> [[f64; 3]; 3] {
    let c = e / (1.0 - nu * nu);
    [
        [c, c * nu, 0.0],
        [c * nu, c, 0.0],
        [0.0, 0.0, c * (1.0 - nu) / 2.0],
    ]
}

/// Strain-displacement matrix (3×6) and area of a triangle.
fn triangle_b_matrix(mesh: &Mesh, tri: &[usize; 3]) -> ([[f64; 6]; 3], f64) {
    let p: Vec<[f64; 2]> = tri.iter().map(|&v| mesh.nodes[v]).collect();
    let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut b = [[0.0; 6]; 3];
    for i in 0..3 {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        let bi = (p[j][1] - p[k][1]) / area2;
        let ci = (p[k][0] - p[j][0]) / area2;
        b[0][2 * i] = bi;
        b[1][2 * i + 1] = ci;
        b[2][2 * i] = ci;
        b[2][2 * i + 1] = bi;
    }
    (b, area2 / 2.0)
}

/// 6×6 constant-strain-triangle stiffness `area · Bᵀ C B` (one-point
/// quadrature, exact for linear elements).
fn cst_stiffness(mesh: &Mesh, tri: &[usize; 3], modulus: f64, nu: f64) -> [[f64; 6]; 6] {
    let (b, area) = triangle_b_matrix(mesh, tri);
    let c = plane_stress_c(modulus, nu);
    let mut cb = [[0.0; 6]; 3];
    for r in 0..3 {
        for col in 0..6 {
            cb[r][col] = (0..3).map(|s| c[r][s] * b[s][col]).sum();
        }
    }
    let mut k = [[0.0; 6]; 6];
    for r in 0..6 {
        for col in 0..6 {
            k[r][col] = area * (0..3).map(|s| b[s][r] * cb[s][col]).sum::<f64>();
        }
    }
    k
}

/// Stress `(σxx, σyy, σxy)` in element `e` for a full nodal displacement
/// vector (constant per element).
pub fn element_stress(
    mesh: &Mesh,
    e: usize,
    modulus: f64,
    nu: f64,
    full_field: &DVector<f64>,
) -> Result<[f64; 3]> {
    let tri = &mesh.triangles()?[e];
    let (b, _) = triangle_b_matrix(mesh, tri);
    let c = plane_stress_c(modulus, nu);
    let mut u = [0.0; 6];
    for (i, &v) in tri.iter().enumerate() {
        u[2 * i] = full_field[2 * v];
        u[2 * i + 1] = full_field[2 * v + 1];
    }
    let mut strain = [0.0; 3];
    for r in 0..3 {
        strain[r] = (0..6).map(|col| b[r][col] * u[col]).sum();
    }
    let mut stress = [0.0; 3];
    for r in 0..3 {
        stress[r] = (0..3).map(|s| c[r][s] * strain[s]).sum();
    }
    Ok(stress)
}

fn validate_2d_material(mat: &MaterialParams2D) -> Result<()> {
    if !(mat.e > 0.0) || !mat.e.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "E must be positive and finite, got {}",
            mat.e
        )));
    }
    if !(0.0..0.5).contains(&mat.nu) {
        return Err(Error::InvalidParameter(format!(
            "nu must lie in [0, 0.5), got {}",
            mat.nu
        )));
    }
    if !(mat.e_support > 0.0) || !mat.e_support.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "E_support must be positive and finite, got {}",
            mat.e_support
        )));
    }
    Ok(())
}

/// Assembles plane-stress elasticity with centroid-classified moduli
/// (support tabs get `e_support`). See
/// [`assemble_elasticity_with_moduli`] for the variant with explicit
/// per-element moduli (used to keep nested meshes materially identical).
pub fn assemble_elasticity(
    mesh: &Mesh,
    mat: &MaterialParams2D,
    dirichlet: &[DirichletBc],
) -> Result<LinearSystem> {
    let moduli = element_moduli(mesh, mat)?;
    assemble_elasticity_with_moduli(mesh, mat, &moduli, dirichlet)
}

/// Assembles plane-stress elasticity with explicit per-element moduli.
///
/// Dirichlet constraints are imposed by lifting: constrained slots leave the
/// unknown set and the load vector gains `-K_ic û_c`.
///
/// # Errors
/// [`Error::InvalidParameter`] for invalid material constants or duplicate
/// conflicting constraints. Rigid-body modes from an insufficient constraint
/// set surface as a factorization error when the system is solved.
pub fn assemble_elasticity_with_moduli(
    mesh: &Mesh,
    mat: &MaterialParams2D,
    moduli: &[f64],
    dirichlet: &[DirichletBc],
) -> Result<LinearSystem> {
    validate_2d_material(mat)?;
    let triangles = mesh.triangles()?;
    if moduli.len() != triangles.len() {
        return Err(Error::InvalidParameter(format!(
            "{} moduli for {} elements",
            moduli.len(),
            triangles.len()
        )));
    }

    let n_nodes = mesh.n_nodes();
    let mut lifting = DVector::zeros(2 * n_nodes);
    let mut fixed_slots = Vec::with_capacity(dirichlet.len());
    for &(node, comp, value) in dirichlet {
        if node >= n_nodes || comp >= 2 {
            return Err(Error::InvalidParameter(format!(
                "Dirichlet constraint on node {node} component {comp} out of range"
            )));
        }
        let slot = 2 * node + comp;
        if fixed_slots.contains(&slot) && lifting[slot] != value {
            return Err(Error::InvalidParameter(format!(
                "conflicting Dirichlet values at node {node} component {comp}"
            )));
        }
        lifting[slot] = value;
        fixed_slots.push(slot);
    }
    let dof_map = DofMap::new(n_nodes, 2, &fixed_slots);

    // Element matrices in parallel, reduction in fixed element order so
    // results are bit-reproducible regardless of thread count.
    let locals: Vec<[[f64; 6]; 6]> = triangles
        .par_iter()
        .zip(moduli.par_iter())
        .map(|(tri, &m)| cst_stiffness(mesh, tri, m, mat.nu))
        .collect();

    let mut stiffness = SymmetricSparse::new(dof_map.n_free());
    let mut load = DVector::zeros(dof_map.n_free());
    for (tri, k_local) in triangles.iter().zip(&locals) {
        let mut slots = [0usize; 6];
        for (i, &v) in tri.iter().enumerate() {
            slots[2 * i] = 2 * v;
            slots[2 * i + 1] = 2 * v + 1;
        }
        for (la, &sa) in slots.iter().enumerate() {
            let Some(fa) = dof_map.free_index[sa] else {
                continue;
            };
            for (lb, &sb) in slots.iter().enumerate() {
                match dof_map.free_index[sb] {
                    Some(fb) => {
                        if fa <= fb {
                            stiffness.add(fa, fb, k_local[la][lb]);
                        }
                    }
                    None => load[fa] -= k_local[la][lb] * lifting[sb],
                }
            }
        }
    }

    Ok(LinearSystem {
        mesh: mesh.clone(),
        stiffness,
        load,
        dof_map,
        lifting,
    })
}

/// Assembles the unconstrained (all dofs free) 2D stiffness matrix. Used for
/// rigid-body-mode diagnostics and reaction-force recovery.
pub fn assemble_full_stiffness_2d(
    mesh: &Mesh,
    mat: &MaterialParams2D,
    moduli: &[f64],
) -> Result<SymmetricSparse> {
    validate_2d_material(mat)?;
    let triangles = mesh.triangles()?;
    let mut k_full = SymmetricSparse::new(2 * mesh.n_nodes());
    for (tri, &m) in triangles.iter().zip(moduli) {
        let k_local = cst_stiffness(mesh, tri, m, mat.nu);
        let mut slots = [0usize; 6];
        for (i, &v) in tri.iter().enumerate() {
            slots[2 * i] = 2 * v;
            slots[2 * i + 1] = 2 * v + 1;
        }
        for (la, &sa) in slots.iter().enumerate() {
            for (lb, &sb) in slots.iter().enumerate() {
                if sa <= sb {
                    k_full.add(sa, sb, k_local[la][lb]);
                }
            }
        }
    }
    Ok(k_full)
}

/// Locates the element containing `point` and returns `(element, weights)`
/// where `weights` are the nodal shape-function values. Points within
/// `1e-9 · diam` of the domain are accepted (snapped to the nearest element).
fn locate_point(mesh: &Mesh, point: [f64; 2]) -> Result<(usize, Vec<f64>)> {
    let tol = 1e-9 * mesh.domain_diameter().max(1.0);
    match mesh.dim {
        1 => {
            let segments = mesh.segments()?;
            let x = point[0];
            let mut best: Option<(usize, f64)> = None; // (element, signed margin)
            for (e, seg) in segments.iter().enumerate() {
                let (x1, x2) = (mesh.nodes[seg[0]][0], mesh.nodes[seg[1]][0]);
                let (lo, hi) = (x1.min(x2), x1.max(x2));
                let margin = (x - lo).min(hi - x);
                if best.is_none_or(|(_, m)| margin > m) {
                    best = Some((e, margin));
                }
            }
            let (e, margin) = best.expect("nonempty mesh");
            if margin < -tol {
                return Err(Error::PointOutsideDomain(point[0], point[1]));
            }
            let seg = &segments[e];
            let (x1, x2) = (mesh.nodes[seg[0]][0], mesh.nodes[seg[1]][0]);
            let t = ((x - x1) / (x2 - x1)).clamp(0.0, 1.0);
            Ok((e, vec![1.0 - t, t]))
        }
        2 => {
            let triangles = mesh.triangles()?;
            let mut best: Option<(usize, f64, [f64; 3])> = None;
            for (e, tri) in triangles.iter().enumerate() {
                let p: Vec<[f64; 2]> = tri.iter().map(|&v| mesh.nodes[v]).collect();
                let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                    - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
                let mut bary = [0.0; 3];
                for i in 0..3 {
                    let j = (i + 1) % 3;
                    let k = (i + 2) % 3;
                    bary[i] = ((p[k][0] - p[j][0]) * (point[1] - p[j][1])
                        - (p[k][1] - p[j][1]) * (point[0] - p[j][0]))
                        / area2;
                }
                let margin = bary[0].min(bary[1]).min(bary[2]) * mesh.element_diameter(e);
                if best.is_none_or(|(_, m, _)| margin > m) {
                    best = Some((e, margin, bary));
                }
                if margin >= 0.0 {
                    break;
                }
            }
            let (e, margin, bary) = best.expect("nonempty mesh");
            if margin < -tol {
                return Err(Error::PointOutsideDomain(point[0], point[1]));
            }
            let total: f64 = bary.iter().map(|b| b.max(0.0)).sum();
            Ok((e, bary.iter().map(|b| b.max(0.0) / total).collect()))
        }
        d => Err(Error::InvalidMesh(format!("unsupported dimension {d}"))),
    }
}

/// Builds the pointwise observation operator for `points`.
///
/// # Errors
/// [`Error::PointOutsideDomain`] if any point lies outside the mesh.
pub fn observation_matrix(mesh: &Mesh, points: &[[f64; 2]]) -> Result<ObservationOperator> {
    let dpn = mesh.dim;
    let n_cols = dpn * mesh.n_nodes();
    let mut matrix = DMatrix::zeros(dpn * points.len(), n_cols);
    for (pi, &point) in points.iter().enumerate() {
        let (e, weights) = locate_point(mesh, point)?;
        let nodes = mesh.elements.nodes_of(e);
        for (local, &node) in nodes.iter().enumerate() {
            for comp in 0..dpn {
                matrix[(dpn * pi + comp, dpn * node + comp)] += weights[local];
            }
        }
    }
    Ok(ObservationOperator {
        points: points.to_vec(),
        matrix,
    })
}

/// Evaluates the FEM solution (free coefficients `w` plus the system's
/// lifting) at `points`. Returns `m` values in 1D and `2m` interleaved
/// components in 2D.
pub fn evaluate_solution(
    system: &LinearSystem,
    w: &DVector<f64>,
    points: &[[f64; 2]],
) -> Result<DVector<f64>> {
    let op = observation_matrix(&system.mesh, points)?;
    Ok(op.apply(&system.full_field(w)))
}

/// Plain FEM Gaussian log-likelihood `log N(y; P u_h, σ_e² I)`.
///
/// This is the shared code path the deterministic baseline, the RM-FEM
/// replicas, and the degenerate limits of BFEM/statFEM all evaluate through,
/// so those reductions hold bit-for-bit.
///
/// # Errors
/// [`Error::InvalidParameter`] for a non-positive `sigma_e`; otherwise
/// propagates solver and observation errors.
pub fn fem_log_likelihood(
    system: &LinearSystem,
    op: &ObservationOperator,
    y: &DVector<f64>,
    sigma_e: f64,
) -> Result<f64> {
    if !(sigma_e > 0.0) || !sigma_e.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "observation noise must be positive, got {sigma_e}"
        )));
    }
    let w = system.solve()?;
    let (phi, offset) = system.observation_parts(op);
    let mean = &phi * w + offset;
    let m = mean.len();
    let total = DMatrix::identity(m, m) * (sigma_e * sigma_e);
    crate::inference::mvn_logpdf(y, &mean, &total)
}
