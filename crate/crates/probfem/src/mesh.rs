//! Simplicial meshes: 1D interval partitions and 2D triangulations, with
//! hierarchical refinement and the RM-FEM node perturbation.
//!
//! A [`Mesh`] is immutable after construction; every operation that "changes"
//! a mesh returns a new value. Boundary information and per-node local mesh
//! sizes are derived from the connectivity at construction time so they can
//! never drift out of sync with the elements.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub mod io;

/// Element connectivity, discriminated by dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Elements {
    /// 1D segments as node-index pairs, ordered left-to-right.
    Segments(Vec<[usize; 2]>),
    /// 2D triangles as node-index triples, counter-clockwise.
    Triangles(Vec<[usize; 3]>),
}

impl Elements {
    /// Number of elements.
    pub fn len(&self) -> usize {
        match self {
            Elements::Segments(s) => s.len(),
            Elements::Triangles(t) => t.len(),
        }
    }

    /// True if the mesh has no elements.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node indices of element `e` (2 for a segment, 3 for a triangle).
    pub fn nodes_of(&self, e: usize) -> &[usize] {
        match self {
            Elements::Segments(s) => &s[e],
            Elements::Triangles(t) => &t[e],
        }
    }
}

/// A simplicial mesh in one or two dimensions.
///
/// In 1D only the x coordinate is used; the y component of every node is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    /// Spatial dimension, 1 or 2.
    pub dim: usize,
    /// Node coordinates.
    pub nodes: Vec<[f64; 2]>,
    /// Element connectivity.
    pub elements: Elements,
    /// Indices of nodes on the domain boundary.
    pub boundary_nodes: BTreeSet<usize>,
    /// 2D only: directed boundary edges `(a, b)` with the domain on the left
    /// (counter-clockwise along the outer boundary, clockwise along holes).
    /// Empty in 1D.
    pub boundary_edges: Vec<[usize; 2]>,
    /// Per-node local mesh size `h_i`: the minimum diameter over elements
    /// incident to node `i`.
    pub node_sizes: Vec<f64>,
}

impl Mesh {
    /// Builds a 1D mesh from node x-coordinates and segment connectivity.
    ///
    /// Boundary nodes (nodes incident to exactly one segment) and node sizes
    /// are derived. Errors on out-of-range node indices.
    pub fn new_1d(xs: Vec<f64>, segments: Vec<[usize; 2]>) -> Result<Mesh> {
        let nodes: Vec<[f64; 2]> = xs.into_iter().map(|x| [x, 0.0]).collect();
        check_indices(nodes.len(), segments.iter().flatten().copied())?;
        let mut incidence = vec![0usize; nodes.len()];
        for seg in &segments {
            incidence[seg[0]] += 1;
            incidence[seg[1]] += 1;
        }
        let boundary_nodes = incidence
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c == 1)
            .map(|(i, _)| i)
            .collect();
        let elements = Elements::Segments(segments);
        let node_sizes = node_sizes(&nodes, &elements);
        Ok(Mesh {
            dim: 1,
            nodes,
            elements,
            boundary_nodes,
            boundary_edges: Vec::new(),
            node_sizes,
        })
    }

    /// Builds a 2D triangle mesh. Boundary edges (edges with exactly one
    /// incident triangle), boundary nodes, and node sizes are derived.
    /// Errors on out-of-range node indices.
    pub fn new_2d(nodes: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Mesh> {
        check_indices(nodes.len(), triangles.iter().flatten().copied())?;
        let mut edge_owner: HashMap<(usize, usize), (usize, usize, usize)> = HashMap::new();
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                edge_owner
                    .entry(key)
                    .and_modify(|(_, _, count)| *count += 1)
                    .or_insert((a, b, 1));
            }
        }
        let mut boundary_edges: Vec<[usize; 2]> = edge_owner
            .values()
            .filter(|&&(_, _, count)| count == 1)
            .map(|&(a, b, _)| [a, b])
            .collect();
        boundary_edges.sort_unstable();
        let boundary_nodes = boundary_edges.iter().flatten().copied().collect();
        let elements = Elements::Triangles(triangles);
        let node_sizes = node_sizes(&nodes, &elements);
        Ok(Mesh {
            dim: 2,
            nodes,
            elements,
            boundary_nodes,
            boundary_edges,
            node_sizes,
        })
    }

    /// Number of nodes.
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Number of elements.
    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Segment connectivity; errors if the mesh is not 1D.
    pub fn segments(&self) -> Result<&[[usize; 2]]> {
        match &self.elements {
            Elements::Segments(s) => Ok(s),
            Elements::Triangles(_) => Err(Error::InvalidMesh(
                "expected a 1D segment mesh, found triangles".into(),
            )),
        }
    }

    /// Triangle connectivity; errors if the mesh is not 2D.
    pub fn triangles(&self) -> Result<&[[usize; 3]]> {
        match &self.elements {
            Elements::Triangles(t) => Ok(t),
            Elements::Segments(_) => Err(Error::InvalidMesh(
                "expected a 2D triangle mesh, found segments".into(),
            )),
        }
    }

    /// Diameter of element `e`: segment length in 1D, longest edge in 2D.
    pub fn element_diameter(&self, e: usize) -> f64 {
        element_diameter(&self.nodes, &self.elements, e)
    }

    /// Measure of element `e`: length in 1D, area in 2D (signed, positive for
    /// counter-clockwise triangles).
    pub fn element_measure(&self, e: usize) -> f64 {
        match &self.elements {
            Elements::Segments(s) => {
                let [a, b] = s[e];
                self.nodes[b][0] - self.nodes[a][0]
            }
            Elements::Triangles(t) => signed_area(&self.nodes, &t[e]),
        }
    }

    /// Axis-aligned bounding-box diagonal of the node set; the length scale
    /// used by "relative to domain diameter" tolerances.
    pub fn domain_diameter(&self) -> f64 {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.nodes {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
    }

    /// Index of the node nearest to `point`, with its distance.
    pub fn nearest_node(&self, point: [f64; 2]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.nodes.iter().enumerate() {
            let d = ((p[0] - point[0]).powi(2) + (p[1] - point[1]).powi(2)).sqrt();
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }
}

fn check_indices(n_nodes: usize, indices: impl IntoIterator<Item = usize>) -> Result<()> {
    for idx in indices {
        if idx >= n_nodes {
            return Err(Error::InvalidMesh(format!(
                "element references node {idx} but the mesh has {n_nodes} nodes"
            )));
        }
    }
    Ok(())
}

fn element_diameter(nodes: &[[f64; 2]], elements: &Elements, e: usize) -> f64 {
    let dist = |a: usize, b: usize| -> f64 {
        let (pa, pb) = (nodes[a], nodes[b]);
        ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt()
    };
    match elements {
        Elements::Segments(s) => {
            let [a, b] = s[e];
            dist(a, b)
        }
        Elements::Triangles(t) => {
            let [a, b, c] = t[e];
            dist(a, b).max(dist(b, c)).max(dist(c, a))
        }
    }
}

fn node_sizes(nodes: &[[f64; 2]], elements: &Elements) -> Vec<f64> {
    let mut sizes = vec![f64::INFINITY; nodes.len()];
    for e in 0..elements.len() {
        let d = element_diameter(nodes, elements, e);
        for &v in elements.nodes_of(e) {
            sizes[v] = sizes[v].min(d);
        }
    }
    for s in &mut sizes {
        if !s.is_finite() {
            *s = 0.0;
        }
    }
    sizes
}

fn signed_area(nodes: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = *tri;
    let (pa, pb, pc) = (nodes[a], nodes[b], nodes[c]);
    0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
}

/// Generates a uniform 1D mesh of `n_elements` equal segments on
/// `[0, length]`.
///
/// # Errors
/// Rejects non-positive `length` or `n_elements == 0`.
pub fn generate_interval_mesh(length: f64, n_elements: usize) -> Result<Mesh> {
    if !(length > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "interval length must be positive, got {length}"
        )));
    }
    if n_elements == 0 {
        return Err(Error::InvalidParameter(
            "n_elements must be at least 1".into(),
        ));
    }
    let xs = (0..=n_elements)
        .map(|i| length * (i as f64 / n_elements as f64))
        .collect();
    let segments = (0..n_elements).map(|i| [i, i + 1]).collect();
    Mesh::new_1d(xs, segments)
}

/// A hierarchical refinement: the fine mesh together with the parent→children
/// element map.
///
/// The coarse nodes are the first `coarse_nodes` nodes of [`fine`], with
/// identical indices and bitwise-identical coordinates; refinement only
/// appends edge-midpoint nodes.
///
/// [`fine`]: RefinementMap::fine
#[derive(Debug, Clone)]
pub struct RefinementMap {
    /// The refined mesh.
    pub fine: Mesh,
    /// Number of coarse nodes (a prefix of the fine node list).
    pub coarse_nodes: usize,
    children: Vec<usize>,
    stride: usize,
}

impl RefinementMap {
    /// Fine element indices of the children of coarse element `parent`
    /// (2 children in 1D, 4 in 2D).
    pub fn children(&self, parent: usize) -> &[usize] {
        &self.children[parent * self.stride..(parent + 1) * self.stride]
    }

    /// Number of coarse elements.
    pub fn n_parents(&self) -> usize {
        self.children.len() / self.stride
    }
}

/// Splits every element of `mesh` uniformly: segments in two, triangles into
/// four congruent children via edge midpoints.
pub fn refine_hierarchical(mesh: &Mesh) -> Result<RefinementMap> {
    let mut nodes = mesh.nodes.clone();
    let mut midpoint_of: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, nodes: &mut Vec<[f64; 2]>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoint_of.entry(key).or_insert_with(|| {
            let (pa, pb) = (nodes[a], nodes[b]);
            nodes.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            nodes.len() - 1
        })
    };

    match &mesh.elements {
        Elements::Segments(segs) => {
            let mut fine_segs = Vec::with_capacity(2 * segs.len());
            let mut children = Vec::with_capacity(2 * segs.len());
            for &[a, b] in segs {
                let m = midpoint(a, b, &mut nodes);
                children.push(fine_segs.len());
                fine_segs.push([a, m]);
                children.push(fine_segs.len());
                fine_segs.push([m, b]);
            }
            let fine = Mesh::new_1d(nodes.into_iter().map(|p| p[0]).collect(), fine_segs)?;
            Ok(RefinementMap {
                fine,
                coarse_nodes: mesh.n_nodes(),
                children,
                stride: 2,
            })
        }
        Elements::Triangles(tris) => {
            let mut fine_tris = Vec::with_capacity(4 * tris.len());
            let mut children = Vec::with_capacity(4 * tris.len());
            for &[a, b, c] in tris {
                let mab = midpoint(a, b, &mut nodes);
                let mbc = midpoint(b, c, &mut nodes);
                let mca = midpoint(c, a, &mut nodes);
                for child in [[a, mab, mca], [mab, b, mbc], [mca, mbc, c], [mab, mbc, mca]] {
                    children.push(fine_tris.len());
                    fine_tris.push(child);
                }
            }
            let fine = Mesh::new_2d(nodes, fine_tris)?;
            Ok(RefinementMap {
                fine,
                coarse_nodes: mesh.n_nodes(),
                children,
                stride: 4,
            })
        }
    }
}

/// Tuning knobs for [`perturb_mesh_with`].
#[derive(Debug, Clone, Copy)]
pub struct PerturbConfig {
    /// Perturbation exponent `p` in `x̃_i = x_i + h_i^p α_i`.
    pub p: f64,
    /// Radius `a` of the uniform hyperball from which `α_i` is drawn, as a
    /// fraction of `h_i^p`. The default 0.25 keeps 1D nodes on their own side
    /// of element midlines and makes 2D inversions rare.
    pub radius: f64,
    /// Number of whole-mesh resampling attempts before giving up when a
    /// perturbation inverts an element.
    pub max_attempts: usize,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            p: 1.0,
            radius: 0.25,
            max_attempts: 100,
        }
    }
}

/// Perturbs node positions by `h_i^p · α_i` with `α_i` uniform in a ball of
/// radius 0.25 (the default [`PerturbConfig`]).
///
/// Interior nodes move freely; boundary nodes are perturbed and then
/// orthogonally projected back onto their own original boundary facet chain
/// (in 1D the chain is the endpoint itself, so boundary nodes never move);
/// nodes in `fixed_nodes` keep bitwise-identical coordinates. The whole
/// perturbation is resampled if any element inverts.
///
/// A 2D boundary node slides only when its two incident boundary segments
/// are collinear, so the slide stays within the original straight chain.
/// Nodes where the boundary polyline bends (domain corners, hole-ring
/// vertices) stay put: projecting a corner onto one of its incident
/// segments would clip the corner and change the domain, leaving points of
/// the original domain uncovered by the perturbed mesh.
pub fn perturb_mesh(
    mesh: &Mesh,
    p: f64,
    fixed_nodes: &BTreeSet<usize>,
    rng: &mut ChaCha8Rng,
) -> Result<Mesh> {
    perturb_mesh_with(
        mesh,
        &PerturbConfig {
            p,
            ..PerturbConfig::default()
        },
        fixed_nodes,
        rng,
    )
}

/// [`perturb_mesh`] with explicit radius and retry configuration.
pub fn perturb_mesh_with(
    mesh: &Mesh,
    config: &PerturbConfig,
    fixed_nodes: &BTreeSet<usize>,
    rng: &mut ChaCha8Rng,
) -> Result<Mesh> {
    if !(config.p > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "perturbation exponent p must be positive, got {}",
            config.p
        )));
    }
    if config.radius < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "perturbation radius must be nonnegative, got {}",
            config.radius
        )));
    }
    if let Some(&bad) = fixed_nodes.iter().find(|&&i| i >= mesh.n_nodes()) {
        return Err(Error::InvalidParameter(format!(
            "fixed node index {bad} out of range"
        )));
    }

    // Original boundary chains: for each boundary node, its incident
    // boundary segments in original coordinates.
    type Segment = ([f64; 2], [f64; 2]);
    let mut chains: HashMap<usize, Vec<Segment>> = HashMap::new();
    for &[a, b] in &mesh.boundary_edges {
        let seg = (mesh.nodes[a], mesh.nodes[b]);
        chains.entry(a).or_default().push(seg);
        chains.entry(b).or_default().push(seg);
    }
    let straight_chain = |node: usize| -> bool {
        let segs = &chains[&node];
        if segs.len() != 2 {
            return false;
        }
        let d = |s: &Segment| [s.1[0] - s.0[0], s.1[1] - s.0[1]];
        let (u, v) = (d(&segs[0]), d(&segs[1]));
        let cross = u[0] * v[1] - u[1] * v[0];
        let scale = (u[0].hypot(u[1]) * v[0].hypot(v[1])).max(f64::MIN_POSITIVE);
        cross.abs() <= 1e-12 * scale
    };

    for attempt in 1..=config.max_attempts.max(1) {
        let mut nodes = mesh.nodes.clone();
        for i in 0..mesh.n_nodes() {
            if fixed_nodes.contains(&i) {
                continue;
            }
            let on_boundary = mesh.boundary_nodes.contains(&i);
            if on_boundary && (mesh.dim == 1 || !straight_chain(i)) {
                // 1D: the nearest boundary point to any small perturbation
                // of an endpoint is the endpoint itself. 2D: corner nodes
                // stay to preserve the domain polygon.
                continue;
            }
            let scale = mesh.node_sizes[i].powf(config.p);
            let alpha = sample_uniform_ball(mesh.dim, config.radius, rng)?;
            let moved = [
                mesh.nodes[i][0] + scale * alpha[0],
                mesh.nodes[i][1] + scale * alpha[1],
            ];
            nodes[i] = if on_boundary {
                project_to_chain(moved, &chains[&i])
            } else {
                moved
            };
        }
        let candidate = match &mesh.elements {
            Elements::Segments(s) => {
                Mesh::new_1d(nodes.into_iter().map(|p| p[0]).collect(), s.clone())?
            }
            Elements::Triangles(t) => Mesh::new_2d(nodes, t.clone())?,
        };
        if validate_mesh(&candidate) {
            return Ok(candidate);
        }
        if attempt == config.max_attempts.max(1) {
            break;
        }
    }
    Err(Error::PerturbationFailed {
        attempts: config.max_attempts.max(1),
        reason: "an element remained inverted or degenerate in every resample".into(),
    })
}

fn project_to_chain(p: [f64; 2], segments: &[([f64; 2], [f64; 2])]) -> [f64; 2] {
    let mut best = segments[0].0;
    let mut best_d2 = f64::INFINITY;
    for &(a, b) in segments {
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = [a[0] + t * dx, a[1] + t * dy];
        let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
        if d2 < best_d2 {
            best_d2 = d2;
            best = q;
        }
    }
    best
}

/// Draws a point uniformly from the ball of the given radius (an interval in
/// 1D, a disc in 2D).
pub fn sample_uniform_ball(dim: usize, radius: f64, rng: &mut ChaCha8Rng) -> Result<[f64; 2]> {
    if radius < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "ball radius must be nonnegative, got {radius}"
        )));
    }
    match dim {
        1 => Ok([radius * (2.0 * rng.random::<f64>() - 1.0), 0.0]),
        2 => loop {
            let x = 2.0 * rng.random::<f64>() - 1.0;
            let y = 2.0 * rng.random::<f64>() - 1.0;
            if x * x + y * y <= 1.0 {
                return Ok([radius * x, radius * y]);
            }
        },
        d => Err(Error::InvalidParameter(format!(
            "ball dimension must be 1 or 2, got {d}"
        ))),
    }
}

/// Checks every [`Mesh`] invariant: valid indices, no repeated node within an
/// element, strictly positive element measures under the stored orientation,
/// and node sizes consistent with the connectivity.
pub fn validate_mesh(mesh: &Mesh) -> bool {
    let n = mesh.n_nodes();
    for e in 0..mesh.n_elements() {
        let verts = mesh.elements.nodes_of(e);
        if verts.iter().any(|&v| v >= n) {
            return false;
        }
        for (i, &a) in verts.iter().enumerate() {
            if verts[i + 1..].contains(&a) {
                return false;
            }
        }
        if mesh.element_measure(e) <= 0.0 {
            return false;
        }
    }
    let expected_sizes = node_sizes(&mesh.nodes, &mesh.elements);
    if mesh.node_sizes.len() != expected_sizes.len() {
        return false;
    }
    mesh.node_sizes
        .iter()
        .zip(&expected_sizes)
        .all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs().max(1.0))
}
