//! Mesh serialization: the plain-text exchange format and a GMSH `.msh`
//! (ASCII v2.2) importer.
//!
//! The plain-text format is line-oriented:
//!
//! ```text
//! dim n_nodes n_elements
//! id x [y]          (one line per node, ids 0..n_nodes)
//! id n1 n2 [n3]     (one line per element, ids 0..n_elements)
//! boundary
//! id                (one line per boundary node)
//! ```
//!
//! The boundary section is redundant — boundary topology is derived from the
//! connectivity — and is verified on read so that a hand-edited file cannot
//! silently disagree with its own elements.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::mesh::{Elements, Mesh};
use crate::{Error, Result};

/// Renders `mesh` in the plain-text format.
pub fn write_text(mesh: &Mesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {} {}", mesh.dim, mesh.n_nodes(), mesh.n_elements());
    for (i, p) in mesh.nodes.iter().enumerate() {
        match mesh.dim {
            1 => {
                let _ = writeln!(out, "{} {:.17e}", i, p[0]);
            }
            _ => {
                let _ = writeln!(out, "{} {:.17e} {:.17e}", i, p[0], p[1]);
            }
        }
    }
    for e in 0..mesh.n_elements() {
        let _ = write!(out, "{e}");
        for &v in mesh.elements.nodes_of(e) {
            let _ = write!(out, " {v}");
        }
        let _ = writeln!(out);
    }
    let _ = writeln!(out, "boundary");
    for &b in &mesh.boundary_nodes {
        let _ = writeln!(out, "{b}");
    }
    out
}

/// Writes `mesh` to `path` in the plain-text format.
pub fn save_text(mesh: &Mesh, path: &Path) -> Result<()> {
    std::fs::write(path, write_text(mesh))?;
    Ok(())
}

/// Parses a mesh from the plain-text format.
pub fn read_text(content: &str) -> Result<Mesh> {
    let mut lines = content
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::MeshFormat("empty mesh file".into()))?;
    let header: Vec<&str> = header.split_whitespace().collect();
    if header.len() != 3 {
        return Err(Error::MeshFormat(format!(
            "header must be `dim n_nodes n_elements`, got `{}`",
            header.join(" ")
        )));
    }
    let dim: usize = parse(header[0], "dim")?;
    let n_nodes: usize = parse(header[1], "n_nodes")?;
    let n_elements: usize = parse(header[2], "n_elements")?;
    if dim != 1 && dim != 2 {
        return Err(Error::MeshFormat(format!("dim must be 1 or 2, got {dim}")));
    }

    let mut nodes = Vec::with_capacity(n_nodes);
    for i in 0..n_nodes {
        let line = lines
            .next()
            .ok_or_else(|| Error::MeshFormat(format!("missing node line {i}")))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 1 + dim {
            return Err(Error::MeshFormat(format!(
                "node line {i} must have {} fields, got `{line}`",
                1 + dim
            )));
        }
        let id: usize = parse(fields[0], "node id")?;
        if id != i {
            return Err(Error::MeshFormat(format!(
                "node ids must be sequential: expected {i}, got {id}"
            )));
        }
        let x: f64 = parse(fields[1], "node x")?;
        let y: f64 = if dim == 2 { parse(fields[2], "node y")? } else { 0.0 };
        nodes.push([x, y]);
    }

    let verts_per_elem = dim + 1;
    let mut connectivity = Vec::with_capacity(n_elements);
    for e in 0..n_elements {
        let line = lines
            .next()
            .ok_or_else(|| Error::MeshFormat(format!("missing element line {e}")))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 1 + verts_per_elem {
            return Err(Error::MeshFormat(format!(
                "element line {e} must have {} fields, got `{line}`",
                1 + verts_per_elem
            )));
        }
        let id: usize = parse(fields[0], "element id")?;
        if id != e {
            return Err(Error::MeshFormat(format!(
                "element ids must be sequential: expected {e}, got {id}"
            )));
        }
        let vs: Vec<usize> = fields[1..]
            .iter()
            .map(|f| parse(f, "element node index"))
            .collect::<Result<_>>()?;
        connectivity.push(vs);
    }

    match lines.next() {
        Some("boundary") => {}
        other => {
            return Err(Error::MeshFormat(format!(
                "expected `boundary` section, got {other:?}"
            )))
        }
    }
    let mut boundary = BTreeSet::new();
    for line in lines {
        boundary.insert(parse::<usize>(line, "boundary node id")?);
    }

    let mesh = build(dim, nodes, connectivity)?;
    if mesh.boundary_nodes != boundary {
        return Err(Error::MeshFormat(
            "boundary section disagrees with the boundary derived from connectivity".into(),
        ));
    }
    Ok(mesh)
}

/// Reads a mesh from a plain-text file at `path`.
pub fn load_text(path: &Path) -> Result<Mesh> {
    read_text(&std::fs::read_to_string(path)?)
}

/// Imports a GMSH `.msh` ASCII v2.2 file.
///
/// Only element types 1 (2-node line) and 2 (3-node triangle) are meshed;
/// type 15 (point markers) is skipped; any other type is an error. If the
/// file contains triangles the result is a 2D mesh and line elements are
/// treated as redundant boundary markers; otherwise the lines form a 1D mesh
/// (which must lie on the x axis). Triangles are re-oriented counter-clockwise.
pub fn read_gmsh(content: &str) -> Result<Mesh> {
    let mut lines = content.lines().map(str::trim);
    let mut raw_nodes: Vec<(u64, f64, f64, f64)> = Vec::new();
    let mut raw_lines: Vec<[u64; 2]> = Vec::new();
    let mut raw_tris: Vec<[u64; 3]> = Vec::new();
    let mut format_seen = false;

    while let Some(line) = lines.next() {
        match line {
            "$MeshFormat" => {
                let fmt = lines
                    .next()
                    .ok_or_else(|| Error::MeshFormat("truncated $MeshFormat".into()))?;
                let version = fmt.split_whitespace().next().unwrap_or("");
                if !version.starts_with("2.2") {
                    return Err(Error::MeshFormat(format!(
                        "unsupported GMSH format version {version}; only ASCII 2.2 is supported"
                    )));
                }
                expect_end(&mut lines, "$EndMeshFormat")?;
                format_seen = true;
            }
            "$Nodes" => {
                let count: usize = parse(
                    lines
                        .next()
                        .ok_or_else(|| Error::MeshFormat("truncated $Nodes".into()))?,
                    "node count",
                )?;
                for _ in 0..count {
                    let l = lines
                        .next()
                        .ok_or_else(|| Error::MeshFormat("truncated node list".into()))?;
                    let f: Vec<&str> = l.split_whitespace().collect();
                    if f.len() != 4 {
                        return Err(Error::MeshFormat(format!("bad node line `{l}`")));
                    }
                    raw_nodes.push((
                        parse(f[0], "node id")?,
                        parse(f[1], "x")?,
                        parse(f[2], "y")?,
                        parse(f[3], "z")?,
                    ));
                }
                expect_end(&mut lines, "$EndNodes")?;
            }
            "$Elements" => {
                let count: usize = parse(
                    lines
                        .next()
                        .ok_or_else(|| Error::MeshFormat("truncated $Elements".into()))?,
                    "element count",
                )?;
                for _ in 0..count {
                    let l = lines
                        .next()
                        .ok_or_else(|| Error::MeshFormat("truncated element list".into()))?;
                    let f: Vec<&str> = l.split_whitespace().collect();
                    if f.len() < 3 {
                        return Err(Error::MeshFormat(format!("bad element line `{l}`")));
                    }
                    let etype: u64 = parse(f[1], "element type")?;
                    let n_tags: usize = parse(f[2], "tag count")?;
                    let node_fields = &f[3 + n_tags..];
                    match etype {
                        1 => {
                            if node_fields.len() != 2 {
                                return Err(Error::MeshFormat(format!("bad line element `{l}`")));
                            }
                            raw_lines.push([parse(node_fields[0], "n1")?, parse(node_fields[1], "n2")?]);
                        }
                        2 => {
                            if node_fields.len() != 3 {
                                return Err(Error::MeshFormat(format!(
                                    "bad triangle element `{l}`"
                                )));
                            }
                            raw_tris.push([
                                parse(node_fields[0], "n1")?,
                                parse(node_fields[1], "n2")?,
                                parse(node_fields[2], "n3")?,
                            ]);
                        }
                        15 => {} // point marker: skip
                        t => {
                            return Err(Error::MeshFormat(format!(
                                "unsupported GMSH element type {t}; only types 1 and 2 are handled"
                            )))
                        }
                    }
                }
                expect_end(&mut lines, "$EndElements")?;
            }
            _ => {} // skip unknown sections ($PhysicalNames etc.)
        }
    }

    if !format_seen {
        return Err(Error::MeshFormat("missing $MeshFormat section".into()));
    }
    if raw_nodes.is_empty() {
        return Err(Error::MeshFormat("missing $Nodes section".into()));
    }

    let id_map: std::collections::HashMap<u64, usize> = raw_nodes
        .iter()
        .enumerate()
        .map(|(i, &(id, ..))| (id, i))
        .collect();
    let remap = |id: u64| -> Result<usize> {
        id_map
            .get(&id)
            .copied()
            .ok_or_else(|| Error::MeshFormat(format!("element references unknown node {id}")))
    };

    if !raw_tris.is_empty() {
        let nodes: Vec<[f64; 2]> = raw_nodes.iter().map(|&(_, x, y, _)| [x, y]).collect();
        let mut tris = Vec::with_capacity(raw_tris.len());
        for t in &raw_tris {
            let mut tri = [remap(t[0])?, remap(t[1])?, remap(t[2])?];
            let [a, b, c] = tri;
            let area = 0.5
                * ((nodes[b][0] - nodes[a][0]) * (nodes[c][1] - nodes[a][1])
                    - (nodes[c][0] - nodes[a][0]) * (nodes[b][1] - nodes[a][1]));
            if area < 0.0 {
                tri.swap(1, 2);
            }
            tris.push(tri);
        }
        build(2, nodes, tris.into_iter().map(|t| t.to_vec()).collect())
    } else if !raw_lines.is_empty() {
        if raw_nodes.iter().any(|&(_, _, y, z)| y != 0.0 || z != 0.0) {
            return Err(Error::MeshFormat(
                "1D GMSH mesh (line elements only) must lie on the x axis".into(),
            ));
        }
        let nodes: Vec<[f64; 2]> = raw_nodes.iter().map(|&(_, x, ..)| [x, 0.0]).collect();
        let mut segs = Vec::with_capacity(raw_lines.len());
        for l in &raw_lines {
            segs.push(vec![remap(l[0])?, remap(l[1])?]);
        }
        build(1, nodes, segs)
    } else {
        Err(Error::MeshFormat(
            "no line or triangle elements found".into(),
        ))
    }
}

/// Reads a GMSH `.msh` file from `path`.
pub fn load_gmsh(path: &Path) -> Result<Mesh> {
    read_gmsh(&std::fs::read_to_string(path)?)
}

fn build(dim: usize, nodes: Vec<[f64; 2]>, connectivity: Vec<Vec<usize>>) -> Result<Mesh> {
    match dim {
        1 => {
            let segs = connectivity
                .into_iter()
                .map(|v| {
                    <[usize; 2]>::try_from(v.as_slice())
                        .map_err(|_| Error::MeshFormat("segment needs exactly 2 nodes".into()))
                })
                .collect::<Result<Vec<_>>>()?;
            Mesh::new_1d(nodes.into_iter().map(|p| p[0]).collect(), segs)
        }
        _ => {
            let tris = connectivity
                .into_iter()
                .map(|v| {
                    <[usize; 3]>::try_from(v.as_slice())
                        .map_err(|_| Error::MeshFormat("triangle needs exactly 3 nodes".into()))
                })
                .collect::<Result<Vec<_>>>()?;
            Mesh::new_2d(nodes, tris)
        }
    }
}

fn parse<T: std::str::FromStr>(field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::MeshFormat(format!("cannot parse {what} from `{field}`")))
}

fn expect_end<'a>(lines: &mut impl Iterator<Item = &'a str>, tag: &str) -> Result<()> {
    match lines.next() {
        Some(l) if l == tag => Ok(()),
        other => Err(Error::MeshFormat(format!("expected {tag}, got {other:?}"))),
    }
}

#[allow(unused)]
fn elements_kind(mesh: &Mesh) -> &'static str {
    match mesh.elements {
        Elements::Segments(_) => "segments",
        Elements::Triangles(_) => "triangles",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_interval_mesh, validate_mesh};
    use proptest::prelude::*;

    #[test]
    fn text_round_trip_1d() {
        let mesh = generate_interval_mesh(1.0, 5).unwrap();
        let text = write_text(&mesh);
        let back = read_text(&text).unwrap();
        assert_eq!(back, mesh);
    }

    #[test]
    fn text_round_trip_2d() {
        let mesh = Mesh::new_2d(
            vec![[0.0, 0.0], [1.25, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.4]],
            vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]],
        )
        .unwrap();
        let back = read_text(&write_text(&mesh)).unwrap();
        assert_eq!(back, mesh);
    }

    #[test]
    fn text_rejects_inconsistent_boundary() {
        let mesh = generate_interval_mesh(1.0, 3).unwrap();
        let mut text = write_text(&mesh);
        text.push_str("2\n"); // claim an interior node is boundary
        assert!(read_text(&text).is_err());
    }

    #[test]
    fn text_rejects_malformed_header() {
        assert!(read_text("").is_err());
        assert!(read_text("3 1 1\n0 0.0 0.0 0.0\n").is_err());
        assert!(read_text("two 1 1\n").is_err());
    }

    #[test]
    fn gmsh_triangle_import() {
        let msh = "\
$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
4
1 0 0 0
2 1 0 0
3 1 1 0
4 0 1 0
$EndNodes
$Elements
3
1 15 2 0 1 1
2 2 2 0 1 1 2 3
3 2 2 0 1 1 3 4
$EndElements
";
        let mesh = read_gmsh(msh).unwrap();
        assert_eq!(mesh.dim, 2);
        assert_eq!(mesh.n_nodes(), 4);
        assert_eq!(mesh.n_elements(), 2);
        assert!(validate_mesh(&mesh));
    }

    #[test]
    fn gmsh_reorients_clockwise_triangles() {
        let msh = "\
$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
3
1 0 0 0
2 1 0 0
3 0 1 0
$EndNodes
$Elements
1
1 2 0 1 3 2
$EndElements
";
        let mesh = read_gmsh(msh).unwrap();
        assert!(validate_mesh(&mesh));
        assert!(mesh.element_measure(0) > 0.0);
    }

    #[test]
    fn gmsh_line_import_is_1d() {
        let msh = "\
$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
3
10 0 0 0
20 0.5 0 0
30 1 0 0
$EndNodes
$Elements
2
1 1 0 10 20
2 1 0 20 30
$EndElements
";
        let mesh = read_gmsh(msh).unwrap();
        assert_eq!(mesh.dim, 1);
        assert_eq!(mesh.n_elements(), 2);
        assert_eq!(
            mesh.boundary_nodes.iter().copied().collect::<Vec<_>>(),
            vec![0, 2]
        );
    }

    #[test]
    fn gmsh_rejects_unsupported_types() {
        let msh = "\
$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
4
1 0 0 0
2 1 0 0
3 1 1 0
4 0 1 0
$EndNodes
$Elements
1
1 3 0 1 2 3 4
$EndElements
";
        assert!(read_gmsh(msh).is_err());
    }

    #[test]
    fn gmsh_rejects_wrong_version() {
        assert!(read_gmsh("$MeshFormat\n4.1 0 8\n$EndMeshFormat\n").is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip_random_intervals(n in 1usize..40, len in 0.1f64..100.0) {
            let mesh = generate_interval_mesh(len, n).unwrap();
            let back = read_text(&write_text(&mesh)).unwrap();
            prop_assert_eq!(back, mesh);
        }
    }
}
