//! Conforming triangulations of polygonal duct cross-sections.
//!
//! A [`Triangulation`] stores node coordinates, counter-clockwise triangles and
//! the Dirichlet marking of nodes. Nodes that are not Dirichlet are "free": they
//! carry velocity unknowns and get a dense index in `0..n_free` through
//! [`Triangulation::free_index`]. Free nodes need not be stored first; the
//! numbering is logical.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

/// Relative area below which a triangle is rejected as degenerate.
const DEGENERATE_AREA: f64 = 1e-14;

/// Tolerance used to mark generated nodes on the unit circle as Dirichlet.
const CIRCLE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("triangle {triangle} references node {node}, but the mesh has {n_nodes} nodes")]
    NodeOutOfRange {
        triangle: usize,
        node: usize,
        n_nodes: usize,
    },
    #[error("triangle {triangle} repeats a node")]
    RepeatedNode { triangle: usize },
    #[error("degenerate triangle {triangle}: area {area:e}")]
    DegenerateTriangle { triangle: usize, area: f64 },
    #[error("orphan node {node}: not referenced by any triangle")]
    OrphanNode { node: usize },
    #[error("non-conforming edge ({from}, {to}): shared by more than two triangles or with inconsistent orientation")]
    NonConformingEdge { from: usize, to: usize },
    #[error("no Dirichlet nodes: the Dirichlet boundary must be nonempty")]
    NoDirichletNodes,
    #[error("mesh has no triangles")]
    Empty,
    #[error("node {node} has a non-finite coordinate")]
    NonFiniteCoordinate { node: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Area and P1 hat-function gradients of a single triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleGeometry {
    pub area: f64,
    /// Gradient of the hat function of each vertex, in vertex order.
    pub grad_phi: [[f64; 2]; 3],
}

impl TriangleGeometry {
    /// Geometry of the triangle with (counter-clockwise) vertices `p`.
    ///
    /// The signed area is returned through `area`; callers check positivity.
    pub fn from_vertices(p: [[f64; 2]; 3]) -> Self {
        let e1 = [p[1][0] - p[0][0], p[1][1] - p[0][1]];
        let e2 = [p[2][0] - p[0][0], p[2][1] - p[0][1]];
        let det = e1[0] * e2[1] - e1[1] * e2[0];
        let area = 0.5 * det;
        // grad phi_i = rot90(opposite edge) / (2 area), oriented inward
        let mut grad_phi = [[0.0; 2]; 3];
        for (i, g) in grad_phi.iter_mut().enumerate() {
            let a = p[(i + 1) % 3];
            let b = p[(i + 2) % 3];
            *g = [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
        }
        Self { area, grad_phi }
    }
}

/// Immutable conforming triangulation with Dirichlet marking.
#[derive(Debug, Clone)]
pub struct Triangulation {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    dirichlet: Vec<bool>,
    free_index: Vec<Option<usize>>,
    free_nodes: Vec<usize>,
    geometry: Vec<TriangleGeometry>,
}

impl Triangulation {
    /// Validates and builds a triangulation.
    ///
    /// Clockwise triangles are reoriented; every other invariant violation is
    /// an error.
    pub fn new(
        nodes: Vec<[f64; 2]>,
        mut triangles: Vec<[usize; 3]>,
        dirichlet: Vec<bool>,
    ) -> Result<Self, MeshError> {
        assert_eq!(nodes.len(), dirichlet.len(), "one Dirichlet flag per node");
        if triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        if let Some(node) = nodes
            .iter()
            .position(|p| !(p[0].is_finite() && p[1].is_finite()))
        {
            return Err(MeshError::NonFiniteCoordinate { node });
        }

        let n_nodes = nodes.len();
        let bbox_area = bounding_box_area(&nodes);
        let mut geometry = Vec::with_capacity(triangles.len());
        let mut referenced = vec![false; n_nodes];
        for (k, tri) in triangles.iter_mut().enumerate() {
            for &node in tri.iter() {
                if node >= n_nodes {
                    return Err(MeshError::NodeOutOfRange {
                        triangle: k,
                        node,
                        n_nodes,
                    });
                }
                referenced[node] = true;
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::RepeatedNode { triangle: k });
            }
            let mut geo = TriangleGeometry::from_vertices(tri.map(|i| nodes[i]));
            if geo.area.abs() <= DEGENERATE_AREA * bbox_area {
                return Err(MeshError::DegenerateTriangle {
                    triangle: k,
                    area: geo.area.abs(),
                });
            }
            if geo.area < 0.0 {
                tri.swap(1, 2);
                geo = TriangleGeometry::from_vertices(tri.map(|i| nodes[i]));
            }
            geometry.push(geo);
        }
        if let Some(node) = referenced.iter().position(|r| !r) {
            return Err(MeshError::OrphanNode { node });
        }
        check_conformity(&triangles)?;
        if !dirichlet.iter().any(|&d| d) {
            return Err(MeshError::NoDirichletNodes);
        }

        let mut free_index = vec![None; n_nodes];
        let mut free_nodes = Vec::new();
        for (node, &is_dirichlet) in dirichlet.iter().enumerate() {
            if !is_dirichlet {
                free_index[node] = Some(free_nodes.len());
                free_nodes.push(node);
            }
        }

        Ok(Self {
            nodes,
            triangles,
            dirichlet,
            free_index,
            free_nodes,
            geometry,
        })
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Number of free (interior or Neumann) nodes.
    pub fn n_free(&self) -> usize {
        self.free_nodes.len()
    }

    pub fn is_dirichlet(&self, node: usize) -> bool {
        self.dirichlet[node]
    }

    pub fn dirichlet_flags(&self) -> &[bool] {
        &self.dirichlet
    }

    /// Position of `node` among the free nodes, `None` for Dirichlet nodes.
    pub fn free_index(&self, node: usize) -> Option<usize> {
        self.free_index[node]
    }

    /// Free nodes in free-index order.
    pub fn free_nodes(&self) -> &[usize] {
        &self.free_nodes
    }

    /// Precomputed geometry of triangle `k`.
    pub fn triangle_geometry(&self, k: usize) -> &TriangleGeometry {
        &self.geometry[k]
    }

    pub fn geometry(&self) -> &[TriangleGeometry] {
        &self.geometry
    }

    pub fn total_area(&self) -> f64 {
        self.geometry.iter().map(|g| g.area).sum()
    }

    /// Largest edge length over all triangles.
    pub fn max_diameter(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| (0..3).map(move |i| (t[i], t[(i + 1) % 3])))
            .map(|(a, b)| {
                let (p, q) = (self.nodes[a], self.nodes[b]);
                (p[0] - q[0]).hypot(p[1] - q[1])
            })
            .fold(0.0, f64::max)
    }

    /// Expands free-node values to all nodes, with zeros on Dirichlet nodes.
    pub fn extend_by_zero(&self, free_values: &[f64]) -> Vec<f64> {
        assert_eq!(free_values.len(), self.n_free());
        let mut all = vec![0.0; self.n_nodes()];
        for (&node, &v) in self.free_nodes.iter().zip(free_values) {
            all[node] = v;
        }
        all
    }

    /// Parses the plain-text mesh format.
    pub fn parse(text: &str) -> Result<Self, MeshError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let n_nodes = parse_header(&mut lines, "nodes")?;
        let mut nodes = Vec::with_capacity(n_nodes.min(1 << 20));
        let mut dirichlet = Vec::with_capacity(n_nodes.min(1 << 20));
        for _ in 0..n_nodes {
            let (line, fields) = next_record(&mut lines, 3, "node")?;
            let x = parse_field::<f64>(line, fields[0], "x coordinate")?;
            let y = parse_field::<f64>(line, fields[1], "y coordinate")?;
            let flag = match fields[2] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(MeshError::Parse {
                        line,
                        message: format!("Dirichlet flag must be 0 or 1, got {other:?}"),
                    })
                }
            };
            nodes.push([x, y]);
            dirichlet.push(flag);
        }

        let n_triangles = parse_header(&mut lines, "triangles")?;
        let mut triangles = Vec::with_capacity(n_triangles.min(1 << 20));
        for _ in 0..n_triangles {
            let (line, fields) = next_record(&mut lines, 3, "triangle")?;
            let mut tri = [0usize; 3];
            for (slot, field) in tri.iter_mut().zip(&fields) {
                *slot = parse_field::<usize>(line, field, "node index")?;
            }
            triangles.push(tri);
        }
        if let Some((line, _)) = lines.next() {
            return Err(MeshError::Parse {
                line,
                message: "unexpected content after the triangle list".into(),
            });
        }

        Self::new(nodes, triangles, dirichlet)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MeshError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Serializes to the plain-text mesh format. Coordinates use the shortest
    /// round-trip representation, so `parse(to_text())` is bit-identical.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "nodes {}", self.n_nodes()).unwrap();
        for (p, &d) in self.nodes.iter().zip(&self.dirichlet) {
            writeln!(out, "{:?} {:?} {}", p[0], p[1], u8::from(d)).unwrap();
        }
        writeln!(out, "triangles {}", self.n_triangles()).unwrap();
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2]).unwrap();
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MeshError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn bounding_box_area(nodes: &[[f64; 2]]) -> f64 {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in nodes {
        for c in 0..2 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    (hi[0] - lo[0]) * (hi[1] - lo[1])
}

/// Every directed edge may occur at most once. With CCW orientation this means
/// an interior edge is seen once in each direction and no edge has three
/// incident triangles.
fn check_conformity(triangles: &[[usize; 3]]) -> Result<(), MeshError> {
    let mut seen: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * triangles.len());
    for (k, t) in triangles.iter().enumerate() {
        for i in 0..3 {
            let edge = (t[i], t[(i + 1) % 3]);
            if seen.insert(edge, k).is_some() {
                return Err(MeshError::NonConformingEdge {
                    from: edge.0,
                    to: edge.1,
                });
            }
        }
    }
    Ok(())
}

fn parse_header<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    keyword: &str,
) -> Result<usize, MeshError> {
    let (line, text) = lines.next().ok_or_else(|| MeshError::Parse {
        line: 0,
        message: format!("missing `{keyword} <count>` header"),
    })?;
    let mut fields = text.split_whitespace();
    if fields.next() != Some(keyword) {
        return Err(MeshError::Parse {
            line,
            message: format!("expected `{keyword} <count>`"),
        });
    }
    let count = fields.next().ok_or_else(|| MeshError::Parse {
        line,
        message: format!("missing {keyword} count"),
    })?;
    let count = parse_field::<usize>(line, count, "count")?;
    if fields.next().is_some() {
        return Err(MeshError::Parse {
            line,
            message: "trailing fields after count".into(),
        });
    }
    Ok(count)
}

fn next_record<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    n_fields: usize,
    what: &str,
) -> Result<(usize, Vec<&'a str>), MeshError> {
    let (line, text) = lines.next().ok_or_else(|| MeshError::Parse {
        line: 0,
        message: format!("unexpected end of file while reading {what} records"),
    })?;
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != n_fields {
        return Err(MeshError::Parse {
            line,
            message: format!(
                "{what} record needs {n_fields} fields, found {}",
                fields.len()
            ),
        });
    }
    Ok((line, fields))
}

fn parse_field<T: std::str::FromStr>(line: usize, field: &str, what: &str) -> Result<T, MeshError> {
    field.parse().map_err(|_| MeshError::Parse {
        line,
        message: format!("invalid {what} {field:?}"),
    })
}

/// Structured triangulation of the unit disk.
///
/// With `n = refinement`, ring `i` (for `i = 1..=n`) sits at radius `i / n`
/// and holds `round(2 pi i)` equally spaced nodes, so the arc spacing matches
/// the radial spacing and elements are close to equilateral. The centre is a
/// single node. Consecutive rings are stitched by walking both rings in angle
/// order. All nodes on the outer ring are Dirichlet.
pub fn generate_disk_mesh(refinement: usize) -> Triangulation {
    assert!(refinement >= 1, "refinement must be at least 1");
    let n = refinement;
    let mut nodes = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize];
    let mut ring_len = vec![1usize];
    for i in 1..=n {
        ring_start.push(nodes.len());
        let m_i = (2.0 * PI * i as f64).round() as usize;
        ring_len.push(m_i);
        let radius = i as f64 / n as f64;
        for j in 0..m_i {
            let theta = 2.0 * PI * j as f64 / m_i as f64;
            let (s, c) = theta.sin_cos();
            nodes.push(if i == n {
                [c, s]
            } else {
                [radius * c, radius * s]
            });
        }
    }

    let mut triangles = Vec::with_capacity(2 * nodes.len());
    for i in 1..=n {
        stitch_rings(
            (ring_start[i - 1], ring_len[i - 1]),
            (ring_start[i], ring_len[i]),
            &mut triangles,
        );
    }

    let dirichlet = nodes
        .iter()
        .map(|p| (p[0].hypot(p[1]) - 1.0).abs() <= CIRCLE_TOL)
        .collect();
    Triangulation::new(nodes, triangles, dirichlet).expect("generated disk mesh is valid")
}

/// Triangulates the annulus between an inner ring and an outer ring whose
/// nodes are stored in increasing angle starting at angle 0.
fn stitch_rings(inner: (usize, usize), outer: (usize, usize), out: &mut Vec<[usize; 3]>) {
    let (is, il) = inner;
    let (os, ol) = outer;
    if il == 1 {
        for j in 0..ol {
            out.push([is, os + j, os + (j + 1) % ol]);
        }
        return;
    }
    // Angles measured in units of a full turn; index il (or ol) wraps to 0.
    let angle_in = |a: usize| a as f64 / il as f64;
    let angle_out = |b: usize| b as f64 / ol as f64;
    let (mut a, mut b) = (0usize, 0usize);
    while a < il || b < ol {
        let advance_outer = if a == il {
            true
        } else if b == ol {
            false
        } else {
            angle_out(b + 1) <= angle_in(a + 1)
        };
        if advance_outer {
            out.push([is + a % il, os + b, os + (b + 1) % ol]);
            b += 1;
        } else {
            out.push([is + a % il, os + b % ol, is + (a + 1) % il]);
            a += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "\
# unit square, centre node free
nodes 5
0 0 1
1 0 1
1 1 1
0 1 1
0.5 0.5 0
triangles 4
0 1 4
1 2 4
2 3 4
3 0 4
";

    #[test]
    fn reference_triangle_geometry() {
        let g = TriangleGeometry::from_vertices([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(g.area, 0.5);
        assert_eq!(g.grad_phi, [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn geometry_is_translation_invariant_and_scales() {
        let p = [[0.3, -0.2], [1.1, 0.4], [0.2, 0.9]];
        let g = TriangleGeometry::from_vertices(p);
        let shifted = TriangleGeometry::from_vertices(p.map(|q| [q[0] + 7.5, q[1] - 3.25]));
        assert!((g.area - shifted.area).abs() < 1e-12);
        for i in 0..3 {
            for c in 0..2 {
                assert!((g.grad_phi[i][c] - shifted.grad_phi[i][c]).abs() < 1e-11);
            }
        }
        let scaled = TriangleGeometry::from_vertices(p.map(|q| [2.0 * q[0], 2.0 * q[1]]));
        assert!((scaled.area - 4.0 * g.area).abs() < 1e-12);
        for i in 0..3 {
            for c in 0..2 {
                assert!((scaled.grad_phi[i][c] - 0.5 * g.grad_phi[i][c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradients_sum_to_zero_on_disk() {
        let mesh = generate_disk_mesh(4);
        for g in mesh.geometry() {
            let scale = g
                .grad_phi
                .iter()
                .flatten()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            for c in 0..2 {
                let sum: f64 = g.grad_phi.iter().map(|v| v[c]).sum();
                assert!(sum.abs() <= 1e-14 * scale.max(1.0) * 4.0, "sum {sum}");
            }
        }
    }

    #[test]
    fn coarse_disk_is_valid() {
        let mesh = generate_disk_mesh(1);
        assert_eq!(mesh.n_nodes(), 7);
        assert_eq!(mesh.n_triangles(), 6);
        assert_eq!(mesh.n_free(), 1);
        assert!(mesh.geometry().iter().all(|g| g.area > 0.0));
        for node in 1..7 {
            assert!(mesh.is_dirichlet(node));
            let p = mesh.nodes()[node];
            assert!((p[0].hypot(p[1]) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn disk_node_counts() {
        for n in 1..12 {
            let mesh = generate_disk_mesh(n);
            let ring = |i: usize| (2.0 * PI * i as f64).round() as usize;
            assert_eq!(mesh.n_nodes(), 1 + (1..=n).map(ring).sum::<usize>());
            assert_eq!(mesh.n_free(), mesh.n_nodes() - ring(n));
            // Euler relation for a triangulated disk
            assert_eq!(mesh.n_triangles(), 2 * mesh.n_nodes() - ring(n) - 2);
        }
        let sizes: Vec<usize> = [13, 19, 26]
            .iter()
            .map(|&n| generate_disk_mesh(n).n_nodes())
            .collect();
        assert_eq!(sizes, vec![573, 1195, 2207]);
    }

    #[test]
    fn disk_diameter_decreases() {
        let h: Vec<f64> = (1..8)
            .map(|n| generate_disk_mesh(n).max_diameter())
            .collect();
        assert!(h.windows(2).all(|w| w[1] < w[0]), "{h:?}");
    }

    #[test]
    fn disk_area_converges_to_pi() {
        let errors: Vec<f64> = [4, 8, 16]
            .iter()
            .map(|&n| (PI - generate_disk_mesh(n).total_area()).abs())
            .collect();
        assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
        // second order: halving h divides the error by about 4
        assert!(errors[1] / errors[2] > 3.5);
    }

    #[test]
    fn parses_square() {
        let mesh = Triangulation::parse(SQUARE).unwrap();
        assert_eq!(mesh.n_nodes(), 5);
        assert_eq!(mesh.n_triangles(), 4);
        assert_eq!(mesh.n_free(), 1);
        assert_eq!(mesh.free_index(4), Some(0));
        assert_eq!(mesh.free_index(0), None);
    }

    #[test]
    fn two_triangle_square() {
        let text = "nodes 4\n0 0 1\n1 0 1\n1 1 0\n0 1 1\ntriangles 2\n0 1 2\n0 2 3\n";
        let mesh = Triangulation::parse(text).unwrap();
        assert_eq!(mesh.n_nodes(), 4);
        assert_eq!(mesh.n_triangles(), 2);
    }

    #[test]
    fn clockwise_triangle_is_reoriented() {
        let text = "nodes 4\n0 0 1\n1 0 1\n1 1 0\n0 1 1\ntriangles 2\n0 2 1\n0 2 3\n";
        let mesh = Triangulation::parse(text).unwrap();
        assert_eq!(mesh.triangles()[0], [0, 1, 2]);
        assert!(mesh.geometry().iter().all(|g| g.area > 0.0));
    }

    #[test]
    fn orphan_node_is_rejected() {
        let text = "nodes 5\n0 0 1\n1 0 1\n1 1 0\n0 1 1\n5 5 1\ntriangles 2\n0 1 2\n0 2 3\n";
        let err = Triangulation::parse(text).unwrap_err();
        assert!(matches!(err, MeshError::OrphanNode { node: 4 }));
        assert!(err.to_string().contains("orphan node"));
    }

    #[test]
    fn degenerate_triangle_is_rejected() {
        let text = "nodes 4\n0 0 1\n1 0 1\n2 0 0\n0 1 1\ntriangles 2\n0 1 2\n0 1 3\n";
        let err = Triangulation::parse(text).unwrap_err();
        assert!(matches!(
            err,
            MeshError::DegenerateTriangle { triangle: 0, .. }
        ));
    }

    #[test]
    fn missing_dirichlet_is_rejected() {
        let text = "nodes 3\n0 0 0\n1 0 0\n0 1 0\ntriangles 1\n0 1 2\n";
        assert!(matches!(
            Triangulation::parse(text),
            Err(MeshError::NoDirichletNodes)
        ));
    }

    #[test]
    fn overlapping_triangles_are_rejected() {
        let text = "nodes 4\n0 0 1\n1 0 1\n0 1 1\n1 1 1\ntriangles 2\n0 1 2\n0 1 3\n";
        assert!(matches!(
            Triangulation::parse(text),
            Err(MeshError::NonConformingEdge { .. })
        ));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "nodes 2\n0 0 1\n0 zero 1\n";
        match Triangulation::parse(text) {
            Err(MeshError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match Triangulation::parse("nodes 1\n0 0 2\n") {
            Err(MeshError::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("flag"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            Triangulation::parse("vertices 3\n"),
            Err(MeshError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let text = "nodes 3\n0 0 1\n1 0 1\n0 1 1\ntriangles 1\n0 1 3\n";
        assert!(matches!(
            Triangulation::parse(text),
            Err(MeshError::NodeOutOfRange { node: 3, .. })
        ));
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mesh = generate_disk_mesh(5);
        let back = Triangulation::parse(&mesh.to_text()).unwrap();
        assert_eq!(mesh.nodes(), back.nodes());
        assert_eq!(mesh.triangles(), back.triangles());
        assert_eq!(mesh.dirichlet_flags(), back.dirichlet_flags());
    }
}
