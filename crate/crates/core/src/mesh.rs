//! Quadrilateral meshes of the unit square.
//!
//! Elements are stored as four counter-clockwise vertex indices. Local vertex
//! `k` is the image of master corner `k` of `[-1,1]^2`, taken in the order
//! `(-1,-1), (1,-1), (1,1), (-1,1)`, and local edge `k` runs from local
//! vertex `k` to local vertex `k+1`.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::export::write_legacy_vtk;
use crate::{Error, Point, Result};

/// Master coordinates of the four element corners.
pub const MASTER_CORNERS: [Point; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

const PERTURB_RETRIES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeTag {
    Interior,
    Dirichlet,
    Neumann,
}

#[derive(Clone, Debug)]
pub struct Edge {
    /// Endpoints, sorted ascending.
    pub vertices: [usize; 2],
    /// `(element, local edge)` pairs touching this edge.
    pub elements: Vec<(usize, usize)>,
    pub tag: EdgeTag,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.elements.len() == 1
    }
}

/// A straight line across which a coefficient may jump. Elements must not
/// straddle it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InterfaceLine {
    Vertical(f64),
    Horizontal(f64),
}

impl fmt::Display for InterfaceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InterfaceLine::Vertical(x) => write!(f, "x = {x}"),
            InterfaceLine::Horizontal(y) => write!(f, "y = {y}"),
        }
    }
}

/// Bilinear map from the master element onto one mesh element.
#[derive(Clone, Copy, Debug)]
pub struct ElementMap {
    pub element: usize,
    pub corners: [Point; 4],
}

impl ElementMap {
    fn shape(xi: Point) -> [f64; 4] {
        let [s, t] = xi;
        [
            0.25 * (1.0 - s) * (1.0 - t),
            0.25 * (1.0 + s) * (1.0 - t),
            0.25 * (1.0 + s) * (1.0 + t),
            0.25 * (1.0 - s) * (1.0 + t),
        ]
    }

    pub fn map(&self, xi: Point) -> Point {
        let n = Self::shape(xi);
        let mut x = [0.0; 2];
        for (c, w) in self.corners.iter().zip(n) {
            x[0] += w * c[0];
            x[1] += w * c[1];
        }
        x
    }

    /// `J[i][j] = d x_i / d xi_j`.
    pub fn jacobian(&self, xi: Point) -> [[f64; 2]; 2] {
        let [s, t] = xi;
        let ds = [-(1.0 - t), 1.0 - t, 1.0 + t, -(1.0 + t)];
        let dt = [-(1.0 - s), -(1.0 + s), 1.0 + s, 1.0 - s];
        let mut j = [[0.0; 2]; 2];
        for k in 0..4 {
            for i in 0..2 {
                j[i][0] += 0.25 * ds[k] * self.corners[k][i];
                j[i][1] += 0.25 * dt[k] * self.corners[k][i];
            }
        }
        j
    }

    pub fn det(&self, xi: Point) -> f64 {
        let j = self.jacobian(xi);
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }

    /// Newton inversion of the map. Returns master coordinates even when they
    /// fall outside `[-1,1]^2`; the caller decides what is inside.
    pub fn inverse(&self, x: Point, tol: f64) -> Option<Point> {
        let mut xi = [0.0, 0.0];
        for _ in 0..50 {
            let f = self.map(xi);
            let r = [f[0] - x[0], f[1] - x[1]];
            let j = self.jacobian(xi);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det.abs() < f64::MIN_POSITIVE {
                return None;
            }
            let d0 = (j[1][1] * r[0] - j[0][1] * r[1]) / det;
            let d1 = (-j[1][0] * r[0] + j[0][0] * r[1]) / det;
            xi[0] -= d0;
            xi[1] -= d1;
            if d0.abs().max(d1.abs()) < tol {
                return Some(xi);
            }
        }
        None
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    elements: Vec<[usize; 4]>,
    edges: Vec<Edge>,
    element_edges: Vec<[usize; 4]>,
    diameters: Vec<f64>,
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Twice the Jacobian determinant at each corner; positive for a convex,
/// counter-clockwise quad. The determinant is bilinear in the master
/// coordinates, so positivity at the corners implies positivity everywhere.
fn corner_dets(c: &[Point; 4]) -> [f64; 4] {
    let mut d = [0.0; 4];
    for k in 0..4 {
        let next = c[(k + 1) % 4];
        let prev = c[(k + 3) % 4];
        d[k] = cross(sub(next, c[k]), sub(prev, c[k]));
    }
    d
}

/// Grid line positions on `[0,1]` with `n` cells. Between consecutive
/// breakpoints the cell sizes form a geometric progression whose last cell is
/// `ratio` times the first. `n` must be divisible by the number of segments.
pub fn graded_lines(n: usize, ratio: f64, breaks: &[f64]) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidMesh("cell count must be at least 1".into()));
    }
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::InvalidMesh(format!(
            "grading ratio must be positive, got {ratio}"
        )));
    }
    let mut stops = vec![0.0];
    for &b in breaks {
        if !(b > *stops.last().unwrap() && b < 1.0) {
            return Err(Error::InvalidMesh(format!(
                "breakpoints must be increasing inside (0,1), got {b}"
            )));
        }
        stops.push(b);
    }
    stops.push(1.0);
    let segments = stops.len() - 1;
    if !n.is_multiple_of(segments) {
        return Err(Error::InvalidMesh(format!(
            "{n} cells cannot be split evenly over {segments} segments"
        )));
    }
    let per = n / segments;
    let growth = if per > 1 {
        ratio.powf(1.0 / (per - 1) as f64)
    } else {
        1.0
    };
    let sizes: Vec<f64> = (0..per).map(|i| growth.powi(i as i32)).collect();
    let total: f64 = sizes.iter().sum();

    let mut lines = Vec::with_capacity(n + 1);
    lines.push(0.0);
    for w in stops.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut acc = 0.0;
        for s in &sizes[..per - 1] {
            acc += s;
            lines.push(a + (b - a) * acc / total);
        }
        lines.push(b);
    }
    Ok(lines)
}

impl Mesh {
    /// Builds a mesh from raw vertices and counter-clockwise quads. All
    /// boundary edges are tagged Dirichlet.
    pub fn from_parts(vertices: Vec<Point>, elements: Vec<[usize; 4]>) -> Result<Mesh> {
        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut element_edges = Vec::with_capacity(elements.len());
        let mut diameters = Vec::with_capacity(elements.len());

        for (e, quad) in elements.iter().enumerate() {
            if quad.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!(
                    "element {e} references a missing vertex"
                )));
            }
            let corners = quad.map(|v| vertices[v]);
            if let Some(det) = corner_dets(&corners).into_iter().find(|&d| d <= 0.0) {
                return Err(Error::NonPositiveJacobian {
                    element: e,
                    det: det / 4.0,
                });
            }
            let mut diam: f64 = 0.0;
            for a in 0..4 {
                for b in a + 1..4 {
                    diam = diam.max(dist(corners[a], corners[b]));
                }
            }
            diameters.push(diam);

            let mut ids = [0; 4];
            for k in 0..4 {
                let (a, b) = (quad[k], quad[(k + 1) % 4]);
                let key = [a.min(b), a.max(b)];
                let id = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        vertices: key,
                        elements: Vec::with_capacity(2),
                        tag: EdgeTag::Interior,
                    });
                    edges.len() - 1
                });
                edges[id].elements.push((e, k));
                ids[k] = id;
            }
            element_edges.push(ids);
        }

        for (i, edge) in edges.iter_mut().enumerate() {
            match edge.elements.len() {
                1 => edge.tag = EdgeTag::Dirichlet,
                2 => edge.tag = EdgeTag::Interior,
                n => {
                    return Err(Error::InvalidMesh(format!(
                        "edge {i} is shared by {n} elements"
                    )))
                }
            }
        }

        Ok(Mesh {
            vertices,
            elements,
            edges,
            element_edges,
            diameters,
        })
    }

    /// Tensor-product mesh on the given grid lines.
    pub fn tensor(xs: &[f64], ys: &[f64]) -> Result<Mesh> {
        if xs.len() < 2 || ys.len() < 2 {
            return Err(Error::InvalidMesh("need at least two grid lines".into()));
        }
        let (nx, ny) = (xs.len() - 1, ys.len() - 1);
        let mut vertices = Vec::with_capacity(xs.len() * ys.len());
        for &y in ys {
            for &x in xs {
                vertices.push([x, y]);
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut elements = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                elements.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        Mesh::from_parts(vertices, elements)
    }

    pub fn uniform(nx: usize, ny: usize) -> Result<Mesh> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidMesh(format!(
                "uniform mesh needs positive counts, got {nx}x{ny}"
            )));
        }
        let xs: Vec<f64> = (0..=nx).map(|i| i as f64 / nx as f64).collect();
        let ys: Vec<f64> = (0..=ny).map(|j| j as f64 / ny as f64).collect();
        Mesh::tensor(&xs, &ys)
    }

    /// Geometrically graded mesh. `ratio` is the size of the last cell in
    /// each direction divided by the first, so `ratio < 1` concentrates cells
    /// near `x = 1` and `y = 1`.
    pub fn graded(nx: usize, ny: usize, ratio: f64) -> Result<Mesh> {
        Mesh::graded_with_breaks(nx, ny, ratio, &[], &[])
    }

    /// Graded mesh where the grading restarts at each breakpoint, so the
    /// breakpoints are exact grid lines.
    pub fn graded_with_breaks(
        nx: usize,
        ny: usize,
        ratio: f64,
        x_breaks: &[f64],
        y_breaks: &[f64],
    ) -> Result<Mesh> {
        let xs = graded_lines(nx, ratio, x_breaks)?;
        let ys = graded_lines(ny, ratio, y_breaks)?;
        Mesh::tensor(&xs, &ys)
    }

    /// Moves every interior vertex by a seeded random offset of at most
    /// `amplitude` times the length of its shortest incident edge. Draws that
    /// would fold an element are repeated.
    pub fn perturb_unstructured(&self, amplitude: f64, seed: u64) -> Result<Mesh> {
        if !(0.0..0.5).contains(&amplitude) {
            return Err(Error::InvalidMesh(format!(
                "perturbation amplitude must be in [0, 0.5), got {amplitude}"
            )));
        }
        let mut on_boundary = vec![false; self.vertices.len()];
        let mut spacing = vec![f64::INFINITY; self.vertices.len()];
        for edge in &self.edges {
            let [a, b] = edge.vertices;
            let len = dist(self.vertices[a], self.vertices[b]);
            spacing[a] = spacing[a].min(len);
            spacing[b] = spacing[b].min(len);
            if edge.is_boundary() {
                on_boundary[a] = true;
                on_boundary[b] = true;
            }
        }
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); self.vertices.len()];
        for (e, quad) in self.elements.iter().enumerate() {
            for &v in quad {
                incident[v].push(e);
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vertices = self.vertices.clone();
        if amplitude > 0.0 {
            for v in 0..vertices.len() {
                if on_boundary[v] {
                    continue;
                }
                let origin = self.vertices[v];
                let reach = amplitude * spacing[v];
                let mut accepted = false;
                for _ in 0..PERTURB_RETRIES {
                    let dx: f64 = rng.random_range(-1.0..=1.0);
                    let dy: f64 = rng.random_range(-1.0..=1.0);
                    vertices[v] = [origin[0] + reach * dx, origin[1] + reach * dy];
                    let valid = incident[v].iter().all(|&e| {
                        let c = self.elements[e].map(|i| vertices[i]);
                        corner_dets(&c).iter().all(|&d| d > 0.0)
                    });
                    if valid {
                        accepted = true;
                        break;
                    }
                }
                if !accepted {
                    return Err(Error::TangledPerturbation {
                        vertex: v,
                        retries: PERTURB_RETRIES,
                    });
                }
            }
        }
        let mut mesh = Mesh::from_parts(vertices, self.elements.clone())?;
        for (new, old) in mesh.edges.iter_mut().zip(&self.edges) {
            new.tag = old.tag;
        }
        Ok(mesh)
    }

    /// Splits every quad into four through its edge midpoints and center.
    /// Boundary tags are inherited from the parent edges.
    pub fn refine_uniform(&self) -> Mesh {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend(self.edges.iter().map(|e| {
            let [a, b] = e.vertices.map(|v| self.vertices[v]);
            [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
        }));
        let center_base = vertices.len();
        vertices.extend((0..self.elements.len()).map(|e| self.element_map(e).map([0.0, 0.0])));

        let mut elements = Vec::with_capacity(4 * self.elements.len());
        for (e, quad) in self.elements.iter().enumerate() {
            let m = self.element_edges[e].map(|id| nv + id);
            let c = center_base + e;
            let [v0, v1, v2, v3] = *quad;
            elements.push([v0, m[0], c, m[3]]);
            elements.push([m[0], v1, m[1], c]);
            elements.push([c, m[1], v2, m[2]]);
            elements.push([m[3], c, m[2], v3]);
        }

        let mut mesh = Mesh::from_parts(vertices, elements)
            .expect("midpoint refinement of a valid mesh is valid");
        for edge in mesh.edges.iter_mut().filter(|e| e.is_boundary()) {
            let mid = edge.vertices[1];
            debug_assert!(mid >= nv && mid < center_base);
            edge.tag = self.edges[mid - nv].tag;
        }
        mesh
    }

    /// Re-tags boundary edges; `rule` receives the edge midpoint.
    pub fn with_boundary_tags(mut self, rule: impl Fn(Point) -> EdgeTag) -> Mesh {
        for edge in self.edges.iter_mut().filter(|e| e.elements.len() == 1) {
            let [a, b] = edge.vertices.map(|v| self.vertices[v]);
            edge.tag = match rule([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]) {
                EdgeTag::Interior => EdgeTag::Dirichlet,
                tag => tag,
            };
        }
        self
    }

    /// First line that crosses the interior of element `e`, if any.
    pub fn element_crossed_by(&self, e: usize, lines: &[InterfaceLine]) -> Option<InterfaceLine> {
        const TOL: f64 = 1e-12;
        let quad = &self.elements[e];
        lines.iter().copied().find(|line| {
            let (axis, c) = match *line {
                InterfaceLine::Vertical(x) => (0, x),
                InterfaceLine::Horizontal(y) => (1, y),
            };
            let lo = quad.iter().map(|&v| self.vertices[v][axis]).fold(f64::INFINITY, f64::min);
            let hi = quad.iter().map(|&v| self.vertices[v][axis]).fold(f64::NEG_INFINITY, f64::max);
            lo < c - TOL && hi > c + TOL
        })
    }

    /// Fails if any element interior is crossed by one of the lines.
    pub fn check_alignment(&self, lines: &[InterfaceLine]) -> Result<()> {
        for e in 0..self.elements.len() {
            if let Some(line) = self.element_crossed_by(e, lines) {
                return Err(Error::MisalignedDiscontinuity {
                    element: e,
                    line: line.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn elements(&self) -> &[[usize; 4]] {
        &self.elements
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Global edge ids of the element's four local edges.
    pub fn element_edges(&self, e: usize) -> [usize; 4] {
        self.element_edges[e]
    }

    /// Tags of the element's four local edges.
    pub fn element_edge_tags(&self, e: usize) -> [EdgeTag; 4] {
        self.element_edges[e].map(|id| self.edges[id].tag)
    }

    pub fn element_map(&self, e: usize) -> ElementMap {
        ElementMap {
            element: e,
            corners: self.elements[e].map(|v| self.vertices[v]),
        }
    }

    /// Largest vertex-to-vertex distance of the element.
    pub fn diameter(&self, e: usize) -> f64 {
        self.diameters[e]
    }

    pub fn max_diameter(&self) -> f64 {
        self.diameters.iter().cloned().fold(0.0, f64::max)
    }

    pub fn element_area(&self, e: usize) -> f64 {
        let c = self.elements[e].map(|v| self.vertices[v]);
        // Shoelace; exact for straight-sided quads.
        0.5 * (0..4).map(|k| cross(c[k], c[(k + 1) % 4])).sum::<f64>()
    }

    pub fn area(&self) -> f64 {
        (0..self.elements.len()).map(|e| self.element_area(e)).sum()
    }

    /// Writes the bare mesh as a legacy ASCII VTK unstructured grid.
    pub fn write_vtk(&self, path: &Path) -> Result<()> {
        let cells: Vec<[usize; 4]> = self.elements.clone();
        write_legacy_vtk(path, "avsfe mesh", &self.vertices, &cells, &[])
    }
}
