//! Element-local test problems.
//!
//! On each element `K` the test space is the broken space
//! `V(K) = {(v, w)}` with the inner product
//!
//! ```text
//! ((r, z); (v, w))_K = int_K h^2 grad r . grad v + r v + z . w
//! ```
//!
//! and the local bilinear form acting on a trial pair `(u, q)` is
//!
//! ```text
//! B_K((u, q); (v, w)) = int_K (q - D grad u) . w + q . grad v + (b . grad u) v
//!                       - int_{dK interior} (q . n) v
//! ```
//!
//! Edges on the Dirichlet or Neumann boundary carry no edge term; Neumann
//! data enters through the load. Writing `G` for the Gram matrix of the
//! inner product and `B` for the matrix of `B_K`, the optimal test functions
//! have coefficients `T = G^{-1} B` and the element contributes
//! `B^T G^{-1} B` to the global system.

use std::io::Write as _;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::fe_space::{gauss_legendre, gauss_rule, QuadratureRule, ShapeValues, TensorBasis, TestSpaceLocal, TestTrace};
use crate::mesh::{EdgeTag, ElementMap, Mesh};
use crate::problem::{CoefficientField, Scenario};
use crate::{Error, Point, Result};

/// Unit direction `d xi / d s` of local edge `k` in master coordinates,
/// consistent with counter-clockwise traversal.
const EDGE_DIR: [Point; 4] = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];

fn edge_point(k: usize, s: f64) -> Point {
    match k {
        0 => [s, -1.0],
        1 => [1.0, s],
        2 => [-s, 1.0],
        _ => [-1.0, -s],
    }
}

/// Discretization parameters of the local problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LocalOptions {
    pub trial_degree: usize,
    pub enrichment: usize,
    pub test_trace: TestTrace,
}

impl LocalOptions {
    pub fn new(trial_degree: usize, enrichment: usize) -> Self {
        LocalOptions {
            trial_degree,
            enrichment,
            test_trace: TestTrace::default(),
        }
    }

    pub fn test_degree(&self) -> usize {
        self.trial_degree + self.enrichment
    }

    /// Gauss points per direction used for element and edge integrals.
    pub fn quadrature_points(&self) -> usize {
        self.test_degree() + 2
    }
}

/// Basis values at the volume and edge quadrature points of the master
/// element, shared by all elements of a mesh.
#[derive(Clone, Debug)]
pub struct ReferenceTables {
    pub options: LocalOptions,
    pub trial: TensorBasis,
    pub test: TensorBasis,
    pub quad: QuadratureRule,
    pub edge_weights: Vec<f64>,
    edge_xi: [Vec<Point>; 4],
    trial_vol: Vec<ShapeValues>,
    test_vol: Vec<ShapeValues>,
    trial_edge: [Vec<ShapeValues>; 4],
    test_edge: [Vec<ShapeValues>; 4],
}

impl ReferenceTables {
    pub fn new(options: LocalOptions) -> Result<Self> {
        let n = options.quadrature_points();
        Self::with_points(options, n)
    }

    pub fn with_points(options: LocalOptions, n: usize) -> Result<Self> {
        let trial = TensorBasis::new(options.trial_degree);
        let test = TensorBasis::new(options.test_degree());
        let quad = gauss_rule(n)?;
        let (s, edge_weights) = gauss_legendre(n)?;
        let edge_xi: [Vec<Point>; 4] =
            std::array::from_fn(|k| s.iter().map(|&t| edge_point(k, t)).collect());
        let table = |b: &TensorBasis, pts: &[Point]| -> Vec<ShapeValues> {
            pts.iter().map(|&xi| b.eval_unchecked(xi)).collect()
        };
        Ok(ReferenceTables {
            trial_vol: table(&trial, &quad.points),
            test_vol: table(&test, &quad.points),
            trial_edge: std::array::from_fn(|k| table(&trial, &edge_xi[k])),
            test_edge: std::array::from_fn(|k| table(&test, &edge_xi[k])),
            options,
            trial,
            test,
            quad,
            edge_weights,
            edge_xi,
        })
    }

    pub fn trial_len(&self) -> usize {
        self.trial.len()
    }
}

/// Physical data at one volume quadrature point.
struct PointGeometry {
    x: Point,
    /// quadrature weight times `det J`
    weight: f64,
    /// `J^{-T}` stored row-major
    jinv_t: [[f64; 2]; 2],
}

impl PointGeometry {
    fn new(map: &ElementMap, xi: Point, w: f64) -> Result<Self> {
        let j = map.jacobian(xi);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det <= 0.0 {
            return Err(Error::NonPositiveJacobian {
                element: map.element,
                det,
            });
        }
        Ok(PointGeometry {
            x: map.map(xi),
            weight: w * det,
            jinv_t: [
                [j[1][1] / det, -j[1][0] / det],
                [-j[0][1] / det, j[0][0] / det],
            ],
        })
    }

    fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        let m = &self.jinv_t;
        [m[0][0] * g[0] + m[0][1] * g[1], m[1][0] * g[0] + m[1][1] * g[1]]
    }
}

fn volume_geometry(map: &ElementMap, quad: &QuadratureRule) -> Result<Vec<PointGeometry>> {
    quad.points
        .iter()
        .zip(&quad.weights)
        .map(|(&xi, &w)| PointGeometry::new(map, xi, w))
        .collect()
}

/// Physical point, line weight (`w |dx/ds|`) and outward unit normal at the
/// edge quadrature points of local edge `k`.
fn edge_geometry(map: &ElementMap, tables: &ReferenceTables, k: usize) -> Vec<(Point, f64, [f64; 2])> {
    tables.edge_xi[k]
        .iter()
        .zip(&tables.edge_weights)
        .map(|(&xi, &w)| {
            let j = map.jacobian(xi);
            let d = EDGE_DIR[k];
            let t = [j[0][0] * d[0] + j[0][1] * d[1], j[1][0] * d[0] + j[1][1] * d[1]];
            let len = t[0].hypot(t[1]);
            (map.map(xi), w * len, [t[1] / len, -t[0] / len])
        })
        .collect()
}

fn diameter(map: &ElementMap) -> f64 {
    let c = &map.corners;
    let mut h: f64 = 0.0;
    for a in 0..4 {
        for b in a + 1..4 {
            h = h.max((c[a][0] - c[b][0]).hypot(c[a][1] - c[b][1]));
        }
    }
    h
}

/// Gram matrix of the `h`-weighted `H^1 x (L^2)^2` inner product in the
/// local test basis. `h` is the element diameter.
pub fn local_gram(map: &ElementMap, test: &TestSpaceLocal, tables: &ReferenceTables) -> Result<DMatrix<f64>> {
    let h2 = diameter(map).powi(2);
    let geo = volume_geometry(map, &tables.quad)?;
    let nv = test.v_len();
    let nw = test.w_len;
    let mut g = DMatrix::zeros(test.dim(), test.dim());
    let mut grads = vec![[0.0; 2]; nw];
    for (pg, sv) in geo.iter().zip(&tables.test_vol) {
        for (dst, src) in grads.iter_mut().zip(&sv.grads) {
            *dst = pg.grad(*src);
        }
        let w = pg.weight;
        for (a, &i) in test.active_v.iter().enumerate() {
            for (b, &k) in test.active_v.iter().enumerate() {
                let gg = grads[i][0] * grads[k][0] + grads[i][1] * grads[k][1];
                g[(a, b)] += w * (h2 * gg + sv.values[i] * sv.values[k]);
            }
        }
        for i in 0..nw {
            for k in 0..nw {
                let m = w * sv.values[i] * sv.values[k];
                g[(nv + i, nv + k)] += m;
                g[(nv + nw + i, nv + nw + k)] += m;
            }
        }
    }
    Ok(g)
}

/// Matrix of the local bilinear form: one row per test function, one column
/// per local trial function (`u` block, then `qx`, then `qy`).
pub fn local_bform(
    map: &ElementMap,
    edge_tags: [EdgeTag; 4],
    test: &TestSpaceLocal,
    coeffs: &CoefficientField,
    tables: &ReferenceTables,
) -> Result<DMatrix<f64>> {
    let geo = volume_geometry(map, &tables.quad)?;
    let nt = tables.trial_len();
    let nv = test.v_len();
    let nw = test.w_len;
    let (col_qx, col_qy) = (nt, 2 * nt);
    let (row_wx, row_wy) = (nv, nv + nw);
    let mut bm = DMatrix::zeros(test.dim(), 3 * nt);

    let mut trial_grad = vec![[0.0; 2]; nt];
    let mut test_grad = vec![[0.0; 2]; nw];
    for ((pg, tv), sv) in geo.iter().zip(&tables.trial_vol).zip(&tables.test_vol) {
        for (dst, src) in trial_grad.iter_mut().zip(&tv.grads) {
            *dst = pg.grad(*src);
        }
        for (dst, src) in test_grad.iter_mut().zip(&sv.grads) {
            *dst = pg.grad(*src);
        }
        let d = (coeffs.diffusion)(pg.x);
        let b = (coeffs.convection)(pg.x);
        let w = pg.weight;
        for j in 0..nt {
            let gu = trial_grad[j];
            let conv = b[0] * gu[0] + b[1] * gu[1];
            let dgu = [d[0][0] * gu[0] + d[0][1] * gu[1], d[1][0] * gu[0] + d[1][1] * gu[1]];
            let phi = tv.values[j];
            for (a, &i) in test.active_v.iter().enumerate() {
                let psi = sv.values[i];
                bm[(a, j)] += w * conv * psi;
                bm[(a, col_qx + j)] += w * phi * test_grad[i][0];
                bm[(a, col_qy + j)] += w * phi * test_grad[i][1];
            }
            for i in 0..nw {
                let psi = w * sv.values[i];
                bm[(row_wx + i, j)] -= dgu[0] * psi;
                bm[(row_wy + i, j)] -= dgu[1] * psi;
                bm[(row_wx + i, col_qx + j)] += phi * psi;
                bm[(row_wy + i, col_qy + j)] += phi * psi;
            }
        }
    }

    for (k, tag) in edge_tags.into_iter().enumerate() {
        if tag != EdgeTag::Interior {
            continue;
        }
        let edge = edge_geometry(map, tables, k);
        for ((_, w, n), (tv, sv)) in edge.iter().zip(tables.trial_edge[k].iter().zip(&tables.test_edge[k])) {
            for j in 0..nt {
                let phi = w * tv.values[j];
                for (a, &i) in test.active_v.iter().enumerate() {
                    let psi = sv.values[i];
                    bm[(a, col_qx + j)] -= phi * n[0] * psi;
                    bm[(a, col_qy + j)] -= phi * n[1] * psi;
                }
            }
        }
    }
    Ok(bm)
}

/// Local load: `int_K f v` plus `int g v` over Neumann edges for the `v`
/// rows, zero for the `w` rows.
pub fn local_load(
    map: &ElementMap,
    edge_tags: [EdgeTag; 4],
    test: &TestSpaceLocal,
    coeffs: &CoefficientField,
    tables: &ReferenceTables,
) -> Result<DVector<f64>> {
    let geo = volume_geometry(map, &tables.quad)?;
    let mut load = DVector::zeros(test.dim());
    for (pg, sv) in geo.iter().zip(&tables.test_vol) {
        let f = pg.weight * (coeffs.source)(pg.x);
        for (a, &i) in test.active_v.iter().enumerate() {
            load[a] += f * sv.values[i];
        }
    }
    for (k, tag) in edge_tags.into_iter().enumerate() {
        if tag != EdgeTag::Neumann {
            continue;
        }
        let edge = edge_geometry(map, tables, k);
        for ((x, w, _), sv) in edge.iter().zip(&tables.test_edge[k]) {
            let g = w * (coeffs.neumann)(*x);
            for (a, &i) in test.active_v.iter().enumerate() {
                load[a] += g * sv.values[i];
            }
        }
    }
    Ok(load)
}

/// Gram matrix, mixed matrix and load of one element.
#[derive(Clone, Debug)]
pub struct ElementSystem {
    pub element: usize,
    pub h: f64,
    pub test: TestSpaceLocal,
    pub gram: DMatrix<f64>,
    pub bform: DMatrix<f64>,
    pub load: DVector<f64>,
}

/// Coefficients `T = G^{-1} B` of the optimal test functions in the local
/// test basis; column `j` belongs to local trial function `j`.
#[derive(Clone, Debug)]
pub struct OptimalTestFunctions {
    pub element: usize,
    pub coeffs: DMatrix<f64>,
}

/// `A = B^T G^{-1} B` and `r = B^T G^{-1} F`.
#[derive(Clone, Debug)]
pub struct CondensedElement {
    pub element: usize,
    pub stiffness: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl ElementSystem {
    pub fn build(mesh: &Mesh, element: usize, scenario: &Scenario, tables: &ReferenceTables) -> Result<Self> {
        if let Some(line) = mesh.element_crossed_by(element, &scenario.interfaces) {
            return Err(Error::MisalignedDiscontinuity {
                element,
                line: line.to_string(),
            });
        }
        let map = mesh.element_map(element);
        let tags = mesh.element_edge_tags(element);
        let test = TestSpaceLocal::new(mesh, element, tables.options.test_degree(), tables.options.test_trace);
        Ok(ElementSystem {
            element,
            h: mesh.diameter(element),
            gram: local_gram(&map, &test, tables)?,
            bform: local_bform(&map, tags, &test, &scenario.coefficients, tables)?,
            load: local_load(&map, tags, &test, &scenario.coefficients, tables)?,
            test,
        })
    }

    fn cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        Cholesky::new(self.gram.clone()).ok_or(Error::GramNotSpd { element: self.element })
    }

    /// Solves the Riesz problems `G T = B` column by column.
    pub fn optimal_test(&self) -> Result<OptimalTestFunctions> {
        let chol = self.cholesky()?;
        Ok(OptimalTestFunctions {
            element: self.element,
            coeffs: chol.solve(&self.bform),
        })
    }

    /// Condensed stiffness via `C = L^{-1} B`, `A = C^T C`, which is
    /// symmetric by construction.
    pub fn condense(&self) -> Result<CondensedElement> {
        let chol = self.cholesky()?;
        let l = chol.l_dirty();
        let c = l
            .solve_lower_triangular(&self.bform)
            .ok_or(Error::GramNotSpd { element: self.element })?;
        let f = l
            .solve_lower_triangular(&self.load)
            .ok_or(Error::GramNotSpd { element: self.element })?;
        Ok(CondensedElement {
            element: self.element,
            stiffness: c.tr_mul(&c),
            rhs: c.tr_mul(&f),
        })
    }

    /// Riesz lift of the local residual: `sqrt(r^T G^{-1} r)` with
    /// `r = F - B x` for local trial coefficients `x`.
    pub fn residual_norm(&self, local: &DVector<f64>) -> Result<f64> {
        let chol = self.cholesky()?;
        let r = &self.load - &self.bform * local;
        let z = chol
            .l_dirty()
            .solve_lower_triangular(&r)
            .ok_or(Error::GramNotSpd { element: self.element })?;
        Ok(z.norm())
    }

    /// Writes `G`, `B` and `T` as whitespace separated text files
    /// `element_<id>_{G,B,T}.txt` in `dir`.
    pub fn write_debug(&self, dir: &Path) -> Result<()> {
        let t = self.optimal_test()?;
        for (name, m) in [("G", &self.gram), ("B", &self.bform), ("T", &t.coeffs)] {
            let path = dir.join(format!("element_{}_{name}.txt", self.element));
            write_matrix_text(&path, m)?;
        }
        Ok(())
    }
}

pub fn optimal_test(es: &ElementSystem) -> Result<OptimalTestFunctions> {
    es.optimal_test()
}

pub fn condense(es: &ElementSystem) -> Result<CondensedElement> {
    es.condense()
}

pub fn write_matrix_text(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "# {} {}", m.nrows(), m.ncols()).map_err(io)?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.17e}", m[(i, j)])).collect();
        writeln!(w, "{}", row.join(" ")).map_err(io)?;
    }
    w.flush().map_err(io)
}
