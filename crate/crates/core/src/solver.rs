//! Global assembly of the condensed system, Dirichlet elimination and the
//! sparse SPD solve.

use std::sync::Arc;
use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::LltError;
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Mat, Side};
use log::{debug, info};
use nalgebra::DVector;
use rayon::prelude::*;

use crate::fe_space::{Field, TensorBasis, TrialDofMap};
use crate::local::{CondensedElement, ElementSystem, ReferenceTables};
use crate::mesh::Mesh;
use crate::problem::Scenario;
use crate::{Error, Point, Result};

/// Elements condensed per parallel batch before the sequential scatter.
const CHUNK: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    Direct,
    ConjugateGradient,
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverKind::Direct => "sparse Cholesky",
            SolverKind::ConjugateGradient => "Jacobi-preconditioned CG",
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Largest free-dof count solved directly; larger systems use CG.
    pub direct_limit: usize,
    pub cg_tolerance: f64,
    /// CG iteration cap as a multiple of the system size.
    pub cg_max_factor: usize,
    /// Also form `B^T T` per element and record its distance to the Schur
    /// route.
    pub verify_routes: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            direct_limit: 200_000,
            cg_tolerance: 1e-10,
            cg_max_factor: 20,
            verify_routes: false,
        }
    }
}

/// Condensed system on the free dofs, stored as a full (both triangles)
/// compressed-column matrix.
#[derive(Clone, Debug)]
pub struct GlobalSystem {
    pub num_dofs: usize,
    pub free: Vec<usize>,
    pub constrained: Vec<usize>,
    /// Prescribed values of the constrained dofs, in `constrained` order.
    pub constrained_values: Vec<f64>,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Largest relative difference between the Schur and optimal-test
    /// routes over all elements, when requested.
    pub route_defect: Option<f64>,
    pub assembly_seconds: f64,
}

impl GlobalSystem {
    pub fn size(&self) -> usize {
        self.free.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn locate(&self, row: usize, col: usize) -> Option<usize> {
        let range = self.col_ptr[col]..self.col_ptr[col + 1];
        self.row_idx[range.clone()]
            .binary_search(&row)
            .ok()
            .map(|k| range.start + k)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.locate(row, col).map_or(0.0, |k| self.values[k])
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - A^T| / max |A|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for col in 0..self.size() {
            for k in self.col_ptr[col]..self.col_ptr[col + 1] {
                let row = self.row_idx[k];
                worst = worst.max((self.values[k] - self.get(col, row)).abs());
            }
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for col in 0..self.size() {
            let xc = x[col];
            for k in self.col_ptr[col]..self.col_ptr[col + 1] {
                y[self.row_idx[k]] += self.values[k] * xc;
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.size()).map(|i| self.get(i, i)).collect()
    }

    /// `||A x - b|| / ||b||`, or the plain residual norm when `b = 0`.
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; x.len()];
        self.matvec(x, &mut ax);
        let r = ax.iter().zip(&self.rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let b = norm(&self.rhs);
        if b == 0.0 {
            r
        } else {
            r / b
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Sorted, deduplicated scalar-node neighbourhoods (nodes sharing an element).
fn node_adjacency(dofmap: &TrialDofMap, num_elements: usize) -> Vec<Vec<usize>> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); dofmap.num_nodes()];
    for e in 0..num_elements {
        let nodes = dofmap.element_nodes(e);
        for &a in nodes {
            adj[a].extend_from_slice(nodes);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Builds the free-dof sparsity pattern and scatters the condensed element
/// matrices into it. Element batches are condensed in parallel and
/// scattered in element order, so the result does not depend on the thread
/// count.
pub fn assemble(
    mesh: &Mesh,
    dofmap: &TrialDofMap,
    scenario: &Scenario,
    tables: &ReferenceTables,
    options: &SolverOptions,
) -> Result<GlobalSystem> {
    let start = Instant::now();
    mesh.check_alignment(&scenario.interfaces)?;
    let n = dofmap.num_dofs();
    let nn = dofmap.num_nodes();
    let constrained = dofmap.dirichlet_dofs();
    // Homogeneous Dirichlet data.
    let constrained_values = vec![0.0; constrained.len()];
    let mut to_free = vec![usize::MAX; n];
    let mut prescribed = vec![0.0; n];
    for (&c, &g) in constrained.iter().zip(&constrained_values) {
        to_free[c] = usize::MAX - 1;
        prescribed[c] = g;
    }
    let mut free = Vec::with_capacity(n - constrained.len());
    for (dof, slot) in to_free.iter_mut().enumerate() {
        if *slot == usize::MAX {
            *slot = free.len();
            free.push(dof);
        } else {
            *slot = usize::MAX;
        }
    }

    let adj = node_adjacency(dofmap, mesh.num_elements());
    let mut col_ptr = Vec::with_capacity(free.len() + 1);
    col_ptr.push(0);
    let mut row_idx = Vec::new();
    for &dof in &free {
        let node = dof % nn;
        for f in 0..3 {
            for &m in &adj[node] {
                let r = to_free[f * nn + m];
                if r != usize::MAX {
                    row_idx.push(r);
                }
            }
        }
        col_ptr.push(row_idx.len());
    }
    drop(adj);

    let mut sys = GlobalSystem {
        num_dofs: n,
        values: vec![0.0; row_idx.len()],
        rhs: vec![0.0; free.len()],
        free,
        constrained,
        constrained_values,
        col_ptr,
        row_idx,
        route_defect: options.verify_routes.then_some(0.0),
        assembly_seconds: 0.0,
    };

    let ids: Vec<usize> = (0..mesh.num_elements()).collect();
    for batch in ids.chunks(CHUNK) {
        let done: Vec<Result<(CondensedElement, f64)>> = batch
            .par_iter()
            .map(|&e| {
                let es = ElementSystem::build(mesh, e, scenario, tables)?;
                let ce = es.condense()?;
                let defect = if options.verify_routes {
                    route_difference(&es, &ce)?
                } else {
                    0.0
                };
                Ok((ce, defect))
            })
            .collect();
        for item in done {
            let (ce, defect) = item?;
            if let Some(worst) = sys.route_defect.as_mut() {
                *worst = worst.max(defect);
            }
            scatter(&mut sys, dofmap, &to_free, &prescribed, &ce);
        }
    }
    sys.assembly_seconds = start.elapsed().as_secs_f64();
    debug!(
        "assembled {} free of {} dofs, nnz {}, {:.3}s",
        sys.size(),
        n,
        sys.nnz(),
        sys.assembly_seconds
    );
    Ok(sys)
}

/// Relative max-norm distance between `B^T T`, `T^T F` and the Schur
/// results.
pub fn route_difference(es: &ElementSystem, ce: &CondensedElement) -> Result<f64> {
    let t = es.optimal_test()?;
    let a = es.bform.transpose() * &t.coeffs;
    let r = t.coeffs.transpose() * &es.load;
    let sa = ce.stiffness.abs().max();
    let sr = ce.rhs.abs().max();
    let da = if sa > 0.0 { (a - &ce.stiffness).abs().max() / sa } else { a.abs().max() };
    let dr = if sr > 0.0 { (r - &ce.rhs).abs().max() / sr } else { r.abs().max() };
    Ok(da.max(dr))
}

fn scatter(sys: &mut GlobalSystem, dofmap: &TrialDofMap, to_free: &[usize], prescribed: &[f64], ce: &CondensedElement) {
    let dofs = dofmap.element_dofs(ce.element);
    for (i, &gi) in dofs.iter().enumerate() {
        let row = to_free[gi];
        if row == usize::MAX {
            continue;
        }
        sys.rhs[row] += ce.rhs[i];
        for (j, &gj) in dofs.iter().enumerate() {
            let col = to_free[gj];
            let a = ce.stiffness[(i, j)];
            if col == usize::MAX {
                sys.rhs[row] -= a * prescribed[gj];
            } else {
                let k = sys.locate(row, col).expect("pattern covers element couplings");
                sys.values[k] += a;
            }
        }
    }
}

/// What the solve did, for the run log.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub kind: SolverKind,
    pub size: usize,
    pub nnz: usize,
    pub iterations: usize,
    pub relative_residual: f64,
    pub symmetry_defect: f64,
    pub assembly_seconds: f64,
    pub solve_seconds: f64,
}

impl std::fmt::Display for SolveReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "solver={} n={} nnz={} iterations={} residual={:.3e} symmetry={:.3e} assemble={:.3}s solve={:.3}s",
            self.kind,
            self.size,
            self.nnz,
            self.iterations,
            self.relative_residual,
            self.symmetry_defect,
            self.assembly_seconds,
            self.solve_seconds
        )
    }
}

/// Solves for the free dofs and returns them with a report.
pub fn solve_free(system: &GlobalSystem, options: &SolverOptions) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let n = system.size();
    let symmetry_defect = system.symmetry_defect();
    let (kind, x, iterations) = if n == 0 {
        (SolverKind::Direct, Vec::new(), 0)
    } else if n <= options.direct_limit {
        (SolverKind::Direct, solve_direct(system)?, 0)
    } else {
        let (x, it) = solve_cg(system, options.cg_tolerance, options.cg_max_factor * n)?;
        (SolverKind::ConjugateGradient, x, it)
    };
    let report = SolveReport {
        kind,
        size: n,
        nnz: system.nnz(),
        iterations,
        relative_residual: system.relative_residual(&x),
        symmetry_defect,
        assembly_seconds: system.assembly_seconds,
        solve_seconds: start.elapsed().as_secs_f64(),
    };
    info!("{report}");
    Ok((x, report))
}

fn solve_direct(system: &GlobalSystem) -> Result<Vec<f64>> {
    let n = system.size();
    let symbolic = SymbolicSparseColMat::new_checked(n, n, system.col_ptr.clone(), None, system.row_idx.clone());
    let a = SparseColMat::new(symbolic, system.values.clone());
    let llt = a.sp_cholesky(Side::Lower).map_err(|e| match e {
        LltError::Numeric(faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index }) => {
            Error::NotPositiveDefinite { pivot: index }
        }
        other => Error::LinearAlgebra(format!("{other:?}")),
    })?;
    let mut b = Mat::from_fn(n, 1, |i, _| system.rhs[i]);
    llt.solve_in_place(b.as_mut());
    Ok((0..n).map(|i| b[(i, 0)]).collect())
}

/// Jacobi-preconditioned conjugate gradients to `||r|| <= tol ||b||`.
pub fn solve_cg(system: &GlobalSystem, tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let n = system.size();
    let diag = system.diagonal();
    if let Some(i) = diag.iter().position(|&d| d <= 0.0) {
        return Err(Error::NotPositiveDefinite { pivot: i });
    }
    let b = &system.rhs;
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for it in 1..=max_iter {
        system.matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::NotPositiveDefinite { pivot: 0 });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = norm(&r) / bnorm;
        if res <= tol {
            return Ok((x, it));
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: norm(&r) / bnorm,
    })
}

/// Values of the discrete fields at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldValue {
    pub u: f64,
    pub grad_u: [f64; 2],
    pub q: [f64; 2],
    pub div_q: f64,
}

/// Full coefficient vector of `(u, qx, qy)`, constrained entries included.
#[derive(Clone, Debug)]
pub struct SolutionField {
    pub mesh: Arc<Mesh>,
    pub dofmap: Arc<TrialDofMap>,
    pub coeffs: Vec<f64>,
    basis: TensorBasis,
}

impl SolutionField {
    pub fn new(mesh: Arc<Mesh>, dofmap: Arc<TrialDofMap>, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), dofmap.num_dofs());
        let basis = TensorBasis::new(dofmap.degree());
        SolutionField {
            mesh,
            dofmap,
            coeffs,
            basis,
        }
    }

    /// Nodal interpolant of `u` and `q`.
    pub fn interpolate(
        mesh: Arc<Mesh>,
        dofmap: Arc<TrialDofMap>,
        u: impl Fn(Point) -> f64,
        q: impl Fn(Point) -> [f64; 2],
    ) -> Self {
        let nn = dofmap.num_nodes();
        let mut coeffs = vec![0.0; 3 * nn];
        for (node, &x) in dofmap.node_coords().iter().enumerate() {
            let qv = q(x);
            coeffs[node] = u(x);
            coeffs[nn + node] = qv[0];
            coeffs[2 * nn + node] = qv[1];
        }
        SolutionField::new(mesh, dofmap, coeffs)
    }

    pub fn degree(&self) -> usize {
        self.dofmap.degree()
    }

    pub fn basis(&self) -> &TensorBasis {
        &self.basis
    }

    pub fn field(&self, field: Field, node: usize) -> f64 {
        self.coeffs[self.dofmap.dof(field, node)]
    }

    /// Local coefficients in the element's trial ordering.
    pub fn local_coeffs(&self, e: usize) -> DVector<f64> {
        let dofs = self.dofmap.element_dofs(e);
        DVector::from_iterator(dofs.len(), dofs.iter().map(|&d| self.coeffs[d]))
    }

    /// Evaluates the fields at master coordinates `xi` of element `e`.
    pub fn evaluate(&self, e: usize, xi: Point) -> Result<FieldValue> {
        let sv = self.basis.eval(xi)?;
        let map = self.mesh.element_map(e);
        let j = map.jacobian(xi);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det <= 0.0 {
            return Err(Error::NonPositiveJacobian { element: e, det });
        }
        let phys = |g: [f64; 2]| {
            [
                (j[1][1] * g[0] - j[1][0] * g[1]) / det,
                (-j[0][1] * g[0] + j[0][0] * g[1]) / det,
            ]
        };
        let nn = self.dofmap.num_nodes();
        let mut out = FieldValue::default();
        for (k, &node) in self.dofmap.element_nodes(e).iter().enumerate() {
            let (u, qx, qy) = (self.coeffs[node], self.coeffs[nn + node], self.coeffs[2 * nn + node]);
            let g = phys(sv.grads[k]);
            out.u += u * sv.values[k];
            out.grad_u[0] += u * g[0];
            out.grad_u[1] += u * g[1];
            out.q[0] += qx * sv.values[k];
            out.q[1] += qy * sv.values[k];
            out.div_q += qx * g[0] + qy * g[1];
        }
        Ok(out)
    }

    pub fn max_abs_u(&self) -> f64 {
        self.coeffs[..self.dofmap.num_nodes()]
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|v| v.is_finite())
    }
}

/// Scatters free-dof values back into a full coefficient vector.
pub fn expand(system: &GlobalSystem, free_values: &[f64]) -> Vec<f64> {
    let mut full = vec![0.0; system.num_dofs];
    for (&dof, &v) in system.free.iter().zip(free_values) {
        full[dof] = v;
    }
    for (&dof, &v) in system.constrained.iter().zip(&system.constrained_values) {
        full[dof] = v;
    }
    full
}

/// Assembles and solves one discrete problem.
pub fn solve(
    mesh: Arc<Mesh>,
    scenario: &Scenario,
    tables: &ReferenceTables,
    options: &SolverOptions,
) -> Result<(SolutionField, SolveReport, GlobalSystem)> {
    let dofmap = Arc::new(TrialDofMap::new(&mesh, tables.options.trial_degree));
    let system = assemble(&mesh, &dofmap, scenario, tables, options)?;
    let (x, report) = solve_free(&system, options)?;
    let field = SolutionField::new(mesh, dofmap, expand(&system, &x));
    Ok((field, report, system))
}

/// Per-element residual lifts `eta_K` and their root-sum-square.
#[derive(Clone, Debug)]
pub struct ErrorIndicatorField {
    pub per_element: Vec<f64>,
    pub global: f64,
}

pub fn energy_indicator(
    solution: &SolutionField,
    scenario: &Scenario,
    tables: &ReferenceTables,
) -> Result<ErrorIndicatorField> {
    let mesh = &solution.mesh;
    let per_element = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let es = ElementSystem::build(mesh, e, scenario, tables)?;
            es.residual_norm(&solution.local_coeffs(e))
        })
        .collect::<Result<Vec<f64>>>()?;
    let global = per_element.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(ErrorIndicatorField { per_element, global })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe_space::TestTrace;
    use crate::local::LocalOptions;

    fn tables(p: usize, dp: usize) -> ReferenceTables {
        ReferenceTables::new(LocalOptions::new(p, dp)).unwrap()
    }

    fn system_from_dense(a: &[&[f64]], b: &[f64]) -> GlobalSystem {
        let n = b.len();
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for j in 0..n {
            for i in 0..n {
                if a[i][j] != 0.0 {
                    row_idx.push(i);
                    values.push(a[i][j]);
                }
            }
            col_ptr.push(row_idx.len());
        }
        GlobalSystem {
            num_dofs: n,
            free: (0..n).collect(),
            constrained: Vec::new(),
            constrained_values: Vec::new(),
            col_ptr,
            row_idx,
            values,
            rhs: b.to_vec(),
            route_defect: None,
            assembly_seconds: 0.0,
        }
    }

    #[test]
    fn identity_system_returns_rhs() {
        let sys = system_from_dense(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]], &[3.0, -1.0, 2.5]);
        let (x, rep) = solve_free(&sys, &SolverOptions::default()).unwrap();
        assert_eq!(x, vec![3.0, -1.0, 2.5]);
        assert_eq!(rep.kind, SolverKind::Direct);
        let (x, _) = solve_cg(&sys, 1e-12, 10).unwrap();
        assert_eq!(x, vec![3.0, -1.0, 2.5]);
    }

    #[test]
    fn direct_and_cg_agree() {
        let a: [&[f64]; 3] = [&[4.0, 1.0, 0.0], &[1.0, 3.0, -1.0], &[0.0, -1.0, 2.0]];
        let sys = system_from_dense(&a, &[1.0, 2.0, 3.0]);
        let d = solve_direct(&sys).unwrap();
        let (c, _) = solve_cg(&sys, 1e-14, 100).unwrap();
        for (x, y) in d.iter().zip(&c) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(sys.relative_residual(&d) < 1e-14);
    }

    #[test]
    fn indefinite_reports_pivot() {
        let a: [&[f64]; 2] = [&[1.0, 2.0], &[2.0, 1.0]];
        let sys = system_from_dense(&a, &[1.0, 1.0]);
        assert!(matches!(solve_direct(&sys), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn counts_on_two_by_two() {
        let mesh = Mesh::uniform(2, 2).unwrap();
        let dm = TrialDofMap::new(&mesh, 2);
        let sys = assemble(&mesh, &dm, &Scenario::manufactured(10.0), &tables(2, 0), &SolverOptions::default()).unwrap();
        assert_eq!(sys.num_dofs, 75);
        assert_eq!(sys.constrained.len(), 16);
        assert_eq!(sys.size(), 59);
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let mesh = Arc::new(Mesh::uniform(3, 3).unwrap());
        let t = tables(2, 0);
        let (field, rep, _) = solve(mesh, &Scenario::zero(), &t, &SolverOptions::default()).unwrap();
        assert!(field.coeffs.iter().all(|&v| v == 0.0));
        assert_eq!(rep.relative_residual, 0.0);
        let eta = energy_indicator(&field, &Scenario::zero(), &t).unwrap();
        assert_eq!(eta.global, 0.0);
    }

    #[test]
    fn single_element_smoke() {
        let mesh = Arc::new(Mesh::uniform(1, 1).unwrap());
        let (field, _, sys) = solve(mesh, &Scenario::manufactured(10.0), &tables(1, 0), &SolverOptions::default()).unwrap();
        assert_eq!(sys.size(), 8);
        assert!(field.is_finite());
        assert_eq!(field.max_abs_u(), 0.0);
    }

    #[test]
    fn assembled_matrix_is_symmetric_and_spd() {
        let mesh = Mesh::graded(3, 3, 0.5).unwrap().perturb_unstructured(0.25, 7).unwrap();
        let dm = TrialDofMap::new(&mesh, 2);
        for trace in [TestTrace::VanishOnDirichlet, TestTrace::Unconstrained] {
            let opts = LocalOptions { test_trace: trace, ..LocalOptions::new(2, 1) };
            let t = ReferenceTables::new(opts).unwrap();
            let so = SolverOptions { verify_routes: true, ..Default::default() };
            let sys = assemble(&mesh, &dm, &Scenario::homogeneous(1e3), &t, &so).unwrap();
            assert_eq!(sys.symmetry_defect(), 0.0);
            assert!(sys.route_defect.unwrap() < 1e-11);
            assert!(solve_direct(&sys).is_ok());
        }
    }

    #[test]
    fn cg_matches_direct_on_fe_system() {
        let mesh = Mesh::uniform(4, 4).unwrap();
        let dm = TrialDofMap::new(&mesh, 2);
        let sys = assemble(&mesh, &dm, &Scenario::manufactured(10.0), &tables(2, 0), &SolverOptions::default()).unwrap();
        let d = solve_direct(&sys).unwrap();
        let (c, _) = solve_cg(&sys, 1e-12, 20 * sys.size()).unwrap();
        let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in d.iter().zip(&c) {
            assert!((x - y).abs() < 1e-8 * scale);
        }
    }

    #[test]
    fn assembly_is_thread_count_independent() {
        let mesh = Mesh::uniform(6, 6).unwrap().perturb_unstructured(0.2, 3).unwrap();
        let dm = TrialDofMap::new(&mesh, 2);
        let s = Scenario::manufactured(10.0);
        let t = tables(2, 0);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| assemble(&mesh, &dm, &s, &t, &SolverOptions::default()).unwrap())
        };
        let (a, b) = (run(1), run(3));
        assert_eq!(a.values, b.values);
        assert_eq!(a.rhs, b.rhs);
    }

    #[test]
    fn polynomial_solution_is_reproduced() {
        let mesh = Arc::new(Mesh::uniform(2, 2).unwrap().perturb_unstructured(0.0, 0).unwrap());
        let s = Scenario::polynomial(1.0, [1.0, 1.0]);
        let t = tables(2, 0);
        let (field, _, _) = solve(mesh, &s, &t, &SolverOptions::default()).unwrap();
        let exact = s.exact.as_ref().unwrap();
        for (node, &x) in field.dofmap.node_coords().iter().enumerate() {
            assert!((field.field(Field::U, node) - (exact.u)(x)).abs() < 1e-11);
            let q = (exact.flux)(x);
            assert!((field.field(Field::Qx, node) - q[0]).abs() < 1e-11);
        }
        let eta = energy_indicator(&field, &s, &t).unwrap();
        assert!(eta.global < 1e-11, "{}", eta.global);
    }

    #[test]
    fn evaluate_interpolant_at_nodes() {
        let mesh = Arc::new(Mesh::uniform(2, 2).unwrap().perturb_unstructured(0.3, 5).unwrap());
        let dm = Arc::new(TrialDofMap::new(&mesh, 2));
        let f = SolutionField::interpolate(mesh, dm, |x| 1.0 + 2.0 * x[0] - x[1], |x| [x[0], 3.0]);
        let v = f.evaluate(3, [0.2, -0.4]).unwrap();
        let x = f.mesh.element_map(3).map([0.2, -0.4]);
        assert!((v.u - (1.0 + 2.0 * x[0] - x[1])).abs() < 1e-13);
        assert!((v.grad_u[0] - 2.0).abs() < 1e-12 && (v.grad_u[1] + 1.0).abs() < 1e-12);
        assert!((v.div_q - 1.0).abs() < 1e-12);
        assert!((v.q[1] - 3.0).abs() < 1e-13);
    }
}
