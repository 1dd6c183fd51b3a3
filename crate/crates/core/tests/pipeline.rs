use std::sync::Arc;

use avsfe::analysis::{conservation_residuals, error_norms, fit_slope, sample_line};
use avsfe::fe_space::TestTrace;
use avsfe::local::{LocalOptions, ReferenceTables};
use avsfe::mesh::Mesh;
use avsfe::problem::Scenario;
use avsfe::solver::{solve, SolutionField, SolverOptions};

fn run(scenario: &Scenario, n: usize, p: usize, trace: TestTrace) -> SolutionField {
    let rule = scenario.boundary.clone();
    let mesh = Arc::new(Mesh::uniform(n, n).unwrap().with_boundary_tags(move |x| rule(x)));
    let opts = LocalOptions { test_trace: trace, ..LocalOptions::new(p, 0) };
    let tables = ReferenceTables::new(opts).unwrap();
    solve(mesh, scenario, &tables, &SolverOptions::default()).unwrap().0
}

fn l2_slope(scenario: &Scenario, p: usize, trace: TestTrace) -> (f64, Vec<f64>) {
    let sizes = [8, 16, 32];
    let errs: Vec<f64> = sizes
        .iter()
        .map(|&n| error_norms(&run(scenario, n, p, trace), scenario).unwrap().l2_u)
        .collect();
    let h: Vec<f64> = sizes.iter().map(|&n| 1.0 / n as f64).collect();
    (fit_slope(&h, &errs), errs)
}

#[test]
fn dirichlet_test_trace_is_required_for_convergence() {
    let s = Scenario::manufactured(10.0);
    let (vanish, _) = l2_slope(&s, 2, TestTrace::VanishOnDirichlet);
    let (full, errs) = l2_slope(&s, 2, TestTrace::Unconstrained);
    assert!((vanish - 3.0).abs() < 0.1, "{vanish}");
    assert!(full.abs() < 0.2, "{full}");
    assert!(errs[2] > 0.1, "{errs:?}");
}

#[test]
fn neumann_outflow_converges() {
    let s = Scenario::manufactured(10.0).with_exact_neumann(|x| x[0] > 1.0 - 1e-12 || x[1] > 1.0 - 1e-12);
    let (slope, errs) = l2_slope(&s, 2, TestTrace::VanishOnDirichlet);
    assert!((slope - 3.0).abs() < 0.15, "{slope} {errs:?}");
}

#[test]
fn diagonal_sample_matches_exact() {
    let s = Scenario::manufactured(10.0);
    let f = run(&s, 16, 3, TestTrace::VanishOnDirichlet);
    let line = sample_line(&f, [0.0, 0.0], [1.0, 1.0], 200).unwrap();
    let exact = s.exact.as_ref().unwrap();
    let mut worst: f64 = 0.0;
    for (i, x) in line.points.iter().enumerate() {
        worst = worst.max((line.u[i] - (exact.u)(*x)).abs());
        let q = (exact.flux)(*x);
        worst = worst.max((line.qx[i] - q[0]).abs()).max((line.qy[i] - q[1]).abs());
    }
    assert!(worst < 1e-4, "{worst}");
    let centre = 0.243_351_943_329_209_84;
    assert!((line.u[100] - centre).abs() < 1e-6, "{}", line.u[100]);
}

#[test]
fn conservation_defect_decreases_under_refinement() {
    let s = Scenario::manufactured(10.0);
    let defect = |n: usize| -> f64 {
        let f = run(&s, n, 2, TestTrace::VanishOnDirichlet);
        conservation_residuals(&f, &s).unwrap().iter().map(|r| r.abs()).sum()
    };
    let coarse = defect(8);
    let fine = defect(16);
    assert!(fine < 0.25 * coarse, "{coarse} {fine}");
}
