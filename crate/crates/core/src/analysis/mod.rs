//! Error norms, rate fits, conservation diagnostics, line sampling and
//! export.

pub mod export;
pub mod sampling;

pub use sampling::{sample_line, LineSample};

use rayon::prelude::*;

use crate::fe_space::{gauss_legendre, gauss_rule};
use crate::problem::Scenario;
use crate::solver::SolutionField;
use crate::{Error, Point, Result};

/// Squared-error integrals accumulated over the mesh, reported as norms.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorNorms {
    pub l2_u: f64,
    /// `|u - u_h|_{H^1}` seminorm.
    pub h1_semi_u: f64,
    /// Full `H^1` norm.
    pub h1_u: f64,
    pub l2_q: f64,
    pub l2_gradu: f64,
    /// `||D^{-1} (q - q_h)||`, the flux error on the gradient scale.
    pub l2_q_scaled: f64,
    pub l2_divq: f64,
    /// `sqrt(|e_u|_1^2 + ||e_u||^2 + ||div e_q||^2 + ||e_q||^2)`.
    pub unorm: f64,
}

/// Error norms against the scenario's exact solution, integrated with
/// `p + 3` Gauss points per direction.
pub fn error_norms(solution: &SolutionField, scenario: &Scenario) -> Result<ErrorNorms> {
    error_norms_with_points(solution, scenario, solution.degree() + 3)
}

pub fn error_norms_with_points(solution: &SolutionField, scenario: &Scenario, points: usize) -> Result<ErrorNorms> {
    let exact = scenario
        .exact
        .as_ref()
        .ok_or_else(|| Error::NoExactSolution(scenario.name.clone()))?;
    let quad = gauss_rule(points)?;
    let mesh = &solution.mesh;
    let sums = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| -> Result<[f64; 6]> {
            let map = mesh.element_map(e);
            let mut acc = [0.0; 6];
            for (&xi, &w) in quad.points.iter().zip(&quad.weights) {
                let x = map.map(xi);
                let jw = w * map.det(xi);
                let v = solution.evaluate(e, xi)?;
                let gu = (exact.grad_u)(x);
                let q = (exact.flux)(x);
                let d = (scenario.coefficients.diffusion)(x);
                let eq = [q[0] - v.q[0], q[1] - v.q[1]];
                let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
                let scaled = [
                    (d[1][1] * eq[0] - d[0][1] * eq[1]) / det,
                    (-d[1][0] * eq[0] + d[0][0] * eq[1]) / det,
                ];
                acc[0] += jw * ((exact.u)(x) - v.u).powi(2);
                acc[1] += jw * ((gu[0] - v.grad_u[0]).powi(2) + (gu[1] - v.grad_u[1]).powi(2));
                acc[2] += jw * (eq[0] * eq[0] + eq[1] * eq[1]);
                acc[3] += jw * (scaled[0] * scaled[0] + scaled[1] * scaled[1]);
                acc[4] += jw * ((exact.div_flux)(x) - v.div_q).powi(2);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    // Summed in element order so the result is independent of threading.
    let mut t = [0.0; 6];
    for s in sums {
        for k in 0..6 {
            t[k] += s[k];
        }
    }
    Ok(ErrorNorms {
        l2_u: t[0].sqrt(),
        h1_semi_u: t[1].sqrt(),
        h1_u: (t[0] + t[1]).sqrt(),
        l2_q: t[2].sqrt(),
        l2_gradu: t[1].sqrt(),
        l2_q_scaled: t[3].sqrt(),
        l2_divq: t[4].sqrt(),
        unorm: (t[0] + t[1] + t[2] + t[4]).sqrt(),
    })
}

/// One row of a refinement study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRecord {
    pub level: usize,
    pub h: f64,
    pub dofs: usize,
    pub err_l2_u: f64,
    pub err_h1_u: f64,
    pub err_l2_q: f64,
    pub err_l2_gradu: f64,
    pub err_unorm: f64,
    pub eta: f64,
}

impl ConvergenceRecord {
    pub fn new(level: usize, h: f64, dofs: usize, norms: &ErrorNorms, eta: f64) -> Self {
        ConvergenceRecord {
            level,
            h,
            dofs,
            err_l2_u: norms.l2_u,
            err_h1_u: norms.h1_u,
            err_l2_q: norms.l2_q,
            err_l2_gradu: norms.l2_gradu,
            err_unorm: norms.unorm,
            eta,
        }
    }

    /// Record for a scenario without exact solution: errors are NaN.
    pub fn without_errors(level: usize, h: f64, dofs: usize, eta: f64) -> Self {
        let nan = f64::NAN;
        ConvergenceRecord {
            level,
            h,
            dofs,
            err_l2_u: nan,
            err_h1_u: nan,
            err_l2_q: nan,
            err_l2_gradu: nan,
            err_unorm: nan,
            eta,
        }
    }
}

/// Least-squares slope of `log e` against `log h`.
pub fn fit_slope(h: &[f64], e: &[f64]) -> f64 {
    let n = h.len() as f64;
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Observed orders over the last three records.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub l2_u: f64,
    pub h1_u: f64,
    pub l2_q: f64,
    pub l2_gradu: f64,
    pub unorm: f64,
    pub eta: f64,
}

impl std::fmt::Display for RateFit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "L2(u) {:.3}  H1(u) {:.3}  L2(q) {:.3}  L2(grad u) {:.3}  U {:.3}  eta {:.3}",
            self.l2_u, self.h1_u, self.l2_q, self.l2_gradu, self.unorm, self.eta
        )
    }
}

pub fn fit_rates(records: &[ConvergenceRecord]) -> Result<RateFit> {
    if records.len() < 3 {
        return Err(Error::TooFewRecords(records.len()));
    }
    let tail = &records[records.len() - 3..];
    let h: Vec<f64> = tail.iter().map(|r| r.h).collect();
    let slope = |f: fn(&ConvergenceRecord) -> f64| fit_slope(&h, &tail.iter().map(f).collect::<Vec<_>>());
    Ok(RateFit {
        l2_u: slope(|r| r.err_l2_u),
        h1_u: slope(|r| r.err_h1_u),
        l2_q: slope(|r| r.err_l2_q),
        l2_gradu: slope(|r| r.err_l2_gradu),
        unorm: slope(|r| r.err_unorm),
        eta: slope(|r| r.eta),
    })
}

/// Per-element flux balance `oint q_h . n - int (b . grad u_h - f)`.
/// For the exact solution both terms agree.
pub fn conservation_residuals(solution: &SolutionField, scenario: &Scenario) -> Result<Vec<f64>> {
    let n = solution.degree() + 3;
    let quad = gauss_rule(n)?;
    let (s, w) = gauss_legendre(n)?;
    let mesh = &solution.mesh;
    let coeffs = &scenario.coefficients;
    (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let map = mesh.element_map(e);
            let mut volume = 0.0;
            for (&xi, &wq) in quad.points.iter().zip(&quad.weights) {
                let x = map.map(xi);
                let v = solution.evaluate(e, xi)?;
                let b = (coeffs.convection)(x);
                volume += wq * map.det(xi) * (b[0] * v.grad_u[0] + b[1] * v.grad_u[1] - (coeffs.source)(x));
            }
            let mut boundary = 0.0;
            for k in 0..4 {
                let a = map.corners[k];
                let c = map.corners[(k + 1) % 4];
                let normal = [c[1] - a[1], a[0] - c[0]];
                for (&t, &wt) in s.iter().zip(&w) {
                    let xi: Point = match k {
                        0 => [t, -1.0],
                        1 => [1.0, t],
                        2 => [-t, 1.0],
                        _ => [-1.0, -t],
                    };
                    let v = solution.evaluate(e, xi)?;
                    // Straight edge: |t| ds = half the edge vector.
                    boundary += 0.5 * wt * (v.q[0] * normal[0] + v.q[1] * normal[1]);
                }
            }
            Ok(boundary - volume)
        })
        .collect()
}
