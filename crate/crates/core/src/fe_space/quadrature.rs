//! Gauss-Legendre and Gauss-Lobatto point sets.

use std::f64::consts::PI;

use crate::{Error, Point, Result};

pub const MAX_POINTS: usize = 20;

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = if (1.0 - x * x).abs() > 1e-300 {
        n as f64 * (p0 - x * p1) / (1.0 - x * x)
    } else {
        // P_n'(+-1) = (+-1)^(n-1) n(n+1)/2
        let s = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        s * (n * (n + 1)) as f64 / 2.0
    };
    (p1, dp)
}

/// One-dimensional Gauss-Legendre points and weights on `[-1,1]`, ascending.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || n > MAX_POINTS {
        return Err(Error::QuadratureOrder(n));
    }
    let mut pts = vec![0.0; n];
    let mut wts = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        pts[i] = -x;
        pts[n - 1 - i] = x;
        wts[i] = w;
        wts[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        pts[n / 2] = 0.0;
    }
    Ok((pts, wts))
}

/// Gauss-Lobatto nodes for a degree-`p` Lagrange basis: the endpoints plus
/// the roots of `P_p'`. Degree 0 gets the single midpoint node.
pub fn gauss_lobatto_nodes(p: usize) -> Vec<f64> {
    match p {
        0 => return vec![0.0],
        1 => return vec![-1.0, 1.0],
        _ => {}
    }
    let mut nodes = vec![0.0; p + 1];
    nodes[0] = -1.0;
    nodes[p] = 1.0;
    let nf = p as f64;
    for i in 1..p {
        let mut x = -(PI * i as f64 / nf).cos();
        for _ in 0..100 {
            let (pn, dp) = legendre(p, x);
            // (1-x^2) P'' = 2x P' - n(n+1) P
            let d2p = (2.0 * x * dp - nf * (nf + 1.0) * pn) / (1.0 - x * x);
            let dx = dp / d2p;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
    }
    // Enforce exact symmetry so mirrored edges see identical positions.
    for i in 0..=p / 2 {
        let s = 0.5 * (nodes[p - i] - nodes[i]);
        nodes[i] = -s;
        nodes[p - i] = s;
    }
    if p.is_multiple_of(2) {
        nodes[p / 2] = 0.0;
    }
    nodes
}

/// Tensor Gauss-Legendre rule on `[-1,1]^2`.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub n: usize,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Tensor rule with `n` points per direction, exact for per-direction degree
/// up to `2n-1`. Points are ordered with `xi` running fastest.
pub fn gauss_rule(n: usize) -> Result<QuadratureRule> {
    let (x, w) = gauss_legendre(n)?;
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            points.push([x[i], x[j]]);
            weights.push(w[i] * w[j]);
        }
    }
    Ok(QuadratureRule { n, points, weights })
}
