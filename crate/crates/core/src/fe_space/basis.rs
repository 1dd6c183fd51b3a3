//! Nodal Lagrange bases on the master element.

use super::quadrature::gauss_lobatto_nodes;
use crate::{Error, Point, Result};

/// One-dimensional Lagrange basis through the Gauss-Lobatto nodes.
#[derive(Clone, Debug)]
pub struct LagrangeBasis1D {
    nodes: Vec<f64>,
    /// `1 / prod_{m != i} (x_i - x_m)`
    scale: Vec<f64>,
}

impl LagrangeBasis1D {
    pub fn new(degree: usize) -> Self {
        let nodes = gauss_lobatto_nodes(degree);
        let scale = (0..nodes.len())
            .map(|i| {
                let prod: f64 = (0..nodes.len())
                    .filter(|&m| m != i)
                    .map(|m| nodes[i] - nodes[m])
                    .product();
                1.0 / prod
            })
            .collect();
        LagrangeBasis1D { nodes, scale }
    }

    pub fn degree(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Values and first derivatives of every basis function at `x`.
    pub fn eval(&self, x: f64, values: &mut [f64], derivs: &mut [f64]) {
        let n = self.nodes.len();
        for i in 0..n {
            let mut v = self.scale[i];
            let mut d = 0.0;
            for m in 0..n {
                if m == i {
                    continue;
                }
                // Product rule, one factor differentiated at a time.
                let mut term = self.scale[i];
                for k in 0..n {
                    if k != i && k != m {
                        term *= x - self.nodes[k];
                    }
                }
                d += term;
                v *= x - self.nodes[m];
            }
            values[i] = v;
            derivs[i] = d;
        }
    }
}

/// Values and master-coordinate gradients of a tensor basis at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeValues {
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
}

/// Tensor-product Lagrange basis of per-direction degree `p` on `[-1,1]^2`.
/// Function `(a, b)` has index `b * (p + 1) + a`, with `a` along `xi`.
#[derive(Clone, Debug)]
pub struct TensorBasis {
    line: LagrangeBasis1D,
}

impl TensorBasis {
    pub fn new(degree: usize) -> Self {
        TensorBasis {
            line: LagrangeBasis1D::new(degree),
        }
    }

    pub fn degree(&self) -> usize {
        self.line.degree()
    }

    pub fn len(&self) -> usize {
        let n = self.line.nodes.len();
        n * n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn line(&self) -> &LagrangeBasis1D {
        &self.line
    }

    /// Master coordinates of node `(a, b)`.
    pub fn node(&self, index: usize) -> Point {
        let n = self.line.nodes.len();
        [self.line.nodes[index % n], self.line.nodes[index / n]]
    }

    /// Evaluation without the master-element range check.
    pub fn eval_unchecked(&self, xi: Point) -> ShapeValues {
        let n = self.line.nodes.len();
        let (mut vx, mut dx) = (vec![0.0; n], vec![0.0; n]);
        let (mut vy, mut dy) = (vec![0.0; n], vec![0.0; n]);
        self.line.eval(xi[0], &mut vx, &mut dx);
        self.line.eval(xi[1], &mut vy, &mut dy);
        let mut values = Vec::with_capacity(n * n);
        let mut grads = Vec::with_capacity(n * n);
        for b in 0..n {
            for a in 0..n {
                values.push(vx[a] * vy[b]);
                grads.push([dx[a] * vy[b], vx[a] * dy[b]]);
            }
        }
        ShapeValues { values, grads }
    }

    pub fn eval(&self, xi: Point) -> Result<ShapeValues> {
        const SLACK: f64 = 1e-12;
        if !(xi[0].abs() <= 1.0 + SLACK && xi[1].abs() <= 1.0 + SLACK) {
            return Err(Error::OutsideMaster(xi[0], xi[1]));
        }
        Ok(self.eval_unchecked(xi))
    }
}

/// `(p+1)^2` values and master gradients of the degree-`p` tensor basis.
pub fn shape_eval(p: usize, xi: Point) -> Result<ShapeValues> {
    TensorBasis::new(p).eval(xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn bilinear_corner_delta() {
        let s = shape_eval(1, [-1.0, -1.0]).unwrap();
        assert_eq!(s.values, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn quadratic_center_node() {
        // 1D quadratic Lobatto basis at 0 is (0, 1, 0); the tensor product
        // puts the only nonzero at (a, b) = (1, 1).
        let s = shape_eval(2, [0.0, 0.0]).unwrap();
        for (i, v) in s.values.iter().enumerate() {
            let expected = if i == 4 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(*v, expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn kronecker_at_own_nodes() {
        for p in 0..=7 {
            let basis = TensorBasis::new(p);
            for j in 0..basis.len() {
                let s = basis.eval(basis.node(j)).unwrap();
                for (i, v) in s.values.iter().enumerate() {
                    let d = if i == j { 1.0 } else { 0.0 };
                    assert!((v - d).abs() < 1e-12, "p={p} i={i} j={j}: {v}");
                }
            }
        }
    }

    #[test]
    fn outside_rejected() {
        assert!(matches!(shape_eval(1, [1.5, 0.0]), Err(Error::OutsideMaster(..))));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let line = LagrangeBasis1D::new(4);
        let (mut v0, mut v1, mut d, mut scratch) = (vec![0.0; 5], vec![0.0; 5], vec![0.0; 5], vec![0.0; 5]);
        let (x, h) = (0.37, 1e-6);
        line.eval(x, &mut scratch, &mut d);
        line.eval(x + h, &mut v1, &mut scratch);
        line.eval(x - h, &mut v0, &mut scratch);
        for i in 0..5 {
            assert_abs_diff_eq!(d[i], (v1[i] - v0[i]) / (2.0 * h), epsilon = 1e-8);
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity(p in 1usize..=4, x in -1.0f64..=1.0, y in -1.0f64..=1.0) {
            let s = shape_eval(p, [x, y]).unwrap();
            let sum: f64 = s.values.iter().sum();
            let gx: f64 = s.grads.iter().map(|g| g[0]).sum();
            let gy: f64 = s.grads.iter().map(|g| g[1]).sum();
            prop_assert!((sum - 1.0).abs() < 1e-11);
            prop_assert!(gx.abs() < 1e-11 && gy.abs() < 1e-11);
        }
    }
}
