//! Trial and test function spaces.

pub mod basis;
pub mod dofmap;
pub mod quadrature;

pub use basis::{shape_eval, LagrangeBasis1D, ShapeValues, TensorBasis};
pub use dofmap::{build_dof_map, edge_nodes_with_ends, Field, TrialDofMap, FIELDS};
pub use quadrature::{gauss_legendre, gauss_lobatto_nodes, gauss_rule, QuadratureRule, MAX_POINTS};

use crate::mesh::{EdgeTag, Mesh};

/// Whether test functions `v` must vanish on Dirichlet edges.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TestTrace {
    /// Drop the nodal `v` functions that live on Dirichlet edges.
    #[default]
    VanishOnDirichlet,
    /// Keep the full polynomial space.
    Unconstrained,
}

/// Broken test space on one element: a scalar part `v` and a vector part
/// `w = (wx, wy)`, each from the degree `p + dp` tensor basis.
///
/// Local test index layout: the active `v` functions, then all `wx`, then all
/// `wy`.
#[derive(Clone, Debug)]
pub struct TestSpaceLocal {
    pub element: usize,
    pub degree: usize,
    /// Tensor indices of the `v` functions kept in the space.
    pub active_v: Vec<usize>,
    /// Size of each `w` component block.
    pub w_len: usize,
}

impl TestSpaceLocal {
    pub fn new(mesh: &Mesh, element: usize, degree: usize, trace: TestTrace) -> Self {
        let n = (degree + 1) * (degree + 1);
        let mut keep = vec![true; n];
        if trace == TestTrace::VanishOnDirichlet && degree > 0 {
            for (k, tag) in mesh.element_edge_tags(element).into_iter().enumerate() {
                if tag == EdgeTag::Dirichlet {
                    for i in edge_nodes_with_ends(degree, k) {
                        keep[i] = false;
                    }
                }
            }
        }
        TestSpaceLocal {
            element,
            degree,
            active_v: (0..n).filter(|&i| keep[i]).collect(),
            w_len: n,
        }
    }

    /// Full, unconstrained space, independent of any mesh.
    pub fn full(element: usize, degree: usize) -> Self {
        let n = (degree + 1) * (degree + 1);
        TestSpaceLocal {
            element,
            degree,
            active_v: (0..n).collect(),
            w_len: n,
        }
    }

    pub fn dim(&self) -> usize {
        self.active_v.len() + 2 * self.w_len
    }

    pub fn v_len(&self) -> usize {
        self.active_v.len()
    }
}
