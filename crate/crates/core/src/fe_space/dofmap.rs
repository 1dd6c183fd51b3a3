//! Global numbering of the continuous trial space.

use super::basis::TensorBasis;
use crate::mesh::{EdgeTag, Mesh};
use crate::Point;

/// Trial fields, in the order their dof blocks appear globally.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    U = 0,
    Qx = 1,
    Qy = 2,
}

pub const FIELDS: [Field; 3] = [Field::U, Field::Qx, Field::Qy];

/// Degree-`p` continuous numbering shared by the three trial fields.
///
/// Scalar nodes are numbered vertices first, then `p-1` nodes per edge, then
/// `(p-1)^2` interior nodes per element. Field `f` at scalar node `n` has
/// global dof `f * num_nodes + n`.
#[derive(Clone, Debug)]
pub struct TrialDofMap {
    degree: usize,
    num_nodes: usize,
    element_nodes: Vec<Vec<usize>>,
    node_coords: Vec<Point>,
    dirichlet: Vec<bool>,
}

/// Local tensor index of the `t`-th interior node (1-based) of local edge
/// `k`, walking from local vertex `k` to `k+1`.
fn edge_node(p: usize, k: usize, t: usize) -> usize {
    let n = p + 1;
    let (a, b) = match k {
        0 => (t, 0),
        1 => (p, t),
        2 => (p - t, p),
        _ => (0, p - t),
    };
    b * n + a
}

impl TrialDofMap {
    pub fn new(mesh: &Mesh, degree: usize) -> TrialDofMap {
        assert!(degree >= 1, "trial degree must be at least 1");
        let p = degree;
        let n = p + 1;
        let nv = mesh.num_vertices();
        let ne = mesh.edges().len();
        let per_edge = p - 1;
        let per_cell = per_edge * per_edge;
        let num_nodes = nv + ne * per_edge + mesh.num_elements() * per_cell;
        let basis = TensorBasis::new(p);

        let mut node_coords = vec![[f64::NAN; 2]; num_nodes];
        let mut element_nodes = Vec::with_capacity(mesh.num_elements());
        for (e, quad) in mesh.elements().iter().enumerate() {
            let mut ids = vec![usize::MAX; n * n];
            let corners = [0, p, n * n - 1, p * n];
            for k in 0..4 {
                ids[corners[k]] = quad[k];
            }
            let edge_ids = mesh.element_edges(e);
            for k in 0..4 {
                let edge = &mesh.edges()[edge_ids[k]];
                let forward = edge.vertices[0] == quad[k];
                for t in 1..p {
                    let along = if forward { t - 1 } else { p - 1 - t };
                    ids[edge_node(p, k, t)] = nv + edge_ids[k] * per_edge + along;
                }
            }
            let base = nv + ne * per_edge + e * per_cell;
            for b in 1..p {
                for a in 1..p {
                    ids[b * n + a] = base + (b - 1) * per_edge + (a - 1);
                }
            }
            let map = mesh.element_map(e);
            for (local, &g) in ids.iter().enumerate() {
                node_coords[g] = map.map(basis.node(local));
            }
            element_nodes.push(ids);
        }

        let mut dirichlet = vec![false; num_nodes];
        for (e, ids) in element_nodes.iter().enumerate() {
            for (k, tag) in mesh.element_edge_tags(e).into_iter().enumerate() {
                if tag != EdgeTag::Dirichlet {
                    continue;
                }
                for local in edge_nodes_with_ends(p, k) {
                    dirichlet[ids[local]] = true;
                }
            }
        }

        TrialDofMap {
            degree,
            num_nodes,
            element_nodes,
            node_coords,
            dirichlet,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_dofs(&self) -> usize {
        3 * self.num_nodes
    }

    pub fn dof(&self, field: Field, node: usize) -> usize {
        field as usize * self.num_nodes + node
    }

    /// Scalar node ids of an element in local tensor order.
    pub fn element_nodes(&self, e: usize) -> &[usize] {
        &self.element_nodes[e]
    }

    /// Global dofs of an element: all `u` nodes, then `qx`, then `qy`.
    pub fn element_dofs(&self, e: usize) -> Vec<usize> {
        FIELDS
            .iter()
            .flat_map(|&f| self.element_nodes[e].iter().map(move |&n| self.dof(f, n)))
            .collect()
    }

    pub fn node_coords(&self) -> &[Point] {
        &self.node_coords
    }

    /// True for scalar nodes whose `u` value is fixed by the Dirichlet
    /// condition.
    pub fn is_dirichlet_node(&self, node: usize) -> bool {
        self.dirichlet[node]
    }

    /// Constrained global dofs: `u` at Dirichlet nodes only.
    pub fn dirichlet_dofs(&self) -> Vec<usize> {
        (0..self.num_nodes)
            .filter(|&n| self.dirichlet[n])
            .map(|n| self.dof(Field::U, n))
            .collect()
    }
}

/// Local tensor indices of all nodes on local edge `k` of a degree-`p`
/// tensor basis, endpoints included.
pub fn edge_nodes_with_ends(p: usize, k: usize) -> Vec<usize> {
    let n = p + 1;
    (0..=p)
        .map(|t| match k {
            0 => t,
            1 => t * n + p,
            2 => p * n + t,
            _ => t * n,
        })
        .collect()
}

pub fn build_dof_map(mesh: &Mesh, p: usize) -> TrialDofMap {
    TrialDofMap::new(mesh, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;

    #[test]
    fn counts_match_structured_formula() {
        for (nx, ny) in [(1, 1), (2, 3), (4, 4)] {
            for p in 1..=4 {
                let m = Mesh::uniform(nx, ny).unwrap();
                let d = TrialDofMap::new(&m, p);
                assert_eq!(d.num_nodes(), (p * nx + 1) * (p * ny + 1));
                assert_eq!(d.num_dofs(), 3 * d.num_nodes());
            }
        }
        assert_eq!(TrialDofMap::new(&Mesh::uniform(1, 1).unwrap(), 1).num_dofs(), 12);
        assert_eq!(TrialDofMap::new(&Mesh::uniform(2, 2).unwrap(), 2).num_dofs(), 75);
        assert_eq!(TrialDofMap::new(&Mesh::uniform(4, 4).unwrap(), 2).num_dofs(), 243);
    }

    #[test]
    fn shared_nodes_have_matching_coordinates() {
        // Each global node must be placed at the same point by every element
        // touching it; otherwise numbering on shared edges is flipped.
        let m = Mesh::graded(3, 3, 0.3).unwrap().perturb_unstructured(0.3, 5).unwrap();
        for p in 1..=4 {
            let d = TrialDofMap::new(&m, p);
            let basis = TensorBasis::new(p);
            for e in 0..m.num_elements() {
                let map = m.element_map(e);
                for (local, &g) in d.element_nodes(e).iter().enumerate() {
                    let x = map.map(basis.node(local));
                    let y = d.node_coords()[g];
                    assert!((x[0] - y[0]).abs() < 1e-14 && (x[1] - y[1]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn constant_field_gathers_consistently() {
        let m = Mesh::uniform(3, 2).unwrap().refine_uniform();
        let d = TrialDofMap::new(&m, 3);
        let mut global = vec![f64::NAN; d.num_dofs()];
        for e in 0..m.num_elements() {
            for g in d.element_dofs(e) {
                assert!(global[g].is_nan() || global[g] == 1.0);
                global[g] = 1.0;
            }
        }
        assert!(global.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn dirichlet_set_is_the_boundary() {
        let m = Mesh::uniform(2, 2).unwrap();
        let d = TrialDofMap::new(&m, 2);
        let bnd = d.dirichlet_dofs();
        assert_eq!(bnd.len(), 16);
        for &g in &bnd {
            let x = d.node_coords()[g];
            assert!(x[0] == 0.0 || x[0] == 1.0 || x[1] == 0.0 || x[1] == 1.0);
        }
        let interior = (0..d.num_nodes())
            .filter(|&n| !d.is_dirichlet_node(n))
            .count();
        assert_eq!(interior, 9);
    }

    #[test]
    fn neumann_edges_leave_nodes_free() {
        let m = Mesh::uniform(2, 2)
            .unwrap()
            .with_boundary_tags(|x| if x[0] > 0.999 { EdgeTag::Neumann } else { EdgeTag::Dirichlet });
        let d = TrialDofMap::new(&m, 2);
        // The right side keeps its two corners (shared with Dirichlet edges)
        // but frees its three interior nodes.
        assert_eq!(d.dirichlet_dofs().len(), 13);
    }
}
