//! Structured fine lattice on the unit square and the nested coarse topology.
//!
//! Fine lattice nodes are `(i, j)` with `0 <= i, j <= n`, located at
//! `(i / n, j / n)`. Homogeneous Dirichlet data removes the boundary nodes, so
//! the degrees of freedom are the interior nodes numbered row by row.
//! Coarse blocks are `r x r` patches of fine elements with `r = n / nc`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FineMesh {
    n: usize,
}

impl FineMesh {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidMesh(format!(
                "need at least 2 subdivisions per side, got {n}"
            )));
        }
        Ok(Self { n })
    }

    /// Subdivisions per side.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn num_dofs(&self) -> usize {
        (self.n - 1) * (self.n - 1)
    }

    pub fn num_lattice_nodes(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    pub fn lattice_index(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }

    pub fn lattice_coords(&self, node: usize) -> (usize, usize) {
        (node % (self.n + 1), node / (self.n + 1))
    }

    /// DOF index of lattice node `(i, j)`, `None` on the boundary.
    pub fn dof(&self, i: usize, j: usize) -> Option<usize> {
        if i == 0 || j == 0 || i >= self.n || j >= self.n {
            None
        } else {
            Some((j - 1) * (self.n - 1) + (i - 1))
        }
    }

    pub fn dof_coords(&self, dof: usize) -> (usize, usize) {
        (dof % (self.n - 1) + 1, dof / (self.n - 1) + 1)
    }

    pub fn dof_point(&self, dof: usize) -> (f64, f64) {
        let (i, j) = self.dof_coords(dof);
        (i as f64 * self.h(), j as f64 * self.h())
    }

    /// Lattice index → DOF index for every lattice node.
    pub fn dof_map(&self) -> Vec<Option<usize>> {
        (0..self.num_lattice_nodes())
            .map(|node| {
                let (i, j) = self.lattice_coords(node);
                self.dof(i, j)
            })
            .collect()
    }

    /// Scatter a DOF vector onto the full lattice (boundary values zero).
    pub fn to_lattice(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_lattice_nodes()];
        for (d, v) in values.iter().enumerate() {
            let (i, j) = self.dof_coords(d);
            out[self.lattice_index(i, j)] = *v;
        }
        out
    }

    /// Restrict a lattice vector to the DOFs.
    pub fn from_lattice(&self, values: &[f64]) -> Vec<f64> {
        (0..self.num_dofs())
            .map(|d| {
                let (i, j) = self.dof_coords(d);
                values[self.lattice_index(i, j)]
            })
            .collect()
    }
}

/// Closed axis-aligned rectangle of lattice nodes, bounds inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeRect {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl LatticeRect {
    pub fn contains(&self, i: usize, j: usize) -> bool {
        (self.i0..=self.i1).contains(&i) && (self.j0..=self.j1).contains(&j)
    }

    pub fn contains_strictly(&self, i: usize, j: usize) -> bool {
        i > self.i0 && i < self.i1 && j > self.j0 && j < self.j1
    }

    pub fn on_boundary(&self, i: usize, j: usize) -> bool {
        self.contains(i, j) && !self.contains_strictly(i, j)
    }

    /// Lattice nodes of the closed rectangle, row by row.
    pub fn closure_nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.j0..=self.j1).flat_map(move |j| (self.i0..=self.i1).map(move |i| (i, j)))
    }

    /// Strict interior DOFs, ascending.
    pub fn interior_dofs(&self, mesh: &FineMesh) -> Vec<usize> {
        self.closure_nodes()
            .filter(|&(i, j)| self.contains_strictly(i, j))
            .filter_map(|(i, j)| mesh.dof(i, j))
            .collect()
    }

    /// DOFs of the closed rectangle, ascending.
    pub fn closure_dofs(&self, mesh: &FineMesh) -> Vec<usize> {
        self.closure_nodes().filter_map(|(i, j)| mesh.dof(i, j)).collect()
    }

    /// DOFs on the rectangle boundary (nodes on the domain boundary are not DOFs).
    pub fn boundary_dofs(&self, mesh: &FineMesh) -> Vec<usize> {
        self.closure_nodes()
            .filter(|&(i, j)| self.on_boundary(i, j))
            .filter_map(|(i, j)| mesh.dof(i, j))
            .collect()
    }

    /// Lattice indices of the closed rectangle.
    pub fn closure_lattice(&self, mesh: &FineMesh) -> Vec<usize> {
        self.closure_nodes()
            .map(|(i, j)| mesh.lattice_index(i, j))
            .collect()
    }

    /// Lattice indices of the strict interior.
    pub fn interior_lattice(&self, mesh: &FineMesh) -> Vec<usize> {
        self.closure_nodes()
            .filter(|&(i, j)| self.contains_strictly(i, j))
            .map(|(i, j)| mesh.lattice_index(i, j))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct CoarseBlock {
    pub bi: usize,
    pub bj: usize,
    pub rect: LatticeRect,
    /// Fine DOFs strictly inside the block.
    pub interior: Vec<usize>,
    /// Fine DOFs of the closed block.
    pub closure: Vec<usize>,
    /// Coarse node indices of the four corners.
    pub corners: [usize; 4],
}

#[derive(Debug, Clone)]
pub struct CoarseNode {
    pub ci: usize,
    pub cj: usize,
    /// Blocks forming the neighborhood (4 inside, 2 on a side, 1 at a corner).
    pub blocks: Vec<usize>,
    pub rect: LatticeRect,
    pub interior: Vec<usize>,
    /// DOFs on the neighborhood boundary; nodes on the domain boundary are excluded.
    pub boundary: Vec<usize>,
    pub closure: Vec<usize>,
    pub is_interior: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeOrientation {
    /// Edge along `x = const`.
    Vertical,
    /// Edge along `y = const`.
    Horizontal,
}

#[derive(Debug, Clone)]
pub struct CoarseEdge {
    pub orientation: EdgeOrientation,
    /// The two blocks sharing the edge.
    pub blocks: [usize; 2],
    /// Interior fine DOFs of the edge in order along the edge.
    pub nodes: Vec<usize>,
    /// Coarse nodes at the two ends.
    pub endpoints: [usize; 2],
    /// Closed union of both blocks.
    pub rect: LatticeRect,
    /// Strict interior of the block union: both block interiors plus the edge nodes.
    pub region: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CoarseTopology {
    pub mesh: FineMesh,
    pub nc: usize,
    pub ratio: usize,
    pub blocks: Vec<CoarseBlock>,
    pub nodes: Vec<CoarseNode>,
    /// Interior coarse edges only.
    pub edges: Vec<CoarseEdge>,
}

impl CoarseTopology {
    pub fn new(mesh: &FineMesh, nc: usize) -> Result<Self> {
        if nc < 2 {
            return Err(Error::InvalidMesh(format!(
                "need at least 2 coarse subdivisions, got {nc}"
            )));
        }
        let n = mesh.n();
        if n % nc != 0 {
            return Err(Error::IncompatibleGrid { fine: n, coarse: nc });
        }
        let r = n / nc;
        let node_index = |ci: usize, cj: usize| cj * (nc + 1) + ci;

        let mut blocks = Vec::with_capacity(nc * nc);
        for bj in 0..nc {
            for bi in 0..nc {
                let rect = LatticeRect {
                    i0: bi * r,
                    i1: (bi + 1) * r,
                    j0: bj * r,
                    j1: (bj + 1) * r,
                };
                blocks.push(CoarseBlock {
                    bi,
                    bj,
                    rect,
                    interior: rect.interior_dofs(mesh),
                    closure: rect.closure_dofs(mesh),
                    corners: [
                        node_index(bi, bj),
                        node_index(bi + 1, bj),
                        node_index(bi + 1, bj + 1),
                        node_index(bi, bj + 1),
                    ],
                });
            }
        }

        let mut nodes = Vec::with_capacity((nc + 1) * (nc + 1));
        for cj in 0..=nc {
            for ci in 0..=nc {
                let bis: Vec<usize> = [ci.checked_sub(1), Some(ci)]
                    .into_iter()
                    .flatten()
                    .filter(|&b| b < nc)
                    .collect();
                let bjs: Vec<usize> = [cj.checked_sub(1), Some(cj)]
                    .into_iter()
                    .flatten()
                    .filter(|&b| b < nc)
                    .collect();
                let node_blocks = bjs
                    .iter()
                    .flat_map(|&bj| bis.iter().map(move |&bi| bj * nc + bi))
                    .collect();
                let rect = LatticeRect {
                    i0: bis[0] * r,
                    i1: (bis[bis.len() - 1] + 1) * r,
                    j0: bjs[0] * r,
                    j1: (bjs[bjs.len() - 1] + 1) * r,
                };
                nodes.push(CoarseNode {
                    ci,
                    cj,
                    blocks: node_blocks,
                    rect,
                    interior: rect.interior_dofs(mesh),
                    boundary: rect.boundary_dofs(mesh),
                    closure: rect.closure_dofs(mesh),
                    is_interior: ci > 0 && ci < nc && cj > 0 && cj < nc,
                });
            }
        }

        let mut edges = Vec::with_capacity(2 * nc * (nc - 1));
        for ci in 1..nc {
            for bj in 0..nc {
                let i = ci * r;
                let rect = LatticeRect {
                    i0: (ci - 1) * r,
                    i1: (ci + 1) * r,
                    j0: bj * r,
                    j1: (bj + 1) * r,
                };
                edges.push(CoarseEdge {
                    orientation: EdgeOrientation::Vertical,
                    blocks: [bj * nc + ci - 1, bj * nc + ci],
                    nodes: (bj * r + 1..(bj + 1) * r)
                        .map(|j| mesh.dof(i, j).expect("edge node is interior"))
                        .collect(),
                    endpoints: [node_index(ci, bj), node_index(ci, bj + 1)],
                    rect,
                    region: rect.interior_dofs(mesh),
                });
            }
        }
        for cj in 1..nc {
            for bi in 0..nc {
                let j = cj * r;
                let rect = LatticeRect {
                    i0: bi * r,
                    i1: (bi + 1) * r,
                    j0: (cj - 1) * r,
                    j1: (cj + 1) * r,
                };
                edges.push(CoarseEdge {
                    orientation: EdgeOrientation::Horizontal,
                    blocks: [(cj - 1) * nc + bi, cj * nc + bi],
                    nodes: (bi * r + 1..(bi + 1) * r)
                        .map(|i| mesh.dof(i, j).expect("edge node is interior"))
                        .collect(),
                    endpoints: [node_index(bi, cj), node_index(bi + 1, cj)],
                    rect,
                    region: rect.interior_dofs(mesh),
                });
            }
        }

        Ok(Self {
            mesh: mesh.clone(),
            nc,
            ratio: r,
            blocks,
            nodes,
            edges,
        })
    }

    pub fn coarse_h(&self) -> f64 {
        1.0 / self.nc as f64
    }

    pub fn node_index(&self, ci: usize, cj: usize) -> usize {
        cj * (self.nc + 1) + ci
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_interior)
            .map(|(k, _)| k)
    }

    /// Bilinear hat of coarse node `node` evaluated at lattice node `(i, j)`.
    pub fn hat(&self, node: usize, i: usize, j: usize) -> f64 {
        let cn = &self.nodes[node];
        let r = self.ratio as f64;
        let dx = (i as f64 - (cn.ci * self.ratio) as f64).abs() / r;
        let dy = (j as f64 - (cn.cj * self.ratio) as f64).abs() / r;
        (1.0 - dx).max(0.0) * (1.0 - dy).max(0.0)
    }

    /// Interior coarse nodes split into four parity classes `(ci mod 2, cj mod 2)`
    /// in lexicographic order. Neighborhoods within one class have disjoint interiors.
    pub fn coloring(&self) -> Vec<Vec<usize>> {
        let mut classes = vec![Vec::new(); 4];
        for k in self.interior_nodes() {
            let cn = &self.nodes[k];
            classes[2 * (cn.ci % 2) + cn.cj % 2].push(k);
        }
        classes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn smallest_mesh_has_one_dof() {
        let mesh = FineMesh::new(2).unwrap();
        assert_eq!(mesh.num_dofs(), 1);
        assert_eq!(mesh.dof_point(0), (0.5, 0.5));
    }

    #[test]
    fn dof_map_is_bijective() {
        for n in [4, 7, 200] {
            let mesh = FineMesh::new(n).unwrap();
            assert_eq!(mesh.num_dofs(), (n - 1) * (n - 1));
            let map = mesh.dof_map();
            let dofs: Vec<usize> = map.iter().flatten().copied().collect();
            assert_eq!(dofs.len(), mesh.num_dofs());
            let set: HashSet<_> = dofs.iter().copied().collect();
            assert_eq!(set.len(), mesh.num_dofs());
            assert!(dofs.iter().all(|&d| d < mesh.num_dofs()));
        }
        assert_eq!(FineMesh::new(200).unwrap().num_dofs(), 39601);
    }

    #[test]
    fn rejects_degenerate_mesh() {
        assert!(matches!(FineMesh::new(1), Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn two_by_two_coarse_grid() {
        let mesh = FineMesh::new(4).unwrap();
        let topo = CoarseTopology::new(&mesh, 2).unwrap();
        assert_eq!(topo.blocks.len(), 4);
        assert_eq!(topo.interior_nodes().count(), 1);
        assert_eq!(topo.edges.len(), 4);
        for e in &topo.edges {
            assert_eq!(e.nodes.len(), 1);
        }
    }

    #[test]
    fn large_grid_counts() {
        let mesh = FineMesh::new(200).unwrap();
        let topo = CoarseTopology::new(&mesh, 10).unwrap();
        assert_eq!(topo.blocks.len(), 100);
        assert_eq!(topo.interior_nodes().count(), 81);
        assert_eq!(topo.edges.len(), 180);
        assert!(topo.edges.iter().all(|e| e.nodes.len() == 19));
    }

    #[test]
    fn incompatible_grid() {
        let mesh = FineMesh::new(4).unwrap();
        assert!(matches!(
            CoarseTopology::new(&mesh, 3),
            Err(Error::IncompatibleGrid { fine: 4, coarse: 3 })
        ));
    }

    #[test]
    fn neighborhood_block_counts() {
        let mesh = FineMesh::new(12).unwrap();
        let topo = CoarseTopology::new(&mesh, 4).unwrap();
        for node in &topo.nodes {
            let on_x = node.ci == 0 || node.ci == topo.nc;
            let on_y = node.cj == 0 || node.cj == topo.nc;
            let expected = match (on_x, on_y) {
                (false, false) => 4,
                (true, true) => 1,
                _ => 2,
            };
            assert_eq!(node.blocks.len(), expected);
        }
    }

    #[test]
    fn index_sets_are_consistent() {
        for (n, nc) in [(4, 2), (8, 2), (12, 3), (16, 4), (16, 8)] {
            let mesh = FineMesh::new(n).unwrap();
            let topo = CoarseTopology::new(&mesh, nc).unwrap();
            let r = topo.ratio;
            let mut seen = vec![0usize; mesh.num_lattice_nodes()];
            let mut interior_seen = HashSet::new();
            for b in &topo.blocks {
                assert_eq!(b.interior.len(), (r - 1) * (r - 1));
                let boundary = b.rect.boundary_dofs(&mesh);
                let mut union: Vec<usize> =
                    b.interior.iter().chain(boundary.iter()).copied().collect();
                union.sort_unstable();
                assert_eq!(union, b.closure);
                for &d in &b.interior {
                    assert!(interior_seen.insert(d), "block interiors overlap");
                }
                for node in b.rect.closure_lattice(&mesh) {
                    seen[node] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c > 0));
            for e in &topo.edges {
                assert_eq!(e.nodes.len(), r - 1);
                let mut expected: Vec<usize> = topo.blocks[e.blocks[0]]
                    .interior
                    .iter()
                    .chain(topo.blocks[e.blocks[1]].interior.iter())
                    .chain(e.nodes.iter())
                    .copied()
                    .collect();
                expected.sort_unstable();
                assert_eq!(expected, e.region);
            }
            assert_eq!(topo.edges.len(), 2 * nc * (nc - 1));
            assert_eq!(topo.interior_nodes().count(), (nc - 1) * (nc - 1));
        }
    }

    #[test]
    fn coloring_partitions_interior_nodes() {
        let mesh = FineMesh::new(4).unwrap();
        let topo = CoarseTopology::new(&mesh, 2).unwrap();
        let classes = topo.coloring();
        assert_eq!(classes.iter().filter(|c| !c.is_empty()).count(), 1);

        let mesh = FineMesh::new(20).unwrap();
        let topo = CoarseTopology::new(&mesh, 10).unwrap();
        let classes = topo.coloring();
        assert_eq!(classes.len(), 4);
        let mut all: Vec<usize> = classes.iter().flatten().copied().collect();
        all.sort_unstable();
        let expected: Vec<usize> = topo.interior_nodes().collect();
        assert_eq!(all, expected);
        for class in &classes {
            for (a, &p) in class.iter().enumerate() {
                let ip: HashSet<_> = topo.nodes[p].interior.iter().collect();
                for &q in &class[a + 1..] {
                    assert!(topo.nodes[q].interior.iter().all(|d| !ip.contains(d)));
                }
            }
        }
    }

    #[test]
    fn hats_sum_to_one() {
        let mesh = FineMesh::new(12).unwrap();
        let topo = CoarseTopology::new(&mesh, 3).unwrap();
        for j in 0..=12 {
            for i in 0..=12 {
                let s: f64 = (0..topo.nodes.len()).map(|k| topo.hat(k, i, j)).sum();
                assert!((s - 1.0).abs() < 1e-14);
            }
        }
    }
}
