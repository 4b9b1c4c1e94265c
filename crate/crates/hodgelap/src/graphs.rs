//! Graph plumbing shared by the dual-graph and SDD-solver machinery:
//! oriented edge lists, BFS spanning trees, exact tree flows and tree
//! Laplacian solves.
//!
//! An edge (tail, head) realizes the boundary column e_head - e_tail;
//! self-loops (tail == head) carry a zero column and are never tree
//! edges.

/// An oriented multigraph (parallel edges and self-loops allowed).
#[derive(Debug, Clone)]
pub struct Graph {
    pub n_vertices: usize,
    pub edges: Vec<(u32, u32)>,
    /// adjacency[v] = (edge index, other endpoint), self-loops skipped
    adjacency: Vec<Vec<(u32, u32)>>,
}

impl Graph {
    pub fn new(n_vertices: usize, edges: Vec<(u32, u32)>) -> Self {
        let mut adjacency = vec![Vec::new(); n_vertices];
        for (i, &(a, b)) in edges.iter().enumerate() {
            if a != b {
                adjacency[a as usize].push((i as u32, b));
                adjacency[b as usize].push((i as u32, a));
            }
        }
        Graph { n_vertices, edges, adjacency }
    }

    /// 1-skeleton of the scoped complex: edge e = {u, v} with u < v is
    /// oriented u -> v, matching the boundary convention d(e) = v - u.
    pub fn skeleton(complex: &crate::complex::EmbeddedComplex, scope: crate::complex::Scope) -> Self {
        use crate::complex::Scope;
        match scope {
            Scope::X => {
                let edges = complex.simplices[1]
                    .iter()
                    .map(|e| (e[0], e[1]))
                    .collect();
                Graph::new(complex.count(0), edges)
            }
            Scope::K => {
                let vix = complex.k_scope(0);
                let edges = complex
                    .k_scope(1)
                    .to_global
                    .iter()
                    .map(|&g| {
                        let e = complex.simplices[1].get(g as usize);
                        (
                            vix.from_global[e[0] as usize] as u32,
                            vix.from_global[e[1] as usize] as u32,
                        )
                    })
                    .collect();
                Graph::new(vix.len(), edges)
            }
            Scope::T => unreachable!("T shares the 1-skeleton of X"),
        }
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// y = boundary * x (divergence of an edge flow).
    pub fn boundary_apply(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            if a == b {
                continue;
            }
            y[b as usize] += x[i];
            y[a as usize] -= x[i];
        }
    }

    /// y = boundary^T * x (potential differences along edges).
    pub fn coboundary_apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            y[i] = if a == b {
                0.0
            } else {
                x[b as usize] - x[a as usize]
            };
        }
    }

    /// y = L0 * x = boundary boundary^T x (graph Laplacian).
    pub fn laplacian_apply(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for &(a, b) in &self.edges {
            if a == b {
                continue;
            }
            let d = x[b as usize] - x[a as usize];
            y[b as usize] += d;
            y[a as usize] -= d;
        }
    }

    /// Connected component id per vertex (BFS order).
    pub fn components(&self) -> (Vec<u32>, usize) {
        let mut comp = vec![u32::MAX; self.n_vertices];
        let mut n_comp = 0u32;
        let mut queue = std::collections::VecDeque::new();
        for start in 0..self.n_vertices {
            if comp[start] != u32::MAX {
                continue;
            }
            comp[start] = n_comp;
            queue.push_back(start as u32);
            while let Some(v) = queue.pop_front() {
                for &(_, w) in &self.adjacency[v as usize] {
                    if comp[w as usize] == u32::MAX {
                        comp[w as usize] = n_comp;
                        queue.push_back(w);
                    }
                }
            }
            n_comp += 1;
        }
        (comp, n_comp as usize)
    }

    pub fn is_connected(&self) -> bool {
        self.n_vertices <= 1 || self.components().1 == 1
    }

    /// Gershgorin bound on the largest Laplacian eigenvalue.
    pub fn laplacian_max_eig_bound(&self) -> f64 {
        let mut deg = vec![0usize; self.n_vertices];
        for &(a, b) in &self.edges {
            if a != b {
                deg[a as usize] += 1;
                deg[b as usize] += 1;
            }
        }
        2.0 * deg.iter().copied().max().unwrap_or(0) as f64
    }

    /// Projects out the per-component constant vectors (the kernel of
    /// the Laplacian) in place.
    pub fn deflate_kernel(&self, comp: &[u32], n_comp: usize, x: &mut [f64]) {
        let mut sums = vec![0.0f64; n_comp];
        let mut counts = vec![0usize; n_comp];
        for (v, &c) in comp.iter().enumerate() {
            sums[c as usize] += x[v];
            counts[c as usize] += 1;
        }
        for s in 0..n_comp {
            sums[s] /= counts[s].max(1) as f64;
        }
        for (v, &c) in comp.iter().enumerate() {
            x[v] -= sums[c as usize];
        }
    }
}

/// A rooted BFS spanning forest with parent pointers, the exact tree
/// flow solve and its transpose, and the exact tree Laplacian solve.
#[derive(Debug, Clone)]
pub struct SpanningTree {
    pub graph_n: usize,
    /// parent vertex, or self for roots
    pub parent: Vec<u32>,
    /// parent edge index into the host graph, or u32::MAX for roots
    pub parent_edge: Vec<u32>,
    /// +1 when the vertex is the head of its parent edge
    pub parent_sign: Vec<i8>,
    /// vertices in BFS order (roots first within each component)
    pub bfs_order: Vec<u32>,
    /// tree membership flag per host edge
    pub in_tree: Vec<bool>,
    pub comp: Vec<u32>,
    pub n_comp: usize,
}

impl SpanningTree {
    /// BFS forest rooted at vertex 0 of each component (deterministic
    /// adjacency order).
    pub fn bfs(graph: &Graph) -> Self {
        let n = graph.n_vertices;
        let mut parent = (0..n as u32).collect::<Vec<_>>();
        let mut parent_edge = vec![u32::MAX; n];
        let mut parent_sign = vec![0i8; n];
        let mut bfs_order = Vec::with_capacity(n);
        let mut in_tree = vec![false; graph.n_edges()];
        let mut comp = vec![u32::MAX; n];
        let mut n_comp = 0u32;
        let mut queue = std::collections::VecDeque::new();
        for start in 0..n {
            if comp[start] != u32::MAX {
                continue;
            }
            comp[start] = n_comp;
            bfs_order.push(start as u32);
            queue.push_back(start as u32);
            while let Some(v) = queue.pop_front() {
                for &(ei, w) in &graph.adjacency[v as usize] {
                    if comp[w as usize] == u32::MAX {
                        comp[w as usize] = n_comp;
                        parent[w as usize] = v;
                        parent_edge[w as usize] = ei;
                        let (_a, b) = graph.edges[ei as usize];
                        parent_sign[w as usize] = if b == w { 1 } else { -1 };
                        in_tree[ei as usize] = true;
                        bfs_order.push(w);
                        queue.push_back(w);
                    }
                }
            }
            n_comp += 1;
        }
        SpanningTree {
            graph_n: n,
            parent,
            parent_edge,
            parent_sign,
            bfs_order,
            in_tree,
            comp,
            n_comp: n_comp as usize,
        }
    }

    /// Exact tree flow: given a divergence b in the image of the
    /// boundary (zero sum per component), returns the unique flow on
    /// tree edges with that divergence. Leaf elimination, O(n).
    /// Output is indexed by host graph edges (zeros off the tree).
    pub fn flow(&self, b: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mut acc = b.to_vec();
        for &v in self.bfs_order.iter().rev() {
            let v = v as usize;
            let e = self.parent_edge[v];
            if e == u32::MAX {
                continue;
            }
            out[e as usize] = self.parent_sign[v] as f64 * acc[v];
            let p = self.parent[v] as usize;
            acc[p] += acc[v];
        }
    }

    /// Transpose of `flow`: potentials accumulated root-down.
    pub fn flow_transpose(&self, g: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for &v in self.bfs_order.iter() {
            let v = v as usize;
            let e = self.parent_edge[v];
            if e == u32::MAX {
                out[v] = 0.0;
                continue;
            }
            out[v] = out[self.parent[v] as usize] + self.parent_sign[v] as f64 * g[e as usize];
        }
    }

    /// Exact tree Laplacian pseudo-solve: z with L_tree z = r for r in
    /// the image, z orthogonal to the per-component constants.
    pub fn laplacian_solve(&self, graph: &Graph, r: &[f64], z: &mut [f64]) {
        let mut flow = vec![0.0; graph.n_edges()];
        self.flow(r, &mut flow);
        // integrate the tree gradient from the roots down
        for &v in self.bfs_order.iter() {
            let v = v as usize;
            let e = self.parent_edge[v];
            if e == u32::MAX {
                z[v] = 0.0;
            } else {
                z[v] = z[self.parent[v] as usize] + self.parent_sign[v] as f64 * flow[e as usize];
            }
        }
        graph.deflate_kernel(&self.comp, self.n_comp, z);
    }

    /// y = L_tree x.
    pub fn laplacian_apply(&self, graph: &Graph, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for (ei, &(a, b)) in graph.edges.iter().enumerate() {
            if !self.in_tree[ei] {
                continue;
            }
            let d = x[b as usize] - x[a as usize];
            y[b as usize] += d;
            y[a as usize] -= d;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle_graph() -> Graph {
        Graph::new(3, vec![(0, 1), (0, 2), (1, 2)])
    }

    #[test]
    fn laplacian_and_boundary_agree() {
        let g = triangle_graph();
        let x = vec![1.0, -2.0, 0.5];
        let mut via_l = vec![0.0; 3];
        g.laplacian_apply(&x, &mut via_l);
        let mut grad = vec![0.0; 3];
        g.coboundary_apply(&x, &mut grad);
        let mut via_b = vec![0.0; 3];
        g.boundary_apply(&grad, &mut via_b);
        for i in 0..3 {
            assert!((via_l[i] - via_b[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn tree_flow_reproduces_divergence() {
        let g = Graph::new(5, vec![(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)]);
        let tree = SpanningTree::bfs(&g);
        let b = vec![2.0, -1.0, 3.0, -4.0, 0.0];
        let mut flow = vec![0.0; g.n_edges()];
        tree.flow(&b, &mut flow);
        let mut div = vec![0.0; 5];
        g.boundary_apply(&flow, &mut div);
        for i in 0..5 {
            assert!((div[i] - b[i]).abs() < 1e-12);
        }
        for (ei, f) in flow.iter().enumerate() {
            if !tree.in_tree[ei] {
                assert_eq!(*f, 0.0);
            }
        }
    }

    #[test]
    fn tree_flow_transpose_is_adjoint() {
        let g = Graph::new(4, vec![(0, 1), (1, 2), (2, 3), (0, 3)]);
        let tree = SpanningTree::bfs(&g);
        // random-ish integer vectors; <flow(b), g> == <b, flow^T(g)>
        let b = vec![1.0, -3.0, 2.0, 0.0];
        let w = vec![2.0, 1.0, -1.0, 4.0];
        let mut fb = vec![0.0; 4];
        tree.flow(&b, &mut fb);
        let lhs: f64 = fb.iter().zip(&w).map(|(a, b)| a * b).sum();
        let mut ftw = vec![0.0; 4];
        tree.flow_transpose(&w, &mut ftw);
        let rhs: f64 = b.iter().zip(&ftw).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn tree_laplacian_solve_is_exact() {
        let g = Graph::new(5, vec![(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)]);
        let tree = SpanningTree::bfs(&g);
        let mut r = vec![3.0, -1.0, -1.0, 2.0, -3.0];
        let (comp, nc) = g.components();
        g.deflate_kernel(&comp, nc, &mut r);
        let mut z = vec![0.0; 5];
        tree.laplacian_solve(&g, &r, &mut z);
        let mut back = vec![0.0; 5];
        tree.laplacian_apply(&g, &z, &mut back);
        for i in 0..5 {
            assert!((back[i] - r[i]).abs() < 1e-12, "residual at {}", i);
        }
        let mean: f64 = z.iter().sum::<f64>() / 5.0;
        assert!(mean.abs() < 1e-13);
    }

    #[test]
    fn self_loops_are_inert() {
        let g = Graph::new(2, vec![(0, 1), (1, 1)]);
        let x = vec![1.0, 5.0];
        let mut y = vec![0.0; 2];
        g.boundary_apply(&x, &mut y);
        assert_eq!(y, vec![-1.0, 1.0]);
        let p = vec![3.0, 7.0];
        let mut grad = vec![0.0; 2];
        g.coboundary_apply(&p, &mut grad);
        assert_eq!(grad, vec![4.0, 0.0]);
    }
}
