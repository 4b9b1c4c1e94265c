//! Dual-graph construction from the embedding and the intermediate
//! complex T with K in T in X and H_2(T) = H_2(K).
//!
//! The ambient triangulation of a triangulated ball X is taken to be X
//! itself plus one distinguished outer volume. Volumes of the scoped
//! complement come from a union-find over facet adjacencies: the two
//! sides of a triangle outside the scope lie in the same volume. Dual
//! edge orientations come from a coherent orientation of the
//! tetrahedra, which exists for any complex embeddable in R^3 and
//! makes every volume boundary a genuine 2-cycle.

use crate::complex::{EmbeddedComplex, Scope, ScopeIndex};
use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::oracle;

struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] as usize == x {
            return x;
        }
        let root = self.find(self.parent[x] as usize);
        self.parent[x] = root as u32;
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.rank[ra] < self.rank[rb] {
            self.parent[ra] = rb as u32;
        } else {
            self.parent[rb] = ra as u32;
            if self.rank[ra] == self.rank[rb] {
                self.rank[ra] += 1;
            }
        }
    }
}

/// A coherent orientation of the tetrahedra: signs eps with
/// eps_a (d3)_{t,a} = -eps_b (d3)_{t,b} across every interior triangle.
/// Exists exactly when the tetrahedral part is orientable, which holds
/// for complexes embedded in R^3.
pub fn coherent_tet_orientation(complex: &EmbeddedComplex) -> Result<Vec<i8>> {
    let n3 = complex.count(3);
    let n2 = complex.count(2);
    let mut cotets: Vec<Vec<(u32, i8)>> = vec![Vec::new(); n2];
    for t in 0..n3 {
        for (f, s) in complex.faces_of(3, t) {
            cotets[f as usize].push((t as u32, s));
        }
    }
    for (t, cs) in cotets.iter().enumerate() {
        if cs.len() > 2 {
            return Err(Error::NoAmbient(format!(
                "triangle {} has {} cotetrahedra; not embeddable in R^3",
                t,
                cs.len()
            )));
        }
    }
    let mut eps = vec![0i8; n3];
    let mut queue = std::collections::VecDeque::new();
    for start in 0..n3 {
        if eps[start] != 0 {
            continue;
        }
        eps[start] = 1;
        queue.push_back(start);
        while let Some(a) = queue.pop_front() {
            for (f, sa) in complex.faces_of(3, a) {
                for &(b, sb) in &cotets[f as usize] {
                    let b = b as usize;
                    if b == a {
                        continue;
                    }
                    let want = -eps[a] * sa * sb;
                    if eps[b] == 0 {
                        eps[b] = want;
                        queue.push_back(b);
                    } else if eps[b] != want {
                        return Err(Error::NoAmbient(
                            "tetrahedra are not coherently orientable".into(),
                        ));
                    }
                }
            }
        }
    }
    Ok(eps)
}

/// The dual graph of a scoped complex: nodes are volumes of the
/// complement (ambient tetrahedra merged across out-of-scope
/// triangles, plus one outer node), edges are dual to scoped
/// triangles.
pub struct DualGraph {
    pub scope: Scope,
    pub graph: Graph,
    pub outer_node: u32,
    /// volume of each X-tetrahedron (post-merge node index).
    pub tet_volume: Vec<u32>,
}

/// Builds the dual graph of X or of K. Two ambient volumes join when
/// they share a triangle NOT in the scoped complex; a volume whose
/// boundary constraint forces the zero 3-chain joins the outer node.
pub fn build_dual_graph(complex: &EmbeddedComplex, scope: Scope) -> Result<DualGraph> {
    let n3 = complex.count(3);
    let n2 = complex.count(2);
    let outer = n3;
    let eps = coherent_tet_orientation(complex)?;

    let mut cotets: Vec<Vec<(u32, i8)>> = vec![Vec::new(); n2];
    for t in 0..n3 {
        for (f, s) in complex.faces_of(3, t) {
            cotets[f as usize].push((t as u32, s));
        }
    }

    let in_scope = |t: usize| -> bool {
        match scope {
            Scope::X => true,
            Scope::K => complex.in_k[2][t],
            Scope::T => unreachable!("dual graphs are built for X or K"),
        }
    };

    // merge across out-of-scope triangles; a boundary triangle outside
    // the scope pins its cotet's volume to zero (the outer node)
    let mut uf = UnionFind::new(n3 + 1);
    for t in 0..n2 {
        if in_scope(t) {
            continue;
        }
        match cotets[t].len() {
            0 => {}
            1 => uf.union(cotets[t][0].0 as usize, outer),
            _ => uf.union(cotets[t][0].0 as usize, cotets[t][1].0 as usize),
        }
    }

    // compact node ids
    let mut node_id = vec![u32::MAX; n3 + 1];
    let mut n_nodes = 0u32;
    for v in 0..=n3 {
        let root = uf.find(v);
        if node_id[root] == u32::MAX {
            node_id[root] = n_nodes;
            n_nodes += 1;
        }
    }
    let outer_root = uf.find(outer);
    let outer_node = node_id[outer_root];

    // dual edges for scoped triangles in scoped dense order; the
    // signed incidence of side (tet, s) is s * eps_tet at its volume,
    // entries at the outer (zero) volume are balancing only
    let scoped: Vec<usize> = (0..n2).filter(|&t| in_scope(t)).collect();
    let mut edges = Vec::with_capacity(scoped.len());
    for &t in &scoped {
        let mut honest: Vec<(u32, i8)> = Vec::with_capacity(2);
        for &(ct, s) in &cotets[t] {
            let root = uf.find(ct as usize);
            if root != outer_root {
                honest.push((node_id[root], s * eps[ct as usize]));
            }
        }
        let edge = match honest.len() {
            0 => (outer_node, outer_node),
            1 => {
                let (v, e) = honest[0];
                if e > 0 {
                    (outer_node, v)
                } else {
                    (v, outer_node)
                }
            }
            _ => {
                let (va, ea) = honest[0];
                let (vb, eb) = honest[1];
                if va == vb {
                    if ea + eb != 0 {
                        return Err(Error::NoAmbient(format!(
                            "triangle {} has coinciding oriented sides",
                            t
                        )));
                    }
                    (va, va)
                } else {
                    if ea + eb != 0 {
                        return Err(Error::NoAmbient(format!(
                            "triangle {} has an unbalanced dual column",
                            t
                        )));
                    }
                    if ea > 0 {
                        (vb, va)
                    } else {
                        (va, vb)
                    }
                }
            }
        };
        edges.push(edge);
    }

    let mut tet_volume = vec![0u32; n3];
    for t in 0..n3 {
        tet_volume[t] = node_id[uf.find(t)];
    }

    let graph = Graph::new(n_nodes as usize, edges);
    if !graph.is_connected() {
        return Err(Error::NoAmbient(format!(
            "dual graph of {} is disconnected",
            scope
        )));
    }

    Ok(DualGraph {
        scope,
        graph,
        outer_node,
        tet_volume,
    })
}

/// The intermediate complex T, held as a scope over X: all vertices
/// and edges of X, the triangles of X minus the opened set D, and
/// exactly the tetrahedra of K.
pub struct TComplex {
    /// X-triangle indices removed from T, in squeeze order.
    pub order: Vec<(u32, u32)>,
    /// triangle scope (T-local dense indices over X triangles).
    pub tri: ScopeIndex,
    /// tetrahedron scope (K tets only).
    pub tet: ScopeIndex,
    /// K-membership of T-local triangles.
    pub tri_in_k: Vec<bool>,
}

impl TComplex {
    pub fn n2(&self) -> usize {
        self.tri.len()
    }
}

/// Builds T by opening every non-K tetrahedron reachable from the
/// outer volume through non-K triangles (BFS, discovery order), and
/// dropping unreachable non-K tetrahedra without opening them (their
/// boundary spheres lie in K). Verifies beta_2(T) = beta_2(K) against
/// the dense oracle when the instance fits under the cap.
pub fn build_t(complex: &EmbeddedComplex, dense_cap: usize) -> Result<TComplex> {
    let n3 = complex.count(3);
    let n2 = complex.count(2);

    let mut cotets: Vec<Vec<u32>> = vec![Vec::new(); n2];
    for t in 0..n3 {
        for (f, _) in complex.faces_of(3, t) {
            cotets[f as usize].push(t as u32);
        }
    }

    // BFS over the unmerged dual of X (tets + outer), restricted to
    // non-K triangles, rooted at the outer node. Components of non-K
    // tetrahedra enclosed by K triangles are opened from an interior
    // root of their own: the root is dropped without opening (its
    // boundary sphere lies in K), the rest are opened as usual.
    let outer = n3;
    let mut visited = vec![false; n3 + 1];
    let mut order: Vec<(u32, u32)> = Vec::new();
    let mut queue = std::collections::VecDeque::new();
    let mut bfs = |start: usize, visited: &mut Vec<bool>, order: &mut Vec<(u32, u32)>| {
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            let tris: Vec<usize> = if v == outer {
                (0..n2).filter(|&t| cotets[t].len() == 1).collect()
            } else {
                complex.faces_of(3, v).iter().map(|&(f, _)| f as usize).collect()
            };
            for t in tris {
                if complex.in_k[2][t] {
                    continue;
                }
                for &ct in &cotets[t] {
                    let ct = ct as usize;
                    if ct != v && !visited[ct] {
                        visited[ct] = true;
                        queue.push_back(ct);
                        order.push((t as u32, ct as u32));
                    }
                }
            }
        }
    };
    bfs(outer, &mut visited, &mut order);
    for root in 0..n3 {
        if !visited[root] && !complex.in_k[3][root] {
            bfs(root, &mut visited, &mut order);
        }
    }

    for t in 0..n3 {
        if complex.in_k[3][t] && visited[t] {
            return Err(Error::SpanningTreeBlocked(t));
        }
    }

    let mut tri_mask = vec![true; n2];
    for &(t, _) in &order {
        tri_mask[t as usize] = false;
    }
    let tet_mask: Vec<bool> = (0..n3).map(|t| complex.in_k[3][t]).collect();
    let tri = ScopeIndex::from_mask(&tri_mask);
    let tet = ScopeIndex::from_mask(&tet_mask);
    let tri_in_k: Vec<bool> = tri
        .to_global
        .iter()
        .map(|&g| complex.in_k[2][g as usize])
        .collect();

    let t_complex = TComplex { order, tri, tet, tri_in_k };

    if complex.total_simplices() <= dense_cap {
        let b2_t = betti2_of_t(complex, &t_complex);
        let b2_k = oracle::betti(complex, 2, Scope::K, dense_cap)?;
        if b2_t != b2_k {
            return Err(Error::H2Mismatch { got: b2_t, expected: b2_k });
        }
    }
    Ok(t_complex)
}

/// beta_2 of T by dense rank-nullity over its restricted boundaries.
pub fn betti2_of_t(complex: &EmbeddedComplex, t: &TComplex) -> usize {
    use nalgebra::DMatrix;
    let d2x = complex.boundary(2, Scope::X).expect("d2");
    let n1 = complex.count(1);
    let mut d2t = DMatrix::zeros(n1, t.tri.len());
    for (local, &g) in t.tri.to_global.iter().enumerate() {
        for &(r, s) in d2x.column(g as usize) {
            d2t[(r as usize, local)] += s as f64;
        }
    }
    let mut d3t = DMatrix::zeros(t.tri.len(), t.tet.len());
    for (local, &g) in t.tet.to_global.iter().enumerate() {
        for (f, s) in complex.faces_of(3, g as usize) {
            let fl = t.tri.from_global[f as usize];
            assert!(fl >= 0, "tetrahedron of T has an opened facet");
            d3t[(fl as usize, local)] += s as f64;
        }
    }
    t.tri.len() - oracle::boundary_rank(&d2t) - oracle::boundary_rank(&d3t)
}

/// The squeeze order produced by `build_t`: each opened triangle
/// paired with the tetrahedron it was discovered through. Validates
/// the defining property: sigma_i is a face of tau_i, and tau_i has
/// all its other facets still present at step i.
pub fn squeeze_order(complex: &EmbeddedComplex, t: &TComplex) -> Result<Vec<(u32, u32)>> {
    let mut removed = vec![false; complex.count(2)];
    for (i, &(tri, tet)) in t.order.iter().enumerate() {
        let faces = complex.faces_of(3, tet as usize);
        if !faces.iter().any(|&(f, _)| f == tri) {
            return Err(Error::OrderInfeasible(i));
        }
        for &(f, _) in &faces {
            if f != tri && removed[f as usize] {
                return Err(Error::OrderInfeasible(i));
            }
        }
        removed[tri as usize] = true;
    }
    Ok(t.order.clone())
}
