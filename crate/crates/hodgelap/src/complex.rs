//! Simplicial complex core: embedded complexes, chains, and sparse
//! boundary / coboundary / Laplacian applications.
//!
//! Orientation is canonical: every simplex is stored as a strictly
//! ascending vertex tuple, and the sign of face i in the boundary of a
//! d-simplex is (-1)^i. All products use a deterministic summation
//! order (column major over simplices, faces in ascending position).

use std::collections::HashMap;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// Scope of a chain or operator: the full complex X, the subcomplex K,
/// or the intermediate complex T of the squeeze construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scope {
    X,
    K,
    T,
}

impl std::fmt::Display for Scope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scope::X => write!(f, "X"),
            Scope::K => write!(f, "K"),
            Scope::T => write!(f, "T"),
        }
    }
}

/// Flat list of d-simplices: `flat` holds vertex ids with stride d+1.
#[derive(Debug, Clone, Default)]
pub struct SimplexList {
    pub dim: usize,
    flat: Vec<u32>,
}

impl SimplexList {
    pub fn new(dim: usize) -> Self {
        SimplexList { dim, flat: Vec::new() }
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            self.flat.len()
        } else {
            self.flat.len() / (self.dim + 1)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn get(&self, i: usize) -> &[u32] {
        let w = self.dim + 1;
        &self.flat[i * w..(i + 1) * w]
    }

    pub fn push(&mut self, verts: &[u32]) {
        debug_assert_eq!(verts.len(), self.dim + 1);
        self.flat.extend_from_slice(verts);
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.flat.chunks_exact(self.dim + 1)
    }
}

/// A 3-dimensional simplicial complex with vertex coordinates and
/// subcomplex flags marking K.
#[derive(Debug, Clone)]
pub struct EmbeddedComplex {
    /// Vertex coordinates, indexed by dense vertex index.
    pub coords: Vec<[f64; 3]>,
    /// Original vertex ids (coords / simplices use dense indices).
    pub vertex_ids: Vec<u32>,
    /// simplices[d] lists the d-simplices in dense index order.
    pub simplices: [SimplexList; 4],
    /// in_k[d][i] marks membership of simplex (d, i) in K.
    pub in_k: [Vec<bool>; 4],
    /// index[d] maps a sorted vertex tuple to its dense index.
    index: [HashMap<Vec<u32>, u32>; 4],
    /// K-scope dense index maps (built lazily from in_k).
    k_index: [ScopeIndex; 4],
}

/// Dense reindexing between a scope and the global (X) index space.
#[derive(Debug, Clone, Default)]
pub struct ScopeIndex {
    pub to_global: Vec<u32>,
    /// from_global[g] = local index, or -1 when not in scope.
    pub from_global: Vec<i64>,
}

impl ScopeIndex {
    pub fn from_mask(mask: &[bool]) -> Self {
        let mut to_global = Vec::new();
        let mut from_global = vec![-1i64; mask.len()];
        for (g, &m) in mask.iter().enumerate() {
            if m {
                from_global[g] = to_global.len() as i64;
                to_global.push(g as u32);
            }
        }
        ScopeIndex { to_global, from_global }
    }

    pub fn len(&self) -> usize {
        self.to_global.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_global.is_empty()
    }
}

/// Raw description of a complex prior to validation.
#[derive(Debug, Clone, Default)]
pub struct RawComplex {
    pub vertices: Vec<(u32, [f64; 3])>,
    /// simplices[d] for d in 1..=3, as vertex-id tuples.
    pub simplices: Vec<Vec<Vec<u32>>>,
    /// K membership as (dim, dense index) pairs; empty means K = X.
    pub in_k: Option<Vec<(usize, usize)>>,
}

impl EmbeddedComplex {
    /// Builds a face-closed complex with dense indices from a raw
    /// description. Rejects unsorted tuples, duplicates, missing faces
    /// and K flags that are not face-closed.
    pub fn build(raw: &RawComplex) -> Result<Self> {
        let vertex_ids: Vec<u32> = raw.vertices.iter().map(|v| v.0).collect();
        {
            let mut sorted = vertex_ids.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != vertex_ids.len() {
                return Err(Error::DuplicateSimplex(vec![]));
            }
        }
        // Dense vertex index = position in the input list.
        let id_to_dense: HashMap<u32, u32> = vertex_ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i as u32))
            .collect();
        let coords: Vec<[f64; 3]> = raw.vertices.iter().map(|v| v.1).collect();

        let mut simplices: [SimplexList; 4] = [
            SimplexList::new(0),
            SimplexList::new(1),
            SimplexList::new(2),
            SimplexList::new(3),
        ];
        let mut index: [HashMap<Vec<u32>, u32>; 4] = Default::default();
        for (i, _) in raw.vertices.iter().enumerate() {
            simplices[0].push(&[i as u32]);
            index[0].insert(vec![i as u32], i as u32);
        }

        for d in 1..=MAX_DIM {
            let empty = Vec::new();
            let list = raw.simplices.get(d - 1).unwrap_or(&empty);
            for tuple in list {
                if tuple.len() != d + 1 {
                    return Err(Error::Format(format!(
                        "simplex {:?} listed under dimension {}",
                        tuple, d
                    )));
                }
                if !tuple.windows(2).all(|w| w[0] < w[1]) {
                    return Err(Error::NonSortedTuple(tuple.clone()));
                }
                let dense: Vec<u32> = tuple
                    .iter()
                    .map(|id| {
                        id_to_dense
                            .get(id)
                            .copied()
                            .ok_or_else(|| Error::MissingFace {
                                simplex: tuple.clone(),
                                face: vec![*id],
                            })
                    })
                    .collect::<Result<_>>()?;
                if index[d].contains_key(&dense) {
                    return Err(Error::DuplicateSimplex(tuple.clone()));
                }
                let idx = simplices[d].len() as u32;
                simplices[d].push(&dense);
                index[d].insert(dense, idx);
            }
        }

        // Closure under faces.
        for d in 1..=MAX_DIM {
            for s in simplices[d].iter() {
                for skip in 0..=d {
                    let face: Vec<u32> = s
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != skip)
                        .map(|(_, &v)| v)
                        .collect();
                    if !index[d - 1].contains_key(&face) {
                        return Err(Error::MissingFace {
                            simplex: s.to_vec(),
                            face,
                        });
                    }
                }
            }
        }

        let mut in_k: [Vec<bool>; 4] = [
            vec![false; simplices[0].len()],
            vec![false; simplices[1].len()],
            vec![false; simplices[2].len()],
            vec![false; simplices[3].len()],
        ];
        match &raw.in_k {
            None => {
                for d in 0..=MAX_DIM {
                    in_k[d] = vec![true; simplices[d].len()];
                }
            }
            Some(list) => {
                for &(d, i) in list {
                    if d > MAX_DIM || i >= simplices[d].len() {
                        return Err(Error::Format(format!("K reference ({}, {}) out of range", d, i)));
                    }
                    in_k[d][i] = true;
                }
            }
        }

        let mut c = EmbeddedComplex {
            coords,
            vertex_ids,
            simplices,
            in_k,
            index,
            k_index: Default::default(),
        };
        c.check_k_closed()?;
        c.rebuild_k_index();
        Ok(c)
    }

    fn check_k_closed(&self) -> Result<()> {
        for d in 1..=MAX_DIM {
            for (i, s) in self.simplices[d].iter().enumerate() {
                if !self.in_k[d][i] {
                    continue;
                }
                for skip in 0..=d {
                    let face: Vec<u32> = s
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != skip)
                        .map(|(_, &v)| v)
                        .collect();
                    let fi = self.index[d - 1][&face];
                    if !self.in_k[d - 1][fi as usize] {
                        return Err(Error::KNotFaceClosed {
                            simplex: s.to_vec(),
                            face,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn rebuild_k_index(&mut self) {
        for d in 0..=MAX_DIM {
            self.k_index[d] = ScopeIndex::from_mask(&self.in_k[d]);
        }
    }

    pub fn count(&self, d: usize) -> usize {
        self.simplices[d].len()
    }

    pub fn count_scoped(&self, d: usize, scope: Scope) -> usize {
        match scope {
            Scope::X => self.count(d),
            Scope::K => self.k_index[d].len(),
            Scope::T => panic!("T scope counts live on TScope"),
        }
    }

    pub fn total_simplices(&self) -> usize {
        (0..=MAX_DIM).map(|d| self.count(d)).sum()
    }

    pub fn k_scope(&self, d: usize) -> &ScopeIndex {
        &self.k_index[d]
    }

    pub fn find(&self, d: usize, verts: &[u32]) -> Option<u32> {
        self.index[d].get(verts).copied()
    }

    /// Positions of the d+1 facets of d-simplex (d, i), with signs.
    pub fn faces_of(&self, d: usize, i: usize) -> Vec<(u32, i8)> {
        let s = self.simplices[d].get(i);
        let mut out = Vec::with_capacity(d + 1);
        for skip in 0..=d {
            let face: Vec<u32> = s
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != skip)
                .map(|(_, &v)| v)
                .collect();
            let fi = self.index[d - 1][&face];
            let sign = if skip % 2 == 0 { 1 } else { -1 };
            out.push((fi, sign));
        }
        out
    }

    /// The d-th boundary operator on the requested scope.
    pub fn boundary(&self, d: usize, scope: Scope) -> Result<BoundaryOp> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::DimOutOfRange(d));
        }
        match scope {
            Scope::X => {
                let cols = self.count(d);
                let mut entries = Vec::with_capacity(cols * (d + 1));
                for i in 0..cols {
                    entries.extend(self.faces_of(d, i));
                }
                Ok(BoundaryOp {
                    dim: d,
                    scope,
                    rows: self.count(d - 1),
                    cols,
                    entries,
                })
            }
            Scope::K => {
                let col_ix = &self.k_index[d];
                let row_ix = &self.k_index[d - 1];
                let mut entries = Vec::with_capacity(col_ix.len() * (d + 1));
                for &g in &col_ix.to_global {
                    for (fg, sign) in self.faces_of(d, g as usize) {
                        let local = row_ix.from_global[fg as usize];
                        debug_assert!(local >= 0, "K not face closed");
                        entries.push((local as u32, sign));
                    }
                }
                Ok(BoundaryOp {
                    dim: d,
                    scope,
                    rows: row_ix.len(),
                    cols: col_ix.len(),
                    entries,
                })
            }
            Scope::T => Err(Error::ScopeMismatch {
                expected: "X or K (T boundaries are built from a TScope)".into(),
                got: "T".into(),
            }),
        }
    }

    /// Cotets[t] = tetrahedra having triangle t as a facet (at most 2
    /// for complexes embedded in R^3; more is rejected upstream).
    pub fn triangle_cotets(&self) -> Vec<Vec<u32>> {
        let mut cotets = vec![Vec::new(); self.count(2)];
        for i in 0..self.count(3) {
            for (f, _) in self.faces_of(3, i) {
                cotets[f as usize].push(i as u32);
            }
        }
        cotets
    }
}

/// A dimension- and scope-tagged real vector over oriented simplices.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub dim: usize,
    pub scope: Scope,
    pub values: Vec<f64>,
}

impl Chain {
    pub fn zeros(dim: usize, scope: Scope, len: usize) -> Self {
        Chain { dim, scope, values: vec![0.0; len] }
    }

    pub fn from_values(dim: usize, scope: Scope, values: Vec<f64>) -> Self {
        Chain { dim, scope, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Chain) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn axpy(&mut self, a: f64, x: &Chain) {
        debug_assert_eq!(self.len(), x.len());
        for (s, v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.values {
            *v *= a;
        }
    }

    pub fn expect(&self, dim: usize, scope: Scope, len: usize) -> Result<()> {
        if self.dim != dim || self.scope != scope || self.len() != len {
            return Err(Error::ScopeMismatch {
                expected: format!("dim {} scope {} len {}", dim, scope, len),
                got: format!("dim {} scope {} len {}", self.dim, self.scope, self.len()),
            });
        }
        Ok(())
    }
}

/// Sparse signed incidence structure realizing a boundary map. Each
/// column has exactly dim+1 entries, all +-1.
#[derive(Debug, Clone)]
pub struct BoundaryOp {
    pub dim: usize,
    pub scope: Scope,
    pub rows: usize,
    pub cols: usize,
    /// (row, sign) entries, stride dim+1 per column.
    entries: Vec<(u32, i8)>,
}

impl BoundaryOp {
    pub fn column(&self, j: usize) -> &[(u32, i8)] {
        let w = self.dim + 1;
        &self.entries[j * w..(j + 1) * w]
    }

    /// y = boundary * x on raw slices.
    pub fn apply_raw(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        y.fill(0.0);
        for j in 0..self.cols {
            let v = x[j];
            if v == 0.0 {
                continue;
            }
            for &(r, s) in self.column(j) {
                y[r as usize] += s as f64 * v;
            }
        }
    }

    /// y = boundary^T * x on raw slices.
    pub fn apply_transpose_raw(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        for j in 0..self.cols {
            let mut acc = 0.0;
            for &(r, s) in self.column(j) {
                acc += s as f64 * x[r as usize];
            }
            y[j] = acc;
        }
    }

    pub fn apply(&self, x: &Chain) -> Result<Chain> {
        x.expect(self.dim, self.scope, self.cols)?;
        let mut out = Chain::zeros(self.dim - 1, self.scope, self.rows);
        self.apply_raw(&x.values, &mut out.values);
        Ok(out)
    }

    pub fn apply_transpose(&self, x: &Chain) -> Result<Chain> {
        x.expect(self.dim - 1, self.scope, self.rows)?;
        let mut out = Chain::zeros(self.dim, self.scope, self.cols);
        self.apply_transpose_raw(&x.values, &mut out.values);
        Ok(out)
    }
}

/// Which Laplacian to apply in `laplacian_apply`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplacianKind {
    L1,
    L1Up,
    L1Down,
    L0,
}

/// Prepared boundary operators for Laplacian products on one scope.
pub struct LaplacianOps {
    pub scope: Scope,
    pub d1: BoundaryOp,
    pub d2: BoundaryOp,
}

impl LaplacianOps {
    pub fn new(complex: &EmbeddedComplex, scope: Scope) -> Result<Self> {
        Ok(LaplacianOps {
            scope,
            d1: complex.boundary(1, scope)?,
            d2: complex.boundary(2, scope)?,
        })
    }

    /// Matrix-free Laplacian product via two sparse applies.
    pub fn apply(&self, which: LaplacianKind, x: &Chain) -> Result<Chain> {
        match which {
            LaplacianKind::L0 => {
                x.expect(0, self.scope, self.d1.rows)?;
                let up = self.d1.apply(&self.d1.apply_transpose(x)?)?;
                Ok(up)
            }
            LaplacianKind::L1Up => {
                x.expect(1, self.scope, self.d1.cols)?;
                self.d2.apply(&self.d2.apply_transpose(x)?)
            }
            LaplacianKind::L1Down => {
                x.expect(1, self.scope, self.d1.cols)?;
                self.d1.apply_transpose(&self.d1.apply(x)?)
            }
            LaplacianKind::L1 => {
                let mut up = self.apply(LaplacianKind::L1Up, x)?;
                let down = self.apply(LaplacianKind::L1Down, x)?;
                up.axpy(1.0, &down);
                Ok(up)
            }
        }
    }
}
