//! Collapsing sequences of X: representation, validation by
//! simulation, and normalization (tetrahedron-triangle pairs first).

use std::collections::HashMap;

use crate::complex::{EmbeddedComplex, MAX_DIM};
use crate::error::{Error, Result};

/// One collapse pair: sigma (dim d) removed together with its free
/// face tau (dim d-1). Simplices referenced by (dim, dense index).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollapsePair {
    pub sigma: (usize, usize),
    pub tau: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    TetTri,
    TriEdge,
    EdgeVertex,
}

impl CollapsePair {
    pub fn kind(&self) -> PairKind {
        match self.sigma.0 {
            3 => PairKind::TetTri,
            2 => PairKind::TriEdge,
            _ => PairKind::EdgeVertex,
        }
    }
}

/// An ordered list of collapse pairs witnessing collapsibility of X
/// down to a single vertex.
#[derive(Debug, Clone, Default)]
pub struct CollapsingSequence {
    pub pairs: Vec<CollapsePair>,
}

/// Result of validating a sequence against a complex.
#[derive(Debug, Clone)]
pub enum Validation {
    Ok,
    /// Index of the first violating pair plus a description.
    Violation { index: usize, reason: String },
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        matches!(self, Validation::Ok)
    }
}

/// Incidence tables used by the removal simulation: for each simplex,
/// the dense indices of its cofacets (one dimension up).
pub struct CofaceTables {
    /// cofaces[d][i] = indices of (d+1)-simplices having (d, i) as a face.
    pub cofaces: [Vec<Vec<u32>>; 3],
}

impl CofaceTables {
    pub fn new(complex: &EmbeddedComplex) -> Self {
        let mut cofaces: [Vec<Vec<u32>>; 3] = [
            vec![Vec::new(); complex.count(0)],
            vec![Vec::new(); complex.count(1)],
            vec![Vec::new(); complex.count(2)],
        ];
        for d in 1..=MAX_DIM {
            for i in 0..complex.count(d) {
                for (f, _) in complex.faces_of(d, i) {
                    cofaces[d - 1][f as usize].push(i as u32);
                }
            }
        }
        CofaceTables { cofaces }
    }
}

/// Simulates the removals with free-face checks; reports the first
/// violation. An empty sequence is valid only when the complex is a
/// single vertex (or empty).
pub fn validate(complex: &EmbeddedComplex, seq: &CollapsingSequence) -> Validation {
    let tables = CofaceTables::new(complex);
    let mut alive: [Vec<bool>; 4] = [
        vec![true; complex.count(0)],
        vec![true; complex.count(1)],
        vec![true; complex.count(2)],
        vec![true; complex.count(3)],
    ];
    for (idx, pair) in seq.pairs.iter().enumerate() {
        let (sd, si) = pair.sigma;
        let (td, ti) = pair.tau;
        if sd == 0 || sd > MAX_DIM || td + 1 != sd {
            return Validation::Violation {
                index: idx,
                reason: format!("pair dims ({}, {}) are not (d, d-1)", sd, td),
            };
        }
        if si >= complex.count(sd) || ti >= complex.count(td) {
            return Validation::Violation {
                index: idx,
                reason: "simplex reference out of range".into(),
            };
        }
        if !alive[sd][si] {
            return Validation::Violation {
                index: idx,
                reason: format!("sigma ({}, {}) already removed", sd, si),
            };
        }
        if !alive[td][ti] {
            return Validation::Violation {
                index: idx,
                reason: format!("tau ({}, {}) already removed", td, ti),
            };
        }
        // tau must be a face of sigma and of no other living simplex.
        let mut sigma_is_coface = false;
        let mut other_living = 0usize;
        for &c in &tables.cofaces[td][ti] {
            if !alive[td + 1][c as usize] {
                continue;
            }
            if c as usize == si {
                sigma_is_coface = true;
            } else {
                other_living += 1;
            }
        }
        // Living cofaces two dimensions up do not matter directly
        // (freeness is only about cofacets), but a cofacet of tau that
        // is itself a face of a living simplex is still living here, so
        // the cofacet count is the complete check.
        if !sigma_is_coface {
            return Validation::Violation {
                index: idx,
                reason: "tau is not a face of sigma".into(),
            };
        }
        if other_living > 0 {
            return Validation::Violation {
                index: idx,
                reason: format!("tau has {} other living cofaces", other_living),
            };
        }
        alive[sd][si] = false;
        alive[td][ti] = false;
    }
    let remaining: usize = (0..=MAX_DIM)
        .map(|d| alive[d].iter().filter(|&&a| a).count())
        .sum();
    let vertices_left = alive[0].iter().filter(|&&a| a).count();
    if remaining == vertices_left && vertices_left <= 1 {
        Validation::Ok
    } else {
        Validation::Violation {
            index: seq.pairs.len(),
            reason: format!(
                "sequence ends with {} simplices ({} vertices) remaining",
                remaining, vertices_left
            ),
        }
    }
}

/// Returns an equivalent valid sequence with all tetrahedron-triangle
/// collapses first. A stable partition by kind suffices: a tet-tri
/// pair's free face only has tetrahedra as cofacets, and tetrahedra
/// are removed by tet-tri pairs alone, so keeping the relative order
/// of each kind preserves every freeness precondition.
pub fn normalize(complex: &EmbeddedComplex, seq: &CollapsingSequence) -> Result<CollapsingSequence> {
    let mut front: Vec<CollapsePair> = Vec::new();
    let mut back: Vec<CollapsePair> = Vec::new();
    for p in &seq.pairs {
        if p.kind() == PairKind::TetTri {
            front.push(*p);
        } else {
            back.push(*p);
        }
    }
    front.extend(back);
    let out = CollapsingSequence { pairs: front };
    match validate(complex, &out) {
        Validation::Ok => Ok(out),
        Validation::Violation { index, .. } => Err(Error::CannotReorder(index)),
    }
}

/// True when every tet-tri pair precedes every other kind.
pub fn is_normalized(seq: &CollapsingSequence) -> bool {
    let mut seen_other = false;
    for p in &seq.pairs {
        match p.kind() {
            PairKind::TetTri if seen_other => return false,
            PairKind::TetTri => {}
            _ => seen_other = true,
        }
    }
    true
}

/// Positions where normalization matters for Fill: the triangles of
/// tet-tri pairs (coefficient 0) and the ordered tri-edge pairs.
pub struct SequenceParts {
    pub tet_tri: Vec<CollapsePair>,
    pub tri_edge: Vec<CollapsePair>,
    pub edge_vertex: Vec<CollapsePair>,
}

pub fn split_parts(seq: &CollapsingSequence) -> SequenceParts {
    let mut parts = SequenceParts {
        tet_tri: Vec::new(),
        tri_edge: Vec::new(),
        edge_vertex: Vec::new(),
    };
    for p in &seq.pairs {
        match p.kind() {
            PairKind::TetTri => parts.tet_tri.push(*p),
            PairKind::TriEdge => parts.tri_edge.push(*p),
            PairKind::EdgeVertex => parts.edge_vertex.push(*p),
        }
    }
    parts
}

/// Tie-breaking order for the greedy free-pair search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PickOrder {
    /// Highest tau index first (peels from the lexicographically far
    /// corner inward).
    HighFirst,
    /// Lowest tau index first.
    LowFirst,
    /// Most recently freed first.
    Lifo,
}

/// Finds a collapsing sequence by greedy free-pair removal, preferring
/// the highest-dimensional free pair available with the given
/// tie-breaking order. Returns None when the search gets stuck.
pub fn greedy_sequence_with(
    complex: &EmbeddedComplex,
    order: PickOrder,
) -> Option<CollapsingSequence> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let tables = CofaceTables::new(complex);
    let mut alive: [Vec<bool>; 4] = [
        vec![true; complex.count(0)],
        vec![true; complex.count(1)],
        vec![true; complex.count(2)],
        vec![true; complex.count(3)],
    ];
    let mut living_cofaces: [Vec<u32>; 3] = [
        tables.cofaces[0].iter().map(|v| v.len() as u32).collect(),
        tables.cofaces[1].iter().map(|v| v.len() as u32).collect(),
        tables.cofaces[2].iter().map(|v| v.len() as u32).collect(),
    ];
    let faces_cache: Vec<Vec<Vec<(u32, i8)>>> = (1..=MAX_DIM)
        .map(|d| (0..complex.count(d)).map(|i| complex.faces_of(d, i)).collect())
        .collect();

    enum Queue {
        Heap(BinaryHeap<u32>),
        RevHeap(BinaryHeap<Reverse<u32>>),
        Stack(Vec<u32>),
    }
    impl Queue {
        fn push(&mut self, v: u32) {
            match self {
                Queue::Heap(h) => h.push(v),
                Queue::RevHeap(h) => h.push(Reverse(v)),
                Queue::Stack(s) => s.push(v),
            }
        }
        fn peek(&self) -> Option<u32> {
            match self {
                Queue::Heap(h) => h.peek().copied(),
                Queue::RevHeap(h) => h.peek().map(|r| r.0),
                Queue::Stack(s) => s.last().copied(),
            }
        }
        fn pop(&mut self) {
            match self {
                Queue::Heap(h) => {
                    h.pop();
                }
                Queue::RevHeap(h) => {
                    h.pop();
                }
                Queue::Stack(s) => {
                    s.pop();
                }
            }
        }
    }
    let make_queue = || match order {
        PickOrder::HighFirst => Queue::Heap(BinaryHeap::new()),
        PickOrder::LowFirst => Queue::RevHeap(BinaryHeap::new()),
        PickOrder::Lifo => Queue::Stack(Vec::new()),
    };
    let mut queues: [Queue; 3] = [make_queue(), make_queue(), make_queue()];
    for td in 0..MAX_DIM {
        for i in 0..complex.count(td) {
            if living_cofaces[td][i] == 1 {
                queues[td].push(i as u32);
            }
        }
    }

    let total_pairs: usize = (1..=MAX_DIM).map(|d| complex.count(d)).sum::<usize>();
    let expected_pairs = (total_pairs + complex.count(0)).saturating_sub(1) / 2;
    let mut pairs = Vec::with_capacity(expected_pairs);

    let remove = |alive: &mut [Vec<bool>; 4],
                      living_cofaces: &mut [Vec<u32>; 3],
                      queues: &mut [Queue; 3],
                      d: usize,
                      i: usize| {
        alive[d][i] = false;
        if d > 0 {
            for &(f, _) in &faces_cache[d - 1][i] {
                let fi = f as usize;
                living_cofaces[d - 1][fi] -= 1;
                if living_cofaces[d - 1][fi] == 1 && alive[d - 1][fi] {
                    queues[d - 1].push(f);
                }
            }
        }
    };

    while pairs.len() < expected_pairs {
        let mut found = None;
        'outer: for td in (0..MAX_DIM).rev() {
            while let Some(ti) = queues[td].peek() {
                let ti = ti as usize;
                if alive[td][ti] && living_cofaces[td][ti] == 1 {
                    let si = tables.cofaces[td][ti]
                        .iter()
                        .find(|&&c| alive[td + 1][c as usize])
                        .copied()
                        .expect("count says one living coface");
                    found = Some((td, ti, si as usize));
                    break 'outer;
                }
                queues[td].pop();
            }
        }
        let Some((td, ti, si)) = found else {
            return None;
        };
        queues[td].pop();
        remove(&mut alive, &mut living_cofaces, &mut queues, td + 1, si);
        remove(&mut alive, &mut living_cofaces, &mut queues, td, ti);
        pairs.push(CollapsePair { sigma: (td + 1, si), tau: (td, ti) });
    }
    let seq = CollapsingSequence { pairs };
    match validate(complex, &seq) {
        Validation::Ok => Some(seq),
        Validation::Violation { .. } => None,
    }
}

/// Greedy search trying each pick order until one collapses fully.
pub fn greedy_sequence(complex: &EmbeddedComplex) -> Option<CollapsingSequence> {
    for order in [PickOrder::HighFirst, PickOrder::LowFirst, PickOrder::Lifo] {
        if let Some(seq) = greedy_sequence_with(complex, order) {
            return Some(seq);
        }
    }
    None
}

/// Looks up pair references from vertex tuples; used by generators.
pub fn pair_from_tuples(
    complex: &EmbeddedComplex,
    sigma: &[u32],
    tau: &[u32],
) -> Result<CollapsePair> {
    let sd = sigma.len() - 1;
    let td = tau.len() - 1;
    let si = complex
        .find(sd, sigma)
        .ok_or_else(|| Error::Format(format!("no simplex {:?}", sigma)))?;
    let ti = complex
        .find(td, tau)
        .ok_or_else(|| Error::Format(format!("no simplex {:?}", tau)))?;
    Ok(CollapsePair {
        sigma: (sd, si as usize),
        tau: (td, ti as usize),
    })
}

/// Map from key (dim, index) to the ordinal of the pair removing it,
/// for both sigma and tau roles.
pub fn removal_index(seq: &CollapsingSequence) -> HashMap<(usize, usize), usize> {
    let mut map = HashMap::new();
    for (i, p) in seq.pairs.iter().enumerate() {
        map.insert(p.sigma, i);
        map.insert(p.tau, i);
    }
    map
}
