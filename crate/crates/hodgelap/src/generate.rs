//! Seeded instance generators. Every generator emits a collapsible X
//! with an explicit, validated collapsing sequence and K flags with a
//! prescribed first Betti number.
//!
//! Construction families:
//! - `ball(k)`: a stacked ball grown by gluing tetrahedra onto exposed
//!   facets with a fresh apex vertex; the collapsing sequence is the
//!   exact reverse of the growth.
//! - cones over a triangulated disk (annulus / punctured-disk bases):
//!   a cone collapses by pairing each base simplex with its cone in
//!   decreasing dimension order.
//! - `grid_ball(k)`: the k x k x k Freudenthal-triangulated cube with
//!   a greedily discovered (then validated) collapsing sequence.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::collapse::{pair_from_tuples, validate, CollapsingSequence, Validation};
use crate::complex::{EmbeddedComplex, RawComplex, Scope};
use crate::error::{Error, Result};
use crate::oracle;
use crate::scx::Instance;

/// Collects simplices of all dimensions from a set of top cells,
/// assigning dense indices in lexicographic tuple order.
struct Assembler {
    vertices: Vec<(u32, [f64; 3])>,
    tuples: [BTreeSet<Vec<u32>>; 3],
}

impl Assembler {
    fn new() -> Self {
        Assembler {
            vertices: Vec::new(),
            tuples: Default::default(),
        }
    }

    fn add_vertex(&mut self, id: u32, coords: [f64; 3]) {
        self.vertices.push((id, coords));
    }

    fn add_cell(&mut self, verts: &[u32]) {
        let mut sorted = verts.to_vec();
        sorted.sort_unstable();
        let d = sorted.len() - 1;
        // insert the cell and every face of dim >= 1
        for dd in 1..=d {
            for subset in combinations(&sorted, dd + 1) {
                self.tuples[dd - 1].insert(subset);
            }
        }
    }

    fn build(self, in_k: Option<Vec<(usize, usize)>>) -> Result<EmbeddedComplex> {
        let raw = RawComplex {
            vertices: self.vertices,
            simplices: self.tuples.iter().map(|s| s.iter().cloned().collect()).collect(),
            in_k,
        };
        EmbeddedComplex::build(&raw)
    }

    /// Dense index a tuple will get (lexicographic rank).
    fn tuples_of_dim(&self, d: usize) -> &BTreeSet<Vec<u32>> {
        &self.tuples[d - 1]
    }
}

fn combinations(items: &[u32], len: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let n = items.len();
    let mut idx: Vec<usize> = (0..len).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let mut i = len;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - len {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..len {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn k_refs_from_tuples(
    complex: &EmbeddedComplex,
    k_tuples: &BTreeSet<(usize, Vec<u32>)>,
) -> Vec<(usize, usize)> {
    let mut refs = Vec::new();
    for (d, tuple) in k_tuples {
        let idx = complex
            .find(*d, tuple)
            .unwrap_or_else(|| panic!("K tuple {:?} missing from complex", tuple));
        refs.push((*d, idx as usize));
    }
    refs
}

/// Expands a set of K top-cells to the face-closed list of (dim, tuple).
fn face_closure(cells: &[Vec<u32>]) -> BTreeSet<(usize, Vec<u32>)> {
    let mut out = BTreeSet::new();
    for cell in cells {
        let mut sorted = cell.clone();
        sorted.sort_unstable();
        let d = sorted.len() - 1;
        for dd in 0..=d {
            for subset in combinations(&sorted, dd + 1) {
                out.insert((dd, subset));
            }
        }
    }
    out
}

fn apply_k_flags(complex: &mut EmbeddedComplex, k_tuples: &BTreeSet<(usize, Vec<u32>)>) {
    for d in 0..=3 {
        for f in complex.in_k[d].iter_mut() {
            *f = false;
        }
    }
    let refs = k_refs_from_tuples(complex, k_tuples);
    for (d, i) in refs {
        complex.in_k[d][i] = true;
    }
    complex.rebuild_k_index();
}

/// A stacked ball of `tets` tetrahedra, K = X. Deterministic in the
/// seed: each growth step glues onto a seeded-random exposed facet.
pub fn ball(tets: usize, seed: u64) -> Result<Instance> {
    if tets == 0 {
        return Err(Error::InvalidParams("ball needs at least one tetrahedron".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xba11);
    let mut asm = Assembler::new();
    for (i, c) in [
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ]
    .iter()
    .enumerate()
    {
        asm.add_vertex(i as u32, *c);
    }
    let mut coords: Vec<[f64; 3]> = vec![
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
    ];
    asm.add_cell(&[0, 1, 2, 3]);
    // exposed boundary facets of the growing ball
    let mut exposed: Vec<[u32; 3]> = vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    // growth log: (facet, apex)
    let mut growth: Vec<([u32; 3], u32)> = Vec::new();
    for step in 1..tets {
        let pick = rng.gen_range(0..exposed.len());
        let facet = exposed.swap_remove(pick);
        let apex = (3 + step) as u32;
        let centroid = {
            let mut c = [0.0f64; 3];
            for &v in &facet {
                for a in 0..3 {
                    c[a] += coords[v as usize][a] / 3.0;
                }
            }
            c
        };
        // nominal outward offset; coordinates are carried, not trusted
        let offset = [
            centroid[0] + 0.2 + (step as f64 * 0.013).sin() * 0.05,
            centroid[1] + 0.2,
            centroid[2] + 0.2,
        ];
        coords.push(offset);
        asm.add_vertex(apex, offset);
        asm.add_cell(&[facet[0], facet[1], facet[2], apex]);
        growth.push((facet, apex));
        exposed.push([facet[0], facet[1], apex]);
        exposed.push([facet[0], facet[2], apex]);
        exposed.push([facet[1], facet[2], apex]);
    }
    let complex = asm.build(None)?;

    let mut pairs = Vec::new();
    for (facet, apex) in growth.iter().rev() {
        let [a, b, c] = *facet;
        let s = |mut v: Vec<u32>| {
            v.push(*apex);
            v.sort_unstable();
            v
        };
        pairs.push(pair_from_tuples(&complex, &s(vec![a, b, c]), &s(vec![a, b]))?);
        pairs.push(pair_from_tuples(&complex, &s(vec![a, c]), &s(vec![a]))?);
        pairs.push(pair_from_tuples(&complex, &s(vec![b, c]), &s(vec![b]))?);
        pairs.push(pair_from_tuples(&complex, &s(vec![c]), &[*apex])?);
    }
    // base tetrahedron
    for (sigma, tau) in [
        (vec![0u32, 1, 2, 3], vec![0u32, 1, 2]),
        (vec![0, 1, 3], vec![0, 1]),
        (vec![0, 2, 3], vec![0, 2]),
        (vec![1, 2, 3], vec![1, 2]),
        (vec![0, 3], vec![0]),
        (vec![1, 3], vec![1]),
        (vec![2, 3], vec![2]),
    ] {
        pairs.push(pair_from_tuples(&complex, &sigma, &tau)?);
    }
    let sequence = CollapsingSequence { pairs };
    debug_assert!(validate(&complex, &sequence).is_ok());
    Ok(Instance { complex, sequence })
}

/// Ring-fan disk description shared by the cone generators.
struct DiskMesh {
    /// vertex ids: 0 = center, ring r sector s = 1 + (r-1)*sectors + s
    rings: usize,
    sectors: usize,
    triangles: Vec<[u32; 3]>,
}

impl DiskMesh {
    fn vid(&self, ring: usize, sector: usize) -> u32 {
        debug_assert!(ring >= 1 && ring <= self.rings);
        (1 + (ring - 1) * self.sectors + (sector % self.sectors)) as u32
    }

    fn new(rings: usize, sectors: usize) -> Self {
        let mut mesh = DiskMesh { rings, sectors, triangles: Vec::new() };
        for s in 0..sectors {
            mesh.triangles.push([0, mesh.vid(1, s), mesh.vid(1, s + 1)]);
        }
        for r in 1..rings {
            for s in 0..sectors {
                let a = mesh.vid(r, s);
                let b = mesh.vid(r, s + 1);
                let c = mesh.vid(r + 1, s);
                let d = mesh.vid(r + 1, s + 1);
                mesh.triangles.push([a, b, c]);
                mesh.triangles.push([b, c, d]);
            }
        }
        mesh
    }

    fn coords(&self, apex_id: u32) -> Vec<(u32, [f64; 3])> {
        let mut out = vec![(0u32, [0.0, 0.0, 0.0])];
        for r in 1..=self.rings {
            for s in 0..self.sectors {
                let angle = 2.0 * std::f64::consts::PI * (s as f64) / (self.sectors as f64);
                out.push((
                    self.vid(r, s),
                    [r as f64 * angle.cos(), r as f64 * angle.sin(), 0.0],
                ));
            }
        }
        out.push((apex_id, [0.0, 0.0, 1.0]));
        out
    }

    fn vertex_count(&self) -> usize {
        1 + self.rings * self.sectors
    }
}

/// Cone over a disk mesh, with the cone collapsing sequence and K
/// given as a face-closed set of base cells.
fn cone_instance(mesh: &DiskMesh, k_cells: &[Vec<u32>], verify_beta: Option<usize>) -> Result<Instance> {
    let apex = mesh.vertex_count() as u32;
    let mut asm = Assembler::new();
    for (id, c) in mesh.coords(apex) {
        asm.add_vertex(id, c);
    }
    for t in &mesh.triangles {
        asm.add_cell(&[t[0], t[1], t[2], apex]);
    }
    // keep a record of base simplices (everything not containing apex)
    let base: Vec<(usize, Vec<u32>)> = (1..=2)
        .flat_map(|d| {
            asm.tuples_of_dim(d)
                .iter()
                .filter(|t| !t.contains(&apex))
                .map(|t| (d, t.clone()))
                .collect::<Vec<_>>()
        })
        .collect();
    let complex = asm.build(None)?;

    let mut pairs = Vec::new();
    // decreasing base dimension: triangles, edges, vertices
    for d in (0..=2).rev() {
        if d == 0 {
            for v in 0..apex {
                let mut sigma = vec![v, apex];
                sigma.sort_unstable();
                pairs.push(pair_from_tuples(&complex, &sigma, &[v])?);
            }
        } else {
            for (dd, tuple) in base.iter().filter(|(dd, _)| *dd == d) {
                debug_assert_eq!(*dd, d);
                let mut sigma = tuple.clone();
                sigma.push(apex);
                sigma.sort_unstable();
                pairs.push(pair_from_tuples(&complex, &sigma, tuple)?);
            }
        }
    }
    let sequence = CollapsingSequence { pairs };
    match validate(&complex, &sequence) {
        Validation::Ok => {}
        Validation::Violation { index, reason } => {
            return Err(Error::Format(format!(
                "cone sequence invalid at {}: {}",
                index, reason
            )))
        }
    }

    let mut complex = complex;
    let k_tuples = face_closure(k_cells);
    apply_k_flags(&mut complex, &k_tuples);
    if let Some(beta) = verify_beta {
        if complex.total_simplices() <= oracle::DEFAULT_DENSE_CAP {
            let got = oracle::betti(&complex, 1, Scope::K, oracle::DEFAULT_DENSE_CAP)?;
            if got != beta {
                return Err(Error::InvalidParams(format!(
                    "generator produced beta_1(K) = {}, requested {}",
                    got, beta
                )));
            }
        }
    }
    Ok(Instance { complex, sequence })
}

/// K = an annulus (band of the base disk), X = cone over the disk.
/// beta_1(K) = 1, oracle-verified at desk scale.
pub fn annulus_in_ball(rings: usize, sectors: usize) -> Result<Instance> {
    if rings < 2 || sectors < 3 {
        return Err(Error::InvalidParams("annulus needs rings >= 2 and sectors >= 3".into()));
    }
    let mesh = DiskMesh::new(rings, sectors);
    let inner = rings / 2 + 1;
    let mut k_cells = Vec::new();
    for r in inner..rings {
        for s in 0..sectors {
            let a = mesh.vid(r, s);
            let b = mesh.vid(r, s + 1);
            let c = mesh.vid(r + 1, s);
            let d = mesh.vid(r + 1, s + 1);
            k_cells.push(vec![a, b, c]);
            k_cells.push(vec![b, c, d]);
        }
    }
    cone_instance(&mesh, &k_cells, Some(1))
}

/// K = the base disk with g punctures (stars of g spaced ring-1
/// vertices removed), X = cone over the full disk. beta_1(K) = g.
pub fn punctured_disk(g: usize, sectors: usize) -> Result<Instance> {
    if g == 0 {
        return Err(Error::InvalidParams("use annulus or a disk for beta = 0".into()));
    }
    if sectors < 3 * g {
        return Err(Error::InvalidParams(format!(
            "punctured_disk(g = {}) needs at least {} sectors",
            g,
            3 * g
        )));
    }
    // Punctures sit on ring 1 so their link circles stay interior:
    // ring-2 stars touch the outer rim through the quad diagonals and
    // the "hole" would merge with the outside.
    let rings = 3;
    let mesh = DiskMesh::new(rings, sectors);
    let punctures: BTreeSet<u32> = (0..g)
        .map(|i| mesh.vid(1, i * sectors / g))
        .collect();
    let k_cells: Vec<Vec<u32>> = mesh
        .triangles
        .iter()
        .filter(|t| t.iter().all(|v| !punctures.contains(v)))
        .map(|t| t.to_vec())
        .collect();
    cone_instance(&mesh, &k_cells, Some(g))
}

/// A disk-in-ball instance with trivial K homology: K = the base disk.
pub fn disk_in_ball(rings: usize, sectors: usize) -> Result<Instance> {
    if rings < 1 || sectors < 3 {
        return Err(Error::InvalidParams("disk needs rings >= 1 and sectors >= 3".into()));
    }
    let mesh = DiskMesh::new(rings, sectors);
    let k_cells: Vec<Vec<u32>> = mesh.triangles.iter().map(|t| t.to_vec()).collect();
    cone_instance(&mesh, &k_cells, Some(0))
}

/// The k x k x k Freudenthal-triangulated cube. K is an axis-aligned
/// rectangular loop of edges at mid-height when `beta` = 1, or the
/// full complex when `beta` = 0.
pub fn grid_ball(k: usize, beta: usize) -> Result<Instance> {
    if k == 0 {
        return Err(Error::InvalidParams("grid_ball needs k >= 1".into()));
    }
    if beta > 1 {
        return Err(Error::InvalidParams("grid_ball supports beta in {0, 1}".into()));
    }
    let n = k + 1;
    let vid = |x: usize, y: usize, z: usize| (x * n * n + y * n + z) as u32;
    let mut asm = Assembler::new();
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                asm.add_vertex(vid(x, y, z), [x as f64, y as f64, z as f64]);
            }
        }
    }
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    for x in 0..k {
        for y in 0..k {
            for z in 0..k {
                for perm in &PERMS {
                    let mut p = [x, y, z];
                    let mut cell = vec![vid(p[0], p[1], p[2])];
                    for &axis in perm {
                        p[axis] += 1;
                        cell.push(vid(p[0], p[1], p[2]));
                    }
                    asm.add_cell(&cell);
                }
            }
        }
    }
    let mut complex = asm.build(None)?;

    let sequence = crate::collapse::greedy_sequence(&complex)
        .ok_or_else(|| Error::InvalidParams("greedy collapse failed on grid_ball".into()))?;

    if beta == 1 {
        // rectangular loop of grid edges at mid-height
        let z0 = k / 2;
        let (x0, x1, y0, y1) = (0usize, k, 0usize, k);
        let mut cells: Vec<Vec<u32>> = Vec::new();
        for x in x0..x1 {
            cells.push(vec![vid(x, y0, z0), vid(x + 1, y0, z0)]);
            cells.push(vec![vid(x, y1, z0), vid(x + 1, y1, z0)]);
        }
        for y in y0..y1 {
            cells.push(vec![vid(x0, y, z0), vid(x0, y + 1, z0)]);
            cells.push(vec![vid(x1, y, z0), vid(x1, y + 1, z0)]);
        }
        let k_tuples = face_closure(&cells);
        apply_k_flags(&mut complex, &k_tuples);
    }
    Ok(Instance { complex, sequence })
}

/// Tetrahedron with K = its boundary sphere (a beta_2 = 1 subcomplex).
pub fn sphere_in_tet() -> Result<Instance> {
    let inst = ball(1, 0)?;
    let mut complex = inst.complex;
    complex.in_k = [
        vec![true; complex.count(0)],
        vec![true; complex.count(1)],
        vec![true; complex.count(2)],
        vec![false; complex.count(3)],
    ];
    complex.rebuild_k_index();
    Ok(Instance { complex, sequence: inst.sequence })
}

/// Restricted generator menu used by the CLI and test ladders.
#[derive(Debug, Clone, Copy)]
pub enum Kind {
    Ball { tets: usize },
    AnnulusInBall { rings: usize, sectors: usize },
    PuncturedDisk { g: usize, sectors: usize },
    GridBall { k: usize, beta: usize },
    DiskInBall { rings: usize, sectors: usize },
}

pub fn generate(kind: Kind, seed: u64) -> Result<Instance> {
    match kind {
        Kind::Ball { tets } => ball(tets, seed),
        Kind::AnnulusInBall { rings, sectors } => annulus_in_ball(rings, sectors),
        Kind::PuncturedDisk { g, sectors } => punctured_disk(g, sectors),
        Kind::GridBall { k, beta } => grid_ball(k, beta),
        Kind::DiskInBall { rings, sectors } => disk_in_ball(rings, sectors),
    }
}

/// Seeded menu of small mixed-beta instances for test sweeps.
pub fn desk_suite(seed: u64) -> Vec<(String, Instance)> {
    let mut out = Vec::new();
    let s = seed;
    out.push(("ball6".into(), ball(6, s).unwrap()));
    out.push(("disk".into(), disk_in_ball(3, 8).unwrap()));
    out.push(("annulus".into(), annulus_in_ball(4, 8).unwrap()));
    out.push(("punct2".into(), punctured_disk(2, 8).unwrap()));
    out.push(("punct3".into(), punctured_disk(3, 9).unwrap()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::DEFAULT_DENSE_CAP;

    #[test]
    fn smallest_ball_is_a_tetrahedron() {
        let inst = ball(1, 42).unwrap();
        assert_eq!(inst.complex.total_simplices(), 15);
        assert_eq!(inst.sequence.pairs.len(), 7);
        assert!(validate(&inst.complex, &inst.sequence).is_ok());
    }

    #[test]
    fn stacked_ball_sequence_validates() {
        for seed in [1u64, 7, 23] {
            let inst = ball(12, seed).unwrap();
            assert_eq!(inst.complex.count(3), 12);
            assert!(validate(&inst.complex, &inst.sequence).is_ok());
            assert_eq!(
                oracle::betti(&inst.complex, 1, Scope::X, DEFAULT_DENSE_CAP).unwrap(),
                0
            );
        }
    }

    #[test]
    fn annulus_beta_one() {
        let inst = annulus_in_ball(4, 8).unwrap();
        assert_eq!(
            oracle::betti(&inst.complex, 1, Scope::K, DEFAULT_DENSE_CAP).unwrap(),
            1
        );
        assert!(validate(&inst.complex, &inst.sequence).is_ok());
    }

    #[test]
    fn punctured_disk_betas() {
        for g in 1..=3 {
            let inst = punctured_disk(g, 9).unwrap();
            assert_eq!(
                oracle::betti(&inst.complex, 1, Scope::K, DEFAULT_DENSE_CAP).unwrap(),
                g
            );
        }
    }

    #[test]
    fn grid_ball_collapses_and_counts() {
        for k in 1..=3 {
            let inst = grid_ball(k, 0).unwrap();
            assert_eq!(inst.complex.count(3), 6 * k * k * k);
            assert!(validate(&inst.complex, &inst.sequence).is_ok());
        }
    }

    #[test]
    fn grid_ball_loop_has_beta_one() {
        let inst = grid_ball(2, 1).unwrap();
        assert_eq!(
            oracle::betti(&inst.complex, 1, Scope::K, DEFAULT_DENSE_CAP).unwrap(),
            1
        );
    }
}
