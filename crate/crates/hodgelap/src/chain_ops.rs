//! The Include, Fill and Squeeze operators and the cohomology-basis
//! operator C(X, K), all matrix-free with exact transposes.
//!
//! Fill is compiled once from the normalized collapsing sequence into
//! a straight-line plan (one coefficient assignment per triangle-edge
//! pair); applications and transposes are single sweeps. Squeeze is a
//! sweep over the opened triangles of T in squeeze order; signs come
//! from the d3 incidence so that boundary invariance is exact at every
//! intermediate step.

use crate::collapse::{is_normalized, split_parts, CollapsingSequence, PairKind};
use crate::complex::{BoundaryOp, Chain, EmbeddedComplex, Scope};
use crate::embedding::TComplex;
use crate::error::{Error, Result};
use crate::linop::{operator_norm_est, LinOp};

/// Zero-extension C_1(K) -> C_1(X); the transpose restricts.
pub struct IncludeOp {
    pub k_edges: Vec<u32>,
    pub n1_x: usize,
}

impl IncludeOp {
    pub fn new(complex: &EmbeddedComplex) -> Self {
        IncludeOp {
            k_edges: complex.k_scope(1).to_global.clone(),
            n1_x: complex.count(1),
        }
    }

    pub fn include(&self, x: &Chain) -> Result<Chain> {
        x.expect(1, Scope::K, self.k_edges.len())?;
        let mut out = Chain::zeros(1, Scope::X, self.n1_x);
        self.apply(&x.values, &mut out.values);
        Ok(out)
    }

    pub fn restrict(&self, x: &Chain) -> Result<Chain> {
        x.expect(1, Scope::X, self.n1_x)?;
        let mut out = Chain::zeros(1, Scope::K, self.k_edges.len());
        self.apply_transpose(&x.values, &mut out.values);
        Ok(out)
    }
}

impl LinOp for IncludeOp {
    fn rows(&self) -> usize {
        self.n1_x
    }
    fn cols(&self) -> usize {
        self.k_edges.len()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (local, &g) in self.k_edges.iter().enumerate() {
            out[g as usize] = x[local];
        }
    }
    fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        for (local, &g) in self.k_edges.iter().enumerate() {
            out[local] = x[g as usize];
        }
    }
}

/// One Fill assignment: x[tri] = (gamma[edge] - sum sign * x[t]) / s.
struct FillStep {
    tri: u32,
    edge: u32,
    /// divisor: the d2 sign of (tri, edge), always +-1
    s: f64,
    /// earlier-assigned triangles incident to the edge, with signs
    stencil: Vec<(u32, f64)>,
}

/// Precompiled Fill operator F(X): maps 1-chains of X to 2-chains of
/// X; for 1-cycles gamma, d2 * fill(gamma) = gamma exactly. Triangles
/// of tetrahedron-triangle pairs carry coefficient zero.
pub struct FillPlan {
    steps: Vec<FillStep>,
    n1: usize,
    n2: usize,
}

impl FillPlan {
    /// Builds the plan from a normalized sequence. The value of each
    /// pair's triangle is determined by the pair's edge value and the
    /// values of triangles removed earlier.
    pub fn new(complex: &EmbeddedComplex, seq: &CollapsingSequence) -> Result<Self> {
        if let Some(pos) = check_normalized_pos(seq) {
            return Err(Error::SequenceNotNormalized(pos));
        }
        let parts = split_parts(seq);
        let d2 = complex.boundary(2, Scope::X)?;

        // cofaces of each edge with signs
        let mut edge_cofaces: Vec<Vec<(u32, f64)>> = vec![Vec::new(); complex.count(1)];
        for t in 0..complex.count(2) {
            for &(e, s) in d2.column(t) {
                edge_cofaces[e as usize].push((t as u32, s as f64));
            }
        }
        // triangles assigned by earlier steps (tet-tri triangles stay
        // zero and are skipped from stencils)
        let mut assigned = vec![false; complex.count(2)];
        let mut removed = vec![false; complex.count(2)];
        for p in &parts.tet_tri {
            removed[p.tau.1] = true;
        }
        let mut steps = Vec::with_capacity(parts.tri_edge.len());
        for pair in &parts.tri_edge {
            let tri = pair.sigma.1;
            let edge = pair.tau.1;
            let mut s = 0.0;
            let mut stencil = Vec::new();
            for &(t, sg) in &edge_cofaces[edge] {
                if t as usize == tri {
                    s = sg;
                } else if assigned[t as usize] {
                    stencil.push((t, sg));
                } else if !removed[t as usize] {
                    // a living other coface contradicts freeness
                    return Err(Error::SequenceNotNormalized(tri));
                }
            }
            if s == 0.0 {
                return Err(Error::Format(format!(
                    "pair triangle {} does not contain edge {}",
                    tri, edge
                )));
            }
            assigned[tri] = true;
            removed[tri] = true;
            steps.push(FillStep {
                tri: tri as u32,
                edge: edge as u32,
                s,
                stencil,
            });
        }
        Ok(FillPlan {
            steps,
            n1: complex.count(1),
            n2: complex.count(2),
        })
    }

    pub fn fill(&self, gamma: &Chain) -> Result<Chain> {
        gamma.expect(1, Scope::X, self.n1)?;
        let mut out = Chain::zeros(2, Scope::X, self.n2);
        self.apply(&gamma.values, &mut out.values);
        Ok(out)
    }

    pub fn fill_transpose(&self, w: &Chain) -> Result<Chain> {
        w.expect(2, Scope::X, self.n2)?;
        let mut out = Chain::zeros(1, Scope::X, self.n1);
        self.apply_transpose(&w.values, &mut out.values);
        Ok(out)
    }
}

impl LinOp for FillPlan {
    fn rows(&self) -> usize {
        self.n2
    }
    fn cols(&self) -> usize {
        self.n1
    }
    fn apply(&self, gamma: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for step in &self.steps {
            let mut acc = gamma[step.edge as usize];
            for &(t, sg) in &step.stencil {
                acc -= sg * out[t as usize];
            }
            out[step.tri as usize] = acc / step.s;
        }
    }
    fn apply_transpose(&self, w: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mut adj = w.to_vec();
        for step in self.steps.iter().rev() {
            let v = adj[step.tri as usize] / step.s;
            out[step.edge as usize] += v;
            for &(t, sg) in &step.stencil {
                adj[t as usize] -= sg * v;
            }
        }
    }
}

fn check_normalized_pos(seq: &CollapsingSequence) -> Option<usize> {
    if is_normalized(seq) {
        return None;
    }
    let mut seen_other = false;
    for (i, p) in seq.pairs.iter().enumerate() {
        match p.kind() {
            PairKind::TetTri if seen_other => return Some(i),
            PairKind::TetTri => {}
            _ => seen_other = true,
        }
    }
    None
}

/// One Squeeze elimination: x <- x - (x[tri]/s) * d3-column(tet).
struct SqueezeStep {
    tri: u32,
    /// d3 column of the paired tetrahedron: (triangle, sign)
    column: Vec<(u32, f64)>,
    /// sign of tri within the column
    s: f64,
}

/// The Squeeze operator S(X, T): maps 2-chains of X to 2-chains of T
/// with the same boundary, eliminating opened triangles in squeeze
/// order through their paired tetrahedra.
pub struct SqueezePlan {
    steps: Vec<SqueezeStep>,
    tri_to_global: Vec<u32>,
    n2_x: usize,
}

impl SqueezePlan {
    pub fn new(complex: &EmbeddedComplex, t: &TComplex) -> Result<Self> {
        let order = crate::embedding::squeeze_order(complex, t)?;
        let mut steps = Vec::with_capacity(order.len());
        for (i, &(tri, tet)) in order.iter().enumerate() {
            let column: Vec<(u32, f64)> = complex
                .faces_of(3, tet as usize)
                .into_iter()
                .map(|(f, s)| (f, s as f64))
                .collect();
            let s = column
                .iter()
                .find(|&&(f, _)| f == tri)
                .map(|&(_, s)| s)
                .ok_or(Error::OrderInfeasible(i))?;
            steps.push(SqueezeStep { tri, column, s });
        }
        Ok(SqueezePlan {
            steps,
            tri_to_global: t.tri.to_global.clone(),
            n2_x: complex.count(2),
        })
    }

    pub fn n2_t(&self) -> usize {
        self.tri_to_global.len()
    }

    pub fn squeeze(&self, x: &Chain) -> Result<Chain> {
        x.expect(2, Scope::X, self.n2_x)?;
        let mut out = Chain::zeros(2, Scope::T, self.n2_t());
        self.apply(&x.values, &mut out.values);
        Ok(out)
    }

    pub fn squeeze_transpose(&self, x: &Chain) -> Result<Chain> {
        x.expect(2, Scope::T, self.n2_t())?;
        let mut out = Chain::zeros(2, Scope::X, self.n2_x);
        self.apply_transpose(&x.values, &mut out.values);
        Ok(out)
    }

    /// The X-indexed elimination sweep without the final restriction.
    pub fn sweep_x(&self, x: &mut [f64]) {
        for step in &self.steps {
            let v = x[step.tri as usize] / step.s;
            if v == 0.0 {
                continue;
            }
            for &(f, s) in &step.column {
                x[f as usize] -= s * v;
            }
        }
    }
}

impl LinOp for SqueezePlan {
    fn rows(&self) -> usize {
        self.n2_t()
    }
    fn cols(&self) -> usize {
        self.n2_x
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let mut work = x.to_vec();
        self.sweep_x(&mut work);
        for (local, &g) in self.tri_to_global.iter().enumerate() {
            out[local] = work[g as usize];
        }
    }
    fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (local, &g) in self.tri_to_global.iter().enumerate() {
            out[g as usize] = x[local];
        }
        for step in self.steps.iter().rev() {
            let mut acc = 0.0;
            for &(f, s) in &step.column {
                acc += s * out[f as usize];
            }
            out[step.tri as usize] -= acc / step.s;
        }
    }
}

/// Projection of C_2(T) onto the span of T\K triangles (zeroes the
/// K coordinates), used inside the operator C.
pub struct TMinusKProjection {
    pub tri_in_k: Vec<bool>,
}

impl LinOp for TMinusKProjection {
    fn rows(&self) -> usize {
        self.tri_in_k.len()
    }
    fn cols(&self) -> usize {
        self.tri_in_k.len()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, &k) in self.tri_in_k.iter().enumerate() {
            out[i] = if k { 0.0 } else { x[i] };
        }
    }
    fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        self.apply(x, out);
    }
}

/// The cohomology-basis operator
/// C(X,K) = N^T F^T S^T Pi_{C2(T) perp} S F N on 1-chains of K.
pub struct CohomologyOp {
    pub include: IncludeOp,
    pub fill: FillPlan,
    pub squeeze: SqueezePlan,
    pub proj: TMinusKProjection,
}

impl CohomologyOp {
    pub fn new(
        complex: &EmbeddedComplex,
        seq: &CollapsingSequence,
        t: &TComplex,
    ) -> Result<Self> {
        Ok(CohomologyOp {
            include: IncludeOp::new(complex),
            fill: FillPlan::new(complex, seq)?,
            squeeze: SqueezePlan::new(complex, t)?,
            proj: TMinusKProjection {
                tri_in_k: t.tri_in_k.clone(),
            },
        })
    }

    pub fn apply_chain(&self, gamma: &Chain) -> Result<Chain> {
        gamma.expect(1, Scope::K, self.include.cols())?;
        let mut out = Chain::zeros(1, Scope::K, self.include.cols());
        self.apply(&gamma.values, &mut out.values);
        Ok(out)
    }
}

impl LinOp for CohomologyOp {
    fn rows(&self) -> usize {
        self.include.cols()
    }
    fn cols(&self) -> usize {
        self.include.cols()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let nx = self.include.apply_vec(x);
        let fx = self.fill.apply_vec(&nx);
        let sx = self.squeeze.apply_vec(&fx);
        let px = self.proj.apply_vec(&sx);
        let st = self.squeeze.apply_transpose_vec(&px);
        let ft = self.fill.apply_transpose_vec(&st);
        self.include.apply_transpose(&ft, out);
    }
    fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        // C is symmetric by construction (A^T P A with P symmetric)
        self.apply(x, out);
    }
}

/// Norm estimates vs the closed-form bounds: ||S|| <= 2 n2,
/// ||F|| <= 2 (n1+1) n2 / sqrt(lambda_min(L1up[X])), and
/// ||C|| <= alpha n1^2 n2^4 / lambda_min with alpha derived from
/// composing the S and F bounds.
#[derive(Debug, Clone, serde::Serialize)]
pub struct NormEstimates {
    pub squeeze_est: f64,
    pub squeeze_bound: f64,
    pub fill_est: f64,
    pub fill_bound: f64,
    pub c_est: f64,
    pub c_bound: f64,
    pub lambda_min_x_up: f64,
    pub all_within_bounds: bool,
}

/// Effective constant for the C bound: composing ||F||^2 ||S||^2 gives
/// 16 (n1+1)^2 n2^4 / lambda <= alpha n1^2 n2^4 / lambda with
/// alpha = 64 for n1 >= 1.
pub const ALPHA_C: f64 = 64.0;

pub fn norm_estimates(
    complex: &EmbeddedComplex,
    ops: &CohomologyOp,
    lambda_min_x_up: f64,
) -> NormEstimates {
    let n1 = complex.count(1) as f64;
    let n2 = complex.count(2) as f64;
    let squeeze_est = operator_norm_est(&ops.squeeze, 200);
    let squeeze_bound = 2.0 * n2;
    let fill_est = operator_norm_est(&ops.fill, 200);
    let fill_bound = if lambda_min_x_up > 0.0 {
        2.0 * (n1 + 1.0) * n2 / lambda_min_x_up.sqrt()
    } else {
        f64::INFINITY
    };
    let c_est = operator_norm_est(ops, 200);
    let c_bound = if lambda_min_x_up > 0.0 {
        ALPHA_C * n1 * n1 * n2.powi(4) / lambda_min_x_up
    } else {
        f64::INFINITY
    };
    let all_within_bounds =
        squeeze_est <= squeeze_bound && fill_est <= fill_bound && c_est <= c_bound;
    NormEstimates {
        squeeze_est,
        squeeze_bound,
        fill_est,
        fill_bound,
        c_est,
        c_bound,
        lambda_min_x_up,
        all_within_bounds,
    }
}

/// The U operator of the up-Laplacian solver:
/// restrict_K . squeeze . fill . include, so that d2[K] U y = y for
/// every y in im(d2[K]).
pub struct UOp {
    pub include: IncludeOp,
    pub fill: FillPlan,
    pub squeeze: SqueezePlan,
    /// K-triangle positions in T-local indexing
    pub k_tri_in_t: Vec<u32>,
}

impl UOp {
    pub fn new(
        complex: &EmbeddedComplex,
        seq: &CollapsingSequence,
        t: &TComplex,
    ) -> Result<Self> {
        let mut k_tri_in_t = Vec::with_capacity(complex.k_scope(2).len());
        for &g in &complex.k_scope(2).to_global {
            let local = t.tri.from_global[g as usize];
            if local < 0 {
                return Err(Error::OrderMismatch(format!(
                    "K triangle {} was opened out of T",
                    g
                )));
            }
            k_tri_in_t.push(local as u32);
        }
        Ok(UOp {
            include: IncludeOp::new(complex),
            fill: FillPlan::new(complex, seq)?,
            squeeze: SqueezePlan::new(complex, t)?,
            k_tri_in_t,
        })
    }
}

impl LinOp for UOp {
    fn rows(&self) -> usize {
        self.k_tri_in_t.len()
    }
    fn cols(&self) -> usize {
        self.include.cols()
    }
    fn apply(&self, y: &[f64], out: &mut [f64]) {
        let nx = self.include.apply_vec(y);
        let fx = self.fill.apply_vec(&nx);
        let sx = self.squeeze.apply_vec(&fx);
        for (k, &tl) in self.k_tri_in_t.iter().enumerate() {
            out[k] = sx[tl as usize];
        }
    }
    fn apply_transpose(&self, w: &[f64], out: &mut [f64]) {
        let mut t_chain = vec![0.0; self.squeeze.n2_t()];
        for (k, &tl) in self.k_tri_in_t.iter().enumerate() {
            t_chain[tl as usize] = w[k];
        }
        let st = self.squeeze.apply_transpose_vec(&t_chain);
        let ft = self.fill.apply_transpose_vec(&st);
        self.include.apply_transpose(&ft, out);
    }
}

/// Prepared boundary operator d2 on scope K as a LinOp.
pub struct BoundaryLinOp(pub BoundaryOp);

impl LinOp for BoundaryLinOp {
    fn rows(&self) -> usize {
        self.0.rows
    }
    fn cols(&self) -> usize {
        self.0.cols
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.0.apply_raw(x, out);
    }
    fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        self.0.apply_transpose_raw(x, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collapse::normalize;
    use crate::embedding::build_t;
    use crate::generate;
    use crate::oracle::DEFAULT_DENSE_CAP;

    fn tet_instance() -> (EmbeddedComplex, CollapsingSequence) {
        let inst = generate::ball(1, 0).unwrap();
        let seq = normalize(&inst.complex, &inst.sequence).unwrap();
        (inst.complex, seq)
    }

    #[test]
    fn include_is_isometric_zero_extension() {
        let inst = generate::annulus_in_ball(3, 6).unwrap();
        let inc = IncludeOp::new(&inst.complex);
        let mut x = Chain::zeros(1, Scope::K, inc.cols());
        for (i, v) in x.values.iter_mut().enumerate() {
            *v = (i % 5) as f64 - 2.0;
        }
        let ext = inc.include(&x).unwrap();
        assert!((ext.norm() - x.norm()).abs() < 1e-15);
        let back = inc.restrict(&ext).unwrap();
        assert_eq!(back.values, x.values);
    }

    #[test]
    fn fill_solves_boundary_for_triangle_cycles() {
        let (complex, seq) = tet_instance();
        let plan = FillPlan::new(&complex, &seq).unwrap();
        let d2 = complex.boundary(2, Scope::X).unwrap();
        for t in 0..complex.count(2) {
            let mut w = Chain::zeros(2, Scope::X, complex.count(2));
            w.values[t] = 1.0;
            let gamma = d2.apply(&w).unwrap();
            let x = plan.fill(&gamma).unwrap();
            let back = d2.apply(&x).unwrap();
            assert_eq!(back.values, gamma.values, "exact boundary for triangle {}", t);
        }
    }

    #[test]
    fn fill_of_zero_is_zero() {
        let (complex, seq) = tet_instance();
        let plan = FillPlan::new(&complex, &seq).unwrap();
        let x = plan
            .fill(&Chain::zeros(1, Scope::X, complex.count(1)))
            .unwrap();
        assert!(x.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fill_ignores_spanning_tree_edges() {
        // fill(y) == fill(y - y_T): only triangle-edge pair edges matter
        let (complex, seq) = tet_instance();
        let plan = FillPlan::new(&complex, &seq).unwrap();
        let parts = split_parts(&seq);
        let mut y = Chain::zeros(1, Scope::X, complex.count(1));
        for (i, v) in y.values.iter_mut().enumerate() {
            *v = (i as f64) - 2.0;
        }
        let fy = plan.fill(&y).unwrap();
        // zero out the edge-vertex (spanning tree) edges
        let mut y2 = y.clone();
        for p in &parts.edge_vertex {
            y2.values[p.sigma.1] = 0.0;
        }
        let fy2 = plan.fill(&y2).unwrap();
        assert_eq!(fy.values, fy2.values);
    }

    #[test]
    fn fill_transpose_is_adjoint() {
        let (complex, seq) = tet_instance();
        let plan = FillPlan::new(&complex, &seq).unwrap();
        let n1 = complex.count(1);
        let n2 = complex.count(2);
        let g: Vec<f64> = (0..n1).map(|i| (i as f64 * 0.7).sin()).collect();
        let w: Vec<f64> = (0..n2).map(|i| (i as f64 * 1.3).cos()).collect();
        let lhs: f64 = plan.apply_vec(&g).iter().zip(&w).map(|(a, b)| a * b).sum();
        let rhs: f64 = g
            .iter()
            .zip(plan.apply_transpose_vec(&w).iter())
            .map(|(a, b)| a * b)
            .sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn squeeze_preserves_boundary_exactly() {
        // X = tetrahedron, K = one edge: T = X minus one facet
        let inst = generate::ball(1, 0).unwrap();
        let mut complex = inst.complex;
        complex.in_k = [
            vec![false; complex.count(0)],
            vec![false; complex.count(1)],
            vec![false; complex.count(2)],
            vec![false; complex.count(3)],
        ];
        complex.in_k[1][0] = true;
        for (v, _) in complex.faces_of(1, 0) {
            complex.in_k[0][v as usize] = true;
        }
        complex.rebuild_k_index();
        let t = build_t(&complex, DEFAULT_DENSE_CAP).unwrap();
        let plan = SqueezePlan::new(&complex, &t).unwrap();
        let d2 = complex.boundary(2, Scope::X).unwrap();

        let opened = t.order[0].0 as usize;
        let mut x = Chain::zeros(2, Scope::X, complex.count(2));
        x.values[opened] = 1.0;
        let xt = plan.squeeze(&x).unwrap();
        // +-1 on the other three facets
        assert!(xt.values.iter().all(|&v| v.abs() == 1.0));
        // boundaries equal: d2[T] x' = d2[X] x
        let bx = d2.apply(&x).unwrap();
        let mut xt_in_x = vec![0.0; complex.count(2)];
        for (local, &g) in plan.tri_to_global.iter().enumerate() {
            xt_in_x[g as usize] = xt.values[local];
        }
        let bxt = d2
            .apply(&Chain::from_values(2, Scope::X, xt_in_x))
            .unwrap();
        assert_eq!(bx.values, bxt.values);
    }

    #[test]
    fn squeeze_identity_on_t_supported_chains() {
        let inst = generate::annulus_in_ball(3, 6).unwrap();
        let t = build_t(&inst.complex, DEFAULT_DENSE_CAP).unwrap();
        let plan = SqueezePlan::new(&inst.complex, &t).unwrap();
        let mut x = Chain::zeros(2, Scope::X, inst.complex.count(2));
        // supported on T: pick a T triangle
        let g = t.tri.to_global[0] as usize;
        x.values[g] = 3.5;
        let xt = plan.squeeze(&x).unwrap();
        let local = t.tri.from_global[g] as usize;
        assert_eq!(xt.values[local], 3.5);
        assert_eq!(xt.values.iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn squeeze_transpose_is_adjoint() {
        let inst = generate::annulus_in_ball(3, 6).unwrap();
        let t = build_t(&inst.complex, DEFAULT_DENSE_CAP).unwrap();
        let plan = SqueezePlan::new(&inst.complex, &t).unwrap();
        let nx = inst.complex.count(2);
        let nt = plan.n2_t();
        let x: Vec<f64> = (0..nx).map(|i| ((i * 13 + 5) % 7) as f64 - 3.0).collect();
        let y: Vec<f64> = (0..nt).map(|i| ((i * 11 + 2) % 5) as f64 - 2.0).collect();
        let lhs: f64 = plan.apply_vec(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x
            .iter()
            .zip(plan.apply_transpose_vec(&y).iter())
            .map(|(a, b)| a * b)
            .sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn u_inverts_boundary_on_image_exactly() {
        for inst in [
            generate::annulus_in_ball(3, 6).unwrap(),
            generate::punctured_disk(2, 8).unwrap(),
            generate::sphere_in_tet().unwrap(),
        ] {
            let seq = normalize(&inst.complex, &inst.sequence).unwrap();
            let t = build_t(&inst.complex, DEFAULT_DENSE_CAP).unwrap();
            let u = UOp::new(&inst.complex, &seq, &t).unwrap();
            let d2k = inst.complex.boundary(2, Scope::K).unwrap();
            let n2k = inst.complex.k_scope(2).len();
            for trial in 0..3 {
                let w: Vec<f64> = (0..n2k)
                    .map(|i| (((i + trial) * 17 + 3) % 9) as f64 - 4.0)
                    .collect();
                let mut y = vec![0.0; inst.complex.k_scope(1).len()];
                d2k.apply_raw(&w, &mut y);
                let x = u.apply_vec(&y);
                let mut back = vec![0.0; y.len()];
                d2k.apply_raw(&x, &mut back);
                assert_eq!(back, y, "d2 U y = y exactly");
            }
        }
    }

    #[test]
    fn norm_estimates_respect_bounds() {
        let inst = generate::ball(1, 0).unwrap();
        let seq = normalize(&inst.complex, &inst.sequence).unwrap();
        let t = build_t(&inst.complex, DEFAULT_DENSE_CAP).unwrap();
        let ops = CohomologyOp::new(&inst.complex, &seq, &t).unwrap();
        // single tetrahedron: lambda_min(L1up[X]) = 2 by dense check
        let d2 = oracle::boundary_matrix(&inst.complex.boundary(2, Scope::X).unwrap());
        let up = &d2 * d2.transpose();
        let (_, lmin) = oracle::psd_spectrum_extremes(&up);
        let est = norm_estimates(&inst.complex, &ops, lmin);
        assert!(est.all_within_bounds, "{:?}", est);
        assert!(est.squeeze_est <= 8.0 + 1e-9);
    }

    use crate::oracle;
}
