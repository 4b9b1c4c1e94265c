//! Graph-Laplacian primitives: the SDD solve handle (preconditioned
//! conjugate gradient with an exact spanning-tree preconditioner), a
//! fixed-degree Chebyshev approximate inverse, the tree operator P_T,
//! the approximate coboundary/cycle projections and the down-Laplacian
//! solver.
//!
//! The projection and solver operators are fixed polynomials in the
//! (preconditioned) Laplacian, so each materializes to an exactly
//! symmetric matrix and carries a one-sided Loewner guarantee
//! (1 - eps) Pi <= ~Pi <= Pi derived from the Chebyshev error bound
//! on an interval containing the nonzero spectrum, after rescaling by
//! the upper interval constant.

use crate::error::{Error, Result};
use crate::graphs::{Graph, SpanningTree};
use crate::linop::LinOp;

/// Handle for solves against L0 = d1 d1^T of one scope. Solves are
/// restricted to im(L0); the residual contract ||L0 x - b|| <=
/// tol ||b|| is enforced and SolveDiverged raised past max_iters.
#[derive(Clone)]
pub struct SddSolveHandle<'g> {
    pub graph: &'g Graph,
    pub tree: &'g SpanningTree,
    pub tol: f64,
    pub max_iters: usize,
}

impl<'g> SddSolveHandle<'g> {
    /// Tree-preconditioned CG on the deflated system.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.graph.n_vertices;
        let mut b = b.to_vec();
        self.graph
            .deflate_kernel(&self.tree.comp, self.tree.n_comp, &mut b);
        let bnorm = norm(&b);
        let mut x = vec![0.0; n];
        if bnorm == 0.0 {
            return Ok(x);
        }
        let mut r = b.clone();
        let mut z = vec![0.0; n];
        self.tree.laplacian_solve(self.graph, &r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];
        for _ in 0..self.max_iters {
            self.graph.laplacian_apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            axpy(&mut x, alpha, &p);
            axpy(&mut r, -alpha, &ap);
            if norm(&r) <= self.tol * bnorm {
                self.graph
                    .deflate_kernel(&self.tree.comp, self.tree.n_comp, &mut x);
                return Ok(x);
            }
            self.tree.laplacian_solve(self.graph, &r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::SolveDiverged(format!(
            "pcg residual {:.3e} above {:.3e} after {} iterations",
            norm(&r) / bnorm,
            self.tol,
            self.max_iters
        )))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Whether the Chebyshev solve runs on the raw Laplacian or on the
/// spanning-tree-preconditioned pencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChebKind {
    Plain,
    TreePreconditioned,
}

/// Fixed-degree Chebyshev approximation of L0^+ on an interval
/// [lo, hi] containing the nonzero (pencil) spectrum: a symmetric
/// linear operator S with (1-eps_s) L0^+ <= S <= (1+eps_s) L0^+ on
/// im(L0), where eps_s = 1/T_k((hi+lo)/(hi-lo)).
pub struct ChebInverse<'g> {
    pub graph: &'g Graph,
    pub tree: &'g SpanningTree,
    pub kind: ChebKind,
    pub lo: f64,
    pub hi: f64,
    pub degree: usize,
    /// realized spectral error bound 1/T_k(sigma)
    pub eps_realized: f64,
}

impl<'g> ChebInverse<'g> {
    pub fn with_target(
        graph: &'g Graph,
        tree: &'g SpanningTree,
        kind: ChebKind,
        lo: f64,
        hi: f64,
        eps_target: f64,
        max_degree: usize,
    ) -> Result<Self> {
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::SolveDiverged(format!(
                "bad chebyshev interval [{:.3e}, {:.3e}]",
                lo, hi
            )));
        }
        let sigma = (hi + lo) / (hi - lo).max(1e-300);
        let degree = if hi == lo {
            1
        } else {
            let target = (1.0 / eps_target).max(1.0);
            ((target + (target * target - 1.0).max(0.0).sqrt()).ln()
                / (sigma + (sigma * sigma - 1.0).sqrt()).ln())
            .ceil() as usize
                + 1
        };
        if degree > max_degree {
            return Err(Error::SolveDiverged(format!(
                "chebyshev degree {} exceeds max_iters {}",
                degree, max_degree
            )));
        }
        let eps_realized = if hi == lo {
            0.0
        } else {
            1.0 / cosh_chebyshev(degree, sigma)
        };
        Ok(ChebInverse {
            graph,
            tree,
            kind,
            lo,
            hi,
            degree,
            eps_realized,
        })
    }

    fn precond(&self, r: &[f64], z: &mut [f64]) {
        match self.kind {
            ChebKind::Plain => z.copy_from_slice(r),
            ChebKind::TreePreconditioned => self.tree.laplacian_solve(self.graph, r, z),
        }
    }

    /// x_k = p_k(M^+ L0) M^+ b via the three-term recurrence on the
    /// scaled Chebyshev residual polynomials.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.graph.n_vertices;
        let mut b = b.to_vec();
        self.graph
            .deflate_kernel(&self.tree.comp, self.tree.n_comp, &mut b);
        let d = (self.hi + self.lo) / 2.0;
        let c = (self.hi - self.lo) / 2.0;
        if c == 0.0 {
            // single-point spectrum: exact inverse is 1/d
            let mut z = vec![0.0; n];
            self.precond(&b, &mut z);
            for v in z.iter_mut() {
                *v /= d;
            }
            return z;
        }
        let sigma = d / c;
        let mut z = vec![0.0; n];
        let mut work = vec![0.0; n];

        // x_1 = z_0 / d
        let mut r = b.clone();
        self.precond(&r, &mut z);
        let mut x_prev = vec![0.0; n]; // x_0
        let mut x: Vec<f64> = z.iter().map(|&v| v / d).collect(); // x_1
        let mut tau_prev = 1.0f64; // T_0(sigma)
        let mut tau = sigma; // T_1(sigma)
        for _ in 1..self.degree {
            // r = b - L0 x, z = M^+ r
            self.graph.laplacian_apply(&x, &mut work);
            for i in 0..n {
                r[i] = b[i] - work[i];
            }
            self.precond(&r, &mut z);
            let tau_next = 2.0 * sigma * tau - tau_prev;
            // x_{k+1} = [ (2 tau_k / c)(d x_k + z_k) - tau_{k-1} x_{k-1} ] / tau_{k+1}
            let a = 2.0 * tau / c;
            for i in 0..n {
                let xn = (a * (d * x[i] + z[i]) - tau_prev * x_prev[i]) / tau_next;
                x_prev[i] = x[i];
                x[i] = xn;
            }
            tau_prev = tau;
            tau = tau_next;
        }
        self.graph
            .deflate_kernel(&self.tree.comp, self.tree.n_comp, &mut x);
        x
    }
}

fn cosh_chebyshev(k: usize, sigma: f64) -> f64 {
    // T_k(sigma) for sigma >= 1
    (k as f64 * (sigma + (sigma * sigma - 1.0).sqrt()).ln()).cosh()
}

/// Spectral interval estimation for a graph Laplacian and its
/// spanning-tree pencil.
pub struct GraphSpectrum {
    /// Gershgorin upper bound on lambda_max(L0) (guaranteed).
    pub l0_upper: f64,
    /// Inverse-iteration estimate of the smallest nonzero eigenvalue.
    pub l0_lambda_min: f64,
    /// Power-iteration upper estimate (x2 inflated) for the pencil
    /// (L0, L_tree); the lower pencil edge is exactly 1.
    pub pencil_upper: f64,
}

fn seeded_vector(n: usize, salt: u64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let h = (i as u64)
                .wrapping_mul(0x9e3779b97f4a7c15)
                .wrapping_add(salt)
                .wrapping_mul(0xbf58476d1ce4e5b9);
            ((h >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
        .collect()
}

pub fn estimate_spectrum(graph: &Graph, tree: &SpanningTree) -> Result<GraphSpectrum> {
    let n = graph.n_vertices;
    let l0_upper = graph.laplacian_max_eig_bound().max(1e-12);
    if n == 0 || graph.n_edges() == 0 {
        return Ok(GraphSpectrum {
            l0_upper: 1.0,
            l0_lambda_min: 1.0,
            pencil_upper: 1.0,
        });
    }

    // pencil upper: power iteration on M^+ L0 with Rayleigh quotient
    // <v, L0 v> / <v, M v>
    let mut v = seeded_vector(n, 7);
    graph.deflate_kernel(&tree.comp, tree.n_comp, &mut v);
    let mut lap = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut pencil = 1.0f64;
    for _ in 0..120 {
        graph.laplacian_apply(&v, &mut lap);
        tree.laplacian_solve(graph, &lap, &mut z);
        let num = dot(&v, &lap);
        tree.laplacian_apply(graph, &v, &mut lap);
        let den = dot(&v, &lap).max(1e-300);
        let rho = num / den;
        if rho > 0.0 && (rho - pencil).abs() <= 1e-4 * pencil {
            pencil = rho;
            break;
        }
        pencil = rho.max(pencil);
        let nz = norm(&z);
        if nz == 0.0 {
            break;
        }
        for i in 0..n {
            v[i] = z[i] / nz;
        }
    }
    let pencil_upper = (2.0 * pencil).max(1.0);

    // lambda_min(L0) by inverse iteration with kernel deflation
    let handle = SddSolveHandle {
        graph,
        tree,
        tol: 1e-10,
        max_iters: 4 * n + 200,
    };
    let mut w = seeded_vector(n, 23);
    graph.deflate_kernel(&tree.comp, tree.n_comp, &mut w);
    let mut lambda_min = l0_upper;
    for it in 0..60 {
        let nw = norm(&w);
        if nw == 0.0 {
            break;
        }
        for x in w.iter_mut() {
            *x /= nw;
        }
        graph.laplacian_apply(&w, &mut lap);
        let rho = dot(&w, &lap);
        if rho > 0.0 && (rho - lambda_min).abs() <= 1e-6 * lambda_min && it > 4 {
            lambda_min = rho;
            break;
        }
        if rho > 0.0 {
            lambda_min = rho.min(lambda_min);
        }
        w = handle.solve(&w)?;
    }
    Ok(GraphSpectrum {
        l0_upper,
        l0_lambda_min: lambda_min.max(1e-300),
        pencil_upper,
    })
}

/// Prepared context: graph, BFS spanning tree and spectral intervals.
pub struct GraphContext {
    pub graph: Graph,
    pub tree: SpanningTree,
    pub spectrum: GraphSpectrum,
    pub max_degree: usize,
}

impl GraphContext {
    pub fn new(graph: Graph, max_degree: usize) -> Result<Self> {
        let tree = SpanningTree::bfs(&graph);
        let spectrum = estimate_spectrum(&graph, &tree)?;
        Ok(GraphContext {
            graph,
            tree,
            spectrum,
            max_degree,
        })
    }

    pub fn n_edges(&self) -> usize {
        self.graph.n_edges()
    }

    /// The tree operator P_T: x to the unique chain on T with the same
    /// boundary.
    pub fn p_tree(&self) -> PTreeOp<'_> {
        PTreeOp { ctx: self }
    }

    /// One-sided approximate coboundary projection:
    /// (1-eps) Pi_cbd <= ~Pi <= Pi_cbd.
    pub fn cbd_projection(&self, eps: f64) -> Result<ProjCbd<'_>> {
        let eps_s = eps / 2.0;
        let cheb = ChebInverse::with_target(
            &self.graph,
            &self.tree,
            ChebKind::TreePreconditioned,
            1.0,
            self.spectrum.pencil_upper,
            eps_s,
            self.max_degree,
        )?;
        let scale = 1.0 / (1.0 + cheb.eps_realized);
        Ok(ProjCbd { ctx: self, cheb, scale })
    }

    /// One-sided approximate cycle projection via the conjugated form
    /// (I-P_T) (I - ~Pi_cbd) (I-P_T)^T, rescaled:
    /// (1-eps) Pi_cyc <= ~Pi <= Pi_cyc.
    pub fn cyc_projection(&self, eps: f64) -> Result<ProjCyc<'_>> {
        let m = self.n_edges() as f64;
        // ||I - P_T|| <= n1 certified; the deviation is conjugated by
        // it, so the inner coboundary accuracy pays the n1^2 factor
        // (only logarithmic cost in the Chebyshev degree).
        let q_norm_sq = (m * m).max(1.0);
        let eps_inner = eps / (2.0 * q_norm_sq);
        let cbd = self.cbd_projection(eps_inner)?;
        let scale = 1.0 / (1.0 + cbd.one_sided_eps() * q_norm_sq);
        Ok(ProjCyc { ctx: self, cbd, scale })
    }

    /// One-sided approximate down-Laplacian pseudoinverse
    /// d1^T (L0^+)^2 d1 via a commuting plain-Chebyshev polynomial:
    /// (1-eps) (L1down)^+ <= ~D <= (L1down)^+.
    pub fn down_solver(&self, eps: f64) -> Result<DownSolve<'_>> {
        let eps_s = eps / 6.0;
        let cheb = ChebInverse::with_target(
            &self.graph,
            &self.tree,
            ChebKind::Plain,
            self.spectrum.l0_lambda_min / 2.0,
            self.spectrum.l0_upper,
            eps_s,
            self.max_degree,
        )?;
        let scale = 1.0 / (1.0 + 3.0 * cheb.eps_realized);
        Ok(DownSolve { ctx: self, cheb, scale })
    }

    pub fn handle(&self, tol: f64, max_iters: usize) -> SddSolveHandle<'_> {
        SddSolveHandle {
            graph: &self.graph,
            tree: &self.tree,
            tol,
            max_iters,
        }
    }
}

/// P_T x: the unique 1-chain on the spanning tree with the boundary of
/// x; leaf elimination, O(n1). Exact on integer input.
pub struct PTreeOp<'c> {
    ctx: &'c GraphContext,
}

impl LinOp for PTreeOp<'_> {
    fn rows(&self) -> usize {
        self.ctx.n_edges()
    }
    fn cols(&self) -> usize {
        self.ctx.n_edges()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let mut div = vec![0.0; self.ctx.graph.n_vertices];
        self.ctx.graph.boundary_apply(x, &mut div);
        self.ctx.tree.flow(&div, out);
    }
    fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        let mut pot = vec![0.0; self.ctx.graph.n_vertices];
        self.ctx.tree.flow_transpose(x, &mut pot);
        self.ctx.graph.coboundary_apply(&pot, out);
    }
}

/// ~Pi_cbd = d1^T S d1 with S the rescaled Chebyshev inverse.
pub struct ProjCbd<'c> {
    ctx: &'c GraphContext,
    cheb: ChebInverse<'c>,
    scale: f64,
}

impl ProjCbd<'_> {
    /// eps such that (1-eps) Pi <= ~Pi <= Pi.
    pub fn one_sided_eps(&self) -> f64 {
        2.0 * self.cheb.eps_realized / (1.0 + self.cheb.eps_realized)
    }

    pub fn degree(&self) -> usize {
        self.cheb.degree
    }
}

impl LinOp for ProjCbd<'_> {
    fn rows(&self) -> usize {
        self.ctx.n_edges()
    }
    fn cols(&self) -> usize {
        self.ctx.n_edges()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let mut div = vec![0.0; self.ctx.graph.n_vertices];
        self.ctx.graph.boundary_apply(x, &mut div);
        let sol = self.cheb.solve(&div);
        self.ctx.graph.coboundary_apply(&sol, out);
        for v in out.iter_mut() {
            *v *= self.scale;
        }
    }
    fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        self.apply(x, out);
    }
}

/// ~Pi_cyc = s (I-P_T)(I - ~Pi_cbd)(I-P_T)^T.
pub struct ProjCyc<'c> {
    ctx: &'c GraphContext,
    cbd: ProjCbd<'c>,
    scale: f64,
}

impl ProjCyc<'_> {
    pub fn one_sided_eps(&self) -> f64 {
        1.0 - self.scale / (1.0 + 0.0)
    }

    pub fn degree(&self) -> usize {
        self.cbd.degree()
    }
}

impl LinOp for ProjCyc<'_> {
    fn rows(&self) -> usize {
        self.ctx.n_edges()
    }
    fn cols(&self) -> usize {
        self.ctx.n_edges()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let m = self.ctx.n_edges();
        let pt = self.ctx.p_tree();
        // w = (I-P_T)^T x
        let mut w = vec![0.0; m];
        pt.apply_transpose(x, &mut w);
        for i in 0..m {
            w[i] = x[i] - w[i];
        }
        // a = (I - ~Pi_cbd) w
        let mut a = vec![0.0; m];
        self.cbd.apply(&w, &mut a);
        for i in 0..m {
            a[i] = w[i] - a[i];
        }
        // out = s (I-P_T) a
        pt.apply(&a, out);
        for i in 0..m {
            out[i] = self.scale * (a[i] - out[i]);
        }
    }
    fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        self.apply(x, out);
    }
}

/// ~(L1down)^+ = s d1^T S S d1 with the plain (commuting) Chebyshev S.
pub struct DownSolve<'c> {
    ctx: &'c GraphContext,
    cheb: ChebInverse<'c>,
    scale: f64,
}

impl DownSolve<'_> {
    pub fn one_sided_eps(&self) -> f64 {
        6.0 * self.cheb.eps_realized
    }

    pub fn degree(&self) -> usize {
        self.cheb.degree
    }
}

impl LinOp for DownSolve<'_> {
    fn rows(&self) -> usize {
        self.ctx.n_edges()
    }
    fn cols(&self) -> usize {
        self.ctx.n_edges()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let mut div = vec![0.0; self.ctx.graph.n_vertices];
        self.ctx.graph.boundary_apply(x, &mut div);
        let s1 = self.cheb.solve(&div);
        let s2 = self.cheb.solve(&s1);
        self.ctx.graph.coboundary_apply(&s2, out);
        for v in out.iter_mut() {
            *v *= self.scale;
        }
    }
    fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        self.apply(x, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::IdentityOp;
    use crate::oracle;
    use nalgebra::DMatrix;

    fn path_graph(n: usize) -> Graph {
        Graph::new(n, (0..n - 1).map(|i| (i as u32, i as u32 + 1)).collect())
    }

    fn skeleton_of_annulus() -> Graph {
        let inst = crate::generate::annulus_in_ball(4, 8).unwrap();
        Graph::skeleton(&inst.complex, crate::complex::Scope::K)
    }

    #[test]
    fn pcg_solves_to_tolerance() {
        let g = skeleton_of_annulus();
        let tree = SpanningTree::bfs(&g);
        let handle = SddSolveHandle {
            graph: &g,
            tree: &tree,
            tol: 1e-10,
            max_iters: 500,
        };
        let mut b = seeded_vector(g.n_vertices, 3);
        g.deflate_kernel(&tree.comp, tree.n_comp, &mut b);
        let x = handle.solve(&b).unwrap();
        let mut lap = vec![0.0; g.n_vertices];
        g.laplacian_apply(&x, &mut lap);
        let res: f64 = lap
            .iter()
            .zip(&b)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
            .sqrt();
        assert!(res <= 1e-9 * b.iter().map(|v| v * v).sum::<f64>().sqrt());
    }

    #[test]
    fn chebyshev_scalar_error_bound() {
        // On a diagonal-like graph (path of 2 vertices: L0 eigenvalue
        // 2), the Chebyshev residual must respect 1/T_k(sigma).
        let g = path_graph(2);
        let tree = SpanningTree::bfs(&g);
        let cheb = ChebInverse::with_target(&g, &tree, ChebKind::Plain, 0.5, 4.0, 1e-6, 10_000)
            .unwrap();
        // b in the image: b = (1, -1) (eigenvector of eigenvalue 2)
        let b = vec![1.0, -1.0];
        let x = cheb.solve(&b);
        // exact L0^+ b = b / 2
        for i in 0..2 {
            assert!((x[i] - b[i] / 2.0).abs() <= 2e-6, "{:?}", x);
        }
    }

    #[test]
    fn chebyshev_respects_interval_error_over_spectrum() {
        let g = skeleton_of_annulus();
        let tree = SpanningTree::bfs(&g);
        let spec = estimate_spectrum(&g, &tree).unwrap();
        for eps in [1e-2, 1e-6] {
            let cheb = ChebInverse::with_target(
                &g,
                &tree,
                ChebKind::Plain,
                spec.l0_lambda_min / 2.0,
                spec.l0_upper,
                eps,
                100_000,
            )
            .unwrap();
            // max over random b in image of ||L0 x - b|| / ||b||
            let mut worst = 0.0f64;
            for salt in 0..4 {
                let mut b = seeded_vector(g.n_vertices, salt);
                g.deflate_kernel(&tree.comp, tree.n_comp, &mut b);
                let x = cheb.solve(&b);
                let mut lap = vec![0.0; g.n_vertices];
                g.laplacian_apply(&x, &mut lap);
                let res: f64 = lap
                    .iter()
                    .zip(&b)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum::<f64>()
                    .sqrt();
                let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
                worst = worst.max(res / bn);
            }
            assert!(
                worst <= 1.5 * cheb.eps_realized.max(1e-13),
                "eps {} worst {} realized {}",
                eps,
                worst,
                cheb.eps_realized
            );
        }
    }

    #[test]
    fn p_tree_unique_chain_on_triangle() {
        // triangle graph, BFS tree from 0 holds e01 and e02;
        // x = e12 has boundary v2 - v1, the tree chain is e02 - e01
        let g = Graph::new(3, vec![(0, 1), (0, 2), (1, 2)]);
        let ctx = GraphContext::new(g, 10_000).unwrap();
        let pt = ctx.p_tree();
        let x = vec![0.0, 0.0, 1.0];
        let y = pt.apply_vec(&x);
        assert_eq!(y, vec![-1.0, 1.0, 0.0]);
        // x supported on the tree maps to itself
        let x2 = vec![2.0, -3.0, 0.0];
        assert_eq!(pt.apply_vec(&x2), x2);
    }

    #[test]
    fn p_tree_preserves_boundary_exactly_on_integers() {
        let g = skeleton_of_annulus();
        let ctx = GraphContext::new(g, 10_000).unwrap();
        let pt = ctx.p_tree();
        let m = ctx.n_edges();
        let x: Vec<f64> = (0..m).map(|i| ((i * 31 + 7) % 11) as f64 - 5.0).collect();
        let y = pt.apply_vec(&x);
        let mut bx = vec![0.0; ctx.graph.n_vertices];
        let mut by = vec![0.0; ctx.graph.n_vertices];
        ctx.graph.boundary_apply(&x, &mut bx);
        ctx.graph.boundary_apply(&y, &mut by);
        assert_eq!(bx, by);
        for (ei, v) in y.iter().enumerate() {
            if !ctx.tree.in_tree[ei] {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn projections_loewner_one_sided_on_annulus_skeleton() {
        let g = skeleton_of_annulus();
        let ctx = GraphContext::new(g, 100_000).unwrap();
        let m = ctx.n_edges();
        let eps = 0.01;

        // oracle projections from the incidence matrix
        let mut d1 = DMatrix::zeros(ctx.graph.n_vertices, m);
        for (e, &(a, b)) in ctx.graph.edges.iter().enumerate() {
            if a != b {
                d1[(a as usize, e)] -= 1.0;
                d1[(b as usize, e)] += 1.0;
            }
        }
        let pi_cbd = oracle::projector_onto_column_space(&d1.transpose());
        let pi_cyc = DMatrix::identity(m, m) - &pi_cbd;

        let cbd = ctx.cbd_projection(eps).unwrap();
        let mat = oracle::materialize(&cbd);
        assert!(oracle::symmetry_defect(&mat) < 1e-12);
        // (1-eps) Pi <= mat <= Pi
        let low = &pi_cbd * (1.0 - eps);
        assert!(oracle::loewner_check(&low, &mat, 1e-9).unwrap().ok);
        assert!(oracle::loewner_check(&mat, &pi_cbd, 1e-9).unwrap().ok);

        let cyc = ctx.cyc_projection(eps).unwrap();
        let mat = oracle::materialize(&cyc);
        assert!(oracle::symmetry_defect(&mat) < 1e-12);
        let low = &pi_cyc * (1.0 - eps);
        assert!(oracle::loewner_check(&low, &mat, 1e-9).unwrap().ok);
        assert!(oracle::loewner_check(&mat, &pi_cyc, 1e-9).unwrap().ok);
    }

    #[test]
    fn down_solver_matches_dense_pseudoinverse() {
        // path graph with 2 edges
        let g = path_graph(3);
        let ctx = GraphContext::new(g, 100_000).unwrap();
        let eps = 0.01;
        let down = ctx.down_solver(eps).unwrap();

        let mut d1 = DMatrix::zeros(3, 2);
        for (e, &(a, b)) in ctx.graph.edges.iter().enumerate() {
            d1[(a as usize, e)] -= 1.0;
            d1[(b as usize, e)] += 1.0;
        }
        let l1down = d1.transpose() * &d1;
        let pinv = oracle::pinv(&l1down);
        let mat = oracle::materialize(&down);
        // one-sided sandwich
        let low = &pinv * (1.0 - eps);
        assert!(oracle::loewner_check(&low, &mat, 1e-9).unwrap().ok);
        assert!(oracle::loewner_check(&mat, &pinv, 1e-9).unwrap().ok);

        // b = d1^T e_v matches the dense pseudoinverse apply
        let b = d1.transpose().column(1).iter().copied().collect::<Vec<f64>>();
        let x = down.apply_vec(&b);
        let exact = &pinv * nalgebra::DVector::from_column_slice(&b);
        for i in 0..2 {
            assert!((x[i] - exact[i]).abs() <= eps * exact.norm() + 1e-12);
        }
    }

    #[test]
    fn down_solver_kills_cycles() {
        let g = Graph::new(3, vec![(0, 1), (0, 2), (1, 2)]);
        let ctx = GraphContext::new(g, 100_000).unwrap();
        let down = ctx.down_solver(0.05).unwrap();
        // cycle: e12 - e02 + e01 has zero boundary
        let b = vec![1.0, -1.0, 1.0];
        let out = down.apply_vec(&b);
        assert!(out.iter().all(|v| v.abs() < 1e-10), "{:?}", out);
    }

    #[test]
    fn proj_cbd_recovers_coboundaries_and_kills_cycles() {
        let g = skeleton_of_annulus();
        let ctx = GraphContext::new(g, 100_000).unwrap();
        let eps = 1e-3;
        let cbd = ctx.cbd_projection(eps).unwrap();
        let m = ctx.n_edges();
        // coboundary input
        let f = seeded_vector(ctx.graph.n_vertices, 11);
        let mut x = vec![0.0; m];
        ctx.graph.coboundary_apply(&f, &mut x);
        let y = cbd.apply_vec(&x);
        let xn: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(err <= eps * xn, "err {} vs {}", err, eps * xn);
        // cycle input: boundary of x is zero -> output ~ 0
        let pt = ctx.p_tree();
        let z = seeded_vector(m, 5);
        let mut cyc = pt.apply_vec(&z);
        for i in 0..m {
            cyc[i] = z[i] - cyc[i];
        }
        let out = cbd.apply_vec(&cyc);
        let cn: f64 = cyc.iter().map(|v| v * v).sum::<f64>().sqrt();
        let on: f64 = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(on <= 1e-10 * cn.max(1.0));
    }

    #[test]
    fn cbd_plus_cyc_close_to_identity() {
        // The two one-sided operators are built separately; their sum
        // equals the identity only within the combined tolerances.
        let g = Graph::new(3, vec![(0, 1), (0, 2), (1, 2)]);
        let ctx = GraphContext::new(g, 100_000).unwrap();
        let eps = 1e-3;
        let cbd = ctx.cbd_projection(eps).unwrap();
        let cyc = ctx.cyc_projection(eps).unwrap();
        let sum = oracle::materialize(&cbd) + oracle::materialize(&cyc);
        let id = oracle::materialize(&IdentityOp(3));
        assert!((sum - id).norm() <= 3.0 * eps);
    }

    use super::seeded_vector;
}
