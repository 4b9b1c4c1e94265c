//! Homology basis of K, cohomology basis via the operator C, witness
//! vectors and delta-independence diagnostics.
//!
//! The homology basis comes from the tree-cotree construction: every
//! non-tree edge of a spanning tree of the 1-skeleton induces a
//! fundamental cycle with coordinates in {-1, 0, +1}; a maximal subset
//! independent modulo boundaries is selected greedily against the
//! dense oracle.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::chain_ops::CohomologyOp;
use crate::complex::{Chain, EmbeddedComplex, Scope};
use crate::error::{Error, Result};
use crate::graphs::{Graph, SpanningTree};
use crate::oracle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BasisRole {
    Homology,
    Cohomology,
    Harmonic,
    OrthonormalHarmonic,
}

/// An ordered list of 1-chains with a role tag and diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct BasisSet {
    pub role: BasisRole,
    #[serde(skip)]
    pub chains: Vec<Chain>,
    pub norms: Vec<f64>,
    /// max Euclidean norm over the set (p_max / gamma_max)
    pub max_norm: f64,
    /// measured delta-independence of the normalized set (1.0 for a
    /// singleton, 0.0 for an empty set)
    pub delta_independence: f64,
}

impl BasisSet {
    pub fn beta(&self) -> usize {
        self.chains.len()
    }

    fn with_diagnostics(role: BasisRole, chains: Vec<Chain>) -> Self {
        let norms: Vec<f64> = chains.iter().map(|c| c.norm()).collect();
        let max_norm = norms.iter().copied().fold(0.0, f64::max);
        let delta_independence = measured_delta_independence(&chains);
        BasisSet {
            role,
            chains,
            norms,
            max_norm,
            delta_independence,
        }
    }

    pub fn values_matrix(&self) -> DMatrix<f64> {
        if self.chains.is_empty() {
            return DMatrix::zeros(0, 0);
        }
        let n = self.chains[0].len();
        let mut m = DMatrix::zeros(n, self.chains.len());
        for (j, c) in self.chains.iter().enumerate() {
            for i in 0..n {
                m[(i, j)] = c.values[i];
            }
        }
        m
    }
}

/// Distance of each normalized vector to the span of the others,
/// minimized over the set.
pub fn measured_delta_independence(chains: &[Chain]) -> f64 {
    if chains.is_empty() {
        return 0.0;
    }
    if chains.len() == 1 {
        return 1.0;
    }
    let n = chains[0].len();
    let k = chains.len();
    let mut m = DMatrix::zeros(n, k);
    for (j, c) in chains.iter().enumerate() {
        let nm = c.norm().max(1e-300);
        for i in 0..n {
            m[(i, j)] = c.values[i] / nm;
        }
    }
    let mut delta = f64::INFINITY;
    for j in 0..k {
        let v = m.column(j).into_owned();
        let others = DMatrix::from_columns(
            &(0..k)
                .filter(|&i| i != j)
                .map(|i| m.column(i))
                .collect::<Vec<_>>(),
        );
        let proj = oracle::projector_onto_column_space(&others);
        let d = (&v - proj * &v).norm();
        delta = delta.min(d);
    }
    delta
}

/// beta independent 1-cycles of K with entries in {-1, 0, +1}, none
/// null-homologous; independence modulo boundaries is verified against
/// the dense oracle during selection.
pub fn homology_basis(complex: &EmbeddedComplex, dense_cap: usize) -> Result<BasisSet> {
    let n1k = complex.k_scope(1).len();
    let n2k = complex.k_scope(2).len();
    let beta = if n2k == 0 {
        // no triangles: every independent cycle is a homology class,
        // beta = m - n + c without any rank computation
        let graph = Graph::skeleton(complex, Scope::K);
        let (_, c) = graph.components();
        n1k + c - complex.k_scope(0).len()
    } else {
        oracle::betti(complex, 1, Scope::K, dense_cap)?
    };
    if beta == 0 {
        return Ok(BasisSet::with_diagnostics(BasisRole::Homology, Vec::new()));
    }
    let graph = Graph::skeleton(complex, Scope::K);
    let tree = SpanningTree::bfs(&graph);

    // fundamental cycles of non-tree edges, shortest support first
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    let mut cycles: Vec<Vec<f64>> = Vec::new();
    for e in 0..graph.n_edges() {
        if tree.in_tree[e] {
            continue;
        }
        let (a, b) = graph.edges[e];
        if a == b {
            continue;
        }
        let mut x = vec![0.0; n1k];
        x[e] = 1.0;
        let mut div = vec![0.0; graph.n_vertices];
        graph.boundary_apply(&x, &mut div);
        let mut flow = vec![0.0; graph.n_edges()];
        tree.flow(&div, &mut flow);
        for i in 0..n1k {
            x[i] -= flow[i];
        }
        debug_assert!(x.iter().all(|v| *v == 0.0 || v.abs() == 1.0));
        let support = x.iter().filter(|v| **v != 0.0).count();
        candidates.push((support, cycles.len()));
        cycles.push(x);
    }
    candidates.sort_unstable();

    // orthonormal basis of the boundary space for the rank test
    let d2 = oracle::boundary_matrix(&complex.boundary(2, Scope::K)?);
    let q_bd = oracle::column_space_basis(&d2);

    let mut picked: Vec<Chain> = Vec::new();
    let mut residual_basis: Vec<DVector<f64>> = Vec::new();
    for &(_, ci) in &candidates {
        if picked.len() == beta {
            break;
        }
        let c = DVector::from_column_slice(&cycles[ci]);
        let mut r = c.clone();
        if q_bd.ncols() > 0 {
            r -= &q_bd * (q_bd.transpose() * &c);
        }
        for q in &residual_basis {
            let t = q.dot(&r);
            r -= q * t;
        }
        if r.norm() > 1e-7 * c.norm() {
            residual_basis.push(r.normalize());
            picked.push(Chain::from_values(1, Scope::K, cycles[ci].clone()));
        }
    }
    if picked.len() != beta {
        return Err(Error::Format(format!(
            "found {} independent fundamental cycles, oracle says beta = {}",
            picked.len(),
            beta
        )));
    }
    Ok(BasisSet::with_diagnostics(BasisRole::Homology, picked))
}

/// P = {C gamma_i}: an integer cohomology basis of K.
pub fn cohomology_basis(c_op: &CohomologyOp, gamma: &BasisSet) -> Result<BasisSet> {
    let mut chains = Vec::with_capacity(gamma.beta());
    for g in &gamma.chains {
        let p = c_op.apply_chain(g)?;
        for v in &p.values {
            debug_assert_eq!(v.round(), *v, "C output must be integer valued");
        }
        chains.push(p);
    }
    Ok(BasisSet::with_diagnostics(BasisRole::Cohomology, chains))
}

/// Least-squares witness for v_1 among V: w with w . v_1 = 1 and
/// w . v_i = 0 for i >= 2; certifies distance(v_1, span rest) >=
/// 1 / ||w||.
pub fn witness(index: usize, vectors: &[Chain]) -> Result<Chain> {
    let k = vectors.len();
    assert!(index < k);
    let n = vectors[0].len();
    let mut m = DMatrix::zeros(n, k);
    for (j, v) in vectors.iter().enumerate() {
        for i in 0..n {
            m[(i, j)] = v.values[i];
        }
    }
    let gram = m.transpose() * &m;
    let mut e = DVector::zeros(k);
    e[index] = 1.0;
    let lu = gram.clone().lu();
    let coeffs = lu.solve(&e).ok_or(Error::DependentInput)?;
    // residual check: dependent inputs solve badly
    let back = &gram * &coeffs;
    if (back - &e).norm() > 1e-6 {
        return Err(Error::DependentInput);
    }
    let w = &m * coeffs;
    Ok(Chain::from_values(
        vectors[0].dim,
        vectors[0].scope,
        w.as_slice().to_vec(),
    ))
}

/// The delta-independence report of Lemma-level diagnostics: oracle
/// harmonic parts of the cohomology basis, their length lower bound
/// 1/(sqrt(n1) p_max)^beta, the measured independence, and the
/// corollary formula evaluated with both Laplacian variants.
#[derive(Debug, Clone, Serialize)]
pub struct DeltaIndependenceReport {
    pub beta: usize,
    pub p_max: f64,
    pub length_bound: f64,
    pub harmonic_lengths: Vec<f64>,
    pub measured_delta: f64,
    pub delta_bound: f64,
    /// (lambda_min(L1up(X)) / (alpha n1^3 n2^4))^beta
    pub corollary_delta_l1up: f64,
    /// (lambda_min(L2up(X)) / (alpha n1^3 n2^4))^beta
    pub corollary_delta_l2up: f64,
    pub lengths_ok: bool,
    pub independence_ok: bool,
}

pub fn delta_independence_report(
    complex: &EmbeddedComplex,
    p_basis: &BasisSet,
    dense_cap: usize,
) -> Result<DeltaIndependenceReport> {
    let beta = p_basis.beta();
    let n1 = complex.k_scope(1).len() as f64;
    let p_max = p_basis.max_norm.max(1.0);
    let length_bound = if beta == 0 {
        0.0
    } else {
        1.0 / (n1.sqrt() * p_max).powi(beta as i32)
    };

    let projectors = oracle::hodge_projectors(complex, Scope::K, dense_cap)?;
    let mut harmonic: Vec<Chain> = Vec::with_capacity(beta);
    for p in &p_basis.chains {
        let v = DVector::from_column_slice(&p.values);
        let h = &projectors.hr * v;
        harmonic.push(Chain::from_values(1, Scope::K, h.as_slice().to_vec()));
    }
    let harmonic_lengths: Vec<f64> = harmonic.iter().map(|h| h.norm()).collect();
    let measured_delta = measured_delta_independence(&harmonic);

    // lambda_min variants over the full complex X
    let d2x = oracle::boundary_matrix(&complex.boundary(2, Scope::X)?);
    let d3x = oracle::boundary_matrix(&complex.boundary(3, Scope::X)?);
    let l1up = &d2x * d2x.transpose();
    let l2up = &d3x * d3x.transpose();
    let (_, l1up_min) = oracle::psd_spectrum_extremes(&l1up);
    let (_, l2up_min) = oracle::psd_spectrum_extremes(&l2up);
    let n1x = complex.count(1) as f64;
    let n2x = complex.count(2) as f64;
    let denom = crate::chain_ops::ALPHA_C * n1x.powi(3) * n2x.powi(4);
    let cor = |lmin: f64| {
        if beta == 0 || lmin <= 0.0 {
            0.0
        } else {
            (lmin / denom).powi(beta as i32)
        }
    };

    let lengths_ok = harmonic_lengths.iter().all(|&l| l >= length_bound);
    let independence_ok = beta <= 1 || measured_delta >= length_bound;
    Ok(DeltaIndependenceReport {
        beta,
        p_max,
        length_bound,
        harmonic_lengths,
        measured_delta,
        delta_bound: length_bound,
        corollary_delta_l1up: cor(l1up_min),
        corollary_delta_l2up: cor(l2up_min),
        lengths_ok,
        independence_ok,
    })
}

/// Oracle checks that P is a genuine cohomology basis for K: each p is
/// a cocycle (d2^T p = 0), and the pairing matrix P^T Gamma is
/// invertible.
pub fn verify_cohomology_basis(
    complex: &EmbeddedComplex,
    p_basis: &BasisSet,
    gamma: &BasisSet,
) -> Result<()> {
    let d2 = complex.boundary(2, Scope::K)?;
    for p in &p_basis.chains {
        let cob = d2.apply_transpose(p)?;
        let defect = cob.norm();
        if defect > 1e-9 * p.norm().max(1.0) {
            return Err(Error::Format(format!(
                "cohomology candidate is not a cocycle: ||d2^T p|| = {:.3e}",
                defect
            )));
        }
    }
    if p_basis.beta() != gamma.beta() {
        return Err(Error::Format("basis cardinality mismatch".into()));
    }
    if p_basis.beta() > 0 {
        let m = pairing_matrix(p_basis, gamma);
        let det = m.determinant();
        if det.abs() < 1e-9 {
            return Err(Error::SingularM(det.abs()));
        }
    }
    Ok(())
}

/// M = P^T Gamma.
pub fn pairing_matrix(p_basis: &BasisSet, gamma: &BasisSet) -> DMatrix<f64> {
    let beta = p_basis.beta();
    let mut m = DMatrix::zeros(beta, beta);
    for i in 0..beta {
        for j in 0..beta {
            m[(i, j)] = p_basis.chains[i].dot(&gamma.chains[j]);
        }
    }
    m
}

/// Operator-facing bundle: homology and cohomology bases plus the C
/// operator that produced them.
pub struct BasisBundle {
    pub gamma: BasisSet,
    pub p: BasisSet,
}

pub fn build_bases(
    complex: &EmbeddedComplex,
    c_op: &CohomologyOp,
    dense_cap: usize,
) -> Result<BasisBundle> {
    let gamma = homology_basis(complex, dense_cap)?;
    let p = cohomology_basis(c_op, &gamma)?;
    verify_cohomology_basis(complex, &p, &gamma)?;
    Ok(BasisBundle { gamma, p })
}

/// Bound of the P_Gamma lemma:
/// beta^{(beta+3)/2} (p_max gamma_max)^{beta+1}.
pub fn p_gamma_norm_bound(p: &BasisSet, gamma: &BasisSet) -> f64 {
    let beta = p.beta() as f64;
    if p.beta() == 0 {
        return 0.0;
    }
    beta.powf((beta + 3.0) / 2.0) * (p.max_norm * gamma.max_norm).powf(beta + 1.0)
}
