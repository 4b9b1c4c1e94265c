//! Approximate orthonormal harmonic basis and the harmonic projection
//! ~Pi_hr = sum g g^T, with the perturbed Gram-Schmidt machinery and
//! its randomized audit.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bases::BasisSet;
use crate::error::{Error, Result};
use crate::graph_solver::GraphContext;
use crate::linop::LinOp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AccuracyMode {
    Theory,
    Practical,
}

/// Classical Gram-Schmidt as analyzed: g_k = normalize(eta_k - sum
/// (eta_k . g_i) g_i). Used by the audit verbatim.
pub fn classical_gram_schmidt(vectors: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(vectors.len());
    for (k, v) in vectors.iter().enumerate() {
        let mut u = v.clone();
        for g in &out {
            let t = v.dot(g);
            u -= g * t;
        }
        let n = u.norm();
        if n <= 1e-10 {
            return Err(Error::RankDeficient { index: k, pivot: n });
        }
        out.push(u / n);
    }
    Ok(out)
}

/// Classical GS with one re-orthogonalization pass, meeting the 1e-12
/// orthonormality invariant in floating point.
pub fn gram_schmidt(vectors: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(vectors.len());
    for (k, v) in vectors.iter().enumerate() {
        let mut u = v.clone();
        for _ in 0..2 {
            for g in &out {
                let t = u.dot(g);
                u -= g * t;
            }
        }
        let n = u.norm();
        if n <= 1e-10 {
            return Err(Error::RankDeficient { index: k, pivot: n });
        }
        out.push(u / n);
    }
    Ok(out)
}

/// Orthonormal approximate harmonic basis with provenance.
pub struct HarmonicBasisApprox {
    pub vectors: Vec<DVector<f64>>,
    pub eps_prime: f64,
    pub mode: AccuracyMode,
    pub cyc_degree: usize,
}

impl HarmonicBasisApprox {
    pub fn beta(&self) -> usize {
        self.vectors.len()
    }

    /// max |<g_i, g_j>| off diagonal and max |1 - ||g_i||^2|.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.vectors.len() {
            worst = worst.max((self.vectors[i].norm_squared() - 1.0).abs());
            for j in 0..i {
                worst = worst.max(self.vectors[i].dot(&self.vectors[j]).abs());
            }
        }
        worst
    }
}

/// Theory-mode inner accuracy eps' = (delta / 8 beta)^{beta+1} * eps;
/// errors out when the schedule underflows f64.
pub fn theory_eps_prime(delta: f64, beta: usize, eps: f64) -> Result<f64> {
    if beta == 0 {
        return Ok(eps);
    }
    let log10 = (beta as f64 + 1.0) * (delta / (8.0 * beta as f64)).log10() + eps.log10();
    if log10 < -300.0 {
        return Err(Error::EpsilonUnderflow { log10 });
    }
    Ok((delta / (8.0 * beta as f64)).powi(beta as i32 + 1) * eps)
}

/// h_i = ~Pi_cyc(eps') p_i, normalized and orthonormalized.
pub fn harmonic_basis(
    skeleton: &GraphContext,
    p_basis: &BasisSet,
    eps_prime: f64,
    mode: AccuracyMode,
) -> Result<HarmonicBasisApprox> {
    let beta = p_basis.beta();
    if beta == 0 {
        return Ok(HarmonicBasisApprox {
            vectors: Vec::new(),
            eps_prime,
            mode,
            cyc_degree: 0,
        });
    }
    let cyc = skeleton.cyc_projection(eps_prime)?;
    let mut normalized = Vec::with_capacity(beta);
    for p in &p_basis.chains {
        let h = cyc.apply_vec(&p.values);
        let hv = DVector::from_vec(h);
        let n = hv.norm();
        if n <= 1e-14 {
            return Err(Error::RankDeficient { index: normalized.len(), pivot: n });
        }
        normalized.push(hv / n);
    }
    let vectors = gram_schmidt(&normalized)?;
    let basis = HarmonicBasisApprox {
        vectors,
        eps_prime,
        mode,
        cyc_degree: cyc.degree(),
    };
    debug_assert!(basis.orthonormality_defect() <= 1e-12);
    Ok(basis)
}

/// ~Pi_hr = sum g g^T: symmetric by construction, rank beta exactly.
pub struct ProjHr<'b> {
    pub basis: &'b HarmonicBasisApprox,
    pub n: usize,
}

impl LinOp for ProjHr<'_> {
    fn rows(&self) -> usize {
        self.n
    }
    fn cols(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for g in &self.basis.vectors {
            let mut t = 0.0;
            for i in 0..self.n {
                t += g[i] * x[i];
            }
            for i in 0..self.n {
                out[i] += t * g[i];
            }
        }
    }
    fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        self.apply(x, out);
    }
}

/// One trial record of the Gram-Schmidt perturbation audit.
#[derive(Debug, Clone, Serialize)]
pub struct GsAuditTrial {
    pub beta: usize,
    pub delta_measured: f64,
    pub eps_measured: f64,
    pub worst_vector_error: f64,
    pub vector_bound: f64,
    pub projector_error: f64,
    pub projector_bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GsAuditReport {
    pub trials: Vec<GsAuditTrial>,
    pub violations: usize,
}

/// Samples random delta-independent unit sets, perturbs them by eps,
/// and verifies the perturbed-Gram-Schmidt inequalities:
/// ||g_i - ~g_i|| <= (8 beta / delta)^beta eps and
/// ||Pi_N - Pi_~N|| < 2 beta (8 beta / delta)^beta eps.
pub fn gs_perturbation_audit(
    beta: usize,
    delta_target: f64,
    eps: f64,
    trials: usize,
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> GsAuditReport {
    let mut report = GsAuditReport {
        trials: Vec::with_capacity(trials),
        violations: 0,
    };
    for _ in 0..trials {
        let (n_set, delta_measured) = sample_delta_independent(beta, delta_target, dim, rng);
        // perturb and renormalize, keeping the measured difference < eps
        let mut perturbed = Vec::with_capacity(beta);
        let mut eps_measured = 0.0f64;
        for v in &n_set {
            let noise = DVector::from_iterator(dim, (0..dim).map(|_| rng.gen::<f64>() - 0.5));
            let mut w = v + noise.normalize() * (0.4 * eps);
            w = w.normalize();
            eps_measured = eps_measured.max((v - &w).norm());
            perturbed.push(w);
        }
        let g = classical_gram_schmidt(&n_set).expect("sampled set is independent");
        let g_t = classical_gram_schmidt(&perturbed).expect("perturbed set is independent");

        let factor = (8.0 * beta as f64 / delta_measured).powi(beta as i32);
        let vector_bound = factor * eps_measured;
        let mut worst_vector_error = 0.0f64;
        for (a, b) in g.iter().zip(&g_t) {
            worst_vector_error = worst_vector_error.max((a - b).norm());
        }
        let proj = |gs: &[DVector<f64>]| -> DMatrix<f64> {
            let mut m = DMatrix::zeros(dim, dim);
            for v in gs {
                m += v * v.transpose();
            }
            m
        };
        let projector_error = (proj(&g) - proj(&g_t)).norm();
        let projector_bound = 2.0 * beta as f64 * factor * eps_measured;
        let ok = worst_vector_error <= vector_bound && projector_error < projector_bound.max(1e-300);
        if !ok {
            report.violations += 1;
        }
        report.trials.push(GsAuditTrial {
            beta,
            delta_measured,
            eps_measured,
            worst_vector_error,
            vector_bound,
            projector_error,
            projector_bound,
            ok,
        });
    }
    report
}

/// Random unit vectors re-sampled until the measured independence
/// reaches the target (near-orthogonal draws make this fast).
fn sample_delta_independent(
    beta: usize,
    delta_target: f64,
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<DVector<f64>>, f64) {
    loop {
        let set: Vec<DVector<f64>> = (0..beta)
            .map(|_| {
                DVector::from_iterator(dim, (0..dim).map(|_| rng.gen::<f64>() - 0.5)).normalize()
            })
            .collect();
        let delta = measured_delta(&set);
        if delta >= delta_target {
            return (set, delta);
        }
    }
}

fn measured_delta(set: &[DVector<f64>]) -> f64 {
    if set.len() <= 1 {
        return 1.0;
    }
    let dim = set[0].len();
    let mut delta = f64::INFINITY;
    for j in 0..set.len() {
        let others: Vec<_> = (0..set.len()).filter(|&i| i != j).collect();
        let mut m = DMatrix::zeros(dim, others.len());
        for (c, &i) in others.iter().enumerate() {
            m.set_column(c, &set[i]);
        }
        let proj = crate::oracle::projector_onto_column_space(&m);
        delta = delta.min((&set[j] - proj * &set[j]).norm());
    }
    delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn gs_identity_on_orthonormal_input() {
        let v = vec![
            DVector::from_vec(vec![1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0, 0.0]),
        ];
        let g = gram_schmidt(&v).unwrap();
        assert!((&g[0] - &v[0]).norm() < 1e-15);
        assert!((&g[1] - &v[1]).norm() < 1e-15);
    }

    #[test]
    fn gs_hand_checkable_pair() {
        let s = 1.0 / 2.0f64.sqrt();
        let v = vec![
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![s, s]),
        ];
        let g = gram_schmidt(&v).unwrap();
        assert!((&g[0] - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-14);
        assert!((&g[1] - DVector::from_vec(vec![0.0, 1.0])).norm() < 1e-14);
    }

    #[test]
    fn gs_preserves_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v: Vec<DVector<f64>> = (0..3)
            .map(|_| DVector::from_iterator(7, (0..7).map(|_| rng.gen::<f64>() - 0.5)))
            .collect();
        let g = gram_schmidt(&v).unwrap();
        let mut mv = DMatrix::zeros(7, 3);
        let mut mg = DMatrix::zeros(7, 3);
        for i in 0..3 {
            mv.set_column(i, &v[i]);
            mg.set_column(i, &g[i]);
        }
        let pv = crate::oracle::projector_onto_column_space(&mv);
        let pg = crate::oracle::projector_onto_column_space(&mg);
        assert!((pv - pg).norm() < 1e-10);
    }

    #[test]
    fn gs_rejects_rank_deficiency() {
        let v = vec![
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![1.0, 0.0]),
        ];
        assert!(matches!(
            gram_schmidt(&v),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn theory_eps_prime_underflows_gracefully() {
        // a tiny delta with beta = 3 underflows f64
        let err = theory_eps_prime(1e-80, 3, 0.01).unwrap_err();
        assert!(matches!(err, Error::EpsilonUnderflow { .. }));
        // moderate values compute
        let e = theory_eps_prime(0.5, 1, 0.01).unwrap();
        assert!((e - (0.5f64 / 8.0).powi(2) * 0.01).abs() < 1e-18);
    }

    #[test]
    fn audit_singleton_reduces_to_direct_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let report = gs_perturbation_audit(1, 0.5, 1e-4, 20, 8, &mut rng);
        assert_eq!(report.violations, 0);
        for t in &report.trials {
            assert_eq!(t.delta_measured, 1.0);
            // bound reduces to (8/delta) eps = 8 eps
            assert!((t.vector_bound - 8.0 * t.eps_measured).abs() < 1e-12);
        }
    }

    #[test]
    fn audit_zero_perturbation_identical_outputs() {
        let v = vec![
            DVector::from_vec(vec![1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 0.6, 0.8]),
        ];
        let g1 = classical_gram_schmidt(&v).unwrap();
        let g2 = classical_gram_schmidt(&v).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn audit_beta_three_no_violations() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let report = gs_perturbation_audit(3, 0.3, 1e-8, 100, 12, &mut rng);
        assert_eq!(report.violations, 0);
    }

    #[test]
    fn normalized_difference_lemma_on_random_pairs() {
        // || h/||h|| - g/||g|| || <= 2 ||h - g|| / ||h||
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let h = DVector::from_iterator(6, (0..6).map(|_| rng.gen::<f64>() - 0.5));
            let g = &h + DVector::from_iterator(6, (0..6).map(|_| (rng.gen::<f64>() - 0.5) * 0.3));
            if h.norm() < 1e-3 || g.norm() < 1e-3 {
                continue;
            }
            let lhs = (h.normalize() - g.normalize()).norm();
            let rhs = 2.0 * (&h - &g).norm() / h.norm();
            assert!(lhs <= rhs + 1e-12);
        }
    }
}
