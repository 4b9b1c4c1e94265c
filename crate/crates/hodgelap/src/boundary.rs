//! The homology-correction operator P_Gamma and the output-relative
//! boundary projection
//! ~Pi_bd = (I-P_Gamma)(I-P_T)(I - ~Pi_cbd - ~Pi_hr)(I-P_T)^T(I-P_Gamma)^T.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::bases::{p_gamma_norm_bound, BasisBundle};
use crate::complex::{Chain, EmbeddedComplex, Scope};
use crate::error::{Error, Result};
use crate::graph_solver::{GraphContext, ProjCbd, PTreeOp};
use crate::harmonic::{HarmonicBasisApprox, ProjHr};
use crate::linop::{operator_norm_est, LinOp};
use crate::oracle;

/// Cycle tolerance for the public p_gamma entry point: upstream
/// (I-P_T) produces cycles only up to floating-point error.
pub const CYCLE_TOL: f64 = 1e-8;

/// Gamma = homology basis, P = cohomology basis, M = P^T Gamma
/// factorized once.
pub struct GammaCorrection {
    pub gamma: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub m_inv: DMatrix<f64>,
    pub det_m: f64,
    pub beta: usize,
    pub n1: usize,
    /// power-iteration estimate of ||P_Gamma||
    pub norm_est: f64,
    /// beta^{(beta+3)/2} (p_max gamma_max)^{beta+1}
    pub norm_bound: f64,
}

impl GammaCorrection {
    pub fn new(bundle: &BasisBundle, n1: usize) -> Result<Self> {
        let beta = bundle.gamma.beta();
        let gamma = bundle.gamma.values_matrix();
        let p = bundle.p.values_matrix();
        let (gamma, p) = if beta == 0 {
            (DMatrix::zeros(n1, 0), DMatrix::zeros(n1, 0))
        } else {
            (gamma, p)
        };
        let (m_inv, det_m) = if beta == 0 {
            (DMatrix::zeros(0, 0), 1.0)
        } else {
            let m = p.transpose() * &gamma;
            let det = m.determinant();
            if det.abs() < 1e-12 {
                return Err(Error::SingularM(det.abs()));
            }
            (m.try_inverse().ok_or(Error::SingularM(det.abs()))?, det)
        };
        let mut corr = GammaCorrection {
            gamma,
            p,
            m_inv,
            det_m,
            beta,
            n1,
            norm_est: 0.0,
            norm_bound: p_gamma_norm_bound(&bundle.p, &bundle.gamma),
        };
        corr.norm_est = operator_norm_est(&PGammaOp(&corr), 120);
        Ok(corr)
    }
}

/// P_Gamma x = Gamma M^{-1} P^T x as an unconditioned linear map; the
/// cycle precondition lives in the public `p_gamma` entry point.
pub struct PGammaOp<'a>(pub &'a GammaCorrection);

impl LinOp for PGammaOp<'_> {
    fn rows(&self) -> usize {
        self.0.n1
    }
    fn cols(&self) -> usize {
        self.0.n1
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        if self.0.beta == 0 {
            out.fill(0.0);
            return;
        }
        let v = DVector::from_column_slice(x);
        let coords = &self.0.m_inv * (self.0.p.transpose() * v);
        let res = &self.0.gamma * coords;
        out.copy_from_slice(res.as_slice());
    }
    fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        if self.0.beta == 0 {
            out.fill(0.0);
            return;
        }
        let v = DVector::from_column_slice(x);
        let coords = self.0.m_inv.transpose() * (self.0.gamma.transpose() * v);
        let res = &self.0.p * coords;
        out.copy_from_slice(res.as_slice());
    }
}

/// Maps a 1-cycle to the homologous linear combination of the basis
/// cycles. Rejects inputs whose boundary exceeds the cycle tolerance.
pub fn p_gamma(
    corr: &GammaCorrection,
    complex: &EmbeddedComplex,
    x: &Chain,
) -> Result<Chain> {
    x.expect(1, Scope::K, corr.n1)?;
    let d1 = complex.boundary(1, Scope::K)?;
    let b = d1.apply(x)?;
    let res = b.norm();
    if res > CYCLE_TOL * x.norm().max(1e-300) {
        return Err(Error::NotACycle { residual: res, tol: CYCLE_TOL });
    }
    let out = PGammaOp(corr).apply_vec(&x.values);
    Ok(Chain::from_values(1, Scope::K, out))
}

/// The boundary projection operator, assembled from prepared parts.
pub struct ProjBd<'a> {
    pub p_tree: PTreeOp<'a>,
    pub p_gamma: PGammaOp<'a>,
    pub cbd: ProjCbd<'a>,
    pub hr: ProjHr<'a>,
    pub n1: usize,
}

impl<'a> ProjBd<'a> {
    pub fn new(
        skeleton: &'a GraphContext,
        corr: &'a GammaCorrection,
        basis: &'a HarmonicBasisApprox,
        delta: f64,
    ) -> Result<Self> {
        let n1 = skeleton.n_edges();
        Ok(ProjBd {
            p_tree: skeleton.p_tree(),
            p_gamma: PGammaOp(corr),
            cbd: skeleton.cbd_projection(delta)?,
            hr: ProjHr { basis, n: n1 },
            n1,
        })
    }
}

impl LinOp for ProjBd<'_> {
    fn rows(&self) -> usize {
        self.n1
    }
    fn cols(&self) -> usize {
        self.n1
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n1;
        // w = (I-P_T)^T (I-P_Gamma)^T x
        let mut w = vec![0.0; n];
        self.p_gamma.apply_transpose(x, &mut w);
        for i in 0..n {
            w[i] = x[i] - w[i];
        }
        let mut w2 = vec![0.0; n];
        self.p_tree.apply_transpose(&w, &mut w2);
        for i in 0..n {
            w2[i] = w[i] - w2[i];
        }
        // e = (I - cbd - hr) w2
        let mut c = vec![0.0; n];
        self.cbd.apply(&w2, &mut c);
        let mut h = vec![0.0; n];
        self.hr.apply(&w2, &mut h);
        for i in 0..n {
            w2[i] -= c[i] + h[i];
        }
        // out = (I-P_Gamma)(I-P_T) e
        let mut t = vec![0.0; n];
        self.p_tree.apply(&w2, &mut t);
        for i in 0..n {
            t[i] = w2[i] - t[i];
        }
        self.p_gamma.apply(&t, out);
        for i in 0..n {
            out[i] = t[i] - out[i];
        }
    }
    fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        self.apply(x, out);
    }
}

/// Practical-mode delta: eps / (4 ||(I-P_Gamma)(I-P_T)||^2) with a
/// power-iteration estimate inflated 1.25x, floored at 1e-12.
pub fn practical_delta(skeleton: &GraphContext, corr: &GammaCorrection, eps: f64) -> f64 {
    let norm = composed_correction_norm(skeleton, corr);
    (eps / (4.0 * (1.25 * norm * norm).max(1.0))).max(1e-12)
}

/// ||(I-P_Gamma)(I-P_T)|| power-iteration estimate.
pub fn composed_correction_norm(skeleton: &GraphContext, corr: &GammaCorrection) -> f64 {
    struct Composed<'a> {
        pt: PTreeOp<'a>,
        pg: PGammaOp<'a>,
        n: usize,
    }
    impl LinOp for Composed<'_> {
        fn rows(&self) -> usize {
            self.n
        }
        fn cols(&self) -> usize {
            self.n
        }
        fn apply(&self, x: &[f64], out: &mut [f64]) {
            let mut t = vec![0.0; self.n];
            self.pt.apply(x, &mut t);
            for i in 0..self.n {
                t[i] = x[i] - t[i];
            }
            self.pg.apply(&t, out);
            for i in 0..self.n {
                out[i] = t[i] - out[i];
            }
        }
        fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
            let mut t = vec![0.0; self.n];
            self.pg.apply_transpose(x, &mut t);
            for i in 0..self.n {
                t[i] = x[i] - t[i];
            }
            self.pt.apply_transpose(&t, out);
            for i in 0..self.n {
                out[i] = t[i] - out[i];
            }
        }
    }
    let op = Composed {
        pt: skeleton.p_tree(),
        pg: PGammaOp(corr),
        n: skeleton.n_edges(),
    };
    operator_norm_est(&op, 150)
}

/// Theory-mode delta = eps / (2 n1^4 (n1 n2 / lambda_min)^{c beta});
/// c defaults to the exponent matching the P_Gamma/P_T proof-chain
/// product. Underflows are reported, not clamped.
pub fn theory_delta(
    n1: usize,
    n2: usize,
    lambda_min_x: f64,
    beta: usize,
    c: f64,
    eps: f64,
) -> Result<f64> {
    let n1 = n1 as f64;
    let n2 = n2 as f64;
    let base: f64 = (n1 * n2 / lambda_min_x.max(1e-300)).max(2.0);
    let log10 = eps.log10() - (2.0f64).log10() - 4.0 * n1.log10() - c * beta as f64 * base.log10();
    if log10 < -300.0 {
        return Err(Error::EpsilonUnderflow { log10 });
    }
    Ok(eps / (2.0 * n1.powi(4) * base.powf(c * beta as f64)))
}

/// Effective exponent c for the theory-mode formula, derived from the
/// P_Gamma norm bound: (1 + ||P_Gamma||_bound)^2 <= (n1 n2 /
/// lambda)^{c beta}.
pub fn effective_c_exponent(
    corr: &GammaCorrection,
    n1: usize,
    n2: usize,
    lambda_min_x: f64,
) -> f64 {
    if corr.beta == 0 {
        return 0.0;
    }
    let base: f64 = (n1 as f64 * n2 as f64 / lambda_min_x.max(1e-300)).max(2.0);
    let target: f64 = (1.0 + corr.norm_bound).powi(2);
    (target.ln() / (corr.beta as f64 * base.ln())).max(0.0)
}

/// Results of the helper-identity audit on materialized operators.
#[derive(Debug, Clone, Serialize)]
pub struct HelperAuditReport {
    pub identity_left_defect: f64,
    pub identity_right_defect: f64,
    pub boundary_membership_residual: f64,
    pub pt_quadratic_bound_margin: f64,
    pub p_gamma_norm_est: f64,
    pub p_gamma_norm_bound: f64,
    pub corollary_epsilon: f64,
    pub corollary_c: f64,
    pub ok: bool,
}

/// Verifies (I-P_Gamma)(I-P_T) Pi_bd = Pi_bd and
/// Pi_bd (I-P_Gamma)(I-P_T) = (I-P_Gamma)(I-P_T) on dense
/// materializations, plus the norm-bound side conditions.
pub fn helper_identities_audit(
    complex: &EmbeddedComplex,
    skeleton: &GraphContext,
    corr: &GammaCorrection,
    lambda_min_x: f64,
    dense_cap: usize,
) -> Result<HelperAuditReport> {
    let n1 = skeleton.n_edges();
    let projectors = oracle::hodge_projectors(complex, Scope::K, dense_cap)?;
    let pi_bd = &projectors.bd;

    // dense (I-P_Gamma)(I-P_T)
    let pt = oracle::materialize(&skeleton.p_tree());
    let pg = oracle::materialize(&PGammaOp(corr));
    let id = DMatrix::identity(n1, n1);
    let f_t = (&id - &pg) * (&id - &pt);

    let identity_left_defect = (&f_t * pi_bd - pi_bd).norm();
    let identity_right_defect = (pi_bd * &f_t - &f_t).norm();

    // boundary membership of (I-P_Gamma)(I-P_T) x for a seeded x
    let x = DVector::from_iterator(n1, (0..n1).map(|i| ((i * 37 + 11) % 13) as f64 - 6.0));
    let y = &f_t * x;
    let residual = (&y - pi_bd * &y).norm() / y.norm().max(1e-300);

    // (I-P_T)(I-P_T)^T <= n1^2 I
    let q = &id - &pt;
    let qq = &q * q.transpose();
    let (qq_max, _) = oracle::psd_spectrum_extremes(&qq);
    let pt_quadratic_bound_margin = (n1 * n1) as f64 - qq_max;

    let corollary_c = effective_c_exponent(corr, n1, complex.count(2), lambda_min_x);
    let base: f64 = (n1 as f64 * complex.count(2) as f64 / lambda_min_x.max(1e-300)).max(2.0);
    let corollary_epsilon = base.powf(corollary_c * corr.beta as f64);

    let ok = identity_left_defect <= 1e-9
        && identity_right_defect <= 1e-9
        && residual <= 1e-9
        && pt_quadratic_bound_margin >= -1e-9
        && corr.norm_est <= corr.norm_bound * (1.0 + 1e-9) + 1e-9;
    Ok(HelperAuditReport {
        identity_left_defect,
        identity_right_defect,
        boundary_membership_residual: residual,
        pt_quadratic_bound_margin,
        p_gamma_norm_est: corr.norm_est,
        p_gamma_norm_bound: corr.norm_bound,
        corollary_epsilon,
        corollary_c,
        ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::build_bases;
    use crate::chain_ops::CohomologyOp;
    use crate::collapse::normalize;
    use crate::embedding::build_t;
    use crate::generate;
    use crate::graphs::Graph;
    use crate::harmonic::{harmonic_basis, AccuracyMode};
    use crate::oracle::DEFAULT_DENSE_CAP;

    struct Setup {
        complex: EmbeddedComplex,
        skeleton: GraphContext,
        bundle: BasisBundle,
    }

    fn setup(inst: crate::scx::Instance) -> Setup {
        let seq = normalize(&inst.complex, &inst.sequence).unwrap();
        let t = build_t(&inst.complex, DEFAULT_DENSE_CAP).unwrap();
        let c_op = CohomologyOp::new(&inst.complex, &seq, &t).unwrap();
        let bundle = build_bases(&inst.complex, &c_op, DEFAULT_DENSE_CAP).unwrap();
        let skeleton =
            GraphContext::new(Graph::skeleton(&inst.complex, Scope::K), 200_000).unwrap();
        Setup {
            complex: inst.complex,
            skeleton,
            bundle,
        }
    }

    #[test]
    fn p_gamma_fixes_basis_cycles() {
        let s = setup(generate::annulus_in_ball(4, 8).unwrap());
        let corr = GammaCorrection::new(&s.bundle, s.skeleton.n_edges()).unwrap();
        let g = &s.bundle.gamma.chains[0];
        let out = p_gamma(&corr, &s.complex, g).unwrap();
        for (a, b) in out.values.iter().zip(&g.values) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn p_gamma_annihilates_boundaries() {
        let s = setup(generate::annulus_in_ball(4, 8).unwrap());
        let corr = GammaCorrection::new(&s.bundle, s.skeleton.n_edges()).unwrap();
        let d2 = s.complex.boundary(2, Scope::K).unwrap();
        let n2 = s.complex.k_scope(2).len();
        let mut w = Chain::zeros(2, Scope::K, n2);
        for (i, v) in w.values.iter_mut().enumerate() {
            *v = ((i * 23 + 5) % 9) as f64 - 4.0;
        }
        let b = d2.apply(&w).unwrap();
        let out = p_gamma(&corr, &s.complex, &b).unwrap();
        let outn = out.norm();
        assert!(outn <= 1e-8 * b.norm().max(1.0), "norm {}", outn);
    }

    #[test]
    fn p_gamma_recovers_scaled_cycle_through_noise() {
        let s = setup(generate::annulus_in_ball(4, 8).unwrap());
        let corr = GammaCorrection::new(&s.bundle, s.skeleton.n_edges()).unwrap();
        let d2 = s.complex.boundary(2, Scope::K).unwrap();
        let n2 = s.complex.k_scope(2).len();
        let mut w = Chain::zeros(2, Scope::K, n2);
        for (i, v) in w.values.iter_mut().enumerate() {
            *v = ((i * 7 + 1) % 5) as f64 - 2.0;
        }
        let noise = d2.apply(&w).unwrap();
        let gamma = &s.bundle.gamma.chains[0];
        let mut x = gamma.clone();
        x.scale(2.0);
        x.axpy(1.0, &noise);
        let out = p_gamma(&corr, &s.complex, &x).unwrap();
        for (o, g) in out.values.iter().zip(&gamma.values) {
            assert!((o - 2.0 * g).abs() < 1e-8);
        }
    }

    #[test]
    fn p_gamma_rejects_non_cycles() {
        let s = setup(generate::annulus_in_ball(3, 6).unwrap());
        let corr = GammaCorrection::new(&s.bundle, s.skeleton.n_edges()).unwrap();
        let mut x = Chain::zeros(1, Scope::K, s.skeleton.n_edges());
        x.values[0] = 1.0; // a bare edge is no cycle
        assert!(matches!(
            p_gamma(&corr, &s.complex, &x),
            Err(Error::NotACycle { .. })
        ));
    }

    #[test]
    fn helper_identities_on_annulus() {
        let s = setup(generate::annulus_in_ball(3, 8).unwrap());
        let corr = GammaCorrection::new(&s.bundle, s.skeleton.n_edges()).unwrap();
        let report =
            helper_identities_audit(&s.complex, &s.skeleton, &corr, 1.0, DEFAULT_DENSE_CAP)
                .unwrap();
        assert!(report.ok, "{:?}", report);
    }

    #[test]
    fn helper_identities_beta_zero_reduces_to_pt() {
        let s = setup(generate::disk_in_ball(2, 6).unwrap());
        let corr = GammaCorrection::new(&s.bundle, s.skeleton.n_edges()).unwrap();
        assert_eq!(corr.beta, 0);
        let report =
            helper_identities_audit(&s.complex, &s.skeleton, &corr, 1.0, DEFAULT_DENSE_CAP)
                .unwrap();
        assert!(report.ok, "{:?}", report);
    }

    #[test]
    fn proj_bd_sandwich_on_annulus() {
        let s = setup(generate::annulus_in_ball(3, 8).unwrap());
        let corr = GammaCorrection::new(&s.bundle, s.skeleton.n_edges()).unwrap();
        let basis = harmonic_basis(&s.skeleton, &s.bundle.p, 1e-10, AccuracyMode::Practical)
            .unwrap();
        let eps = 0.01;
        let delta = practical_delta(&s.skeleton, &corr, eps);
        let bd = ProjBd::new(&s.skeleton, &corr, &basis, delta).unwrap();
        let mat = oracle::materialize(&bd);
        assert!(oracle::symmetry_defect(&mat) < 1e-10);

        let projectors =
            oracle::hodge_projectors(&s.complex, Scope::K, DEFAULT_DENSE_CAP).unwrap();
        let low = &projectors.bd * (1.0 - eps);
        let high = &projectors.bd * (1.0 + eps);
        assert!(oracle::loewner_check(&low, &mat, 1e-9).unwrap().ok);
        assert!(oracle::loewner_check(&mat, &high, 1e-9).unwrap().ok);
    }

    #[test]
    fn proj_bd_kills_cocycles_and_recovers_boundaries() {
        let s = setup(generate::annulus_in_ball(3, 8).unwrap());
        let corr = GammaCorrection::new(&s.bundle, s.skeleton.n_edges()).unwrap();
        let basis = harmonic_basis(&s.skeleton, &s.bundle.p, 1e-10, AccuracyMode::Practical)
            .unwrap();
        let eps = 0.01;
        let delta = practical_delta(&s.skeleton, &corr, eps);
        let bd = ProjBd::new(&s.skeleton, &corr, &basis, delta).unwrap();
        let n1 = s.skeleton.n_edges();

        // coboundary input: output vanishes to cycle tolerance
        let d1 = s.complex.boundary(1, Scope::K).unwrap();
        let n0 = s.complex.k_scope(0).len();
        let mut f = Chain::zeros(0, Scope::K, n0);
        for (i, v) in f.values.iter_mut().enumerate() {
            *v = ((i * 13 + 3) % 7) as f64 - 3.0;
        }
        let cob = d1.apply_transpose(&f).unwrap();
        let out = bd.apply_vec(&cob.values);
        let on = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(on <= 1e-9 * cob.norm().max(1.0), "cocycle leak {}", on);

        // harmonic input (oracle-computed): also vanishes
        let projectors =
            oracle::hodge_projectors(&s.complex, Scope::K, DEFAULT_DENSE_CAP).unwrap();
        let x = DVector::from_iterator(n1, (0..n1).map(|i| ((i * 5 + 2) % 11) as f64 - 5.0));
        let h = &projectors.hr * &x;
        let out = bd.apply_vec(h.as_slice());
        let on = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(on <= 1e-9 * h.norm().max(1.0), "harmonic leak {}", on);

        // boundary input returned within eps
        let d2 = s.complex.boundary(2, Scope::K).unwrap();
        let n2 = s.complex.k_scope(2).len();
        let mut w = Chain::zeros(2, Scope::K, n2);
        for (i, v) in w.values.iter_mut().enumerate() {
            *v = ((i * 3 + 1) % 9) as f64 - 4.0;
        }
        let b = d2.apply(&w).unwrap();
        let out = bd.apply_vec(&b.values);
        let err: f64 = out
            .iter()
            .zip(&b.values)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
            .sqrt();
        assert!(err <= eps * b.norm(), "err {} vs {}", err, eps * b.norm());
    }

    #[test]
    fn row_col_norm_bound_lemma() {
        // ||A|| <= sqrt(rows) row_max and ||A|| <= sqrt(cols) col_max
        let mut a = DMatrix::zeros(5, 7);
        for i in 0..5 {
            for j in 0..7 {
                a[(i, j)] = (((i * 7 + j * 3) % 11) as f64 - 5.0) / 3.0;
            }
        }
        let norm = a.clone().svd(false, false).singular_values.max();
        let row_max = (0..5)
            .map(|i| a.row(i).norm())
            .fold(0.0f64, f64::max);
        let col_max = (0..7)
            .map(|j| a.column(j).norm())
            .fold(0.0f64, f64::max);
        assert!(norm <= (5.0f64).sqrt() * row_max + 1e-12);
        assert!(norm <= (7.0f64).sqrt() * col_max + 1e-12);
    }

    #[test]
    fn integer_inverse_norm_lemma() {
        // ||A^{-1}|| <= n^{n/2+1} A_max^n for full-rank integer A, n <= 6
        for seed in 0..12u64 {
            for n in 2..=6usize {
                let mut a = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        let v = (((seed as usize + 1) * (i * n + j + 1) * 2654435761) % 7) as f64
                            - 3.0;
                        a[(i, j)] = v;
                    }
                }
                if a.determinant().abs() < 0.5 {
                    continue; // not full rank over the integers
                }
                let amax = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
                let inv = a.clone().try_inverse().unwrap();
                let inv_norm = inv.svd(false, false).singular_values.max();
                let bound = (n as f64).powf(n as f64 / 2.0 + 1.0) * amax.powi(n as i32);
                assert!(inv_norm <= bound + 1e-9, "n={} {} > {}", n, inv_norm, bound);
            }
        }
    }
}
