//! The up-Laplacian solver via the (B B^T)^+ composition and the full
//! 1-Laplacian solver: prepared operator context, accuracy schedules
//! and spectral estimates.
//!
//! up_solve realizes ~Pi_bd U^T ~Pi_{ker-perp(d2)} U ~Pi_bd rescaled to
//! the one-sided sandwich; laplacian_solve adds the down-Laplacian
//! solver, whose image is orthogonal to the up part.

use serde::Serialize;

use crate::bases::{build_bases, BasisBundle};
use crate::boundary::{practical_delta, GammaCorrection, ProjBd};
use crate::chain_ops::{CohomologyOp, UOp};
use crate::collapse::{normalize, CollapsingSequence};
use crate::complex::{Chain, EmbeddedComplex, Scope};
use crate::embedding::{build_dual_graph, build_t, TComplex};
use crate::error::{Error, Result};
use crate::graph_solver::GraphContext;
use crate::graphs::Graph;
use crate::harmonic::{harmonic_basis, theory_eps_prime, AccuracyMode, HarmonicBasisApprox};
use crate::linop::LinOp;
use crate::oracle;
use crate::scx::Instance;

#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    pub eps: f64,
    pub mode: AccuracyMode,
    /// practical-mode inner accuracy for the harmonic basis
    pub eps_prime: f64,
    /// practical-mode override for the boundary projection delta
    pub delta_override: Option<f64>,
    /// cap on Chebyshev degree / PCG iterations (solver.max_iters)
    pub max_iters: usize,
    /// theory-mode exponent c of the boundary delta formula; None
    /// derives it from the P_Gamma bound chain
    pub c_exponent: Option<f64>,
    /// replace ~Pi_bd by ~Pi_cyc when beta = 0 (the special-case path)
    pub beta_zero_fast_path: bool,
    pub dense_cap: usize,
    /// continue in practical mode when a theory schedule underflows
    pub allow_practical_fallback: bool,
    pub deterministic: bool,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps: 0.05,
            mode: AccuracyMode::Practical,
            eps_prime: 1e-10,
            delta_override: None,
            max_iters: 500_000,
            c_exponent: None,
            beta_zero_fast_path: false,
            dense_cap: oracle::DEFAULT_DENSE_CAP,
            allow_practical_fallback: false,
            deterministic: true,
            seed: 0,
        }
    }
}

/// Power-iteration and dense spectral estimates for the up-Laplacians.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralEstimates {
    pub lambda_max_k_up: f64,
    /// 3 n_2(K): each triangle boundary has exactly 3 edges
    pub lambda_max_bound: f64,
    pub lambda_min_k_up: Option<f64>,
    pub lambda_min_x_up: Option<f64>,
    /// condition number estimate with the 2x safety factor
    pub kappa_hat: Option<f64>,
}

/// lambda_max(L1up) by power iteration on the matrix-free product.
pub fn power_lambda_max_up(complex: &EmbeddedComplex, scope: Scope, iters: usize) -> Result<f64> {
    let d2 = complex.boundary(2, scope)?;
    if d2.cols == 0 {
        return Ok(0.0);
    }
    let n1 = d2.rows;
    let mut v: Vec<f64> = (0..n1)
        .map(|i| 1.0 + ((i * 2654435761) % 997) as f64 / 997.0)
        .collect();
    let mut lam = 0.0f64;
    let mut w2 = vec![0.0; d2.cols];
    let mut w1 = vec![0.0; n1];
    for _ in 0..iters {
        d2.apply_transpose_raw(&v, &mut w2);
        d2.apply_raw(&w2, &mut w1);
        let num: f64 = v.iter().zip(&w1).map(|(a, b)| a * b).sum();
        let den: f64 = v.iter().map(|a| a * a).sum();
        if den == 0.0 {
            return Err(Error::IterationStalled(iters));
        }
        let rho = num / den;
        if rho.is_nan() {
            return Err(Error::IterationStalled(iters));
        }
        if (rho - lam).abs() <= 1e-9 * rho.max(1.0) {
            return Ok(rho);
        }
        lam = rho;
        let nw = w1.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nw == 0.0 {
            return Ok(0.0);
        }
        for (vi, wi) in v.iter_mut().zip(&w1) {
            *vi = wi / nw;
        }
    }
    Ok(lam)
}

/// Assembles the estimates: power iteration for lambda_max, dense SVD
/// for the smallest nonzero eigenvalues at desk scale, and the
/// condition number with a 2x safety factor.
pub fn spectral_estimates(complex: &EmbeddedComplex, dense_cap: usize) -> Result<SpectralEstimates> {
    let lambda_max_k_up = power_lambda_max_up(complex, Scope::K, 300)?;
    let lambda_max_bound = 3.0 * complex.k_scope(2).len() as f64;
    let dense_ok = complex.total_simplices() <= dense_cap;
    let (lambda_min_k_up, lambda_min_x_up) = if dense_ok {
        let d2k = oracle::boundary_matrix(&complex.boundary(2, Scope::K)?);
        let upk = &d2k * d2k.transpose();
        let (_, mink) = oracle::psd_spectrum_extremes(&upk);
        let d2x = oracle::boundary_matrix(&complex.boundary(2, Scope::X)?);
        let upx = &d2x * d2x.transpose();
        let (_, minx) = oracle::psd_spectrum_extremes(&upx);
        (Some(mink), Some(minx))
    } else {
        (None, None)
    };
    let kappa_hat = lambda_min_k_up.and_then(|m| {
        if m > 0.0 && lambda_max_k_up > 0.0 {
            Some(2.0 * lambda_max_k_up / m)
        } else {
            None
        }
    });
    Ok(SpectralEstimates {
        lambda_max_k_up,
        lambda_max_bound,
        lambda_min_k_up,
        lambda_min_x_up,
        kappa_hat,
    })
}

/// Accuracy parameters derived during prepare, echoed in reports.
#[derive(Debug, Clone, Serialize)]
pub struct Schedule {
    pub eps: f64,
    pub mode: AccuracyMode,
    pub eps_prime: f64,
    pub delta_bd: f64,
    pub eps_up_inner: f64,
    pub up_scale: f64,
    /// theory-mode values computed for the report even when practical
    /// execution is configured
    pub theory_eps_prime_log10: Option<f64>,
    pub theory_delta_log10: Option<f64>,
}

/// All prepared operators for one (X, K) instance.
pub struct SolverContext {
    pub complex: EmbeddedComplex,
    pub sequence: CollapsingSequence,
    pub t: TComplex,
    pub u: UOp,
    pub skeleton: GraphContext,
    pub dual_k: GraphContext,
    pub bundle: BasisBundle,
    pub corr: GammaCorrection,
    pub basis: HarmonicBasisApprox,
    pub spectral: SpectralEstimates,
    pub schedule: Schedule,
    pub config: SolverConfig,
}

impl SolverContext {
    pub fn prepare(instance: Instance, config: SolverConfig) -> Result<Self> {
        let complex = instance.complex;
        let sequence = normalize(&complex, &instance.sequence)?;
        let t = build_t(&complex, config.dense_cap)?;
        let u = UOp::new(&complex, &sequence, &t)?;
        let c_op = CohomologyOp::new(&complex, &sequence, &t)?;
        let bundle = build_bases(&complex, &c_op, config.dense_cap)?;
        let skeleton = GraphContext::new(Graph::skeleton(&complex, Scope::K), config.max_iters)?;
        let dual = build_dual_graph(&complex, Scope::K)?;
        if dual.graph.n_edges() != complex.k_scope(2).len() {
            return Err(Error::Format(
                "dual graph edges do not match K triangles".into(),
            ));
        }
        let dual_k = GraphContext::new(dual.graph, config.max_iters)?;
        let corr = GammaCorrection::new(&bundle, skeleton.n_edges())?;
        let spectral = spectral_estimates(&complex, config.dense_cap)?;

        let beta = bundle.gamma.beta();
        // delta-independence floor for theory-mode schedules: the
        // conservative minimum of both corollary variants
        let theory_delta_indep = {
            let report = if complex.total_simplices() <= config.dense_cap {
                Some(crate::bases::delta_independence_report(
                    &complex,
                    &bundle.p,
                    config.dense_cap,
                )?)
            } else {
                None
            };
            report.map(|r| {
                let a = r.corollary_delta_l1up;
                let b = r.corollary_delta_l2up;
                if a == 0.0 || b == 0.0 {
                    a.max(b)
                } else {
                    a.min(b)
                }
            })
        };

        let theory_eps_prime_value = theory_delta_indep
            .filter(|&d| d > 0.0)
            .map(|d| theory_eps_prime(d, beta, config.eps));
        let theory_eps_prime_log10 = theory_delta_indep.filter(|&d| d > 0.0).map(|d| {
            (beta as f64 + 1.0) * (d / (8.0 * beta.max(1) as f64)).log10() + config.eps.log10()
        });

        let eps_prime = match (config.mode, theory_eps_prime_value) {
            (AccuracyMode::Practical, _) => config.eps_prime,
            (AccuracyMode::Theory, Some(Ok(v))) => v.max(1e-13),
            (AccuracyMode::Theory, Some(Err(e))) => {
                if config.allow_practical_fallback {
                    config.eps_prime
                } else {
                    return Err(e);
                }
            }
            (AccuracyMode::Theory, None) => {
                if config.allow_practical_fallback {
                    config.eps_prime
                } else {
                    return Err(Error::TooLarge {
                        size: complex.total_simplices(),
                        cap: config.dense_cap,
                    });
                }
            }
        };
        let basis = harmonic_basis(&skeleton, &bundle.p, eps_prime, config.mode)?;

        // up-solver inner accuracy from the condition estimate
        let eps_up_inner = match spectral.kappa_hat {
            Some(k) => config.eps / (2.0 * (3.0 * k + 1.0)),
            None => config.eps / 16.0,
        };
        let up_scale = match spectral.kappa_hat {
            Some(k) => 1.0 / (1.0 + k * eps_up_inner),
            None => 1.0 / (1.0 + config.eps / 8.0),
        };

        // boundary projection delta
        let lambda_min_x = spectral.lambda_min_x_up.unwrap_or(1.0);
        let c_eff = config.c_exponent.unwrap_or_else(|| {
            crate::boundary::effective_c_exponent(
                &corr,
                skeleton.n_edges(),
                complex.count(2),
                lambda_min_x,
            )
        });
        let theory_delta_value = crate::boundary::theory_delta(
            skeleton.n_edges(),
            complex.count(2),
            lambda_min_x,
            beta,
            c_eff,
            eps_up_inner / 2.0,
        );
        let theory_delta_log10 = match &theory_delta_value {
            Ok(v) => Some(v.log10()),
            Err(Error::EpsilonUnderflow { log10 }) => Some(*log10),
            Err(_) => None,
        };
        let delta_bd = match config.mode {
            AccuracyMode::Practical => config.delta_override.unwrap_or_else(|| {
                practical_delta(&skeleton, &corr, eps_up_inner / 2.0)
            }),
            AccuracyMode::Theory => match theory_delta_value {
                Ok(v) => v.max(1e-13),
                Err(e) => {
                    if config.allow_practical_fallback {
                        practical_delta(&skeleton, &corr, eps_up_inner / 2.0)
                    } else {
                        return Err(e);
                    }
                }
            },
        };

        let schedule = Schedule {
            eps: config.eps,
            mode: config.mode,
            eps_prime,
            delta_bd,
            eps_up_inner,
            up_scale,
            theory_eps_prime_log10,
            theory_delta_log10,
        };
        Ok(SolverContext {
            complex,
            sequence,
            t,
            u,
            skeleton,
            dual_k,
            bundle,
            corr,
            basis,
            spectral,
            schedule,
            config,
        })
    }

    pub fn beta(&self) -> usize {
        self.bundle.gamma.beta()
    }

    pub fn n1_k(&self) -> usize {
        self.skeleton.n_edges()
    }

    /// The boundary projection at the prepared delta, rescaled to the
    /// one-sided form needed by the composition lemma.
    fn scaled_bd(&self) -> Result<ScaledBd<'_>> {
        Ok(ScaledBd {
            inner: BdOrCyc::Bd(ProjBd::new(
                &self.skeleton,
                &self.corr,
                &self.basis,
                self.schedule.delta_bd,
            )?),
            scale: 1.0 / (1.0 + self.schedule.eps_up_inner / 2.0),
        })
    }

    fn cyc_as_bd(&self) -> Result<ScaledBd<'_>> {
        Ok(ScaledBd {
            inner: BdOrCyc::Cyc(self.skeleton.cyc_projection(self.schedule.eps_up_inner)?),
            scale: 1.0,
        })
    }

    fn image_projection(&self) -> Result<ScaledBd<'_>> {
        if self.beta() == 0 && self.config.beta_zero_fast_path {
            self.cyc_as_bd()
        } else {
            self.scaled_bd()
        }
    }

    /// Approximate projection of 2-chains onto im(d2^T[K]): the cycle
    /// projection of the dual graph of K pulled back through the
    /// triangle / dual-edge bijection.
    pub fn proj_ker_perp_d2(&self, eps: f64, w: &Chain) -> Result<Chain> {
        w.expect(2, Scope::K, self.dual_k.n_edges())?;
        let cyc = self.dual_k.cyc_projection(eps)?;
        Ok(Chain::from_values(2, Scope::K, cyc.apply_vec(&w.values)))
    }

    /// Approximate (L1up[K])^+ via the composition
    /// scale * ~Pi_bd U^T ~Pi_cyc* U ~Pi_bd.
    pub fn up_solve(&self, b: &Chain) -> Result<Chain> {
        b.expect(1, Scope::K, self.n1_k())?;
        let op = self.up_operator()?;
        Ok(Chain::from_values(1, Scope::K, op.apply_vec(&b.values)))
    }

    pub fn up_operator(&self) -> Result<UpSolveOp<'_>> {
        Ok(UpSolveOp {
            bd: self.image_projection()?,
            u: &self.u,
            ker_perp: self.dual_k.cyc_projection(self.schedule.eps_up_inner)?,
            scale: self.schedule.up_scale,
        })
    }

    /// Approximate (L1down[K])^+.
    pub fn down_solve(&self, b: &Chain) -> Result<Chain> {
        b.expect(1, Scope::K, self.n1_k())?;
        let down = self.skeleton.down_solver(self.config.eps)?;
        Ok(Chain::from_values(1, Scope::K, down.apply_vec(&b.values)))
    }

    /// laplacian_solve = down_solve + up_solve: the one-sided sandwich
    /// (1-eps) L1^+ <= M <= L1^+ at desk scale.
    pub fn laplacian_solve(&self, b: &Chain) -> Result<Chain> {
        b.expect(1, Scope::K, self.n1_k())?;
        let op = self.laplacian_operator()?;
        Ok(Chain::from_values(1, Scope::K, op.apply_vec(&b.values)))
    }

    pub fn laplacian_operator(&self) -> Result<LaplacianSolveOp<'_>> {
        Ok(LaplacianSolveOp {
            up: self.up_operator()?,
            down: self.skeleton.down_solver(self.config.eps)?,
        })
    }

    /// Approximate Hodge split of a 1-chain of K using the three
    /// prepared projections. The parts recombine to x only within the
    /// combined operator tolerances; callers report the residual.
    pub fn hodge_decompose(&self, eps: f64, x: &Chain) -> Result<(Chain, Chain, Chain)> {
        x.expect(1, Scope::K, self.n1_k())?;
        let bd = ProjBd::new(&self.skeleton, &self.corr, &self.basis, self.schedule.delta_bd)?;
        let cbd = self.skeleton.cbd_projection(eps)?;
        let hr = crate::harmonic::ProjHr {
            basis: &self.basis,
            n: self.n1_k(),
        };
        let xb = Chain::from_values(1, Scope::K, bd.apply_vec(&x.values));
        let xh = Chain::from_values(1, Scope::K, hr.apply_vec(&x.values));
        let xc = Chain::from_values(1, Scope::K, cbd.apply_vec(&x.values));
        Ok((xb, xh, xc))
    }
}

/// Either the boundary projection or (beta = 0 path) the cycle
/// projection, with a one-sided rescale.
enum BdOrCyc<'a> {
    Bd(ProjBd<'a>),
    Cyc(crate::graph_solver::ProjCyc<'a>),
}

pub struct ScaledBd<'a> {
    inner: BdOrCyc<'a>,
    scale: f64,
}

impl LinOp for ScaledBd<'_> {
    fn rows(&self) -> usize {
        match &self.inner {
            BdOrCyc::Bd(b) => b.rows(),
            BdOrCyc::Cyc(c) => c.rows(),
        }
    }
    fn cols(&self) -> usize {
        self.rows()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        match &self.inner {
            BdOrCyc::Bd(b) => b.apply(x, out),
            BdOrCyc::Cyc(c) => c.apply(x, out),
        }
        for v in out.iter_mut() {
            *v *= self.scale;
        }
    }
    fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        self.apply(x, out);
    }
}

pub struct UpSolveOp<'a> {
    bd: ScaledBd<'a>,
    u: &'a UOp,
    ker_perp: crate::graph_solver::ProjCyc<'a>,
    scale: f64,
}

impl LinOp for UpSolveOp<'_> {
    fn rows(&self) -> usize {
        self.bd.rows()
    }
    fn cols(&self) -> usize {
        self.bd.rows()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let mut a = vec![0.0; self.rows()];
        self.bd.apply(x, &mut a);
        let w = self.u.apply_vec(&a);
        let wp = self.ker_perp.apply_vec(&w);
        let ut = self.u.apply_transpose_vec(&wp);
        self.bd.apply(&ut, out);
        for v in out.iter_mut() {
            *v *= self.scale;
        }
    }
    fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        self.apply(x, out);
    }
}

pub struct LaplacianSolveOp<'a> {
    up: UpSolveOp<'a>,
    down: crate::graph_solver::DownSolve<'a>,
}

impl LinOp for LaplacianSolveOp<'_> {
    fn rows(&self) -> usize {
        self.up.rows()
    }
    fn cols(&self) -> usize {
        self.up.rows()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.up.apply(x, out);
        let d = self.down.apply_vec(x);
        for (o, v) in out.iter_mut().zip(&d) {
            *o += v;
        }
    }
    fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        self.apply(x, out);
    }
}
