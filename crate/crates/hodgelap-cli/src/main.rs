//! Command-line driver: instance generation, validation, bases, Hodge
//! decomposition, solving, audits and benchmarks.
//!
//! Exit codes: 0 ok, 2 validation failure, 3 verification failure,
//! 4 i/o or format failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hodgelap::bases::delta_independence_report;
use hodgelap::boundary::helper_identities_audit;
use hodgelap::chain_ops::norm_estimates;
use hodgelap::collapse::{validate, Validation};
use hodgelap::complex::{Chain, Scope};
use hodgelap::error::Error;
use hodgelap::generate;
use hodgelap::harmonic::{gs_perturbation_audit, AccuracyMode};
use hodgelap::oracle;
use hodgelap::report::{BenchRow, BenchTable, BoundCheck, RunReport};
use hodgelap::scx;
use hodgelap::solver::{SolverConfig, SolverContext};
use rand::SeedableRng;

#[derive(Parser)]
#[command(
    name = "hodgelap",
    about = "1-Laplacian solver and Hodge decomposition for subcomplexes of collapsible complexes in R^3",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// RNG seed echoed in every report
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// deterministic (sequential) reductions; always on, echoed
    #[arg(long, global = true, default_value_t = true)]
    deterministic: bool,
    /// write the JSON report/output here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Practical,
    Theory,
}

impl From<Mode> for AccuracyMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Practical => AccuracyMode::Practical,
            Mode::Theory => AccuracyMode::Theory,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Ball,
    AnnulusInBall,
    PuncturedDisk,
    GridBall,
    DiskInBall,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a collapsible instance with K flags and a validated
    /// collapsing sequence
    Generate {
        #[arg(long, value_enum)]
        kind: Kind,
        /// primary size parameter (tetrahedra / rings / grid cells)
        #[arg(long, default_value_t = 4)]
        size: usize,
        /// requested beta_1(K) for punctured disks and grid balls
        #[arg(long, default_value_t = 1)]
        genus: usize,
        /// output .scx path
        #[arg(long)]
        complex: PathBuf,
    },
    /// Validate a complex file: face closure, K closure and the
    /// collapsing sequence
    Validate {
        #[arg(long)]
        complex: PathBuf,
    },
    /// Homology and cohomology bases with diagnostics
    Bases {
        #[arg(long)]
        complex: PathBuf,
    },
    /// Approximate orthonormal harmonic basis plus the perturbation
    /// audit
    HarmonicBasis {
        #[arg(long)]
        complex: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, value_enum, default_value = "practical")]
        mode: Mode,
        #[arg(long)]
        verify: bool,
    },
    /// Hodge decomposition of a chain file into x_bd, x_hr, x_cbd
    Hodge {
        #[arg(long)]
        complex: PathBuf,
        #[arg(long)]
        chain: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        #[arg(long, value_enum, default_value = "practical")]
        mode: Mode,
        #[arg(long)]
        verify: bool,
    },
    /// Solve L1 x = b approximately
    Solve {
        #[arg(long)]
        complex: PathBuf,
        #[arg(long)]
        chain: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long, value_enum, default_value = "practical")]
        mode: Mode,
        /// run desk-scale oracle verification of the Loewner sandwich
        #[arg(long)]
        verify: bool,
    },
    /// Norm-bound, helper-identity, delta-independence and
    /// Gram-Schmidt audits
    Audit {
        #[arg(long)]
        complex: PathBuf,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Runtime ladder over grid balls
    Bench {
        /// grid parameters, e.g. 7,11,18
        #[arg(long, value_delimiter = ',', default_values_t = vec![7usize, 11, 18])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        /// solves per instance
        #[arg(long, default_value_t = 3)]
        applies: usize,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Format(_) => 4,
        Error::MissingFace { .. }
        | Error::DuplicateSimplex(_)
        | Error::NonSortedTuple(_)
        | Error::KNotFaceClosed { .. }
        | Error::DimOutOfRange(_)
        | Error::ScopeMismatch { .. }
        | Error::SequenceNotNormalized(_)
        | Error::CannotReorder(_)
        | Error::InvalidParams(_)
        | Error::NotACycle { .. } => 2,
        _ => 3,
    }
}

/// Validation failure surfaced through the report path.
#[derive(Debug)]
enum RunFailure {
    Validation(String),
    Verification(String),
    Lib(Error),
}

impl From<Error> for RunFailure {
    fn from(e: Error) -> Self {
        RunFailure::Lib(e)
    }
}

fn emit(out: &Option<PathBuf>, value: &serde_json::Value) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => println!("{}", text),
    }
    Ok(())
}

fn basis_json(set: &hodgelap::bases::BasisSet) -> serde_json::Value {
    serde_json::json!({
        "role": format!("{:?}", set.role),
        "beta": set.beta(),
        "norms": set.norms,
        "max_norm": set.max_norm,
        "delta_independence": set.delta_independence,
        "chains": set.chains.iter().map(|c| c.values.clone()).collect::<Vec<_>>(),
    })
}

fn run(cli: Cli) -> Result<(), RunFailure> {
    let seed = cli.seed;
    let deterministic = cli.deterministic;
    match cli.command {
        Command::Generate {
            kind,
            size,
            genus,
            complex,
        } => {
            let inst = match kind {
                Kind::Ball => generate::ball(size.max(1), seed)?,
                Kind::AnnulusInBall => generate::annulus_in_ball(size.max(2), 2 * size.max(3))?,
                Kind::PuncturedDisk => {
                    generate::punctured_disk(genus, (3 * genus).max(2 * size.max(3)))?
                }
                Kind::GridBall => generate::grid_ball(size.max(1), genus.min(1))?,
                Kind::DiskInBall => generate::disk_in_ball(size.max(1), 2 * size.max(3))?,
            };
            scx::save_instance(&complex, &inst.complex, &inst.sequence)?;
            let mut report = RunReport::new(
                "generate",
                serde_json::json!({"size": size, "genus": genus}),
                seed,
                deterministic,
            );
            report.verification(
                "sequence_validates",
                validate(&inst.complex, &inst.sequence).is_ok(),
                format!(
                    "{} simplices, {} collapse pairs",
                    inst.complex.total_simplices(),
                    inst.sequence.pairs.len()
                ),
            );
            emit(&cli.out, &serde_json::to_value(&report).unwrap())?;
            Ok(())
        }
        Command::Validate { complex } => {
            let inst = scx::load_instance(&complex)?;
            let mut report = RunReport::new("validate", serde_json::json!({}), seed, deterministic);
            let v = validate(&inst.complex, &inst.sequence);
            let detail = match &v {
                Validation::Ok => "ok".to_string(),
                Validation::Violation { index, reason } => {
                    format!("violation at pair {}: {}", index, reason)
                }
            };
            report.verification("collapsing_sequence", v.is_ok(), detail.clone());
            emit(&cli.out, &serde_json::to_value(&report).unwrap())?;
            if !report.ok {
                return Err(RunFailure::Validation(detail));
            }
            Ok(())
        }
        Command::Bases { complex } => {
            let inst = scx::load_instance(&complex)?;
            let ctx = SolverContext::prepare(inst, SolverConfig::default())?;
            let delta =
                delta_independence_report(&ctx.complex, &ctx.bundle.p, ctx.config.dense_cap)?;
            let value = serde_json::json!({
                "homology": basis_json(&ctx.bundle.gamma),
                "cohomology": basis_json(&ctx.bundle.p),
                "delta_independence_report": delta,
            });
            emit(&cli.out, &value)?;
            Ok(())
        }
        Command::HarmonicBasis {
            complex,
            eps,
            mode,
            verify,
        } => {
            let inst = scx::load_instance(&complex)?;
            let config = SolverConfig {
                eps,
                mode: mode.into(),
                ..SolverConfig::default()
            };
            let mut report = RunReport::new(
                "harmonic-basis",
                serde_json::to_value(&config).unwrap(),
                seed,
                deterministic,
            );
            let ctx = SolverContext::prepare(inst, config)?;
            report.theory_params.eps_prime = Some(ctx.schedule.eps_prime);
            report.theory_params.theory_eps_prime_log10 = ctx.schedule.theory_eps_prime_log10;
            let vectors: Vec<Vec<f64>> = ctx
                .basis
                .vectors
                .iter()
                .map(|v| v.iter().copied().collect())
                .collect();
            report.bound(BoundCheck::le(
                "orthonormality_defect",
                ctx.basis.orthonormality_defect(),
                1e-12,
            ));
            if verify && ctx.complex.total_simplices() <= ctx.config.dense_cap {
                let achieved = verify_harmonic_span(&ctx)?;
                report.bound(BoundCheck::le("span_angle_vs_oracle", achieved, eps));
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let beta = ctx.beta().clamp(1, 3);
            let audit = gs_perturbation_audit(beta, 0.3, 1e-8, 50, 12, &mut rng);
            report.verification(
                "gs_perturbation_audit",
                audit.violations == 0,
                format!(
                    "{} trials, {} violations",
                    audit.trials.len(),
                    audit.violations
                ),
            );
            let ok = report.ok;
            let value = serde_json::json!({
                "report": report,
                "basis": vectors,
            });
            emit(&cli.out, &value)?;
            if !ok {
                return Err(RunFailure::Verification("harmonic basis checks failed".into()));
            }
            Ok(())
        }
        Command::Hodge {
            complex,
            chain,
            eps,
            mode,
            verify,
        } => {
            let inst = scx::load_instance(&complex)?;
            let x = scx::load_chain(&chain)?;
            let config = SolverConfig {
                eps,
                mode: mode.into(),
                ..SolverConfig::default()
            };
            let mut report = RunReport::new(
                "hodge",
                serde_json::to_value(&config).unwrap(),
                seed,
                deterministic,
            );
            let ctx = SolverContext::prepare(inst, config)?;
            let parts = report.timed("hodge_decompose", || ctx.hodge_decompose(eps, &x));
            let (xb, xh, xc) = parts?;
            let mut recombined = xb.clone();
            recombined.axpy(1.0, &xh);
            recombined.axpy(1.0, &xc);
            let mut residual = x.clone();
            residual.axpy(-1.0, &recombined);
            report.bound(BoundCheck::le(
                "recombination_residual_rel",
                residual.norm() / x.norm().max(1e-300),
                3.0 * eps,
            ));
            if verify && ctx.complex.total_simplices() <= ctx.config.dense_cap {
                let (ob, oh, oc) = oracle::exact_hodge(&ctx.complex, &x, ctx.config.dense_cap)?;
                for (name, approx, exact) in
                    [("bd", &xb, &ob), ("hr", &xh, &oh), ("cbd", &xc, &oc)]
                {
                    let mut d = approx.clone();
                    d.axpy(-1.0, exact);
                    report.bound(BoundCheck::le(
                        &format!("{}_error_rel_input", name),
                        d.norm() / x.norm().max(1e-300),
                        eps,
                    ));
                }
            }
            let ok = report.ok;
            let value = serde_json::json!({
                "report": report,
                "x_bd": xb.values,
                "x_hr": xh.values,
                "x_cbd": xc.values,
            });
            emit(&cli.out, &value)?;
            if !ok {
                return Err(RunFailure::Verification("hodge checks failed".into()));
            }
            Ok(())
        }
        Command::Solve {
            complex,
            chain,
            eps,
            mode,
            verify,
        } => {
            let inst = scx::load_instance(&complex)?;
            let b = scx::load_chain(&chain)?;
            let config = SolverConfig {
                eps,
                mode: mode.into(),
                ..SolverConfig::default()
            };
            let mut report = RunReport::new(
                "solve",
                serde_json::to_value(&config).unwrap(),
                seed,
                deterministic,
            );
            let ctx = report.timed("prepare", || SolverContext::prepare(inst, config))?;
            report.theory_params.eps_prime = Some(ctx.schedule.eps_prime);
            report.theory_params.delta_bd = Some(ctx.schedule.delta_bd);
            report.theory_params.theory_eps_prime_log10 = ctx.schedule.theory_eps_prime_log10;
            report.theory_params.theory_delta_log10 = ctx.schedule.theory_delta_log10;
            let x = report.timed("laplacian_solve", || ctx.laplacian_solve(&b))?;
            let ops = hodgelap::complex::LaplacianOps::new(&ctx.complex, Scope::K)?;
            let lx = ops.apply(hodgelap::complex::LaplacianKind::L1, &x)?;
            let mut res = b.clone();
            res.axpy(-1.0, &lx);
            report.verification(
                "solve_completed",
                true,
                format!(
                    "||L1 x - b|| / ||b|| = {:.3e} (includes any kernel component of b)",
                    res.norm() / b.norm().max(1e-300)
                ),
            );
            if verify && ctx.complex.total_simplices() <= ctx.config.dense_cap {
                let margins = report.timed("oracle_verify", || verify_solver_sandwich(&ctx))?;
                report.bound(BoundCheck::ge("loewner_lower_margin", margins.0, -1e-9));
                report.bound(BoundCheck::ge("loewner_upper_margin", margins.1, -1e-9));
            }
            let ok = report.ok;
            let value = serde_json::json!({
                "report": report,
                "solution": x.values,
            });
            emit(&cli.out, &value)?;
            if !ok {
                return Err(RunFailure::Verification("solver sandwich failed".into()));
            }
            Ok(())
        }
        Command::Audit { complex, trials } => {
            let inst = scx::load_instance(&complex)?;
            let ctx = SolverContext::prepare(inst, SolverConfig::default())?;
            let mut report = RunReport::new(
                "audit",
                serde_json::json!({"trials": trials}),
                seed,
                deterministic,
            );

            let c_op =
                hodgelap::chain_ops::CohomologyOp::new(&ctx.complex, &ctx.sequence, &ctx.t)?;
            let lambda_min_x = ctx.spectral.lambda_min_x_up.unwrap_or(0.0);
            let norms = norm_estimates(&ctx.complex, &c_op, lambda_min_x);
            report.bound(BoundCheck::le(
                "squeeze_norm",
                norms.squeeze_est,
                norms.squeeze_bound,
            ));
            report.bound(BoundCheck::le("fill_norm", norms.fill_est, norms.fill_bound));
            report.bound(BoundCheck::le("c_norm", norms.c_est, norms.c_bound));

            let helper = helper_identities_audit(
                &ctx.complex,
                &ctx.skeleton,
                &ctx.corr,
                lambda_min_x.max(1e-300),
                ctx.config.dense_cap,
            )?;
            report.verification(
                "helper_identities",
                helper.ok,
                serde_json::to_string(&helper).unwrap_or_default(),
            );

            let delta =
                delta_independence_report(&ctx.complex, &ctx.bundle.p, ctx.config.dense_cap)?;
            report.verification(
                "delta_independence",
                delta.lengths_ok && delta.independence_ok,
                serde_json::to_string(&delta).unwrap_or_default(),
            );

            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut violations = 0usize;
            let mut total = 0usize;
            for beta in 1..=3usize {
                for delta_t in [0.2, 0.5] {
                    let audit =
                        gs_perturbation_audit(beta, delta_t, 1e-8, (trials / 6).max(1), 12, &mut rng);
                    violations += audit.violations;
                    total += audit.trials.len();
                }
            }
            report.verification(
                "gs_perturbation_audit",
                violations == 0,
                format!("{} trials, {} violations", total, violations),
            );
            report.bound(BoundCheck::le(
                "lambda_max_up",
                ctx.spectral.lambda_max_k_up,
                ctx.spectral.lambda_max_bound,
            ));
            let ok = report.ok;
            emit(&cli.out, &serde_json::to_value(&report).unwrap())?;
            if !ok {
                return Err(RunFailure::Verification("audit failed".into()));
            }
            Ok(())
        }
        Command::Bench { sizes, eps, applies } => {
            let mut rows = Vec::new();
            for &k in &sizes {
                let t0 = std::time::Instant::now();
                let inst = generate::grid_ball(k, 1)?;
                let n = inst.complex.total_simplices();
                let config = SolverConfig {
                    eps,
                    ..SolverConfig::default()
                };
                let t1 = std::time::Instant::now();
                let ctx = SolverContext::prepare(inst, config)?;
                let prepare_ms = t1.elapsed().as_secs_f64() * 1e3;
                let n1 = ctx.n1_k();
                let b = Chain::from_values(
                    1,
                    Scope::K,
                    (0..n1).map(|i| ((i * 31 + 7) % 17) as f64 - 8.0).collect(),
                );
                let t2 = std::time::Instant::now();
                for _ in 0..applies {
                    let _ = ctx.laplacian_solve(&b)?;
                }
                let solve_ms = t2.elapsed().as_secs_f64() * 1e3;
                let down = ctx.skeleton.down_solver(eps)?;
                let cbd = ctx.skeleton.cbd_projection(eps)?;
                rows.push(BenchRow {
                    kind: "grid_ball".into(),
                    size_param: k,
                    n_simplices: n,
                    beta: ctx.beta(),
                    prepare_ms,
                    solve_ms,
                    total_ms: t0.elapsed().as_secs_f64() * 1e3,
                    cheb_degree_down: down.degree(),
                    cheb_degree_cbd: cbd.degree(),
                });
            }
            let growth_factors = rows
                .windows(2)
                .map(|w| (w[1].prepare_ms + w[1].solve_ms) / (w[0].prepare_ms + w[0].solve_ms))
                .collect();
            let table = BenchTable {
                rows,
                growth_factors,
            };
            emit(&cli.out, &serde_json::to_value(&table).unwrap())?;
            Ok(())
        }
    }
}

/// Principal angle between the approximate harmonic span and the
/// oracle harmonic space.
fn verify_harmonic_span(ctx: &SolverContext) -> Result<f64, Error> {
    use nalgebra::DMatrix;
    let beta = ctx.beta();
    if beta == 0 {
        return Ok(0.0);
    }
    let projectors = oracle::hodge_projectors(&ctx.complex, Scope::K, ctx.config.dense_cap)?;
    let n1 = ctx.n1_k();
    let mut approx = DMatrix::zeros(n1, beta);
    for (j, v) in ctx.basis.vectors.iter().enumerate() {
        approx.set_column(j, v);
    }
    let exact = oracle::column_space_basis(&projectors.hr);
    let cos = oracle::principal_angle_cosines(&exact, &approx);
    let min_cos = cos.iter().fold(1.0f64, |a, &b| a.min(b));
    Ok((1.0 - min_cos * min_cos).max(0.0).sqrt())
}

/// Loewner margins eig(M - (1-eps) L1^+) and eig(L1^+ - M) on the
/// materialized solver.
fn verify_solver_sandwich(ctx: &SolverContext) -> Result<(f64, f64), Error> {
    let d1 = oracle::boundary_matrix(&ctx.complex.boundary(1, Scope::K)?);
    let d2 = oracle::boundary_matrix(&ctx.complex.boundary(2, Scope::K)?);
    let l1 = &d2 * d2.transpose() + d1.transpose() * &d1;
    let pinv = oracle::pinv(&l1);
    let mat = oracle::materialize(&ctx.laplacian_operator()?);
    let low = &pinv * (1.0 - ctx.config.eps);
    let lower = oracle::loewner_min_eig(&low, &mat, 1e-8)?;
    let upper = oracle::loewner_min_eig(&mat, &pinv, 1e-8)?;
    Ok((lower, upper))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunFailure::Validation(msg)) => {
            eprintln!("validation failure: {}", msg);
            ExitCode::from(2)
        }
        Err(RunFailure::Verification(msg)) => {
            eprintln!("verification failure: {}", msg);
            ExitCode::from(3)
        }
        Err(RunFailure::Lib(e)) => {
            eprintln!("error: {}", e);
            ExitCode::from(exit_code_for(&e))
        }
    }
}
