//! Run reports: config echo, per-phase timings, measured-vs-bound
//! records and verification outcomes, JSON-serializable for the CLI.

use serde::Serialize;
use std::time::Instant;

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub ok: bool,
}

impl BoundCheck {
    pub fn le(name: &str, measured: f64, bound: f64) -> Self {
        BoundCheck {
            name: name.into(),
            measured,
            bound,
            ok: measured <= bound,
        }
    }

    pub fn ge(name: &str, measured: f64, bound: f64) -> Self {
        BoundCheck {
            name: name.into(),
            measured,
            bound,
            ok: measured >= bound,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Verification {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct TheoryParams {
    pub eps_prime: Option<f64>,
    pub delta_bd: Option<f64>,
    pub theory_eps_prime_log10: Option<f64>,
    pub theory_delta_log10: Option<f64>,
    pub effective_c_exponent: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub deterministic: bool,
    pub timings_ms: Vec<(String, f64)>,
    pub bounds: Vec<BoundCheck>,
    pub verifications: Vec<Verification>,
    pub theory_params: TheoryParams,
    pub ok: bool,
}

impl RunReport {
    pub fn new(command: &str, config: serde_json::Value, seed: u64, deterministic: bool) -> Self {
        RunReport {
            command: command.into(),
            config,
            seed,
            deterministic,
            timings_ms: Vec::new(),
            bounds: Vec::new(),
            verifications: Vec::new(),
            theory_params: TheoryParams::default(),
            ok: true,
        }
    }

    pub fn bound(&mut self, check: BoundCheck) {
        self.ok &= check.ok;
        self.bounds.push(check);
    }

    pub fn verification(&mut self, name: &str, ok: bool, detail: String) {
        self.ok &= ok;
        self.verifications.push(Verification {
            name: name.into(),
            ok,
            detail,
        });
    }

    pub fn timed<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings_ms
            .push((phase.into(), start.elapsed().as_secs_f64() * 1e3));
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub kind: String,
    pub size_param: usize,
    pub n_simplices: usize,
    pub beta: usize,
    pub prepare_ms: f64,
    pub solve_ms: f64,
    pub total_ms: f64,
    pub cheb_degree_down: usize,
    pub cheb_degree_cbd: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
    /// wall-time growth factors between consecutive rows
    pub growth_factors: Vec<f64>,
}
