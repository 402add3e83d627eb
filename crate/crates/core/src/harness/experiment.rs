use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{truncated_svd, ColumnIndexSet, DenseMatrix};
use crate::solvers::{
    torp, torp_bin, torp_g, torp_n, RecoveryResult, Termination, TorpConfig, TorpGConfig,
    TorpNConfig,
};
use crate::synth::{generate, InlierModel, InstanceParams, ProblemInstance};

use super::io::{load_instance, parse_value};
use super::metrics::{compute, MetricsRow};

/// Environment variable capping trial parallelism; unset or 0 runs trials
/// sequentially.
pub const THREADS_ENV: &str = "TORP_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SolverChoice {
    VanillaSvd,
    Torp,
    TorpN,
    TorpBin,
    TorpG,
}

impl SolverChoice {
    pub const ALL: [SolverChoice; 5] = [
        SolverChoice::VanillaSvd,
        SolverChoice::Torp,
        SolverChoice::TorpN,
        SolverChoice::TorpBin,
        SolverChoice::TorpG,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverChoice::VanillaSvd => "vanilla_svd",
            SolverChoice::Torp => "torp",
            SolverChoice::TorpN => "torp_n",
            SolverChoice::TorpBin => "torp_bin",
            SolverChoice::TorpG => "torp_g",
        }
    }
}

impl fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown solver {s:?} (expected one of vanilla_svd, torp, torp_n, torp_bin, torp_g)"
                ))
            })
    }
}

/// Solver knobs shared by all solvers. Anything left unset is derived from
/// the instance: ρ = 1/(128 μ² r) and η = 2 μ √(r/n) with the measured μ, and
/// the instance noise level for `torp_g`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverParams {
    pub rho: Option<f64>,
    pub eta: Option<f64>,
    pub epsilon: f64,
    pub iterations: Option<usize>,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub max_iterations: Option<usize>,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            rho: None,
            eta: None,
            epsilon: 1e-6,
            iterations: None,
            mu: None,
            sigma: None,
            max_iterations: None,
        }
    }
}

impl SolverParams {
    /// Copy with the fields `solver` does not read cleared.
    pub fn for_solver(&self, solver: SolverChoice) -> Self {
        let mut p = self.clone();
        if matches!(solver, SolverChoice::VanillaSvd | SolverChoice::TorpG) {
            p.rho = None;
            p.iterations = None;
        }
        if !matches!(solver, SolverChoice::TorpN | SolverChoice::TorpBin) {
            p.eta = None;
        }
        if solver != SolverChoice::TorpG {
            p.sigma = None;
            p.max_iterations = None;
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InstanceSource {
    /// Generate a fresh instance per trial; trial `i` uses `seed + i`.
    Generate(InstanceParams),
    /// Directory written by `save_instance`; every trial reuses it.
    Load(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    pub solver: SolverChoice,
    pub params: SolverParams,
    pub trials: usize,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(instance: InstanceSource, solver: SolverChoice) -> Self {
        Self {
            instance,
            solver,
            params: SolverParams::default(),
            trials: 1,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if let InstanceSource::Generate(p) = &self.instance {
            p.validate()?;
        }
        let p = &self.params;
        if !(p.epsilon > 0.0 && p.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                p.epsilon
            )));
        }
        let ranks_only = self.solver == SolverChoice::VanillaSvd;
        let uses_eta = matches!(self.solver, SolverChoice::TorpN | SolverChoice::TorpBin);
        let uses_g = self.solver == SolverChoice::TorpG;
        let mismatch = |key: &str| {
            Err(Error::InvalidParameter(format!(
                "{key} does not apply to solver {}",
                self.solver
            )))
        };
        if ranks_only && (p.rho.is_some() || p.iterations.is_some()) {
            return mismatch("rho/iterations");
        }
        if !uses_eta && p.eta.is_some() {
            return mismatch("eta");
        }
        if !uses_g && (p.sigma.is_some() || p.max_iterations.is_some()) {
            return mismatch("solver sigma/max_iterations");
        }
        if uses_g && (p.rho.is_some() || p.iterations.is_some()) {
            return mismatch("rho/iterations");
        }
        Ok(())
    }

    /// Builds a config from `key=value` pairs. Recognised keys: `solver`,
    /// `trials`, `out`, `instance` (a saved instance directory) or the
    /// generator keys `d n r alpha outlier_scale sigma inlier_model seed`,
    /// and the solver keys `rho eta epsilon iterations mu solver_sigma
    /// max_iterations`.
    pub fn from_key_values(kv: &BTreeMap<String, String>) -> Result<Self> {
        const KNOWN: [&str; 19] = [
            "solver",
            "trials",
            "out",
            "instance",
            "d",
            "n",
            "r",
            "alpha",
            "outlier_scale",
            "sigma",
            "inlier_model",
            "seed",
            "rho",
            "eta",
            "epsilon",
            "iterations",
            "mu",
            "solver_sigma",
            "max_iterations",
        ];
        if let Some(k) = kv.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return Err(Error::InvalidParameter(format!("unknown config key {k:?}")));
        }
        fn opt<T: FromStr>(kv: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
            kv.get(key).map(|v| parse_value(v, key)).transpose()
        }
        let need = |key: &str| {
            kv.get(key)
                .ok_or_else(|| Error::InvalidParameter(format!("missing config key {key:?}")))
        };

        let solver: SolverChoice = need("solver")?.parse()?;
        let instance = match kv.get("instance") {
            Some(path) => InstanceSource::Load(PathBuf::from(path)),
            None => {
                let mut p = InstanceParams::new(
                    parse_value(need("d")?, "d")?,
                    parse_value(need("n")?, "n")?,
                    parse_value(need("r")?, "r")?,
                    opt(kv, "alpha")?.unwrap_or(0.0),
                    opt(kv, "seed")?.unwrap_or(0),
                );
                if let Some(s) = opt(kv, "outlier_scale")? {
                    p = p.with_outlier_scale(s);
                }
                if let Some(s) = opt::<f64>(kv, "sigma")? {
                    if s > 0.0 {
                        p = p.with_gaussian_noise(s);
                    }
                }
                if let Some(m) = kv.get("inlier_model") {
                    p = p.with_inlier_model(InlierModel::parse(m)?);
                }
                InstanceSource::Generate(p)
            }
        };
        let params = SolverParams {
            rho: opt(kv, "rho")?,
            eta: opt(kv, "eta")?,
            epsilon: opt(kv, "epsilon")?.unwrap_or(1e-6),
            iterations: opt(kv, "iterations")?,
            mu: opt(kv, "mu")?,
            sigma: opt(kv, "solver_sigma")?,
            max_iterations: opt(kv, "max_iterations")?,
        };
        let cfg = Self {
            instance,
            solver,
            params,
            trials: opt(kv, "trials")?.unwrap_or(1),
            output: kv.get("out").map(PathBuf::from),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `SVD_r(M*)` with no outlier handling.
pub fn vanilla_svd(m: &DenseMatrix, r: usize) -> Result<RecoveryResult> {
    let svd = truncated_svd(m, r)?;
    let degenerate = svd.is_rank_deficient();
    Ok(RecoveryResult {
        subspace_u: svd.u,
        estimated_support: ColumnIndexSet::empty(),
        trace: Vec::new(),
        termination: if degenerate {
            Termination::Degenerate
        } else {
            Termination::Completed
        },
        degenerate,
        inner_loop_runs: 1,
        final_reference_residual: None,
    })
}

/// Runs `solver` on `inst` with parameters filled in from the instance.
pub fn run_solver(
    solver: SolverChoice,
    params: &SolverParams,
    inst: &ProblemInstance,
) -> Result<RecoveryResult> {
    let m = &inst.m_star;
    let r = inst.params.r;
    let n = inst.n();
    let mu = params.mu.unwrap_or(inst.measured_mu).max(1.0);
    let rho = params.rho.unwrap_or(1.0 / (128.0 * mu * mu * r as f64));
    match solver {
        SolverChoice::VanillaSvd => vanilla_svd(m, r),
        SolverChoice::Torp => {
            let mut cfg = TorpConfig::new(r, rho, params.epsilon);
            cfg.iterations = params.iterations;
            torp(m, &cfg)
        }
        SolverChoice::TorpN | SolverChoice::TorpBin => {
            let eta = params
                .eta
                .unwrap_or(2.0 * mu * (r as f64 / n as f64).sqrt());
            let mut cfg = TorpNConfig::new(r, eta, rho, params.epsilon);
            cfg.inner_iterations = params.iterations;
            if solver == SolverChoice::TorpN {
                torp_n(m, &cfg)
            } else {
                torp_bin(m, &cfg)
            }
        }
        SolverChoice::TorpG => {
            let mut cfg = TorpGConfig::new(r, mu, params.sigma.unwrap_or(inst.params.noise_sigma));
            cfg.max_iterations = params.max_iterations;
            torp_g(m, &cfg)
        }
    }
}

/// Solves `inst` and scores the answer.
pub fn run_trial(
    solver: SolverChoice,
    params: &SolverParams,
    inst: &ProblemInstance,
) -> Result<MetricsRow> {
    let start = Instant::now();
    let res = run_solver(solver, params, inst)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    compute(
        solver.as_str(),
        inst,
        &res.subspace_u,
        &res.estimated_support,
        res.iterations(),
        wall_ms,
        res.termination,
    )
}

/// Thread count from [`THREADS_ENV`]; 0 means sequential.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

/// Evaluates `f` over `jobs`, in parallel when [`THREADS_ENV`] is positive.
/// Output order matches `jobs`.
pub(crate) fn map_jobs<J, T, F>(jobs: Vec<J>, f: F) -> Result<Vec<T>>
where
    J: Send,
    T: Send,
    F: Fn(J) -> Result<T> + Send + Sync,
{
    match thread_count() {
        0 => jobs.into_iter().map(f).collect(),
        threads => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            pool.install(|| jobs.into_par_iter().map(f).collect())
        }
    }
}

pub fn load_or_generate(source: &InstanceSource, trial: usize) -> Result<ProblemInstance> {
    match source {
        InstanceSource::Generate(p) => generate(&p.clone().with_seed(p.seed + trial as u64)),
        InstanceSource::Load(path) => load_instance(path),
    }
}

/// One row per trial, in trial order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    if let InstanceSource::Load(path) = &cfg.instance {
        let inst = load_instance(path)?;
        let jobs: Vec<usize> = (0..cfg.trials).collect();
        return map_jobs(jobs, |_| run_trial(cfg.solver, &cfg.params, &inst));
    }
    let jobs: Vec<usize> = (0..cfg.trials).collect();
    map_jobs(jobs, |t| {
        let inst = load_or_generate(&cfg.instance, t)?;
        run_trial(cfg.solver, &cfg.params, &inst)
    })
}
