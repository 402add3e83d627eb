use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::ellipsoid::{fast_pr, EllipsoidSpec};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::synth::{generate, InlierModel, InstanceParams};

use super::experiment::{
    map_jobs, run_experiment, run_trial, ExperimentConfig, SolverChoice, SolverParams,
};
use super::io::{load_matrix, parse_key_values, save_instance, save_matrix};
use super::metrics::{write_csv, MetricsRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "torp",
    version,
    about = "Thresholding-based outlier robust PCA"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic instance into a directory
    Gen(GenArgs),
    /// Run one solver over one or more trials and write CSV
    Run(RunArgs),
    /// Run a grid over alpha, sigma and solvers and write CSV
    Sweep(SweepArgs),
    /// Project the columns of a matrix file onto an ellipsoid
    Project(ProjectArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    r: usize,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Outlier norm as a multiple of the top singular value of L*
    #[arg(long, default_value_t = 1.0)]
    outlier_scale: f64,
    /// Standard deviation of the Gaussian noise
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// gaussian or sphere
    #[arg(long, default_value = "gaussian")]
    inlier_model: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Default)]
struct SolverFlags {
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Incoherence used to derive defaults (measured from L* if omitted)
    #[arg(long)]
    mu: Option<f64>,
    /// Noise level given to torp_g (instance noise level if omitted)
    #[arg(long)]
    solver_sigma: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
}

impl SolverFlags {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("rho", self.rho.map(|v| v.to_string())),
            ("eta", self.eta.map(|v| v.to_string())),
            ("epsilon", self.epsilon.map(|v| v.to_string())),
            ("iterations", self.iterations.map(|v| v.to_string())),
            ("mu", self.mu.map(|v| v.to_string())),
            ("solver_sigma", self.solver_sigma.map(|v| v.to_string())),
            ("max_iterations", self.max_iterations.map(|v| v.to_string())),
        ]
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    /// key=value config file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    solver: Option<String>,
    /// Instance directory written by `gen`
    #[arg(long, conflicts_with_all = ["d", "n", "r", "alpha", "seed", "outlier_scale", "sigma", "inlier_model"])]
    instance: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    outlier_scale: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    inlier_model: Option<String>,
    #[command(flatten)]
    solver_flags: SolverFlags,
    #[arg(long)]
    trials: Option<usize>,
    /// CSV destination (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Values given either as a comma list or as `start:end:count`, evenly
/// spaced with both ends included.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad number {t:?} in {s:?}"))
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [start, end, count] => {
                let (a, b) = (num(start)?, num(end)?);
                let k: usize = count
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad count {count:?} in {s:?}"))?;
                match k {
                    0 => Err(format!("empty range {s:?}")),
                    1 => Ok(Grid(vec![a])),
                    _ => Ok(Grid(
                        (0..k)
                            .map(|i| a + (b - a) * i as f64 / (k - 1) as f64)
                            .collect(),
                    )),
                }
            }
            [list] => list
                .split(',')
                .map(num)
                .collect::<std::result::Result<_, _>>()
                .map(Grid),
            _ => Err(format!("expected a list or start:end:count, got {s:?}")),
        }
    }
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    solver: Vec<String>,
    #[arg(long, default_value = "0")]
    alpha: Grid,
    #[arg(long, default_value = "0")]
    sigma: Grid,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    r: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    outlier_scale: f64,
    #[arg(long, default_value = "gaussian")]
    inlier_model: String,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[command(flatten)]
    solver_flags: SolverFlags,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ProjectArgs {
    /// Orthonormal basis U (d x r matrix file)
    #[arg(long)]
    basis: PathBuf,
    /// Semi-axes Σ, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    semi_axes: Vec<f64>,
    /// Radius b of the coefficient ball
    #[arg(long)]
    bound: f64,
    /// Matrix file whose columns are projected
    #[arg(long)]
    vector: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    eps: f64,
    /// Matrix file for the result (text on stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(msg) => Failure::Usage(msg),
            other => Failure::Runtime(other),
        }
    }
}

/// Entry point of the `torp` binary. Returns the process exit code: 0 on
/// success, 1 on a usage error, 2 on a runtime error.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Project(a) => cmd_project(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

/// Applies the shared generator flags to `base` and validates the result.
fn instance_params(
    base: InstanceParams,
    outlier_scale: f64,
    sigma: f64,
    inlier_model: &str,
) -> Result<InstanceParams> {
    let mut p = base
        .with_outlier_scale(outlier_scale)
        .with_inlier_model(InlierModel::parse(inlier_model)?);
    if sigma > 0.0 {
        p = p.with_gaussian_noise(sigma);
    }
    p.validate()?;
    Ok(p)
}

fn cmd_gen(a: GenArgs) -> std::result::Result<(), Failure> {
    let p = instance_params(
        InstanceParams::new(a.d, a.n, a.r, a.alpha, a.seed),
        a.outlier_scale,
        a.sigma,
        &a.inlier_model,
    )?;
    let inst = generate(&p).map_err(Failure::Runtime)?;
    save_instance(&a.out, &inst).map_err(Failure::Runtime)?;
    Ok(())
}

fn cmd_run(a: RunArgs) -> std::result::Result<(), Failure> {
    let mut kv = match &a.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| Failure::Runtime(Error::io(path, e)))?;
            parse_key_values(&text).map_err(|e| Failure::Usage(e.to_string()))?
        }
        None => BTreeMap::new(),
    };
    if a.instance.is_some() {
        for key in [
            "d",
            "n",
            "r",
            "alpha",
            "seed",
            "outlier_scale",
            "sigma",
            "inlier_model",
        ] {
            kv.remove(key);
        }
    }
    let flags = [
        ("solver", a.solver.clone()),
        (
            "instance",
            a.instance.as_ref().map(|p| p.display().to_string()),
        ),
        ("d", a.d.map(|v| v.to_string())),
        ("n", a.n.map(|v| v.to_string())),
        ("r", a.r.map(|v| v.to_string())),
        ("alpha", a.alpha.map(|v| v.to_string())),
        ("seed", a.seed.map(|v| v.to_string())),
        ("outlier_scale", a.outlier_scale.map(|v| v.to_string())),
        ("sigma", a.sigma.map(|v| v.to_string())),
        ("inlier_model", a.inlier_model.clone()),
        ("trials", a.trials.map(|v| v.to_string())),
        ("out", a.out.as_ref().map(|p| p.display().to_string())),
    ];
    for (k, v) in flags.into_iter().chain(a.solver_flags.pairs()) {
        if let Some(v) = v {
            kv.insert(k.to_string(), v);
        }
    }
    let cfg = ExperimentConfig::from_key_values(&kv)?;
    let rows = run_experiment(&cfg).map_err(Failure::Runtime)?;
    emit_csv(cfg.output.as_deref(), &rows)
}

fn cmd_sweep(a: SweepArgs) -> std::result::Result<(), Failure> {
    let solvers = a
        .solver
        .iter()
        .map(|s| s.parse::<SolverChoice>())
        .collect::<Result<Vec<_>>>()?;
    if a.trials == 0 {
        return Err(Failure::Usage("trials must be at least 1".into()));
    }
    let base = SolverParams {
        rho: a.solver_flags.rho,
        eta: a.solver_flags.eta,
        epsilon: a.solver_flags.epsilon.unwrap_or(1e-6),
        iterations: a.solver_flags.iterations,
        mu: a.solver_flags.mu,
        sigma: a.solver_flags.solver_sigma,
        max_iterations: a.solver_flags.max_iterations,
    };

    // Rows come out ordered by (alpha, sigma, trial, solver).
    let mut jobs = Vec::new();
    for &alpha in &a.alpha.0 {
        for &sigma in &a.sigma.0 {
            for t in 0..a.trials {
                let p = instance_params(
                    InstanceParams::new(a.d, a.n, a.r, alpha, a.seed + t as u64),
                    a.outlier_scale,
                    sigma,
                    &a.inlier_model,
                )?;
                jobs.push(p);
            }
        }
    }
    let rows: Vec<Vec<MetricsRow>> = map_jobs(jobs, |p| {
        let inst = generate(&p)?;
        solvers
            .iter()
            .map(|&s| run_trial(s, &base.for_solver(s), &inst))
            .collect()
    })
    .map_err(Failure::Runtime)?;
    let rows: Vec<MetricsRow> = rows.into_iter().flatten().collect();
    emit_csv(a.out.as_deref(), &rows)
}

fn cmd_project(a: ProjectArgs) -> std::result::Result<(), Failure> {
    let u = load_matrix(&a.basis).map_err(Failure::Runtime)?;
    let x = load_matrix(&a.vector).map_err(Failure::Runtime)?;
    let spec = EllipsoidSpec::new(u, a.semi_axes, a.bound)?;
    let mut columns = Vec::with_capacity(x.cols());
    for j in 0..x.cols() {
        columns.push(fast_pr(&spec, x.column(j), a.eps)?);
    }
    let w = DenseMatrix::from_columns(&columns).map_err(Failure::Runtime)?;
    match a.out {
        Some(path) => save_matrix(path, &w).map_err(Failure::Runtime),
        None => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            for col in &columns {
                let line: Vec<String> = col.iter().map(|v| v.to_string()).collect();
                writeln!(out, "{}", line.join(" "))
                    .map_err(|e| Failure::Runtime(Error::io("<stdout>", e)))?;
            }
            Ok(())
        }
    }
}

fn emit_csv(path: Option<&Path>, rows: &[MetricsRow]) -> std::result::Result<(), Failure> {
    match path {
        Some(path) => {
            let file = File::create(path).map_err(|e| Failure::Runtime(Error::io(path, e)))?;
            write_csv(BufWriter::new(file), rows).map_err(Failure::Runtime)
        }
        None => write_csv(io::stdout().lock(), rows).map_err(Failure::Runtime),
    }
}
