//! Command-line front end. [`run`] parses arguments, dispatches, and maps
//! errors to exit codes: 0 on success, 2 on bad input, 3 on a dimension
//! mismatch.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::bench::{self, ExperimentPlan, SolverSpec, SweepPlan};
use crate::error::{Error, Result};
use crate::io;
use crate::penalty::{relaxation_degree, PenaltyKind, PenaltyParams};
use crate::sensing::{coherence, gen_signal, MatrixFamily, SignalDist};
use crate::solver::{relative_error, SolverConfig};
use crate::theory::{rip_bound, stability_constants};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DIMS: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "tlp",
    version,
    about = "Sparse recovery with the transformed-lp penalty"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Recover a sparse vector from a matrix and measurements (or a truth vector).
    Solve(SolveArgs),
    /// Run a success-rate experiment plan and write the summary CSV.
    Bench(BenchArgs),
    /// Run an (a, p) sweep plan and write the heat-table CSV.
    Sweep(BenchArgs),
    /// RIP recovery bound and, given delta_2s, the stability constants.
    RipBound(RipArgs),
    /// Relaxation degree of a penalty in dimension N.
    Rd(RdArgs),
    /// Write a random sensing matrix as CSV.
    GenMatrix(GenMatrixArgs),
    /// Write a random sparse vector, one value per line.
    GenSignal(GenSignalArgs),
    /// Mutual coherence of a matrix file.
    Coherence(CoherenceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Tlp,
    Constrained,
    Lq,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Matrix CSV (`M,N` header line, then rows).
    #[arg(long)]
    pub matrix: PathBuf,
    /// Measurement vector.
    #[arg(long, required_unless_present = "truth")]
    pub y: Option<PathBuf>,
    /// Ground-truth vector; sets `y = A x` when `--y` is absent and adds `rel_err`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "tlp")]
    pub method: Method,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 0.7)]
    pub p: f64,
    /// Exponent of the lq baseline.
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
    /// Solver settings as JSON; flags below take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Target sparsity; defaults to the support size of `--truth`.
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub delta_scale: Option<f64>,
    #[arg(long)]
    pub outer_max: Option<usize>,
    #[arg(long)]
    pub inner_max: Option<usize>,
    /// Include wall time in the output.
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the plan's trials per cell.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Override the plan's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write every trial record as JSON.
    #[arg(long)]
    pub records: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RipArgs {
    #[arg(long)]
    pub a: f64,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long)]
    pub delta2s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RdArgs {
    /// tlp, lp or lap.
    #[arg(long)]
    pub kind: PenaltyKind,
    /// Ignored for lp.
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long)]
    pub p: f64,
    #[arg(long = "N")]
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Gaussian,
    Dct,
}

#[derive(Debug, Args)]
pub struct GenMatrixArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    #[arg(long = "M")]
    pub m: usize,
    #[arg(long = "N")]
    pub n: usize,
    /// Correlation `r` (gaussian) or frequency `F` (dct).
    #[arg(long)]
    pub param: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Scale columns to unit norm.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenSignalArgs {
    #[arg(long = "N")]
    pub n: usize,
    #[arg(long)]
    pub s: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub dist: Dist,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dist {
    Gaussian,
    Rademacher,
}

#[derive(Debug, Args)]
pub struct CoherenceArgs {
    #[arg(long)]
    pub matrix: PathBuf,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::DimensionMismatch(_) => EXIT_DIMS,
        _ => EXIT_INPUT,
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("tlp: {e}");
            exit_code(&e)
        }
    }
}

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Solve(args) => cmd_solve(&args),
        Command::Bench(args) => cmd_bench(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::RipBound(args) => cmd_rip_bound(&args),
        Command::Rd(args) => cmd_rd(&args),
        Command::GenMatrix(args) => cmd_gen_matrix(&args),
        Command::GenSignal(args) => cmd_gen_signal(&args),
        Command::Coherence(args) => cmd_coherence(&args),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable output");
    text.push('\n');
    text
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

/// File config (or defaults) with any flags laid over it.
pub fn solve_config(args: &SolveArgs, truth: Option<&DVector<f64>>) -> Result<SolverConfig> {
    let mut cfg: SolverConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => SolverConfig::default(),
    };
    if let Some(v) = args.kappa {
        cfg.kappa = v;
    }
    if let Some(v) = args.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = args.c {
        cfg.c = v;
    }
    if let Some(v) = args.delta_scale {
        cfg.delta_scale = v;
    }
    if let Some(v) = args.outer_max {
        cfg.outer_max = v;
    }
    if let Some(v) = args.inner_max {
        cfg.inner_max = v;
    }
    if let Some(v) = args.s {
        cfg.s = v;
    }
    if cfg.s == 0 {
        cfg.s = match truth {
            Some(x) => x.iter().filter(|v| **v != 0.0).count(),
            None => return Err(Error::param("target sparsity unknown: pass --s or --truth")),
        };
    }
    Ok(cfg)
}

fn cmd_solve(args: &SolveArgs) -> Result<()> {
    let a = io::read_matrix(&args.matrix)?;
    let truth = args.truth.as_deref().map(io::read_vector).transpose()?;
    if let Some(x0) = &truth {
        if x0.len() != a.ncols() {
            return Err(Error::dims(format!(
                "matrix has {} columns but the truth vector has length {}",
                a.ncols(),
                x0.len()
            )));
        }
    }
    let y = match (&args.y, &truth) {
        (Some(path), _) => io::read_vector(path)?,
        (None, Some(x0)) => &a * x0,
        (None, None) => return Err(Error::param("pass --y or --truth")),
    };
    let cfg = solve_config(args, truth.as_ref())?;
    let spec = match args.method {
        Method::Tlp => SolverSpec::Tlp {
            a: args.a,
            p: args.p,
            kappa: None,
        },
        Method::Constrained => SolverSpec::Constrained {
            a: args.a,
            p: args.p,
            kappa: None,
        },
        Method::Lq => SolverSpec::Lq {
            q: args.q,
            kappa: None,
        },
    };
    spec.validate()?;

    let start = Instant::now();
    let result = spec.solve(&a, &y, &cfg)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;

    let mut doc = json!({
        "method": spec.method(),
        "params": spec,
        "config": cfg,
        "result": result,
    });
    if let Some(x0) = &truth {
        doc["rel_err"] = json!(relative_error(&result.x_vector(), x0));
    }
    if args.timing {
        doc["time_ms"] = json!(elapsed);
    }
    emit(args.out.as_deref(), &to_json(&doc))
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let mut plan: ExperimentPlan = read_json(&args.plan)?;
    if let Some(t) = args.trials {
        plan.trials = t;
    }
    if let Some(s) = args.seed {
        plan.master_seed = s;
    }
    let report = bench::with_workers(|| bench::run_experiment(&plan))??;
    if let Some(path) = &args.records {
        emit(Some(path), &to_json(&report.records))?;
    }
    emit(args.out.as_deref(), &report.to_csv())
}

fn cmd_sweep(args: &BenchArgs) -> Result<()> {
    let mut plan: SweepPlan = read_json(&args.plan)?;
    if let Some(t) = args.trials {
        plan.trials = t;
    }
    if let Some(s) = args.seed {
        plan.master_seed = s;
    }
    let table = bench::with_workers(|| bench::parameter_sweep(&plan))??;
    emit(args.out.as_deref(), &table.to_csv())
}

fn cmd_rip_bound(args: &RipArgs) -> Result<()> {
    let bound = rip_bound(&PenaltyParams::new(args.a, args.p)?, args.gamma)?;
    let mut doc = serde_json::to_value(bound).expect("serializable bound");
    if let Some(d) = args.delta2s {
        let consts = stability_constants(&bound, d)?;
        for (k, v) in serde_json::to_value(consts)
            .expect("serializable constants")
            .as_object()
            .unwrap()
        {
            doc[k] = v.clone();
        }
    }
    emit(None, &to_json(&doc))
}

fn cmd_rd(args: &RdArgs) -> Result<()> {
    // lp ignores `a`, so any positive placeholder validates.
    let a = if args.kind == PenaltyKind::Lp { 1.0 } else { args.a };
    let rd = relaxation_degree(args.kind, &PenaltyParams::new(a, args.p)?, args.n)?;
    emit(None, &format!("{rd}\n"))
}

fn cmd_gen_matrix(args: &GenMatrixArgs) -> Result<()> {
    let family = match args.family {
        Family::Gaussian => MatrixFamily::Gaussian { r: args.param },
        Family::Dct => MatrixFamily::Dct { f: args.param },
    };
    family.validate()?;
    let mut mat = family.generate(args.m, args.n, args.seed)?;
    if args.normalize {
        mat.normalize_columns()?;
    }
    emit(args.out.as_deref(), &io::format_matrix(&mat.entries))
}

fn cmd_gen_signal(args: &GenSignalArgs) -> Result<()> {
    let dist = match args.dist {
        Dist::Gaussian => SignalDist::Gaussian,
        Dist::Rademacher => SignalDist::Rademacher,
    };
    let signal = gen_signal(args.n, args.s, args.seed, dist)?;
    emit(args.out.as_deref(), &io::format_vector(&signal.vector))
}

fn cmd_coherence(args: &CoherenceArgs) -> Result<()> {
    let a = io::read_matrix(&args.matrix)?;
    emit(None, &format!("{}\n", coherence(&a)?))
}
