//! Success-rate experiments over random sensing instances.

use std::fmt::{self, Write as _};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::penalty::PenaltyParams;
use crate::sensing::{gen_signal, stream_seed, MatrixFamily, SignalDist};
use crate::solver::{irls_constrained, irls_lq_baseline, irls_tlp, SolveResult, SolverConfig};

/// Environment variable holding the worker count for parallel runs.
pub const WORKERS_ENV: &str = "TLP_WORKERS";

pub const CSV_HEADER: &str =
    "solver,a,p,kappa,family,M,N,param,sparsity,trials,successes,success_rate,mean_rel_err,mean_time_ms";
pub const HEAT_HEADER: &str = "a,p,sparsity,success_rate";

/// One solver configuration in a plan. `kappa` falls back to the plan config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
pub enum SolverSpec {
    Tlp {
        a: f64,
        p: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kappa: Option<f64>,
    },
    Constrained {
        a: f64,
        p: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kappa: Option<f64>,
    },
    Lq {
        q: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kappa: Option<f64>,
    },
}

impl SolverSpec {
    pub fn method(&self) -> &'static str {
        match self {
            SolverSpec::Tlp { .. } => "tlp",
            SolverSpec::Constrained { .. } => "constrained",
            SolverSpec::Lq { .. } => "lq",
        }
    }

    pub fn a(&self) -> Option<f64> {
        match *self {
            SolverSpec::Tlp { a, .. } | SolverSpec::Constrained { a, .. } => Some(a),
            SolverSpec::Lq { .. } => None,
        }
    }

    /// The exponent: `p` for TLp methods, `q` for the baseline.
    pub fn exponent(&self) -> f64 {
        match *self {
            SolverSpec::Tlp { p, .. } | SolverSpec::Constrained { p, .. } => p,
            SolverSpec::Lq { q, .. } => q,
        }
    }

    fn kappa_override(&self) -> Option<f64> {
        match *self {
            SolverSpec::Tlp { kappa, .. }
            | SolverSpec::Constrained { kappa, .. }
            | SolverSpec::Lq { kappa, .. } => kappa,
        }
    }

    /// `cfg` with this spec's `kappa` applied.
    pub fn config(&self, cfg: &SolverConfig) -> SolverConfig {
        let mut cfg = cfg.clone();
        if let Some(k) = self.kappa_override() {
            cfg.kappa = k;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SolverSpec::Tlp { a, p, .. } | SolverSpec::Constrained { a, p, .. } => {
                PenaltyParams::new(a, p)?;
            }
            SolverSpec::Lq { q, .. } => {
                if !(q > 0.0 && q <= 1.0) {
                    return Err(Error::param(format!("q must lie in (0, 1] (got {q})")));
                }
            }
        }
        match self.kappa_override() {
            Some(k) if !(k.is_finite() && k > 0.0) => {
                Err(Error::param(format!("kappa must be positive (got {k})")))
            }
            _ => Ok(()),
        }
    }

    /// Run the solver on `(a, y)`. `cfg` is used as given; see [`SolverSpec::config`].
    pub fn solve(&self, a: &DMatrix<f64>, y: &DVector<f64>, cfg: &SolverConfig) -> Result<SolveResult> {
        match *self {
            SolverSpec::Tlp { a: pa, p, .. } => irls_tlp(a, y, &PenaltyParams::new(pa, p)?, cfg),
            SolverSpec::Constrained { a: pa, p, .. } => {
                irls_constrained(a, y, &PenaltyParams::new(pa, p)?, cfg)
            }
            SolverSpec::Lq { q, .. } => irls_lq_baseline(a, y, q, cfg),
        }
    }
}

impl fmt::Display for SolverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverSpec::Tlp { a, p, .. } | SolverSpec::Constrained { a, p, .. } => {
                write!(f, "{}(a={a},p={p})", self.method())
            }
            SolverSpec::Lq { q, .. } => write!(f, "lq(q={q})"),
        }
    }
}

fn default_trials() -> usize {
    20
}

fn default_threshold() -> f64 {
    1e-3
}

/// Random instance shared by every solver of a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub matrix: MatrixFamily,
    pub m: usize,
    pub n: usize,
    pub signal: SignalDist,
    /// Scale columns to unit norm before solving.
    pub normalize: bool,
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<()> {
        self.matrix.validate()?;
        if matches!(self.matrix, MatrixFamily::External) {
            return Err(Error::param("plans need a generated matrix family"));
        }
        if self.m == 0 || self.n == 0 {
            return Err(Error::dims(format!(
                "matrix dimensions must be positive (got {}x{})",
                self.m, self.n
            )));
        }
        Ok(())
    }

    /// Matrix, truth and measurements for one trial.
    pub fn draw(
        &self,
        master: u64,
        sparsity: usize,
        trial: usize,
    ) -> Result<(DMatrix<f64>, DVector<f64>, DVector<f64>)> {
        let (s, t) = (sparsity as u64, trial as u64);
        let mut mat = self
            .matrix
            .generate(self.m, self.n, stream_seed(master, &[0, s, t]))?;
        if self.normalize {
            mat.normalize_columns()?;
        }
        let signal = gen_signal(self.n, sparsity, stream_seed(master, &[1, s, t]), self.signal)?;
        let y = &mat.entries * &signal.vector;
        Ok((mat.entries, signal.vector, y))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub matrix: MatrixFamily,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default)]
    pub signal: SignalDist,
    #[serde(default)]
    pub normalize: bool,
    pub sparsities: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub solvers: Vec<SolverSpec>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub master_seed: u64,
    /// Shared solver settings; `s` is replaced by each cell's sparsity.
    #[serde(default)]
    pub config: SolverConfig,
    /// Report wall times. Off by default so reruns give identical CSV bytes.
    #[serde(default)]
    pub timing: bool,
}

fn check_common(instance: &InstanceSpec, trials: usize, threshold: f64, cfg: &SolverConfig) -> Result<()> {
    instance.validate()?;
    if trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::param(format!(
            "threshold must be positive (got {threshold})"
        )));
    }
    cfg.clone().with_sparsity(1).validate()
}

fn check_sparsity(s: usize, n: usize) -> Result<()> {
    if s == 0 || s >= n {
        return Err(Error::param(format!(
            "sparsity must satisfy 1 <= s < N (got s={s}, N={n})"
        )));
    }
    Ok(())
}

macro_rules! instance_accessor {
    ($t:ty) => {
        impl $t {
            pub fn instance(&self) -> InstanceSpec {
                InstanceSpec {
                    matrix: self.matrix,
                    m: self.m,
                    n: self.n,
                    signal: self.signal,
                    normalize: self.normalize,
                }
            }
        }
    };
}

instance_accessor!(ExperimentPlan);
instance_accessor!(SweepPlan);

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        check_common(&self.instance(), self.trials, self.threshold, &self.config)?;
        if self.sparsities.is_empty() {
            return Err(Error::param("sparsity grid is empty"));
        }
        if self.sparsities.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("sparsity grid must be strictly increasing"));
        }
        for &s in &self.sparsities {
            check_sparsity(s, self.n)?;
        }
        if self.solvers.is_empty() {
            return Err(Error::param("plan lists no solvers"));
        }
        self.solvers.iter().try_for_each(SolverSpec::validate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub solver: String,
    pub sparsity: usize,
    pub trial: usize,
    /// Seed of the trial's matrix stream.
    pub seed: u64,
    pub rel_err: f64,
    pub success: bool,
    pub wall_time_ms: f64,
    pub outer_iters: usize,
    /// `||grad f_w||_inf` after the last inner loop, for TLp runs.
    pub grad_inf: Option<f64>,
    pub aty_inf: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub solver: SolverSpec,
    pub kappa: f64,
    pub sparsity: usize,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_rel_err: f64,
    pub mean_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub plan: ExperimentPlan,
    pub cells: Vec<CellSummary>,
    pub records: Vec<TrialRecord>,
}

fn run_trial(
    instance: &InstanceSpec,
    master: u64,
    spec: &SolverSpec,
    cfg: &SolverConfig,
    threshold: f64,
    sparsity: usize,
    trial: usize,
) -> TrialRecord {
    let seed = stream_seed(master, &[0, sparsity as u64, trial as u64]);
    let start = Instant::now();
    let outcome = instance
        .draw(master, sparsity, trial)
        .and_then(|(a, x0, y)| spec.solve(&a, &y, cfg).map(|r| (r, x0)));
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut rec = TrialRecord {
        solver: spec.to_string(),
        sparsity,
        trial,
        seed,
        rel_err: f64::INFINITY,
        success: false,
        wall_time_ms,
        outer_iters: 0,
        grad_inf: None,
        aty_inf: None,
        error: None,
    };
    match outcome {
        Ok((res, x0)) => {
            let e = res.rel_err(&x0);
            rec.rel_err = if e.is_nan() { f64::INFINITY } else { e };
            rec.success = rec.rel_err < threshold;
            rec.outer_iters = res.outer_iters;
            if let Some(fi) = res.final_inner {
                rec.grad_inf = Some(fi.grad_inf);
                rec.aty_inf = Some(fi.aty_inf);
            }
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

/// Run `f` on a pool sized by [`WORKERS_ENV`] when set, else on rayon's global pool.
pub fn with_workers<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::param(format!("{WORKERS_ENV} must be a positive integer (got {v:?})")))?;
            if n == 0 {
                return Err(Error::param(format!("{WORKERS_ENV} must be a positive integer")));
            }
            in_pool(n, f)
        }
        Err(_) => Ok(f()),
    }
}

/// Run `f` on a dedicated pool of `workers` threads.
pub fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::param(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn summarize(spec: SolverSpec, kappa: f64, sparsity: usize, recs: &[TrialRecord]) -> CellSummary {
    let trials = recs.len();
    let successes = recs.iter().filter(|r| r.success).count();
    CellSummary {
        solver: spec,
        kappa,
        sparsity,
        trials,
        successes,
        success_rate: successes as f64 / trials as f64,
        mean_rel_err: recs.iter().map(|r| r.rel_err).sum::<f64>() / trials as f64,
        mean_time_ms: recs.iter().map(|r| r.wall_time_ms).sum::<f64>() / trials as f64,
    }
}

/// Run every (solver, sparsity, trial) of the plan in parallel.
///
/// Trial `t` at sparsity `s` draws its matrix and signal from streams keyed by
/// `(master_seed, s, t)`, so every solver sees the same instances and the
/// result does not depend on the schedule.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    plan.validate()?;
    let instance = plan.instance();
    let jobs: Vec<(usize, usize, usize)> = (0..plan.solvers.len())
        .flat_map(|k| {
            plan.sparsities
                .iter()
                .flat_map(move |&s| (0..plan.trials).map(move |t| (k, s, t)))
        })
        .collect();
    let configs: Vec<SolverConfig> = plan.solvers.iter().map(|sp| sp.config(&plan.config)).collect();
    let records: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(k, s, t)| {
            let cfg = configs[k].clone().with_sparsity(s);
            run_trial(
                &instance,
                plan.master_seed,
                &plan.solvers[k],
                &cfg,
                plan.threshold,
                s,
                t,
            )
        })
        .collect();

    let cells = records
        .chunks(plan.trials)
        .enumerate()
        .map(|(i, chunk)| {
            let k = i / plan.sparsities.len();
            let s = plan.sparsities[i % plan.sparsities.len()];
            summarize(plan.solvers[k], configs[k].kappa, s, chunk)
        })
        .collect();
    Ok(ExperimentReport {
        plan: plan.clone(),
        cells,
        records,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let inst = self.plan.instance();
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            let time = if self.plan.timing {
                format!("{:.3}", c.mean_time_ms)
            } else {
                "NA".to_string()
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{:.6e},{}",
                c.solver.method(),
                fmt_opt(c.solver.a()),
                c.solver.exponent(),
                c.kappa,
                inst.matrix.name(),
                inst.m,
                inst.n,
                fmt_opt(inst.matrix.param()),
                c.sparsity,
                c.trials,
                c.successes,
                c.success_rate,
                c.mean_rel_err,
                time,
            );
        }
        out
    }

    pub fn cell(&self, solver: usize, sparsity: usize) -> Option<&CellSummary> {
        let k = self.plan.sparsities.iter().position(|&s| s == sparsity)?;
        self.cells.get(solver * self.plan.sparsities.len() + k)
    }
}

/// Success rate of TLp over an `(a, p)` grid at one sparsity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub matrix: MatrixFamily,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default)]
    pub signal: SignalDist,
    #[serde(default)]
    pub normalize: bool,
    pub sparsity: usize,
    pub a_grid: Vec<f64>,
    pub p_grid: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub config: SolverConfig,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        check_common(&self.instance(), self.trials, self.threshold, &self.config)?;
        check_sparsity(self.sparsity, self.n)?;
        if self.a_grid.is_empty() || self.p_grid.is_empty() {
            return Err(Error::param("a and p grids must be nonempty"));
        }
        for &a in &self.a_grid {
            for &p in &self.p_grid {
                PenaltyParams::new(a, p)?;
            }
        }
        Ok(())
    }

    /// The equivalent single-sparsity experiment, one TLp solver per grid cell
    /// (a-major order).
    pub fn as_experiment(&self) -> ExperimentPlan {
        let solvers = self
            .a_grid
            .iter()
            .flat_map(|&a| {
                self.p_grid
                    .iter()
                    .map(move |&p| SolverSpec::Tlp { a, p, kappa: None })
            })
            .collect();
        ExperimentPlan {
            matrix: self.matrix,
            m: self.m,
            n: self.n,
            signal: self.signal,
            normalize: self.normalize,
            sparsities: vec![self.sparsity],
            trials: self.trials,
            solvers,
            threshold: self.threshold,
            master_seed: self.master_seed,
            config: self.config.clone(),
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatCell {
    pub a: f64,
    pub p: f64,
    pub sparsity: usize,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatTable {
    pub cells: Vec<HeatCell>,
}

impl HeatTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(HEAT_HEADER);
        out.push('\n');
        for c in &self.cells {
            let _ = writeln!(out, "{},{},{},{}", c.a, c.p, c.sparsity, c.success_rate);
        }
        out
    }

    pub fn rate(&self, a: f64, p: f64) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.a == a && c.p == p)
            .map(|c| c.success_rate)
    }
}

pub fn parameter_sweep(plan: &SweepPlan) -> Result<HeatTable> {
    plan.validate()?;
    let report = run_experiment(&plan.as_experiment())?;
    let cells = report
        .cells
        .iter()
        .map(|c| HeatCell {
            a: c.solver.a().unwrap_or(f64::NAN),
            p: c.solver.exponent(),
            sparsity: c.sparsity,
            success_rate: c.success_rate,
        })
        .collect();
    Ok(HeatTable { cells })
}
