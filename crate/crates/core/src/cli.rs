//! Benchmark harness behind the `vrtos` binary.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 numerical
//! failure, 4 I/O error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

use crate::data::{generate_synthetic, read_libsvm_file, write_libsvm, LabeledDataset, Task};
use crate::memory::MemoryScheme;
use crate::model::{LossKind, SmoothModel};
use crate::oracle::{check_prox, ProxKind};
use crate::penalties::{
    fused_lasso_split, GroupLassoPenalty, L1Penalty, OverlappingGroupLasso, Penalty, Regularizer,
};
use crate::solvers::{reference_solution, run, Problem, RunError, RunResult, SolverConfig, SolverError, SolverKind};

/// Largest closed-form vs oracle deviation accepted by `check-prox`.
pub const PROX_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::NonFinite { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    /// Default seed for solvers and synthetic data that do not set their own.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub penalty: PenaltySection,
    #[serde(default)]
    pub solvers: Vec<SolverEntry>,
    #[serde(default)]
    pub reference: ReferenceSection,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Either `path` (LIBSVM, optionally gzipped) or synthetic parameters.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: Option<PathBuf>,
    pub n_features: Option<usize>,
    pub n: Option<usize>,
    pub p: Option<usize>,
    #[serde(default = "default_density")]
    pub density: f64,
    #[serde(default = "default_task")]
    pub task: Task,
    pub seed: Option<u64>,
}

fn default_density() -> f64 {
    0.1
}

fn default_task() -> Task {
    Task::Logistic
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Defaults to the loss matching the synthetic task, logistic for files.
    pub loss: Option<LossKind>,
    /// Ridge strength; `1/n` when absent.
    pub l2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    #[default]
    None,
    Lasso,
    GroupLasso,
    OverlappingGroupLasso,
    FusedLasso,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltySection {
    #[serde(default)]
    pub kind: PenaltyKind,
    /// Strength of the structured penalty; `1/n` when absent.
    pub strength: Option<f64>,
    #[serde(default = "default_group_size")]
    pub group_size: usize,
    #[serde(default = "default_overlap")]
    pub overlap: usize,
    /// JSON file `{"groups": [[...], ...], "strength": λ}` replacing the
    /// successive groups of the overlapping penalty.
    pub groups_file: Option<PathBuf>,
    /// Strength of an additional `ℓ₁` term.
    #[serde(default)]
    pub extra_l1: f64,
}

fn default_group_size() -> usize {
    10
}

fn default_overlap() -> usize {
    2
}

impl Default for PenaltySection {
    fn default() -> Self {
        PenaltySection {
            kind: PenaltyKind::None,
            strength: None,
            group_size: default_group_size(),
            overlap: default_overlap(),
            groups_file: None,
            extra_l1: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverEntry {
    /// One of `vrtos-saga`, `vrtos-svrg`, `sparse-vrtos-saga`,
    /// `sparse-vrtos-svrg`, `vrtos-k-saga`, `vrtos-k-svrg`, `tos`, `stos`,
    /// `saga`, `proxsvrg`.
    pub name: String,
    /// File stem of the trace; defaults to `name`.
    pub label: Option<String>,
    pub step: Option<f64>,
    /// Refresh parameter of the SVRG memory.
    pub q: Option<f64>,
    pub max_epochs: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub trace_every: Option<usize>,
    pub init_memory: Option<bool>,
    pub dr_iters: Option<usize>,
    pub dr_warm_start: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    #[serde(default = "default_ref_tol")]
    pub tol: f64,
    #[serde(default = "default_ref_iters")]
    pub max_iters: usize,
}

fn default_ref_tol() -> f64 {
    1e-12
}

fn default_ref_iters() -> usize {
    100_000
}

impl Default for ReferenceSection {
    fn default() -> Self {
        ReferenceSection {
            tol: default_ref_tol(),
            max_iters: default_ref_iters(),
        }
    }
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: BenchConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.solvers.is_empty() {
            return Err(CliError::Config("at least one [[solvers]] entry is required".into()));
        }
        let pen = &self.penalty;
        for (what, v) in [("penalty.strength", pen.strength.unwrap_or(0.0)), ("penalty.extra_l1", pen.extra_l1)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CliError::Config(format!("{what} must be nonnegative, got {v}")));
            }
        }
        let mut labels = std::collections::HashSet::new();
        for s in &self.solvers {
            parse_solver_name(&s.name)?;
            if !labels.insert(s.label()) {
                return Err(CliError::Config(format!("duplicate solver label {:?}", s.label())));
            }
        }
        if self.data.path.is_none() && (self.data.n.is_none() || self.data.p.is_none()) {
            return Err(CliError::Config("[data] needs either path or both n and p".into()));
        }
        Ok(())
    }
}

impl SolverEntry {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.name)
    }

    pub fn solver_config(&self, default_seed: u64) -> Result<(SolverKind, SolverConfig), CliError> {
        let (kind, svrg) = parse_solver_name(&self.name)?;
        let d = SolverConfig::default();
        let scheme = match (svrg, self.q) {
            (true, q) => MemoryScheme::Svrg { q: q.unwrap_or(1.0) },
            (false, None) => MemoryScheme::Saga,
            (false, Some(_)) => {
                return Err(CliError::Config(format!("solver {} does not take q", self.name)));
            }
        };
        let config = SolverConfig {
            step: self.step,
            scheme,
            max_epochs: self.max_epochs.unwrap_or(d.max_epochs),
            tol: self.tol.unwrap_or(d.tol),
            seed: self.seed.unwrap_or(default_seed),
            trace_every: self.trace_every.unwrap_or(d.trace_every),
            init_memory: self.init_memory.unwrap_or(d.init_memory),
            x0: None,
            dr_iters: self.dr_iters.unwrap_or(d.dr_iters),
            dr_warm_start: self.dr_warm_start.unwrap_or(d.dr_warm_start),
            track_ergodic: false,
        };
        Ok((kind, config))
    }
}

/// Maps a roster name to the solver and whether it uses SVRG memory.
pub fn parse_solver_name(name: &str) -> Result<(SolverKind, bool), CliError> {
    Ok(match name {
        "vrtos" | "vrtos-saga" => (SolverKind::VrTos, false),
        "vrtos-svrg" => (SolverKind::VrTos, true),
        "sparse-vrtos" | "sparse-vrtos-saga" => (SolverKind::SparseVrTos, false),
        "sparse-vrtos-svrg" => (SolverKind::SparseVrTos, true),
        "vrtos-k" | "vrtos-k-saga" => (SolverKind::VrTosK, false),
        "vrtos-k-svrg" => (SolverKind::VrTosK, true),
        "tos" => (SolverKind::Tos, false),
        "stos" => (SolverKind::Stos, false),
        "saga" => (SolverKind::Saga, false),
        "proxsvrg" | "prox-svrg" => (SolverKind::ProxSvrg, true),
        other => return Err(CliError::Config(format!("unknown solver {other:?}"))),
    })
}

#[derive(Debug, Deserialize)]
struct GroupsFile {
    groups: Vec<Vec<usize>>,
    strength: Option<f64>,
}

/// Objective value of an overlapping penalty plus an optional `ℓ₁` term.
#[derive(Debug)]
struct SumOf(Vec<Arc<dyn Regularizer>>);

impl Regularizer for SumOf {
    fn value(&self, x: &[f64]) -> f64 {
        self.0.iter().map(|r| r.value(x)).sum()
    }
}

pub fn load_dataset(cfg: &BenchConfig) -> Result<LabeledDataset, CliError> {
    let d = &cfg.data;
    match &d.path {
        Some(path) => read_libsvm_file(path, d.n_features).map_err(|e| match e {
            crate::data::DataError::Io(_) => io_err(path, e),
            other => CliError::Config(format!("{}: {other}", path.display())),
        }),
        None => {
            let (n, p) = (d.n.unwrap_or(0), d.p.unwrap_or(0));
            generate_synthetic(n, p, d.density, d.task, d.seed.unwrap_or(cfg.seed))
                .map_err(|e| CliError::Config(e.to_string()))
        }
    }
}

/// Builds the model and proximal terms described by `cfg`.
pub fn build_problem(cfg: &BenchConfig) -> Result<Problem, CliError> {
    let data = load_dataset(cfg)?;
    let n = data.n_samples();
    let p = data.n_features();
    let loss = cfg.model.loss.unwrap_or(match cfg.data.path {
        Some(_) => LossKind::Logistic,
        None => cfg.data.task.into(),
    });
    let l2 = cfg.model.l2.unwrap_or(1.0 / n as f64);
    let model = SmoothModel::new(data, loss, l2).map_err(|e| CliError::Config(e.to_string()))?;
    let pen = &cfg.penalty;
    let lambda = pen.strength.unwrap_or(1.0 / n as f64);
    let cfg_err = |e: crate::penalties::PenaltyError| CliError::Config(e.to_string());
    let extra: Option<Arc<dyn Penalty>> = if pen.extra_l1 > 0.0 {
        Some(Arc::new(L1Penalty::new(p, pen.extra_l1).map_err(cfg_err)?))
    } else {
        None
    };
    let mut terms: Vec<Arc<dyn Penalty>> = Vec::new();
    let mut reported: Option<Arc<dyn Regularizer>> = None;
    match pen.kind {
        PenaltyKind::None => {}
        PenaltyKind::Lasso => terms.push(Arc::new(L1Penalty::new(p, lambda).map_err(cfg_err)?)),
        PenaltyKind::GroupLasso => {
            terms.push(Arc::new(GroupLassoPenalty::contiguous(p, pen.group_size, lambda).map_err(cfg_err)?))
        }
        PenaltyKind::FusedLasso => {
            let (g, h) = fused_lasso_split(p, lambda).map_err(cfg_err)?;
            terms.push(Arc::new(g));
            terms.push(Arc::new(h));
        }
        PenaltyKind::OverlappingGroupLasso => {
            let ogl = match &pen.groups_file {
                Some(path) => {
                    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
                    let gf: GroupsFile = serde_json::from_str(&text)
                        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                    OverlappingGroupLasso::new(p, gf.groups, gf.strength.unwrap_or(lambda))
                }
                None => OverlappingGroupLasso::successive(p, pen.group_size, pen.overlap, lambda),
            }
            .map_err(cfg_err)?;
            for family in ogl.split().map_err(cfg_err)? {
                terms.push(Arc::new(family));
            }
            let mut parts: Vec<Arc<dyn Regularizer>> = vec![Arc::new(ogl)];
            if let Some(e) = &extra {
                parts.push(e.clone());
            }
            reported = Some(Arc::new(SumOf(parts)));
        }
    }
    if let Some(e) = extra {
        terms.push(e);
    }
    let problem = Problem::new(model, terms)?;
    Ok(match reported {
        Some(r) => problem.with_objective_term(r),
        None => problem,
    })
}

/// Outcome of one solver in a benchmark.
#[derive(Debug)]
pub struct SolverOutcome {
    pub label: String,
    pub kind: SolverKind,
    pub result: Result<RunResult, RunError>,
}

fn write_trace(dir: &Path, label: &str, csv: &str) -> Result<(), CliError> {
    let path = dir.join(format!("{label}.csv"));
    fs::write(&path, csv).map_err(|e| io_err(&path, e))
}

/// Runs the reference solve and every solver of `cfg` (one thread per
/// solver), writing `<label>.csv` traces and `summary.json` into `out_dir`.
pub fn cmd_run(cfg: &BenchConfig) -> Result<Vec<SolverOutcome>, CliError> {
    cfg.validate()?;
    let problem = build_problem(cfg)?;
    let mut jobs = Vec::with_capacity(cfg.solvers.len());
    for s in &cfg.solvers {
        let (kind, config) = s.solver_config(cfg.seed)?;
        jobs.push((s.label().to_string(), kind, config));
    }
    fs::create_dir_all(&cfg.out_dir).map_err(|e| io_err(&cfg.out_dir, e))?;

    let reference = match reference_solution(&problem, cfg.reference.tol, cfg.reference.max_iters) {
        Ok(r) => r,
        Err(RunError::Setup(e)) => return Err(e.into()),
        Err(e) => return Err(CliError::Numerical(format!("reference solve: {e}"))),
    };
    let p_star = problem.objective(&reference.solution);
    let ref_residual = reference.trace.last().map_or(f64::NAN, |r| r.residual);

    let out_dir = cfg.out_dir.as_path();
    let problem = &problem;
    let outcomes: Vec<(SolverOutcome, Result<(), CliError>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .into_iter()
            .map(|(label, kind, config)| {
                scope.spawn(move || {
                    let result = run(problem, kind, &config);
                    let written = match &result {
                        Ok(r) => write_trace(out_dir, &label, &r.trace.to_csv()),
                        Err(e) => match e.partial_trace() {
                            Some(t) => write_trace(out_dir, &label, &t.to_csv()),
                            None => Ok(()),
                        },
                    };
                    (SolverOutcome { label, kind, result }, written)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver worker panicked"))
            .collect()
    });

    let mut entries = Vec::new();
    let mut failure: Option<CliError> = None;
    let mut results = Vec::new();
    for (outcome, written) in outcomes {
        if let Err(e) = written {
            failure.get_or_insert(e);
        }
        let entry = match &outcome.result {
            Ok(r) => {
                let last = r.trace.last().expect("trace has the initial row");
                let objective = problem.objective(&r.solution);
                json!({
                    "label": outcome.label,
                    "solver": outcome.kind.name(),
                    "status": "ok",
                    "termination": r.termination,
                    "step_size": r.step_size,
                    "epochs": last.epoch,
                    "final_objective": objective,
                    "suboptimality": objective - p_star,
                    "final_residual": last.residual,
                    "grad_evals": last.grad_evals,
                    "prox_evals": last.prox_evals,
                    "nnz": last.nnz,
                })
            }
            Err(e) => {
                let err = match e {
                    RunError::Setup(SolverError::NonFinite { .. }) => CliError::Numerical(format!("{}: {e}", outcome.label)),
                    RunError::Setup(_) => CliError::Config(format!("{}: {e}", outcome.label)),
                    RunError::Diverged { .. } => CliError::Numerical(format!("{}: {e}", outcome.label)),
                };
                failure.get_or_insert(err);
                json!({
                    "label": outcome.label,
                    "solver": outcome.kind.name(),
                    "status": "failed",
                    "error": e.to_string(),
                })
            }
        };
        entries.push(entry);
        results.push(outcome);
    }
    let summary = json!({
        "reference": {
            "objective": p_star,
            "residual": ref_residual,
            "termination": reference.termination,
        },
        "solvers": entries,
    });
    let path = out_dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
    match failure {
        Some(e) => Err(e),
        None => Ok(results),
    }
}

pub fn cmd_check_prox(kind: &str, trials: usize, seed: u64) -> Result<String, CliError> {
    let kind: ProxKind = kind.parse().map_err(CliError::Config)?;
    let r = check_prox(kind, trials, seed);
    let line = format!(
        "{kind}: {} trials, max deviation {:e} (gamma = 0: {:e})",
        r.trials, r.max_deviation, r.max_deviation_zero_step
    );
    if r.max_deviation > PROX_TOLERANCE {
        Err(CliError::Numerical(line))
    } else {
        Ok(line)
    }
}

pub fn cmd_gen_data(n: usize, p: usize, density: f64, task: Task, seed: u64, out: &Path) -> Result<(), CliError> {
    let data = generate_synthetic(n, p, density, task, seed).map_err(|e| CliError::Config(e.to_string()))?;
    let file = fs::File::create(out).map_err(|e| io_err(out, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_libsvm(&data, &mut w).map_err(|e| io_err(out, e))?;
    std::io::Write::flush(&mut w).map_err(|e| io_err(out, e))
}

#[derive(Debug, Parser)]
#[command(name = "vrtos", version, about = "Variance-reduced three operator splitting benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the solver roster of a TOML benchmark config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the top-level `seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a closed-form prox with a brute-force minimizer.
    CheckProx {
        /// l1, group_lasso, fused or consensus
        #[arg(long)]
        penalty: String,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a synthetic dataset in LIBSVM format.
    GenData {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 0.1)]
        density: f64,
        #[arg(long, value_parser = parse_task, default_value = "logistic")]
        task: Task,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_task(s: &str) -> Result<Task, String> {
    match s {
        "logistic" => Ok(Task::Logistic),
        "squared" | "regression" => Ok(Task::Squared),
        other => Err(format!("unknown task {other:?} (expected logistic or squared)")),
    }
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { config, seed, out } => {
            let mut cfg = BenchConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            let outcomes = cmd_run(&cfg)?;
            for o in outcomes {
                if let Ok(r) = &o.result {
                    let last = r.trace.last().expect("initial row");
                    println!(
                        "{:<20} epochs {:>5}  objective {:.10e}  residual {:.3e}",
                        o.label, last.epoch, last.objective, last.residual
                    );
                }
            }
            println!("wrote {}", cfg.out_dir.display());
            Ok(())
        }
        Command::CheckProx { penalty, trials, seed } => {
            let line = cmd_check_prox(&penalty, trials, seed)?;
            println!("{line}");
            Ok(())
        }
        Command::GenData {
            n,
            p,
            density,
            task,
            seed,
            out,
        } => cmd_gen_data(n, p, density, task, seed, &out),
    }
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
