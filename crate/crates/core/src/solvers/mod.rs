//! Splitting solvers for `min f(x) + Σ_j g_j(x)`.
//!
//! * [`SolverKind::VrTos`]: variance-reduced three operator splitting, dense.
//! * [`SolverKind::SparseVrTos`]: the same method restricted to the extended
//!   support of the sampled row, with inverse-frequency reweighting.
//! * [`SolverKind::VrTosK`]: the consensus reformulation for `k ≥ 2` terms.
//! * [`SolverKind::Tos`]: full-gradient three operator splitting.
//! * [`SolverKind::Stos`]: stochastic TOS with step `γ/(t+1)` and no memory.
//! * [`SolverKind::Saga`], [`SolverKind::ProxSvrg`]: proximal gradient baselines
//!   with the prox of `g + h` approximated by Douglas–Rachford sweeps.
//!
//! Two-term solvers take `g = terms[0]` and `h = terms[1]` (zero when absent).

mod baselines;
mod consensus;
mod dense;
mod sparse;

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{count_nnz, Trace, TraceRow};
use crate::memory::{MemoryError, MemoryScheme};
use crate::model::{ModelError, SmoothModel};
use crate::penalties::{Penalty, PenaltyError, Regularizer, ZeroPenalty};
use crate::structure::StructureError;

pub use dense::vr_estimate_into;

/// Norm of the iterate beyond which a run is declared divergent.
pub const DIVERGENCE_BOUND: f64 = 1e12;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Penalty(#[from] PenaltyError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error("{0}")]
    Unsupported(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite iterate at step {step}")]
    NonFinite { step: u64 },
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Setup(#[from] SolverError),
    #[error("diverged at step {step}: {reason}")]
    Diverged { step: u64, reason: String, trace: Trace },
}

impl RunError {
    /// Rows recorded before the failure.
    pub fn partial_trace(&self) -> Option<&Trace> {
        match self {
            RunError::Diverged { trace, .. } => Some(trace),
            RunError::Setup(_) => None,
        }
    }
}

/// Smooth model plus an ordered list of proximal terms.
#[derive(Debug, Clone)]
pub struct Problem {
    model: Arc<SmoothModel>,
    terms: Vec<Arc<dyn Penalty>>,
    reported: Option<Arc<dyn Regularizer>>,
}

impl Problem {
    pub fn new(model: impl Into<Arc<SmoothModel>>, terms: Vec<Arc<dyn Penalty>>) -> Result<Self, SolverError> {
        let model = model.into();
        for t in &terms {
            if let Some(part) = t.blocks() {
                if part.dim() != model.p() {
                    return Err(PenaltyError::DimensionMismatch {
                        expected: model.p(),
                        found: part.dim(),
                    }
                    .into());
                }
            }
        }
        Ok(Problem {
            model,
            terms,
            reported: None,
        })
    }

    pub fn pair(
        model: impl Into<Arc<SmoothModel>>,
        g: impl Penalty + 'static,
        h: impl Penalty + 'static,
    ) -> Result<Self, SolverError> {
        Self::new(model, vec![Arc::new(g), Arc::new(h)])
    }

    /// Evaluates the nonsmooth part of the objective with `reg` instead of the
    /// sum of the terms, e.g. an overlapping penalty optimized through a split.
    pub fn with_objective_term(mut self, reg: Arc<dyn Regularizer>) -> Self {
        self.reported = Some(reg);
        self
    }

    pub fn model(&self) -> &SmoothModel {
        &self.model
    }

    pub fn terms(&self) -> &[Arc<dyn Penalty>] {
        &self.terms
    }

    pub fn k(&self) -> usize {
        self.terms.len()
    }

    pub fn penalty_value(&self, x: &[f64]) -> f64 {
        match &self.reported {
            Some(r) => r.value(x),
            None => self.terms.iter().map(|t| t.value(x)).sum(),
        }
    }

    /// `P(x) = f(x) + Σ_j g_j(x)`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.model.smooth_value(x) + self.penalty_value(x)
    }

    pub(crate) fn pair_terms(&self) -> Result<(Arc<dyn Penalty>, Arc<dyn Penalty>), SolverError> {
        let zero = || Arc::new(ZeroPenalty::new(self.model.p())) as Arc<dyn Penalty>;
        match self.terms.len() {
            0 => Ok((zero(), zero())),
            1 => Ok((self.terms[0].clone(), zero())),
            2 => Ok((self.terms[0].clone(), self.terms[1].clone())),
            k => Err(SolverError::Unsupported(format!(
                "this solver handles at most two proximal terms, got {k}; use the consensus solver"
            ))),
        }
    }

    pub(crate) fn model_arc(&self) -> Arc<SmoothModel> {
        self.model.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    VrTos,
    SparseVrTos,
    VrTosK,
    Tos,
    Stos,
    Saga,
    ProxSvrg,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::VrTos => "vrtos",
            SolverKind::SparseVrTos => "sparse-vrtos",
            SolverKind::VrTosK => "vrtos-k",
            SolverKind::Tos => "tos",
            SolverKind::Stos => "stos",
            SolverKind::Saga => "saga",
            SolverKind::ProxSvrg => "proxsvrg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Step size; `None` selects the solver's default.
    pub step: Option<f64>,
    pub scheme: MemoryScheme,
    pub max_epochs: usize,
    /// Stop once the operator residual falls to this value.
    pub tol: f64,
    pub seed: u64,
    /// Record a trace row every this many epochs (the last epoch is always recorded).
    pub trace_every: usize,
    /// Initialize memory terms at `∇ψ_i(z₀)` instead of zero.
    pub init_memory: bool,
    /// Starting point `x₀`; `y₀ = x₀`. Zero when absent.
    pub x0: Option<Vec<f64>>,
    /// Douglas–Rachford sweeps per baseline step.
    pub dr_iters: usize,
    pub dr_warm_start: bool,
    /// Keep the running average of the `x` iterates (dense two-term solvers).
    pub track_ergodic: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            step: None,
            scheme: MemoryScheme::Saga,
            max_epochs: 100,
            tol: 1e-10,
            seed: 0,
            trace_every: 1,
            init_memory: false,
            x0: None,
            dr_iters: 10,
            dr_warm_start: true,
            track_ergodic: false,
        }
    }
}

impl SolverConfig {
    fn validate(&self, p: usize) -> Result<(), SolverError> {
        if let Some(s) = self.step {
            if !(s > 0.0 && s.is_finite()) {
                return Err(SolverError::InvalidConfig(format!("step size must be positive, got {s}")));
            }
        }
        if !(self.tol > 0.0) {
            return Err(SolverError::InvalidConfig(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.trace_every == 0 {
            return Err(SolverError::InvalidConfig("trace_every must be at least 1".into()));
        }
        if self.dr_iters == 0 {
            return Err(SolverError::InvalidConfig("dr_iters must be at least 1".into()));
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != p {
                return Err(SolverError::InvalidConfig(format!(
                    "x0 has length {}, expected {p}",
                    x0.len()
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn start(&self, p: usize) -> Vec<f64> {
        self.x0.clone().unwrap_or_else(|| vec![0.0; p])
    }
}

/// Oracle counts accumulated by a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub steps: u64,
    pub grad_evals: u64,
    pub prox_evals: u64,
}

pub(crate) trait Stepper: Send {
    fn step(&mut self) -> Result<(), SolverError>;
    fn steps_per_epoch(&self) -> usize;
    /// Primal point `prox_{γh}(y)` (the consensus point for the k-term solver).
    fn point(&self) -> Vec<f64>;
    fn residual(&self) -> f64;
    /// Splitting variable, flattened row-major for the k-term solver.
    fn y(&self) -> Vec<f64>;
    /// Reweighting diagonal matching [`Stepper::y`].
    fn weights(&self) -> Vec<f64>;
    fn counters(&self) -> Counters;
    fn ergodic_point(&self) -> Option<Vec<f64>> {
        None
    }
}

/// A solver instance that can be stepped by hand.
pub struct Solver {
    inner: Box<dyn Stepper>,
    kind: SolverKind,
    gamma: f64,
}

impl Solver {
    pub fn new(problem: &Problem, kind: SolverKind, config: &SolverConfig) -> Result<Self, SolverError> {
        config.validate(problem.model().p())?;
        let (inner, gamma): (Box<dyn Stepper>, f64) = match kind {
            SolverKind::VrTos => {
                let s = dense::DenseSplitting::variance_reduced(problem, config)?;
                let g = s.gamma();
                (Box::new(s), g)
            }
            SolverKind::Tos if problem.k() <= 2 => {
                let s = dense::DenseSplitting::full(problem, config)?;
                let g = s.gamma();
                (Box::new(s), g)
            }
            SolverKind::Tos => {
                let s = consensus::Consensus::full(problem, config)?;
                let g = s.gamma();
                (Box::new(s), g)
            }
            SolverKind::Stos => {
                let s = dense::DenseSplitting::stochastic(problem, config)?;
                let g = s.gamma();
                (Box::new(s), g)
            }
            SolverKind::SparseVrTos => {
                let s = sparse::SparseSplitting::new(problem, config)?;
                let g = s.gamma();
                (Box::new(s), g)
            }
            SolverKind::VrTosK => {
                let s = consensus::Consensus::variance_reduced(problem, config)?;
                let g = s.gamma();
                (Box::new(s), g)
            }
            SolverKind::Saga | SolverKind::ProxSvrg => {
                let s = baselines::ProxGradient::new(problem, kind, config)?;
                let g = s.gamma();
                (Box::new(s), g)
            }
        };
        Ok(Solver { inner, kind, gamma })
    }

    pub fn kind(&self) -> SolverKind {
        self.kind
    }

    pub fn step_size(&self) -> f64 {
        self.gamma
    }

    pub fn step(&mut self) -> Result<(), SolverError> {
        self.inner.step()
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.inner.steps_per_epoch()
    }

    pub fn point(&self) -> Vec<f64> {
        self.inner.point()
    }

    pub fn y(&self) -> Vec<f64> {
        self.inner.y()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.inner.weights()
    }

    pub fn residual(&self) -> f64 {
        self.inner.residual()
    }

    pub fn counters(&self) -> Counters {
        self.inner.counters()
    }

    pub fn ergodic_point(&self) -> Option<Vec<f64>> {
        self.inner.ergodic_point()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Tolerance,
    EpochBudget,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub solution: Vec<f64>,
    pub y: Vec<f64>,
    pub weights: Vec<f64>,
    pub step_size: f64,
    pub trace: Trace,
    pub termination: Termination,
    pub ergodic: Option<Vec<f64>>,
}

fn record(solver: &Solver, problem: &Problem, epoch: usize, elapsed: Duration) -> TraceRow {
    let z = solver.point();
    let c = solver.counters();
    TraceRow {
        epoch,
        grad_evals: c.grad_evals,
        prox_evals: c.prox_evals,
        wall_time: elapsed.as_secs_f64(),
        objective: problem.objective(&z),
        residual: solver.residual(),
        nnz: count_nnz(&z),
        ergodic_objective: solver.ergodic_point().map(|x| problem.objective(&x)),
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Runs epochs until the residual reaches `config.tol` or the epoch budget is spent.
pub fn run(problem: &Problem, kind: SolverKind, config: &SolverConfig) -> Result<RunResult, RunError> {
    let mut solver = Solver::new(problem, kind, config)?;
    let mut trace = Trace::default();
    let mut elapsed = Duration::ZERO;
    let first = record(&solver, problem, 0, elapsed);
    let mut done = first.residual <= config.tol;
    trace.push(first);
    let steps = solver.steps_per_epoch();
    let mut epoch = 0;
    while !done && epoch < config.max_epochs {
        epoch += 1;
        let t0 = Instant::now();
        for _ in 0..steps {
            if let Err(e) = solver.step() {
                let step = match e {
                    SolverError::NonFinite { step } => step,
                    _ => solver.counters().steps,
                };
                return Err(RunError::Diverged {
                    step,
                    reason: e.to_string(),
                    trace,
                });
            }
        }
        elapsed += t0.elapsed();
        let ny = norm(&solver.y());
        if !(ny <= DIVERGENCE_BOUND) {
            return Err(RunError::Diverged {
                step: solver.counters().steps,
                reason: format!("iterate norm {ny:e} exceeds {DIVERGENCE_BOUND:e}"),
                trace,
            });
        }
        if epoch % config.trace_every == 0 || epoch == config.max_epochs {
            let row = record(&solver, problem, epoch, elapsed);
            done = row.residual <= config.tol;
            if !row.objective.is_finite() {
                return Err(RunError::Diverged {
                    step: solver.counters().steps,
                    reason: "non-finite objective".into(),
                    trace,
                });
            }
            trace.push(row);
        }
    }
    Ok(RunResult {
        solution: solver.point(),
        y: solver.y(),
        weights: solver.weights(),
        step_size: solver.step_size(),
        ergodic: solver.ergodic_point(),
        trace,
        termination: if done {
            Termination::Tolerance
        } else {
            Termination::EpochBudget
        },
    })
}

/// High-precision solution by full-gradient TOS with step `1/L` (`k/L` for the
/// consensus form), `L` estimated by power iteration.
pub fn reference_solution(problem: &Problem, tol: f64, max_iters: usize) -> Result<RunResult, RunError> {
    let l = problem.model().full_smoothness_estimate(200).max(f64::MIN_POSITIVE);
    let k = if problem.k() <= 2 { 1.0 } else { problem.k() as f64 };
    let config = SolverConfig {
        step: Some(k / l),
        max_epochs: max_iters,
        tol,
        trace_every: 10,
        ..SolverConfig::default()
    };
    run(problem, SolverKind::Tos, &config)
}
