//! Convergence measurements: objective, operator residual, dual iterate,
//! estimator variance and per-epoch traces.

use std::sync::Arc;

use crate::memory::GradientMemory;
use crate::model::SmoothModel;
use crate::penalties::Penalty;
use crate::solvers::{vr_estimate_into, Problem};

/// Coordinates with magnitude above this count as nonzero.
pub const NNZ_THRESHOLD: f64 = 1e-10;

pub const TRACE_HEADER: &str = "epoch,grad_evals,prox_evals,wall_time,objective,residual,nnz";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    pub grad_evals: u64,
    pub prox_evals: u64,
    pub wall_time: f64,
    pub objective: f64,
    pub residual: f64,
    pub nnz: usize,
    /// Objective at the running average of the `x` iterates, when tracked.
    pub ergodic_objective: Option<f64>,
}

impl TraceRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{:.6},{:e},{:e},{}",
            self.epoch, self.grad_evals, self.prox_evals, self.wall_time, self.objective, self.residual, self.nnz
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    rows: Vec<TraceRow>,
}

impl Trace {
    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// `min_{k ≤ t} residual_k` for every row.
    pub fn best_residuals(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.rows
            .iter()
            .map(|r| {
                best = best.min(r.residual);
                best
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.csv_line());
            out.push('\n');
        }
        out
    }
}

pub fn count_nnz(z: &[f64]) -> usize {
    z.iter().filter(|v| v.abs() > NNZ_THRESHOLD).count()
}

/// `P(x)`, with any reported overlapping penalty evaluated directly.
pub fn primal_objective(problem: &Problem, x: &[f64]) -> f64 {
    problem.objective(x)
}

/// `‖y − G_γ(y)‖` for `G_γ(y) = y − z + prox^{D⁻¹}_{γg}(2z − y − γD∇f(z))`,
/// `z = prox^{D⁻¹}_{γh}(y)`.
pub fn operator_residual(model: &SmoothModel, g: &dyn Penalty, h: &dyn Penalty, y: &[f64], gamma: f64, d: &[f64]) -> f64 {
    let mut z = y.to_vec();
    h.scaled_prox_in_place(&mut z, gamma, d);
    let grad = model.full_gradient(&z);
    let mut x: Vec<f64> = (0..y.len())
        .map(|j| 2.0 * z[j] - y[j] - gamma * d[j] * grad[j])
        .collect();
    g.scaled_prox_in_place(&mut x, gamma, d);
    z.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Operator residual of the consensus reformulation. `ys[j]` is the copy for
/// term `j`, `ds[j]` its reweighting; `z` is their weighted consensus point.
pub fn consensus_residual(
    model: &SmoothModel,
    terms: &[Arc<dyn Penalty>],
    ys: &[Vec<f64>],
    gamma: f64,
    ds: &[Vec<f64>],
) -> f64 {
    let k = terms.len();
    let p = model.p();
    let z = consensus_point(ys, ds);
    let grad = model.full_gradient(&z);
    let mut total = 0.0;
    let mut x = vec![0.0; p];
    for j in 0..k {
        for c in 0..p {
            x[c] = 2.0 * z[c] - ys[j][c] - gamma * ds[j][c] * grad[c] / k as f64;
        }
        terms[j].scaled_prox_in_place(&mut x, gamma, &ds[j]);
        total += z.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    total.sqrt()
}

/// Weighted average `Σ_j Y_jc/d_jc / Σ_j 1/d_jc`.
pub fn consensus_point(ys: &[Vec<f64>], ds: &[Vec<f64>]) -> Vec<f64> {
    let p = ys.first().map_or(0, Vec::len);
    (0..p)
        .map(|c| {
            let mut num = 0.0;
            let mut den = 0.0;
            for (y, d) in ys.iter().zip(ds) {
                num += y[c] / d[c];
                den += 1.0 / d[c];
            }
            num / den
        })
        .collect()
}

/// `u = D⁻¹(y − z)/γ`.
pub fn dual_iterate(y: &[f64], z: &[f64], gamma: f64, d: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(z)
        .zip(d)
        .map(|((yj, zj), dj)| (yj - zj) / (dj * gamma))
        .collect()
}

/// Exact `E_i ‖v_i − ∇f(z)‖²` for the variance-reduced estimator, by
/// enumerating every sample.
pub fn estimator_variance(model: &SmoothModel, memory: &GradientMemory, z: &[f64]) -> f64 {
    let full = model.full_gradient(z);
    let mut v = vec![0.0; model.p()];
    let mut acc = 0.0;
    for i in 0..model.n() {
        let c = model.gradient_scalar(i, z);
        vr_estimate_into(model, memory, i, c, z, &mut v);
        acc += v.iter().zip(&full).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    acc / model.n() as f64
}

/// Running mean `x̄_t = (Σ_{k≤t} x_k)/(t+1)`, updated in place.
#[derive(Debug, Clone)]
pub struct ErgodicAverage {
    mean: Vec<f64>,
    count: u64,
}

impl ErgodicAverage {
    pub fn new(p: usize) -> Self {
        ErgodicAverage {
            mean: vec![0.0; p],
            count: 0,
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let w = 1.0 / self.count as f64;
        for (m, &xi) in self.mean.iter_mut().zip(x) {
            *m += (xi - *m) * w;
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}
