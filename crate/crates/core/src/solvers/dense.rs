//! Dense two-term splitting: variance-reduced, full-gradient and plain
//! stochastic TOS share the update
//!
//! ```text
//! z = prox_{γh}(y);  x = prox_{γg}(2z − y − γv);  y ← y + x − z
//! ```
//!
//! and differ only in the gradient estimate `v`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Counters, Problem, SolverConfig, SolverError, Stepper};
use crate::diagnostics::{operator_residual, ErgodicAverage};
use crate::memory::{GradientMemory, MemoryScheme};
use crate::model::SmoothModel;
use crate::penalties::Penalty;

/// Writes `v = ∇ψ_i(z) + (ᾱ − α_i) + λz` into `out`, where `c = l_i'(a_iᵀz)`.
pub fn vr_estimate_into(model: &SmoothModel, memory: &GradientMemory, i: usize, c: f64, z: &[f64], out: &mut [f64]) {
    let mean = memory.mean();
    let l2 = model.l2();
    for ((o, &m), &zj) in out.iter_mut().zip(mean).zip(z) {
        *o = m + l2 * zj;
    }
    let entry = memory.entry(i, model);
    let (idx, val) = model.row(i);
    for (&j, &a) in idx.iter().zip(val) {
        let alpha = GradientMemory::value_at(entry, j, a);
        out[j] = c * a + (mean[j] - alpha) + l2 * z[j];
    }
}

/// `y ← y + prox_{γg}(2z − y − γv) − z`; leaves `x` in `buf`.
pub(crate) fn three_operator_update(y: &mut [f64], z: &[f64], v: &[f64], gamma: f64, g: &dyn Penalty, buf: &mut [f64]) {
    for j in 0..y.len() {
        buf[j] = 2.0 * z[j] - y[j] - gamma * v[j];
    }
    g.prox_in_place(buf, gamma);
    for j in 0..y.len() {
        y[j] += buf[j] - z[j];
    }
}

enum Estimator {
    VarianceReduced(GradientMemory),
    Full,
    Stochastic,
}

pub(crate) struct DenseSplitting {
    model: Arc<SmoothModel>,
    g: Arc<dyn Penalty>,
    h: Arc<dyn Penalty>,
    gamma: f64,
    y: Vec<f64>,
    z: Vec<f64>,
    v: Vec<f64>,
    buf: Vec<f64>,
    estimator: Estimator,
    rng: ChaCha8Rng,
    counters: Counters,
    ergodic: Option<ErgodicAverage>,
}

impl DenseSplitting {
    fn build(problem: &Problem, config: &SolverConfig, estimator: Estimator, gamma: f64) -> Result<Self, SolverError> {
        let (g, h) = problem.pair_terms()?;
        let model = problem.model_arc();
        let p = model.p();
        let y = config.start(p);
        Ok(DenseSplitting {
            gamma,
            z: vec![0.0; p],
            v: vec![0.0; p],
            buf: vec![0.0; p],
            y,
            g,
            h,
            estimator,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            counters: Counters::default(),
            ergodic: config.track_ergodic.then(|| ErgodicAverage::new(p)),
            model,
        })
    }

    fn default_step(problem: &Problem, config: &SolverConfig) -> Result<f64, SolverError> {
        match config.step {
            Some(s) => Ok(s),
            None => Ok(problem.model().smoothness_constants(1.0)?.default_step()),
        }
    }

    pub(crate) fn variance_reduced(problem: &Problem, config: &SolverConfig) -> Result<Self, SolverError> {
        let gamma = Self::default_step(problem, config)?;
        let model = problem.model();
        let init = if config.init_memory {
            let (_, h) = problem.pair_terms()?;
            let mut z0 = config.start(model.p());
            h.prox_in_place(&mut z0, gamma);
            Some(z0)
        } else {
            None
        };
        let memory = GradientMemory::new(model, config.scheme, init.as_deref(), config.seed.wrapping_add(1))?;
        let mut s = Self::build(problem, config, Estimator::VarianceReduced(memory), gamma)?;
        if init.is_some() {
            s.counters.grad_evals += model.n() as u64;
        }
        Ok(s)
    }

    pub(crate) fn full(problem: &Problem, config: &SolverConfig) -> Result<Self, SolverError> {
        let gamma = Self::default_step(problem, config)?;
        Self::build(problem, config, Estimator::Full, gamma)
    }

    pub(crate) fn stochastic(problem: &Problem, config: &SolverConfig) -> Result<Self, SolverError> {
        let gamma = Self::default_step(problem, config)?;
        Self::build(problem, config, Estimator::Stochastic, gamma)
    }

    pub(crate) fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl Stepper for DenseSplitting {
    fn step(&mut self) -> Result<(), SolverError> {
        let model = &*self.model;
        let n = model.n();
        let gamma = match self.estimator {
            Estimator::Stochastic => self.gamma / (self.counters.steps + 1) as f64,
            _ => self.gamma,
        };
        self.z.copy_from_slice(&self.y);
        self.h.prox_in_place(&mut self.z, gamma);
        match &mut self.estimator {
            Estimator::Full => {
                model.full_gradient_into(&self.z, &mut self.v);
                self.counters.grad_evals += n as u64;
            }
            Estimator::VarianceReduced(memory) => {
                let i = self.rng.random_range(0..n);
                let c = model.gradient_scalar(i, &self.z);
                self.counters.grad_evals += 1;
                if memory.is_snapshot() {
                    self.counters.grad_evals += 1;
                }
                vr_estimate_into(model, memory, i, c, &self.z, &mut self.v);
                match memory.scheme() {
                    MemoryScheme::Saga => memory.store(i, c, model),
                    MemoryScheme::Svrg { .. } => {
                        if memory.draw_refresh() {
                            memory.refresh_all(&self.z, model);
                            self.counters.grad_evals += n as u64;
                        }
                    }
                }
            }
            Estimator::Stochastic => {
                let i = self.rng.random_range(0..n);
                let c = model.gradient_scalar(i, &self.z);
                self.counters.grad_evals += 1;
                let l2 = model.l2();
                for (vj, &zj) in self.v.iter_mut().zip(&self.z) {
                    *vj = l2 * zj;
                }
                let (idx, val) = model.row(i);
                for (&j, &a) in idx.iter().zip(val) {
                    self.v[j] += c * a;
                }
            }
        }
        three_operator_update(&mut self.y, &self.z, &self.v, gamma, &*self.g, &mut self.buf);
        self.counters.prox_evals += 2;
        self.counters.steps += 1;
        if !self.buf.iter().all(|x| x.is_finite()) {
            return Err(SolverError::NonFinite {
                step: self.counters.steps - 1,
            });
        }
        if let Some(avg) = &mut self.ergodic {
            avg.push(&self.buf);
        }
        Ok(())
    }

    fn steps_per_epoch(&self) -> usize {
        match self.estimator {
            Estimator::Full => 1,
            _ => self.model.n(),
        }
    }

    fn point(&self) -> Vec<f64> {
        self.h.prox(&self.y, self.gamma)
    }

    fn residual(&self) -> f64 {
        let ones = vec![1.0; self.y.len()];
        operator_residual(&self.model, &*self.g, &*self.h, &self.y, self.gamma, &ones)
    }

    fn y(&self) -> Vec<f64> {
        self.y.clone()
    }

    fn weights(&self) -> Vec<f64> {
        vec![1.0; self.y.len()]
    }

    fn counters(&self) -> Counters {
        self.counters
    }

    fn ergodic_point(&self) -> Option<Vec<f64>> {
        self.ergodic.as_ref().map(|a| a.mean().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, Task};
    use crate::model::LossKind;
    use crate::penalties::{GroupLassoPenalty, L1Penalty, ZeroPenalty};
    use crate::solvers::{Solver, SolverKind};

    fn lasso(n: usize, p: usize, seed: u64) -> Problem {
        let d = generate_synthetic(n, p, 0.4, Task::Logistic, seed).unwrap();
        let m = SmoothModel::new(d, LossKind::Logistic, 1.0 / n as f64).unwrap();
        Problem::pair(m, L1Penalty::new(p, 0.02).unwrap(), GroupLassoPenalty::contiguous(p, 3, 0.01).unwrap()).unwrap()
    }

    #[test]
    fn full_tos_fixed_point_is_stationary() {
        let problem = lasso(30, 9, 1);
        let config = SolverConfig {
            step: Some(0.5),
            ..SolverConfig::default()
        };
        let mut s = Solver::new(&problem, SolverKind::Tos, &config).unwrap();
        for _ in 0..5000 {
            s.step().unwrap();
        }
        let y = s.y();
        s.step().unwrap();
        let moved: f64 = y.iter().zip(s.y()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(moved < 1e-12, "{moved}");
    }

    #[test]
    fn no_penalties_is_gradient_descent() {
        let d = generate_synthetic(20, 5, 0.6, Task::Squared, 2).unwrap();
        let m = SmoothModel::new(d, LossKind::Squared, 0.1).unwrap();
        let problem = Problem::pair(m.clone(), ZeroPenalty::new(5), ZeroPenalty::new(5)).unwrap();
        let config = SolverConfig {
            step: Some(0.05),
            ..SolverConfig::default()
        };
        let mut s = Solver::new(&problem, SolverKind::Tos, &config).unwrap();
        let mut x = vec![0.0; 5];
        for _ in 0..20 {
            s.step().unwrap();
            let g = m.full_gradient(&x);
            for j in 0..5 {
                x[j] -= 0.05 * g[j];
            }
        }
        for (a, b) in s.y().iter().zip(&x) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn stos_first_step_uses_full_step() {
        let problem = lasso(1, 4, 3);
        let config = SolverConfig {
            step: Some(0.3),
            ..SolverConfig::default()
        };
        let mut a = Solver::new(&problem, SolverKind::Stos, &config).unwrap();
        let mut b = Solver::new(&problem, SolverKind::Tos, &config).unwrap();
        a.step().unwrap();
        b.step().unwrap();
        assert_eq!(a.y(), b.y());
    }

    #[test]
    fn epoch_oracle_counts() {
        let problem = lasso(25, 6, 4);
        let mut s = Solver::new(&problem, SolverKind::VrTos, &SolverConfig::default()).unwrap();
        for _ in 0..25 {
            s.step().unwrap();
        }
        let c = s.counters();
        assert_eq!((c.grad_evals, c.prox_evals), (25, 50));
    }

    #[test]
    fn unbiased_estimator() {
        let problem = lasso(15, 7, 5);
        let m = problem.model();
        let z0 = [0.4, 0.0, -0.2, 0.3, 0.1, -0.6, 0.5];
        let mut mem = GradientMemory::new(m, MemoryScheme::Saga, Some(&z0), 0).unwrap();
        mem.store(3, 0.7, m);
        mem.store(8, -1.1, m);
        let z = [0.1, 0.2, 0.3, -0.4, 0.0, 0.2, -0.1];
        let mut avg = vec![0.0; 7];
        let mut v = vec![0.0; 7];
        for i in 0..15 {
            vr_estimate_into(m, &mem, i, m.gradient_scalar(i, &z), &z, &mut v);
            for j in 0..7 {
                avg[j] += v[j] / 15.0;
            }
        }
        for (a, b) in avg.iter().zip(m.full_gradient(&z)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
