//! Proximal SAGA and proximal SVRG with an inexact prox of `g + h`:
//! `x ← DR(x − γv)`, a fixed number of Douglas–Rachford sweeps per step.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dense::vr_estimate_into;
use super::{Counters, Problem, SolverConfig, SolverError, SolverKind, Stepper};
use crate::memory::{GradientMemory, MemoryScheme};
use crate::model::SmoothModel;
use crate::penalties::{DouglasRachford, Penalty};

/// Sweeps used when measuring the prox-gradient residual.
const RESIDUAL_SWEEPS: usize = 100;

pub(crate) struct ProxGradient {
    model: Arc<SmoothModel>,
    g: Arc<dyn Penalty>,
    h: Arc<dyn Penalty>,
    gamma: f64,
    x: Vec<f64>,
    v: Vec<f64>,
    buf: Vec<f64>,
    memory: GradientMemory,
    dr: DouglasRachford,
    dr_iters: usize,
    rng: ChaCha8Rng,
    counters: Counters,
}

impl ProxGradient {
    pub(crate) fn new(problem: &Problem, kind: SolverKind, config: &SolverConfig) -> Result<Self, SolverError> {
        let (g, h) = problem.pair_terms()?;
        let model = problem.model_arc();
        let p = model.p();
        let scheme = match (kind, config.scheme) {
            (SolverKind::ProxSvrg, s @ MemoryScheme::Svrg { .. }) => s,
            (SolverKind::ProxSvrg, MemoryScheme::Saga) => MemoryScheme::Svrg { q: 1.0 },
            _ => MemoryScheme::Saga,
        };
        let gamma = match config.step {
            Some(s) => s,
            None => model.smoothness_constants(1.0)?.default_step(),
        };
        let x = config.start(p);
        let init = config.init_memory.then(|| x.clone());
        let memory = GradientMemory::new(&model, scheme, init.as_deref(), config.seed.wrapping_add(1))?;
        let mut counters = Counters::default();
        if init.is_some() {
            counters.grad_evals += model.n() as u64;
        }
        Ok(ProxGradient {
            v: vec![0.0; p],
            buf: vec![0.0; p],
            x,
            g,
            h,
            gamma,
            memory,
            dr: DouglasRachford::new(config.dr_warm_start),
            dr_iters: config.dr_iters,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            counters,
            model,
        })
    }

    pub(crate) fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl Stepper for ProxGradient {
    fn step(&mut self) -> Result<(), SolverError> {
        let model = &*self.model;
        let n = model.n();
        let i = self.rng.random_range(0..n);
        let c = model.gradient_scalar(i, &self.x);
        self.counters.grad_evals += 1;
        if self.memory.is_snapshot() {
            self.counters.grad_evals += 1;
        }
        vr_estimate_into(model, &self.memory, i, c, &self.x, &mut self.v);
        match self.memory.scheme() {
            MemoryScheme::Saga => self.memory.store(i, c, model),
            MemoryScheme::Svrg { .. } => {
                if self.memory.draw_refresh() {
                    self.memory.refresh_all(&self.x, model);
                    self.counters.grad_evals += n as u64;
                }
            }
        }
        for j in 0..self.x.len() {
            self.buf[j] = self.x[j] - self.gamma * self.v[j];
        }
        self.x = self.dr.solve(&self.buf, self.gamma, &*self.g, &*self.h, self.dr_iters);
        self.counters.prox_evals += 2 * self.dr_iters as u64;
        self.counters.steps += 1;
        if self.x.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(SolverError::NonFinite {
                step: self.counters.steps - 1,
            })
        }
    }

    fn steps_per_epoch(&self) -> usize {
        self.model.n()
    }

    fn point(&self) -> Vec<f64> {
        self.x.clone()
    }

    /// `‖x − prox_{γ(g+h)}(x − γ∇f(x))‖`, the prox evaluated by cold-started
    /// Douglas–Rachford.
    fn residual(&self) -> f64 {
        let grad = self.model.full_gradient(&self.x);
        let w: Vec<f64> = self.x.iter().zip(&grad).map(|(x, g)| x - self.gamma * g).collect();
        let mut dr = DouglasRachford::new(false);
        let p = dr.solve(&w, self.gamma, &*self.g, &*self.h, RESIDUAL_SWEEPS);
        self.x.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    fn y(&self) -> Vec<f64> {
        self.x.clone()
    }

    fn weights(&self) -> Vec<f64> {
        vec![1.0; self.x.len()]
    }

    fn counters(&self) -> Counters {
        self.counters
    }
}
