//! Sparse VR-TOS. Each step reads and writes only the coordinates of the
//! extended support `T_i` of the sampled row. The dense parts of the
//! estimator (`ᾱ + ∇ω`) are scaled by the inverse block frequencies `D`, and
//! `g` is replaced by `φ_i = Σ_{B∈T_i} d_B g_B`, whose prox is blockwise with
//! step `d_B γ`.
//!
//! `z = prox^{D⁻¹}_{γh}(y)` is never stored in full: since `h` is separable,
//! its value on `T_i` is recomputed from the current `y` when needed.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Counters, Problem, SolverConfig, SolverError, Stepper};
use crate::diagnostics::operator_residual;
use crate::memory::{GradientMemory, MemoryScheme};
use crate::model::SmoothModel;
use crate::penalties::{BlockPartition, Penalty, PenaltyError};
use crate::structure::{compute_extended_supports, compute_reweighting, ExtendedSupport};

pub(crate) struct SparseSplitting {
    model: Arc<SmoothModel>,
    g: Arc<dyn Penalty>,
    h: Arc<dyn Penalty>,
    g_part: BlockPartition,
    h_part: BlockPartition,
    supports: ExtendedSupport,
    d: Vec<f64>,
    gamma: f64,
    y: Vec<f64>,
    z: Vec<f64>,
    v: Vec<f64>,
    buf: Vec<f64>,
    h_stamp: Vec<u64>,
    vals: Vec<f64>,
    ws: Vec<f64>,
    memory: GradientMemory,
    rng: ChaCha8Rng,
    counters: Counters,
}

fn partition_of(p: &dyn Penalty) -> Result<BlockPartition, SolverError> {
    p.blocks()
        .cloned()
        .ok_or_else(|| PenaltyError::NotSeparable(p.name()).into())
}

impl SparseSplitting {
    pub(crate) fn new(problem: &Problem, config: &SolverConfig) -> Result<Self, SolverError> {
        let (g, h) = problem.pair_terms()?;
        let model = problem.model_arc();
        let p = model.p();
        let g_part = partition_of(&*g)?;
        let h_part = partition_of(&*h)?;
        let supports = compute_extended_supports(&model.data().features, &g_part)?;
        let weights = compute_reweighting(&supports, &g_part, model.n())?;
        let d = weights.per_coord().to_vec();
        g.accepts_weights(&d)?;
        h.accepts_weights(&d)?;
        let gamma = match config.step {
            Some(s) => s,
            None => model.smoothness_constants(weights.d_max())?.default_step(),
        };
        let y = config.start(p);
        let init = if config.init_memory {
            let mut z0 = y.clone();
            h.scaled_prox_in_place(&mut z0, gamma, &d);
            Some(z0)
        } else {
            None
        };
        let memory = GradientMemory::new(&model, config.scheme, init.as_deref(), config.seed.wrapping_add(1))?;
        let mut counters = Counters::default();
        if init.is_some() {
            counters.grad_evals += model.n() as u64;
        }
        let max_h = h_part.max_block_len();
        Ok(SparseSplitting {
            h_stamp: vec![u64::MAX; h_part.len()],
            vals: Vec::with_capacity(max_h.max(g_part.max_block_len())),
            ws: Vec::with_capacity(max_h.max(g_part.max_block_len())),
            z: y.clone(),
            v: vec![0.0; p],
            buf: vec![0.0; p],
            y,
            g,
            h,
            g_part,
            h_part,
            supports,
            d,
            gamma,
            memory,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            counters,
            model,
        })
    }

    pub(crate) fn gamma(&self) -> f64 {
        self.gamma
    }

    fn full_z(&self) -> Vec<f64> {
        let mut z = self.y.clone();
        self.h.scaled_prox_in_place(&mut z, self.gamma, &self.d);
        z
    }
}

impl Stepper for SparseSplitting {
    fn step(&mut self) -> Result<(), SolverError> {
        let model = &*self.model;
        let n = model.n();
        let gamma = self.gamma;
        let step = self.counters.steps;
        let i = self.rng.random_range(0..n);
        let coords = self.supports.coords(i);

        // z on T_i, block by block of h.
        if self.h.is_zero() {
            for &c in coords {
                self.z[c] = self.y[c];
            }
        } else {
            for &c in coords {
                let hb = self.h_part.block_of(c);
                if self.h_stamp[hb] == step {
                    continue;
                }
                self.h_stamp[hb] = step;
                let block = self.h_part.block(hb);
                self.vals.clear();
                self.ws.clear();
                self.vals.extend(block.iter().map(|&j| self.y[j]));
                self.ws.extend(block.iter().map(|&j| self.d[j]));
                self.h.prox_block(hb, &mut self.vals, gamma, &self.ws);
                for (&j, &x) in block.iter().zip(&self.vals) {
                    self.z[j] = x;
                }
            }
        }

        let c_new = model.gradient_scalar(i, &self.z);
        self.counters.grad_evals += 1;
        if self.memory.is_snapshot() {
            self.counters.grad_evals += 1;
        }
        let mean = self.memory.mean();
        let l2 = model.l2();
        for &c in coords {
            self.v[c] = self.d[c] * (mean[c] + l2 * self.z[c]);
        }
        let entry = self.memory.entry(i, model);
        let (idx, val) = model.row(i);
        for (&j, &a) in idx.iter().zip(val) {
            self.v[j] += c_new * a - GradientMemory::value_at(entry, j, a);
        }
        for &c in coords {
            self.buf[c] = 2.0 * self.z[c] - self.y[c] - gamma * self.v[c];
        }
        for &b in self.supports.blocks(i) {
            let block = self.g_part.block(b);
            self.vals.clear();
            self.ws.clear();
            self.vals.extend(block.iter().map(|&j| self.buf[j]));
            self.ws.extend(block.iter().map(|&j| self.d[j]));
            self.g.prox_block(b, &mut self.vals, gamma, &self.ws);
            for (&j, &x) in block.iter().zip(&self.vals) {
                self.buf[j] = x;
            }
        }
        let mut finite = true;
        for &c in coords {
            self.y[c] += self.buf[c] - self.z[c];
            finite &= self.y[c].is_finite();
        }

        match self.memory.scheme() {
            MemoryScheme::Saga => self.memory.store(i, c_new, model),
            MemoryScheme::Svrg { .. } => {
                if self.memory.draw_refresh() {
                    let z = self.full_z();
                    self.memory.refresh_all(&z, model);
                    self.counters.grad_evals += n as u64;
                }
            }
        }
        self.counters.prox_evals += 2;
        self.counters.steps += 1;
        if finite {
            Ok(())
        } else {
            Err(SolverError::NonFinite { step })
        }
    }

    fn steps_per_epoch(&self) -> usize {
        self.model.n()
    }

    fn point(&self) -> Vec<f64> {
        self.full_z()
    }

    fn residual(&self) -> f64 {
        operator_residual(&self.model, &*self.g, &*self.h, &self.y, self.gamma, &self.d)
    }

    fn y(&self) -> Vec<f64> {
        self.y.clone()
    }

    fn weights(&self) -> Vec<f64> {
        self.d.clone()
    }

    fn counters(&self) -> Counters {
        self.counters
    }
}
