//! The k-term formulation: one copy `Y_j` of the iterate per proximal term,
//! tied together by the indicator of `{Y_1 = … = Y_k}`. The smooth part acts
//! on the consensus point, so each copy sees `∇f/k`. The scaled prox of the
//! indicator is the weighted average with weights `1/d^{(j)}`.
//!
//! The consensus point `z` is stored and refreshed on `S_i` at the end of each
//! step, the only coordinates where some copy moved.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Counters, Problem, SolverConfig, SolverError, Stepper};
use crate::diagnostics::consensus_residual;
use crate::memory::{GradientMemory, MemoryScheme};
use crate::model::SmoothModel;
use crate::penalties::{BlockPartition, Penalty, PenaltyError};
use crate::structure::{compute_extended_supports, compute_reweighting, union_supports, ExtendedSupport};

struct Sparse {
    supports: Vec<ExtendedSupport>,
    union: Vec<Vec<usize>>,
    memory: GradientMemory,
    rng: ChaCha8Rng,
}

pub(crate) struct Consensus {
    model: Arc<SmoothModel>,
    terms: Vec<Arc<dyn Penalty>>,
    parts: Vec<BlockPartition>,
    d: Vec<Vec<f64>>,
    inv_d: Vec<Vec<f64>>,
    inv_sum: Vec<f64>,
    gamma: f64,
    ys: Vec<Vec<f64>>,
    z: Vec<f64>,
    scratch: Vec<f64>,
    buf: Vec<f64>,
    vals: Vec<f64>,
    ws: Vec<f64>,
    sparse: Option<Sparse>,
    counters: Counters,
}

impl Consensus {
    fn partitions(problem: &Problem) -> Result<Vec<BlockPartition>, SolverError> {
        problem
            .terms()
            .iter()
            .map(|t| {
                t.blocks()
                    .cloned()
                    .ok_or_else(|| PenaltyError::NotSeparable(t.name()).into())
            })
            .collect()
    }

    fn build(
        problem: &Problem,
        config: &SolverConfig,
        parts: Vec<BlockPartition>,
        d: Vec<Vec<f64>>,
        gamma: f64,
        sparse: Option<Sparse>,
    ) -> Self {
        let model = problem.model_arc();
        let p = model.p();
        let k = problem.k();
        let inv_d: Vec<Vec<f64>> = d.iter().map(|dj| dj.iter().map(|w| 1.0 / w).collect()).collect();
        let inv_sum: Vec<f64> = (0..p).map(|c| inv_d.iter().map(|a| a[c]).sum()).collect();
        let x0 = config.start(p);
        let ys = vec![x0; k];
        let mut s = Consensus {
            z: vec![0.0; p],
            scratch: vec![0.0; p],
            buf: vec![0.0; p],
            vals: Vec::with_capacity(parts.iter().map(|q| q.max_block_len()).max().unwrap_or(1)),
            ws: Vec::with_capacity(parts.iter().map(|q| q.max_block_len()).max().unwrap_or(1)),
            terms: problem.terms().to_vec(),
            parts,
            d,
            inv_d,
            inv_sum,
            gamma,
            ys,
            sparse,
            counters: Counters::default(),
            model,
        };
        for c in 0..p {
            s.refresh_z(c);
        }
        s
    }

    pub(crate) fn variance_reduced(problem: &Problem, config: &SolverConfig) -> Result<Self, SolverError> {
        let k = problem.k();
        if k < 2 {
            return Err(SolverError::Unsupported(format!(
                "the consensus solver needs at least two proximal terms, got {k}"
            )));
        }
        let model = problem.model();
        let parts = Self::partitions(problem)?;
        let mut supports = Vec::with_capacity(k);
        let mut d = Vec::with_capacity(k);
        let mut d_max: f64 = 1.0;
        for (term, part) in problem.terms().iter().zip(&parts) {
            let s = compute_extended_supports(&model.data().features, part)?;
            let w = compute_reweighting(&s, part, model.n())?;
            term.accepts_weights(w.per_coord())?;
            d_max = d_max.max(w.d_max());
            d.push(w.per_coord().to_vec());
            supports.push(s);
        }
        let gamma = match config.step {
            Some(s) => s,
            None => k as f64 * model.smoothness_constants(d_max)?.default_step(),
        };
        let union = union_supports(&supports);
        let memory = GradientMemory::new(model, config.scheme, None, config.seed.wrapping_add(1))?;
        let sparse = Sparse {
            supports,
            union,
            memory,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        };
        let mut s = Self::build(problem, config, parts, d, gamma, Some(sparse));
        if config.init_memory {
            let z0 = s.z.clone();
            if let Some(sp) = &mut s.sparse {
                sp.memory.refresh_all(&z0, model);
            }
            s.counters.grad_evals += model.n() as u64;
        }
        Ok(s)
    }

    /// Deterministic full-gradient splitting on the k-term formulation.
    pub(crate) fn full(problem: &Problem, config: &SolverConfig) -> Result<Self, SolverError> {
        let k = problem.k();
        let parts = Self::partitions(problem)?;
        let p = problem.model().p();
        let gamma = match config.step {
            Some(s) => s,
            None => k as f64 * problem.model().smoothness_constants(1.0)?.default_step(),
        };
        let d = vec![vec![1.0; p]; k];
        Ok(Self::build(problem, config, parts, d, gamma, None))
    }

    pub(crate) fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    fn refresh_z(&mut self, c: usize) {
        let mut num = 0.0;
        for (y, a) in self.ys.iter().zip(&self.inv_d) {
            num += a[c] * y[c];
        }
        self.z[c] = num / self.inv_sum[c];
    }

    fn full_step(&mut self) -> Result<(), SolverError> {
        let k = self.terms.len();
        let p = self.z.len();
        let inv_k = 1.0 / k as f64;
        let gamma = self.gamma;
        self.model.full_gradient_into(&self.z, &mut self.scratch);
        self.counters.grad_evals += self.model.n() as u64;
        let mut finite = true;
        for j in 0..k {
            let y = &mut self.ys[j];
            for c in 0..p {
                self.buf[c] = 2.0 * self.z[c] - y[c] - gamma * (self.scratch[c] * inv_k);
            }
            self.terms[j].prox_in_place(&mut self.buf, gamma);
            for c in 0..p {
                y[c] += self.buf[c] - self.z[c];
                finite &= y[c].is_finite();
            }
        }
        for c in 0..p {
            self.refresh_z(c);
        }
        self.counters.prox_evals += k as u64 + 1;
        self.counters.steps += 1;
        if finite {
            Ok(())
        } else {
            Err(SolverError::NonFinite {
                step: self.counters.steps - 1,
            })
        }
    }

    fn sparse_step(&mut self) -> Result<(), SolverError> {
        let step = self.counters.steps;
        let k = self.terms.len();
        let inv_k = 1.0 / k as f64;
        let gamma = self.gamma;
        let model = &*self.model;
        let n = model.n();
        let Some(sp) = self.sparse.as_mut() else {
            unreachable!("sparse step without sparse state")
        };
        let i = sp.rng.random_range(0..n);
        let c_new = model.gradient_scalar(i, &self.z);
        self.counters.grad_evals += 1;
        if sp.memory.is_snapshot() {
            self.counters.grad_evals += 1;
        }
        let entry = sp.memory.entry(i, model);
        let (idx, val) = model.row(i);
        for (&j, &a) in idx.iter().zip(val) {
            self.scratch[j] = c_new * a - GradientMemory::value_at(entry, j, a);
        }
        let mean = sp.memory.mean();
        let l2 = model.l2();
        let mut finite = true;
        for t in 0..k {
            let support = &sp.supports[t];
            let coords = support.coords(i);
            let d = &self.d[t];
            let y = &mut self.ys[t];
            for &c in coords {
                let v = (self.scratch[c] + d[c] * (mean[c] + l2 * self.z[c])) * inv_k;
                self.buf[c] = 2.0 * self.z[c] - y[c] - gamma * v;
            }
            let part = &self.parts[t];
            for &b in support.blocks(i) {
                let block = part.block(b);
                self.vals.clear();
                self.ws.clear();
                self.vals.extend(block.iter().map(|&c| self.buf[c]));
                self.ws.extend(block.iter().map(|&c| d[c]));
                self.terms[t].prox_block(b, &mut self.vals, gamma, &self.ws);
                for (&c, &x) in block.iter().zip(&self.vals) {
                    self.buf[c] = x;
                }
            }
            for &c in coords {
                y[c] += self.buf[c] - self.z[c];
                finite &= y[c].is_finite();
            }
        }
        for &j in idx {
            self.scratch[j] = 0.0;
        }
        match sp.memory.scheme() {
            MemoryScheme::Saga => sp.memory.store(i, c_new, model),
            MemoryScheme::Svrg { .. } => {
                if sp.memory.draw_refresh() {
                    sp.memory.refresh_all(&self.z, model);
                    self.counters.grad_evals += n as u64;
                }
            }
        }
        let union = std::mem::take(&mut sp.union[i]);
        for &c in &union {
            self.refresh_z(c);
        }
        if let Some(sp) = self.sparse.as_mut() {
            sp.union[i] = union;
        }
        self.counters.prox_evals += k as u64 + 1;
        self.counters.steps += 1;
        if finite {
            Ok(())
        } else {
            Err(SolverError::NonFinite { step })
        }
    }
}

impl Stepper for Consensus {
    fn step(&mut self) -> Result<(), SolverError> {
        if self.sparse.is_some() {
            self.sparse_step()
        } else {
            self.full_step()
        }
    }

    fn steps_per_epoch(&self) -> usize {
        if self.sparse.is_some() {
            self.model.n()
        } else {
            1
        }
    }

    fn point(&self) -> Vec<f64> {
        self.z.clone()
    }

    fn residual(&self) -> f64 {
        consensus_residual(&self.model, &self.terms, &self.ys, self.gamma, &self.d)
    }

    fn y(&self) -> Vec<f64> {
        self.ys.concat()
    }

    fn weights(&self) -> Vec<f64> {
        self.d.concat()
    }

    fn counters(&self) -> Counters {
        self.counters
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, Task};
    use crate::model::LossKind;
    use crate::penalties::{GroupLassoPenalty, L1Penalty, OverlappingGroupLasso, ZeroPenalty};
    use crate::solvers::{reference_solution, run, Solver, SolverKind};

    #[test]
    fn copies_agree_after_each_step_on_touched_coordinates() {
        let d = generate_synthetic(200, 30, 0.1, Task::Logistic, 1).unwrap();
        let m = SmoothModel::new(d, LossKind::Logistic, 0.02).unwrap();
        let ogl = OverlappingGroupLasso::successive(30, 10, 2, 0.01).unwrap();
        let terms: Vec<Arc<dyn Penalty>> = ogl.split().unwrap().into_iter().map(|p| Arc::new(p) as _).collect();
        let problem = Problem::new(m, terms).unwrap();
        let mut s = Solver::new(&problem, SolverKind::VrTosK, &SolverConfig::default()).unwrap();
        for _ in 0..500 {
            s.step().unwrap();
            let z = s.point();
            let ys = s.y();
            let w = s.weights();
            let expected = crate::diagnostics::consensus_point(
                &[ys[..30].to_vec(), ys[30..].to_vec()],
                &[w[..30].to_vec(), w[30..].to_vec()],
            );
            for (a, b) in z.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_second_term_matches_two_term_solution() {
        let d = generate_synthetic(40, 12, 1.0, Task::Logistic, 2).unwrap();
        let m = SmoothModel::new(d, LossKind::Logistic, 0.025).unwrap();
        let pair = Problem::pair(m.clone(), L1Penalty::new(12, 0.02).unwrap(), ZeroPenalty::new(12)).unwrap();
        let reference = reference_solution(&pair, 1e-12, 100_000).unwrap();
        let p_star = pair.objective(&reference.solution);
        let terms: Vec<Arc<dyn Penalty>> = vec![
            Arc::new(L1Penalty::new(12, 0.02).unwrap()),
            Arc::new(ZeroPenalty::new(12)),
        ];
        let problem = Problem::new(m, terms).unwrap();
        let config = SolverConfig {
            max_epochs: 300,
            tol: 1e-11,
            ..SolverConfig::default()
        };
        let r = run(&problem, SolverKind::VrTosK, &config).unwrap();
        assert!((problem.objective(&r.solution) - p_star).abs() < 1e-6);
    }

    #[test]
    fn fixed_point_is_preserved() {
        let d = generate_synthetic(30, 20, 0.2, Task::Squared, 3).unwrap();
        let m = SmoothModel::new(d, LossKind::Squared, 0.05).unwrap();
        let terms: Vec<Arc<dyn Penalty>> = vec![
            Arc::new(GroupLassoPenalty::contiguous(20, 4, 0.05).unwrap()),
            Arc::new(L1Penalty::new(20, 0.02).unwrap()),
        ];
        let problem = Problem::new(m, terms).unwrap();
        let config = SolverConfig {
            max_epochs: 3000,
            tol: 1e-14,
            init_memory: true,
            ..SolverConfig::default()
        };
        let mut s = Solver::new(&problem, SolverKind::VrTosK, &config).unwrap();
        for _ in 0..3000 * 30 {
            s.step().unwrap();
        }
        assert!(s.residual() < 1e-12, "{}", s.residual());
        let before = s.y();
        for _ in 0..30 {
            s.step().unwrap();
        }
        let moved = before.iter().zip(s.y()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(moved < 1e-12, "{moved}");
    }
}
