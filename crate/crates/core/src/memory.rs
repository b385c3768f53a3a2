//! Gradient memory for variance reduction.
//!
//! Every memory term `α_i` has the same probability `q/n` of being refreshed to
//! `∇ψ_i(z)` at each step. Two schemes are provided:
//!
//! * SAGA-like: the sampled index is refreshed (`q = 1`). For linearly
//!   parametrized losses `α_i = a_i · c_i`, so only the scalars `c_i` are kept.
//! * SVRG-like: with probability `q/n` every term is refreshed at once. Only the
//!   snapshot point `z̃` and the mean are stored; `α_i = ∇ψ_i(z̃)` is rebuilt on
//!   demand.
//!
//! The running mean `ᾱ` is updated incrementally and recomputed exactly every
//! `n` incremental updates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::SmoothModel;

#[derive(Debug, Error, PartialEq)]
pub enum MemoryError {
    #[error("SVRG refresh parameter q must lie in (0, n = {n}], got {q}")]
    InvalidQ { q: f64, n: usize },
    #[error("initial point has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MemoryScheme {
    Saga,
    Svrg { q: f64 },
}

impl MemoryScheme {
    /// Expected number of refreshed terms per step.
    pub fn q(&self) -> f64 {
        match self {
            MemoryScheme::Saga => 1.0,
            MemoryScheme::Svrg { q } => *q,
        }
    }
}

/// A stored `α_i`: either `c · a_i` or an explicit dense vector.
#[derive(Debug, Clone, Copy)]
pub enum Entry<'a> {
    Scaled(f64),
    Dense(&'a [f64]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refreshed {
    Nothing,
    One(usize),
    All,
}

#[derive(Debug, Clone)]
enum Storage {
    Compressed(Vec<f64>),
    Full(Vec<Vec<f64>>),
    Snapshot(Option<Vec<f64>>),
}

#[derive(Debug, Clone)]
pub struct GradientMemory {
    storage: Storage,
    mean: Vec<f64>,
    scheme: MemoryScheme,
    rng: ChaCha8Rng,
    n: usize,
    since_recompute: usize,
}

impl GradientMemory {
    /// Memory for `model`. Terms start at zero, or at `∇ψ_i(init)` when a point is given.
    pub fn new(
        model: &SmoothModel,
        scheme: MemoryScheme,
        init: Option<&[f64]>,
        seed: u64,
    ) -> Result<Self, MemoryError> {
        let n = model.n();
        if let MemoryScheme::Svrg { q } = scheme {
            if !(q > 0.0 && q <= n as f64) {
                return Err(MemoryError::InvalidQ { q, n });
            }
        }
        let storage = match scheme {
            MemoryScheme::Saga => Storage::Compressed(vec![0.0; n]),
            MemoryScheme::Svrg { .. } => Storage::Snapshot(None),
        };
        Self::build(model, scheme, storage, init, seed)
    }

    /// SAGA-like memory holding one dense `p`-vector per sample.
    pub fn with_full_table(model: &SmoothModel, init: Option<&[f64]>, seed: u64) -> Result<Self, MemoryError> {
        let storage = Storage::Full(vec![vec![0.0; model.p()]; model.n()]);
        Self::build(model, MemoryScheme::Saga, storage, init, seed)
    }

    fn build(
        model: &SmoothModel,
        scheme: MemoryScheme,
        storage: Storage,
        init: Option<&[f64]>,
        seed: u64,
    ) -> Result<Self, MemoryError> {
        let mut mem = GradientMemory {
            storage,
            mean: vec![0.0; model.p()],
            scheme,
            rng: ChaCha8Rng::seed_from_u64(seed),
            n: model.n(),
            since_recompute: 0,
        };
        if let Some(z) = init {
            if z.len() != model.p() {
                return Err(MemoryError::DimensionMismatch {
                    expected: model.p(),
                    found: z.len(),
                });
            }
            mem.refresh_all(z, model);
        }
        Ok(mem)
    }

    pub fn scheme(&self) -> MemoryScheme {
        self.scheme
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// True when the memory stores no per-sample table.
    pub fn is_snapshot(&self) -> bool {
        matches!(self.storage, Storage::Snapshot(_))
    }

    /// Stored term `α_i`. In snapshot mode this costs one partial gradient.
    #[inline]
    pub fn entry(&self, i: usize, model: &SmoothModel) -> Entry<'_> {
        match &self.storage {
            Storage::Compressed(c) => Entry::Scaled(c[i]),
            Storage::Full(t) => Entry::Dense(&t[i]),
            Storage::Snapshot(Some(z)) => Entry::Scaled(model.gradient_scalar(i, z)),
            Storage::Snapshot(None) => Entry::Scaled(0.0),
        }
    }

    /// `α_i` at coordinate `j`, where `a` is `a_ij` (terms live on `supp(a_i)`).
    #[inline]
    pub fn value_at(entry: Entry<'_>, j: usize, a: f64) -> f64 {
        match entry {
            Entry::Scaled(c) => c * a,
            Entry::Dense(v) => v[j],
        }
    }

    /// Dense copy of `α_i`.
    pub fn read(&self, i: usize, model: &SmoothModel) -> Vec<f64> {
        match self.entry(i, model) {
            Entry::Dense(v) => v.to_vec(),
            Entry::Scaled(c) => {
                let mut out = vec![0.0; model.p()];
                let (idx, val) = model.row(i);
                for (&j, &a) in idx.iter().zip(val) {
                    out[j] = c * a;
                }
                out
            }
        }
    }

    /// SAGA refresh of term `i` given the new scalar `c = l_i'(a_iᵀz)`.
    pub fn store(&mut self, i: usize, coef: f64, model: &SmoothModel) {
        let inv_n = 1.0 / self.n as f64;
        let (idx, val) = model.row(i);
        match &mut self.storage {
            Storage::Compressed(c) => {
                let delta = coef - c[i];
                c[i] = coef;
                for (&j, &a) in idx.iter().zip(val) {
                    self.mean[j] += delta * a * inv_n;
                }
            }
            Storage::Full(t) => {
                let row = &mut t[i];
                for (&j, &a) in idx.iter().zip(val) {
                    let new = coef * a;
                    self.mean[j] += (new - row[j]) * inv_n;
                    row[j] = new;
                }
            }
            Storage::Snapshot(_) => panic!("per-sample store on a snapshot memory"),
        }
        self.since_recompute += 1;
        if self.since_recompute >= self.n {
            self.recompute_mean(model);
        }
    }

    /// Sets every term to `∇ψ_i(z)`; `n` partial gradients.
    pub fn refresh_all(&mut self, z: &[f64], model: &SmoothModel) {
        match &mut self.storage {
            Storage::Compressed(c) => {
                for (i, ci) in c.iter_mut().enumerate() {
                    *ci = model.gradient_scalar(i, z);
                }
            }
            Storage::Full(t) => {
                for (i, row) in t.iter_mut().enumerate() {
                    let c = model.gradient_scalar(i, z);
                    let (idx, val) = model.row(i);
                    for (&j, &a) in idx.iter().zip(val) {
                        row[j] = c * a;
                    }
                }
            }
            Storage::Snapshot(s) => {
                *s = Some(z.to_vec());
            }
        }
        self.recompute_mean(model);
    }

    /// Exact `ᾱ = (1/n) Σ α_i`.
    pub fn recompute_mean(&mut self, model: &SmoothModel) {
        self.mean.iter_mut().for_each(|m| *m = 0.0);
        match &self.storage {
            Storage::Compressed(c) => {
                for (i, &ci) in c.iter().enumerate() {
                    let (idx, val) = model.row(i);
                    for (&j, &a) in idx.iter().zip(val) {
                        self.mean[j] += ci * a;
                    }
                }
            }
            Storage::Full(t) => {
                for row in t {
                    for (m, &v) in self.mean.iter_mut().zip(row) {
                        *m += v;
                    }
                }
            }
            Storage::Snapshot(Some(z)) => {
                for i in 0..self.n {
                    let c = model.gradient_scalar(i, z);
                    let (idx, val) = model.row(i);
                    for (&j, &a) in idx.iter().zip(val) {
                        self.mean[j] += c * a;
                    }
                }
            }
            Storage::Snapshot(None) => {}
        }
        let inv_n = 1.0 / self.n as f64;
        self.mean.iter_mut().for_each(|m| *m *= inv_n);
        self.since_recompute = 0;
    }

    /// SVRG trigger: draws `r ~ U[0, 1)` and reports whether `r < q/n`.
    /// Always false for the SAGA scheme.
    pub fn draw_refresh(&mut self) -> bool {
        match self.scheme {
            MemoryScheme::Saga => false,
            MemoryScheme::Svrg { q } => {
                let r: f64 = self.rng.random();
                r < q / self.n as f64
            }
        }
    }

    /// One q-memorization update after sampling `i` at point `z`.
    pub fn update(&mut self, i: usize, z: &[f64], model: &SmoothModel) -> Refreshed {
        match self.scheme {
            MemoryScheme::Saga => {
                let c = model.gradient_scalar(i, z);
                self.store(i, c, model);
                Refreshed::One(i)
            }
            MemoryScheme::Svrg { .. } => {
                if self.draw_refresh() {
                    self.refresh_all(z, model);
                    Refreshed::All
                } else {
                    Refreshed::Nothing
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, LabeledDataset, SparseRowMatrix, Task};
    use crate::model::LossKind;

    fn unit_model() -> SmoothModel {
        let x = SparseRowMatrix::from_rows(1, vec![vec![(0, 1.0)], vec![(0, 1.0)]]).unwrap();
        SmoothModel::new(LabeledDataset::new(x, vec![0.0, 0.0]).unwrap(), LossKind::Squared, 0.0).unwrap()
    }

    #[test]
    fn fresh_memory_is_zero() {
        let d = generate_synthetic(10, 6, 0.5, Task::Logistic, 1).unwrap();
        let m = SmoothModel::new(d, LossKind::Logistic, 0.1).unwrap();
        for scheme in [MemoryScheme::Saga, MemoryScheme::Svrg { q: 2.0 }] {
            let mem = GradientMemory::new(&m, scheme, None, 0).unwrap();
            assert_eq!(mem.read(3, &m), vec![0.0; 6]);
            assert_eq!(mem.mean(), &[0.0; 6]);
        }
    }

    #[test]
    fn compressed_update_matches_partial_gradient() {
        let d = generate_synthetic(10, 6, 0.5, Task::Logistic, 1).unwrap();
        let m = SmoothModel::new(d, LossKind::Logistic, 0.1).unwrap();
        let mut mem = GradientMemory::new(&m, MemoryScheme::Saga, None, 0).unwrap();
        let z = [0.3, -0.2, 0.5, 1.0, 0.0, -0.7];
        assert_eq!(mem.update(4, &z, &m), Refreshed::One(4));
        assert_eq!(mem.read(4, &m), m.partial_gradient(4, &z).to_dense(6));
    }

    #[test]
    fn incremental_mean_example() {
        let m = unit_model();
        let mut mem = GradientMemory::new(&m, MemoryScheme::Saga, None, 0).unwrap();
        mem.store(0, 1.0, &m);
        mem.store(1, 3.0, &m);
        assert_eq!(mem.mean(), &[2.0]);
        mem.store(0, 5.0, &m);
        assert_eq!(mem.mean(), &[4.0]);
    }

    #[test]
    fn svrg_with_q_equal_n_always_refreshes() {
        let d = generate_synthetic(8, 5, 0.6, Task::Squared, 4).unwrap();
        let m = SmoothModel::new(d, LossKind::Squared, 0.0).unwrap();
        let mut mem = GradientMemory::new(&m, MemoryScheme::Svrg { q: 8.0 }, None, 5).unwrap();
        let z = [0.1, 0.2, -0.3, 0.4, 0.0];
        for _ in 0..50 {
            assert_eq!(mem.update(0, &z, &m), Refreshed::All);
        }
        for i in 0..8 {
            assert_eq!(mem.read(i, &m), m.partial_gradient(i, &z).to_dense(5));
        }
        let mut mean = vec![0.0; 5];
        m.mean_loss_gradient_into(&z, &mut mean);
        for (a, b) in mem.mean().iter().zip(&mean) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_q() {
        let m = unit_model();
        assert!(GradientMemory::new(&m, MemoryScheme::Svrg { q: 0.0 }, None, 0).is_err());
        assert!(GradientMemory::new(&m, MemoryScheme::Svrg { q: 3.0 }, None, 0).is_err());
    }

    #[test]
    fn full_table_agrees_with_compressed() {
        let d = generate_synthetic(12, 7, 0.4, Task::Logistic, 8).unwrap();
        let m = SmoothModel::new(d, LossKind::Logistic, 0.0).unwrap();
        let z0 = [0.5; 7];
        let mut a = GradientMemory::new(&m, MemoryScheme::Saga, Some(&z0), 0).unwrap();
        let mut b = GradientMemory::with_full_table(&m, Some(&z0), 0).unwrap();
        let z = [0.1, -0.4, 0.2, 0.0, 0.9, -1.0, 0.3];
        for i in [3, 7, 3, 11, 0] {
            a.update(i, &z, &m);
            b.update(i, &z, &m);
        }
        for i in 0..12 {
            assert_eq!(a.read(i, &m), b.read(i, &m));
        }
        for (x, y) in a.mean().iter().zip(b.mean()) {
            assert!((x - y).abs() < 1e-15);
        }
    }
}
