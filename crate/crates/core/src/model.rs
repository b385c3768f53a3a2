//! Smooth part of the objective:
//!
//! ```text
//! f(x) = (1/n) Σ_i l_i(a_iᵀx) + (λ₁/2)‖x‖²
//! ```
//!
//! with `l_i` either the logistic loss `log(1 + exp(-b_i t))` or the squared
//! loss `(t - b_i)² / 2`. Every partial gradient is `a_i · l_i'(a_iᵀx)` and so
//! shares the sparsity pattern of row `a_i`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{LabeledDataset, Task};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dataset has no samples")]
    EmptyDataset,
    #[error("logistic loss needs labels in {{-1, +1}}, found {0}")]
    NonBinaryLabel(f64),
    #[error("ridge strength must be finite and nonnegative, got {0}")]
    InvalidRidge(f64),
    #[error("d_max must be at least 1, got {0}")]
    InvalidDMax(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Logistic,
    Squared,
}

impl From<Task> for LossKind {
    fn from(t: Task) -> Self {
        match t {
            Task::Logistic => LossKind::Logistic,
            Task::Squared => LossKind::Squared,
        }
    }
}

impl LossKind {
    /// Upper bound on `l''`.
    fn curvature(self) -> f64 {
        match self {
            LossKind::Logistic => 0.25,
            LossKind::Squared => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessConstants {
    /// Smoothness shared by every `ψ_i`.
    pub l_psi: f64,
    /// Smoothness of the ridge term, equal to λ₁.
    pub l_omega: f64,
    /// Strong convexity of the ridge term, equal to λ₁.
    pub mu_omega: f64,
    pub d_max: f64,
}

impl SmoothnessConstants {
    /// `L_f = L_ψ + d_max · L_ω`.
    pub fn l_f(&self) -> f64 {
        self.l_psi + self.d_max * self.l_omega
    }

    pub fn default_step(&self) -> f64 {
        1.0 / (3.0 * self.l_f())
    }
}

/// Sparse partial gradient supported on the sample's features.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGradient {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseGradient {
    pub fn to_dense(&self, p: usize) -> Vec<f64> {
        let mut out = vec![0.0; p];
        for (&j, &v) in self.indices.iter().zip(&self.values) {
            out[j] = v;
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SmoothModel {
    data: LabeledDataset,
    loss: LossKind,
    l2: f64,
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(m))` without overflow.
#[inline]
fn log1p_exp(m: f64) -> f64 {
    if m > 0.0 {
        m + (-m).exp().ln_1p()
    } else {
        m.exp().ln_1p()
    }
}

impl SmoothModel {
    pub fn new(data: LabeledDataset, loss: LossKind, l2: f64) -> Result<Self, ModelError> {
        if data.n_samples() == 0 {
            return Err(ModelError::EmptyDataset);
        }
        if !(l2.is_finite() && l2 >= 0.0) {
            return Err(ModelError::InvalidRidge(l2));
        }
        if loss == LossKind::Logistic {
            if let Some(&b) = data.labels.iter().find(|&&b| b != 1.0 && b != -1.0) {
                return Err(ModelError::NonBinaryLabel(b));
            }
        }
        Ok(SmoothModel { data, loss, l2 })
    }

    pub fn data(&self) -> &LabeledDataset {
        &self.data
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    /// Ridge strength λ₁.
    pub fn l2(&self) -> f64 {
        self.l2
    }

    pub fn n(&self) -> usize {
        self.data.n_samples()
    }

    pub fn p(&self) -> usize {
        self.data.n_features()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        self.data.features.row(i)
    }

    #[inline]
    pub fn margin(&self, i: usize, z: &[f64]) -> f64 {
        self.data.features.row_dot(i, z)
    }

    /// `l_i'(t)`.
    #[inline]
    pub fn scalar_derivative(&self, i: usize, t: f64) -> f64 {
        let b = self.data.labels[i];
        match self.loss {
            LossKind::Logistic => -b * sigmoid(-b * t),
            LossKind::Squared => t - b,
        }
    }

    #[inline]
    fn scalar_loss(&self, i: usize, t: f64) -> f64 {
        let b = self.data.labels[i];
        match self.loss {
            LossKind::Logistic => log1p_exp(-b * t),
            LossKind::Squared => 0.5 * (t - b) * (t - b),
        }
    }

    /// `l_i'(a_iᵀz)`, the scalar that determines `∇ψ_i(z) = a_i · l_i'(a_iᵀz)`.
    #[inline]
    pub fn gradient_scalar(&self, i: usize, z: &[f64]) -> f64 {
        self.scalar_derivative(i, self.margin(i, z))
    }

    /// `∇ψ_i(z)` on the support of `a_i`; excludes the ridge term.
    pub fn partial_gradient(&self, i: usize, z: &[f64]) -> SparseGradient {
        let c = self.gradient_scalar(i, z);
        let (idx, val) = self.row(i);
        SparseGradient {
            indices: idx.to_vec(),
            values: val.iter().map(|a| a * c).collect(),
        }
    }

    /// Writes `(1/n) Σ ∇ψ_i(z)` (no ridge) into `out`.
    pub fn mean_loss_gradient_into(&self, z: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..self.n() {
            let c = self.gradient_scalar(i, z);
            let (idx, val) = self.row(i);
            for (&j, &a) in idx.iter().zip(val) {
                out[j] += c * a;
            }
        }
        let inv_n = 1.0 / self.n() as f64;
        out.iter_mut().for_each(|o| *o *= inv_n);
    }

    pub fn full_gradient_into(&self, z: &[f64], out: &mut [f64]) {
        self.mean_loss_gradient_into(z, out);
        for (o, &zj) in out.iter_mut().zip(z) {
            *o += self.l2 * zj;
        }
    }

    pub fn full_gradient(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.p()];
        self.full_gradient_into(z, &mut out);
        out
    }

    pub fn smooth_value(&self, z: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n() {
            acc += self.scalar_loss(i, self.margin(i, z));
        }
        let ridge: f64 = z.iter().map(|v| v * v).sum();
        acc / self.n() as f64 + 0.5 * self.l2 * ridge
    }

    pub fn smoothness_constants(&self, d_max: f64) -> Result<SmoothnessConstants, ModelError> {
        if self.n() == 0 {
            return Err(ModelError::EmptyDataset);
        }
        if !(d_max >= 1.0) {
            return Err(ModelError::InvalidDMax(d_max));
        }
        let max_norm = (0..self.n())
            .map(|i| self.data.features.row_norm_sq(i))
            .fold(0.0, f64::max);
        Ok(SmoothnessConstants {
            l_psi: max_norm * self.loss.curvature(),
            l_omega: self.l2,
            mu_omega: self.l2,
            d_max,
        })
    }

    /// Estimate of the Lipschitz constant of the full gradient `∇f`, via power
    /// iteration on `AᵀA / n`. Used for deterministic reference solves, where
    /// the per-sample bound is needlessly pessimistic.
    pub fn full_smoothness_estimate(&self, iters: usize) -> f64 {
        let (n, p) = (self.n(), self.p());
        if p == 0 {
            return self.l2;
        }
        let mut v: Vec<f64> = (0..p).map(|j| 1.0 + (j % 7) as f64 * 0.1).collect();
        let mut w = vec![0.0; p];
        let mut lambda = 0.0;
        for _ in 0..iters.max(1) {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            w.iter_mut().for_each(|x| *x = 0.0);
            for i in 0..n {
                let t = self.margin(i, &v);
                let (idx, val) = self.row(i);
                for (&j, &a) in idx.iter().zip(val) {
                    w[j] += t * a;
                }
            }
            w.iter_mut().for_each(|x| *x /= n as f64);
            lambda = w.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
            std::mem::swap(&mut v, &mut w);
        }
        lambda * self.loss.curvature() + self.l2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SparseRowMatrix};

    fn model(rows: Vec<Vec<(usize, f64)>>, p: usize, labels: Vec<f64>, loss: LossKind, l2: f64) -> SmoothModel {
        let x = SparseRowMatrix::from_rows(p, rows).unwrap();
        SmoothModel::new(LabeledDataset::new(x, labels).unwrap(), loss, l2).unwrap()
    }

    #[test]
    fn scalar_derivative_values() {
        let sq = model(vec![vec![(0, 1.0)]], 1, vec![1.0], LossKind::Squared, 0.0);
        assert_eq!(sq.scalar_derivative(0, 1.0), 0.0);
        let lg = model(vec![vec![(0, 1.0)], vec![(0, 1.0)]], 1, vec![1.0, -1.0], LossKind::Logistic, 0.0);
        assert_eq!(lg.scalar_derivative(0, 0.0), -0.5);
        assert_eq!(lg.scalar_derivative(1, 0.0), 0.5);
    }

    #[test]
    fn partial_gradient_pattern() {
        let m = model(vec![vec![(2, 1.0), (6, -2.0)]], 8, vec![1.0], LossKind::Logistic, 0.0);
        let g = m.partial_gradient(0, &[0.3; 8]);
        assert_eq!(g.indices, vec![2, 6]);

        let sq = model(vec![vec![(0, 1.0)]], 3, vec![0.0], LossKind::Squared, 0.0);
        let g = sq.partial_gradient(0, &[3.0, 1.0, -1.0]);
        assert_eq!(g.to_dense(3), vec![3.0, 0.0, 0.0]);
    }

    #[test]
    fn stationary_at_exact_fit() {
        let m = model(
            vec![vec![(0, 1.0)], vec![(1, 2.0)]],
            2,
            vec![1.0, 4.0],
            LossKind::Squared,
            0.0,
        );
        let z = [1.0, 2.0];
        assert_eq!(m.full_gradient(&z), vec![0.0, 0.0]);
        assert_eq!(m.smooth_value(&z), 0.0);
    }

    #[test]
    fn single_sample_gradient() {
        let m = model(vec![vec![(0, 0.5), (1, -1.0)]], 3, vec![-1.0], LossKind::Logistic, 0.3);
        let z = [0.2, -0.4, 1.0];
        let g = m.partial_gradient(0, &z).to_dense(3);
        let full = m.full_gradient(&z);
        for j in 0..3 {
            assert_eq!(full[j], g[j] + 0.3 * z[j]);
        }
    }

    #[test]
    fn logistic_value_at_zero() {
        let d = generate_synthetic(20, 5, 0.5, Task::Logistic, 2).unwrap();
        let m = SmoothModel::new(d, LossKind::Logistic, 0.0).unwrap();
        assert!((m.smooth_value(&[0.0; 5]) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn logistic_value_stable_at_large_margins() {
        let m = model(vec![vec![(0, 1.0)]], 1, vec![1.0], LossKind::Logistic, 0.0);
        assert_eq!(m.smooth_value(&[1000.0]), 0.0);
        assert!((m.smooth_value(&[-1000.0]) - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn constants() {
        let sq = model(vec![vec![(0, 1.0)]], 2, vec![0.0], LossKind::Squared, 0.0);
        assert_eq!(sq.smoothness_constants(1.0).unwrap().l_f(), 1.0);

        let lg = model(
            vec![vec![(0, 2.0)], vec![(1, -2.0)]],
            2,
            vec![1.0, -1.0],
            LossKind::Logistic,
            0.0,
        );
        assert_eq!(lg.smoothness_constants(1.0).unwrap().l_psi, 1.0);

        let c = SmoothnessConstants {
            l_psi: 1.0,
            l_omega: 0.5,
            mu_omega: 0.5,
            d_max: 2.0,
        };
        assert_eq!(c.l_f(), 2.0);
        assert!(sq.smoothness_constants(0.5).is_err());
    }

    #[test]
    fn rejects_non_binary_logistic() {
        let x = SparseRowMatrix::from_rows(1, vec![vec![(0, 1.0)]]).unwrap();
        let d = LabeledDataset::new(x, vec![0.5]).unwrap();
        assert!(matches!(
            SmoothModel::new(d, LossKind::Logistic, 0.0),
            Err(ModelError::NonBinaryLabel(_))
        ));
    }
}
