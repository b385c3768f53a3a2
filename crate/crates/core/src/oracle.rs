//! Brute-force proximal minimizers for checking the closed forms.
//!
//! Every objective here is convex, so minimizing one coordinate at a time by
//! nested golden-section search (the inner minimum is again convex in the outer
//! variables) converges to the global minimizer without derivatives.

use std::cell::RefCell;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::penalties::{consensus_projection, prox_fused_block2_scaled, prox_group_lasso_scaled, prox_l1_scaled};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Minimizer of a unimodal `f` on `[lo, hi]` to within `tol`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    while hi - lo > tol {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - INV_PHI * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + INV_PHI * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Minimizes a convex `f` over the box `[lo, hi]` by nested golden-section
/// search over the coordinates.
pub fn minimize_box(f: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], tol: f64) -> Vec<f64> {
    let mut x: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
    nested(f, lo, hi, tol, 0, &mut x);
    x
}

fn nested(f: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], tol: f64, level: usize, x: &mut [f64]) -> f64 {
    if level == x.len() {
        return f(x);
    }
    let work = RefCell::new(x.to_vec());
    let best = golden_section(
        |t| {
            let mut w = work.borrow_mut();
            w[level] = t;
            nested(f, lo, hi, tol, level + 1, &mut w)
        },
        lo[level],
        hi[level],
        tol,
    );
    x[level] = best;
    nested(f, lo, hi, tol, level + 1, x)
}

fn bracket(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let r = x.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
    (vec![-r; x.len()], vec![r; x.len()])
}

const TOL: f64 = 1e-10;

/// `argmin_z s‖z‖₁ + Σ_j (x_j − z_j)² / (2γ d_j)`, one coordinate at a time.
pub fn brute_prox_l1(x: &[f64], gamma: f64, d: &[f64], strength: f64) -> Vec<f64> {
    if gamma == 0.0 {
        return x.to_vec();
    }
    x.iter()
        .zip(d)
        .map(|(&xj, &dj)| {
            let r = xj.abs() + 1.0;
            golden_section(|z| strength * z.abs() + (xj - z) * (xj - z) / (2.0 * gamma * dj), -r, r, TOL)
        })
        .collect()
}

/// `argmin_z s‖z‖₂ + ‖x − z‖² / (2γ d)` for one block with uniform weight `d`.
pub fn brute_prox_group(x: &[f64], gamma: f64, d: f64, strength: f64) -> Vec<f64> {
    if gamma == 0.0 {
        return x.to_vec();
    }
    let f = |z: &[f64]| {
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dist: f64 = z.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        strength * norm + dist / (2.0 * gamma * d)
    };
    let (lo, hi) = bracket(x);
    minimize_box(&f, &lo, &hi, TOL)
}

/// `argmin_z |z₁ − z₂| + Σ_j q_j (x_j − z_j)² / (2γ)`.
///
/// Searched over `u = z₁ − z₂` (outer) and `w = z₁ + z₂` (inner) so the kink
/// lies on one search axis and the inner problem is smooth.
pub fn brute_prox_fused(x: [f64; 2], gamma: f64, q: [f64; 2]) -> [f64; 2] {
    if gamma == 0.0 {
        return x;
    }
    let f = |uw: &[f64]| {
        let (z0, z1) = (0.5 * (uw[1] + uw[0]), 0.5 * (uw[1] - uw[0]));
        uw[0].abs() + (q[0] * (x[0] - z0).powi(2) + q[1] * (x[1] - z1).powi(2)) / (2.0 * gamma)
    };
    let (lo, hi) = bracket(&x);
    let lo: Vec<f64> = lo.iter().map(|v| 2.0 * v).collect();
    let hi: Vec<f64> = hi.iter().map(|v| 2.0 * v).collect();
    let uw = minimize_box(&f, &lo, &hi, TOL);
    [0.5 * (uw[1] + uw[0]), 0.5 * (uw[1] - uw[0])]
}

/// `argmin_z Σ_i a_ij (z_j − X_ij)²`, coordinate by coordinate.
pub fn brute_consensus(x: &[Vec<f64>], a: &[Vec<f64>]) -> Vec<f64> {
    let p = x.first().map_or(0, Vec::len);
    (0..p)
        .map(|j| {
            let r = x.iter().fold(0.0f64, |m, xi| m.max(xi[j].abs())) + 1.0;
            golden_section(
                |z| x.iter().zip(a).map(|(xi, ai)| ai[j] * (z - xi[j]).powi(2)).sum(),
                -r,
                r,
                TOL,
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxKind {
    L1,
    GroupLasso,
    Fused,
    Consensus,
}

impl FromStr for ProxKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "l1" | "lasso" => Ok(ProxKind::L1),
            "group_lasso" | "group-lasso" => Ok(ProxKind::GroupLasso),
            "fused" | "fused_lasso" | "fused-lasso" => Ok(ProxKind::Fused),
            "consensus" => Ok(ProxKind::Consensus),
            other => Err(format!(
                "unknown penalty kind {other:?} (expected l1, group_lasso, fused or consensus)"
            )),
        }
    }
}

impl fmt::Display for ProxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            ProxKind::L1 => "l1",
            ProxKind::GroupLasso => "group_lasso",
            ProxKind::Fused => "fused",
            ProxKind::Consensus => "consensus",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxCheckReport {
    pub kind: ProxKind,
    pub trials: usize,
    pub max_deviation: f64,
    /// Largest deviation over the trials drawn with `γ = 0`.
    pub max_deviation_zero_step: f64,
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Compares the closed form for `kind` with the brute-force minimizer over
/// random `(x, γ, d)`; one trial in ten uses `γ = 0`.
pub fn check_prox(kind: ProxKind, trials: usize, seed: u64) -> ProxCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 2.0).expect("valid normal");
    let mut worst = 0.0f64;
    let mut worst_zero = 0.0f64;
    for t in 0..trials {
        let gamma = if t % 10 == 9 { 0.0 } else { rng.random_range(0.01..2.0) };
        let dev = match kind {
            ProxKind::L1 => {
                let m = rng.random_range(1..=5);
                let x: Vec<f64> = (0..m).map(|_| normal.sample(&mut rng)).collect();
                let d: Vec<f64> = (0..m).map(|_| rng.random_range(1.0..4.0)).collect();
                let s = rng.random_range(0.1..2.0);
                let closed = prox_l1_scaled(&x, gamma * s, &d);
                max_abs_diff(&closed, &brute_prox_l1(&x, gamma, &d, s))
            }
            ProxKind::GroupLasso => {
                let m = rng.random_range(2..=3);
                let x: Vec<f64> = (0..m).map(|_| normal.sample(&mut rng)).collect();
                let db = rng.random_range(1.0..4.0);
                let s = rng.random_range(0.1..2.0);
                let groups = vec![(0..m).collect::<Vec<_>>()];
                let closed = prox_group_lasso_scaled(&x, gamma, &vec![db; m], &groups, s).expect("valid groups");
                max_abs_diff(&closed, &brute_prox_group(&x, gamma, db, s))
            }
            ProxKind::Fused => {
                let x = [normal.sample(&mut rng), normal.sample(&mut rng)];
                let q = [1.0 / rng.random_range(1.0..4.0), 1.0 / rng.random_range(1.0..4.0)];
                let closed = prox_fused_block2_scaled(x, gamma, q);
                max_abs_diff(&closed, &brute_prox_fused(x, gamma, q))
            }
            ProxKind::Consensus => {
                let k = rng.random_range(1..=4);
                let p = rng.random_range(1..=4);
                let x: Vec<Vec<f64>> = (0..k).map(|_| (0..p).map(|_| normal.sample(&mut rng)).collect()).collect();
                let a: Vec<Vec<f64>> = (0..k).map(|_| (0..p).map(|_| rng.random_range(0.25..1.0)).collect()).collect();
                let closed = consensus_projection(&x, &a).expect("positive weights");
                max_abs_diff(&closed, &brute_consensus(&x, &a))
            }
        };
        worst = worst.max(dev);
        if gamma == 0.0 {
            worst_zero = worst_zero.max(dev);
        }
    }
    ProxCheckReport {
        kind,
        trials,
        max_deviation: worst,
        max_deviation_zero_step: worst_zero,
    }
}
