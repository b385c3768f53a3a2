//! Closed-form proximal operators, plain and diagonally scaled.
//!
//! Scaled proxes solve `argmin_z φ(z) + ‖x − z‖²_{D⁻¹} / (2γ)` for a positive
//! diagonal `D`. For separable penalties the weight folds into the step:
//! coordinate `j` sees step `d_j γ`.

use super::PenaltyError;

/// Soft-thresholding of every coordinate at `d_j γ`.
pub fn prox_l1_scaled(x: &[f64], gamma: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(&xj, &dj)| soft_threshold(xj, dj * gamma)).collect()
}

#[inline]
pub(crate) fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Shrinks `block` towards zero: `x_B · (1 − t/‖x_B‖)₊`.
#[inline]
pub(crate) fn block_shrink(block: &mut [f64], t: f64) {
    let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= t {
        block.iter_mut().for_each(|v| *v = 0.0);
    } else {
        let scale = 1.0 - t / norm;
        block.iter_mut().for_each(|v| *v *= scale);
    }
}

/// Group-lasso prox for non-overlapping groups. Each group `B` is shrunk with
/// threshold `d_B γ λ₂`; coordinates outside every group are returned as is.
pub fn prox_group_lasso_scaled(
    x: &[f64],
    gamma: f64,
    d: &[f64],
    groups: &[Vec<usize>],
    strength: f64,
) -> Result<Vec<f64>, PenaltyError> {
    if d.len() != x.len() {
        return Err(PenaltyError::DimensionMismatch {
            expected: x.len(),
            found: d.len(),
        });
    }
    let mut seen = vec![false; x.len()];
    for (g, group) in groups.iter().enumerate() {
        for &j in group {
            if j >= x.len() {
                return Err(PenaltyError::InvalidPartition(format!(
                    "group {g} references coordinate {j} beyond dimension {}",
                    x.len()
                )));
            }
            if seen[j] {
                return Err(PenaltyError::OverlappingGroups { coordinate: j });
            }
            seen[j] = true;
        }
    }
    let mut out = x.to_vec();
    let mut buf = Vec::new();
    for (g, group) in groups.iter().enumerate() {
        if group.is_empty() {
            continue;
        }
        let d_b = d[group[0]];
        if group.iter().any(|&j| d[j] != d_b) {
            return Err(PenaltyError::NonUniformWeights { block: g });
        }
        buf.clear();
        buf.extend(group.iter().map(|&j| x[j]));
        block_shrink(&mut buf, d_b * gamma * strength);
        for (&j, &v) in group.iter().zip(&buf) {
            out[j] = v;
        }
    }
    Ok(out)
}

/// Scaled prox of `|z₁ − z₂|` on a pair, where `q` are the metric weights
/// (`q_j = 1/d_j`). Three cases: the pair stays ordered after moving each
/// coordinate by `γ/q_j`, or it collapses to the `q`-weighted mean.
pub fn prox_fused_block2_scaled(x: [f64; 2], gamma: f64, q: [f64; 2]) -> [f64; 2] {
    let (s1, s2) = (gamma / q[0], gamma / q[1]);
    if x[0] - s1 >= x[1] + s2 {
        [x[0] - s1, x[1] + s2]
    } else if x[0] + s1 <= x[1] - s2 {
        [x[0] + s1, x[1] - s2]
    } else {
        let m = (q[0] * x[0] + q[1] * x[1]) / (q[0] + q[1]);
        [m, m]
    }
}

/// Projection onto `{X₁ = … = X_k}` in the metric weighted by `a`: every
/// coordinate becomes `Σ_i a_ij X_ij / Σ_i a_ij`.
pub fn consensus_projection(x: &[Vec<f64>], a: &[Vec<f64>]) -> Result<Vec<f64>, PenaltyError> {
    let k = x.len();
    if k == 0 || a.len() != k {
        return Err(PenaltyError::DimensionMismatch {
            expected: k,
            found: a.len(),
        });
    }
    let p = x[0].len();
    for (xi, ai) in x.iter().zip(a) {
        if xi.len() != p || ai.len() != p {
            return Err(PenaltyError::DimensionMismatch {
                expected: p,
                found: xi.len().min(ai.len()),
            });
        }
        if let Some(&w) = ai.iter().find(|w| !(**w > 0.0)) {
            return Err(PenaltyError::NonPositiveWeight(w));
        }
    }
    let mut z = vec![0.0; p];
    for (j, zj) in z.iter_mut().enumerate() {
        let mut num = 0.0;
        let mut den = 0.0;
        for (xi, ai) in x.iter().zip(a) {
            num += ai[j] * xi[j];
            den += ai[j];
        }
        *zj = num / den;
    }
    Ok(z)
}

/// `λ₂ Σ_g ‖x_g‖₂` over a possibly overlapping group family.
pub fn value_overlapping_group_lasso(x: &[f64], groups: &[Vec<usize>], strength: f64) -> f64 {
    strength
        * groups
            .iter()
            .map(|g| g.iter().map(|&j| x[j] * x[j]).sum::<f64>().sqrt())
            .sum::<f64>()
}
