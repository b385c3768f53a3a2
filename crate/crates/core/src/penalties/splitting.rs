//! Splitting non-separable penalties into separable terms, and an inner
//! Douglas–Rachford solver for the prox of a sum.

use super::{FusedPairsPenalty, GroupLassoPenalty, Penalty, PenaltyError, Regularizer};

/// Splits the 1-D total variation `λ Σ |x_i − x_{i+1}|` into pairs starting at
/// even indices (`g`) and pairs starting at odd indices (`h`).
pub fn fused_lasso_split(p: usize, strength: f64) -> Result<(FusedPairsPenalty, FusedPairsPenalty), PenaltyError> {
    if p < 2 {
        return Err(PenaltyError::DimensionTooSmall(p));
    }
    let even: Vec<usize> = (0..p - 1).step_by(2).collect();
    let odd: Vec<usize> = (1..p - 1).step_by(2).collect();
    Ok((
        FusedPairsPenalty::new(p, &even, strength)?,
        FusedPairsPenalty::new(p, &odd, strength)?,
    ))
}

/// `λ Σ_g ‖x_g‖₂` over groups that may overlap. Only its value is computed
/// directly; optimization goes through [`OverlappingGroupLasso::split`].
#[derive(Debug, Clone)]
pub struct OverlappingGroupLasso {
    dim: usize,
    groups: Vec<Vec<usize>>,
    strength: f64,
}

impl OverlappingGroupLasso {
    pub fn new(dim: usize, groups: Vec<Vec<usize>>, strength: f64) -> Result<Self, PenaltyError> {
        if !(strength.is_finite() && strength >= 0.0) {
            return Err(PenaltyError::InvalidStrength(strength));
        }
        for (g, group) in groups.iter().enumerate() {
            if let Some(&j) = group.iter().find(|&&j| j >= dim) {
                return Err(PenaltyError::InvalidPartition(format!(
                    "group {g} references coordinate {j} beyond dimension {dim}"
                )));
            }
        }
        Ok(OverlappingGroupLasso {
            dim,
            groups,
            strength,
        })
    }

    /// Groups of `size` consecutive coordinates where successive groups share
    /// `overlap` coordinates: `{0..size}, {size-overlap..2size-overlap}, …`,
    /// the last one truncated at `dim`.
    pub fn successive(dim: usize, size: usize, overlap: usize, strength: f64) -> Result<Self, PenaltyError> {
        if size == 0 || overlap >= size {
            return Err(PenaltyError::InvalidPartition(format!(
                "group size {size} must exceed overlap {overlap}"
            )));
        }
        let stride = size - overlap;
        let mut groups = Vec::new();
        let mut start = 0;
        while start < dim {
            let end = (start + size).min(dim);
            groups.push((start..end).collect());
            if end == dim {
                break;
            }
            start += stride;
        }
        Self::new(dim, groups, strength)
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Greedy first-fit assignment of groups into families of mutually disjoint
    /// groups. For successive groups with small overlap this yields the
    /// even/odd split into exactly two group-lasso penalties.
    pub fn split(&self) -> Result<Vec<GroupLassoPenalty>, PenaltyError> {
        let mut families: Vec<(Vec<bool>, Vec<Vec<usize>>)> = Vec::new();
        for group in &self.groups {
            let slot = families
                .iter()
                .position(|(used, _)| group.iter().all(|&j| !used[j]));
            let idx = match slot {
                Some(i) => i,
                None => {
                    families.push((vec![false; self.dim], Vec::new()));
                    families.len() - 1
                }
            };
            let (used, members) = &mut families[idx];
            for &j in group {
                used[j] = true;
            }
            members.push(group.clone());
        }
        families
            .into_iter()
            .map(|(_, members)| GroupLassoPenalty::new(self.dim, &members, self.strength))
            .collect()
    }
}

impl Regularizer for OverlappingGroupLasso {
    fn value(&self, x: &[f64]) -> f64 {
        super::value_overlapping_group_lasso(x, &self.groups, self.strength)
    }
}

/// Douglas–Rachford solver for `prox_{γ(g+h)}(x)`.
///
/// The objective `γg(z) + γh(z) + ½‖z − x‖²` is split into
/// `γg(z) + ¼‖z − x‖²` and `γh(z) + ¼‖z − x‖²`. With splitting step 2 their
/// proxes are `prox_{γg}((x + w)/2)` and `prox_{γh}((x + w)/2)`. The splitting
/// variable `w` is remembered as an offset from `x` and reused by the next call.
#[derive(Debug, Clone, Default)]
pub struct DouglasRachford {
    offset: Option<Vec<f64>>,
    warm_start: bool,
}

impl DouglasRachford {
    pub fn new(warm_start: bool) -> Self {
        DouglasRachford {
            offset: None,
            warm_start,
        }
    }

    pub fn reset(&mut self) {
        self.offset = None;
    }

    /// Runs `iters` sweeps and returns the last `g`-prox point. Each sweep
    /// evaluates one prox of `g` and one of `h`.
    pub fn solve(&mut self, x: &[f64], gamma: f64, g: &dyn Penalty, h: &dyn Penalty, iters: usize) -> Vec<f64> {
        let p = x.len();
        let mut w: Vec<f64> = match (&self.offset, self.warm_start) {
            (Some(off), true) if off.len() == p => x.iter().zip(off).map(|(a, b)| a + b).collect(),
            _ => x.to_vec(),
        };
        let mut u = vec![0.0; p];
        let mut r = vec![0.0; p];
        for _ in 0..iters.max(1) {
            for j in 0..p {
                u[j] = 0.5 * (x[j] + w[j]);
            }
            g.prox_in_place(&mut u, gamma);
            for j in 0..p {
                r[j] = 0.5 * (x[j] + 2.0 * u[j] - w[j]);
            }
            h.prox_in_place(&mut r, gamma);
            for j in 0..p {
                w[j] += r[j] - u[j];
            }
        }
        if self.warm_start {
            self.offset = Some(w.iter().zip(x).map(|(a, b)| a - b).collect());
        }
        u
    }
}

/// Cold-started [`DouglasRachford::solve`].
pub fn dr_prox_sum(x: &[f64], gamma: f64, g: &dyn Penalty, h: &dyn Penalty, iters: usize) -> Vec<f64> {
    DouglasRachford::new(false).solve(x, gamma, g, h, iters)
}
