//! Proximal terms.
//!
//! Every built-in penalty is block separable: it carries a [`BlockPartition`]
//! of the coordinates and exposes a per-block scaled prox, which is what the
//! sparse solvers need. Strengths are stored in the penalty, so prox
//! signatures are the same for every term.

mod prox;
mod splitting;

use std::fmt;

use thiserror::Error;

pub use prox::{
    consensus_projection, prox_fused_block2_scaled, prox_group_lasso_scaled, prox_l1_scaled,
    value_overlapping_group_lasso,
};
pub use splitting::{dr_prox_sum, fused_lasso_split, DouglasRachford, OverlappingGroupLasso};

use prox::{block_shrink, soft_threshold};

#[derive(Debug, Error, PartialEq)]
pub enum PenaltyError {
    #[error("groups overlap at coordinate {coordinate}")]
    OverlappingGroups { coordinate: usize },
    #[error("scaled prox of block {block} needs equal weights within the block")]
    NonUniformWeights { block: usize },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("weights must be positive, found {0}")]
    NonPositiveWeight(f64),
    #[error("strength must be finite and nonnegative, found {0}")]
    InvalidStrength(f64),
    #[error("penalty {0} is not block separable")]
    NotSeparable(String),
    #[error("fused lasso split needs p >= 2, got {0}")]
    DimensionTooSmall(usize),
}

/// Ordered disjoint nonempty blocks covering `0..dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPartition {
    dim: usize,
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
}

impl BlockPartition {
    pub fn new(dim: usize, blocks: Vec<Vec<usize>>) -> Result<Self, PenaltyError> {
        let mut block_of = vec![usize::MAX; dim];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(PenaltyError::InvalidPartition(format!("block {b} is empty")));
            }
            for &j in block {
                if j >= dim {
                    return Err(PenaltyError::InvalidPartition(format!(
                        "block {b} references coordinate {j} beyond dimension {dim}"
                    )));
                }
                if block_of[j] != usize::MAX {
                    return Err(PenaltyError::OverlappingGroups { coordinate: j });
                }
                block_of[j] = b;
            }
        }
        if let Some(j) = block_of.iter().position(|&b| b == usize::MAX) {
            return Err(PenaltyError::InvalidPartition(format!("coordinate {j} is not covered")));
        }
        Ok(BlockPartition {
            dim,
            blocks,
            block_of,
        })
    }

    pub fn singletons(dim: usize) -> Self {
        BlockPartition {
            dim,
            blocks: (0..dim).map(|j| vec![j]).collect(),
            block_of: (0..dim).collect(),
        }
    }

    /// Partition made of the given disjoint groups followed by singleton blocks
    /// for every uncovered coordinate. The flag vector marks the group blocks.
    pub fn from_groups(dim: usize, groups: &[Vec<usize>]) -> Result<(Self, Vec<bool>), PenaltyError> {
        let mut covered = vec![false; dim];
        let mut blocks = Vec::with_capacity(groups.len());
        for g in groups {
            for &j in g {
                if j < dim {
                    covered[j] = true;
                }
            }
            blocks.push(g.clone());
        }
        let mut flags = vec![true; blocks.len()];
        for (j, _) in covered.iter().enumerate().filter(|(_, c)| !**c) {
            blocks.push(vec![j]);
            flags.push(false);
        }
        Ok((BlockPartition::new(dim, blocks)?, flags))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block(&self, b: usize) -> &[usize] {
        &self.blocks[b]
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    #[inline]
    pub fn block_of(&self, j: usize) -> usize {
        self.block_of[j]
    }

    pub fn max_block_len(&self) -> usize {
        self.blocks.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Block-constant diagonal reweighting `D`, every entry at least one.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalWeights {
    per_block: Vec<f64>,
    per_coord: Vec<f64>,
    d_max: f64,
}

impl DiagonalWeights {
    pub fn from_blocks(partition: &BlockPartition, per_block: Vec<f64>) -> Result<Self, PenaltyError> {
        if per_block.len() != partition.len() {
            return Err(PenaltyError::DimensionMismatch {
                expected: partition.len(),
                found: per_block.len(),
            });
        }
        if let Some(&w) = per_block.iter().find(|w| !(**w >= 1.0 && w.is_finite())) {
            return Err(PenaltyError::NonPositiveWeight(w));
        }
        let per_coord = (0..partition.dim())
            .map(|j| per_block[partition.block_of(j)])
            .collect();
        let d_max = per_block.iter().copied().fold(1.0, f64::max);
        Ok(DiagonalWeights {
            per_block,
            per_coord,
            d_max,
        })
    }

    pub fn identity(partition: &BlockPartition) -> Self {
        DiagonalWeights {
            per_block: vec![1.0; partition.len()],
            per_coord: vec![1.0; partition.dim()],
            d_max: 1.0,
        }
    }

    pub fn per_block(&self) -> &[f64] {
        &self.per_block
    }

    pub fn per_coord(&self) -> &[f64] {
        &self.per_coord
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }
}

/// Anything whose value enters the primal objective.
pub trait Regularizer: fmt::Debug + Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
}

/// A proximal term.
pub trait Penalty: Regularizer {
    fn name(&self) -> String;

    /// Block structure, or `None` for a non-separable term.
    fn blocks(&self) -> Option<&BlockPartition>;

    /// Scaled prox restricted to block `block`, applied in place to the
    /// gathered block values: `argmin_z γ g_B(z) + Σ_c (x_c − z_c)² / (2 d_c)`.
    fn prox_block(&self, block: usize, vals: &mut [f64], gamma: f64, d: &[f64]);

    /// Checks that the closed form handles the given per-coordinate weights.
    fn accepts_weights(&self, d: &[f64]) -> Result<(), PenaltyError> {
        let _ = d;
        Ok(())
    }

    fn is_zero(&self) -> bool {
        false
    }

    /// Scaled prox on the full vector; the caller has checked the weights.
    fn scaled_prox_in_place(&self, x: &mut [f64], gamma: f64, d: &[f64]) {
        let Some(part) = self.blocks() else {
            panic!("{} has no block structure; override scaled_prox_in_place", self.name());
        };
        let mut vals = Vec::with_capacity(part.max_block_len());
        let mut ws = Vec::with_capacity(part.max_block_len());
        for (b, block) in part.blocks().iter().enumerate() {
            vals.clear();
            ws.clear();
            vals.extend(block.iter().map(|&j| x[j]));
            ws.extend(block.iter().map(|&j| d[j]));
            self.prox_block(b, &mut vals, gamma, &ws);
            for (&j, &v) in block.iter().zip(&vals) {
                x[j] = v;
            }
        }
    }

    fn prox_in_place(&self, x: &mut [f64], gamma: f64) {
        let ones = vec![1.0; x.len()];
        self.scaled_prox_in_place(x, gamma, &ones);
    }

    fn scaled_prox(&self, x: &[f64], gamma: f64, d: &[f64]) -> Result<Vec<f64>, PenaltyError> {
        if d.len() != x.len() {
            return Err(PenaltyError::DimensionMismatch {
                expected: x.len(),
                found: d.len(),
            });
        }
        if let Some(&w) = d.iter().find(|w| !(**w > 0.0)) {
            return Err(PenaltyError::NonPositiveWeight(w));
        }
        self.accepts_weights(d)?;
        let mut out = x.to_vec();
        self.scaled_prox_in_place(&mut out, gamma, d);
        Ok(out)
    }

    fn prox(&self, x: &[f64], gamma: f64) -> Vec<f64> {
        let mut out = x.to_vec();
        self.prox_in_place(&mut out, gamma);
        out
    }
}

fn check_strength(s: f64) -> Result<f64, PenaltyError> {
    if s.is_finite() && s >= 0.0 {
        Ok(s)
    } else {
        Err(PenaltyError::InvalidStrength(s))
    }
}

#[derive(Debug, Clone)]
pub struct ZeroPenalty {
    partition: BlockPartition,
}

impl ZeroPenalty {
    pub fn new(dim: usize) -> Self {
        ZeroPenalty {
            partition: BlockPartition::singletons(dim),
        }
    }
}

impl Regularizer for ZeroPenalty {
    fn value(&self, _x: &[f64]) -> f64 {
        0.0
    }
}

impl Penalty for ZeroPenalty {
    fn name(&self) -> String {
        "zero".into()
    }
    fn blocks(&self) -> Option<&BlockPartition> {
        Some(&self.partition)
    }
    fn prox_block(&self, _block: usize, _vals: &mut [f64], _gamma: f64, _d: &[f64]) {}
    fn is_zero(&self) -> bool {
        true
    }
    fn scaled_prox_in_place(&self, _x: &mut [f64], _gamma: f64, _d: &[f64]) {}
    fn prox_in_place(&self, _x: &mut [f64], _gamma: f64) {}
}

/// `λ‖x‖₁`.
#[derive(Debug, Clone)]
pub struct L1Penalty {
    strength: f64,
    partition: BlockPartition,
}

impl L1Penalty {
    pub fn new(dim: usize, strength: f64) -> Result<Self, PenaltyError> {
        Ok(L1Penalty {
            strength: check_strength(strength)?,
            partition: BlockPartition::singletons(dim),
        })
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }
}

impl Regularizer for L1Penalty {
    fn value(&self, x: &[f64]) -> f64 {
        self.strength * x.iter().map(|v| v.abs()).sum::<f64>()
    }
}

impl Penalty for L1Penalty {
    fn name(&self) -> String {
        "l1".into()
    }
    fn blocks(&self) -> Option<&BlockPartition> {
        Some(&self.partition)
    }
    #[inline]
    fn prox_block(&self, _block: usize, vals: &mut [f64], gamma: f64, d: &[f64]) {
        vals[0] = soft_threshold(vals[0], d[0] * gamma * self.strength);
    }
    fn scaled_prox_in_place(&self, x: &mut [f64], gamma: f64, d: &[f64]) {
        for (xj, &dj) in x.iter_mut().zip(d) {
            *xj = soft_threshold(*xj, dj * gamma * self.strength);
        }
    }
    fn prox_in_place(&self, x: &mut [f64], gamma: f64) {
        let t = gamma * self.strength;
        x.iter_mut().for_each(|xj| *xj = soft_threshold(*xj, t));
    }
}

/// `(μ/2)‖x‖²`, a smooth proximal term.
#[derive(Debug, Clone)]
pub struct SquaredNormPenalty {
    strength: f64,
    partition: BlockPartition,
}

impl SquaredNormPenalty {
    pub fn new(dim: usize, strength: f64) -> Result<Self, PenaltyError> {
        Ok(SquaredNormPenalty {
            strength: check_strength(strength)?,
            partition: BlockPartition::singletons(dim),
        })
    }
}

impl Regularizer for SquaredNormPenalty {
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.strength * x.iter().map(|v| v * v).sum::<f64>()
    }
}

impl Penalty for SquaredNormPenalty {
    fn name(&self) -> String {
        "squared-l2".into()
    }
    fn blocks(&self) -> Option<&BlockPartition> {
        Some(&self.partition)
    }
    #[inline]
    fn prox_block(&self, _block: usize, vals: &mut [f64], gamma: f64, d: &[f64]) {
        vals[0] /= 1.0 + d[0] * gamma * self.strength;
    }
}

/// `λ Σ_B ‖x_B‖₂` over disjoint groups; uncovered coordinates are unpenalized.
#[derive(Debug, Clone)]
pub struct GroupLassoPenalty {
    strength: f64,
    partition: BlockPartition,
    active: Vec<bool>,
}

impl GroupLassoPenalty {
    pub fn new(dim: usize, groups: &[Vec<usize>], strength: f64) -> Result<Self, PenaltyError> {
        let strength = check_strength(strength)?;
        let groups: Vec<Vec<usize>> = groups.iter().filter(|g| !g.is_empty()).cloned().collect();
        let (partition, active) = BlockPartition::from_groups(dim, &groups)?;
        Ok(GroupLassoPenalty {
            strength,
            partition,
            active,
        })
    }

    /// Consecutive disjoint groups of `size` coordinates (the last may be shorter).
    pub fn contiguous(dim: usize, size: usize, strength: f64) -> Result<Self, PenaltyError> {
        let size = size.max(1);
        let groups: Vec<Vec<usize>> = (0..dim)
            .step_by(size)
            .map(|s| (s..(s + size).min(dim)).collect())
            .collect();
        Self::new(dim, &groups, strength)
    }

    pub fn groups(&self) -> impl Iterator<Item = &[usize]> {
        self.partition
            .blocks()
            .iter()
            .zip(&self.active)
            .filter(|(_, a)| **a)
            .map(|(b, _)| b.as_slice())
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }
}

impl Regularizer for GroupLassoPenalty {
    fn value(&self, x: &[f64]) -> f64 {
        self.strength
            * self
                .groups()
                .map(|g| g.iter().map(|&j| x[j] * x[j]).sum::<f64>().sqrt())
                .sum::<f64>()
    }
}

impl Penalty for GroupLassoPenalty {
    fn name(&self) -> String {
        "group-lasso".into()
    }
    fn blocks(&self) -> Option<&BlockPartition> {
        Some(&self.partition)
    }
    fn prox_block(&self, block: usize, vals: &mut [f64], gamma: f64, d: &[f64]) {
        if self.active[block] {
            block_shrink(vals, d[0] * gamma * self.strength);
        }
    }
    fn accepts_weights(&self, d: &[f64]) -> Result<(), PenaltyError> {
        for (b, block) in self.partition.blocks().iter().enumerate() {
            if self.active[b] && block.iter().any(|&j| d[j] != d[block[0]]) {
                return Err(PenaltyError::NonUniformWeights { block: b });
            }
        }
        Ok(())
    }
}

/// `λ Σ |x_i − x_{i+1}|` over a set of disjoint adjacent pairs; the two halves
/// of the fused-lasso split.
#[derive(Debug, Clone)]
pub struct FusedPairsPenalty {
    strength: f64,
    partition: BlockPartition,
    active: Vec<bool>,
}

impl FusedPairsPenalty {
    /// Pairs `(s, s+1)` for every listed start `s`.
    pub fn new(dim: usize, starts: &[usize], strength: f64) -> Result<Self, PenaltyError> {
        let strength = check_strength(strength)?;
        let pairs: Vec<Vec<usize>> = starts.iter().map(|&s| vec![s, s + 1]).collect();
        let (partition, active) = BlockPartition::from_groups(dim, &pairs)?;
        Ok(FusedPairsPenalty {
            strength,
            partition,
            active,
        })
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.partition
            .blocks()
            .iter()
            .zip(&self.active)
            .filter(|(_, a)| **a)
            .map(|(b, _)| (b[0], b[1]))
            .collect()
    }
}

impl Regularizer for FusedPairsPenalty {
    fn value(&self, x: &[f64]) -> f64 {
        self.strength
            * self
                .partition
                .blocks()
                .iter()
                .zip(&self.active)
                .filter(|(_, a)| **a)
                .map(|(b, _)| (x[b[0]] - x[b[1]]).abs())
                .sum::<f64>()
    }
}

impl Penalty for FusedPairsPenalty {
    fn name(&self) -> String {
        "fused-pairs".into()
    }
    fn blocks(&self) -> Option<&BlockPartition> {
        Some(&self.partition)
    }
    fn prox_block(&self, block: usize, vals: &mut [f64], gamma: f64, d: &[f64]) {
        if self.active[block] {
            let z = prox_fused_block2_scaled(
                [vals[0], vals[1]],
                gamma * self.strength,
                [1.0 / d[0], 1.0 / d[1]],
            );
            vals[0] = z[0];
            vals[1] = z[1];
        }
    }
}
