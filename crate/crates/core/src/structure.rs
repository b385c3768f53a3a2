//! Extended supports and the inverse-frequency reweighting used by the sparse
//! solvers.
//!
//! The extended support of sample `i` is the set of blocks of the penalty
//! partition that intersect `supp(a_i)`. A block's weight is
//! `d_B = n / #{i : B ∈ T_i}`, so that `(1/n) Σ_i P_i = D⁻¹` where `P_i` masks
//! the coordinates of `T_i`.

use thiserror::Error;

use crate::data::SparseRowMatrix;
use crate::penalties::{BlockPartition, DiagonalWeights};

#[derive(Debug, Error, PartialEq)]
pub enum StructureError {
    #[error("block {block} (coordinates {coords:?}) intersects no sample; reformulate the problem without it")]
    UntouchedBlock { block: usize, coords: Vec<usize> },
    #[error("partition covers {partition} coordinates but the data has {data}")]
    DimensionMismatch { partition: usize, data: usize },
}

/// Per-sample block sets `T_i` and their flattened coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedSupport {
    blocks: Vec<Vec<usize>>,
    coords: Vec<Vec<usize>>,
}

impl ExtendedSupport {
    pub fn n(&self) -> usize {
        self.blocks.len()
    }

    /// Block ids of `T_i`, ascending.
    pub fn blocks(&self, i: usize) -> &[usize] {
        &self.blocks[i]
    }

    /// Coordinates of every block in `T_i`, ascending.
    pub fn coords(&self, i: usize) -> &[usize] {
        &self.coords[i]
    }

    /// Per-block occurrence counts `#{i : B ∈ T_i}`.
    pub fn block_counts(&self, n_blocks: usize) -> Vec<usize> {
        let mut counts = vec![0usize; n_blocks];
        for t in &self.blocks {
            for &b in t {
                counts[b] += 1;
            }
        }
        counts
    }
}

pub fn compute_extended_supports(
    features: &SparseRowMatrix,
    partition: &BlockPartition,
) -> Result<ExtendedSupport, StructureError> {
    if partition.dim() != features.n_cols() {
        return Err(StructureError::DimensionMismatch {
            partition: partition.dim(),
            data: features.n_cols(),
        });
    }
    let n = features.n_rows();
    let mut blocks = Vec::with_capacity(n);
    let mut coords = Vec::with_capacity(n);
    let mut stamp = vec![usize::MAX; partition.len()];
    for i in 0..n {
        let mut t: Vec<usize> = Vec::new();
        for &j in features.row(i).0 {
            let b = partition.block_of(j);
            if stamp[b] != i {
                stamp[b] = i;
                t.push(b);
            }
        }
        t.sort_unstable();
        let mut c: Vec<usize> = t.iter().flat_map(|&b| partition.block(b).iter().copied()).collect();
        c.sort_unstable();
        blocks.push(t);
        coords.push(c);
    }
    Ok(ExtendedSupport { blocks, coords })
}

pub fn compute_reweighting(
    supports: &ExtendedSupport,
    partition: &BlockPartition,
    n: usize,
) -> Result<DiagonalWeights, StructureError> {
    let counts = supports.block_counts(partition.len());
    if let Some(block) = counts.iter().position(|&c| c == 0) {
        return Err(StructureError::UntouchedBlock {
            block,
            coords: partition.block(block).to_vec(),
        });
    }
    let per_block = counts.iter().map(|&c| n as f64 / c as f64).collect();
    Ok(DiagonalWeights::from_blocks(partition, per_block)
        .expect("inverse frequencies are finite and at least one"))
}

/// `S_i`: coordinates lying in some block of some per-penalty support `T_{i,j}`.
pub fn union_supports(supports: &[ExtendedSupport]) -> Vec<Vec<usize>> {
    let Some(first) = supports.first() else {
        return Vec::new();
    };
    (0..first.n())
        .map(|i| {
            let mut s: Vec<usize> = supports.iter().flat_map(|t| t.coords(i).iter().copied()).collect();
            s.sort_unstable();
            s.dedup();
            s
        })
        .collect()
}
