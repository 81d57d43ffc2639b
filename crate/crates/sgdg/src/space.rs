//! Multi-index combinatorics of the sparse tensor space: level enumeration,
//! DOF descriptors and their dense indexing, support queries, and the
//! level-pair coupling rule of the semi-orthogonality modification.

use crate::wavelet::{support_1d, translations_at_level};
use crate::{Error, Result};
use std::collections::HashMap;

/// Refuse DOF maps larger than this (desk-scale guardrail).
pub const MAX_DOF: usize = 100_000_000;

/// A `d`-vector of nonnegative integers.
pub type MultiIndex = Vec<usize>;

/// `|l|_1`, the sum of entries.
pub fn l1_norm(l: &[usize]) -> usize {
    l.iter().sum()
}

/// `|l|_inf`, the maximum entry.
pub fn linf_norm(l: &[usize]) -> usize {
    l.iter().copied().max().unwrap_or(0)
}

/// Componentwise maximum.
pub fn cw_max(a: &[usize], b: &[usize]) -> MultiIndex {
    a.iter().zip(b).map(|(x, y)| *x.max(y)).collect()
}

/// Componentwise minimum.
pub fn cw_min(a: &[usize], b: &[usize]) -> MultiIndex {
    a.iter().zip(b).map(|(x, y)| *x.min(y)).collect()
}

/// Componentwise `a <= b`.
pub fn cw_le(a: &[usize], b: &[usize]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

/// All level multi-indices with `|l|_1 <= n`, ordered by `(|l|_1, lex)`.
pub fn enumerate_levels(d: usize, n: usize) -> Result<Vec<MultiIndex>> {
    if d < 2 {
        return Err(Error::InvalidParameter(
            "dimension must be at least 2".into(),
        ));
    }
    let mut levels = Vec::new();
    let mut current = vec![0usize; d];
    for total in 0..=n {
        push_compositions(d, total, 0, &mut current, &mut levels);
    }
    Ok(levels)
}

fn push_compositions(
    d: usize,
    remaining: usize,
    axis: usize,
    current: &mut MultiIndex,
    out: &mut Vec<MultiIndex>,
) {
    if axis == d - 1 {
        current[axis] = remaining;
        out.push(current.clone());
        return;
    }
    for v in 0..=remaining {
        current[axis] = v;
        push_compositions(d, remaining - v, axis + 1, current, out);
    }
}

/// True iff the level pair is retained by the modified bilinear form,
/// i.e. `|max(l, l')|_1 <= n`.
pub fn blocks_coupled(l: &[usize], lp: &[usize], n: usize) -> bool {
    l1_norm(&cw_max(l, lp)) <= n
}

/// A tensor basis function of the sparse space: per-axis level, translation
/// ("cell"), and polynomial degree index (0-based, `0..=k`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DofDescriptor {
    pub level: MultiIndex,
    pub cell: MultiIndex,
    pub poly: MultiIndex,
}

impl DofDescriptor {
    /// Axis-aligned support box, the product of the 1D supports.
    pub fn support_box(&self) -> Vec<(f64, f64)> {
        self.level
            .iter()
            .zip(&self.cell)
            .map(|(&l, &j)| support_1d(l, j))
            .collect()
    }
}

/// Dense indexing of the sparse space `V̂_N^k`.
///
/// Ordering is lexicographic by `(|l|_1, l, j, i)`: levels as returned by
/// [`enumerate_levels`], then translations, then degree indices, so the
/// blocks cut by the modified form are contiguous.
#[derive(Debug, Clone)]
pub struct DofMap {
    d: usize,
    degree: usize,
    max_level: usize,
    levels: Vec<MultiIndex>,
    level_offsets: Vec<usize>,
    level_slot: HashMap<MultiIndex, usize>,
    total: usize,
}

impl DofMap {
    /// Build the map for dimension `d >= 2`, degree `k >= 1`, level bound `n`.
    pub fn build(d: usize, degree: usize, max_level: usize) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidParameter(
                "polynomial degree must be at least 1".into(),
            ));
        }
        let levels = enumerate_levels(d, max_level)?;
        let polys_per_level = (degree + 1).checked_pow(d as u32).ok_or_else(|| {
            Error::ResourceGuard("polynomial block size overflows".into())
        })?;
        let mut level_offsets = Vec::with_capacity(levels.len() + 1);
        let mut level_slot = HashMap::with_capacity(levels.len());
        let mut total = 0usize;
        for (slot, level) in levels.iter().enumerate() {
            level_offsets.push(total);
            level_slot.insert(level.clone(), slot);
            let cells: usize = level.iter().map(|&l| translations_at_level(l)).product();
            total = total
                .checked_add(cells.checked_mul(polys_per_level).ok_or_else(|| {
                    Error::ResourceGuard("level block size overflows".into())
                })?)
                .ok_or_else(|| Error::ResourceGuard("DOF count overflows".into()))?;
            if total > MAX_DOF {
                return Err(Error::ResourceGuard(format!(
                    "DOF count exceeds the {MAX_DOF} cap"
                )));
            }
        }
        level_offsets.push(total);
        Ok(Self {
            d,
            degree,
            max_level,
            levels,
            level_offsets,
            level_slot,
            total,
        })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    /// Number of degrees of freedom, `Σ_{|l|_1<=N} (k+1)^d Π_m max(1, 2^{l_m-1})`.
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn levels(&self) -> &[MultiIndex] {
        &self.levels
    }

    pub fn level_offset(&self, slot: usize) -> usize {
        self.level_offsets[slot]
    }

    pub fn level_block_len(&self, slot: usize) -> usize {
        self.level_offsets[slot + 1] - self.level_offsets[slot]
    }

    pub fn level_slot(&self, level: &[usize]) -> Option<usize> {
        self.level_slot.get(level).copied()
    }

    /// Dense index of a descriptor, if it belongs to the space.
    pub fn index_of(&self, dof: &DofDescriptor) -> Option<usize> {
        let slot = *self.level_slot.get(&dof.level)?;
        let k1 = self.degree + 1;
        let mut cell_flat = 0usize;
        let mut poly_flat = 0usize;
        for m in 0..self.d {
            let t = translations_at_level(dof.level[m]);
            if dof.cell[m] >= t || dof.poly[m] > self.degree {
                return None;
            }
            cell_flat = cell_flat * t + dof.cell[m];
            poly_flat = poly_flat * k1 + dof.poly[m];
        }
        let polys_per_cell = k1.pow(self.d as u32);
        Some(self.level_offsets[slot] + cell_flat * polys_per_cell + poly_flat)
    }

    /// Descriptor of a dense index.
    pub fn descriptor_of(&self, index: usize) -> Option<DofDescriptor> {
        if index >= self.total {
            return None;
        }
        let slot = match self.level_offsets.binary_search(&index) {
            Ok(s) => s,
            Err(s) => s - 1,
        };
        let level = self.levels[slot].clone();
        let k1 = self.degree + 1;
        let polys_per_cell = k1.pow(self.d as u32);
        let within = index - self.level_offsets[slot];
        let mut cell_flat = within / polys_per_cell;
        let mut poly_flat = within % polys_per_cell;
        let mut cell = vec![0usize; self.d];
        let mut poly = vec![0usize; self.d];
        for m in (0..self.d).rev() {
            let t = translations_at_level(level[m]);
            cell[m] = cell_flat % t;
            cell_flat /= t;
            poly[m] = poly_flat % k1;
            poly_flat /= k1;
        }
        Some(DofDescriptor { level, cell, poly })
    }
}
