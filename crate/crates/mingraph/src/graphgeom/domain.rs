//! Box domains with a regular grid and the standard simplicial subdivision
//! of each cell (every cell splits into m! simplices, one per coordinate
//! permutation). Node and simplex numbering are fixed and documented
//! because file formats and summation order depend on them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const MAX_DIM: usize = 3;

/// An axis-aligned box [0, extents_0] x ... with a regular node grid.
///
/// Nodes are numbered in row-major (C) order: the last axis varies
/// fastest. Cells use the same numbering over per-axis cell counts
/// (resolution - 1). Simplex s lives in cell s / m! and uses the
/// lexicographic permutation with index s % m!.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    extents: Vec<f64>,
    resolution: Vec<usize>,
    spacings: Vec<f64>,
    perms: Vec<Vec<usize>>,
}

/// Serialized form of [`Domain`] used in sidecar metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainMeta {
    pub extents: Vec<f64>,
    pub resolution: Vec<usize>,
    pub target_dim: usize,
}

fn lexicographic_permutations(m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..m).collect();
    loop {
        out.push(current.clone());
        // Next lexicographic permutation; stop after the last one.
        let Some(i) = (0..m.saturating_sub(1)).rev().find(|&i| current[i] < current[i + 1]) else {
            break;
        };
        let j = (i + 1..m).rev().find(|&j| current[j] > current[i]).unwrap();
        current.swap(i, j);
        current[i + 1..].reverse();
    }
    out
}

impl Domain {
    pub fn new(extents: Vec<f64>, resolution: Vec<usize>) -> Result<Self> {
        let m = extents.len();
        if m == 0 || m > MAX_DIM {
            return Err(invalid(format!("domain dimension must be 1..={MAX_DIM}, got {m}")));
        }
        if resolution.len() != m {
            return Err(invalid("extents and resolution must have the same length"));
        }
        if extents.iter().any(|&e| !e.is_finite() || e <= 0.0) {
            return Err(invalid("extents must be positive and finite"));
        }
        if resolution.iter().any(|&r| r < 2) {
            return Err(invalid("resolution must be at least 2 nodes per axis"));
        }
        let spacings = extents
            .iter()
            .zip(&resolution)
            .map(|(e, &r)| e / (r - 1) as f64)
            .collect();
        Ok(Domain { extents, resolution, spacings, perms: lexicographic_permutations(m) })
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacings[axis]
    }

    pub fn node_count(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn cell_count(&self) -> usize {
        self.resolution.iter().map(|r| r - 1).product()
    }

    pub fn simplices_per_cell(&self) -> usize {
        self.perms.len()
    }

    pub fn simplex_count(&self) -> usize {
        self.cell_count() * self.simplices_per_cell()
    }

    /// Volume of one simplex (all simplices are congruent).
    pub fn simplex_volume(&self) -> f64 {
        let cell: f64 = self.spacings.iter().product();
        cell / self.simplices_per_cell() as f64
    }

    pub fn box_volume(&self) -> f64 {
        self.extents.iter().product()
    }

    pub fn node_index(&self, multi: &[usize]) -> usize {
        debug_assert_eq!(multi.len(), self.dim());
        let mut idx = 0;
        for (d, &i) in multi.iter().enumerate() {
            debug_assert!(i < self.resolution[d]);
            idx = idx * self.resolution[d] + i;
        }
        idx
    }

    pub fn node_multi(&self, mut index: usize) -> Vec<usize> {
        let mut multi = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            multi[d] = index % self.resolution[d];
            index /= self.resolution[d];
        }
        multi
    }

    pub fn node_position(&self, index: usize) -> Vec<f64> {
        self.node_multi(index)
            .iter()
            .zip(&self.spacings)
            .map(|(&i, &h)| i as f64 * h)
            .collect()
    }

    pub fn is_boundary_multi(&self, multi: &[usize]) -> bool {
        multi.iter().zip(&self.resolution).any(|(&i, &r)| i == 0 || i == r - 1)
    }

    /// Vertex node indices of simplex `s` (m + 1 of them, path-ordered) and
    /// the coordinate permutation that generates the path. Vertex k is
    /// vertex k-1 shifted one node along axis perm[k-1].
    pub fn simplex_nodes(&self, s: usize) -> (Vec<usize>, &[usize]) {
        debug_assert!(s < self.simplex_count());
        let m = self.dim();
        let per_cell = self.simplices_per_cell();
        let cell = s / per_cell;
        let perm = &self.perms[s % per_cell];

        // Cell multi-index over the (resolution - 1) grid.
        let mut rem = cell;
        let mut corner = vec![0usize; m];
        for d in (0..m).rev() {
            let cells_d = self.resolution[d] - 1;
            corner[d] = rem % cells_d;
            rem /= cells_d;
        }

        let mut nodes = Vec::with_capacity(m + 1);
        nodes.push(self.node_index(&corner));
        for &axis in perm {
            corner[axis] += 1;
            nodes.push(self.node_index(&corner));
        }
        (nodes, perm)
    }
}

impl Domain {
    pub fn meta(&self, target_dim: usize) -> DomainMeta {
        DomainMeta {
            extents: self.extents.clone(),
            resolution: self.resolution.clone(),
            target_dim,
        }
    }
}
