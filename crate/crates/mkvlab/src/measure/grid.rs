//! Regular node-centered grids in dimension 1 to 3.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Regular tensor grid. Node `(i_0, .., i_{d-1})` sits at
/// `origin[a] + i_a * spacing[a]` on each axis; flat indices are row-major
/// with axis 0 slowest. Each node owns the cell of volume
/// `prod(spacing)` centered on it (midpoint quadrature).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    origin: Vec<f64>,
    spacing: Vec<f64>,
    counts: Vec<usize>,
}

impl Grid {
    /// Builds a grid, validating dimension and positivity invariants.
    pub fn new(origin: Vec<f64>, spacing: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        let d = origin.len();
        if !(1..=3).contains(&d) {
            return Err(Error::Parameter(format!(
                "grid dimension must be 1, 2, or 3, got {d}"
            )));
        }
        if spacing.len() != d || counts.len() != d {
            return Err(Error::Shape(format!(
                "grid axis arrays disagree: origin {d}, spacing {}, counts {}",
                spacing.len(),
                counts.len()
            )));
        }
        if origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("grid origin must be finite".into()));
        }
        if spacing.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(Error::Parameter("grid spacing must be positive".into()));
        }
        if counts.iter().any(|&c| c < 2) {
            return Err(Error::Parameter("grid needs at least 2 nodes per axis".into()));
        }
        Ok(Grid { origin, spacing, counts })
    }

    /// Uniform grid of `count` nodes per axis covering `[-half_width, half_width]^d`.
    pub fn centered_cube(dim: usize, half_width: f64, count: usize) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::Parameter("half_width must be positive".into()));
        }
        let h = 2.0 * half_width / (count as f64 - 1.0);
        Grid::new(vec![-half_width; dim], vec![h; dim], vec![count; dim])
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false // counts >= 2 on every axis by construction
    }

    /// Volume of one quadrature cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Coordinate of node `i` along `axis`.
    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + i as f64 * self.spacing[axis]
    }

    /// Writes the coordinates of the node with flat index `idx` into `out`.
    pub fn node_coords(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for axis in (0..self.dim()).rev() {
            let c = self.counts[axis];
            out[axis] = self.axis_coord(axis, rem % c);
            rem /= c;
        }
    }

    /// Flat index of the multi-index `ix` (row-major, axis 0 slowest).
    pub fn flat_index(&self, ix: &[usize]) -> usize {
        let mut idx = 0;
        for (axis, &i) in ix.iter().enumerate() {
            idx = idx * self.counts[axis] + i;
        }
        idx
    }

    /// Smallest and largest node coordinate per axis.
    pub fn axis_range(&self, axis: usize) -> (f64, f64) {
        (self.origin[axis], self.axis_coord(axis, self.counts[axis] - 1))
    }

    /// True when every coordinate of `point` lies within the node range
    /// expanded by half a cell on each side.
    pub fn covers(&self, point: &[f64]) -> bool {
        point.iter().enumerate().all(|(a, &x)| {
            let (lo, hi) = self.axis_range(a);
            let half = 0.5 * self.spacing[a];
            x >= lo - half && x <= hi + half
        })
    }

    /// Iterator over all node coordinates in flat order.
    pub fn iter_nodes(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |idx| {
            let mut buf = vec![0.0; self.dim()];
            self.node_coords(idx, &mut buf);
            buf
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_indexing_round_trips() {
        let g = Grid::new(vec![0.0, 10.0], vec![0.5, 1.0], vec![3, 4]).unwrap();
        assert_eq!(g.len(), 12);
        let mut buf = [0.0; 2];
        // flat index 5 = (1, 1) under row-major with axis 0 slowest
        g.node_coords(5, &mut buf);
        assert_eq!(buf, [0.5, 11.0]);
        assert_eq!(g.flat_index(&[1, 1]), 5);
        for idx in 0..g.len() {
            let mut c = [0.0; 2];
            g.node_coords(idx, &mut c);
            let ix = [
                ((c[0] - 0.0) / 0.5).round() as usize,
                ((c[1] - 10.0) / 1.0).round() as usize,
            ];
            assert_eq!(g.flat_index(&ix), idx);
        }
    }

    #[test]
    fn rejects_bad_axes() {
        assert!(Grid::new(vec![0.0], vec![0.0], vec![4]).is_err());
        assert!(Grid::new(vec![0.0], vec![1.0], vec![1]).is_err());
        assert!(Grid::new(vec![0.0; 4], vec![1.0; 4], vec![4; 4]).is_err());
        assert!(Grid::new(vec![f64::NAN], vec![1.0], vec![4]).is_err());
    }

    #[test]
    fn coverage_includes_half_cell_margin() {
        let g = Grid::new(vec![-1.0], vec![0.5], vec![5]).unwrap();
        assert!(g.covers(&[1.2]));
        assert!(!g.covers(&[1.3]));
    }
}
