//! Equally weighted particle clouds.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// N equally weighted points in R^d, stored flat (point-major: coordinates
/// of point i occupy `points[i*d .. (i+1)*d]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    dim: usize,
    points: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Builds a particle cloud, validating finiteness and shape.
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("dimension must be positive".into()));
        }
        if points.is_empty() || points.len() % dim != 0 {
            return Err(Error::Shape(format!(
                "{} coordinates do not form points in dimension {dim}",
                points.len()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("all coordinates must be finite".into()));
        }
        Ok(EmpiricalMeasure { dim, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Coordinates of point `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Flat coordinate storage.
    pub fn coords(&self) -> &[f64] {
        &self.points
    }

    /// Iterator over points as slices.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    /// Per-axis sample mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for p in self.iter() {
            for (acc, &x) in m.iter_mut().zip(p) {
                *acc += x;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Per-axis sample standard deviation (population convention).
    pub fn std(&self) -> Vec<f64> {
        let mean = self.mean();
        let mut s = vec![0.0; self.dim];
        for p in self.iter() {
            for (acc, (&x, &m)) in s.iter_mut().zip(p.iter().zip(&mean)) {
                let dx = x - m;
                *acc += dx * dx;
            }
        }
        let n = self.len() as f64;
        s.iter_mut().for_each(|v| *v = (*v / n).sqrt());
        s
    }

    /// Per-axis bounding box as (lower, upper) vectors.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for p in self.iter() {
            for a in 0..self.dim {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_stats() {
        let m = EmpiricalMeasure::new(2, vec![0.0, 0.0, 2.0, 4.0]).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.point(1), &[2.0, 4.0]);
        assert_eq!(m.mean(), vec![1.0, 2.0]);
        assert_eq!(m.std(), vec![1.0, 2.0]);
        let (lo, hi) = m.bounding_box();
        assert_eq!((lo, hi), (vec![0.0, 0.0], vec![2.0, 4.0]));
    }

    #[test]
    fn rejects_ragged_or_nonfinite() {
        assert!(EmpiricalMeasure::new(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(EmpiricalMeasure::new(1, vec![f64::INFINITY]).is_err());
        assert!(EmpiricalMeasure::new(1, vec![]).is_err());
    }
}
