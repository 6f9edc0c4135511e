//! Grid densities with unit quadrature mass.

use serde::{Deserialize, Serialize};

use super::{Grid, MASS_TOLERANCE};
use crate::{Error, Result};

/// Nonnegative density values on a [`Grid`], one per node, with total
/// midpoint-rule mass within [`MASS_TOLERANCE`] of 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density {
    grid: Grid,
    values: Vec<f64>,
}

impl Density {
    /// Builds a density, validating nonnegativity and unit mass.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Parameter(
                "density values must be finite and nonnegative".into(),
            ));
        }
        let d = Density { grid, values };
        let mass = d.mass();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Parameter(format!(
                "density mass {mass} deviates from 1 beyond {MASS_TOLERANCE}"
            )));
        }
        Ok(d)
    }

    /// Builds a density after rescaling `values` to unit quadrature mass.
    pub fn normalized(grid: Grid, mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Parameter(
                "density values must be finite and nonnegative".into(),
            ));
        }
        let mass: f64 = values.iter().sum::<f64>() * grid.cell_volume();
        if !(mass > 0.0) {
            return Err(Error::Parameter("density has zero total mass".into()));
        }
        for v in &mut values {
            *v /= mass;
        }
        Density::new(grid, values)
    }

    /// Evaluates a function on every node and normalizes the result.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut vals = Vec::with_capacity(grid.len());
        let mut buf = vec![0.0; grid.dim()];
        for idx in 0..grid.len() {
            grid.node_coords(idx, &mut buf);
            vals.push(f(&buf));
        }
        Density::normalized(grid, vals)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Midpoint-rule total mass.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Midpoint-rule integral of `f` against this density.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let mut buf = vec![0.0; self.grid.dim()];
        let mut acc = 0.0;
        for (idx, &v) in self.values.iter().enumerate() {
            if v > 0.0 {
                self.grid.node_coords(idx, &mut buf);
                acc += f(&buf) * v;
            }
        }
        acc * self.grid.cell_volume()
    }

    /// Per-axis mean under the density.
    pub fn mean(&self) -> Vec<f64> {
        let d = self.grid.dim();
        let mut mean = vec![0.0; d];
        let mut buf = vec![0.0; d];
        for (idx, &v) in self.values.iter().enumerate() {
            self.grid.node_coords(idx, &mut buf);
            for a in 0..d {
                mean[a] += buf[a] * v;
            }
        }
        let vol = self.grid.cell_volume();
        mean.iter_mut().for_each(|m| *m *= vol);
        mean
    }

    /// Errors unless `other` shares this density's grid.
    pub fn require_same_grid(&self, other: &Density) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Shape("densities live on different grids".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid() -> Grid {
        Grid::new(vec![0.0], vec![0.25], vec![5]).unwrap()
    }

    #[test]
    fn normalization_yields_unit_mass() {
        let d = Density::normalized(unit_grid(), vec![1.0, 2.0, 3.0, 2.0, 1.0]).unwrap();
        assert!((d.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_and_non_unit_mass() {
        assert!(Density::new(unit_grid(), vec![1.0, -1.0, 1.0, 1.0, 1.0]).is_err());
        assert!(Density::new(unit_grid(), vec![1.0; 5]).is_err()); // mass 1.25
    }

    #[test]
    fn integrate_matches_mean() {
        let d = Density::normalized(unit_grid(), vec![0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let m = d.integrate(|x| x[0]);
        assert!((m - d.mean()[0]).abs() < 1e-14);
        // two equal spikes at 0.25 and 0.75 average to 0.5
        assert!((m - 0.5).abs() < 1e-12);
    }
}
