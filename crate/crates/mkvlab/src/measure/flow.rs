//! Time-indexed families of densities on a mesh of [0,T].

use serde::{Deserialize, Serialize};

use super::{Density, Grid, InitialLaw};
use crate::{Error, Result};

/// Content of the t=0 mesh node: a proper density when the initial law has
/// one, otherwise the exact sampler itself (e.g. a Dirac mass, whose dual
/// norms for k > 1 are infinite and which has no grid representation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowInitial {
    Density(Density),
    Sampler(InitialLaw),
}

/// Discrete measure flow: densities at strictly increasing times
/// 0 < t_1 < .. < t_M = T, plus the t=0 node. All densities share one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureFlow {
    initial: FlowInitial,
    times: Vec<f64>,
    densities: Vec<Density>,
}

impl MeasureFlow {
    /// Builds a flow, validating mesh monotonicity and the shared grid.
    pub fn new(initial: FlowInitial, times: Vec<f64>, densities: Vec<Density>) -> Result<Self> {
        if times.is_empty() || times.len() != densities.len() {
            return Err(Error::Shape(format!(
                "{} times vs {} densities",
                times.len(),
                densities.len()
            )));
        }
        if times[0] <= 0.0 || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parameter(
                "mesh times must be strictly increasing and positive".into(),
            ));
        }
        let grid = densities[0].grid();
        for d in &densities[1..] {
            if d.grid() != grid {
                return Err(Error::Shape("flow densities on mixed grids".into()));
            }
        }
        if let FlowInitial::Density(d0) = &initial {
            if d0.grid() != grid {
                return Err(Error::Shape("initial density on a different grid".into()));
            }
        }
        Ok(MeasureFlow { initial, times, densities })
    }

    /// Flow holding the same density at every mesh node (and at t=0).
    pub fn constant(density: Density, times: Vec<f64>) -> Result<Self> {
        let densities = vec![density.clone(); times.len()];
        MeasureFlow::new(FlowInitial::Density(density), times, densities)
    }

    /// Horizon T (the last mesh time).
    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("nonempty mesh")
    }

    /// Strictly positive mesh times t_1 .. t_M.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Densities aligned with [`times`](Self::times).
    pub fn densities(&self) -> &[Density] {
        &self.densities
    }

    pub fn initial(&self) -> &FlowInitial {
        &self.initial
    }

    /// Density at t=0, when the initial node carries one.
    pub fn initial_density(&self) -> Option<&Density> {
        match &self.initial {
            FlowInitial::Density(d) => Some(d),
            FlowInitial::Sampler(_) => None,
        }
    }

    /// Shared grid of all carried densities.
    pub fn grid(&self) -> &Grid {
        self.densities[0].grid()
    }

    /// Piecewise-constant (left endpoint) interpolation: the density at the
    /// largest mesh node <= t. Times before t_1 use the t=0 density when one
    /// exists and fall back to the t_1 density for sampler-only initials.
    pub fn interpolate(&self, t: f64) -> Result<&Density> {
        if !(0.0..=self.horizon() + 1e-12).contains(&t) {
            return Err(Error::Parameter(format!(
                "time {t} outside [0, {}]",
                self.horizon()
            )));
        }
        if t < self.times[0] {
            return Ok(self.initial_density().unwrap_or(&self.densities[0]));
        }
        // partition_point returns the count of mesh times <= t
        let pos = self.times.partition_point(|&m| m <= t);
        Ok(&self.densities[pos - 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(value_at: usize) -> Density {
        let grid = Grid::new(vec![0.0], vec![0.5], vec![3]).unwrap();
        let mut v = vec![0.0; 3];
        v[value_at] = 1.0;
        Density::normalized(grid, v).unwrap()
    }

    #[test]
    fn interpolation_is_left_constant() {
        let flow = MeasureFlow::new(
            FlowInitial::Density(flat(0)),
            vec![1.0, 2.0],
            vec![flat(1), flat(2)],
        )
        .unwrap();
        assert_eq!(flow.interpolate(0.0).unwrap(), &flat(0));
        assert_eq!(flow.interpolate(0.5).unwrap(), &flat(0));
        assert_eq!(flow.interpolate(1.0).unwrap(), &flat(1));
        assert_eq!(flow.interpolate(1.5).unwrap(), &flat(1));
        assert_eq!(flow.interpolate(2.0).unwrap(), &flat(2));
        assert!(flow.interpolate(2.5).is_err());
        assert!(flow.interpolate(-0.1).is_err());
    }

    #[test]
    fn sampler_initial_falls_back_to_first_density() {
        let law = InitialLaw::Dirac { point: vec![0.2] };
        let flow = MeasureFlow::new(
            FlowInitial::Sampler(law),
            vec![1.0],
            vec![flat(1)],
        )
        .unwrap();
        assert_eq!(flow.interpolate(0.0).unwrap(), &flat(1));
        assert!(flow.initial_density().is_none());
    }

    #[test]
    fn rejects_bad_meshes() {
        assert!(MeasureFlow::new(
            FlowInitial::Density(flat(0)),
            vec![1.0, 1.0],
            vec![flat(0), flat(1)]
        )
        .is_err());
        assert!(MeasureFlow::new(FlowInitial::Density(flat(0)), vec![0.0], vec![flat(0)]).is_err());
        assert!(MeasureFlow::new(FlowInitial::Density(flat(0)), vec![], vec![]).is_err());
    }
}
