//! Initial laws: named exact-sampler families plus measure-valued variants.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Density, EmpiricalMeasure, Grid};
use crate::rng::UnitStream;
use crate::{Error, Result};

/// One Gaussian component of a mixture, with diagonal covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Law of the time-zero state. Named families carry exact samplers;
/// `Density` samples by cell inversion, `Empirical` by bootstrap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InitialLaw {
    /// Point mass at `point`; has no Lebesgue density.
    Dirac { point: Vec<f64> },
    /// Product Gaussian with per-axis mean and standard deviation.
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
    /// Uniform law on the axis-aligned box [lower, upper].
    Uniform { lower: Vec<f64>, upper: Vec<f64> },
    /// Convex combination of product Gaussians.
    Mixture { components: Vec<MixtureComponent> },
    /// Radial density proportional to |x|^(-alpha) on the ball of `radius`,
    /// alpha in (0,d).
    PowerLaw { dim: usize, alpha: f64, radius: f64 },
    /// Explicit grid density.
    Density { density: Density },
    /// Existing particle cloud, resampled with replacement.
    Empirical { sample: EmpiricalMeasure },
}

impl InitialLaw {
    /// Ambient dimension of the law.
    pub fn dim(&self) -> usize {
        match self {
            InitialLaw::Dirac { point } => point.len(),
            InitialLaw::Gaussian { mean, .. } => mean.len(),
            InitialLaw::Uniform { lower, .. } => lower.len(),
            InitialLaw::Mixture { components } => {
                components.first().map_or(0, |c| c.mean.len())
            }
            InitialLaw::PowerLaw { dim, .. } => *dim,
            InitialLaw::Density { density } => density.grid().dim(),
            InitialLaw::Empirical { sample } => sample.dim(),
        }
    }

    /// Validates family parameters.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::Parameter("initial law has no dimension".into()));
        }
        match self {
            InitialLaw::Dirac { point } => {
                if point.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Parameter("Dirac point must be finite".into()));
                }
            }
            InitialLaw::Gaussian { mean, std } => {
                validate_gaussian(mean, std)?;
            }
            InitialLaw::Uniform { lower, upper } => {
                if lower.len() != upper.len()
                    || lower.iter().zip(upper).any(|(l, u)| !(l < u))
                {
                    return Err(Error::Parameter(
                        "uniform box needs lower < upper per axis".into(),
                    ));
                }
            }
            InitialLaw::Mixture { components } => {
                if components.is_empty() {
                    return Err(Error::Parameter("mixture needs components".into()));
                }
                let total: f64 = components.iter().map(|c| c.weight).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Parameter(format!(
                        "mixture weights sum to {total}, expected 1"
                    )));
                }
                for c in components {
                    if c.weight < 0.0 || c.mean.len() != d {
                        return Err(Error::Parameter("invalid mixture component".into()));
                    }
                    validate_gaussian(&c.mean, &c.std)?;
                }
            }
            InitialLaw::PowerLaw { dim, alpha, radius } => {
                if !(*alpha > 0.0 && *alpha < *dim as f64) {
                    return Err(Error::Parameter(format!(
                        "power-law exponent must lie in (0,{dim}), got {alpha}"
                    )));
                }
                if !(*radius > 0.0) {
                    return Err(Error::Parameter("power-law radius must be positive".into()));
                }
            }
            InitialLaw::Density { .. } | InitialLaw::Empirical { .. } => {}
        }
        Ok(())
    }

    /// True when the law has a Lebesgue density (so dual norms are finite).
    pub fn has_density(&self) -> bool {
        !matches!(
            self,
            InitialLaw::Dirac { .. } | InitialLaw::Empirical { .. }
        )
    }

    /// Closed-form density evaluated on `grid`, when one exists.
    pub fn density_on(&self, grid: &Grid) -> Result<Option<Density>> {
        let den = match self {
            InitialLaw::Dirac { .. } | InitialLaw::Empirical { .. } => None,
            InitialLaw::Density { density } => {
                if density.grid() != grid {
                    return Err(Error::Shape(
                        "initial density lives on a different grid".into(),
                    ));
                }
                Some(density.clone())
            }
            InitialLaw::Gaussian { mean, std } => Some(Density::from_fn(grid.clone(), |x| {
                gaussian_product(x, mean, std)
            })?),
            InitialLaw::Uniform { lower, upper } => Some(Density::from_fn(grid.clone(), |x| {
                let inside = x
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .all(|(&xi, (&l, &u))| xi >= l && xi <= u);
                if inside {
                    1.0
                } else {
                    0.0
                }
            })?),
            InitialLaw::Mixture { components } => Some(Density::from_fn(grid.clone(), |x| {
                components
                    .iter()
                    .map(|c| c.weight * gaussian_product(x, &c.mean, &c.std))
                    .sum()
            })?),
            InitialLaw::PowerLaw { alpha, radius, .. } => {
                // clamp |x| below half the finest spacing: the cell average
                // of the integrable singularity stays finite
                let floor = 0.5 * grid.spacing().iter().cloned().fold(f64::INFINITY, f64::min);
                let (alpha, radius) = (*alpha, *radius);
                Some(Density::from_fn(grid.clone(), move |x| {
                    let r = norm(x).max(floor);
                    if r <= radius {
                        r.powf(-alpha)
                    } else {
                        0.0
                    }
                })?)
            }
        };
        Ok(den)
    }

    /// Draws `n` i.i.d. points; bit-deterministic in (law, n, seed) and
    /// independent of thread count (one counter-based stream per point).
    pub fn sample(&self, n: usize, seed: u64) -> Result<EmpiricalMeasure> {
        self.validate()?;
        if n == 0 {
            return Err(Error::Parameter("sample size must be positive".into()));
        }
        let d = self.dim();
        // per-variant precomputation shared read-only across points
        let cell_cdf = match self {
            InitialLaw::Density { density } => Some(cumulative_cell_mass(density)),
            _ => None,
        };
        let mut coords = vec![0.0; n * d];
        coords
            .par_chunks_mut(d)
            .enumerate()
            .for_each(|(i, out)| {
                let mut stream = UnitStream::new(seed, i as u64);
                self.sample_one(&mut stream, cell_cdf.as_deref(), out);
            });
        EmpiricalMeasure::new(d, coords)
    }

    fn sample_one(&self, s: &mut UnitStream, cell_cdf: Option<&[f64]>, out: &mut [f64]) {
        let d = out.len();
        match self {
            InitialLaw::Dirac { point } => out.copy_from_slice(point),
            InitialLaw::Gaussian { mean, std } => {
                s.fill_normals(0, out);
                for (a, v) in out.iter_mut().enumerate() {
                    *v = mean[a] + std[a] * *v;
                }
            }
            InitialLaw::Uniform { lower, upper } => {
                for a in 0..d {
                    out[a] = lower[a] + (upper[a] - lower[a]) * s.uniform(a as u64);
                }
            }
            InitialLaw::Mixture { components } => {
                let u = s.uniform(0);
                let mut acc = 0.0;
                let mut chosen = components.len() - 1;
                for (ci, c) in components.iter().enumerate() {
                    acc += c.weight;
                    if u < acc {
                        chosen = ci;
                        break;
                    }
                }
                let c = &components[chosen];
                s.fill_normals(2, out);
                for (a, v) in out.iter_mut().enumerate() {
                    *v = c.mean[a] + c.std[a] * *v;
                }
            }
            InitialLaw::PowerLaw { alpha, radius, .. } => {
                // radial CDF of |x|^(-alpha) on B(0,R) is (s/R)^(d-alpha)
                let expo = 1.0 / (d as f64 - alpha);
                let r = radius * s.uniform_open(0).powf(expo);
                s.fill_normals(2, out);
                let nrm = norm(out);
                if nrm > 0.0 {
                    for v in out.iter_mut() {
                        *v *= r / nrm;
                    }
                }
            }
            InitialLaw::Density { density } => {
                let cdf = cell_cdf.expect("precomputed cell masses");
                let u = s.uniform(0);
                let idx = match cdf.binary_search_by(|w| w.partial_cmp(&u).unwrap()) {
                    Ok(i) => i + 1,
                    Err(i) => i,
                }
                .min(cdf.len() - 1);
                density.grid().node_coords(idx, out);
                for (a, v) in out.iter_mut().enumerate() {
                    let h = density.grid().spacing()[a];
                    *v += (s.uniform(1 + a as u64) - 0.5) * h;
                }
            }
            InitialLaw::Empirical { sample } => {
                let j = ((s.uniform(0) * sample.len() as f64) as usize).min(sample.len() - 1);
                out.copy_from_slice(sample.point(j));
            }
        }
    }
}

fn validate_gaussian(mean: &[f64], std: &[f64]) -> Result<()> {
    if mean.len() != std.len() || std.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Parameter(
            "Gaussian law needs positive std per axis".into(),
        ));
    }
    Ok(())
}

fn gaussian_product(x: &[f64], mean: &[f64], std: &[f64]) -> f64 {
    let mut v = 1.0;
    for a in 0..x.len() {
        let z = (x[a] - mean[a]) / std[a];
        v *= (-0.5 * z * z).exp() / (std[a] * (std::f64::consts::TAU).sqrt());
    }
    v
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Running cumulative cell masses of a density, normalized to end at 1.
fn cumulative_cell_mass(density: &Density) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = density
        .values()
        .iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect();
    let total = acc;
    cdf.iter_mut().for_each(|w| *w /= total);
    cdf
}
