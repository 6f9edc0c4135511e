//! Planar vortex blobs against the exact self-similar radial solution.
//!
//! A single Gaussian vortex is a steady solution of the planar dynamics up
//! to diffusion: the rotational interaction is divergence-free and radial
//! in magnitude, so the law stays the Gaussian N(0, (s0^2 + 2 nu t) I) at
//! every time. The scenario runs the interacting blob system and compares
//! the terminal law with that closed form through the radial profile:
//! node differences are summed over thin rings before taking absolute
//! values, so angular sampling noise cancels and the verdict tracks the
//! radial shape alone. Refining the blob width must not inflate that
//! error, and a deterministic two-vortex pair must hold its radius to
//! Euler-step accuracy (the pair drift is purely tangential, so radius
//! growth per step is quadratic in the step).

use serde::{Deserialize, Serialize};

use super::{iqr_half_width, median, ExperimentReport, ReportBuilder};
use crate::kernels::{DriftSpec, KernelFamily, KernelSpec, MeanFieldTerm};
use crate::measure::{kde_estimate, silverman_bandwidth, Density, EmpiricalMeasure, Grid, InitialLaw};
use crate::metrics::wasserstein_q;
use crate::rng::derive_seed;
use crate::sde::{simulate_interacting, simulate_interacting_from_sample, SdeConfig, SigmaSpec};
use crate::{Error, Result};

/// Seed-tag of the exact-law reference sample for the transport check.
const REFERENCE_SAMPLE_TAG: u64 = 0x6c77_32;

/// Configuration of one vortex-blob run; shipped defaults are the
/// calibrated single-blob family at unit circulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambOseenParams {
    /// Viscosity; the diffusion coefficient is sqrt(2 nu).
    pub nu: f64,
    /// Initial blob std.
    pub sigma0: f64,
    /// Circulation of the interaction.
    pub coupling: f64,
    pub n_particles: usize,
    pub dt: f64,
    pub horizon: f64,
    /// Blob regularization length; the refinement check reruns at half.
    pub epsilon: f64,
    pub seeds: Vec<u64>,
    /// Ceiling on the median radial-profile L1 error at the horizon.
    pub l1_bound: f64,
    /// Ceiling on the median error ratio after halving epsilon.
    pub blob_growth_max: f64,
    pub grid_half_width: f64,
    pub grid_nodes: usize,
    /// Two-vortex check: starting radius, step, and radius-drift ceiling.
    pub pair_radius: f64,
    pub pair_dt: f64,
    pub pair_drift_bound: f64,
    /// Points per side of the exact-sampler transport measurement.
    pub w2_reference_points: usize,
}

impl Default for LambOseenParams {
    fn default() -> Self {
        LambOseenParams {
            nu: 0.5,
            sigma0: 1.0,
            coupling: 1.0,
            n_particles: 2000,
            dt: 0.01,
            horizon: 1.0,
            epsilon: 0.05,
            seeds: (1..=10).collect(),
            l1_bound: 0.1,
            blob_growth_max: 1.5,
            grid_half_width: 9.0,
            grid_nodes: 181,
            pair_radius: 0.5,
            pair_dt: 1e-4,
            pair_drift_bound: 1e-6,
            w2_reference_points: 512,
        }
    }
}

impl LambOseenParams {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("viscosity", self.nu),
            ("initial std", self.sigma0),
            ("step", self.dt),
            ("horizon", self.horizon),
            ("blob width", self.epsilon),
            ("pair radius", self.pair_radius),
            ("pair step", self.pair_dt),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.coupling.is_finite() {
            return Err(Error::Parameter("circulation must be finite".into()));
        }
        if self.n_particles < 2 {
            return Err(Error::Parameter("blob runs need at least two particles".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Parameter("at least one seed is required".into()));
        }
        if self.w2_reference_points < 2 || self.w2_reference_points > self.n_particles {
            return Err(Error::Parameter(format!(
                "transport sample size must lie in [2, {}], got {}",
                self.n_particles, self.w2_reference_points
            )));
        }
        Ok(())
    }

    fn blob_config(&self, epsilon: f64, seed: u64) -> Result<SdeConfig> {
        let kernel = KernelSpec::new(KernelFamily::BiotSavart, 2, epsilon)?;
        let sigma = (2.0 * self.nu).sqrt();
        Ok(SdeConfig {
            dim: 2,
            drift: DriftSpec::new(
                2,
                Some(MeanFieldTerm { kernel, coupling: self.coupling }),
                None,
                vec![],
                false,
            )?,
            sigma: SigmaSpec::Scalar { value: sigma },
            horizon: self.horizon,
            dt: self.dt,
            n_particles: self.n_particles,
            seed,
            record_mesh: vec![self.horizon],
            eigen_window: Some((2.0 * self.nu, 2.0 * self.nu)),
        })
    }
}

/// Ring-projected L1 distance between two planar densities on one grid:
/// node differences are summed per ring of one-spacing width around the
/// origin, and the absolute ring sums are integrated. Equals the plain L1
/// distance of the ring-averaged (radial) profiles.
fn radial_profile_l1(a: &Density, b: &Density) -> Result<f64> {
    a.require_same_grid(b)?;
    let grid = a.grid();
    if grid.dim() != 2 {
        return Err(Error::Shape(format!(
            "radial projection needs a planar grid, got dimension {}",
            grid.dim()
        )));
    }
    let dr = grid.spacing()[0];
    let mut ring_sums: Vec<f64> = Vec::new();
    let mut pos = [0.0f64; 2];
    for (idx, (&va, &vb)) in a.values().iter().zip(b.values()).enumerate() {
        grid.node_coords(idx, &mut pos);
        // nearest ring center: lattice radii sit mid-bucket, so mirror
        // nodes cannot straddle a boundary by a rounding ulp
        let ring = (pos[0].hypot(pos[1]) / dr).round() as usize;
        if ring >= ring_sums.len() {
            ring_sums.resize(ring + 1, 0.0);
        }
        ring_sums[ring] += va - vb;
    }
    Ok(ring_sums.iter().map(|s| s.abs()).sum::<f64>() * grid.cell_volume())
}

/// Runs the blob system across the seed pool and checks the terminal
/// radial profile, blob-refinement stability, and the two-vortex radius.
pub fn run_lamb_oseen(params: &LambOseenParams) -> Result<ExperimentReport> {
    params.validate()?;
    let mut report = ReportBuilder::new("lamb_oseen", params)?;
    let grid = Grid::centered_cube(2, params.grid_half_width, params.grid_nodes)?;
    let terminal_var = params.sigma0 * params.sigma0 + 2.0 * params.nu * params.horizon;
    let exact_law = InitialLaw::Gaussian {
        mean: vec![0.0; 2],
        std: vec![terminal_var.sqrt(); 2],
    };
    let exact = exact_law
        .density_on(&grid)?
        .expect("a Gaussian law has a closed-form density");
    let init = InitialLaw::Gaussian { mean: vec![0.0; 2], std: vec![params.sigma0; 2] };

    let mut errors = Vec::new();
    let mut refined_ratios = Vec::new();
    let mut transport = Vec::new();
    for &seed in &params.seeds {
        let terminal_error = |epsilon: f64| -> Result<(f64, EmpiricalMeasure)> {
            let cfg = params.blob_config(epsilon, seed)?;
            let cloud = simulate_interacting(&cfg, &init)?.terminal().clone();
            let h = silverman_bandwidth(&cloud)?;
            let kde = kde_estimate(&cloud, &grid, &h)?;
            Ok((radial_profile_l1(&kde, &exact)?, cloud))
        };
        let (err, cloud) = terminal_error(params.epsilon)?;
        let (err_refined, _) = terminal_error(0.5 * params.epsilon)?;
        errors.push(err);
        refined_ratios.push(err_refined / err);

        // assignment transport between matching subsamples of the run and
        // an exact-law draw; reported, not bounded (the radial profile is
        // the verdict, this is the cross-metric view of the same law)
        let m = params.w2_reference_points;
        let sub = EmpiricalMeasure::new(2, cloud.coords()[..2 * m].to_vec())?;
        let reference = exact_law.sample(m, derive_seed(seed, &[REFERENCE_SAMPLE_TAG]))?;
        transport.push(wasserstein_q(&sub, &reference, 2.0)?);
    }

    report.measure("radial_l1", median(&mut errors), Some(iqr_half_width(&mut errors)));
    report.measure(
        "refinement_ratio",
        median(&mut refined_ratios),
        Some(iqr_half_width(&mut refined_ratios)),
    );
    report.measure("w2_to_exact", median(&mut transport), Some(iqr_half_width(&mut transport)));
    report.check_le(
        "terminal profile matches the exact radial law",
        median(&mut errors),
        params.l1_bound,
    );
    report.check_le(
        "halving the blob width leaves the error stable",
        median(&mut refined_ratios),
        params.blob_growth_max,
    );

    // deterministic antipodal pair: the interaction is tangential, so the
    // recorded radii may drift from r0 only through the Euler stepping
    let r0 = params.pair_radius;
    let quarters: Vec<f64> = (1..=4).map(|j| j as f64 * params.horizon / 4.0).collect();
    let mut pair_cfg = params.blob_config(params.epsilon, params.seeds[0])?;
    pair_cfg.sigma = SigmaSpec::Scalar { value: 0.0 };
    pair_cfg.eigen_window = None;
    pair_cfg.dt = params.pair_dt;
    pair_cfg.n_particles = 2;
    pair_cfg.record_mesh = quarters;
    let start = EmpiricalMeasure::new(2, vec![r0, 0.0, -r0, 0.0])?;
    let bundle = simulate_interacting_from_sample(&pair_cfg, &start)?;
    let radius_drift = bundle
        .states()
        .iter()
        .flat_map(|cloud| cloud.iter().map(|x| (x[0].hypot(x[1]) - r0).abs()))
        .fold(0.0, f64::max);
    report.measure("pair_radius_drift", radius_drift, None);
    report.check_le("two point vortices hold their radius", radius_drift, params.pair_drift_bound);

    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Grid;

    #[test]
    fn ring_projection_cancels_angular_noise() {
        let grid = Grid::centered_cube(2, 2.0, 41).unwrap();
        let base = Density::from_fn(grid.clone(), |x| (-0.5 * (x[0] * x[0] + x[1] * x[1])).exp())
            .unwrap();
        // an odd-in-x perturbation sums to zero on every centered ring
        // (the x = 0 column is left alone: signum(0) is 1, not 0)
        let bent = Density::new(
            grid.clone(),
            base.values()
                .iter()
                .enumerate()
                .map(|(idx, &v)| {
                    let mut pos = [0.0; 2];
                    grid.node_coords(idx, &mut pos);
                    let in_band = pos[0].abs() > 0.05 && pos[0].hypot(pos[1]) < 1.5;
                    v + 0.05 * pos[0].signum() * in_band as u8 as f64
                })
                .collect(),
        )
        .unwrap();
        let radial = radial_profile_l1(&base, &bent).unwrap();
        let plain = crate::metrics::tv_distance(&base, &bent).unwrap();
        assert!(plain > 0.05, "perturbation is visible in L1: {plain}");
        assert!(radial < 1e-12, "rings cancel the perturbation: {radial}");
    }

    #[test]
    fn two_vortices_rotate_at_the_predicted_rate() {
        let params = LambOseenParams {
            pair_dt: 1e-3,
            pair_drift_bound: 1e-4,
            ..LambOseenParams::default()
        };
        let r0 = params.pair_radius;
        let cfg = {
            let mut c = params.blob_config(params.epsilon, 1).unwrap();
            c.sigma = SigmaSpec::Scalar { value: 0.0 };
            c.eigen_window = None;
            c.dt = params.pair_dt;
            c.n_particles = 2;
            c.record_mesh = vec![params.horizon];
            c
        };
        let start = EmpiricalMeasure::new(2, vec![r0, 0.0, -r0, 0.0]).unwrap();
        let end = simulate_interacting_from_sample(&cfg, &start).unwrap();
        let x = end.terminal().iter().next().unwrap().to_vec();
        // half the pair interaction at distance 2 r0, regularized
        let omega = params.coupling
            / (2.0 * std::f64::consts::PI * (4.0 * r0 * r0 + params.epsilon * params.epsilon));
        let angle = x[1].atan2(x[0]);
        assert!((angle - omega * params.horizon).abs() < 1e-3, "angle {angle} vs {}", omega);
        assert!((x[0].hypot(x[1]) - r0).abs() < 1e-4);
    }

    #[test]
    fn small_blob_run_tracks_the_exact_law() {
        let params = LambOseenParams {
            n_particles: 500,
            seeds: vec![1, 2, 3],
            dt: 0.01,
            l1_bound: 0.35,
            w2_reference_points: 128,
            pair_dt: 1e-3,
            pair_drift_bound: 1e-4,
            ..LambOseenParams::default()
        };
        let report = run_lamb_oseen(&params).unwrap();
        assert_eq!(report.criteria.len(), 3);
        for c in &report.criteria {
            assert!(c.passed, "criterion '{}' measured {} vs bound {}", c.name, c.measured, c.bound);
        }
        assert!(report.measurements.iter().any(|m| m.name == "w2_to_exact" && m.value > 0.0));
    }

    #[test]
    fn rejects_zero_blob_width_and_oversized_subsamples() {
        let zero = LambOseenParams { epsilon: 0.0, ..LambOseenParams::default() };
        assert!(run_lamb_oseen(&zero).is_err());
        let oversized = LambOseenParams { w2_reference_points: 4000, ..LambOseenParams::default() };
        assert!(run_lamb_oseen(&oversized).is_err());
    }
}
