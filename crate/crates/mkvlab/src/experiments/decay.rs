//! Dual-norm decay of the heat flow started from a point mass.
//!
//! With zero drift and unit diffusion the time-t law is N(0, tI), whose
//! lattice dual norm scales like t^(-d/(2k)) while the law stays inside
//! one covering ball. The scenario samples the exact law, estimates
//! densities by KDE, and fits the log-log slope over the one-decade
//! window [T/10, T]. The default horizon T = r^2/16 (r the covering
//! radius) keeps the window inside the scaling regime; pushing T toward
//! r^2 flattens the slope as the norm saturates toward total mass.
//! Silverman bandwidths leave the slope unbiased here: the bandwidth is
//! proportional to the cloud std, so smoothing rescales every norm by a
//! common factor.

use serde::{Deserialize, Serialize};

use super::{diffusion_clouds, iqr_half_width, linear_fit, median, ExperimentReport, ReportBuilder};
use crate::measure::{auto_grid, kde_estimate, silverman_bandwidth, Grid, InitialLaw};
use crate::metrics::{kstar_norm_surrogate, Exponent, KStarParams};
use crate::picard::class_d_check;
use crate::{Error, Result};

/// Particles used by the constant-law null check; the check is exact
/// (identical clouds give identical norms), so it needs no statistics.
const NULL_PARTICLES: usize = 2000;

/// Configuration of one decay-slope run; shipped defaults are the
/// calibrated planar pair (d, k) = (2, 3).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecaySlopeParams {
    pub dim: usize,
    /// Primal exponent of the dual norm; must exceed the dimension.
    pub k: f64,
    /// Fit window is [horizon/10, horizon].
    pub horizon: f64,
    pub n_particles: usize,
    /// Log-spaced norm evaluation times inside the window.
    pub n_times: usize,
    pub seeds: Vec<u64>,
    /// Relative half-width of the acceptance band around -d/(2k).
    pub slope_rel_tol: f64,
    /// Absolute slope band for the constant-law null check.
    pub null_band: f64,
    /// Half-width of the KDE grid at the horizon; earlier grids shrink
    /// with the diffusive width sqrt(t/T), so spacing stays a fixed
    /// fraction of the bandwidth across the whole window.
    pub grid_half_width: f64,
    pub grid_nodes: usize,
}

impl Default for DecaySlopeParams {
    fn default() -> Self {
        DecaySlopeParams {
            dim: 2,
            k: 3.0,
            // r^2/16 with covering radius r = sqrt(2)
            horizon: 0.125,
            n_particles: 100_000,
            n_times: 8,
            seeds: (1..=10).collect(),
            slope_rel_tol: 0.15,
            null_band: 0.05,
            grid_half_width: 2.2,
            grid_nodes: 71,
        }
    }
}

impl DecaySlopeParams {
    fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::Parameter(format!(
                "horizon must be positive and finite, got {}",
                self.horizon
            )));
        }
        if self.n_times < 4 {
            return Err(Error::Parameter("a slope fit needs at least four times".into()));
        }
        if self.n_particles < 2 {
            return Err(Error::Parameter("at least two particles are required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Parameter("at least one seed is required".into()));
        }
        if !(self.slope_rel_tol > 0.0) || !(self.null_band >= 0.0) {
            return Err(Error::Parameter("slope tolerances must be positive".into()));
        }
        Ok(())
    }

    /// The n_times log-spaced evaluation times spanning [T/10, T].
    fn times(&self) -> Vec<f64> {
        let t0 = self.horizon / 10.0;
        let m = self.n_times;
        (0..m)
            .map(|j| t0 * 10f64.powf(j as f64 / (m - 1) as f64))
            .collect()
    }
}

/// Fits the dual-norm decay slope of the heat flow from a point mass and
/// holds it against the closed-form exponent -d/(2k), plus a null check
/// that a constant-in-time law fits a flat slope.
pub fn run_decay_slope(params: &DecaySlopeParams) -> Result<ExperimentReport> {
    params.validate()?;
    let exps = class_d_check(params.dim, Exponent::Infinity, Exponent::finite(params.k))?;
    if !exps.in_class_d() {
        return Err(Error::Parameter(format!(
            "heat-flow decay needs the pair (infinity, k) in the admissible class, \
             i.e. k > d; got k = {} in dimension {}",
            params.k, params.dim
        )));
    }
    let mut report = ReportBuilder::new("decay_slope", params)?;
    let kp = KStarParams::new(Exponent::finite(params.k), params.dim)?;
    let times = params.times();
    // one grid per time, shrunk with the diffusive width so the node
    // spacing tracks the Silverman bandwidth across the decade
    let grids = times
        .iter()
        .map(|&t| {
            let w = params.grid_half_width * (t / params.horizon).sqrt();
            Grid::centered_cube(params.dim, w, params.grid_nodes)
        })
        .collect::<Result<Vec<_>>>()?;
    let log_t: Vec<f64> = times.iter().map(|&t| t.ln()).collect();
    let origin = InitialLaw::Dirac { point: vec![0.0; params.dim] };

    let mut slopes = Vec::with_capacity(params.seeds.len());
    let mut amplitudes = Vec::with_capacity(params.seeds.len());
    let mut fit_r2 = Vec::with_capacity(params.seeds.len());
    for &seed in &params.seeds {
        let clouds = diffusion_clouds(&origin, 1.0, &times, params.n_particles, seed)?;
        let mut log_norm = Vec::with_capacity(clouds.len());
        for (cloud, grid) in clouds.iter().zip(&grids) {
            let h = silverman_bandwidth(cloud)?;
            let kde = kde_estimate(cloud, grid, &h)?;
            log_norm.push(kstar_norm_surrogate(&kde, &kp).ln());
        }
        let (slope, intercept, r2) = linear_fit(&log_t, &log_norm);
        slopes.push(slope);
        amplitudes.push(intercept.exp());
        fit_r2.push(r2);
    }

    let slope = median(&mut slopes);
    let slope_hw = iqr_half_width(&mut slopes);
    let target = -exps.decay_exponent();
    report.measure("slope", slope, Some(slope_hw));
    report.measure("slope_target", target, None);
    report.measure("amplitude", median(&mut amplitudes), Some(iqr_half_width(&mut amplitudes)));
    report.measure("fit_r_squared", median(&mut fit_r2), None);
    report.check_le(
        "slope matches the heat-flow exponent",
        (slope - target).abs() / target.abs(),
        params.slope_rel_tol,
    );

    // null check: frozen spread law, zero diffusion; identical clouds at
    // every time force an exactly flat fit
    let spread = InitialLaw::Gaussian { mean: vec![0.0; params.dim], std: vec![1.0; params.dim] };
    let n_null = params.n_particles.min(NULL_PARTICLES);
    let null_clouds = diffusion_clouds(&spread, 0.0, &times, n_null, params.seeds[0])?;
    let mut null_log_norm = Vec::with_capacity(null_clouds.len());
    for cloud in &null_clouds {
        let h = silverman_bandwidth(cloud)?;
        let null_grid = auto_grid(cloud, &h, params.grid_half_width)?;
        let kde = kde_estimate(cloud, &null_grid, &h)?;
        null_log_norm.push(kstar_norm_surrogate(&kde, &kp).ln());
    }
    let (null_slope, _, _) = linear_fit(&log_t, &null_log_norm);
    report.measure("null_slope", null_slope, None);
    report.check_le("constant law fits a flat slope", null_slope.abs(), params.null_band);

    Ok(report.finish())
}
