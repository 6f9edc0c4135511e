//! Fixed-point contraction of the iteration map, plus a self-consistency
//! triangle against the interacting system.
//!
//! A regularized Riesz interaction with a confining pull is iterated to a
//! fixed point over the admissible horizon. Verdicts: consecutive-iterate
//! distance ratios contract while above the Monte-Carlo floor, no run
//! diverges, one fresh application of the map moves the final flow by at
//! most a small multiple of the floor, and the fixed point's terminal law
//! sits within a factor of the seed-to-seed spread of the interacting
//! system's terminal law (no chaos rate assumed). Ratios of pure noise
//! carry no contraction information, so a ratio enters the pool only when
//! the starting distance exceeds twice the floor.

use serde::{Deserialize, Serialize};

use super::{iqr_half_width, median, quantile_points, ExperimentReport, ReportBuilder};
use crate::kernels::{DriftSpec, KernelFamily, KernelSpec, LipschitzForm, MeanFieldTerm};
use crate::measure::{Grid, InitialLaw};
use crate::metrics::{kstar_norm_surrogate, wasserstein_q, Exponent, KStarParams};
use crate::picard::{
    class_d_check, phi_map, solve_fixed_point, tau_n, weighted_rho, BandwidthPolicy,
    ExponentParams, PicardConfig, PicardOutcome,
};
use crate::rng::derive_seed;
use crate::sde::{simulate_interacting, SdeConfig, SigmaSpec};
use crate::{Error, Result};

/// Seed-tag of the fresh self-consistency application of the map.
const CONSISTENCY_TAG: u64 = 0x7363;
/// Seed-tags of the two independent interacting reference runs.
const CHAOS_A_TAG: u64 = 0x6368_61;
const CHAOS_B_TAG: u64 = 0x6368_62;

/// Configuration of one contraction run; shipped defaults are the
/// calibrated regularized-Riesz family on the line at p = infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContractionParams {
    pub dim: usize,
    pub p: Exponent,
    pub k: f64,
    /// Riesz strength, order, and blob length of the interaction.
    pub kappa: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub coupling: f64,
    /// Rate of the confining linear pull.
    pub pull_rate: f64,
    pub sigma: f64,
    /// Initial law is the centered Gaussian with this std.
    pub init_std: f64,
    /// Index n of the admissible-horizon formula; the run's T is its output.
    pub horizon_n: u32,
    pub beta0: f64,
    /// Steps per horizon; dt = T / n_steps.
    pub n_steps: usize,
    /// Uniform flow-mesh nodes over (0, T].
    pub mesh_nodes: usize,
    /// Paths per iteration-map evaluation.
    pub particles: usize,
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub blowup_ceiling: f64,
    pub grid_half_width: f64,
    pub grid_nodes: usize,
    pub seeds: Vec<u64>,
    /// Ceiling on the median contraction ratio.
    pub ratio_bound: f64,
    /// Self-consistency ceiling, in multiples of the Monte-Carlo floor.
    pub consistency_factor: f64,
    /// Particles per side of the interacting-vs-fixed-point triangle.
    pub chaos_particles: usize,
    /// Triangle ceiling, in multiples of the seed-to-seed spread.
    pub chaos_factor: f64,
}

impl Default for ContractionParams {
    fn default() -> Self {
        ContractionParams {
            dim: 1,
            p: Exponent::Infinity,
            k: 2.0,
            kappa: 1.0,
            beta: 0.5,
            epsilon: 0.1,
            coupling: 0.4,
            pull_rate: 1.0,
            sigma: 1.0,
            init_std: 0.5,
            horizon_n: 1,
            beta0: 0.25,
            n_steps: 20,
            mesh_nodes: 5,
            particles: 600,
            lambda: 0.0,
            tol: 1e-9,
            max_iter: 8,
            blowup_ceiling: 1e3,
            grid_half_width: 6.0,
            grid_nodes: 121,
            seeds: (1..=10).collect(),
            ratio_bound: 0.8,
            consistency_factor: 2.0,
            chaos_particles: 2_000,
            chaos_factor: 3.0,
        }
    }
}

impl ContractionParams {
    fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Parameter("at least one seed is required".into()));
        }
        if self.n_steps == 0 || self.mesh_nodes == 0 || self.n_steps % self.mesh_nodes != 0 {
            return Err(Error::Parameter(format!(
                "mesh nodes must divide the step count, got {} nodes over {} steps",
                self.mesh_nodes, self.n_steps
            )));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::Parameter(
                "the Monte-Carlo floor needs a nondegenerate diffusion".into(),
            ));
        }
        if !(self.init_std > 0.0) || !self.init_std.is_finite() {
            return Err(Error::Parameter("initial std must be positive".into()));
        }
        if self.horizon_n == 0 {
            return Err(Error::Parameter("horizon index must be positive".into()));
        }
        Ok(())
    }

    fn gamma(&self) -> InitialLaw {
        InitialLaw::Gaussian { mean: vec![0.0; self.dim], std: vec![self.init_std; self.dim] }
    }

    /// The run horizon: output of the admissible-horizon formula at
    /// index n, fed the dual p-norm of the initial law when p is finite.
    fn horizon(&self, exps: &ExponentParams, grid: &Grid) -> Result<f64> {
        let gamma_norm = match self.p {
            Exponent::Infinity => 1.0,
            p => {
                let density = self.gamma().density_on(grid)?.ok_or_else(|| {
                    Error::Parameter("a finite p needs an initial law with a density".into())
                })?;
                kstar_norm_surrogate(&density, &KStarParams::new(p, self.dim)?)
            }
        };
        tau_n(gamma_norm, self.horizon_n, exps, self.beta0, true)
    }

    fn picard_config(
        &self,
        exps: &ExponentParams,
        grid: &Grid,
        horizon: f64,
        seed: u64,
    ) -> Result<PicardConfig> {
        let kernel = KernelSpec::new(
            KernelFamily::Riesz { kappa: self.kappa, beta: self.beta },
            self.dim,
            self.epsilon,
        )?;
        let drift = DriftSpec::new(
            self.dim,
            Some(MeanFieldTerm { kernel, coupling: self.coupling }),
            Some(LipschitzForm::LinearPull { rate: self.pull_rate }),
            vec![],
            true,
        )?;
        let dt = horizon / self.n_steps as f64;
        let mesh: Vec<f64> = (1..=self.mesh_nodes)
            .map(|j| j as f64 * horizon / self.mesh_nodes as f64)
            .collect();
        Ok(PicardConfig {
            exponents: exps.clone(),
            lambda: self.lambda,
            tol: self.tol,
            max_iter: self.max_iter,
            particles: self.particles,
            bandwidth: BandwidthPolicy::Silverman,
            grid: grid.clone(),
            sde: SdeConfig {
                dim: self.dim,
                drift,
                sigma: SigmaSpec::Scalar { value: self.sigma },
                horizon,
                dt,
                n_particles: self.particles,
                seed,
                record_mesh: mesh,
                eigen_window: Some((self.sigma * self.sigma, self.sigma * self.sigma)),
            },
            beta0: self.beta0,
            blowup_ceiling: self.blowup_ceiling,
        })
    }
}

/// Runs the fixed-point solver across the seed pool and checks
/// contraction, self-consistency, and the interacting-system triangle.
pub fn run_picard_contraction(params: &ContractionParams) -> Result<ExperimentReport> {
    params.validate()?;
    let mut report = ReportBuilder::new("picard_contraction", params)?;
    let exps = class_d_check(params.dim, params.p, Exponent::finite(params.k))?;
    if !exps.in_class_d() {
        return Err(Error::Parameter(format!(
            "exponent pair outside the admissible class: need 1/k - 1/d < 1/p, got (d, p, k) = ({}, {}, {})",
            params.dim, params.p, params.k
        )));
    }
    let kp = exps.kstar_params()?;
    let grid = Grid::centered_cube(params.dim, params.grid_half_width, params.grid_nodes)?;
    let horizon = params.horizon(&exps, &grid)?;
    let gamma = params.gamma();
    report.measure("horizon", horizon, None);

    let mut ratios = Vec::new();
    let mut floors = Vec::new();
    let mut lambdas = Vec::new();
    let mut consistency = Vec::new();
    let mut chaos = Vec::new();
    let mut bad_outcomes = 0usize;
    for &seed in &params.seeds {
        let cfg = params.picard_config(&exps, &grid, horizon, seed)?;
        let run = solve_fixed_point(&gamma, &cfg)?;
        if matches!(run.outcome, PicardOutcome::Diverged | PicardOutcome::BlownUp) {
            bad_outcomes += 1;
        }
        for pair in run.log.windows(2) {
            if let Some(r) = pair[1].ratio {
                if pair[0].rho > 2.0 * run.mc_floor {
                    ratios.push(r);
                }
            }
        }
        floors.push(run.mc_floor);
        lambdas.push(run.lambda);
        let fresh = phi_map(&run.flow, &gamma, &cfg, derive_seed(seed, &[CONSISTENCY_TAG]))?;
        let moved = weighted_rho(&fresh, &run.flow, run.lambda, &exps, &kp)?;
        consistency.push(moved / run.mc_floor);

        // triangle: fixed-point terminal law (re-estimated at the
        // interacting particle count) vs two independent interacting runs
        let mut hi_cfg = params.picard_config(&exps, &grid, horizon, seed)?;
        hi_cfg.particles = params.chaos_particles;
        hi_cfg.sde.n_particles = params.chaos_particles;
        let hi_run = solve_fixed_point(&gamma, &hi_cfg)?;
        let terminal = hi_run.flow.densities().last().expect("nonempty mesh");
        let fixed_cloud = quantile_points(terminal, params.chaos_particles)?;
        let interacting = |tag: u64| -> Result<crate::measure::EmpiricalMeasure> {
            let mut sde = hi_cfg.sde.clone();
            sde.seed = derive_seed(seed, &[tag]);
            sde.record_mesh = vec![horizon];
            Ok(simulate_interacting(&sde, &gamma)?.terminal().clone())
        };
        let cloud_a = interacting(CHAOS_A_TAG)?;
        let cloud_b = interacting(CHAOS_B_TAG)?;
        let to_fixed = wasserstein_q(&fixed_cloud, &cloud_a, 2.0)?;
        let spread = wasserstein_q(&cloud_a, &cloud_b, 2.0)?;
        chaos.push(to_fixed / spread);
    }

    let ratio = if ratios.is_empty() { f64::NAN } else { median(&mut ratios) };
    let ratio_hw = if ratios.is_empty() { None } else { Some(iqr_half_width(&mut ratios)) };
    report.measure("contraction_ratio", ratio, ratio_hw);
    report.measure("mc_floor", median(&mut floors), Some(iqr_half_width(&mut floors)));
    report.measure("final_lambda", median(&mut lambdas), None);
    report.measure("self_consistency", median(&mut consistency), Some(iqr_half_width(&mut consistency)));
    report.measure("chaos_ratio", median(&mut chaos), Some(iqr_half_width(&mut chaos)));

    report.check_le("iterates contract above the noise floor", ratio, params.ratio_bound);
    report.check("no run diverged or blew up", bad_outcomes as f64, 0.0, bad_outcomes == 0);
    report.check_le(
        "fixed point is self-consistent",
        median(&mut consistency),
        params.consistency_factor,
    );
    report.check_le(
        "interacting system matches the fixed point",
        median(&mut chaos),
        params.chaos_factor,
    );

    // measure-free dynamics: the first comparison already sits at the floor
    let mut free_cfg = params.picard_config(&exps, &grid, horizon, params.seeds[0])?;
    free_cfg.sde.drift = DriftSpec::new(
        params.dim,
        None,
        Some(LipschitzForm::LinearPull { rate: params.pull_rate }),
        vec![],
        true,
    )?;
    let free_run = solve_fixed_point(&gamma, &free_cfg)?;
    let free_iters = (free_run.log.len() - 1) as f64;
    report.check(
        "measure-free drift converges at the first comparison",
        free_iters,
        1.0,
        free_run.outcome == PicardOutcome::Converged && free_run.log.len() == 2,
    );

    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ContractionParams {
        ContractionParams {
            particles: 300,
            seeds: vec![1, 2, 3],
            chaos_particles: 800,
            max_iter: 5,
            ..ContractionParams::default()
        }
    }

    #[test]
    fn inadmissible_exponents_are_rejected() {
        let params = ContractionParams { k: 1.0, ..small() };
        let err = run_picard_contraction(&params).unwrap_err();
        assert!(err.to_string().contains("admissible class"), "got {err}");
    }

    #[test]
    fn mesh_must_divide_the_step_grid() {
        let params = ContractionParams { mesh_nodes: 7, ..small() };
        assert!(run_picard_contraction(&params).is_err());
    }

    #[test]
    fn horizon_formula_feeds_the_run() {
        // p = infinity: the admissible horizon is the index itself
        let params = ContractionParams { horizon_n: 2, ..small() };
        let exps = class_d_check(1, Exponent::Infinity, Exponent::finite(2.0)).unwrap();
        let grid = Grid::centered_cube(1, 6.0, 121).unwrap();
        assert_eq!(params.horizon(&exps, &grid).unwrap(), 2.0);
    }

    #[test]
    fn small_family_contracts_and_matches_the_particle_system() {
        let report = run_picard_contraction(&small()).unwrap();
        for c in &report.criteria {
            assert!(c.passed, "criterion '{}' measured {} vs bound {}", c.name, c.measured, c.bound);
        }
        assert_eq!(report.criteria.len(), 5);
        let ratio = report
            .measurements
            .iter()
            .find(|m| m.name == "contraction_ratio")
            .unwrap();
        assert!(ratio.value > 0.0 && ratio.value < 1.0, "ratio {}", ratio.value);
    }
}
