//! The iteration map Phi and the fixed-point driver.
//!
//! One Phi evaluation simulates M decoupled paths against a frozen input
//! flow and turns the recorded clouds back into a flow by kernel density
//! estimation on a fixed grid, keeping the prescribed t=0 law. The driver
//! iterates Phi from the constant-in-time estimate of the initial law,
//! measuring progress with the weighted seminormed distance and stopping
//! at a tolerance no tighter than twice the Monte-Carlo floor (the
//! distance between two independent-seed Phi evaluations of one input).

use serde::{Deserialize, Serialize};

use super::{flow_diagnostics, tau_n, weighted_rho, ExponentParams, FlowDiagnostics};
use crate::measure::{
    kde_estimate, silverman_bandwidth, EmpiricalMeasure, FlowInitial, Grid, InitialLaw,
    MeasureFlow,
};
use crate::metrics::{kstar_norm_surrogate, KStarParams};
use crate::rng::derive_seed;
use crate::sde::{simulate_decoupled, SdeConfig};
use crate::{Error, Result};

/// Seed-tag for the constant bootstrap flow's sample.
const MU0_TAG: u64 = 0x6d75_30;
/// Seed-tag for the extra floor-estimation evaluation.
const FLOOR_TAG: u64 = 0x666c_6f6f_72;
/// Seed-tag prefix for iterate evaluations.
const ITER_TAG: u64 = 0x6974_6572;

/// Weight-rate doublings allowed before the divergence counter takes over;
/// keeps the exponential weight in a numerically meaningful range.
const MAX_LAMBDA_SWITCHES: u32 = 8;

/// How the kernel density estimator picks its bandwidth at each mesh node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum BandwidthPolicy {
    /// Per-axis rule h_a = std_a * M^(-1/(d+4)) from each recorded cloud.
    Silverman,
    /// A fixed per-axis bandwidth shared by every mesh node.
    Fixed { per_axis: Vec<f64> },
}

impl BandwidthPolicy {
    fn bandwidth(&self, sample: &EmpiricalMeasure) -> Result<Vec<f64>> {
        match self {
            BandwidthPolicy::Silverman => silverman_bandwidth(sample),
            BandwidthPolicy::Fixed { per_axis } => {
                if per_axis.len() != sample.dim() {
                    return Err(Error::Shape(format!(
                        "{} bandwidths for dimension {}",
                        per_axis.len(),
                        sample.dim()
                    )));
                }
                if per_axis.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
                    return Err(Error::Parameter("bandwidths must be positive".into()));
                }
                Ok(per_axis.clone())
            }
        }
    }
}

/// Everything one fixed-point run needs beyond the initial law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardConfig {
    pub exponents: ExponentParams,
    /// Initial weight rate lambda >= 0 of the seminormed distance.
    pub lambda: f64,
    /// Absolute stopping tolerance (floored at twice the Monte-Carlo noise).
    pub tol: f64,
    pub max_iter: usize,
    /// Paths per Phi evaluation.
    pub particles: usize,
    pub bandwidth: BandwidthPolicy,
    /// Shared estimation grid of every flow in the run.
    pub grid: Grid,
    /// Simulation template; particle count and seed are overridden per
    /// evaluation, and its record mesh is the flow mesh.
    pub sde: SdeConfig,
    /// Horizon constant in (0, 1] for the admissible-horizon formula.
    pub beta0: f64,
    /// Blow-up ceiling on ||mu_t||_{k*}.
    pub blowup_ceiling: f64,
}

impl PicardConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.exponents.in_class_d() {
            let (d, p, k) = (self.exponents.dim(), self.exponents.p(), self.exponents.k());
            return Err(Error::Parameter(format!(
                "exponent pair outside the admissible class: need 1/k - 1/d < 1/p, \
                 got 1/k - 1/d = {} and 1/p = {}",
                1.0 / k.value() - 1.0 / d as f64,
                match p {
                    crate::metrics::Exponent::Infinity => 0.0,
                    v => 1.0 / v.value(),
                },
            )));
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::Parameter(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Parameter("at least one iteration is required".into()));
        }
        if self.particles < 2 {
            return Err(Error::Parameter("at least two paths per evaluation".into()));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Parameter(format!(
                "weight rate must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.beta0 > 0.0 && self.beta0 <= 1.0) {
            return Err(Error::Parameter(format!(
                "horizon constant must lie in (0, 1], got {}",
                self.beta0
            )));
        }
        if !(self.blowup_ceiling > 0.0) {
            return Err(Error::Parameter("blow-up ceiling must be positive".into()));
        }
        if self.grid.dim() != self.sde.dim {
            return Err(Error::Shape(format!(
                "estimation grid dimension {} vs state dimension {}",
                self.grid.dim(),
                self.sde.dim
            )));
        }
        if self.exponents.dim() != self.sde.dim {
            return Err(Error::Shape(format!(
                "exponent dimension {} vs state dimension {}",
                self.exponents.dim(),
                self.sde.dim
            )));
        }
        let sde = self.effective_sde(self.sde.seed);
        sde.validate()?;
        let steps = sde.snapped_record_steps()?;
        if steps.first() == Some(&0) && steps.len() == 1 {
            return Err(Error::Parameter("flow mesh needs at least one positive time".into()));
        }
        if steps.last() != Some(&sde.n_steps()) {
            return Err(Error::Parameter(
                "the record mesh must end at the horizon so iterates span [0, T]".into(),
            ));
        }
        Ok(())
    }

    /// The template specialized to one Phi evaluation.
    fn effective_sde(&self, seed: u64) -> SdeConfig {
        let mut sde = self.sde.clone();
        sde.n_particles = self.particles;
        sde.seed = seed;
        sde
    }

    /// Strictly positive flow mesh times (snapped to whole steps).
    fn mesh_times(&self) -> Result<Vec<f64>> {
        Ok(self
            .sde
            .snapped_record_steps()?
            .into_iter()
            .filter(|&s| s > 0)
            .map(|s| s as f64 * self.sde.dt)
            .collect())
    }

    fn initial_node(&self, gamma: &InitialLaw) -> Result<FlowInitial> {
        Ok(match gamma.density_on(&self.grid)? {
            Some(d0) => FlowInitial::Density(d0),
            None => FlowInitial::Sampler(gamma.clone()),
        })
    }
}

/// One application of the iteration map: simulate M decoupled paths
/// against `flow`, then estimate the law at every positive mesh time.
pub fn phi_map(
    flow: &MeasureFlow,
    gamma: &InitialLaw,
    cfg: &PicardConfig,
    iterate_seed: u64,
) -> Result<MeasureFlow> {
    cfg.validate()?;
    let sde = cfg.effective_sde(iterate_seed);
    let bundle = simulate_decoupled(&sde, flow, gamma)?;
    let mut times = Vec::new();
    let mut densities = Vec::new();
    for (&t, cloud) in bundle.times().iter().zip(bundle.states()) {
        if t <= 0.0 {
            continue;
        }
        let h = cfg.bandwidth.bandwidth(cloud)?;
        densities.push(kde_estimate(cloud, &cfg.grid, &h)?);
        times.push(t);
    }
    MeasureFlow::new(cfg.initial_node(gamma)?, times, densities)
}

/// Constant-in-time bootstrap flow: the density estimate of one sample of
/// the initial law, repeated at every mesh node.
fn bootstrap_flow(gamma: &InitialLaw, cfg: &PicardConfig) -> Result<MeasureFlow> {
    let sample = gamma.sample(cfg.particles, derive_seed(cfg.sde.seed, &[MU0_TAG]))?;
    let h = cfg.bandwidth.bandwidth(&sample)?;
    let d0 = kde_estimate(&sample, &cfg.grid, &h)?;
    let times = cfg.mesh_times()?;
    let densities = vec![d0; times.len()];
    MeasureFlow::new(cfg.initial_node(gamma)?, times, densities)
}

/// One row of the iteration log: the distance between consecutive iterates
/// and its ratio to the previous row (absent on the bootstrap row).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub rho: f64,
    pub ratio: Option<f64>,
}

/// How a fixed-point run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PicardOutcome {
    /// Consecutive iterates came within the effective tolerance.
    Converged,
    /// The iteration budget ran out first.
    MaxIterations,
    /// Distances failed to contract for three consecutive iterations
    /// while above the Monte-Carlo floor.
    Diverged,
    /// A flow norm crossed the configured ceiling.
    BlownUp,
}

/// Result of a fixed-point run: the last iterate, the full log, and the
/// diagnostics of the final flow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardRun {
    pub flow: MeasureFlow,
    pub log: Vec<IterationRecord>,
    pub outcome: PicardOutcome,
    /// Weight rate in effect when the run ended.
    pub lambda: f64,
    /// Monte-Carlo floor under the final weight rate.
    pub mc_floor: f64,
    pub diagnostics: FlowDiagnostics,
    /// Present on blow-up: (t, (T-t)^theta ||mu_t||_{p*}) over the mesh.
    pub leray_series: Option<Vec<(f64, f64)>>,
}

/// Iterates Phi from the bootstrap flow until the weighted distance
/// between consecutive iterates drops under max(tol, 2 * floor), the
/// budget runs out, or a divergence/blow-up diagnostic fires.
pub fn solve_fixed_point(gamma: &InitialLaw, cfg: &PicardConfig) -> Result<PicardRun> {
    cfg.validate()?;
    gamma.validate()?;
    let b0_present = cfg.sde.drift.has_mean_field();
    let kparams = cfg.exponents.kstar_params()?;
    admissible_horizon_gate(gamma, cfg, b0_present)?;

    let base = cfg.sde.seed;
    let mu0 = bootstrap_flow(gamma, cfg)?;
    // bootstrap iterate and an independent twin for the noise floor
    let mu1 = phi_map(&mu0, gamma, cfg, derive_seed(base, &[ITER_TAG, 0]))?;
    let twin = phi_map(&mu0, gamma, cfg, derive_seed(base, &[FLOOR_TAG]))?;

    let mut lambda = cfg.lambda;
    let mut floor = weighted_rho(&mu1, &twin, lambda, &cfg.exponents, &kparams)?;
    let mut rho_prev = weighted_rho(&mu1, &mu0, lambda, &cfg.exponents, &kparams)?;
    let mut log = vec![IterationRecord { iter: 0, rho: rho_prev, ratio: None }];

    let mut prev = mu1.clone();
    let mut switches = 0u32;
    let mut stalls = 0u32;
    let mut outcome = PicardOutcome::MaxIterations;
    let mut leray_series = None;

    for j in 1..=cfg.max_iter {
        let next = phi_map(&prev, gamma, cfg, derive_seed(base, &[ITER_TAG, j as u64]))?;
        let diag = flow_diagnostics(&next, &cfg.exponents, &kparams, b0_present, cfg.blowup_ceiling)?;
        let rho = weighted_rho(&next, &prev, lambda, &cfg.exponents, &kparams)?;
        let ratio = (rho_prev > 0.0).then(|| rho / rho_prev);
        log.push(IterationRecord { iter: j, rho, ratio });

        if diag.blowup_flag {
            outcome = PicardOutcome::BlownUp;
            leray_series = Some(leray_profile(&next, cfg)?);
            prev = next;
            break;
        }
        if rho <= cfg.tol.max(2.0 * floor) {
            outcome = PicardOutcome::Converged;
            prev = next;
            break;
        }
        match ratio {
            // slow contraction: raise the weight rate and restart the
            // comparison under the new metric (the floor moves with it)
            Some(r) if r >= 0.9 && switches < MAX_LAMBDA_SWITCHES => {
                lambda = (2.0 * lambda).max(1.0);
                switches += 1;
                stalls = 0;
                floor = weighted_rho(&mu1, &twin, lambda, &cfg.exponents, &kparams)?;
                rho_prev = weighted_rho(&next, &prev, lambda, &cfg.exponents, &kparams)?;
            }
            Some(r) if r >= 1.0 && rho > floor => {
                stalls += 1;
                if stalls >= 3 {
                    outcome = PicardOutcome::Diverged;
                    prev = next;
                    break;
                }
                rho_prev = rho;
            }
            _ => {
                stalls = 0;
                rho_prev = rho;
            }
        }
        prev = next;
    }

    let diagnostics = flow_diagnostics(&prev, &cfg.exponents, &kparams, b0_present, cfg.blowup_ceiling)?;
    Ok(PicardRun {
        flow: prev,
        log,
        outcome,
        lambda,
        mc_floor: floor,
        diagnostics,
        leray_series,
    })
}

/// With a singular mean-field term at finite p, the run horizon must not
/// exceed the admissible horizon of the initial law.
fn admissible_horizon_gate(gamma: &InitialLaw, cfg: &PicardConfig, b0_present: bool) -> Result<()> {
    if !b0_present || cfg.exponents.p().is_infinite() {
        return Ok(());
    }
    let d0 = gamma.density_on(&cfg.grid)?.ok_or_else(|| {
        Error::Parameter(
            "finite p with a sampler-only initial law: its p*-norm is infinite, \
             so the admissible horizon is zero"
                .into(),
        )
    })?;
    let pstar = KStarParams::new(cfg.exponents.p(), cfg.exponents.dim())?;
    let gamma_norm = kstar_norm_surrogate(&d0, &pstar);
    let tau = tau_n(gamma_norm, 1, &cfg.exponents, cfg.beta0, true)?;
    if cfg.sde.horizon > tau + 1e-12 {
        return Err(Error::Parameter(format!(
            "horizon {} exceeds the admissible horizon {tau:.6} for this initial law \
             (p* norm {gamma_norm:.4})",
            cfg.sde.horizon
        )));
    }
    Ok(())
}

/// Blow-up diagnostic series (t, (T-t)^theta ||mu_t||_{p*}) over the mesh.
fn leray_profile(flow: &MeasureFlow, cfg: &PicardConfig) -> Result<Vec<(f64, f64)>> {
    let pstar = KStarParams::new(cfg.exponents.p(), cfg.exponents.dim())?;
    let horizon = flow.horizon();
    let theta = cfg.exponents.theta();
    Ok(flow
        .times()
        .iter()
        .zip(flow.densities())
        .map(|(&t, d)| {
            let weight = (horizon - t).max(0.0).powf(theta);
            (t, weight * kstar_norm_surrogate(d, &pstar))
        })
        .collect())
}
