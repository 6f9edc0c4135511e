//! Euler-Maruyama engines for the interacting-particle system and the
//! measure-decoupled dynamics.
//!
//! Both engines integrate dX = b dt + sigma dW with the explicit scheme
//! x_{n+1} = x_n + b(t_n, x_n) dt + sigma(x_n) sqrt(dt) w_n. The interacting
//! engine closes the mean-field term with the current empirical measure of
//! the N particles; the decoupled engine reads a frozen measure flow
//! instead, so its paths never see each other. Noise is drawn from
//! counter-based streams keyed by (seed, particle, step), which makes every
//! run bit-reproducible regardless of thread count.

mod engine;
mod sigma;

pub use engine::{
    simulate_decoupled, simulate_decoupled_from_sample, simulate_interacting,
    simulate_interacting_from_sample,
};
pub use sigma::SigmaSpec;

use serde::{Deserialize, Serialize};

use crate::kernels::DriftSpec;
use crate::measure::EmpiricalMeasure;
use crate::{Error, Result};

/// Dimensions supported by the lab's grids and engines.
const MAX_DIM: usize = 3;
/// Tolerance for matching requested record times to step multiples.
const TIME_TOL: f64 = 1e-9;

/// Complete specification of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub dim: usize,
    pub drift: DriftSpec,
    pub sigma: SigmaSpec,
    /// Horizon T; must be an integer number of steps.
    pub horizon: f64,
    pub dt: f64,
    pub n_particles: usize,
    pub seed: u64,
    /// Requested output times; each snaps to the nearest step multiple.
    pub record_mesh: Vec<f64>,
    /// Declared two-sided eigenvalue window for sigma sigma*; when present
    /// the diffusion must be uniformly elliptic inside it.
    #[serde(default)]
    pub eigen_window: Option<(f64, f64)>,
}

impl SdeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > MAX_DIM {
            return Err(Error::Parameter(format!(
                "dimension must lie in 1..={MAX_DIM}, got {}",
                self.dim
            )));
        }
        if self.drift.dim() != self.dim {
            return Err(Error::Shape(format!(
                "drift dimension {} does not match state dimension {}",
                self.drift.dim(),
                self.dim
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Parameter("horizon must be positive and finite".into()));
        }
        if !(self.dt > 0.0 && self.dt <= self.horizon) {
            return Err(Error::Parameter(format!(
                "step must satisfy 0 < dt <= horizon, got dt={} T={}",
                self.dt, self.horizon
            )));
        }
        let steps = (self.horizon / self.dt).round();
        if (steps * self.dt - self.horizon).abs() > TIME_TOL * self.horizon.max(1.0) {
            return Err(Error::Parameter(format!(
                "horizon {} is not an integer number of steps of {}",
                self.horizon, self.dt
            )));
        }
        if self.n_particles == 0 {
            return Err(Error::Parameter("at least one particle is required".into()));
        }
        self.sigma.validate(self.dim)?;
        if let Some((lo, hi)) = self.eigen_window {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::Parameter(format!(
                    "eigenvalue window must satisfy 0 < min <= max, got [{lo}, {hi}]"
                )));
            }
            let (emin, emax) = self.sigma.diffusion_eigen_range(self.dim);
            if emin < lo - 1e-12 || emax > hi + 1e-12 {
                return Err(Error::Parameter(format!(
                    "sigma sigma* eigenvalues span [{emin}, {emax}], outside the declared [{lo}, {hi}]"
                )));
            }
        }
        self.snapped_record_steps()?;
        Ok(())
    }

    /// Number of Euler steps to the horizon.
    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// Record times snapped to step indices, strictly increasing.
    pub fn snapped_record_steps(&self) -> Result<Vec<usize>> {
        if self.record_mesh.is_empty() {
            return Err(Error::Parameter("record mesh must contain at least one time".into()));
        }
        let n_steps = self.n_steps();
        let mut steps = Vec::with_capacity(self.record_mesh.len());
        for &t in &self.record_mesh {
            if !(t >= -TIME_TOL && t <= self.horizon + TIME_TOL) {
                return Err(Error::Parameter(format!(
                    "record time {t} lies outside [0, {}]",
                    self.horizon
                )));
            }
            let s = (t / self.dt).round().clamp(0.0, n_steps as f64) as usize;
            if let Some(&last) = steps.last() {
                if s <= last {
                    return Err(Error::Parameter(format!(
                        "record times must be strictly increasing after snapping to steps of {}",
                        self.dt
                    )));
                }
            }
            steps.push(s);
        }
        Ok(steps)
    }
}

/// Recorded states of one run: one equally weighted particle cloud per
/// recorded time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryBundle {
    times: Vec<f64>,
    states: Vec<EmpiricalMeasure>,
}

impl TrajectoryBundle {
    pub(crate) fn new(times: Vec<f64>, states: Vec<EmpiricalMeasure>) -> Result<Self> {
        if times.len() != states.len() || times.is_empty() {
            return Err(Error::Shape("one recorded cloud per record time is required".into()));
        }
        let (d, n) = (states[0].dim(), states[0].len());
        if states.iter().any(|s| s.dim() != d || s.len() != n) {
            return Err(Error::Shape("recorded clouds must share shape".into()));
        }
        Ok(TrajectoryBundle { times, states })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[EmpiricalMeasure] {
        &self.states
    }

    /// Cloud recorded at time `t` (within tolerance).
    pub fn at(&self, t: f64) -> Result<&EmpiricalMeasure> {
        self.times
            .iter()
            .position(|&u| (u - t).abs() <= TIME_TOL.max(1e-12 * t.abs()))
            .map(|i| &self.states[i])
            .ok_or_else(|| Error::Parameter(format!("time {t} was not recorded")))
    }

    /// Cloud at the last recorded time.
    pub fn terminal(&self) -> &EmpiricalMeasure {
        self.states.last().expect("bundle is never empty")
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn n_particles(&self) -> usize {
        self.states[0].len()
    }
}

/// Moment summary of a recorded cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    /// (1/N) sum |x_i|^q.
    pub radial_moment: f64,
    pub mean: Vec<f64>,
    /// Per-axis population variance.
    pub variance: Vec<f64>,
}

/// Radial q-moment and per-axis mean/variance at a recorded time.
pub fn empirical_moments(bundle: &TrajectoryBundle, t: f64, q: f64) -> Result<MomentSummary> {
    if !(q > 0.0) {
        return Err(Error::Parameter(format!("moment order must be positive, got {q}")));
    }
    let cloud = bundle.at(t)?;
    let n = cloud.len() as f64;
    let radial = cloud
        .iter()
        .map(|p| p.iter().map(|&v| v * v).sum::<f64>().sqrt().powf(q))
        .sum::<f64>()
        / n;
    let mean = cloud.mean();
    let std = cloud.std();
    Ok(MomentSummary {
        radial_moment: radial,
        mean,
        variance: std.into_iter().map(|s| s * s).collect(),
    })
}

/// One explicit Euler-Maruyama update: x + b dt + sigma(x) sqrt(dt) w.
/// `particle` only labels the overflow diagnostic.
pub fn em_step(
    x: &[f64],
    t: f64,
    particle: usize,
    drift: &[f64],
    sigma: &SigmaSpec,
    dt: f64,
    noise: &[f64],
    out: &mut [f64],
) -> Result<()> {
    for ((o, &xi), &bi) in out.iter_mut().zip(x).zip(drift) {
        *o = xi + bi * dt;
    }
    sigma.add_scaled_noise(x, dt.sqrt(), noise, out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow { t, particle });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::DriftSpec;

    fn base_config() -> SdeConfig {
        SdeConfig {
            dim: 1,
            drift: DriftSpec::free(1),
            sigma: SigmaSpec::Scalar { value: 1.0 },
            horizon: 1.0,
            dt: 0.1,
            n_particles: 4,
            seed: 7,
            record_mesh: vec![0.5, 1.0],
            eigen_window: Some((1.0, 1.0)),
        }
    }

    #[test]
    fn em_step_arithmetic() {
        let sigma = SigmaSpec::Scalar { value: 2.0 };
        let mut out = [0.0];
        em_step(&[0.0], 0.0, 0, &[1.0], &sigma, 0.01, &[0.5], &mut out).unwrap();
        assert!((out[0] - 0.11).abs() < 1e-15);
    }

    #[test]
    fn em_step_special_cases() {
        let id = SigmaSpec::Scalar { value: 1.0 };
        let mut out = [0.0, 0.0];
        em_step(&[1.0, -1.0], 0.0, 0, &[0.0, 0.0], &id, 0.04, &[1.0, 2.0], &mut out).unwrap();
        assert_eq!(out, [1.2, -0.6]);
        em_step(&[1.0, -1.0], 0.0, 0, &[3.0, 1.0], &id, 0.5, &[0.0, 0.0], &mut out).unwrap();
        assert_eq!(out, [2.5, -0.5]);
    }

    #[test]
    fn em_step_flags_overflow() {
        let sigma = SigmaSpec::Scalar { value: 1.0 };
        let mut out = [0.0];
        let err = em_step(&[1e308], 2.0, 5, &[1e308], &sigma, 1.0, &[0.0], &mut out).unwrap_err();
        assert!(matches!(err, Error::Overflow { particle: 5, .. }));
    }

    #[test]
    fn config_validation_catches_bad_meshes_and_windows() {
        let ok = base_config();
        assert!(ok.validate().is_ok());
        assert_eq!(ok.n_steps(), 10);
        assert_eq!(ok.snapped_record_steps().unwrap(), vec![5, 10]);

        let mut off_mesh = base_config();
        off_mesh.record_mesh = vec![0.52, 0.53]; // both snap to step 5
        assert!(off_mesh.validate().is_err());

        let mut beyond = base_config();
        beyond.record_mesh = vec![1.5];
        assert!(beyond.validate().is_err());

        let mut ragged = base_config();
        ragged.horizon = 0.95; // not a multiple of dt
        assert!(ragged.validate().is_err());

        let mut window = base_config();
        window.eigen_window = Some((2.0, 3.0)); // sigma = 1 falls outside
        assert!(window.validate().is_err());
    }

    #[test]
    fn record_times_snap_to_steps() {
        let mut cfg = base_config();
        cfg.record_mesh = vec![0.249, 0.75];
        // 0.249 / 0.1 rounds to step 2, 0.75 / 0.1 rounds to step 8
        assert_eq!(cfg.snapped_record_steps().unwrap(), vec![2, 8]);
    }
}
