//! The two Euler-Maruyama loops: interacting particles and decoupled paths.
//!
//! Interacting: at every step each particle's mean-field drift sums the
//! kernel over all other particles of the current cloud (direct O(N^2),
//! fixed summation order). Decoupled: the mean-field term integrates the
//! kernel against a frozen measure flow, so paths are independent.
//!
//! Determinism: particle i draws its step-s noise from a dedicated stream
//! at a fixed address, so results do not depend on the rayon schedule, and
//! a particle's whole path depends only on (seed, its id, its initial
//! point) plus, in the interacting case, the other particles.

use rayon::prelude::*;

use super::{em_step, SdeConfig, TrajectoryBundle};
use crate::kernels::{eval_kernel_into, mean_field_drift_density};
use crate::measure::{EmpiricalMeasure, InitialLaw, MeasureFlow};
use crate::rng::{derive_seed, UnitStream};
use crate::{Error, Result};

/// Seed-tag for drawing the initial sample.
const INIT_TAG: u64 = 0x696e_6974;
/// Seed-tag for the path noise streams.
const PATH_TAG: u64 = 0x7061_7468;

/// Per-particle mutable state carried across steps.
struct ParticleCtx {
    stream: UnitStream,
    noise: Vec<f64>,
}

struct Recorder {
    record_steps: Vec<usize>,
    cursor: usize,
    dt: f64,
    dim: usize,
    times: Vec<f64>,
    states: Vec<EmpiricalMeasure>,
}

impl Recorder {
    fn new(config: &SdeConfig) -> Result<Self> {
        Ok(Recorder {
            record_steps: config.snapped_record_steps()?,
            cursor: 0,
            dt: config.dt,
            dim: config.dim,
            times: Vec::new(),
            states: Vec::new(),
        })
    }

    fn observe(&mut self, step: usize, flat: &[f64]) -> Result<()> {
        if self.cursor < self.record_steps.len() && self.record_steps[self.cursor] == step {
            self.times.push(step as f64 * self.dt);
            self.states.push(EmpiricalMeasure::new(self.dim, flat.to_vec())?);
            self.cursor += 1;
        }
        Ok(())
    }

    fn finish(self) -> Result<TrajectoryBundle> {
        TrajectoryBundle::new(self.times, self.states)
    }
}

fn draw_initial(config: &SdeConfig, init: &InitialLaw) -> Result<EmpiricalMeasure> {
    if init.dim() != config.dim {
        return Err(Error::Shape(format!(
            "initial law dimension {} does not match state dimension {}",
            init.dim(),
            config.dim
        )));
    }
    init.sample(config.n_particles, derive_seed(config.seed, &[INIT_TAG]))
}

fn particle_contexts(config: &SdeConfig, ids: &[u64]) -> Vec<ParticleCtx> {
    let path_seed = derive_seed(config.seed, &[PATH_TAG]);
    let noise_dim = config.sigma.noise_dim(config.dim);
    ids.iter()
        .map(|&id| ParticleCtx {
            stream: UnitStream::new(path_seed, id),
            noise: vec![0.0; noise_dim],
        })
        .collect()
}

/// Interacting N-particle system closed by its own empirical measure.
pub fn simulate_interacting(config: &SdeConfig, init: &InitialLaw) -> Result<TrajectoryBundle> {
    config.validate()?;
    let sample = draw_initial(config, init)?;
    interacting_from_cloud(config, &sample)
}

/// Interacting run from an explicit initial cloud (exact starting points,
/// no resampling), for deterministic configurations such as point vortices.
pub fn simulate_interacting_from_sample(
    config: &SdeConfig,
    sample: &EmpiricalMeasure,
) -> Result<TrajectoryBundle> {
    config.validate()?;
    interacting_from_cloud(config, sample)
}

fn interacting_from_cloud(config: &SdeConfig, sample: &EmpiricalMeasure) -> Result<TrajectoryBundle> {
    let dim = config.dim;
    let n = config.n_particles;
    if sample.dim() != dim || sample.len() != n {
        return Err(Error::Shape(format!(
            "initial sample is {} points in dimension {}, config wants {} in {}",
            sample.len(),
            sample.dim(),
            n,
            dim
        )));
    }
    let dt = config.dt;
    let stride = UnitStream::normal_stride(config.sigma.noise_dim(dim));
    let drift = &config.drift;
    let sigma = &config.sigma;

    let mut cur = sample.coords().to_vec();
    let mut next = vec![0.0; cur.len()];
    let ids: Vec<u64> = (0..n as u64).collect();
    let mut ctxs = particle_contexts(config, &ids);
    let mut recorder = Recorder::new(config)?;
    recorder.observe(0, &cur)?;

    for step in 0..config.n_steps() {
        let t = step as f64 * dt;
        let cur_ref: &[f64] = &cur;
        next.par_chunks_mut(dim)
            .zip(ctxs.par_iter_mut())
            .enumerate()
            .try_for_each(|(i, (out, ctx))| -> Result<()> {
                let x = &cur_ref[i * dim..(i + 1) * dim];
                let mut b = [0.0f64; 3];
                drift.eval_measure_free_into(t, x, &mut b[..dim])?;
                if let Some(mf) = drift.mean_field() {
                    let eps_zero = mf.kernel.epsilon() == 0.0;
                    let mut acc = [0.0f64; 3];
                    let mut term = [0.0f64; 3];
                    for j in 0..n {
                        if j == i {
                            continue;
                        }
                        let y = &cur_ref[j * dim..(j + 1) * dim];
                        if eps_zero && x == y {
                            return Err(Error::Collision { step, i, j });
                        }
                        eval_kernel_into(&mf.kernel, x, y, &mut term[..dim])?;
                        for (a, v) in acc[..dim].iter_mut().zip(&term[..dim]) {
                            *a += v;
                        }
                    }
                    let scale = mf.coupling / n as f64;
                    for (bv, &a) in b[..dim].iter_mut().zip(&acc[..dim]) {
                        *bv += scale * a;
                    }
                }
                ctx.stream.fill_normals(step as u64 * stride, &mut ctx.noise);
                em_step(x, t, i, &b[..dim], sigma, dt, &ctx.noise, out)
            })?;
        std::mem::swap(&mut cur, &mut next);
        recorder.observe(step + 1, &cur)?;
    }
    recorder.finish()
}

/// Decoupled dynamics: paths driven by a frozen measure flow.
pub fn simulate_decoupled(
    config: &SdeConfig,
    flow: &MeasureFlow,
    init: &InitialLaw,
) -> Result<TrajectoryBundle> {
    config.validate()?;
    let sample = draw_initial(config, init)?;
    let ids: Vec<u64> = (0..config.n_particles as u64).collect();
    decoupled_with_ids(config, flow, &sample, &ids)
}

/// Decoupled dynamics from an explicit initial sample (used by the
/// fixed-point solver, which controls its own t = 0 law).
pub fn simulate_decoupled_from_sample(
    config: &SdeConfig,
    flow: &MeasureFlow,
    sample: &EmpiricalMeasure,
) -> Result<TrajectoryBundle> {
    config.validate()?;
    let ids: Vec<u64> = (0..config.n_particles as u64).collect();
    decoupled_with_ids(config, flow, sample, &ids)
}

/// Core decoupled loop with explicit per-particle stream ids; a path is a
/// function of (seed, id, initial point) only, which the factorization
/// tests exercise by relabeling.
pub(crate) fn decoupled_with_ids(
    config: &SdeConfig,
    flow: &MeasureFlow,
    sample: &EmpiricalMeasure,
    ids: &[u64],
) -> Result<TrajectoryBundle> {
    let dim = config.dim;
    let n = config.n_particles;
    if sample.dim() != dim || sample.len() != n {
        return Err(Error::Shape(format!(
            "initial sample is {} points in dimension {}, config wants {} in {}",
            sample.len(),
            sample.dim(),
            n,
            dim
        )));
    }
    if ids.len() != n {
        return Err(Error::Shape("one stream id per particle is required".into()));
    }
    let needs_flow = config.drift.has_mean_field();
    if needs_flow {
        if flow.horizon() < config.horizon - 1e-12 {
            return Err(Error::Parameter(format!(
                "flow horizon {} is shorter than the run horizon {}",
                flow.horizon(),
                config.horizon
            )));
        }
        if flow.grid().dim() != dim {
            return Err(Error::Shape(format!(
                "flow dimension {} does not match state dimension {dim}",
                flow.grid().dim()
            )));
        }
    }
    let dt = config.dt;
    let stride = UnitStream::normal_stride(config.sigma.noise_dim(dim));
    let drift = &config.drift;
    let sigma = &config.sigma;

    let mut cur = sample.coords().to_vec();
    let mut next = vec![0.0; cur.len()];
    let mut ctxs = particle_contexts(config, ids);
    let mut recorder = Recorder::new(config)?;
    recorder.observe(0, &cur)?;

    for step in 0..config.n_steps() {
        let t = step as f64 * dt;
        let frozen = if needs_flow { Some(flow.interpolate(t)?) } else { None };
        let cur_ref: &[f64] = &cur;
        next.par_chunks_mut(dim)
            .zip(ctxs.par_iter_mut())
            .enumerate()
            .try_for_each(|(i, (out, ctx))| -> Result<()> {
                let x = &cur_ref[i * dim..(i + 1) * dim];
                let mut b = [0.0f64; 3];
                drift.eval_measure_free_into(t, x, &mut b[..dim])?;
                if let (Some(mf), Some(rho)) = (drift.mean_field(), frozen) {
                    let field = mean_field_drift_density(&mf.kernel, x, rho)?;
                    for (bv, f) in b[..dim].iter_mut().zip(field) {
                        *bv += mf.coupling * f;
                    }
                }
                ctx.stream.fill_normals(step as u64 * stride, &mut ctx.noise);
                em_step(x, t, i, &b[..dim], sigma, dt, &ctx.noise, out)
            })?;
        std::mem::swap(&mut cur, &mut next);
        recorder.observe(step + 1, &cur)?;
    }
    recorder.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{DriftSpec, KernelFamily, KernelSpec, LipschitzForm, MeanFieldTerm};
    use crate::measure::{Density, Grid};
    use crate::sde::SigmaSpec;

    fn trivial_flow(dim: usize, horizon: f64) -> MeasureFlow {
        let grid = Grid::centered_cube(dim, 4.0, 33).unwrap();
        let rho = Density::from_fn(grid, |x| {
            (-x.iter().map(|v| v * v).sum::<f64>() / 2.0).exp()
        })
        .unwrap();
        MeasureFlow::constant(rho, vec![horizon]).unwrap()
    }

    fn ou_config(dt: f64, n: usize, seed: u64) -> SdeConfig {
        SdeConfig {
            dim: 1,
            drift: DriftSpec::new(
                1,
                None,
                Some(LipschitzForm::LinearPull { rate: 1.0 }),
                vec![],
                true,
            )
            .unwrap(),
            sigma: SigmaSpec::Scalar { value: 0.0 },
            horizon: 1.0,
            dt,
            n_particles: n,
            seed,
            record_mesh: vec![1.0],
            eigen_window: None,
        }
    }

    #[test]
    fn deterministic_euler_converges_to_the_exponential() {
        // x' = -x from 1: terminal (1 - dt)^(1/dt) -> 1/e at first order
        let init = InitialLaw::Dirac { point: vec![1.0] };
        let mut errors = Vec::new();
        for dt in [0.1, 0.01, 0.001] {
            let bundle = simulate_interacting(&ou_config(dt, 1, 1), &init).unwrap();
            let x = bundle.terminal().point(0)[0];
            errors.push((x - (-1.0f64).exp()).abs());
        }
        assert!(errors[2] < 3e-4);
        let r1 = errors[0] / errors[1];
        let r2 = errors[1] / errors[2];
        assert!((r1 - 10.0).abs() < 3.0, "ratio {r1}");
        assert!((r2 - 10.0).abs() < 3.0, "ratio {r2}");
    }

    #[test]
    fn brownian_terminal_variance_is_near_one() {
        let config = SdeConfig {
            dim: 2,
            drift: DriftSpec::free(2),
            sigma: SigmaSpec::Scalar { value: 1.0 },
            horizon: 1.0,
            dt: 0.5,
            n_particles: 4000,
            seed: 11,
            record_mesh: vec![1.0],
            eigen_window: Some((1.0, 1.0)),
        };
        let init = InitialLaw::Dirac { point: vec![0.0, 0.0] };
        let bundle = simulate_interacting(&config, &init).unwrap();
        let tol = 5.0 / (4000f64).sqrt();
        for s in bundle.terminal().std() {
            assert!((s * s - 1.0).abs() < tol, "variance {}", s * s);
        }
    }

    #[test]
    fn antisymmetric_interaction_preserves_the_mean() {
        let kernel = KernelSpec::new(KernelFamily::BiotSavart, 2, 0.05).unwrap();
        let config = SdeConfig {
            dim: 2,
            drift: DriftSpec::new(
                2,
                Some(MeanFieldTerm { kernel, coupling: 1.0 }),
                None,
                vec![],
                false,
            )
            .unwrap(),
            sigma: SigmaSpec::Scalar { value: 0.0 },
            horizon: 0.5,
            dt: 0.05,
            n_particles: 24,
            seed: 3,
            record_mesh: vec![0.0, 0.5],
            eigen_window: None,
        };
        let init = InitialLaw::Gaussian { mean: vec![0.3, -0.2], std: vec![1.0, 1.0] };
        let bundle = simulate_interacting(&config, &init).unwrap();
        let m0 = bundle.states()[0].mean();
        let m1 = bundle.terminal().mean();
        for (a, b) in m0.iter().zip(&m1) {
            assert!((a - b).abs() < 1e-10, "mean moved {a} -> {b}");
        }
    }

    #[test]
    fn exact_collision_aborts_with_indices() {
        let kernel = KernelSpec::new(KernelFamily::Coulomb, 1, 0.0).unwrap();
        let config = SdeConfig {
            dim: 1,
            drift: DriftSpec::new(
                1,
                Some(MeanFieldTerm { kernel, coupling: 1.0 }),
                None,
                vec![],
                false,
            )
            .unwrap(),
            sigma: SigmaSpec::Scalar { value: 1.0 },
            horizon: 1.0,
            dt: 0.5,
            n_particles: 2,
            seed: 9,
            record_mesh: vec![1.0],
            eigen_window: None,
        };
        let init = InitialLaw::Dirac { point: vec![0.7] };
        let err = simulate_interacting(&config, &init).unwrap_err();
        assert!(matches!(err, Error::Collision { step: 0, .. }), "got {err}");
    }

    #[test]
    fn measure_free_drift_makes_both_engines_agree() {
        let mut config = ou_config(0.1, 16, 21);
        config.sigma = SigmaSpec::Scalar { value: 0.7 };
        config.record_mesh = vec![0.5, 1.0];
        let init = InitialLaw::Gaussian { mean: vec![0.0], std: vec![1.0] };
        let flow = trivial_flow(1, 1.0);
        let interacting = simulate_interacting(&config, &init).unwrap();
        let decoupled = simulate_decoupled(&config, &flow, &init).unwrap();
        assert_eq!(interacting, decoupled);
    }

    #[test]
    fn decoupled_paths_factorize_per_particle() {
        // joint run vs one-particle runs with the same stream id: bit-equal
        let kernel = KernelSpec::new(KernelFamily::Riesz { kappa: 0.5, beta: 0.5 }, 1, 0.1).unwrap();
        let mut config = ou_config(0.25, 3, 5);
        config.drift = DriftSpec::new(
            1,
            Some(MeanFieldTerm { kernel, coupling: 1.0 }),
            Some(LipschitzForm::LinearPull { rate: 0.5 }),
            vec![],
            true,
        )
        .unwrap();
        config.sigma = SigmaSpec::Scalar { value: 1.0 };
        config.record_mesh = vec![0.5, 1.0];
        let flow = trivial_flow(1, 1.0);
        let sample = EmpiricalMeasure::new(1, vec![-0.4, 0.2, 1.1]).unwrap();
        let ids: Vec<u64> = vec![0, 1, 2];
        let joint = decoupled_with_ids(&config, &flow, &sample, &ids).unwrap();

        let mut solo_cfg = config.clone();
        solo_cfg.n_particles = 1;
        for i in 0..3 {
            let single = EmpiricalMeasure::new(1, vec![sample.point(i)[0]]).unwrap();
            let solo = decoupled_with_ids(&solo_cfg, &flow, &single, &[ids[i]]).unwrap();
            for (j, t) in [0.5, 1.0].iter().enumerate() {
                assert_eq!(
                    solo.states()[j].point(0),
                    joint.at(*t).unwrap().point(i),
                    "particle {i} at t={t}"
                );
            }
        }
    }

    #[test]
    fn relabeling_permutes_decoupled_paths() {
        let mut config = ou_config(0.25, 3, 17);
        config.sigma = SigmaSpec::Scalar { value: 1.0 };
        let flow = trivial_flow(1, 1.0);
        let sample = EmpiricalMeasure::new(1, vec![-1.0, 0.0, 1.0]).unwrap();
        let fwd = decoupled_with_ids(&config, &flow, &sample, &[0, 1, 2]).unwrap();
        // permutation pi = (2, 0, 1) applied to points and ids together
        let permuted = EmpiricalMeasure::new(1, vec![1.0, -1.0, 0.0]).unwrap();
        let back = decoupled_with_ids(&config, &flow, &permuted, &[2, 0, 1]).unwrap();
        let pi = [2usize, 0, 1];
        for (i, &p) in pi.iter().enumerate() {
            assert_eq!(back.terminal().point(i), fwd.terminal().point(p));
        }
    }

    #[test]
    fn reruns_are_bit_identical() {
        let kernel = KernelSpec::new(KernelFamily::Coulomb, 2, 0.1).unwrap();
        let config = SdeConfig {
            dim: 2,
            drift: DriftSpec::new(
                2,
                Some(MeanFieldTerm { kernel, coupling: 0.5 }),
                Some(LipschitzForm::LinearPull { rate: 1.0 }),
                vec![],
                true,
            )
            .unwrap(),
            sigma: SigmaSpec::Scalar { value: 0.8 },
            horizon: 0.4,
            dt: 0.05,
            n_particles: 40,
            seed: 33,
            record_mesh: vec![0.2, 0.4],
            eigen_window: Some((0.5, 0.7)),
        };
        let init = InitialLaw::Gaussian { mean: vec![0.0, 0.0], std: vec![1.0, 1.0] };
        let a = simulate_interacting(&config, &init).unwrap();
        let b = simulate_interacting(&config, &init).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn explicit_clouds_bypass_the_law_sampler() {
        let mut config = ou_config(0.1, 2, 77);
        config.sigma = SigmaSpec::Scalar { value: 0.4 };
        let init = InitialLaw::Gaussian { mean: vec![0.0], std: vec![1.0] };
        let drawn = init
            .sample(2, derive_seed(config.seed, &[INIT_TAG]))
            .unwrap();
        let via_law = simulate_interacting(&config, &init).unwrap();
        let via_cloud = simulate_interacting_from_sample(&config, &drawn).unwrap();
        assert_eq!(via_law, via_cloud);

        let short = EmpiricalMeasure::new(1, vec![0.0]).unwrap();
        assert!(matches!(
            simulate_interacting_from_sample(&config, &short),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn moments_of_recorded_clouds() {
        use crate::sde::empirical_moments;
        let config = SdeConfig {
            dim: 1,
            drift: DriftSpec::free(1),
            sigma: SigmaSpec::Scalar { value: 1.0 },
            horizon: 1.0,
            dt: 0.25,
            n_particles: 2000,
            seed: 2,
            record_mesh: vec![1.0],
            eigen_window: None,
        };
        let init = InitialLaw::Dirac { point: vec![0.0] };
        let bundle = simulate_interacting(&config, &init).unwrap();
        let m = empirical_moments(&bundle, 1.0, 4.0).unwrap();
        // fourth moment of N(0, 1) is 3; allow a generous CLT band
        assert!((m.radial_moment - 3.0).abs() < 0.5, "got {}", m.radial_moment);
        assert!(m.mean[0].abs() < 0.1);
        assert!(empirical_moments(&bundle, 0.123, 2.0).is_err());
    }
}
