//! Run configuration, dispatch, and the laboratory's operational shell.
//!
//! Configs are TOML (comments allowed, unknown keys rejected); outputs are
//! CSV tables and JSON objects plus a provenance manifest. A run stages
//! its outputs in a temporary sibling directory and renames it into place,
//! so the output directory either appears complete or not at all. Every
//! artifact except the manifest is byte-reproducible: reruns of the same
//! resolved config produce identical checksums, and the worker-count cap
//! `MKVLAB_THREADS` never changes results, only scheduling.

mod manifest;
mod table;

pub use manifest::{OutputRecord, RunManifest, RunStatus, MANIFEST_FILE};
pub use table::{
    float_field, load_json, save_json, write_iterations_csv, write_named_values_csv,
    write_trajectories_csv,
};

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::kernels::{DriftSpec, KernelFamily, KernelSpec, LipschitzForm, MeanFieldTerm, SingularTerm};
use crate::measure::{Grid, InitialLaw};
use crate::metrics::{
    kstar_distance, kstar_norm_surrogate, relative_entropy, tv_distance, wasserstein_q, Exponent,
    KStarParams,
};
use crate::picard::{class_d_check, solve_fixed_point, BandwidthPolicy, PicardConfig};
use crate::rng::derive_seed;
use crate::sde::{simulate_interacting, SdeConfig, SigmaSpec};
use crate::{experiments, Error, Result};

use manifest::{hash_outputs, sha256_hex, unix_ms, StagingDir};

/// Seed-tag separating the second metrics sample from the first.
const SECOND_SAMPLE_TAG: u64 = 0x6d32;

/// Default Euler steps when the config leaves `dt` out.
const DEFAULT_STEPS: f64 = 200.0;

/// The branch a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Simulate,
    Picard,
    Metrics,
    Experiment,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scenario::Simulate => "simulate",
            Scenario::Picard => "picard",
            Scenario::Metrics => "metrics",
            Scenario::Experiment => "experiment",
        };
        f.write_str(s)
    }
}

/// `[sde]` table: the simulation backbone shared by the simulate and
/// picard branches. The drift lives in `[kernel]` and `[drift]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdeSection {
    pub dim: usize,
    pub horizon: f64,
    /// Euler step; defaults to horizon / 200.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub n_particles: usize,
    /// Output times; defaults to the horizon alone.
    pub record_mesh: Vec<f64>,
    pub sigma: SigmaSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigen_window: Option<(f64, f64)>,
    /// Time-zero law; defaults to the standard Gaussian in `dim`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<InitialLaw>,
}

impl Default for SdeSection {
    fn default() -> Self {
        SdeSection {
            dim: 1,
            horizon: 1.0,
            dt: None,
            n_particles: 1000,
            record_mesh: Vec::new(),
            sigma: SigmaSpec::Scalar { value: 1.0 },
            eigen_window: None,
            init: None,
        }
    }
}

impl SdeSection {
    fn resolve(&mut self) {
        if self.dt.is_none() {
            self.dt = Some(self.horizon / DEFAULT_STEPS);
        }
        if self.record_mesh.is_empty() {
            self.record_mesh = vec![self.horizon];
        }
        if self.init.is_none() {
            self.init = Some(InitialLaw::Gaussian {
                mean: vec![0.0; self.dim],
                std: vec![1.0; self.dim],
            });
        }
    }

    fn initial_law(&self) -> &InitialLaw {
        self.init.as_ref().expect("resolved section")
    }
}

/// `[kernel]` table: explicit family name plus its numeric parameters,
/// the blob length, and the mean-field coupling strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<Vec<f64>>>,
    /// Blob length; 0 keeps the bare singular kernel.
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "default_coupling")]
    pub coupling: f64,
}

fn default_coupling() -> f64 {
    1.0
}

impl KernelSection {
    fn mean_field_term(&self, dim: usize) -> Result<MeanFieldTerm> {
        let reject_power_params = || -> Result<()> {
            if self.kappa.is_some() || self.beta.is_some() || self.centers.is_some() {
                return Err(Error::Config(format!(
                    "kernel family '{}' takes no kappa, beta, or centers",
                    self.family
                )));
            }
            Ok(())
        };
        let riesz_params = || -> Result<(f64, f64)> {
            match (self.kappa, self.beta) {
                (Some(kappa), Some(beta)) => Ok((kappa, beta)),
                _ => Err(Error::Config(format!(
                    "kernel family '{}' needs both kappa and beta",
                    self.family
                ))),
            }
        };
        let family = match self.family.as_str() {
            "coulomb" => {
                reject_power_params()?;
                KernelFamily::Coulomb
            }
            "newton" => {
                reject_power_params()?;
                KernelFamily::Newton
            }
            "biot_savart" => {
                reject_power_params()?;
                KernelFamily::BiotSavart
            }
            "riesz" => {
                let (kappa, beta) = riesz_params()?;
                if self.centers.is_some() {
                    return Err(Error::Config("kernel family 'riesz' takes no centers".into()));
                }
                KernelFamily::Riesz { kappa, beta }
            }
            "shifted_riesz" => {
                let (kappa, beta) = riesz_params()?;
                let centers = self.centers.clone().ok_or_else(|| {
                    Error::Config("kernel family 'shifted_riesz' needs centers".into())
                })?;
                KernelFamily::ShiftedRiesz { kappa, beta, centers }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown kernel family '{other}'; expected coulomb, newton, \
                     biot_savart, riesz, or shifted_riesz"
                )));
            }
        };
        Ok(MeanFieldTerm {
            kernel: KernelSpec::new(family, dim, self.epsilon)?,
            coupling: self.coupling,
        })
    }
}

/// `[drift]` table: measure-free drift parts and the origin-pinned flag;
/// the mean-field part comes from `[kernel]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regular: Option<LipschitzForm>,
    pub singular: Vec<SingularTerm>,
    pub origin_pinned: bool,
}

/// `[exponents]` table: the (d, p, k) triple of the fixed-point run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentsSection {
    pub d: usize,
    pub p: Exponent,
    pub k: Exponent,
}

/// Centered-cube grid shorthand used by the picard and metrics tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub half_width: f64,
    pub nodes: usize,
}

impl GridSection {
    fn build(&self, dim: usize) -> Result<Grid> {
        Grid::centered_cube(dim, self.half_width, self.nodes)
    }
}

/// `[picard]` table: fixed-point solver knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardSection {
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Paths per iteration map evaluation.
    pub particles: usize,
    pub bandwidth: BandwidthPolicy,
    pub beta0: f64,
    pub blowup_ceiling: f64,
    pub grid: GridSection,
}

impl Default for PicardSection {
    fn default() -> Self {
        PicardSection {
            lambda: 0.0,
            tol: 1e-6,
            max_iter: 12,
            particles: 800,
            bandwidth: BandwidthPolicy::Silverman,
            beta0: 0.25,
            blowup_ceiling: 1e6,
            grid: GridSection { half_width: 6.0, nodes: 121 },
        }
    }
}

/// `[metrics]` table: one or two laws to estimate and compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    /// Dual-norm exponent; must exceed 1.
    #[serde(default = "default_metrics_k")]
    pub k: f64,
    /// Wasserstein order.
    #[serde(default = "default_metrics_q")]
    pub q: f64,
    /// Sample size of the Wasserstein comparison.
    #[serde(default = "default_metrics_samples")]
    pub samples: usize,
    #[serde(default = "default_metrics_grid")]
    pub grid: GridSection,
    pub first: InitialLaw,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second: Option<InitialLaw>,
}

fn default_metrics_k() -> f64 {
    2.0
}

fn default_metrics_q() -> f64 {
    2.0
}

fn default_metrics_samples() -> usize {
    2048
}

fn default_metrics_grid() -> GridSection {
    GridSection { half_width: 6.0, nodes: 241 }
}

/// `[experiment]` table: scenario name plus its parameter overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<toml::Value>,
}

/// A fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sde: Option<SdeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<ExponentsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub picard: Option<PicardSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSection>,
}

impl RunConfig {
    /// Fills defaults and validates everything checkable without compute.
    pub fn resolve(mut self) -> Result<Self> {
        match self.scenario {
            Scenario::Simulate => {
                let sde = self.sde.get_or_insert_with(SdeSection::default);
                sde.resolve();
            }
            Scenario::Picard => {
                if self.exponents.is_none() {
                    return Err(Error::Config(
                        "the picard branch needs an [exponents] table".into(),
                    ));
                }
                let sde = self.sde.get_or_insert_with(SdeSection::default);
                sde.resolve();
                self.picard.get_or_insert_with(PicardSection::default);
            }
            Scenario::Metrics => {
                if self.metrics.is_none() {
                    return Err(Error::Config("the metrics branch needs a [metrics] table".into()));
                }
            }
            Scenario::Experiment => {
                if self.experiment.is_none() {
                    return Err(Error::Config(
                        "the experiment branch needs an [experiment] table".into(),
                    ));
                }
            }
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if let Some(exp) = &self.exponents {
            let params = class_d_check(exp.d, exp.p, exp.k)?;
            if !params.in_class_d() {
                let inv_p = match exp.p {
                    Exponent::Infinity => 0.0,
                    v => 1.0 / v.value(),
                };
                return Err(Error::Config(format!(
                    "exponents (d, p, k) = ({}, {}, {}) violate the class-D inequality \
                     1/k - 1/d < 1/p: got 1/k - 1/d = {} >= 1/p = {}",
                    exp.d,
                    exp.p,
                    exp.k,
                    1.0 / exp.k.value() - 1.0 / exp.d as f64,
                    inv_p,
                )));
            }
        }
        if matches!(self.scenario, Scenario::Simulate | Scenario::Picard) {
            // assembling the simulation config runs the full validation stack
            self.build_sde_config()?;
        }
        if let Some(m) = &self.metrics {
            KStarParams::new(Exponent::finite(m.k), m.first.dim())?;
            if !(m.q >= 1.0 && m.q.is_finite()) {
                return Err(Error::Config(format!("wasserstein order must be >= 1, got {}", m.q)));
            }
            if m.samples < 2 {
                return Err(Error::Config("metrics need at least two sample points".into()));
            }
            if let Some(second) = &m.second {
                if second.dim() != m.first.dim() {
                    return Err(Error::Config(format!(
                        "laws have dimensions {} and {}",
                        m.first.dim(),
                        second.dim()
                    )));
                }
            }
            m.grid.build(m.first.dim())?;
        }
        if let Some(e) = &self.experiment {
            experiment_params(e)?;
        }
        if let Some(p) = &self.picard {
            let dim = self.sde.as_ref().map_or(1, |s| s.dim);
            p.grid.build(dim)?;
        }
        Ok(())
    }

    /// Assembles the engine config from the sde, kernel, and drift tables.
    fn build_sde_config(&self) -> Result<SdeConfig> {
        let sde = self
            .sde
            .as_ref()
            .ok_or_else(|| Error::Config("this branch needs an [sde] table".into()))?;
        let drift_section = self.drift.clone().unwrap_or_default();
        let mean_field = self
            .kernel
            .as_ref()
            .map(|k| k.mean_field_term(sde.dim))
            .transpose()?;
        let drift = DriftSpec::new(
            sde.dim,
            mean_field,
            drift_section.regular,
            drift_section.singular,
            drift_section.origin_pinned,
        )?;
        let config = SdeConfig {
            dim: sde.dim,
            drift,
            sigma: sde.sigma.clone(),
            horizon: sde.horizon,
            dt: sde.dt.expect("resolved section"),
            n_particles: sde.n_particles,
            seed: self.seed,
            record_mesh: sde.record_mesh.clone(),
            eigen_window: sde.eigen_window,
        };
        config.validate()?;
        let law = sde.initial_law();
        law.validate()?;
        if law.dim() != sde.dim {
            return Err(Error::Config(format!(
                "initial law has dimension {}, state has {}",
                law.dim(),
                sde.dim
            )));
        }
        Ok(config)
    }

    /// Content digest of the resolved config; the output directory does not
    /// participate, so the same science under a different path hashes alike.
    pub fn digest(&self) -> Result<String> {
        let mut hashed = self.clone();
        hashed.out_dir = None;
        let bytes = serde_json::to_vec(&hashed)
            .map_err(|e| Error::Config(format!("cannot hash config: {e}")))?;
        Ok(sha256_hex(&bytes))
    }

    /// Output directory, defaulting next to the working directory.
    pub fn output_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("mkvlab-out"))
    }
}

/// Parses and resolves a TOML run configuration.
///
/// Schema violations carry the parser's line and key context; the class-D
/// gate and every table-level invariant are checked before any compute.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let config: RunConfig = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    config.resolve()
}

/// Caps the worker-thread count from `MKVLAB_THREADS` when set. Results
/// never depend on the cap; only scheduling does.
pub fn init_thread_cap() -> Result<Option<usize>> {
    match std::env::var("MKVLAB_THREADS") {
        Err(_) => Ok(None),
        Ok(raw) => {
            let n: usize = raw
                .parse()
                .map_err(|_| Error::Config(format!("MKVLAB_THREADS must be a positive integer, got '{raw}'")))?;
            if n == 0 {
                return Err(Error::Config("MKVLAB_THREADS must be positive".into()));
            }
            // a second initialization in the same process keeps the first
            // pool; results are identical either way
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            Ok(Some(n))
        }
    }
}

/// What a dispatched run produced: the committed directory, the manifest,
/// and the process exit code (0 ok, 2 config, 3 numeric, 4 acceptance).
#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
}

/// Routes a resolved config to its branch and commits outputs atomically.
///
/// The manifest is emitted for every run, success or failure; branch
/// errors are recorded in it and reflected in the exit code instead of
/// aborting the commit.
pub fn dispatch(config: &RunConfig) -> Result<RunOutcome> {
    let target = config.output_dir();
    let staging = StagingDir::create(&target)?;
    let started = unix_ms();

    // echo the resolved config first so even a failed run documents
    // itself; the output path is run metadata, not science, so it is
    // left out and reruns into fresh directories stay byte-identical
    let mut echoed = config.clone();
    echoed.out_dir = None;
    let echo = toml::to_string_pretty(&echoed)
        .map_err(|e| Error::Config(format!("cannot echo config: {e}")))?;
    std::fs::write(staging.path().join("resolved_config.toml"), echo)?;

    let result = run_branch(config, staging.path());
    let status = match &result {
        Ok(()) => RunStatus::Ok,
        Err(e) => RunStatus::Error { message: e.to_string(), exit_code: e.exit_code() },
    };
    let exit_code = match &result {
        Ok(()) => 0,
        Err(e) => e.exit_code(),
    };

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        scenario: config.scenario.to_string(),
        config_digest: config.digest()?,
        seed: config.seed,
        started_unix_ms: started,
        finished_unix_ms: unix_ms(),
        status,
        outputs: hash_outputs(staging.path())?,
    };
    save_json(&staging.path().join(MANIFEST_FILE), &manifest)?;
    let out_dir = staging.commit()?;
    Ok(RunOutcome { exit_code, out_dir, manifest })
}

fn run_branch(config: &RunConfig, dir: &Path) -> Result<()> {
    match config.scenario {
        Scenario::Simulate => run_simulate(config, dir),
        Scenario::Picard => run_picard(config, dir),
        Scenario::Metrics => run_metrics(config, dir),
        Scenario::Experiment => run_experiment(config, dir),
    }
}

fn run_simulate(config: &RunConfig, dir: &Path) -> Result<()> {
    let sde_config = config.build_sde_config()?;
    let sde = config.sde.as_ref().expect("validated simulate config");
    let bundle = simulate_interacting(&sde_config, sde.initial_law())?;
    write_trajectories_csv(&dir.join("trajectories.csv"), &bundle)?;
    save_json(&dir.join("terminal_sample.json"), bundle.terminal())?;
    Ok(())
}

fn run_picard(config: &RunConfig, dir: &Path) -> Result<()> {
    let sde_config = config.build_sde_config()?;
    let sde = config.sde.as_ref().expect("validated picard config");
    let exp = config.exponents.as_ref().expect("validated picard config");
    let section = config.picard.as_ref().expect("validated picard config");
    let picard_config = PicardConfig {
        exponents: class_d_check(exp.d, exp.p, exp.k)?,
        lambda: section.lambda,
        tol: section.tol,
        max_iter: section.max_iter,
        particles: section.particles,
        bandwidth: section.bandwidth.clone(),
        grid: section.grid.build(sde.dim)?,
        sde: sde_config,
        beta0: section.beta0,
        blowup_ceiling: section.blowup_ceiling,
    };
    let run = solve_fixed_point(sde.initial_law(), &picard_config)?;
    write_iterations_csv(&dir.join("iterations.csv"), &run.log)?;
    save_json(&dir.join("flow.json"), &run.flow)?;
    save_json(&dir.join("picard_run.json"), &run)?;
    Ok(())
}

fn run_metrics(config: &RunConfig, dir: &Path) -> Result<()> {
    let m = config.metrics.as_ref().expect("validated metrics config");
    let dim = m.first.dim();
    let grid = m.grid.build(dim)?;
    let params = KStarParams::new(Exponent::finite(m.k), dim)?;
    let mut rows: Vec<(String, f64)> = Vec::new();

    let first = m.first.density_on(&grid)?.ok_or_else(|| {
        Error::Parameter("the first law has no density on a grid; use a sampled family".into())
    })?;
    rows.push(("kstar_norm_first".into(), kstar_norm_surrogate(&first, &params)));

    if let Some(second_law) = &m.second {
        let second = second_law.density_on(&grid)?.ok_or_else(|| {
            Error::Parameter("the second law has no density on a grid; use a sampled family".into())
        })?;
        rows.push(("kstar_norm_second".into(), kstar_norm_surrogate(&second, &params)));
        rows.push(("kstar_distance".into(), kstar_distance(&first, &second, &params)?));
        rows.push(("tv_distance".into(), tv_distance(&first, &second)?));
        rows.push(("relative_entropy".into(), relative_entropy(&first, &second)?.as_f64()));
        let a = m.first.sample(m.samples, config.seed)?;
        let b = second_law.sample(m.samples, derive_seed(config.seed, &[SECOND_SAMPLE_TAG]))?;
        rows.push((format!("wasserstein_{}", m.q), wasserstein_q(&a, &b, m.q)?));
    }

    write_named_values_csv(&dir.join("metrics.csv"), &rows)?;
    Ok(())
}

/// Typed experiment parameters, defaulted and checked against the table.
enum ExperimentParams {
    DecaySlope(experiments::DecaySlopeParams),
    KstarWasserstein(experiments::KstarWassersteinParams),
    EntropyCost(experiments::EntropyCostParams),
    LambOseen(experiments::LambOseenParams),
    PicardContraction(experiments::ContractionParams),
}

fn experiment_params(section: &ExperimentSection) -> Result<ExperimentParams> {
    fn typed<T: serde::de::DeserializeOwned + Default>(
        params: &Option<toml::Value>,
    ) -> Result<T> {
        match params {
            None => Ok(T::default()),
            Some(value) => value
                .clone()
                .try_into()
                .map_err(|e| Error::Config(format!("[experiment.params]: {e}"))),
        }
    }
    match section.name.as_str() {
        "decay_slope" => Ok(ExperimentParams::DecaySlope(typed(&section.params)?)),
        "kstar_wasserstein" => Ok(ExperimentParams::KstarWasserstein(typed(&section.params)?)),
        "entropy_cost" => Ok(ExperimentParams::EntropyCost(typed(&section.params)?)),
        "lamb_oseen" => Ok(ExperimentParams::LambOseen(typed(&section.params)?)),
        "picard_contraction" => Ok(ExperimentParams::PicardContraction(typed(&section.params)?)),
        other => Err(Error::Config(format!(
            "unknown experiment '{other}'; expected decay_slope, kstar_wasserstein, \
             entropy_cost, lamb_oseen, or picard_contraction"
        ))),
    }
}

fn run_experiment(config: &RunConfig, dir: &Path) -> Result<()> {
    let section = config.experiment.as_ref().expect("validated experiment config");
    let report = match experiment_params(section)? {
        ExperimentParams::DecaySlope(p) => experiments::run_decay_slope(&p)?,
        ExperimentParams::KstarWasserstein(p) => experiments::run_kstar_wasserstein(&p)?,
        ExperimentParams::EntropyCost(p) => experiments::run_entropy_cost(&p)?,
        ExperimentParams::LambOseen(p) => experiments::run_lamb_oseen(&p)?,
        ExperimentParams::PicardContraction(p) => experiments::run_picard_contraction(&p)?,
    };
    save_json(&dir.join("experiment_report.json"), &report)?;
    for c in &report.criteria {
        println!(
            "[{}] {}: {} vs {}",
            if c.passed { "ok" } else { "FAIL" },
            c.name,
            c.measured,
            c.bound
        );
    }
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .criteria
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        Err(Error::Acceptance(format!(
            "{}: criteria failed: {}",
            report.scenario,
            failed.join("; ")
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(text: &str) -> Result<RunConfig> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.resolve()
    }

    #[test]
    fn minimal_brownian_config_resolves_documented_defaults() {
        let config = parse_str("scenario = \"simulate\"\n").unwrap();
        let sde = config.sde.as_ref().unwrap();
        assert_eq!(sde.dim, 1);
        assert_eq!(sde.horizon, 1.0);
        assert_eq!(sde.dt, Some(1.0 / 200.0));
        assert_eq!(sde.record_mesh, vec![1.0]);
        assert_eq!(sde.sigma, SigmaSpec::Scalar { value: 1.0 });
        assert!(matches!(sde.init, Some(InitialLaw::Gaussian { .. })));
        let echoed = toml::to_string_pretty(&config).unwrap();
        assert!(echoed.contains("dt = 0.005"), "defaults must be echoed:\n{echoed}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_the_key_name() {
        let err = parse_str("scenario = \"simulate\"\nbogus_knob = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus_knob"), "{err}");
        let err =
            parse_str("scenario = \"simulate\"\n[sde]\nnot_a_field = 2.0\n").unwrap_err();
        assert!(err.to_string().contains("not_a_field"), "{err}");
    }

    #[test]
    fn metrics_k_at_one_is_rejected() {
        let err = parse_str(
            "scenario = \"metrics\"\n\
             [metrics]\n\
             k = 1.0\n\
             [metrics.first]\n\
             family = \"gaussian\"\n\
             mean = [0.0]\n\
             std = [1.0]\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("k must exceed 1"), "{err}");
    }

    #[test]
    fn class_d_violation_prints_the_inequality() {
        let err = parse_str(
            "scenario = \"picard\"\n\
             [exponents]\n\
             d = 3\n\
             p = \"inf\"\n\
             k = 1.0\n",
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("1/k - 1/d < 1/p"), "{msg}");
        assert!(msg.contains("(3, inf, 1)"), "{msg}");
    }

    #[test]
    fn kernel_section_demands_matching_parameters() {
        let base = "scenario = \"simulate\"\n[sde]\ndim = 2\n";
        let err = parse_str(&format!("{base}[kernel]\nfamily = \"coulomb\"\nkappa = 1.0\n"))
            .unwrap_err();
        assert!(err.to_string().contains("takes no kappa"), "{err}");
        let err =
            parse_str(&format!("{base}[kernel]\nfamily = \"riesz\"\nkappa = 1.0\n")).unwrap_err();
        assert!(err.to_string().contains("needs both kappa and beta"), "{err}");
        let err = parse_str(&format!("{base}[kernel]\nfamily = \"vortex\"\n")).unwrap_err();
        assert!(err.to_string().contains("unknown kernel family"), "{err}");
        let ok = parse_str(&format!(
            "{base}[kernel]\nfamily = \"biot_savart\"\nepsilon = 0.05\ncoupling = 0.5\n"
        ))
        .unwrap();
        let term = ok.kernel.unwrap().mean_field_term(2).unwrap();
        assert_eq!(term.coupling, 0.5);
        assert_eq!(term.kernel.epsilon(), 0.05);
    }

    #[test]
    fn unknown_experiment_names_are_listed() {
        let err = parse_str(
            "scenario = \"experiment\"\n[experiment]\nname = \"warp_drive\"\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("unknown experiment"), "{err}");
        assert!(err.to_string().contains("decay_slope"), "{err}");
    }

    #[test]
    fn experiment_params_deserialize_with_defaults_and_reject_typos() {
        let config = parse_str(
            "scenario = \"experiment\"\n\
             [experiment]\n\
             name = \"decay_slope\"\n\
             [experiment.params]\n\
             dim = 1\n\
             k = 2.0\n",
        )
        .unwrap();
        match experiment_params(config.experiment.as_ref().unwrap()).unwrap() {
            ExperimentParams::DecaySlope(p) => {
                assert_eq!(p.dim, 1);
                assert_eq!(p.k, 2.0);
                assert_eq!(p.seeds, (1..=10).collect::<Vec<u64>>());
            }
            _ => panic!("wrong branch"),
        }
        let err = parse_str(
            "scenario = \"experiment\"\n\
             [experiment]\n\
             name = \"decay_slope\"\n\
             [experiment.params]\n\
             dimension = 1\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("dimension"), "{err}");
    }

    #[test]
    fn digest_ignores_the_output_directory() {
        let a = parse_str("scenario = \"simulate\"\nout_dir = \"runs/a\"\n").unwrap();
        let b = parse_str("scenario = \"simulate\"\nout_dir = \"runs/b\"\n").unwrap();
        assert_eq!(a.digest().unwrap(), b.digest().unwrap());
        let c = parse_str("scenario = \"simulate\"\nseed = 9\n").unwrap();
        assert_ne!(a.digest().unwrap(), c.digest().unwrap());
    }
}
