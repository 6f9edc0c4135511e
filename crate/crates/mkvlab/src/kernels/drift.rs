//! Drift decomposition b = b0 + b1 + sum_i b_i.
//!
//! b0 is the mean-field term (kernel integrated against the current law),
//! b1 is a regular named form with a stated Lipschitz constant, and the
//! extra terms are named singular forms of (t, x) carrying a declared
//! space-time integrability pair (p', q') that must satisfy the parabolic
//! scaling condition d/p' + 2/q' < 1.

use serde::{Deserialize, Serialize};

use super::family::{eval_kernel_into, mean_field_drift_density, mean_field_drift_particles, KernelSpec};
use crate::measure::{Density, EmpiricalMeasure};
use crate::metrics::Exponent;
use crate::{Error, Result};

/// Mean-field component: coupling * integral of K(x, y) law(dy).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldTerm {
    pub kernel: KernelSpec,
    pub coupling: f64,
}

/// Named Lipschitz drift forms b1(t, x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum LipschitzForm {
    /// -rate * x.
    LinearPull { rate: f64 },
    /// -rate * (x - target).
    AffinePull { rate: f64, target: Vec<f64> },
    /// -rate * x / (1 + t); Lipschitz constant rate, decaying influence.
    DecayingPull { rate: f64 },
}

impl LipschitzForm {
    fn validate(&self, dim: usize) -> Result<()> {
        let rate = match self {
            LipschitzForm::LinearPull { rate } | LipschitzForm::DecayingPull { rate } => *rate,
            LipschitzForm::AffinePull { rate, target } => {
                if target.len() != dim {
                    return Err(Error::Shape(format!(
                        "pull target has {} coordinates in dimension {dim}",
                        target.len()
                    )));
                }
                *rate
            }
        };
        if !rate.is_finite() {
            return Err(Error::Parameter("drift rate must be finite".into()));
        }
        Ok(())
    }

    /// Stated Lipschitz constant in x, uniform over t.
    pub fn lipschitz_constant(&self) -> f64 {
        match self {
            LipschitzForm::LinearPull { rate }
            | LipschitzForm::AffinePull { rate, .. }
            | LipschitzForm::DecayingPull { rate } => rate.abs(),
        }
    }

    /// True when b1(t, 0) = 0 for every t.
    pub fn vanishes_at_origin(&self) -> bool {
        match self {
            LipschitzForm::LinearPull { .. } | LipschitzForm::DecayingPull { .. } => true,
            LipschitzForm::AffinePull { target, .. } => target.iter().all(|&c| c == 0.0),
        }
    }

    fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match self {
            LipschitzForm::LinearPull { rate } => {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o += -rate * xi;
                }
            }
            LipschitzForm::AffinePull { rate, target } => {
                for ((o, &xi), &ci) in out.iter_mut().zip(x).zip(target) {
                    *o += -rate * (xi - ci);
                }
            }
            LipschitzForm::DecayingPull { rate } => {
                let s = -rate / (1.0 + t);
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o += s * xi;
                }
            }
        }
    }
}

/// Named singular drift forms b_i(t, x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum SingularForm {
    /// kappa * x / |x|^(beta+1), blob-regularized by epsilon.
    RieszPull { kappa: f64, beta: f64, #[serde(default)] epsilon: f64 },
}

/// A singular drift term with its declared integrability pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularTerm {
    pub form: SingularForm,
    pub p_prime: Exponent,
    pub q_prime: Exponent,
}

impl SingularTerm {
    /// d/p' + 2/q'; the declared pair is admissible when this is < 1.
    pub fn parabolic_index(&self, dim: usize) -> f64 {
        let inv = |e: Exponent| match e {
            Exponent::Infinity => 0.0,
            Exponent::Finite(v) => 1.0 / v,
        };
        dim as f64 * inv(self.p_prime) + 2.0 * inv(self.q_prime)
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if let Exponent::Finite(v) = self.p_prime {
            if !(v >= 1.0) {
                return Err(Error::Parameter(format!("p' must be >= 1, got {v}")));
            }
        }
        if let Exponent::Finite(v) = self.q_prime {
            if !(v >= 1.0) {
                return Err(Error::Parameter(format!("q' must be >= 1, got {v}")));
            }
        }
        let idx = self.parabolic_index(dim);
        if !(idx < 1.0) {
            return Err(Error::Parameter(format!(
                "declared pair (p', q') = ({}, {}) violates d/p' + 2/q' < 1 (got {idx})",
                self.p_prime, self.q_prime
            )));
        }
        let SingularForm::RieszPull { kappa, beta, epsilon } = self.form;
        if kappa == 0.0 || !kappa.is_finite() {
            return Err(Error::Parameter("singular pull strength must be finite and nonzero".into()));
        }
        if !(beta > 0.0 && beta < dim as f64) {
            return Err(Error::Parameter(format!(
                "singular pull exponent must lie in (0, {dim}), got {beta}"
            )));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::Parameter("regularization length must be finite and >= 0".into()));
        }
        Ok(())
    }

    fn eval_into(&self, _t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        let SingularForm::RieszPull { kappa, beta, epsilon } = self.form;
        let r2: f64 = x.iter().map(|&v| v * v).sum();
        let eps2 = epsilon * epsilon;
        if r2 == 0.0 && eps2 == 0.0 {
            return Err(Error::Singularity(
                "singular drift evaluated at its center without regularization".into(),
            ));
        }
        let s = kappa / (r2 + eps2).powf(0.5 * (beta + 1.0));
        for (o, &xi) in out.iter_mut().zip(x) {
            *o += s * xi;
        }
        Ok(())
    }
}

/// The full drift decomposition for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    dim: usize,
    #[serde(default)]
    mean_field: Option<MeanFieldTerm>,
    #[serde(default)]
    regular: Option<LipschitzForm>,
    #[serde(default)]
    singular: Vec<SingularTerm>,
    /// When set, the regular part must vanish at the origin for all t.
    #[serde(default)]
    origin_pinned: bool,
}

impl DriftSpec {
    pub fn new(
        dim: usize,
        mean_field: Option<MeanFieldTerm>,
        regular: Option<LipschitzForm>,
        singular: Vec<SingularTerm>,
        origin_pinned: bool,
    ) -> Result<Self> {
        let spec = DriftSpec { dim, mean_field, regular, singular, origin_pinned };
        spec.validate()?;
        Ok(spec)
    }

    /// Drift with no components; evaluates to zero.
    pub fn free(dim: usize) -> Self {
        DriftSpec { dim, mean_field: None, regular: None, singular: Vec::new(), origin_pinned: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Parameter("drift dimension must be positive".into()));
        }
        if let Some(mf) = &self.mean_field {
            if mf.kernel.dim() != self.dim {
                return Err(Error::Shape(format!(
                    "kernel dimension {} does not match drift dimension {}",
                    mf.kernel.dim(),
                    self.dim
                )));
            }
            if !mf.coupling.is_finite() {
                return Err(Error::Parameter("mean-field coupling must be finite".into()));
            }
        }
        if let Some(reg) = &self.regular {
            reg.validate(self.dim)?;
            if self.origin_pinned && !reg.vanishes_at_origin() {
                return Err(Error::Parameter(
                    "origin-pinned drift requires the regular part to vanish at x = 0".into(),
                ));
            }
        }
        for term in &self.singular {
            term.validate(self.dim)?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean_field(&self) -> Option<&MeanFieldTerm> {
        self.mean_field.as_ref()
    }

    pub fn regular(&self) -> Option<&LipschitzForm> {
        self.regular.as_ref()
    }

    pub fn singular(&self) -> &[SingularTerm] {
        &self.singular
    }

    /// True when any component depends on the measure argument.
    pub fn has_mean_field(&self) -> bool {
        self.mean_field.is_some()
    }

    /// Sum of the measure-free components b1 + sum_i b_i at (t, x).
    pub fn eval_measure_free_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|v| *v = 0.0);
        if let Some(reg) = &self.regular {
            reg.eval_into(t, x, out);
        }
        for term in &self.singular {
            term.eval_into(t, x, out)?;
        }
        Ok(())
    }
}

/// The measure argument of the drift: a particle cloud, a density, or
/// nothing (allowed only when the drift has no mean-field part).
#[derive(Debug, Clone, Copy)]
pub enum DriftMeasure<'a> {
    Cloud(&'a EmpiricalMeasure),
    Field(&'a Density),
    None,
}

/// Full drift b(t, x, measure) = b0 + b1 + sum_i b_i.
pub fn assemble_drift(
    drift: &DriftSpec,
    t: f64,
    x: &[f64],
    measure: DriftMeasure<'_>,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; drift.dim()];
    drift.eval_measure_free_into(t, x, &mut out)?;
    if let Some(mf) = drift.mean_field() {
        let field = match measure {
            DriftMeasure::Cloud(cloud) => mean_field_drift_particles(&mf.kernel, x, cloud)?,
            DriftMeasure::Field(rho) => mean_field_drift_density(&mf.kernel, x, rho)?,
            DriftMeasure::None => {
                return Err(Error::Parameter(
                    "drift has a mean-field term but no measure was supplied".into(),
                ));
            }
        };
        for (o, f) in out.iter_mut().zip(field) {
            *o += mf.coupling * f;
        }
    }
    Ok(out)
}

/// Kernel evaluation reused by the engine for pairwise sums.
pub fn pairwise_kernel_into(
    kernel: &KernelSpec,
    x: &[f64],
    y: &[f64],
    out: &mut [f64],
) -> Result<()> {
    eval_kernel_into(kernel, x, y, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::family::KernelFamily;

    #[test]
    fn empty_drift_is_zero() {
        let d = DriftSpec::free(3);
        let v = assemble_drift(&d, 0.5, &[1.0, -2.0, 0.3], DriftMeasure::None).unwrap();
        assert_eq!(v, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn linear_pull_is_minus_x() {
        let d = DriftSpec::new(
            2,
            None,
            Some(LipschitzForm::LinearPull { rate: 1.0 }),
            vec![],
            true,
        )
        .unwrap();
        let v = assemble_drift(&d, 0.0, &[2.0, 0.0], DriftMeasure::None).unwrap();
        assert_eq!(v, vec![-2.0, 0.0]);
    }

    #[test]
    fn lone_vortex_feels_only_the_regular_pull() {
        let kernel = KernelSpec::new(KernelFamily::BiotSavart, 2, 0.0).unwrap();
        let d = DriftSpec::new(
            2,
            Some(MeanFieldTerm { kernel, coupling: 1.0 }),
            Some(LipschitzForm::LinearPull { rate: 1.0 }),
            vec![],
            true,
        )
        .unwrap();
        let x = [0.7, -0.4];
        let cloud = EmpiricalMeasure::new(2, x.to_vec()).unwrap();
        let v = assemble_drift(&d, 0.0, &x, DriftMeasure::Cloud(&cloud)).unwrap();
        assert_eq!(v, vec![-0.7, 0.4]);
    }

    #[test]
    fn parabolic_scaling_condition_is_enforced() {
        let ok = SingularTerm {
            form: SingularForm::RieszPull { kappa: 1.0, beta: 0.5, epsilon: 0.0 },
            p_prime: Exponent::Finite(4.0),
            q_prime: Exponent::Infinity,
        };
        // d/p' + 2/q' = 1/4 < 1 in d=1
        assert!(DriftSpec::new(1, None, None, vec![ok.clone()], false).is_ok());
        let bad = SingularTerm {
            form: SingularForm::RieszPull { kappa: 1.0, beta: 0.5, epsilon: 0.0 },
            p_prime: Exponent::Finite(2.0),
            q_prime: Exponent::Finite(4.0),
        };
        // 1/2 + 1/2 = 1, not < 1
        assert!(DriftSpec::new(1, None, None, vec![bad], false).is_err());
    }

    #[test]
    fn origin_pin_rejects_offset_targets() {
        let off = LipschitzForm::AffinePull { rate: 1.0, target: vec![0.5, 0.0] };
        assert!(DriftSpec::new(2, None, Some(off.clone()), vec![], true).is_err());
        assert!(DriftSpec::new(2, None, Some(off), vec![], false).is_ok());
    }

    #[test]
    fn singular_pull_points_away_from_center_for_positive_strength() {
        let term = SingularTerm {
            form: SingularForm::RieszPull { kappa: 2.0, beta: 0.5, epsilon: 0.0 },
            p_prime: Exponent::Infinity,
            q_prime: Exponent::Infinity,
        };
        let d = DriftSpec::new(1, None, None, vec![term], false).unwrap();
        let v = assemble_drift(&d, 0.0, &[4.0], DriftMeasure::None).unwrap();
        // 2 * 4 / |4|^{1.5} = 1
        assert!((v[0] - 1.0).abs() < 1e-12);
        assert!(assemble_drift(&d, 0.0, &[0.0], DriftMeasure::None).is_err());
    }

    #[test]
    fn missing_measure_with_mean_field_is_an_error() {
        let kernel = KernelSpec::new(KernelFamily::Coulomb, 1, 0.1).unwrap();
        let d = DriftSpec::new(1, Some(MeanFieldTerm { kernel, coupling: 1.0 }), None, vec![], false)
            .unwrap();
        assert!(assemble_drift(&d, 0.0, &[0.2], DriftMeasure::None).is_err());
    }
}
