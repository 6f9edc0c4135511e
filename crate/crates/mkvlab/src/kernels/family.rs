//! Singular kernel families, blob regularization, and mean-field drifts.
//!
//! Every family has the form K(x,y) = (direction) / (power of |x - y|), with
//! an optional list of fixed singular centers. The regularized kernel K_eps
//! replaces each denominator factor |z|^a by (|z|^2 + eps^2)^(a/2), which
//! preserves antisymmetry in z and the Biot-Savart orthogonality exactly.

use serde::{Deserialize, Serialize};

use crate::measure::{Density, EmpiricalMeasure};
use crate::{Error, Result};

/// Closed-form kernel families.
///
/// `ShiftedRiesz` adds fixed singular centers: K(x,y) = Riesz(x-y) +
/// sum_i Riesz(y - c_i), whose magnitude is majorized by
/// c/|x-y|^beta + sum_i c/|y - c_i|^beta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    /// (x-y) / (d omega_d |x-y|^d); repulsive electrostatic interaction.
    Coulomb,
    /// Attractive gravitational counterpart, -Coulomb.
    Newton,
    /// Planar rotation (-z_2, z_1) / (2 pi |z|^2) acting on the first two axes.
    BiotSavart,
    /// kappa (x-y) / |x-y|^(beta+1).
    Riesz { kappa: f64, beta: f64 },
    /// Riesz pair term plus fixed-center singular terms.
    ShiftedRiesz { kappa: f64, beta: f64, centers: Vec<Vec<f64>> },
}

/// A kernel family bound to a dimension and a regularization length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: KernelFamily,
    dim: usize,
    /// Blob length; 0 keeps the bare singular kernel.
    #[serde(default)]
    epsilon: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, dim: usize, epsilon: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("kernel dimension must be positive".into()));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::Parameter(format!(
                "regularization length must be finite and >= 0, got {epsilon}"
            )));
        }
        match &family {
            KernelFamily::BiotSavart if dim < 2 => {
                return Err(Error::Parameter("Biot-Savart needs dimension >= 2".into()));
            }
            KernelFamily::Riesz { kappa, beta }
            | KernelFamily::ShiftedRiesz { kappa, beta, .. } => {
                if *kappa == 0.0 || !kappa.is_finite() {
                    return Err(Error::Parameter("Riesz strength must be finite and nonzero".into()));
                }
                if !(*beta > 0.0 && *beta < dim as f64) {
                    return Err(Error::Parameter(format!(
                        "Riesz exponent must lie in (0, {dim}), got {beta}"
                    )));
                }
                if let KernelFamily::ShiftedRiesz { centers, .. } = &family {
                    if centers.iter().any(|c| c.len() != dim) {
                        return Err(Error::Shape("singular centers must have the kernel dimension".into()));
                    }
                }
            }
            _ => {}
        }
        Ok(KernelSpec { family, dim, epsilon })
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Same kernel with a different blob length.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        KernelSpec::new(self.family.clone(), self.dim, epsilon)
    }

    /// Power-law majorant (c, beta): |K(x,y)| <= c/|x-y|^beta near x = y.
    pub fn majorant(&self) -> (f64, f64) {
        let d = self.dim as f64;
        match &self.family {
            KernelFamily::Coulomb | KernelFamily::Newton => {
                (1.0 / (d * unit_ball_volume(self.dim)), d - 1.0)
            }
            KernelFamily::BiotSavart => (1.0 / (2.0 * std::f64::consts::PI), 1.0),
            KernelFamily::Riesz { kappa, beta }
            | KernelFamily::ShiftedRiesz { kappa, beta, .. } => (kappa.abs(), *beta),
        }
    }
}

/// Volume of the unit ball in R^d.
pub fn unit_ball_volume(dim: usize) -> f64 {
    // omega_d = omega_{d-2} * 2 pi / d with omega_0 = 1, omega_1 = 2
    let mut even = 1.0f64;
    let mut odd = 2.0f64;
    if dim == 0 {
        return even;
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut d = if dim % 2 == 0 { 2 } else { 3 };
    while d <= dim {
        if d % 2 == 0 {
            even *= two_pi / d as f64;
        } else {
            odd *= two_pi / d as f64;
        }
        d += 2;
    }
    if dim % 2 == 0 {
        even
    } else {
        odd
    }
}

/// Surface area of the unit sphere in R^d, s_{d-1} = d omega_d.
pub fn unit_sphere_area(dim: usize) -> f64 {
    dim as f64 * unit_ball_volume(dim)
}

/// Evaluates K_eps(x, y) into `out`. Errors on singular evaluation
/// (x = y, or y at a fixed center, with eps = 0).
pub fn eval_kernel_into(spec: &KernelSpec, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
    debug_assert_eq!(x.len(), spec.dim);
    debug_assert_eq!(y.len(), spec.dim);
    let eps2 = spec.epsilon * spec.epsilon;
    let mut r2 = 0.0;
    for a in 0..spec.dim {
        out[a] = x[a] - y[a];
        r2 += out[a] * out[a];
    }
    if r2 == 0.0 && eps2 == 0.0 {
        return Err(Error::Singularity(
            "kernel evaluated at coincident points without regularization".into(),
        ));
    }
    let q = r2 + eps2;
    match &spec.family {
        KernelFamily::Coulomb | KernelFamily::Newton => {
            let d = spec.dim as f64;
            let mut scale = 1.0 / (d * unit_ball_volume(spec.dim) * q.powf(0.5 * d));
            if matches!(spec.family, KernelFamily::Newton) {
                scale = -scale;
            }
            out.iter_mut().for_each(|v| *v *= scale);
        }
        KernelFamily::BiotSavart => {
            let scale = 1.0 / (2.0 * std::f64::consts::PI * q);
            let (z0, z1) = (out[0], out[1]);
            out.iter_mut().for_each(|v| *v = 0.0);
            out[0] = -z1 * scale;
            out[1] = z0 * scale;
        }
        KernelFamily::Riesz { kappa, beta } => {
            let scale = kappa / q.powf(0.5 * (beta + 1.0));
            out.iter_mut().for_each(|v| *v *= scale);
        }
        KernelFamily::ShiftedRiesz { kappa, beta, centers } => {
            let scale = kappa / q.powf(0.5 * (beta + 1.0));
            out.iter_mut().for_each(|v| *v *= scale);
            for c in centers {
                let mut s2 = 0.0;
                for a in 0..spec.dim {
                    s2 += (y[a] - c[a]) * (y[a] - c[a]);
                }
                if s2 == 0.0 && eps2 == 0.0 {
                    return Err(Error::Singularity(
                        "kernel evaluated at a fixed singular center without regularization".into(),
                    ));
                }
                let cs = kappa / (s2 + eps2).powf(0.5 * (beta + 1.0));
                for a in 0..spec.dim {
                    out[a] += cs * (y[a] - c[a]);
                }
            }
        }
    }
    Ok(())
}

/// Allocating wrapper around [`eval_kernel_into`].
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; spec.dim];
    eval_kernel_into(spec, x, y, &mut out)?;
    Ok(out)
}

/// Mean-field drift (1/N) sum_j K_eps(x, y_j) against a particle cloud.
/// With eps = 0, terms whose point is bit-equal to `x` are excluded (the
/// standard self-exclusion of interacting-particle sums).
pub fn mean_field_drift_particles(
    spec: &KernelSpec,
    x: &[f64],
    cloud: &EmpiricalMeasure,
) -> Result<Vec<f64>> {
    if cloud.dim() != spec.dim {
        return Err(Error::Shape(format!(
            "cloud dimension {} does not match kernel dimension {}",
            cloud.dim(),
            spec.dim
        )));
    }
    let mut acc = vec![0.0; spec.dim];
    let mut term = vec![0.0; spec.dim];
    let exclude_self = spec.epsilon == 0.0;
    for y in cloud.iter() {
        if exclude_self && y == x {
            continue;
        }
        eval_kernel_into(spec, x, y, &mut term)?;
        for (a, t) in acc.iter_mut().zip(&term) {
            *a += t;
        }
    }
    let n = cloud.len() as f64;
    acc.iter_mut().for_each(|v| *v /= n);
    Ok(acc)
}

/// Mean-field drift integral K_eps(x, y) rho(y) dy by midpoint quadrature
/// over the density grid. Nodes with zero density are skipped; a node
/// coinciding with a singularity under eps = 0 is an error.
pub fn mean_field_drift_density(
    spec: &KernelSpec,
    x: &[f64],
    rho: &Density,
) -> Result<Vec<f64>> {
    let grid = rho.grid();
    if grid.dim() != spec.dim {
        return Err(Error::Shape(format!(
            "density dimension {} does not match kernel dimension {}",
            grid.dim(),
            spec.dim
        )));
    }
    let vol = grid.cell_volume();
    let mut acc = vec![0.0; spec.dim];
    let mut term = vec![0.0; spec.dim];
    let mut node = vec![0.0; spec.dim];
    let mut ix = vec![0usize; spec.dim];
    let counts = grid.counts();
    for a in 0..spec.dim {
        node[a] = grid.axis_coord(a, 0);
    }
    for &w in rho.values() {
        if w != 0.0 {
            eval_kernel_into(spec, x, &node, &mut term)?;
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += w * t;
            }
        }
        // odometer advance, last axis fastest
        for a in (0..spec.dim).rev() {
            ix[a] += 1;
            if ix[a] < counts[a] {
                node[a] = grid.axis_coord(a, ix[a]);
                break;
            }
            ix[a] = 0;
            node[a] = grid.axis_coord(a, 0);
        }
    }
    acc.iter_mut().for_each(|v| *v *= vol);
    Ok(acc)
}

/// Integrability record for the singular part: the closed-form value of
/// integral_{B(0,1)} (c/|y|^beta)^k dy and the admissible k-interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityCheck {
    pub k: f64,
    pub beta: f64,
    /// s_{d-1} c^k / (d - k beta); +infinity when k >= d/beta.
    pub bound: f64,
    /// Open interval (1, d/beta) of exponents with a finite bound.
    pub admissible_k: (f64, f64),
}

/// Closed-form local integral bound of |K|^k over the unit ball, using the
/// kernel's power-law majorant c/|z|^beta. Radially,
/// integral = s_{d-1} c^k int_0^1 r^(d-1-k beta) dr.
pub fn kernel_bound_constant(spec: &KernelSpec, k: f64) -> Result<IntegrabilityCheck> {
    if !(k >= 1.0) {
        return Err(Error::Parameter(format!("exponent k must be >= 1, got {k}")));
    }
    let (c, beta) = spec.majorant();
    let d = spec.dim as f64;
    let bound = if k * beta < d {
        unit_sphere_area(spec.dim) * c.powf(k) / (d - k * beta)
    } else {
        f64::INFINITY
    };
    Ok(IntegrabilityCheck { k, beta, bound, admissible_k: (1.0, d / beta) })
}
