//! Probability metrics: the localized dual norm ("k*-norm") with its lattice
//! surrogate and brute-force dual oracle, total variation, Wasserstein
//! distances, and relative entropy.
//!
//! For k in (1,inf] the norm of a measure mu is
//!
//! ```text
//! ||mu||_{k*} = sup { mu(|f|) : sup_x ||1_{B(x,1)} f||_{L^k} <= 1 }
//! ```
//!
//! Neither the surrogate nor the oracle equals the supremum exactly: the
//! lattice sum brackets it two-sidedly (within a factor c(r)), and the
//! oracle solves the grid-discretized program. Both are exposed; nothing in
//! the crate claims either is the exact norm.

mod covering;
mod entropy;
mod kstar;
mod oracle;
mod wasserstein;

pub use covering::CoveringConstants;
pub use entropy::{relative_entropy, tv_distance, RelativeEntropy};
pub use kstar::{generic_overlap_multiplicity, kstar_distance, kstar_norm_surrogate};
pub use oracle::kstar_norm_dual_oracle;
pub use wasserstein::{wasserstein_q, wasserstein_q_assignment, ASSIGNMENT_MAX_POINTS};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A real exponent in [1, inf]; infinity is a first-class value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn finite(v: f64) -> Self {
        Exponent::Finite(v)
    }

    /// Value as f64, with infinity mapped to `f64::INFINITY`.
    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(v) => v,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinity)
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exponent::Finite(v) => write!(f, "{v}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(v) => s.serialize_f64(*v),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v.is_infinite() && v > 0.0 => Ok(Exponent::Infinity),
            Raw::Num(v) => Ok(Exponent::Finite(v)),
            Raw::Text(t) if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") => {
                Ok(Exponent::Infinity)
            }
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got {t:?}"
            ))),
        }
    }
}

/// The conjugate exponent k/(k-1) used inside lattice sums. Named in full
/// because the star in "k*" does not denote conjugation.
pub fn k_star_dual_exponent(k: Exponent) -> f64 {
    match k {
        Exponent::Infinity => 1.0,
        Exponent::Finite(v) => v / (v - 1.0),
    }
}

/// Parameters of the k*-norm estimators: the exponent k in (1, inf] and the
/// lattice-ball radius r >= sqrt(d) (balls B(z,r), z in Z^d, cover R^d).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KStarParams {
    pub k: Exponent,
    pub r: f64,
}

impl KStarParams {
    /// Params with the default radius sqrt(d).
    pub fn new(k: Exponent, dim: usize) -> Result<Self> {
        Self::with_radius(k, dim, (dim as f64).sqrt())
    }

    pub fn with_radius(k: Exponent, dim: usize, r: f64) -> Result<Self> {
        if let Exponent::Finite(v) = k {
            if !(v > 1.0) || !v.is_finite() {
                return Err(Error::Parameter(format!(
                    "k must exceed 1 (or be inf), got {v}"
                )));
            }
        }
        let min_r = (dim as f64).sqrt();
        if !(r >= min_r - 1e-12) {
            return Err(Error::Parameter(format!(
                "lattice radius {r} below sqrt(d) = {min_r}; balls would not cover R^d"
            )));
        }
        Ok(KStarParams { k, r })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_exponent_edge_cases() {
        assert_eq!(k_star_dual_exponent(Exponent::Infinity), 1.0);
        assert_eq!(k_star_dual_exponent(Exponent::Finite(2.0)), 2.0);
        let near_one = k_star_dual_exponent(Exponent::Finite(1.0001));
        assert!(near_one > 10_000.0 && near_one < 10_002.0);
    }

    #[test]
    fn params_validate_k_and_radius() {
        assert!(KStarParams::new(Exponent::Finite(1.0), 1).is_err());
        assert!(KStarParams::new(Exponent::Finite(0.5), 1).is_err());
        assert!(KStarParams::with_radius(Exponent::Finite(2.0), 2, 1.0).is_err());
        let p = KStarParams::new(Exponent::Finite(2.0), 2).unwrap();
        assert!((p.r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn exponent_serde_round_trips() {
        let inf: Exponent = serde_json::from_str("\"inf\"").unwrap();
        assert!(inf.is_infinite());
        let two: Exponent = serde_json::from_str("2.0").unwrap();
        assert_eq!(two, Exponent::Finite(2.0));
        assert_eq!(serde_json::to_string(&Exponent::Infinity).unwrap(), "\"inf\"");
    }
}
