//! Geometric covering constants for the lattice sandwich.
//!
//! The two-sided bound between the k*-norm and its lattice sum holds with a
//! constant c(r) that joins two covering numbers: how many lattice balls
//! B(z,r) can meet one unit ball, and how many unit balls cover one B(z,r).
//! Both are enumerated from (d, r) at runtime; nothing is hard-coded.

use crate::{Error, Result};

/// Covering constants for lattice balls of radius `r` on Z^d.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoveringConstants {
    /// Max number of lattice balls B(z,r) meeting a single unit ball.
    pub lattice_balls_per_unit_ball: usize,
    /// Unit balls needed to cover one B(z,r) (constructive cubic cover).
    pub unit_balls_per_lattice_ball: usize,
}

impl CoveringConstants {
    /// Enumerates both constants for dimension `d` and radius `r >= sqrt(d)`.
    pub fn compute(d: usize, r: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::Parameter("covering constants need d in 1..=3".into()));
        }
        if !(r >= (d as f64).sqrt() - 1e-12) {
            return Err(Error::Parameter("radius below sqrt(d)".into()));
        }
        Ok(CoveringConstants {
            lattice_balls_per_unit_ball: max_meeting_count(d, r),
            unit_balls_per_lattice_ball: cubic_cover_count(d, r),
        })
    }

    /// The sandwich constant: the larger of the two covering numbers.
    pub fn c_of_r(&self) -> usize {
        self.lattice_balls_per_unit_ball
            .max(self.unit_balls_per_lattice_ball)
    }
}

/// Max over unit-ball centers x of #{z in Z^d : |z - x| <= r + 1}
/// (B(z,r) meets B(x,1) iff the centers are within r + 1). The count is
/// periodic in x, so x ranges over a fine sampling of one unit cell.
fn max_meeting_count(d: usize, r: f64) -> usize {
    let reach = r + 1.0 + 1e-9;
    let span = reach.ceil() as i64 + 1;
    let samples_per_axis = 33usize;
    let mut max_count = 0;
    let mut offset = vec![0.0; d];
    let total_samples = samples_per_axis.pow(d as u32);
    for s in 0..total_samples {
        let mut rem = s;
        for o in offset.iter_mut() {
            *o = (rem % samples_per_axis) as f64 / samples_per_axis as f64;
            rem /= samples_per_axis;
        }
        let mut count = 0;
        for_each_lattice(d, -span, span, |z| {
            let dist2: f64 = z
                .iter()
                .zip(&offset)
                .map(|(&zi, &oi)| {
                    let t = zi as f64 - oi;
                    t * t
                })
                .sum();
            if dist2 <= reach * reach {
                count += 1;
            }
        });
        max_count = max_count.max(count);
    }
    max_count
}

/// Constructive cover of B(0,r) by unit balls centered on the cubic lattice
/// of spacing 2/sqrt(d): every point of R^d lies within 1 of some center, so
/// counting the centers within r + 1 of the origin yields a valid cover size.
fn cubic_cover_count(d: usize, r: f64) -> usize {
    let a = 2.0 / (d as f64).sqrt();
    let reach = r + 1.0 + 1e-9;
    let span = (reach / a).ceil() as i64 + 1;
    let mut count = 0;
    for_each_lattice(d, -span, span, |z| {
        let dist2: f64 = z.iter().map(|&zi| (zi as f64 * a).powi(2)).sum();
        if dist2 <= reach * reach {
            count += 1;
        }
    });
    count
}

/// Visits every integer vector of dimension `d` with entries in [lo, hi].
fn for_each_lattice(d: usize, lo: i64, hi: i64, mut visit: impl FnMut(&[i64])) {
    let width = (hi - lo + 1) as usize;
    let total = width.pow(d as u32);
    let mut z = vec![0i64; d];
    for idx in 0..total {
        let mut rem = idx;
        for zi in z.iter_mut() {
            *zi = lo + (rem % width) as i64;
            rem /= width;
        }
        visit(&z);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_counts_match_hand_enumeration() {
        // d=1, r=1: centers within distance 2 of x=0 are {-2,-1,0,1,2};
        // the cubic cover uses spacing 2, centers {-2,0,2}.
        let c = CoveringConstants::compute(1, 1.0).unwrap();
        assert_eq!(c.lattice_balls_per_unit_ball, 5);
        assert_eq!(c.unit_balls_per_lattice_ball, 3);
        assert_eq!(c.c_of_r(), 5);
    }

    #[test]
    fn two_dimensional_count_matches_disc_enumeration() {
        // d=2, r=sqrt(2): integer points within 1+sqrt(2) of the origin:
        // norms 0,1,1,1,1,sqrt2 x4, 2,2,2,2 -> 13; offsets can only grow it.
        let c = CoveringConstants::compute(2, 2f64.sqrt()).unwrap();
        assert!(c.lattice_balls_per_unit_ball >= 13);
        assert!(c.c_of_r() >= c.unit_balls_per_lattice_ball);
    }

    #[test]
    fn constants_grow_with_radius() {
        let small = CoveringConstants::compute(1, 1.0).unwrap();
        let large = CoveringConstants::compute(1, 2.5).unwrap();
        assert!(large.c_of_r() > small.c_of_r());
    }
}
