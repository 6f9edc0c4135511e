//! Exact Wasserstein distances between equally weighted particle clouds.
//!
//! W_q(a,b) = (min_pi (1/N) sum_i |x_i - y_{pi(i)}|^q)^(1/q) over assignments
//! pi. In d=1 the sorted coupling is optimal for every convex cost, so the
//! distance reduces to order statistics; in higher dimensions the minimum is
//! taken over an exact optimal assignment (Kuhn-Munkres).

use ordered_float::OrderedFloat;
use pathfinding::kuhn_munkres::kuhn_munkres_min;
use pathfinding::matrix::Matrix;

use crate::measure::EmpiricalMeasure;
use crate::{Error, Result};

/// Largest cloud accepted by the exact assignment solver (cubic cost).
pub const ASSIGNMENT_MAX_POINTS: usize = 4096;

/// q-Wasserstein distance between equal-size clouds. Sorting in d=1,
/// exact assignment in d >= 2.
pub fn wasserstein_q(a: &EmpiricalMeasure, b: &EmpiricalMeasure, q: f64) -> Result<f64> {
    check_pair(a, b, q)?;
    if a.dim() == 1 {
        let mut xs: Vec<f64> = a.coords().to_vec();
        let mut ys: Vec<f64> = b.coords().to_vec();
        xs.sort_unstable_by(f64::total_cmp);
        ys.sort_unstable_by(f64::total_cmp);
        let mean: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(&x, &y)| (x - y).abs().powf(q))
            .sum::<f64>()
            / xs.len() as f64;
        Ok(mean.powf(1.0 / q))
    } else {
        wasserstein_q_assignment(a, b, q)
    }
}

/// q-Wasserstein distance via the exact assignment solver in any dimension.
/// Exists so the sorted d=1 path can be cross-checked; N <= 4096.
pub fn wasserstein_q_assignment(
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    q: f64,
) -> Result<f64> {
    check_pair(a, b, q)?;
    let n = a.len();
    if n > ASSIGNMENT_MAX_POINTS {
        return Err(Error::Parameter(format!(
            "exact assignment limited to {ASSIGNMENT_MAX_POINTS} points, got {n}"
        )));
    }
    let costs = Matrix::from_fn(n, n, |(i, j)| {
        OrderedFloat(pair_cost(a.point(i), b.point(j), q))
    });
    let (total, _assignment) = kuhn_munkres_min(&costs);
    Ok((total.0 / n as f64).powf(1.0 / q))
}

fn pair_cost(x: &[f64], y: &[f64], q: f64) -> f64 {
    let dist2: f64 = x.iter().zip(y).map(|(&u, &v)| (u - v) * (u - v)).sum();
    dist2.sqrt().powf(q)
}

fn check_pair(a: &EmpiricalMeasure, b: &EmpiricalMeasure, q: f64) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "clouds must have equal size, got {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::Parameter(format!("order q must lie in [1, inf), got {q}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(dim: usize, pts: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::new(dim, pts.to_vec()).unwrap()
    }

    #[test]
    fn identical_clouds_have_zero_distance() {
        let a = cloud(2, &[0.0, 0.0, 1.0, 2.0, -3.0, 0.5]);
        for q in [1.0, 2.0, 4.0] {
            assert_eq!(wasserstein_q(&a, &a, q).unwrap(), 0.0);
        }
    }

    #[test]
    fn sorted_coupling_on_a_line() {
        let a = cloud(1, &[1.0, 0.0]);
        let b = cloud(1, &[3.0, 0.0]);
        let w1 = wasserstein_q(&a, &b, 1.0).unwrap();
        let w2 = wasserstein_q(&a, &b, 2.0).unwrap();
        assert!((w1 - 1.0).abs() < 1e-15);
        assert!((w2 - 2.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn assignment_matches_sorting_in_one_dimension() {
        // pseudo-random but fixed points, N = 64
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut s = 1u64;
        for _ in 0..64 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            xs.push((s >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0);
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ys.push((s >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 1.0);
        }
        let a = cloud(1, &xs);
        let b = cloud(1, &ys);
        for q in [1.0, 2.0, 3.0] {
            let sorted = wasserstein_q(&a, &b, q).unwrap();
            let assigned = wasserstein_q_assignment(&a, &b, q).unwrap();
            assert!(
                (sorted - assigned).abs() < 1e-12,
                "q={q}: {sorted} vs {assigned}"
            );
        }
    }

    #[test]
    fn assignment_matches_brute_force_in_the_plane() {
        let a = cloud(
            2,
            &[0.1, 0.9, -0.4, 0.2, 1.3, -0.7, 0.0, 0.0, -1.1, 0.6, 0.5, 0.5],
        );
        let b = cloud(
            2,
            &[0.8, -0.3, -0.2, 1.1, 0.4, 0.0, -0.9, -0.5, 1.0, 1.0, -0.6, 0.3],
        );
        for q in [1.0, 2.0] {
            let solver = wasserstein_q(&a, &b, q).unwrap();
            let brute = brute_force(&a, &b, q);
            assert!((solver - brute).abs() < 1e-12, "q={q}: {solver} vs {brute}");
        }
    }

    #[test]
    fn monotone_in_q() {
        let a = cloud(1, &[0.0, 0.3, 1.7, -2.0, 0.9]);
        let b = cloud(1, &[0.4, -0.1, 2.0, -1.5, 1.4]);
        let w1 = wasserstein_q(&a, &b, 1.0).unwrap();
        let w2 = wasserstein_q(&a, &b, 2.0).unwrap();
        let w4 = wasserstein_q(&a, &b, 4.0).unwrap();
        assert!(w1 <= w2 + 1e-12 && w2 <= w4 + 1e-12);
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let a = cloud(1, &[0.0, 1.0]);
        let b = cloud(1, &[0.0]);
        assert!(wasserstein_q(&a, &b, 2.0).is_err());
        let c = cloud(2, &[0.0, 0.0, 1.0, 1.0]);
        assert!(wasserstein_q(&a, &c, 2.0).is_err());
        assert!(wasserstein_q(&a, &a, 0.5).is_err());
    }

    /// Minimum over all permutations, for N small enough to enumerate.
    fn brute_force(a: &EmpiricalMeasure, b: &EmpiricalMeasure, q: f64) -> f64 {
        let n = a.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut perm, 0, &mut |p| {
            let total: f64 = (0..n)
                .map(|i| pair_cost(a.point(i), b.point(p[i]), q))
                .sum();
            best = best.min(total);
        });
        (best / n as f64).powf(1.0 / q)
    }

    fn permute(p: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == p.len() {
            visit(p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            permute(p, k + 1, visit);
            p.swap(k, i);
        }
    }
}
