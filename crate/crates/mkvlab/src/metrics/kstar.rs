//! Lattice-sum estimators of the k*-norm and k*-distance.
//!
//! The surrogate of a density ell is sum over lattice points z of
//! ||ell 1_{B(z,r)}||_{L^{k'}} with k' = k/(k-1), truncated to balls that
//! meet the grid's support box. It brackets the true dual norm within the
//! covering constant c(r) on both sides.

use super::{k_star_dual_exponent, KStarParams};
use crate::measure::{Density, Grid};
use crate::Result;

/// Lattice-sum surrogate of the k*-norm of `mu`.
pub fn kstar_norm_surrogate(mu: &Density, params: &KStarParams) -> f64 {
    lattice_sum(mu.grid(), params, |i| mu.values()[i])
}

/// Lattice-sum k*-distance between two densities on one grid: the surrogate
/// applied to |ell_mu - ell_nu|. Symmetric; zero iff the values coincide.
pub fn kstar_distance(mu: &Density, nu: &Density, params: &KStarParams) -> Result<f64> {
    mu.require_same_grid(nu)?;
    let (a, b) = (mu.values(), nu.values());
    Ok(lattice_sum(mu.grid(), params, |i| (a[i] - b[i]).abs()))
}

/// Multiplicity of the lattice cover at a generic (non-boundary) point:
/// the number of balls B(z,r) containing a point in general position.
pub fn generic_overlap_multiplicity(dim: usize, r: f64) -> usize {
    // an irrational-ish offset avoids ties with ball boundaries
    let x: Vec<f64> = (0..dim).map(|a| 0.437 + 0.073 * a as f64).collect();
    let span = r.ceil() as i64 + 1;
    let mut count = 0;
    let width = (2 * span + 1) as usize;
    let total = width.pow(dim as u32);
    for idx in 0..total {
        let mut rem = idx;
        let mut dist2 = 0.0;
        for xa in x.iter() {
            let z = (-span + (rem % width) as i64) as f64;
            rem /= width;
            dist2 += (z - xa) * (z - xa);
        }
        if dist2 <= r * r {
            count += 1;
        }
    }
    count
}

/// Sum over lattice balls of the local L^{k'} norm of the node function
/// `value`, with max-normalized powers for stability at large k'.
fn lattice_sum(grid: &Grid, params: &KStarParams, value: impl Fn(usize) -> f64) -> f64 {
    let d = grid.dim();
    let kp = k_star_dual_exponent(params.k);
    let r = params.r;
    let vol = grid.cell_volume();

    // support box of the grid, half a cell beyond the extreme nodes
    let mut lo = vec![0.0; d];
    let mut hi = vec![0.0; d];
    for a in 0..d {
        let (l, h) = grid.axis_range(a);
        lo[a] = l - 0.5 * grid.spacing()[a];
        hi[a] = h + 0.5 * grid.spacing()[a];
    }

    let mut total = 0.0;
    for_each_ball_center(&lo, &hi, r, |z| {
        // ball meets the support box iff the clamped distance is within r
        let boxdist2: f64 = z
            .iter()
            .enumerate()
            .map(|(a, &za)| {
                let c = za.clamp(lo[a], hi[a]);
                (za - c) * (za - c)
            })
            .sum();
        if boxdist2 > r * r + 1e-12 {
            return;
        }
        total += ball_term(grid, z, r, kp, vol, &value);
    });
    total
}

/// ||value 1_{B(z,r)}||_{L^{k'}} by midpoint quadrature over ball nodes.
fn ball_term(
    grid: &Grid,
    z: &[f64],
    r: f64,
    kp: f64,
    vol: f64,
    value: &impl Fn(usize) -> f64,
) -> f64 {
    let d = grid.dim();
    // per-axis index windows of the bounding cube of B(z,r)
    let mut win_lo = vec![0usize; d];
    let mut win_hi = vec![0usize; d];
    for a in 0..d {
        let h = grid.spacing()[a];
        let o = grid.origin()[a];
        let c = grid.counts()[a] as i64;
        let ilo = ((z[a] - r - o) / h).ceil() as i64;
        let ihi = ((z[a] + r - o) / h).floor() as i64;
        let ilo = ilo.clamp(0, c - 1);
        let ihi = ihi.clamp(-1, c - 1);
        if ihi < ilo {
            return 0.0;
        }
        win_lo[a] = ilo as usize;
        win_hi[a] = ihi as usize;
    }

    // first pass: max value inside the ball (normalizer for large k')
    let mut maxv = 0.0f64;
    visit_window(grid, &win_lo, &win_hi, |idx, dist2| {
        if dist2 <= r * r + 1e-12 {
            maxv = maxv.max(value(idx));
        }
    }, z);
    if maxv <= 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    visit_window(grid, &win_lo, &win_hi, |idx, dist2| {
        if dist2 <= r * r + 1e-12 {
            let t = value(idx) / maxv;
            if t > 0.0 {
                sum += t.powf(kp);
            }
        }
    }, z);
    maxv * (sum * vol).powf(1.0 / kp)
}

/// Visits flat indices in the index window with squared distance to `z`.
fn visit_window(
    grid: &Grid,
    lo: &[usize],
    hi: &[usize],
    mut visit: impl FnMut(usize, f64),
    z: &[f64],
) {
    let d = grid.dim();
    let mut ix = lo.to_vec();
    loop {
        let mut dist2 = 0.0;
        for a in 0..d {
            let t = grid.axis_coord(a, ix[a]) - z[a];
            dist2 += t * t;
        }
        visit(grid.flat_index(&ix), dist2);
        // odometer increment, last axis fastest
        let mut a = d;
        loop {
            if a == 0 {
                return;
            }
            a -= 1;
            if ix[a] < hi[a] {
                ix[a] += 1;
                for b in a + 1..d {
                    ix[b] = lo[b];
                }
                break;
            }
        }
    }
}

/// Enumerates integer lattice points whose ball B(z,r) could meet
/// [lo,hi]; the caller re-checks the exact box distance.
fn for_each_ball_center(lo: &[f64], hi: &[f64], r: f64, mut visit: impl FnMut(&[f64])) {
    let d = lo.len();
    let zlo: Vec<i64> = lo.iter().map(|&l| (l - r).floor() as i64).collect();
    let zhi: Vec<i64> = hi.iter().map(|&h| (h + r).ceil() as i64).collect();
    let widths: Vec<usize> = (0..d).map(|a| (zhi[a] - zlo[a] + 1) as usize).collect();
    let total: usize = widths.iter().product();
    let mut z = vec![0.0; d];
    for idx in 0..total {
        let mut rem = idx;
        for a in 0..d {
            z[a] = (zlo[a] + (rem % widths[a]) as i64) as f64;
            rem /= widths[a];
        }
        visit(&z);
    }
}
