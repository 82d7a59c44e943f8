//! Hausdorff distances between finite point sets, between trajectory
//! bundles under the uniform norm, and between funnel clouds.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::funnel::{FunnelCloud, TrajectoryBundle};
use crate::nearest::{nearest_brute, GridIndex};
use crate::params::DiscretizationPlan;
use crate::vecmath::dist;

/// Below this many distance evaluations the brute-force scan is used.
const GRID_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NearestMethod {
    Brute,
    Grid,
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceReport {
    /// `sup_{a in A} inf_{b in B} |a - b|`.
    pub forward: f64,
    /// `sup_{b in B} inf_{a in A} |a - b|`.
    pub backward: f64,
    pub hausdorff: f64,
    /// `(index in A, index in B)` attaining `forward`.
    pub forward_witness: (usize, usize),
    /// `(index in B, index in A)` attaining `backward`.
    pub backward_witness: (usize, usize),
    /// Time samples used for trajectory distances.
    pub eval_grid: Option<Vec<f64>>,
}

impl DistanceReport {
    fn from_directed(fwd: (f64, usize, usize), bwd: (f64, usize, usize)) -> Self {
        DistanceReport {
            forward: fwd.0,
            backward: bwd.0,
            hausdorff: fwd.0.max(bwd.0),
            forward_witness: (fwd.1, fwd.2),
            backward_witness: (bwd.1, bwd.2),
            eval_grid: None,
        }
    }
}

fn check_sets(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::input("Hausdorff distance of an empty set"));
    }
    let k = a[0].len();
    if a.iter().chain(b).any(|p| p.len() != k) {
        return Err(Error::input("point dimensions differ"));
    }
    Ok(())
}

/// Largest nearest-neighbour distance, with its witness pair. Among equal
/// maxima the lowest index in `from` wins.
fn reduce_directed(nearest: Vec<(f64, usize)>) -> (f64, usize, usize) {
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for (i, (d, j)) in nearest.into_iter().enumerate() {
        if d > best.0 {
            best = (d, i, j);
        }
    }
    (best.0.sqrt(), best.1, best.2)
}

fn directed_raw(from: &[Vec<f64>], to: &[Vec<f64>], method: NearestMethod) -> (f64, usize, usize) {
    let use_grid = match method {
        NearestMethod::Brute => false,
        NearestMethod::Grid => true,
        NearestMethod::Auto => from.len() * to.len() > GRID_THRESHOLD,
    };
    let nearest: Vec<(f64, usize)> = if use_grid {
        let grid = GridIndex::new(to);
        from.par_iter().map(|p| grid.nearest(p)).collect()
    } else {
        from.par_iter().map(|p| nearest_brute(to, p)).collect()
    };
    reduce_directed(nearest)
}

/// Directed distance `sup_{a in from} inf_{b in to} |a - b|`.
pub fn directed_hausdorff(
    from: &[Vec<f64>],
    to: &[Vec<f64>],
    method: NearestMethod,
) -> Result<f64> {
    check_sets(from, to)?;
    Ok(directed_raw(from, to, method).0)
}

pub fn hausdorff_points_with(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    method: NearestMethod,
) -> Result<DistanceReport> {
    check_sets(a, b)?;
    Ok(DistanceReport::from_directed(
        directed_raw(a, b, method),
        directed_raw(b, a, method),
    ))
}

pub fn hausdorff_points(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<DistanceReport> {
    hausdorff_points_with(a, b, NearestMethod::Auto)
}

/// Grid nodes and interval midpoints of the plan.
pub fn eval_grid(plan: &DiscretizationPlan) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * plan.n_steps + 1);
    for i in 0..plan.n_steps {
        let (a, b) = (plan.time(i), plan.time(i + 1));
        out.push(a);
        out.push(0.5 * (a + b));
    }
    out.push(plan.theta);
    out
}

/// Union of two sorted time grids.
pub fn merge_grids(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = a.iter().chain(b).copied().collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Hausdorff distance between bundles, with the distance between two
/// trajectories taken as the max over `grid` of the state distance.
///
/// For two polylines on a common grid the difference is affine on every
/// interval and its norm is convex there, so the supremum is attained at a
/// grid node. A grid containing the nodes is therefore exact for Euler
/// bundles on the same plan.
pub fn hausdorff_uniform(
    a: &TrajectoryBundle,
    b: &TrajectoryBundle,
    grid: &[f64],
) -> Result<DistanceReport> {
    if a.plan.t0 != b.plan.t0 || a.plan.theta != b.plan.theta {
        return Err(Error::input(format!(
            "horizon mismatch: [{}, {}] vs [{}, {}]",
            a.plan.t0, a.plan.theta, b.plan.t0, b.plan.theta
        )));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::input("Hausdorff distance of an empty bundle"));
    }
    for plan in [&a.plan, &b.plan] {
        if let Some(t) = plan.time_grid().into_iter().find(|t| !grid.contains(t)) {
            return Err(Error::input(format!(
                "evaluation grid misses grid node {t}"
            )));
        }
    }
    let sample = |bundle: &TrajectoryBundle| -> Vec<Vec<Vec<f64>>> {
        (0..bundle.len())
            .into_par_iter()
            .map(|k| grid.iter().map(|&t| bundle.value_at(k, t)).collect())
            .collect()
    };
    let (sa, sb) = (sample(a), sample(b));
    let uniform = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| -> f64 {
        x.iter().zip(y).map(|(p, q)| dist(p, q)).fold(0.0, f64::max)
    };
    let directed = |from: &[Vec<Vec<f64>>], to: &[Vec<Vec<f64>>]| -> (f64, usize, usize) {
        let nearest: Vec<(f64, usize)> = from
            .par_iter()
            .map(|x| {
                let mut best = (f64::INFINITY, 0);
                for (j, y) in to.iter().enumerate() {
                    let d = uniform(x, y);
                    if d < best.0 {
                        best = (d, j);
                    }
                }
                best
            })
            .collect();
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for (i, (d, j)) in nearest.into_iter().enumerate() {
            if d > best.0 {
                best = (d, i, j);
            }
        }
        best
    };
    let mut report = DistanceReport::from_directed(directed(&sa, &sb), directed(&sb, &sa));
    report.eval_grid = Some(grid.to_vec());
    Ok(report)
}

/// Hausdorff distance between funnel clouds as point sets in `R^{n+1}`;
/// the time coordinate is multiplied by `time_scale`.
pub fn hausdorff_funnel(
    a: &FunnelCloud,
    b: &FunnelCloud,
    time_scale: f64,
) -> Result<DistanceReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::input("Hausdorff distance of an empty funnel cloud"));
    }
    hausdorff_points(&a.points(time_scale), &b.points(time_scale))
}
