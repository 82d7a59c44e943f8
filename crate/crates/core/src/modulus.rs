//! Sampled estimate of the modulus of continuity
//! `omega(rho, beta) = max |f(t1,x1,u) - f(t2,x2,u)|` over
//! `|t1 - t2| <= rho`, `|x1 - x2| <= rho`, with `|x_i| <= alpha*`, `t_i` in
//! the horizon and `|u| <= beta`.
//!
//! Offsets are drawn at a fixed geometric ladder of absolute radii (16 rungs
//! per octave below the diameter of the region). A query at `rho` returns the
//! running maximum over every rung up to the smallest rung `>= rho`, which
//! makes the estimate nondecreasing in `rho` and never below the sampled
//! variation at `rho` itself.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::system::{DynamicsSpec, ProblemInstance};
use crate::vecmath::{dist, norm, sample_ball, sample_unit};

const RUNGS_PER_OCTAVE: usize = 16;
const OCTAVES: usize = 16;
const RANDOM_DIRECTIONS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmegaSettings {
    /// Samples per axis: `density` time nodes times `density` state/control draws.
    pub density: usize,
    pub seed: u64,
    /// Use `omega(rho) = slope * rho` instead of sampling.
    pub slope: Option<f64>,
}

impl Default for OmegaSettings {
    fn default() -> Self {
        OmegaSettings {
            density: 64,
            seed: 0,
            slope: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledModulus {
    /// Rung radii, decreasing.
    pub rungs: Vec<f64>,
    /// Running maximum from the smallest rung up to rung `k`.
    pub cumulative: Vec<f64>,
    pub density: usize,
    pub base_points: usize,
    pub directions: usize,
}

impl SampledModulus {
    pub fn omega(&self, radius: f64) -> f64 {
        let top = self.rungs[0];
        if radius >= top {
            return self.cumulative[0];
        }
        let last = self.rungs.len() - 1;
        let mut k = (((top / radius).log2() * RUNGS_PER_OCTAVE as f64).floor() as usize).min(last);
        // guard the float log: step back until rung k covers radius
        while k > 0 && self.rungs[k] < radius {
            k -= 1;
        }
        self.cumulative[k]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum OmegaModel {
    Sampled(SampledModulus),
    /// `omega(rho) = slope * rho`.
    Linear(f64),
}

impl OmegaModel {
    pub fn omega(&self, radius: f64) -> f64 {
        match self {
            OmegaModel::Sampled(s) => s.omega(radius),
            OmegaModel::Linear(slope) => slope * radius,
        }
    }
}

struct Direction {
    dt: f64,
    dx: Vec<f64>,
}

fn directions(n: usize, rng: &mut ChaCha8Rng) -> Vec<Direction> {
    let mut out = vec![
        Direction {
            dt: 1.0,
            dx: vec![0.0; n],
        },
        Direction {
            dt: -1.0,
            dx: vec![0.0; n],
        },
    ];
    for i in 0..n {
        for sx in [1.0, -1.0] {
            for dt in [0.0, 1.0, -1.0] {
                let mut dx = vec![0.0; n];
                dx[i] = sx;
                out.push(Direction { dt, dx });
            }
        }
    }
    for _ in 0..RANDOM_DIRECTIONS {
        let dt = rng.gen_range(-1.0..=1.0);
        out.push(Direction {
            dt,
            dx: sample_unit(rng, n),
        });
    }
    out
}

/// Build the modulus model for controls bounded by `beta`.
pub fn build_omega(
    spec: &DynamicsSpec,
    instance: &ProblemInstance,
    alpha_star: f64,
    beta: f64,
    settings: &OmegaSettings,
) -> Result<OmegaModel> {
    if let Some(slope) = settings.slope {
        if !(slope.is_finite() && slope >= 0.0) {
            return Err(Error::input(format!(
                "omega slope must be nonnegative, got {slope}"
            )));
        }
        return Ok(OmegaModel::Linear(slope));
    }
    sample_modulus(
        spec,
        instance,
        alpha_star,
        beta,
        settings.density,
        settings.seed,
    )
    .map(OmegaModel::Sampled)
}

pub fn sample_modulus(
    spec: &DynamicsSpec,
    instance: &ProblemInstance,
    alpha_star: f64,
    beta: f64,
    density: usize,
    seed: u64,
) -> Result<SampledModulus> {
    if density < 2 {
        return Err(Error::input("modulus sampling density must be at least 2"));
    }
    if !(alpha_star > 0.0 && beta >= 0.0) {
        return Err(Error::input(
            "alpha_star must be positive and beta nonnegative",
        ));
    }
    let (t0, theta) = (instance.t0, instance.theta);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = vec![(vec![0.0; spec.n], vec![0.0; spec.m])];
    while states.len() < density {
        states.push((
            sample_ball(&mut rng, spec.n, alpha_star),
            sample_ball(&mut rng, spec.m, beta),
        ));
    }
    let dirs = directions(spec.n, &mut rng);
    let top = (2.0 * alpha_star).max(theta - t0);
    let rungs: Vec<f64> = (0..=RUNGS_PER_OCTAVE * OCTAVES)
        .map(|k| top * (-(k as f64) / RUNGS_PER_OCTAVE as f64).exp2())
        .collect();
    let bases: Vec<(f64, usize)> = (0..density)
        .flat_map(|a| {
            let t = crate::params::grid_node(t0, theta, density - 1, a);
            (0..states.len()).map(move |b| (t, b))
        })
        .collect();

    // per base point: max variation at each rung
    let per_base: Vec<Result<Vec<f64>>> = bases
        .par_iter()
        .map(|&(t1, b)| {
            let (x1, u) = &states[b];
            let mut f1 = vec![0.0; spec.n];
            let mut f2 = vec![0.0; spec.n];
            let mut x2 = vec![0.0; spec.n];
            spec.eval_into(t1, x1, u, &mut f1)?;
            let mut best = vec![0.0f64; rungs.len()];
            for (k, &s) in rungs.iter().enumerate() {
                for d in &dirs {
                    let t2 = t1 + s * d.dt;
                    if t2 < t0 || t2 > theta {
                        continue;
                    }
                    for ((dst, a), b) in x2.iter_mut().zip(x1).zip(&d.dx) {
                        *dst = a + s * b;
                    }
                    if norm(&x2) > alpha_star {
                        continue;
                    }
                    spec.eval_into(t2, &x2, u, &mut f2)?;
                    best[k] = best[k].max(dist(&f1, &f2));
                }
            }
            Ok(best)
        })
        .collect();
    let mut raw = vec![0.0f64; rungs.len()];
    for b in per_base {
        for (r, v) in raw.iter_mut().zip(b?) {
            *r = r.max(v);
        }
    }
    let mut cumulative = raw;
    for k in (0..cumulative.len() - 1).rev() {
        cumulative[k] = cumulative[k].max(cumulative[k + 1]);
    }
    Ok(SampledModulus {
        rungs,
        cumulative,
        density,
        base_points: bases.len(),
        directions: dirs.len(),
    })
}

/// Sampled `omega` at a single radius (typically `phi*(dt)`).
pub fn estimate_omega(
    spec: &DynamicsSpec,
    instance: &ProblemInstance,
    alpha_star: f64,
    beta: f64,
    radius: f64,
    density: usize,
    seed: u64,
) -> Result<f64> {
    Ok(sample_modulus(spec, instance, alpha_star, beta, density, seed)?.omega(radius))
}
