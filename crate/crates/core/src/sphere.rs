//! Finite σ-nets on the unit sphere `S^{m-1}`.
//!
//! * `m = 1`: the two points `{+1, -1}`.
//! * `m = 2`: `k` equally spaced angles, the smallest `k` with
//!   `2 sin(pi / 2k) <= sigma`.
//! * `m >= 3`: latitude bands. A point is written `(cos phi, sin phi s')` with
//!   `s'` on `S^{m-2}`. Each band of half-width `e` around `phi_k` carries a
//!   subnet of `S^{m-2}` of radius `rho_k`. For a point in the band,
//!   `|s - b|^2 <= 4 sin^2(e/2) + sin(phi_max) sin(phi_k) rho_k^2`, and both
//!   terms are sized to at most `sigma^2 / 2`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::vecmath::{dist_sq, norm, sample_unit};

use std::f64::consts::PI;

/// Relative slack on the analytic covering bound, for equality cases such as
/// three points at `sigma = 1` where `2 sin(pi/6)` rounds above 1.
const BOUND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaNet {
    pub m: usize,
    pub sigma: f64,
    pub points: Vec<Vec<f64>>,
    /// Analytic covering radius of the construction (`<= sigma` up to rounding).
    pub certified_radius: f64,
}

impl SigmaNet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Wrap explicit unit vectors. The certified radius is unknown (infinite).
    pub fn from_points(m: usize, sigma: f64, points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::input("a sigma-net needs at least one point"));
        }
        for p in &points {
            if p.len() != m || (norm(p) - 1.0).abs() > 1e-12 {
                return Err(Error::input(format!(
                    "net point {p:?} is not a unit vector in R^{m}"
                )));
            }
        }
        Ok(SigmaNet {
            m,
            sigma,
            points,
            certified_radius: f64::INFINITY,
        })
    }
}

fn circle_count(sigma: f64) -> usize {
    if sigma >= 2.0 {
        return 1;
    }
    let half = (sigma / 2.0).asin();
    let mut k = ((PI / (2.0 * half)).ceil() as usize).max(1);
    // ceil can land one above the minimum through rounding in PI / half
    while k > 1 && circle_radius(k - 1) <= sigma * (1.0 + BOUND_SLACK) {
        k -= 1;
    }
    while circle_radius(k) > sigma * (1.0 + BOUND_SLACK) {
        k += 1;
    }
    k
}

fn circle_radius(k: usize) -> f64 {
    2.0 * (PI / (2.0 * k as f64)).sin()
}

/// Plan of the recursive construction; sized before any point is emitted.
enum Layout {
    Poles,
    Circle(usize),
    Single(usize),
    Bands {
        half_width: f64,
        bands: Vec<(f64, f64, Layout)>,
    },
}

impl Layout {
    fn count(&self) -> u64 {
        match self {
            Layout::Poles => 2,
            Layout::Circle(k) => *k as u64,
            Layout::Single(_) => 1,
            Layout::Bands { bands, .. } => bands.iter().map(|(_, _, l)| l.count()).sum(),
        }
    }

    fn radius(&self) -> f64 {
        match self {
            Layout::Poles => 0.0,
            Layout::Circle(k) => circle_radius(*k),
            Layout::Single(_) => 2.0,
            Layout::Bands {
                half_width, bands, ..
            } => {
                let lat = 4.0 * (half_width / 2.0).sin().powi(2);
                bands
                    .iter()
                    .map(|(phi, sin_max, sub)| {
                        (lat + sin_max * phi.sin() * sub.radius().powi(2)).sqrt()
                    })
                    .fold(0.0, f64::max)
            }
        }
    }

    fn emit(&self, out: &mut Vec<Vec<f64>>) {
        match self {
            Layout::Poles => {
                out.push(vec![1.0]);
                out.push(vec![-1.0]);
            }
            Layout::Circle(k) => {
                for i in 0..*k {
                    let a = 2.0 * PI * i as f64 / *k as f64;
                    out.push(vec![a.cos(), a.sin()]);
                }
            }
            Layout::Single(m) => {
                let mut p = vec![0.0; *m];
                p[0] = 1.0;
                out.push(p);
            }
            Layout::Bands { bands, .. } => {
                for (phi, _, sub) in bands {
                    let mut inner = Vec::new();
                    sub.emit(&mut inner);
                    let (s, c) = phi.sin_cos();
                    for q in inner {
                        let mut p = Vec::with_capacity(q.len() + 1);
                        p.push(c);
                        p.extend(q.iter().map(|v| s * v));
                        let len = norm(&p);
                        p.iter_mut().for_each(|v| *v /= len);
                        out.push(p);
                    }
                }
            }
        }
    }
}

/// Recursive layout on `S^{m-1}` (`m >= 2`) with running count checked
/// against `cap`.
fn layout(m: usize, sigma: f64, cap: u64, used: &mut u64) -> Result<Layout> {
    let l = if sigma >= 2.0 {
        Layout::Single(m)
    } else if m == 2 {
        Layout::Circle(circle_count(sigma))
    } else {
        let max_half = 2.0 * (sigma / (2.0 * 2f64.sqrt())).min(1.0).asin();
        let count = (PI / (2.0 * max_half)).ceil().max(1.0);
        if count > cap as f64 {
            return Err(Error::capacity(
                "sigma-net points",
                cap,
                *used,
                count as u64,
            ));
        }
        let count = count as usize;
        let half_width = PI / (2.0 * count as f64);
        let mut bands = Vec::with_capacity(count);
        for k in 0..count {
            let phi = (k as f64 + 0.5) * PI / count as f64;
            let (lo, hi) = (phi - half_width, phi + half_width);
            let sin_max = if lo <= PI / 2.0 && PI / 2.0 <= hi {
                1.0
            } else {
                lo.sin().max(hi.sin())
            };
            let sub_sigma = sigma / (2.0 * sin_max * phi.sin()).sqrt();
            let sub = layout(m - 1, sub_sigma, cap, used)?;
            bands.push((phi, sin_max, sub));
        }
        return Ok(Layout::Bands { half_width, bands });
    };
    *used += l.count();
    if *used > cap {
        return Err(Error::capacity("sigma-net points", cap, *used, *used));
    }
    Ok(l)
}

/// Default cap on the number of net points.
pub const DEFAULT_NET_CAP: u64 = 1_000_000;

pub fn build_sigma_net(m: usize, sigma: f64, cap: u64) -> Result<SigmaNet> {
    if m == 0 {
        return Err(Error::input("sphere dimension m must be at least 1"));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::input(format!("sigma must be positive, got {sigma}")));
    }
    let l = if m == 1 {
        Layout::Poles
    } else {
        let mut used = 0;
        layout(m, sigma, cap, &mut used)?
    };
    if l.count() > cap {
        return Err(Error::capacity(
            "sigma-net points",
            cap,
            l.count(),
            l.count(),
        ));
    }
    let mut points = Vec::with_capacity(l.count() as usize);
    l.emit(&mut points);
    Ok(SigmaNet {
        m,
        sigma,
        points,
        certified_radius: l.radius(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoveringReport {
    pub samples: usize,
    pub max_gap: f64,
    /// Sample that realized `max_gap`.
    pub witness: Vec<f64>,
    pub passed: bool,
}

/// Largest distance from `samples` uniform unit vectors to their nearest net point.
pub fn covering_check(net: &SigmaNet, samples: usize, seed: u64) -> Result<CoveringReport> {
    if samples == 0 {
        return Err(Error::input("samples must be at least 1"));
    }
    const CHUNK: usize = 4096;
    let chunks = samples.div_ceil(CHUNK);
    let best = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let take = CHUNK.min(samples - c * CHUNK);
            let mut best = (0.0f64, Vec::new());
            for _ in 0..take {
                let s = if net.m == 1 {
                    vec![if rand::Rng::gen_bool(&mut rng, 0.5) {
                        1.0
                    } else {
                        -1.0
                    }]
                } else {
                    sample_unit(&mut rng, net.m)
                };
                let gap = net
                    .points
                    .iter()
                    .map(|b| dist_sq(&s, b))
                    .fold(f64::INFINITY, f64::min)
                    .sqrt();
                if gap > best.0 || best.1.is_empty() {
                    best = (gap, s);
                }
            }
            best
        })
        .reduce(
            || (f64::NEG_INFINITY, Vec::new()),
            |a, b| if b.0 > a.0 { b } else { a },
        );
    Ok(CoveringReport {
        samples,
        max_gap: best.0,
        witness: best.1,
        passed: best.0 <= net.sigma,
    })
}
