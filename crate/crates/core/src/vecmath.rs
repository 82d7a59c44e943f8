//! Small dense-vector helpers on slices.

use rand::Rng;
use rand_distr::StandardNormal;

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

#[inline]
pub fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Uniform direction on the unit sphere in `R^dim`.
pub fn sample_unit<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let len = norm(&v);
        if len > 1e-12 {
            return v.into_iter().map(|a| a / len).collect();
        }
    }
}

/// Uniform point in the closed ball of `radius` in `R^dim`.
pub fn sample_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    if dim == 0 {
        return Vec::new();
    }
    let dir = sample_unit(rng, dim);
    let s: f64 = rng.gen::<f64>().powf(1.0 / dim as f64) * radius;
    dir.into_iter().map(|a| a * s).collect()
}

/// Uniform point in the cube `[-half, half]^dim`.
pub fn sample_cube<R: Rng + ?Sized>(rng: &mut R, dim: usize, half: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-half..=half)).collect()
}
