//! Exact nearest-neighbour queries over a finite point set.
//!
//! Both searches return the minimum of `(squared distance, index)` in
//! lexicographic order, so ties resolve to the lowest index and the two
//! methods agree bit for bit.

use crate::vecmath::dist_sq;

/// Linear scan.
pub fn nearest_brute(points: &[Vec<f64>], q: &[f64]) -> (f64, usize) {
    let mut best = (f64::INFINITY, usize::MAX);
    for (i, p) in points.iter().enumerate() {
        let d = dist_sq(p, q);
        if d < best.0 {
            best = (d, i);
        }
    }
    best
}

/// Uniform grid over the bounding box of the points, stored densely. A query
/// scans boxes of cells of growing Chebyshev radius around its own cell and
/// stops once the best distance is below the distance to any cell outside
/// the box. When a box would hold more cells than there are points, it falls
/// back to the linear scan.
#[derive(Debug, Clone)]
pub struct GridIndex<'a> {
    points: &'a [Vec<f64>],
    dim: usize,
    cell: f64,
    origin: Vec<f64>,
    counts: Vec<i64>,
    /// Cell `c` holds `ids[start[c]..start[c + 1]]`.
    start: Vec<usize>,
    ids: Vec<usize>,
}

impl<'a> GridIndex<'a> {
    pub fn new(points: &'a [Vec<f64>]) -> Self {
        let dim = points.first().map_or(0, Vec::len);
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for p in points {
            for d in 0..dim {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let extent = (0..dim).map(|d| hi[d] - lo[d]).fold(0.0, f64::max);
        // about one point per cell along the widest axis
        let per_axis = (points.len() as f64)
            .powf(1.0 / dim.max(1) as f64)
            .ceil()
            .max(1.0);
        let cell = if extent > 0.0 { extent / per_axis } else { 1.0 };
        let counts: Vec<i64> = (0..dim)
            .map(|d| ((hi[d] - lo[d]) / cell).floor() as i64 + 1)
            .collect();
        let mut index = GridIndex {
            points,
            dim,
            cell,
            origin: lo,
            counts,
            start: Vec::new(),
            ids: Vec::new(),
        };
        let total: usize = index.counts.iter().product::<i64>() as usize;
        let flat: Vec<usize> = points
            .iter()
            .map(|p| {
                let key: Vec<i64> = (0..dim).map(|d| index.coord(p[d], d)).collect();
                index.flat(&key)
            })
            .collect();
        let mut start = vec![0usize; total + 1];
        for &c in &flat {
            start[c + 1] += 1;
        }
        for c in 0..total {
            start[c + 1] += start[c];
        }
        let mut fill = start.clone();
        let mut ids = vec![0usize; points.len()];
        // ascending ids within each cell
        for (i, &c) in flat.iter().enumerate() {
            ids[fill[c]] = i;
            fill[c] += 1;
        }
        index.start = start;
        index.ids = ids;
        index
    }

    /// Cell coordinate along axis `d`, clamped to the grid.
    fn coord(&self, x: f64, d: usize) -> i64 {
        let k = ((x - self.origin[d]) / self.cell).floor();
        (k.max(0.0) as i64).min(self.counts[d] - 1)
    }

    fn flat(&self, key: &[i64]) -> usize {
        key.iter()
            .zip(&self.counts)
            .fold(0i64, |acc, (k, n)| acc * n + k) as usize
    }

    pub fn nearest(&self, q: &[f64]) -> (f64, usize) {
        if self.points.is_empty() {
            return (f64::INFINITY, usize::MAX);
        }
        let home: Vec<i64> = (0..self.dim).map(|d| self.coord(q[d], d)).collect();
        let mut best = (f64::INFINITY, usize::MAX);
        let mut lo = vec![0i64; self.dim];
        let mut hi = vec![0i64; self.dim];
        let mut radius: i64 = 0;
        loop {
            let mut volume = 1.0;
            for d in 0..self.dim {
                lo[d] = (home[d] - radius).max(0);
                hi[d] = (home[d] + radius).min(self.counts[d] - 1);
                volume *= (hi[d] - lo[d] + 1) as f64;
            }
            if radius > 0 && volume > self.points.len() as f64 * 4.0 + 8.0 {
                return nearest_brute(self.points, q);
            }
            self.scan_shell(&home, radius, &lo, &hi, q, &mut best);
            // distance from q to the nearest cell outside the box; sides
            // already at the grid boundary have nothing beyond them
            let mut outside = f64::INFINITY;
            for d in 0..self.dim {
                if lo[d] > 0 {
                    let wall = self.origin[d] + lo[d] as f64 * self.cell;
                    outside = outside.min(q[d] - wall);
                }
                if hi[d] < self.counts[d] - 1 {
                    let wall = self.origin[d] + (hi[d] + 1) as f64 * self.cell;
                    outside = outside.min(wall - q[d]);
                }
            }
            if outside == f64::INFINITY {
                return best;
            }
            // points sit in their cells only up to rounding in `coord`
            let margin = outside - 1e-9 * self.cell;
            if margin > 0.0 && best.0 < margin * margin {
                return best;
            }
            radius += 1;
        }
    }

    /// Cells of the clipped box `[lo, hi]` at Chebyshev distance exactly
    /// `radius` from `home`.
    fn scan_shell(
        &self,
        home: &[i64],
        radius: i64,
        lo: &[i64],
        hi: &[i64],
        q: &[f64],
        best: &mut (f64, usize),
    ) {
        let mut key = lo.to_vec();
        loop {
            let on_shell = (0..self.dim).any(|d| (key[d] - home[d]).abs() == radius);
            if on_shell || radius == 0 {
                let c = self.flat(&key);
                for &i in &self.ids[self.start[c]..self.start[c + 1]] {
                    let d = dist_sq(&self.points[i], q);
                    if d < best.0 || (d == best.0 && i < best.1) {
                        *best = (d, i);
                    }
                }
            }
            let mut d = 0;
            while d < self.dim {
                key[d] += 1;
                if key[d] <= hi[d] {
                    break;
                }
                key[d] = lo[d];
                d += 1;
            }
            if d == self.dim {
                return;
            }
        }
    }
}
