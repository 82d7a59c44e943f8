//! Trajectory bundles over the full word set, attainable-set slices and
//! the funnel point cloud `{(t_i, z(t_i))}`.

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::control::{enumerate_words, ControlWord};
use crate::error::{Error, Result};
use crate::params::DiscretizationPlan;
use crate::sphere::SigmaNet;
use crate::system::{DynamicsSpec, ProblemInstance};
use crate::trajectory::{
    divergence_limit, euler_broken_line, euler_nodes_into, integrate_trajectory, EulerPolyline,
    SampledTrajectory,
};
use crate::vecmath::dist_inf;

/// Points closer than this in the max norm are merged in slices.
pub const DEDUP_TOLERANCE: f64 = 1e-9;

const STREAM_BATCH: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BundleMode {
    Euler,
    Oracle { substeps: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum BundlePaths {
    Euler(Vec<EulerPolyline>),
    Oracle(Vec<SampledTrajectory>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryBundle {
    pub plan: DiscretizationPlan,
    pub dim: usize,
    pub mode: BundleMode,
    pub paths: BundlePaths,
    #[serde(skip)]
    pub elapsed_ms: f64,
}

impl TrajectoryBundle {
    pub fn len(&self) -> usize {
        match &self.paths {
            BundlePaths::Euler(v) => v.len(),
            BundlePaths::Oracle(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// State of path `k` at grid node `t_i`.
    pub fn node(&self, k: usize, i: usize) -> &[f64] {
        match &self.paths {
            BundlePaths::Euler(v) => v[k].node(i),
            BundlePaths::Oracle(v) => v[k].node(i),
        }
    }

    /// State of path `k` at time `t` (interpolated).
    pub fn value_at(&self, k: usize, t: f64) -> Vec<f64> {
        match &self.paths {
            BundlePaths::Euler(v) => v[k].value_at(t),
            BundlePaths::Oracle(v) => v[k].value_at(t),
        }
    }
}

/// Build one path per enumerated word, in enumeration order.
pub fn build_bundle(
    spec: &DynamicsSpec,
    instance: &ProblemInstance,
    plan: &DiscretizationPlan,
    net: &SigmaNet,
    mode: BundleMode,
    cap: u64,
) -> Result<TrajectoryBundle> {
    let start = Instant::now();
    instance.check_against(spec)?;
    let words: Vec<ControlWord> = enumerate_words(plan, instance, net, cap)?.collect();
    let paths = match mode {
        BundleMode::Euler => BundlePaths::Euler(
            words
                .par_iter()
                .enumerate()
                .map(|(k, w)| {
                    euler_broken_line(spec, instance, plan, net, w)
                        .map(|mut z| {
                            z.word_index = k;
                            z
                        })
                        .map_err(|e| e.with_word(k))
                })
                .collect::<Result<_>>()?,
        ),
        BundleMode::Oracle { substeps } => BundlePaths::Oracle(
            words
                .par_iter()
                .enumerate()
                .map(|(k, w)| {
                    integrate_trajectory(spec, instance, plan, net, w, substeps)
                        .map(|mut x| {
                            x.word_index = k;
                            x
                        })
                        .map_err(|e| e.with_word(k))
                })
                .collect::<Result<_>>()?,
        ),
    };
    Ok(TrajectoryBundle {
        plan: plan.clone(),
        dim: spec.n,
        mode,
        paths,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Tolerance-merged point set. The first point inserted in a cluster
/// represents it; membership is found through a hash grid with cells of
/// the tolerance width, so only the `3^n` neighbouring cells are searched.
#[derive(Debug, Clone)]
pub struct PointSet {
    dim: usize,
    tol: f64,
    points: Vec<Vec<f64>>,
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

impl PointSet {
    pub fn new(dim: usize, tol: f64) -> Self {
        PointSet {
            dim,
            tol,
            points: Vec::new(),
            cells: HashMap::new(),
        }
    }

    fn cell(&self, x: &[f64]) -> Vec<i64> {
        x.iter().map(|v| (v / self.tol).floor() as i64).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Returns `true` when `x` started a new cluster.
    pub fn insert(&mut self, x: &[f64]) -> bool {
        let home = self.cell(x);
        let mut offset = vec![-1i64; self.dim];
        loop {
            let key: Vec<i64> = home.iter().zip(&offset).map(|(h, o)| h + o).collect();
            if let Some(ids) = self.cells.get(&key) {
                for &id in ids {
                    if dist_inf(&self.points[id], x) <= self.tol {
                        return false;
                    }
                }
            }
            // odometer over {-1, 0, 1}^n
            let mut d = 0;
            while d < self.dim {
                offset[d] += 1;
                if offset[d] <= 1 {
                    break;
                }
                offset[d] = -1;
                d += 1;
            }
            if d == self.dim {
                break;
            }
        }
        self.cells.entry(home).or_default().push(self.points.len());
        self.points.push(x.to_vec());
        true
    }

    /// Representatives in lexicographic order.
    pub fn into_sorted(self) -> Vec<Vec<f64>> {
        let mut pts = self.points;
        pts.sort_by(|a, b| lex_cmp(a, b));
        pts
    }
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

pub fn dedup_points<'a>(dim: usize, points: impl IntoIterator<Item = &'a [f64]>) -> Vec<Vec<f64>> {
    let mut set = PointSet::new(dim, DEDUP_TOLERANCE);
    for p in points {
        set.insert(p);
    }
    set.into_sorted()
}

/// Deduplicated states of the bundle at time `t`.
pub fn attainable_slice(bundle: &TrajectoryBundle, t: f64) -> Result<Vec<Vec<f64>>> {
    let plan = &bundle.plan;
    if !(t >= plan.t0 && t <= plan.theta) {
        return Err(Error::input(format!(
            "t = {t} outside [{}, {}]",
            plan.t0, plan.theta
        )));
    }
    let values: Vec<Vec<f64>> = (0..bundle.len())
        .into_par_iter()
        .map(|k| bundle.value_at(k, t))
        .collect();
    Ok(dedup_points(
        bundle.dim,
        values.iter().map(|v| v.as_slice()),
    ))
}

/// Funnel point cloud grouped by grid index: `slices[i]` holds the
/// deduplicated states at `times[i]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunnelCloud {
    pub dim: usize,
    pub times: Vec<f64>,
    pub slices: Vec<Vec<Vec<f64>>>,
}

impl FunnelCloud {
    pub fn len(&self) -> usize {
        self.slices.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Points `(t_i, z)` in `R^{n+1}`, with `t` scaled by `time_scale`.
    pub fn points(&self, time_scale: f64) -> Vec<Vec<f64>> {
        self.times
            .iter()
            .zip(&self.slices)
            .flat_map(|(&t, slice)| {
                slice.iter().map(move |z| {
                    let mut p = Vec::with_capacity(z.len() + 1);
                    p.push(t * time_scale);
                    p.extend_from_slice(z);
                    p
                })
            })
            .collect()
    }
}

/// Funnel cloud from the bundle's states at the grid nodes.
pub fn build_funnel(bundle: &TrajectoryBundle) -> FunnelCloud {
    let plan = &bundle.plan;
    let slices = (0..=plan.n_steps)
        .into_par_iter()
        .map(|i| dedup_points(bundle.dim, (0..bundle.len()).map(|k| bundle.node(k, i))))
        .collect();
    FunnelCloud {
        dim: bundle.dim,
        times: plan.time_grid(),
        slices,
    }
}

/// Euler slices at the requested grid indices without materializing the
/// bundle: words are streamed in batches and only deduplicated states kept.
/// Returns the slices and the number of words processed.
pub fn stream_slices(
    spec: &DynamicsSpec,
    instance: &ProblemInstance,
    plan: &DiscretizationPlan,
    net: &SigmaNet,
    nodes: &[usize],
    cap: u64,
) -> Result<(Vec<Vec<Vec<f64>>>, u64)> {
    instance.check_against(spec)?;
    if let Some(&bad) = nodes.iter().find(|&&i| i > plan.n_steps) {
        return Err(Error::input(format!(
            "grid index {bad} beyond N = {}",
            plan.n_steps
        )));
    }
    let n = spec.n;
    let limit = divergence_limit(spec, instance);
    let mut stream = enumerate_words(plan, instance, net, cap)?;
    let mut sets: Vec<PointSet> = nodes
        .iter()
        .map(|_| PointSet::new(n, DEDUP_TOLERANCE))
        .collect();
    let mut processed = 0u64;
    loop {
        let batch: Vec<ControlWord> = stream.by_ref().take(STREAM_BATCH).collect();
        if batch.is_empty() {
            break;
        }
        let base = processed as usize;
        let states: Vec<Vec<f64>> = batch
            .par_iter()
            .enumerate()
            .map_init(
                || (vec![0.0; (plan.n_steps + 1) * n], vec![0.0; n]),
                |(buf, scratch), (k, w)| {
                    euler_nodes_into(spec, instance, plan, net, w, limit, buf, scratch)
                        .map_err(|e| e.with_word(base + k))?;
                    Ok(nodes
                        .iter()
                        .flat_map(|&i| buf[i * n..(i + 1) * n].to_vec())
                        .collect())
                },
            )
            .collect::<Result<_>>()?;
        for s in &states {
            for (slot, set) in sets.iter_mut().enumerate() {
                set.insert(&s[slot * n..(slot + 1) * n]);
            }
        }
        processed += batch.len() as u64;
    }
    Ok((
        sets.into_iter().map(PointSet::into_sorted).collect(),
        processed,
    ))
}

/// Funnel cloud built by streaming; same result as `build_funnel` on the
/// Euler bundle.
pub fn stream_funnel(
    spec: &DynamicsSpec,
    instance: &ProblemInstance,
    plan: &DiscretizationPlan,
    net: &SigmaNet,
    cap: u64,
) -> Result<(FunnelCloud, u64)> {
    let nodes: Vec<usize> = (0..=plan.n_steps).collect();
    let (slices, words) = stream_slices(spec, instance, plan, net, &nodes, cap)?;
    Ok((
        FunnelCloud {
            dim: spec.n,
            times: plan.time_grid(),
            slices,
        },
        words,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{word_lp_norm, DEFAULT_WORD_CAP};
    use crate::sphere::{build_sigma_net, DEFAULT_NET_CAP};
    use crate::system::Catalog;

    fn integrator(
        n: usize,
        beta: f64,
        q: usize,
        r: f64,
    ) -> (DynamicsSpec, ProblemInstance, DiscretizationPlan, SigmaNet) {
        let spec = DynamicsSpec::catalog(Catalog::Integrator);
        let inst = ProblemInstance::new(0.0, 1.0, vec![0.0], 2.0, r).unwrap();
        let plan = DiscretizationPlan::direct(&inst, beta, n, q, 1.0).unwrap();
        let net = build_sigma_net(1, 1.0, DEFAULT_NET_CAP).unwrap();
        (spec, inst, plan, net)
    }

    #[test]
    fn three_word_bundle() {
        let (spec, inst, plan, net) = integrator(1, 1.0, 1, 1.0);
        let b = build_bundle(
            &spec,
            &inst,
            &plan,
            &net,
            BundleMode::Euler,
            DEFAULT_WORD_CAP,
        )
        .unwrap();
        assert_eq!(b.len(), 3);
        let ends: Vec<f64> = (0..3).map(|k| b.node(k, 1)[0]).collect();
        assert_eq!(ends, vec![0.0, 1.0, -1.0]);
        assert_eq!(
            attainable_slice(&b, 1.0).unwrap(),
            vec![vec![-1.0], vec![0.0], vec![1.0]]
        );
        assert_eq!(
            attainable_slice(&b, 0.5).unwrap(),
            vec![vec![-0.5], vec![0.0], vec![0.5]]
        );
        assert_eq!(attainable_slice(&b, 0.0).unwrap(), vec![vec![0.0]]);
        assert!(attainable_slice(&b, 1.5).is_err());

        let f = build_funnel(&b);
        assert_eq!(f.len(), 4);
        assert_eq!(
            f.points(1.0),
            vec![
                vec![0.0, 0.0],
                vec![1.0, -1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0]
            ]
        );
    }

    #[test]
    fn zero_budget_bundle() {
        let (spec, inst, plan, net) = integrator(3, 1.0, 2, 0.0);
        let b = build_bundle(
            &spec,
            &inst,
            &plan,
            &net,
            BundleMode::Euler,
            DEFAULT_WORD_CAP,
        )
        .unwrap();
        assert_eq!(b.len(), 1);
        let f = build_funnel(&b);
        assert_eq!(f.len(), 4);
        assert!(f.slices.iter().all(|s| s == &vec![vec![0.0]]));
    }

    #[test]
    fn nine_word_slices() {
        let (spec, inst, plan, net) = integrator(2, 2.0, 2, 1.0);
        let b = build_bundle(
            &spec,
            &inst,
            &plan,
            &net,
            BundleMode::Euler,
            DEFAULT_WORD_CAP,
        )
        .unwrap();
        assert_eq!(b.len(), 9);
        let f = build_funnel(&b);
        let sizes: Vec<usize> = f.slices.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![1, 3, 5]);
        assert_eq!(f.slices[1], vec![vec![-0.5], vec![0.0], vec![0.5]]);
        assert_eq!(
            f.slices[2],
            vec![vec![-1.0], vec![-0.5], vec![0.0], vec![0.5], vec![1.0]]
        );
        assert_eq!(f.times, plan.time_grid());
    }

    #[test]
    fn streaming_matches_materialized() {
        let spec = DynamicsSpec::catalog(Catalog::Rotator);
        let inst = ProblemInstance::new(0.0, 1.0, vec![0.5, 0.0], 2.0, 1.0).unwrap();
        let plan = DiscretizationPlan::direct(&inst, 2.0, 3, 2, 1.0).unwrap();
        let net = build_sigma_net(2, 1.0, DEFAULT_NET_CAP).unwrap();
        let b = build_bundle(
            &spec,
            &inst,
            &plan,
            &net,
            BundleMode::Euler,
            DEFAULT_WORD_CAP,
        )
        .unwrap();
        let (f, words) = stream_funnel(&spec, &inst, &plan, &net, DEFAULT_WORD_CAP).unwrap();
        assert_eq!(words as usize, b.len());
        assert_eq!(f, build_funnel(&b));
    }

    #[test]
    fn oracle_bundle_and_internal_norms() {
        let (spec, inst, plan, net) = integrator(3, 2.0, 2, 1.0);
        let b = build_bundle(
            &spec,
            &inst,
            &plan,
            &net,
            BundleMode::Oracle { substeps: 4 },
            DEFAULT_WORD_CAP,
        )
        .unwrap();
        let words: Vec<_> = enumerate_words(&plan, &inst, &net, DEFAULT_WORD_CAP)
            .unwrap()
            .collect();
        assert_eq!(words.len(), b.len());
        for (k, w) in words.iter().enumerate() {
            assert!(word_lp_norm(w, &plan, &inst) <= inst.r + 1e-12);
            assert!(b.node(k, 3)[0].abs() <= 1.0 + 1e-12);
        }
        let f = build_funnel(&b);
        assert_eq!(f.times, plan.time_grid());
    }

    #[test]
    fn dedup_merges_within_tolerance() {
        let pts = [
            vec![0.0, 0.0],
            vec![5e-10, -5e-10],
            vec![2e-9, 0.0],
            vec![0.0, 0.0],
        ];
        let out = dedup_points(2, pts.iter().map(|p| p.as_slice()));
        assert_eq!(out, vec![vec![0.0, 0.0], vec![2e-9, 0.0]]);
    }

    #[test]
    fn refining_levels_keeps_old_slice_points() {
        for n in 1..=3 {
            let (spec, inst, coarse, net) = integrator(n, 2.0, 2, 1.0);
            let fine = DiscretizationPlan::direct(&inst, 2.0, n, 4, 1.0).unwrap();
            let fc = build_funnel(
                &build_bundle(
                    &spec,
                    &inst,
                    &coarse,
                    &net,
                    BundleMode::Euler,
                    DEFAULT_WORD_CAP,
                )
                .unwrap(),
            );
            let ff = build_funnel(
                &build_bundle(
                    &spec,
                    &inst,
                    &fine,
                    &net,
                    BundleMode::Euler,
                    DEFAULT_WORD_CAP,
                )
                .unwrap(),
            );
            for (sc, sf) in fc.slices.iter().zip(&ff.slices) {
                for p in sc {
                    assert!(
                        sf.iter().any(|q| (p[0] - q[0]).abs() <= 1e-12),
                        "N={n}: {p:?}"
                    );
                }
            }
        }
    }
}
