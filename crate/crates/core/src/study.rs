//! Convergence study over a list of nested plans against a fixed reference.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::control::count_words;
use crate::error::{Error, Result};
use crate::funnel::{
    attainable_slice, build_bundle, build_funnel, stream_funnel, BundleMode, FunnelCloud,
    TrajectoryBundle,
};
use crate::metrics::{
    directed_hausdorff, eval_grid, hausdorff_funnel, hausdorff_points, hausdorff_uniform,
    merge_grids, NearestMethod,
};
use crate::modulus::{build_omega, OmegaModel, OmegaSettings};
use crate::params::{derive_constants, DiscretizationPlan};
use crate::sphere::{build_sigma_net, SigmaNet};
use crate::system::{DynamicsSpec, ProblemInstance};

/// What the approximations are measured against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Reference {
    /// A reference attainable set at `theta`; only slice columns are filled.
    Points(Vec<Vec<f64>>),
    /// RK4 bundle on a fine plan; fills the trajectory and funnel columns too.
    /// Its funnel is sampled at each row's grid nodes.
    Oracle {
        plan: DiscretizationPlan,
        substeps: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySettings {
    pub word_cap: u64,
    pub net_cap: u64,
    /// Rows with more words than this are streamed: slice and funnel
    /// columns only.
    pub materialize_limit: u64,
    pub omega: OmegaSettings,
    pub time_scale: f64,
}

impl Default for StudySettings {
    fn default() -> Self {
        StudySettings {
            word_cap: crate::control::DEFAULT_WORD_CAP,
            net_cap: crate::sphere::DEFAULT_NET_CAP,
            materialize_limit: 200_000,
            omega: OmegaSettings::default(),
            time_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub plan: usize,
    pub n_steps: usize,
    pub q: usize,
    pub sigma: f64,
    pub beta: f64,
    pub dt: f64,
    pub delta: f64,
    pub net_size: usize,
    pub words: Option<u64>,
    pub slice_points: Option<usize>,
    /// Directed distance from the reference slice at `theta` to the approximation.
    pub directed: Option<f64>,
    pub slice_h: Option<f64>,
    pub h_c: Option<f64>,
    pub funnel_h: Option<f64>,
    /// `omega(phi*(dt), beta) T exp(g(beta) T)`.
    pub euler_bound: Option<f64>,
    pub status: String,
    #[serde(skip)]
    pub wall_ms: f64,
}

fn check_nested(plans: &[DiscretizationPlan]) -> Result<()> {
    for (k, w) in plans.windows(2).enumerate() {
        let (a, b) = (&w[0], &w[1]);
        let nested = a.t0 == b.t0
            && a.theta == b.theta
            && a.beta == b.beta
            && b.n_steps % a.n_steps == 0
            && b.q % a.q == 0
            && b.sigma <= a.sigma;
        if !nested {
            return Err(Error::input(format!(
                "plan {} does not refine plan {k}",
                k + 1
            )));
        }
    }
    Ok(())
}

struct ReferenceData {
    slice: Vec<Vec<f64>>,
    bundle: Option<TrajectoryBundle>,
}

/// Reference bundle sampled at the grid nodes of `plan`.
fn reference_funnel(bundle: &TrajectoryBundle, plan: &DiscretizationPlan) -> Result<FunnelCloud> {
    let times = plan.time_grid();
    let slices = times
        .iter()
        .map(|&t| attainable_slice(bundle, t))
        .collect::<Result<_>>()?;
    Ok(FunnelCloud {
        dim: bundle.dim,
        times,
        slices,
    })
}

pub fn convergence_study(
    spec: &DynamicsSpec,
    instance: &ProblemInstance,
    plans: &[DiscretizationPlan],
    reference: &Reference,
    settings: &StudySettings,
) -> Result<Vec<StudyRow>> {
    instance.check_against(spec)?;
    if plans.is_empty() {
        return Err(Error::input("no plans to study"));
    }
    check_nested(plans)?;
    let reference = match reference {
        Reference::Points(points) => ReferenceData {
            slice: points.clone(),
            bundle: None,
        },
        Reference::Oracle { plan, substeps } => {
            let net = build_sigma_net(spec.m, plan.sigma, settings.net_cap)?;
            let bundle = build_bundle(
                spec,
                instance,
                plan,
                &net,
                BundleMode::Oracle {
                    substeps: *substeps,
                },
                settings.word_cap,
            )?;
            ReferenceData {
                slice: attainable_slice(&bundle, instance.theta)?,
                bundle: Some(bundle),
            }
        }
    };

    let chain = derive_constants(spec, instance);
    let mut omegas: HashMap<u64, OmegaModel> = HashMap::new();
    let mut rows = Vec::with_capacity(plans.len());
    for (k, plan) in plans.iter().enumerate() {
        let start = Instant::now();
        let mut row = StudyRow {
            plan: k,
            n_steps: plan.n_steps,
            q: plan.q,
            sigma: plan.sigma,
            beta: plan.beta,
            dt: plan.dt(),
            delta: plan.delta(),
            net_size: 0,
            words: None,
            slice_points: None,
            directed: None,
            slice_h: None,
            h_c: None,
            funnel_h: None,
            euler_bound: None,
            status: "ok".into(),
            wall_ms: 0.0,
        };
        if chain.alpha_star.is_finite() {
            let model = match omegas.entry(plan.beta.to_bits()) {
                Entry::Occupied(e) => e.into_mut(),
                Entry::Vacant(e) => e.insert(build_omega(
                    spec,
                    instance,
                    chain.alpha_star,
                    plan.beta,
                    &settings.omega,
                )?),
            };
            let omega = model.omega(chain.phi_star(plan.dt()));
            row.euler_bound = Some(chain.euler_bound(omega, plan.beta));
        }
        match fill_row(spec, instance, plan, &reference, settings, &mut row) {
            Ok(()) => {}
            Err(Error::Capacity(c)) => {
                row.status = format!("capacity: {c}");
            }
            Err(e) => return Err(e),
        }
        row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        rows.push(row);
    }
    Ok(rows)
}

fn fill_row(
    spec: &DynamicsSpec,
    instance: &ProblemInstance,
    plan: &DiscretizationPlan,
    reference: &ReferenceData,
    settings: &StudySettings,
    row: &mut StudyRow,
) -> Result<()> {
    let net: SigmaNet = build_sigma_net(spec.m, plan.sigma, settings.net_cap)?;
    row.net_size = net.len();
    let words = count_words(plan, instance, net.len(), settings.word_cap)?;
    row.words = Some(words);
    let (funnel, bundle) = if words <= settings.materialize_limit {
        let bundle = build_bundle(
            spec,
            instance,
            plan,
            &net,
            BundleMode::Euler,
            settings.word_cap,
        )?;
        (build_funnel(&bundle), Some(bundle))
    } else {
        (
            stream_funnel(spec, instance, plan, &net, settings.word_cap)?.0,
            None,
        )
    };
    let slice = funnel.slices.last().expect("funnel has a theta slice");
    row.slice_points = Some(slice.len());
    row.directed = Some(directed_hausdorff(
        &reference.slice,
        slice,
        NearestMethod::Auto,
    )?);
    row.slice_h = Some(hausdorff_points(&reference.slice, slice)?.hausdorff);
    if let Some(ref_bundle) = &reference.bundle {
        let ref_funnel = reference_funnel(ref_bundle, plan)?;
        row.funnel_h = Some(hausdorff_funnel(&ref_funnel, &funnel, settings.time_scale)?.hausdorff);
    }
    if let (Some(ref_bundle), Some(bundle)) = (&reference.bundle, &bundle) {
        let grid = merge_grids(&eval_grid(&ref_bundle.plan), &eval_grid(plan));
        row.h_c = Some(hausdorff_uniform(ref_bundle, bundle, &grid)?.hausdorff);
    }
    Ok(())
}

/// Study table as CSV with a header row; wall time is left out so the file
/// is reproducible.
pub fn write_study_csv<W: Write>(rows: &[StudyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(STUDY_HEADER)?;
    }
    w.flush()?;
    Ok(())
}

pub const STUDY_HEADER: [&str; 16] = [
    "plan",
    "n_steps",
    "q",
    "sigma",
    "beta",
    "dt",
    "delta",
    "net_size",
    "words",
    "slice_points",
    "directed",
    "slice_h",
    "h_c",
    "funnel_h",
    "euler_bound",
    "status",
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::Catalog;

    fn interval(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|k| vec![-1.0 + 2.0 * k as f64 / (n - 1) as f64])
            .collect()
    }

    fn settings() -> StudySettings {
        StudySettings {
            omega: OmegaSettings {
                density: 16,
                ..OmegaSettings::default()
            },
            ..StudySettings::default()
        }
    }

    #[test]
    fn integrator_directed_distance_decreases() {
        let spec = DynamicsSpec::catalog(Catalog::Integrator);
        let inst = ProblemInstance::new(0.0, 1.0, vec![0.0], 2.0, 1.0).unwrap();
        let plans: Vec<_> = [(2, 2), (4, 4), (4, 8)]
            .iter()
            .map(|&(n, q)| DiscretizationPlan::direct(&inst, 4.0, n, q, 1.0).unwrap())
            .collect();
        let rows = convergence_study(
            &spec,
            &inst,
            &plans,
            &Reference::Points(interval(101)),
            &settings(),
        )
        .unwrap();
        let d: Vec<f64> = rows.iter().map(|r| r.directed.unwrap()).collect();
        assert!(d.windows(2).all(|w| w[1] <= w[0]), "{d:?}");
        assert!(d[2] < d[0]);
        assert!(rows.iter().all(|r| r.euler_bound == Some(0.0)));
    }

    #[test]
    fn zero_budget_distances_vanish() {
        let spec = DynamicsSpec::catalog(Catalog::Affine);
        let inst = ProblemInstance::new(0.0, 1.0, vec![0.5], 2.0, 0.0).unwrap();
        let plans: Vec<_> = [1, 2, 4]
            .iter()
            .map(|&n| DiscretizationPlan::direct(&inst, 1.0, n, n, 1.0).unwrap())
            .collect();
        let fine = DiscretizationPlan::direct(&inst, 1.0, 4, 4, 1.0).unwrap();
        let reference = Reference::Oracle {
            plan: fine,
            substeps: 16,
        };
        let rows = convergence_study(&spec, &inst, &plans, &reference, &settings()).unwrap();
        for r in &rows {
            assert_eq!(r.words, Some(1));
            // Euler against RK4 on x' = x: the gap shrinks with dt but is not zero
            assert!(r.slice_h.unwrap() < 0.5);
        }
        let spec0 = DynamicsSpec::catalog(Catalog::Integrator);
        let rows = convergence_study(&spec0, &inst, &plans, &reference, &settings()).unwrap();
        for r in &rows {
            assert_eq!(
                (r.directed, r.slice_h, r.h_c, r.funnel_h),
                (Some(0.0), Some(0.0), Some(0.0), Some(0.0))
            );
        }
    }

    #[test]
    fn capacity_rows_are_marked() {
        let spec = DynamicsSpec::catalog(Catalog::Integrator);
        let inst = ProblemInstance::new(0.0, 1.0, vec![0.0], 2.0, 1.0).unwrap();
        let plans: Vec<_> = [(2, 2), (8, 8)]
            .iter()
            .map(|&(n, q)| DiscretizationPlan::direct(&inst, 4.0, n, q, 1.0).unwrap())
            .collect();
        let s = StudySettings {
            word_cap: 100,
            ..settings()
        };
        let rows =
            convergence_study(&spec, &inst, &plans, &Reference::Points(interval(11)), &s).unwrap();
        assert_eq!(rows[0].status, "ok");
        assert!(rows[1].status.starts_with("capacity"));
        assert_eq!(rows[1].directed, None);
    }

    #[test]
    fn rejects_non_nested_plans() {
        let spec = DynamicsSpec::catalog(Catalog::Integrator);
        let inst = ProblemInstance::new(0.0, 1.0, vec![0.0], 2.0, 1.0).unwrap();
        let plans = vec![
            DiscretizationPlan::direct(&inst, 2.0, 4, 2, 1.0).unwrap(),
            DiscretizationPlan::direct(&inst, 2.0, 6, 2, 1.0).unwrap(),
        ];
        assert!(convergence_study(
            &spec,
            &inst,
            &plans,
            &Reference::Points(interval(3)),
            &settings()
        )
        .is_err());
    }

    #[test]
    fn euler_bound_shrinks_when_halving_dt() {
        let spec = DynamicsSpec::catalog(Catalog::Affine);
        let inst = ProblemInstance::new(0.0, 1.0, vec![0.0], 2.0, 0.5).unwrap();
        let plans: Vec<_> = [4, 8, 16, 32]
            .iter()
            .map(|&n| DiscretizationPlan::direct(&inst, 2.0, n, 1, 2.0).unwrap())
            .collect();
        let s = StudySettings {
            word_cap: 10,
            omega: OmegaSettings {
                slope: Some(1.0),
                ..OmegaSettings::default()
            },
            ..StudySettings::default()
        };
        let rows = convergence_study(
            &spec,
            &inst,
            &plans,
            &Reference::Points(vec![vec![0.0]]),
            &s,
        )
        .unwrap();
        let b: Vec<f64> = rows.iter().map(|r| r.euler_bound.unwrap()).collect();
        for w in b.windows(2) {
            // phi* ~ dt^{1/2} for p = 2: one halving gives a factor near 2^{-1/2}
            assert!(w[1] < w[0] && w[1] / w[0] <= 0.72, "{b:?}");
        }
    }

    #[test]
    fn csv_has_fixed_header() {
        let mut buf = Vec::new();
        write_study_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap().trim(),
            STUDY_HEADER.join(",")
        );
    }
}
