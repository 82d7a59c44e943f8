//! Euler broken lines and fixed-step RK4 reference trajectories for a
//! single control word, plus an empirical check of the trajectory modulus.

use serde::Serialize;

use crate::control::ControlWord;
use crate::error::{Error, Result};
use crate::params::{alpha_star, grid_node, DiscretizationPlan};
use crate::sphere::SigmaNet;
use crate::system::{DynamicsSpec, ProblemInstance};
use crate::vecmath::{dist, norm};

/// States with norm above `DIVERGENCE_FACTOR * (alpha* + 1)` abort a run.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

pub const DEFAULT_SUBSTEPS: usize = 32;

pub(crate) fn divergence_limit(spec: &DynamicsSpec, instance: &ProblemInstance) -> f64 {
    DIVERGENCE_FACTOR * (alpha_star(spec, instance) + 1.0)
}

fn check_state(x: &[f64], limit: f64, step: usize) -> Result<()> {
    let nx = norm(x);
    if !nx.is_finite() || nx > limit {
        return Err(Error::Divergence {
            step,
            word: None,
            norm: nx,
        });
    }
    Ok(())
}

/// Euler broken line over the plan's time grid. `nodes` holds
/// `z_0, ..., z_N` back to back.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EulerPolyline {
    pub word_index: usize,
    pub dim: usize,
    pub t0: f64,
    pub theta: f64,
    pub steps: usize,
    pub nodes: Vec<f64>,
}

impl EulerPolyline {
    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn time(&self, i: usize) -> f64 {
        grid_node(self.t0, self.theta, self.steps, i)
    }

    pub fn endpoint(&self) -> &[f64] {
        self.node(self.steps)
    }

    /// Linear interpolation between nodes. Grid nodes are returned exactly.
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        let h = (self.theta - self.t0) / self.steps as f64;
        let i = (((t - self.t0) / h).floor().max(0.0) as usize).min(self.steps - 1);
        let (ta, tb) = (self.time(i), self.time(i + 1));
        if t == ta {
            return self.node(i).to_vec();
        }
        if t == tb {
            return self.node(i + 1).to_vec();
        }
        let s = (t - ta) / (tb - ta);
        self.node(i)
            .iter()
            .zip(self.node(i + 1))
            .map(|(a, b)| a + s * (b - a))
            .collect()
    }
}

/// Euler nodes for `word`, written into `nodes` (length `(N+1) n`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn euler_nodes_into(
    spec: &DynamicsSpec,
    instance: &ProblemInstance,
    plan: &DiscretizationPlan,
    net: &SigmaNet,
    word: &ControlWord,
    limit: f64,
    nodes: &mut [f64],
    scratch: &mut [f64],
) -> Result<()> {
    let n = spec.n;
    let dt = plan.dt();
    let mut u = vec![0.0; spec.m];
    nodes[..n].copy_from_slice(&instance.x0);
    for i in 0..plan.n_steps {
        word.value_into(i, plan, net, &mut u);
        let (done, rest) = nodes.split_at_mut((i + 1) * n);
        let z = &done[i * n..];
        spec.eval_into(plan.time(i), z, &u, scratch)?;
        for k in 0..n {
            rest[k] = z[k] + dt * scratch[k];
        }
        check_state(&rest[..n], limit, i + 1)?;
    }
    Ok(())
}

pub fn euler_broken_line(
    spec: &DynamicsSpec,
    instance: &ProblemInstance,
    plan: &DiscretizationPlan,
    net: &SigmaNet,
    word: &ControlWord,
) -> Result<EulerPolyline> {
    check_word(spec, instance, plan, net, word)?;
    let n = spec.n;
    let mut nodes = vec![0.0; (plan.n_steps + 1) * n];
    let mut scratch = vec![0.0; n];
    let limit = divergence_limit(spec, instance);
    euler_nodes_into(
        spec,
        instance,
        plan,
        net,
        word,
        limit,
        &mut nodes,
        &mut scratch,
    )?;
    Ok(EulerPolyline {
        word_index: 0,
        dim: n,
        t0: plan.t0,
        theta: plan.theta,
        steps: plan.n_steps,
        nodes,
    })
}

fn check_word(
    spec: &DynamicsSpec,
    instance: &ProblemInstance,
    plan: &DiscretizationPlan,
    net: &SigmaNet,
    word: &ControlWord,
) -> Result<()> {
    instance.check_against(spec)?;
    if net.m != spec.m {
        return Err(Error::input(format!(
            "net dimension {} does not match m = {}",
            net.m, spec.m
        )));
    }
    if word.len() != plan.n_steps || word.directions.len() != plan.n_steps {
        return Err(Error::input(format!(
            "word length {} does not match N = {}",
            word.len(),
            plan.n_steps
        )));
    }
    if word.magnitudes.iter().any(|&j| j as usize > plan.q)
        || word.directions.iter().any(|&l| l as usize >= net.len())
    {
        return Err(Error::input("word index out of range"));
    }
    Ok(())
}

/// Densely sampled reference trajectory. Samples `k * substeps` are the
/// grid nodes `t_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledTrajectory {
    pub word_index: usize,
    pub dim: usize,
    pub steps: usize,
    pub substeps: usize,
    pub order: u32,
    pub times: Vec<f64>,
    pub states: Vec<f64>,
}

impl SampledTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    /// State at grid node `t_i`.
    pub fn node(&self, i: usize) -> &[f64] {
        self.state(i * self.substeps)
    }

    pub fn endpoint(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// Linear interpolation between samples; samples are returned exactly.
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        let k = self.times.partition_point(|&s| s < t).min(self.len() - 1);
        if self.times[k] == t || k == 0 {
            return self.state(k).to_vec();
        }
        let (ta, tb) = (self.times[k - 1], self.times[k]);
        let s = (t - ta) / (tb - ta);
        self.state(k - 1)
            .iter()
            .zip(self.state(k))
            .map(|(a, b)| a + s * (b - a))
            .collect()
    }
}

/// Classical RK4 with `substeps` equal steps per grid interval; the
/// control is constant on each interval.
pub fn integrate_trajectory(
    spec: &DynamicsSpec,
    instance: &ProblemInstance,
    plan: &DiscretizationPlan,
    net: &SigmaNet,
    word: &ControlWord,
    substeps: usize,
) -> Result<SampledTrajectory> {
    if substeps == 0 {
        return Err(Error::input("substeps must be at least 1"));
    }
    check_word(spec, instance, plan, net, word)?;
    let n = spec.n;
    let limit = divergence_limit(spec, instance);
    let total = plan.n_steps * substeps + 1;
    let mut times = Vec::with_capacity(total);
    let mut states = Vec::with_capacity(total * n);
    let mut x = instance.x0.clone();
    let mut u = vec![0.0; spec.m];
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    times.push(plan.t0);
    states.extend_from_slice(&x);
    for i in 0..plan.n_steps {
        word.value_into(i, plan, net, &mut u);
        let (ta, tb) = (plan.time(i), plan.time(i + 1));
        for s in 0..substeps {
            let t = grid_node(ta, tb, substeps, s);
            let t_next = grid_node(ta, tb, substeps, s + 1);
            let h = t_next - t;
            spec.eval_into(t, &x, &u, &mut k1)?;
            for d in 0..n {
                tmp[d] = x[d] + 0.5 * h * k1[d];
            }
            spec.eval_into(t + 0.5 * h, &tmp, &u, &mut k2)?;
            for d in 0..n {
                tmp[d] = x[d] + 0.5 * h * k2[d];
            }
            spec.eval_into(t + 0.5 * h, &tmp, &u, &mut k3)?;
            for d in 0..n {
                tmp[d] = x[d] + h * k3[d];
            }
            spec.eval_into(t_next, &tmp, &u, &mut k4)?;
            for d in 0..n {
                x[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
            }
            check_state(&x, limit, i * substeps + s + 1)?;
            times.push(t_next);
            states.extend_from_slice(&x);
        }
    }
    Ok(SampledTrajectory {
        word_index: 0,
        dim: n,
        steps: plan.n_steps,
        substeps,
        order: 4,
        times,
        states,
    })
}

/// Endpoint differences under substep doubling. For a fourth-order method
/// `ratio` tends to 16 while the differences stay above round-off.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub substeps: usize,
    pub coarse_gap: f64,
    pub fine_gap: f64,
    pub ratio: f64,
}

pub fn oracle_convergence(
    spec: &DynamicsSpec,
    instance: &ProblemInstance,
    plan: &DiscretizationPlan,
    net: &SigmaNet,
    word: &ControlWord,
    substeps: usize,
) -> Result<ConvergenceReport> {
    let ends: Vec<Vec<f64>> = [1, 2, 4]
        .iter()
        .map(|k| {
            integrate_trajectory(spec, instance, plan, net, word, substeps * k)
                .map(|t| t.endpoint().to_vec())
        })
        .collect::<Result<_>>()?;
    let coarse_gap = dist(&ends[0], &ends[1]);
    let fine_gap = dist(&ends[1], &ends[2]);
    Ok(ConvergenceReport {
        substeps,
        coarse_gap,
        fine_gap,
        ratio: coarse_gap / fine_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusReport {
    pub pairs: usize,
    pub max_ratio: f64,
    pub violations: usize,
    /// Sample times of the worst pair.
    pub worst: Option<(f64, f64)>,
}

impl ModulusReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Check `|x(t1) - x(t2)| <= phi(|t1 - t2|)` over all pairs of a decimated
/// sample grid of at most `max_samples` points (grid nodes always kept).
pub fn modulus_check(
    traj: &SampledTrajectory,
    phi: &dyn Fn(f64) -> f64,
    max_samples: usize,
) -> ModulusReport {
    let stride = traj.len().div_ceil(max_samples.max(2)).max(1);
    let mut idx: Vec<usize> = (0..traj.len()).step_by(stride).collect();
    idx.extend((0..=traj.steps).map(|i| i * traj.substeps));
    idx.sort_unstable();
    idx.dedup();

    let mut report = ModulusReport {
        pairs: 0,
        max_ratio: 0.0,
        violations: 0,
        worst: None,
    };
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            let gap = dist(traj.state(i), traj.state(j));
            let bound = phi((traj.times[j] - traj.times[i]).abs());
            report.pairs += 1;
            let ratio = if gap == 0.0 {
                0.0
            } else if bound > 0.0 {
                gap / bound
            } else {
                f64::INFINITY
            };
            if gap > bound * (1.0 + 1e-12) {
                report.violations += 1;
            }
            if ratio > report.max_ratio {
                report.max_ratio = ratio;
                report.worst = Some((traj.times[i], traj.times[j]));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_constants;
    use crate::sphere::{build_sigma_net, DEFAULT_NET_CAP};
    use crate::system::{Catalog, Constants};

    fn scalar(source: &str, c: Constants) -> DynamicsSpec {
        DynamicsSpec::from_sources("test", &[source], 1, 1, c).unwrap()
    }

    fn plan_for(inst: &ProblemInstance, n: usize) -> DiscretizationPlan {
        DiscretizationPlan::direct(inst, 1.0, n, 1, 1.0).unwrap()
    }

    fn net1() -> SigmaNet {
        build_sigma_net(1, 1.0, DEFAULT_NET_CAP).unwrap()
    }

    fn plus_one(n: usize) -> ControlWord {
        ControlWord {
            magnitudes: vec![1; n],
            directions: vec![0; n],
        }
    }

    #[test]
    fn integrator_euler_is_exact() {
        let spec = DynamicsSpec::catalog(Catalog::Integrator);
        let inst = ProblemInstance::new(0.0, 1.0, vec![0.0], 2.0, 1.0).unwrap();
        let plan = plan_for(&inst, 2);
        let z = euler_broken_line(&spec, &inst, &plan, &net1(), &plus_one(2)).unwrap();
        assert_eq!(z.nodes, vec![0.0, 0.5, 1.0]);
        let zero = euler_broken_line(&spec, &inst, &plan, &net1(), &ControlWord::zero(2)).unwrap();
        assert_eq!(zero.nodes, vec![0.0; 3]);
    }

    #[test]
    fn exponential_growth_recurrence() {
        let spec = scalar("x1 + 0*u1", Constants::new(1.0, 0.0, 1.0, 1.0));
        let inst = ProblemInstance::new(0.0, 1.0, vec![1.0], 2.0, 1.0).unwrap();
        let z = euler_broken_line(
            &spec,
            &inst,
            &plan_for(&inst, 2),
            &net1(),
            &ControlWord::zero(2),
        )
        .unwrap();
        assert_eq!(z.nodes, vec![1.0, 1.5, 2.25]);

        let plan = plan_for(&inst, 1);
        let x =
            integrate_trajectory(&spec, &inst, &plan, &net1(), &ControlWord::zero(1), 64).unwrap();
        assert!((x.endpoint()[0] - std::f64::consts::E).abs() < 1e-8);
        assert_eq!(x.len(), 65);
    }

    #[test]
    fn recurrence_residual_is_zero() {
        let spec = DynamicsSpec::catalog(Catalog::Rotator);
        let inst = ProblemInstance::new(0.0, 2.0, vec![0.3, -0.7], 2.0, 1.0).unwrap();
        let plan = DiscretizationPlan::direct(&inst, 2.0, 5, 2, 0.7).unwrap();
        let net = build_sigma_net(2, 0.7, DEFAULT_NET_CAP).unwrap();
        let word = ControlWord {
            magnitudes: vec![1, 0, 2, 0, 1],
            directions: vec![2, 0, 1, 0, net.len() as u32 - 1],
        };
        let z = euler_broken_line(&spec, &inst, &plan, &net, &word).unwrap();
        assert_eq!(z.node(0), &inst.x0[..]);
        for i in 0..plan.n_steps {
            let f = spec
                .eval(plan.time(i), z.node(i), &word.value(i, &plan, &net))
                .unwrap();
            for (d, fd) in f.iter().enumerate() {
                assert_eq!(z.node(i + 1)[d], z.node(i)[d] + plan.dt() * fd);
            }
        }
    }

    #[test]
    fn interpolation_and_nodes() {
        let spec = DynamicsSpec::catalog(Catalog::Integrator);
        let inst = ProblemInstance::new(0.0, 1.0, vec![0.0], 2.0, 1.0).unwrap();
        let plan = plan_for(&inst, 2);
        let z = euler_broken_line(&spec, &inst, &plan, &net1(), &plus_one(2)).unwrap();
        assert_eq!(z.value_at(0.25), vec![0.25]);
        assert_eq!(z.value_at(1.0), vec![1.0]);
        let x = integrate_trajectory(&spec, &inst, &plan, &net1(), &plus_one(2), 3).unwrap();
        assert_eq!(x.node(1), &[0.5]);
        assert_eq!(x.times[3], 0.5);
        assert_eq!(*x.times.last().unwrap(), 1.0);
    }

    #[test]
    fn integrator_oracle_exact_for_any_substeps() {
        let spec = DynamicsSpec::catalog(Catalog::Integrator);
        let inst = ProblemInstance::new(0.0, 1.0, vec![0.0], 2.0, 1.0).unwrap();
        for s in [1, 2, 7, 32] {
            let x =
                integrate_trajectory(&spec, &inst, &plan_for(&inst, 1), &net1(), &plus_one(1), s)
                    .unwrap();
            assert!((x.endpoint()[0] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cubic_decay_is_monotone() {
        let spec = DynamicsSpec::catalog(Catalog::Saturating);
        let inst = ProblemInstance::new(0.0, 1.0, vec![2.0], 2.0, 1.0).unwrap();
        let x = integrate_trajectory(
            &spec,
            &inst,
            &plan_for(&inst, 4),
            &net1(),
            &ControlWord::zero(4),
            32,
        )
        .unwrap();
        for k in 1..x.len() {
            assert!(x.state(k)[0].is_finite());
            assert!(x.state(k)[0] < x.state(k - 1)[0]);
        }
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let spec = scalar("x1^2 + u1", Constants::new(1.0, 0.0, 1.0, 1.0));
        let inst = ProblemInstance::new(0.0, 1.0, vec![1.0], 2.0, 1.0).unwrap();
        let plan = DiscretizationPlan::direct(&inst, 1.0, 4, 1, 1.0).unwrap();
        let big = ProblemInstance::new(0.0, 1.0, vec![50.0], 2.0, 1.0).unwrap();
        let plan_big = DiscretizationPlan::direct(&big, 1.0, 4, 1, 1.0).unwrap();
        assert!(euler_broken_line(&spec, &inst, &plan, &net1(), &ControlWord::zero(4)).is_ok());
        match euler_broken_line(&spec, &big, &plan_big, &net1(), &ControlWord::zero(4)) {
            Err(Error::Divergence { step, .. }) => assert!(step >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn oracle_converges_at_fourth_order() {
        let spec = DynamicsSpec::catalog(Catalog::Saturating);
        let inst = ProblemInstance::new(0.0, 1.0, vec![1.5], 2.0, 1.0).unwrap();
        let plan = plan_for(&inst, 2);
        let rep = oracle_convergence(&spec, &inst, &plan, &net1(), &plus_one(2), 4).unwrap();
        assert!(rep.ratio > 12.0 && rep.ratio < 20.0, "{rep:?}");
    }

    #[test]
    fn determinism() {
        let spec = DynamicsSpec::catalog(Catalog::Saturating);
        let inst = ProblemInstance::new(0.0, 1.0, vec![0.4], 2.0, 1.0).unwrap();
        let plan = plan_for(&inst, 3);
        let a = integrate_trajectory(&spec, &inst, &plan, &net1(), &plus_one(3), 9).unwrap();
        let b = integrate_trajectory(&spec, &inst, &plan, &net1(), &plus_one(3), 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn modulus_examples() {
        let spec = DynamicsSpec::catalog(Catalog::Integrator);
        let inst = ProblemInstance::new(0.0, 1.0, vec![0.0], 2.0, 1.0).unwrap();
        let chain = derive_constants(&spec, &inst);
        assert!((chain.alpha_star - (2f64.exp() - 1.0)).abs() < 1e-12);
        let plan = plan_for(&inst, 4);

        let still =
            integrate_trajectory(&spec, &inst, &plan, &net1(), &ControlWord::zero(4), 8).unwrap();
        let rep = modulus_check(&still, &|d| chain.phi(d), 64);
        assert!(rep.passed() && rep.max_ratio == 0.0);

        let ramp = integrate_trajectory(&spec, &inst, &plan, &net1(), &plus_one(4), 8).unwrap();
        let rep = modulus_check(&ramp, &|d| chain.phi(d), 64);
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.pairs > 100);

        let rep = modulus_check(&ramp, &|d| 1e-3 * chain.phi(d), 64);
        assert!(!rep.passed());
        assert!(rep.max_ratio > 1.0);
    }
}
