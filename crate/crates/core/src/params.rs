//! Constant chain and discretization schedules.
//!
//! Everything here is closed-form except the modulus threshold, which needs an
//! estimate of the modulus of continuity of `f` (see [`crate::modulus`]).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::modulus::OmegaModel;
use crate::system::{DynamicsSpec, ProblemInstance};
use crate::vecmath::norm;

/// A-priori bound on `sup_t |x(t)|` over all admissible trajectories.
///
/// From the growth bound, `y = |x| + 1` satisfies `y' <= c (1 + |u|) y`, so
/// Gronwall and Hölder (`int |u| <= r T^{(p-1)/p}`) give
/// `alpha* = (|x0| + 1) exp(c [T + r T^{(p-1)/p}]) - 1`.
pub fn alpha_star(spec: &DynamicsSpec, instance: &ProblemInstance) -> f64 {
    let horizon = instance.horizon();
    let q = (instance.p - 1.0) / instance.p;
    let exponent = spec.constants.c * (horizon + instance.r * horizon.powf(q));
    (norm(&instance.x0) + 1.0) * exponent.exp() - 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsChain {
    pub alpha_star: f64,
    /// `max(theta - t0, 1)`.
    pub l_star: f64,
    /// `gamma1 T + 2 gamma2 r l*`.
    pub c0: f64,
    /// `2 gamma3 r^p exp(c0)`: truncation constant for the magnitude cap.
    pub kappa_star: f64,
    /// `gamma3 T exp(c0)`: grid-error constant.
    pub g1: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub c: f64,
    pub p: f64,
    pub r: f64,
    pub horizon: f64,
}

pub fn derive_constants(spec: &DynamicsSpec, instance: &ProblemInstance) -> ConstantsChain {
    let k = spec.constants;
    let horizon = instance.horizon();
    let l_star = horizon.max(1.0);
    let c0 = k.gamma1 * horizon + 2.0 * k.gamma2 * instance.r * l_star;
    ConstantsChain {
        alpha_star: alpha_star(spec, instance),
        l_star,
        c0,
        kappa_star: 2.0 * k.gamma3 * instance.r.powf(instance.p) * c0.exp(),
        g1: k.gamma3 * horizon * c0.exp(),
        gamma1: k.gamma1,
        gamma2: k.gamma2,
        c: k.c,
        p: instance.p,
        r: instance.r,
        horizon,
    }
}

impl ConstantsChain {
    /// `gamma1 + 2 gamma2 beta`.
    pub fn g_beta(&self, beta: f64) -> f64 {
        self.gamma1 + 2.0 * self.gamma2 * beta
    }

    /// Trajectory modulus `phi(dt) = c (alpha* + 1)(dt + r dt^{(p-1)/p})`.
    pub fn phi(&self, dt: f64) -> f64 {
        self.c * (self.alpha_star + 1.0) * (dt + self.r * dt.powf((self.p - 1.0) / self.p))
    }

    pub fn phi_star(&self, dt: f64) -> f64 {
        dt.max(self.phi(dt))
    }

    /// `(10 kappa* / eps)^{1/(p-1)}`.
    pub fn beta_star(&self, epsilon: f64) -> f64 {
        (10.0 * self.kappa_star / epsilon).powf(1.0 / (self.p - 1.0))
    }

    /// `eps / (10 g1)`; infinite when `g1 = 0`.
    pub fn delta_star(&self, epsilon: f64) -> f64 {
        epsilon / (10.0 * self.g1)
    }

    /// `eps / (10 g1 beta)`.
    pub fn sigma_star(&self, epsilon: f64, beta: f64) -> f64 {
        epsilon / (10.0 * self.g1 * beta)
    }

    /// `eps / (10 g1 R*)`.
    pub fn time_step_star(&self, epsilon: f64, r_star: f64) -> f64 {
        epsilon / (10.0 * self.g1 * r_star)
    }

    /// Euler-versus-trajectory bound `omega T exp(g(beta) T)`.
    pub fn euler_bound(&self, omega: f64, beta: f64) -> f64 {
        omega * self.horizon * (self.g_beta(beta) * self.horizon).exp()
    }
}

/// Values derived from a target accuracy. Infinite entries mean the
/// corresponding constraint does not bind.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonTargets {
    pub epsilon: f64,
    pub r_star: f64,
    pub beta_star: f64,
    /// Time-step bound from control averaging, `eps / (10 g1 R*)`.
    pub time_step_star: f64,
    pub delta_star: f64,
    pub sigma_star: f64,
    /// Largest step with `omega(phi*(dt), beta*) <= eps / (10 exp(g(beta*) T))`.
    pub omega_threshold: f64,
    /// Largest step with `phi*(dt) <= eps / 10`.
    pub phi_threshold: f64,
    /// `min(time_step_star, omega_threshold, phi_threshold, eps / 10)`.
    pub time_step_zero: f64,
}

/// Uniform time grid `t0 < ... < t_N = theta`, magnitude grid
/// `0 = r_0 < ... < r_q = beta`, and sphere-net mesh `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscretizationPlan {
    pub t0: f64,
    pub theta: f64,
    pub beta: f64,
    pub n_steps: usize,
    pub q: usize,
    pub sigma: f64,
    pub targets: Option<EpsilonTargets>,
}

impl DiscretizationPlan {
    pub fn direct(
        instance: &ProblemInstance,
        beta: f64,
        n_steps: usize,
        q: usize,
        sigma: f64,
    ) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::input(format!("beta must be positive, got {beta}")));
        }
        if n_steps == 0 || q == 0 {
            return Err(Error::input(format!(
                "n_steps and q must be at least 1 (got {n_steps}, {q})"
            )));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::input(format!("sigma must be positive, got {sigma}")));
        }
        Ok(DiscretizationPlan {
            t0: instance.t0,
            theta: instance.theta,
            beta,
            n_steps,
            q,
            sigma,
            targets: None,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.theta - self.t0
    }

    /// Time step `(theta - t0) / N`.
    pub fn dt(&self) -> f64 {
        self.horizon() / self.n_steps as f64
    }

    /// Magnitude step `beta / q`.
    pub fn delta(&self) -> f64 {
        self.beta / self.q as f64
    }

    /// Grid node `t_i`; `t_N` is exactly `theta`.
    pub fn time(&self, i: usize) -> f64 {
        grid_node(self.t0, self.theta, self.n_steps, i)
    }

    /// Magnitude level `r_j`; `r_q` is exactly `beta`.
    pub fn magnitude(&self, j: usize) -> f64 {
        if j == self.q {
            self.beta
        } else {
            self.beta * j as f64 / self.q as f64
        }
    }

    pub fn time_grid(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.time(i)).collect()
    }

    pub fn magnitude_grid(&self) -> Vec<f64> {
        (0..=self.q).map(|j| self.magnitude(j)).collect()
    }
}

/// Node `i` of the uniform partition of `[a, b]` into `n` pieces.
pub fn grid_node(a: f64, b: f64, n: usize, i: usize) -> f64 {
    if i == n {
        b
    } else {
        a + (b - a) * i as f64 / n as f64
    }
}

/// Upper limits on schedule-derived grid sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleCaps {
    pub max_steps: usize,
    pub max_levels: usize,
}

impl Default for ScheduleCaps {
    fn default() -> Self {
        ScheduleCaps {
            max_steps: 1_000_000,
            max_levels: 1_000_000,
        }
    }
}

/// Largest `x` in `(0, hi]` with `pred(x)`, for a predicate that is true near
/// zero and false past a single crossing. Returns `None` if `pred` never holds
/// on the probed range; `Some(INFINITY)` if it holds at `hi`.
fn largest_satisfying(hi: f64, pred: impl Fn(f64) -> bool) -> Option<f64> {
    if pred(hi) {
        return Some(f64::INFINITY);
    }
    let mut good = 0.0;
    let mut bad = hi;
    // Walk down geometrically for a satisfying point before bisecting.
    let mut probe = hi;
    for _ in 0..1100 {
        probe *= 0.5;
        if probe == 0.0 {
            break;
        }
        if pred(probe) {
            good = probe;
            break;
        }
        bad = probe;
    }
    if good == 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (good + bad);
        if mid <= good || mid >= bad {
            break;
        }
        if pred(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Some(good)
}

/// Smallest count `k >= 1` with `total / k <= target`.
fn conservative_count(total: f64, target: f64) -> f64 {
    if !target.is_finite() {
        return 1.0;
    }
    let mut k = (total / target).ceil().max(1.0);
    while total / k > target {
        k += 1.0;
    }
    k
}

/// Derive `(beta, N, q, sigma)` from a target accuracy.
///
/// `omega` must be built for `beta = chain.beta_star(epsilon)`; see
/// [`crate::modulus::build_omega`]. Step counts round up so that the realized
/// `dt` and `delta` never exceed their targets.
pub fn epsilon_schedule(
    chain: &ConstantsChain,
    instance: &ProblemInstance,
    epsilon: f64,
    r_star: f64,
    omega: &OmegaModel,
    caps: ScheduleCaps,
) -> Result<DiscretizationPlan> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::input(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if !(r_star.is_finite() && r_star > 0.0) {
        return Err(Error::input(format!("R* must be positive, got {r_star}")));
    }
    if chain.kappa_star <= 0.0 {
        return Err(Error::input(
            "epsilon mode needs kappa* > 0 (gamma3 > 0 and r > 0); use direct mode",
        ));
    }
    let horizon = instance.horizon();
    let beta = chain.beta_star(epsilon);
    let delta_star = chain.delta_star(epsilon);
    let sigma_star = chain.sigma_star(epsilon, beta);
    let time_step_star = chain.time_step_star(epsilon, r_star);

    let omega_target = epsilon / (10.0 * (chain.g_beta(beta) * horizon).exp());
    let omega_threshold = largest_satisfying(horizon, |dt| omega.omega(chain.phi_star(dt)) <= omega_target)
        .ok_or_else(|| {
            Error::input(format!(
                "modulus of continuity never drops below {omega_target:.3e}; refine the modulus sampling or supply an analytic slope"
            ))
        })?;
    let phi_threshold = largest_satisfying(horizon, |dt| chain.phi_star(dt) <= epsilon / 10.0)
        .expect("phi* vanishes at zero");
    let time_step_zero = time_step_star
        .min(omega_threshold)
        .min(phi_threshold)
        .min(epsilon / 10.0);

    let n_steps = conservative_count(horizon, time_step_zero);
    let q = conservative_count(beta, delta_star);
    if n_steps > caps.max_steps as f64 || q > caps.max_levels as f64 {
        return Err(Error::capacity(
            format!("schedule grid sizes (N = {n_steps}, q = {q})"),
            caps.max_steps.max(caps.max_levels) as u64,
            0,
            n_steps.max(q) as u64,
        ));
    }
    Ok(DiscretizationPlan {
        t0: instance.t0,
        theta: instance.theta,
        beta,
        n_steps: n_steps as usize,
        q: q as usize,
        // A single direction already covers the sphere at mesh 2.
        sigma: sigma_star.min(2.0),
        targets: Some(EpsilonTargets {
            epsilon,
            r_star,
            beta_star: beta,
            time_step_star,
            delta_star,
            sigma_star,
            omega_threshold,
            phi_threshold,
            time_step_zero,
        }),
    })
}
