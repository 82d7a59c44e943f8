//! Control systems `x' = f(t, x, u)`, problem instances and sampling
//! validators for the growth and local Lipschitz conditions.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::DynamicsExpr;
use crate::vecmath::{norm, sample_ball, sample_cube};

/// Ratios above `1 + RATIO_SLACK` count as violations; equality cases of the
/// bounds must not trip on rounding.
const RATIO_SLACK: f64 = 1e-12;

/// Built-in systems. Each ships expression sources and constants that hold
/// on the documented region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Catalog {
    /// `x' = u`, n = m = 1.
    Integrator,
    /// `x' = x + u`, n = m = 1.
    Affine,
    /// `x1' = x2 + u1`, `x2' = -x1 + u2`.
    Rotator,
    /// `x' = -x^3 + u`. The cubic term has no global linear growth bound, so
    /// the declared constants hold on `|x| <= 2` only.
    Saturating,
}

impl Catalog {
    pub const ALL: [Catalog; 4] = [
        Catalog::Integrator,
        Catalog::Affine,
        Catalog::Rotator,
        Catalog::Saturating,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Catalog::Integrator => "integrator",
            Catalog::Affine => "affine",
            Catalog::Rotator => "rotator",
            Catalog::Saturating => "saturating",
        }
    }

    pub fn from_name(name: &str) -> Option<Catalog> {
        Catalog::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn dims(self) -> (usize, usize) {
        match self {
            Catalog::Rotator => (2, 2),
            _ => (1, 1),
        }
    }

    pub fn sources(self) -> &'static [&'static str] {
        match self {
            Catalog::Integrator => &["u1"],
            Catalog::Affine => &["x1 + u1"],
            Catalog::Rotator => &["x2 + u1", "-x1 + u2"],
            Catalog::Saturating => &["-x1^3 + u1"],
        }
    }

    pub fn constants(self) -> Constants {
        match self {
            Catalog::Integrator => Constants::new(0.0, 0.0, 1.0, 1.0),
            Catalog::Affine | Catalog::Rotator => Constants::new(1.0, 0.0, 1.0, 1.0),
            Catalog::Saturating => Constants::new(12.0, 0.0, 1.0, 3.0),
        }
    }

    /// State radius on which [`Catalog::constants`] are valid, if limited.
    pub fn state_radius(self) -> Option<f64> {
        match self {
            Catalog::Saturating => Some(2.0),
            _ => None,
        }
    }

    #[inline]
    fn eval(self, x: &[f64], u: &[f64], out: &mut [f64]) {
        match self {
            Catalog::Integrator => out[0] = u[0],
            Catalog::Affine => out[0] = x[0] + u[0],
            Catalog::Rotator => {
                out[0] = x[1] + u[0];
                out[1] = -x[0] + u[1];
            }
            Catalog::Saturating => out[0] = -(x[0] * x[0] * x[0]) + u[0],
        }
    }
}

impl fmt::Display for Catalog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Constants of the local Lipschitz condition (`gamma1..3`) and the growth
/// condition `|f| <= c (|x| + 1)(|u| + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub c: f64,
}

impl Constants {
    pub fn new(gamma1: f64, gamma2: f64, gamma3: f64, c: f64) -> Self {
        Constants {
            gamma1,
            gamma2,
            gamma3,
            c,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rhs {
    Catalog(Catalog),
    Expr(DynamicsExpr),
}

/// An immutable right-hand side with its declared constants.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsSpec {
    pub label: String,
    pub n: usize,
    pub m: usize,
    pub rhs: Rhs,
    pub constants: Constants,
}

impl DynamicsSpec {
    pub fn new(
        label: impl Into<String>,
        n: usize,
        m: usize,
        rhs: Rhs,
        constants: Constants,
    ) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::input(format!(
                "dimensions must be positive (n = {n}, m = {m})"
            )));
        }
        let Constants {
            gamma1,
            gamma2,
            gamma3,
            c,
        } = constants;
        for (name, v) in [("gamma1", gamma1), ("gamma2", gamma2), ("gamma3", gamma3)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::input(format!(
                    "{name} must be a finite nonnegative number, got {v}"
                )));
            }
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::input(format!(
                "growth constant c must be positive, got {c}"
            )));
        }
        match &rhs {
            Rhs::Catalog(cat) => {
                if cat.dims() != (n, m) {
                    return Err(Error::input(format!(
                        "catalog system `{cat}` has dimensions {:?}, declared ({n}, {m})",
                        cat.dims()
                    )));
                }
            }
            Rhs::Expr(e) => {
                if e.n != n || e.m != m || e.components.len() != n {
                    return Err(Error::input(
                        "expression dimensions do not match the declared (n, m)",
                    ));
                }
            }
        }
        Ok(DynamicsSpec {
            label: label.into(),
            n,
            m,
            rhs,
            constants,
        })
    }

    pub fn catalog(cat: Catalog) -> Self {
        let (n, m) = cat.dims();
        DynamicsSpec::new(cat.name(), n, m, Rhs::Catalog(cat), cat.constants())
            .expect("catalog entries are valid")
    }

    /// Build from per-component expression sources.
    pub fn from_sources<S: AsRef<str>>(
        label: impl Into<String>,
        sources: &[S],
        n: usize,
        m: usize,
        constants: Constants,
    ) -> Result<Self> {
        let e = DynamicsExpr::parse(sources, n, m)?;
        DynamicsSpec::new(label, n, m, Rhs::Expr(e), constants)
    }

    /// Expression sources of the right-hand side.
    pub fn sources(&self) -> Vec<String> {
        match &self.rhs {
            Rhs::Catalog(c) => c.sources().iter().map(|s| s.to_string()).collect(),
            Rhs::Expr(e) => e.sources(),
        }
    }

    /// Evaluate into `out` without dimension checks; reports the first
    /// non-finite component.
    #[inline]
    pub fn eval_into(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.rhs {
            Rhs::Catalog(c) => c.eval(x, u, out),
            Rhs::Expr(e) => {
                for (o, comp) in out.iter_mut().zip(&e.components) {
                    *o = comp.eval(t, x, u);
                }
            }
        }
        if let Some(k) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation {
                component: k + 1,
                message: format!("f_{}(t = {t}, x = {x:?}, u = {u:?}) = {}", k + 1, out[k]),
            });
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n || u.len() != self.m {
            return Err(Error::input(format!(
                "dimension mismatch: expected x in R^{} and u in R^{}, got {} and {}",
                self.n,
                self.m,
                x.len(),
                u.len()
            )));
        }
        let mut out = vec![0.0; self.n];
        self.eval_into(t, x, u, &mut out)?;
        Ok(out)
    }
}

/// `f(t, x, u)` with dimension checks.
pub fn eval_dynamics(spec: &DynamicsSpec, t: f64, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    spec.eval(t, x, u)
}

/// Horizon, initial state and the `L_p` budget `||u||_p <= r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemInstance {
    pub t0: f64,
    pub theta: f64,
    pub x0: Vec<f64>,
    pub p: f64,
    pub r: f64,
}

impl ProblemInstance {
    /// `r = 0` is accepted: it admits only the zero control.
    pub fn new(t0: f64, theta: f64, x0: Vec<f64>, p: f64, r: f64) -> Result<Self> {
        if !(t0.is_finite() && theta.is_finite() && theta > t0) {
            return Err(Error::input(format!(
                "need t0 < theta, got [{t0}, {theta}]"
            )));
        }
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::input(format!(
                "norm exponent p must exceed 1, got {p}"
            )));
        }
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::input(format!(
                "budget r must be nonnegative, got {r}"
            )));
        }
        if x0.is_empty() || x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("x0 must be a nonempty finite vector"));
        }
        Ok(ProblemInstance {
            t0,
            theta,
            x0,
            p,
            r,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.theta - self.t0
    }

    pub fn check_against(&self, spec: &DynamicsSpec) -> Result<()> {
        if self.x0.len() != spec.n {
            return Err(Error::input(format!(
                "x0 has dimension {}, system `{}` has n = {}",
                self.x0.len(),
                spec.label,
                spec.n
            )));
        }
        Ok(())
    }
}

/// Axis-aligned sampling region for the growth check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingBox {
    /// Half-width of the state cube.
    pub x_half: f64,
    /// Half-width of the control cube.
    pub u_half: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub samples: usize,
    pub declared_c: f64,
    /// Largest observed `|f| / ((|x| + 1)(|u| + 1))`.
    pub max_ratio: f64,
    /// Samples where the ratio exceeded the declared `c`.
    pub violations: usize,
}

impl GrowthReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Empirical check of `|f(t,x,u)| <= c (|x|+1)(|u|+1)` on `[t0, theta] x box`.
pub fn validate_growth(
    spec: &DynamicsSpec,
    instance: &ProblemInstance,
    region: &SamplingBox,
    samples: usize,
    seed: u64,
) -> Result<GrowthReport> {
    if samples == 0 {
        return Err(Error::input("samples must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = spec.constants.c;
    let mut out = vec![0.0; spec.n];
    let mut max_ratio: f64 = 0.0;
    let mut violations = 0;
    for _ in 0..samples {
        let t = rng.gen_range(instance.t0..=instance.theta);
        let x = sample_cube(&mut rng, spec.n, region.x_half);
        let u = sample_cube(&mut rng, spec.m, region.u_half);
        spec.eval_into(t, &x, &u, &mut out)?;
        let ratio = norm(&out) / ((norm(&x) + 1.0) * (norm(&u) + 1.0));
        max_ratio = max_ratio.max(ratio);
        if ratio > c * (1.0 + RATIO_SLACK) {
            violations += 1;
        }
    }
    Ok(GrowthReport {
        samples,
        declared_c: c,
        max_ratio,
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub samples: usize,
    /// Largest observed ratio of `|f1 - f2|` to the declared bound.
    pub max_ratio: f64,
    pub violations: usize,
    /// Pairs with a zero bound and zero difference (skipped).
    pub degenerate: usize,
}

impl LipschitzReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Empirical check of the local Lipschitz condition on the cylinder
/// `[t0, theta] x B_n(alpha_star)` with controls in `B_m(beta)`.
///
/// Pairs rotate through three shapes: shared control, shared state, and fully
/// independent, so that each term of the bound is probed on its own.
pub fn validate_lipschitz(
    spec: &DynamicsSpec,
    instance: &ProblemInstance,
    alpha_star: f64,
    beta: f64,
    samples: usize,
    seed: u64,
) -> Result<LipschitzReport> {
    if !(alpha_star > 0.0 && beta > 0.0) {
        return Err(Error::input("alpha_star and beta must be positive"));
    }
    if samples == 0 {
        return Err(Error::input("samples must be at least 1"));
    }
    let Constants {
        gamma1,
        gamma2,
        gamma3,
        ..
    } = spec.constants;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f1 = vec![0.0; spec.n];
    let mut f2 = vec![0.0; spec.n];
    let mut report = LipschitzReport {
        samples,
        max_ratio: 0.0,
        violations: 0,
        degenerate: 0,
    };
    for k in 0..samples {
        let t = rng.gen_range(instance.t0..=instance.theta);
        let x1 = sample_ball(&mut rng, spec.n, alpha_star);
        let u1 = sample_ball(&mut rng, spec.m, beta);
        let (x2, u2) = match k % 3 {
            0 => (sample_ball(&mut rng, spec.n, alpha_star), u1.clone()),
            1 => (x1.clone(), sample_ball(&mut rng, spec.m, beta)),
            _ => (
                sample_ball(&mut rng, spec.n, alpha_star),
                sample_ball(&mut rng, spec.m, beta),
            ),
        };
        spec.eval_into(t, &x1, &u1, &mut f1)?;
        spec.eval_into(t, &x2, &u2, &mut f2)?;
        let num = crate::vecmath::dist(&f1, &f2);
        let den = (gamma1 + gamma2 * (norm(&u1) + norm(&u2))) * crate::vecmath::dist(&x1, &x2)
            + gamma3 * crate::vecmath::dist(&u1, &u2);
        if den == 0.0 {
            if num == 0.0 {
                report.degenerate += 1;
            } else {
                report.violations += 1;
                report.max_ratio = f64::INFINITY;
            }
            continue;
        }
        let ratio = num / den;
        report.max_ratio = report.max_ratio.max(ratio);
        if ratio > 1.0 + RATIO_SLACK {
            report.violations += 1;
        }
    }
    Ok(report)
}
