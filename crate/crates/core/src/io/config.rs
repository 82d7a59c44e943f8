//! TOML run configuration.
//!
//! ```toml
//! seed = 7
//!
//! [system]
//! catalog = "integrator"          # or: rhs = ["x2 + u1", "-x1 + u2"], n = 2, m = 2
//! # constants = { gamma1 = 0.0, gamma2 = 0.0, gamma3 = 1.0, c = 1.0 }
//!
//! [instance]
//! theta = 1.0
//! x0 = [0.0]
//! p = 2.0
//! r = 1.0
//!
//! [plan]                          # direct mode ...
//! beta = 1.0
//! n_steps = 1
//! q = 1
//! sigma = 1.0
//! # epsilon = 2.0                 # ... or epsilon mode
//! # r_star = 1.0
//! ```
//!
//! Optional tables: `[oracle]`, `[caps]`, `[omega]`, `[study]`, `[outputs]`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::DEFAULT_WORD_CAP;
use crate::error::{Error, Result};
use crate::modulus::OmegaSettings;
use crate::params::ScheduleCaps;
use crate::sphere::DEFAULT_NET_CAP;
use crate::system::{Catalog, Constants, DynamicsSpec, ProblemInstance};
use crate::trajectory::DEFAULT_SUBSTEPS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub seed: u64,
    pub system: RawSystem,
    pub instance: RawInstance,
    pub plan: RawPlan,
    #[serde(default)]
    pub oracle: RawOracle,
    #[serde(default)]
    pub caps: RawCaps,
    #[serde(default)]
    pub omega: RawOmega,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<RawStudy>,
    #[serde(default)]
    pub outputs: RawOutputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSystem {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhs: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<RawConstants>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConstants {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInstance {
    #[serde(default)]
    pub t0: f64,
    pub theta: f64,
    pub x0: Vec<f64>,
    pub p: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPlan {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOracle {
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

fn default_substeps() -> usize {
    DEFAULT_SUBSTEPS
}

impl Default for RawOracle {
    fn default() -> Self {
        RawOracle {
            substeps: DEFAULT_SUBSTEPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawCaps {
    pub words: u64,
    pub net: u64,
    pub max_steps: usize,
    pub max_levels: usize,
}

impl Default for RawCaps {
    fn default() -> Self {
        let s = ScheduleCaps::default();
        RawCaps {
            words: DEFAULT_WORD_CAP,
            net: DEFAULT_NET_CAP,
            max_steps: s.max_steps,
            max_levels: s.max_levels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOmega {
    #[serde(default = "default_density")]
    pub density: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
}

fn default_density() -> usize {
    OmegaSettings::default().density
}

impl Default for RawOmega {
    fn default() -> Self {
        RawOmega {
            density: default_density(),
            slope: None,
        }
    }
}

/// One refinement level; `beta` comes from `[plan]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLevel {
    pub n_steps: usize,
    pub q: usize,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawStudy {
    pub levels: Vec<RawLevel>,
    /// Reference oracle plan; defaults to the finest level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<RawLevel>,
    #[serde(default = "default_materialize")]
    pub materialize_limit: u64,
    #[serde(default = "one")]
    pub time_scale: f64,
}

fn default_materialize() -> u64 {
    200_000
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawOutputs {
    /// Not echoed, so manifests do not depend on where a run was written.
    #[serde(skip_serializing)]
    pub dir: PathBuf,
    pub bundle: bool,
    pub funnel: bool,
    pub distance: bool,
}

impl Default for RawOutputs {
    fn default() -> Self {
        RawOutputs {
            dir: PathBuf::from("out"),
            bundle: true,
            funnel: true,
            distance: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum PlanMode {
    Direct {
        beta: f64,
        n_steps: usize,
        q: usize,
        sigma: f64,
    },
    Epsilon {
        epsilon: f64,
        r_star: f64,
    },
}

/// Validated configuration. `raw` is the parsed file with defaults filled
/// in, kept for echoing into the manifest.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub seed: u64,
    pub spec: DynamicsSpec,
    pub instance: ProblemInstance,
    pub plan: PlanMode,
    pub oracle_substeps: usize,
    pub word_cap: u64,
    pub net_cap: u64,
    pub schedule_caps: ScheduleCaps,
    pub omega: OmegaSettings,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.raw.seed = seed;
        self.omega.seed = seed;
    }

    pub fn set_word_cap(&mut self, cap: u64) {
        self.word_cap = cap;
        self.raw.caps.words = cap;
    }

    pub fn set_out_dir(&mut self, dir: impl Into<PathBuf>) {
        self.out_dir = dir.into();
        self.raw.outputs.dir = self.out_dir.clone();
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        let at = e
            .span()
            .map(|s| {
                let line = text[..s.start].matches('\n').count() + 1;
                format!("line {line}")
            })
            .unwrap_or_else(|| "<root>".into());
        Error::config(at, message)
    })?;
    validate(raw)
}

fn field<T>(v: Option<T>, path: &str) -> Result<T> {
    v.ok_or_else(|| Error::config(path, "missing key"))
}

fn at(path: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Input(m) => Error::config(path, m),
        other => other,
    }
}

fn validate(raw: RawConfig) -> Result<RunConfig> {
    let spec = build_spec(&raw.system)?;
    let i = &raw.instance;
    let instance =
        ProblemInstance::new(i.t0, i.theta, i.x0.clone(), i.p, i.r).map_err(at("instance"))?;
    instance.check_against(&spec).map_err(at("instance.x0"))?;

    let p = &raw.plan;
    let direct = [
        p.beta.is_some(),
        p.n_steps.is_some(),
        p.q.is_some(),
        p.sigma.is_some(),
    ];
    let epsilon = [p.epsilon.is_some(), p.r_star.is_some()];
    let plan = match (direct.iter().any(|&b| b), epsilon.iter().any(|&b| b)) {
        (true, true) => {
            return Err(Error::config(
                "plan",
                "mode conflict: give either beta/n_steps/q/sigma (direct) or epsilon/r_star (epsilon), not both",
            ))
        }
        (false, false) => return Err(Error::config("plan", "missing plan: give direct or epsilon keys")),
        (true, false) => PlanMode::Direct {
            beta: field(p.beta, "plan.beta")?,
            n_steps: field(p.n_steps, "plan.n_steps")?,
            q: field(p.q, "plan.q")?,
            sigma: field(p.sigma, "plan.sigma")?,
        },
        (false, true) => PlanMode::Epsilon {
            epsilon: field(p.epsilon, "plan.epsilon")?,
            r_star: field(p.r_star, "plan.r_star")?,
        },
    };
    if let PlanMode::Direct {
        beta,
        n_steps,
        q,
        sigma,
    } = plan
    {
        crate::params::DiscretizationPlan::direct(&instance, beta, n_steps, q, sigma)
            .map_err(at("plan"))?;
    }
    if raw.oracle.substeps == 0 {
        return Err(Error::config("oracle.substeps", "must be at least 1"));
    }
    if raw.omega.density < 2 {
        return Err(Error::config("omega.density", "must be at least 2"));
    }
    if let Some(study) = &raw.study {
        if study.levels.is_empty() {
            return Err(Error::config("study.levels", "needs at least one level"));
        }
        if !matches!(plan, PlanMode::Direct { .. }) {
            return Err(Error::config(
                "study",
                "a study takes beta from a direct-mode [plan]",
            ));
        }
    }
    Ok(RunConfig {
        seed: raw.seed,
        spec,
        instance,
        plan,
        oracle_substeps: raw.oracle.substeps,
        word_cap: raw.caps.words,
        net_cap: raw.caps.net,
        schedule_caps: ScheduleCaps {
            max_steps: raw.caps.max_steps,
            max_levels: raw.caps.max_levels,
        },
        omega: OmegaSettings {
            density: raw.omega.density,
            seed: raw.seed,
            slope: raw.omega.slope,
        },
        out_dir: raw.outputs.dir.clone(),
        raw,
    })
}

fn build_spec(s: &RawSystem) -> Result<DynamicsSpec> {
    let constants = s
        .constants
        .map(|c| Constants::new(c.gamma1, c.gamma2, c.gamma3, c.c));
    match (&s.catalog, &s.rhs) {
        (Some(_), Some(_)) => Err(Error::config(
            "system",
            "give either catalog or rhs, not both",
        )),
        (None, None) => Err(Error::config("system", "missing catalog or rhs")),
        (Some(name), None) => {
            let cat = Catalog::from_name(name).ok_or_else(|| {
                Error::config(
                    "system.catalog",
                    format!(
                        "unknown system `{name}` (known: integrator, affine, rotator, saturating)"
                    ),
                )
            })?;
            let (n, m) = cat.dims();
            if s.n.is_some_and(|v| v != n) || s.m.is_some_and(|v| v != m) {
                return Err(Error::config(
                    "system",
                    format!("catalog `{name}` has n = {n}, m = {m}"),
                ));
            }
            let spec = DynamicsSpec::catalog(cat);
            match constants {
                Some(c) => DynamicsSpec::new(name.clone(), n, m, spec.rhs, c)
                    .map_err(at("system.constants")),
                None => Ok(spec),
            }
        }
        (None, Some(rhs)) => {
            let n = s.n.unwrap_or(rhs.len());
            let m = field(s.m, "system.m")?;
            let c = field(constants, "system.constants")?;
            DynamicsSpec::from_sources("custom", rhs, n, m, c).map_err(|e| match e {
                Error::Parse(p) => Error::config("system.rhs", p.to_string()),
                Error::Input(msg) => Error::config("system", msg),
                other => other,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[system]
catalog = "integrator"

[instance]
theta = 1.0
x0 = [0.0]
p = 2.0
r = 1.0

[plan]
beta = 1.0
n_steps = 2
q = 1
sigma = 1.0
"#;

    #[test]
    fn minimal_config_with_defaults() {
        let c = parse_config_str(MINIMAL).unwrap();
        assert_eq!(c.spec.label, "integrator");
        assert_eq!(
            c.plan,
            PlanMode::Direct {
                beta: 1.0,
                n_steps: 2,
                q: 1,
                sigma: 1.0
            }
        );
        assert_eq!(c.oracle_substeps, 32);
        assert_eq!(c.word_cap, DEFAULT_WORD_CAP);
        assert_eq!(c.instance.t0, 0.0);
        assert_eq!(c.out_dir, PathBuf::from("out"));
    }

    #[test]
    fn mode_conflict() {
        let text = MINIMAL.replace("sigma = 1.0", "sigma = 1.0\nepsilon = 2.0");
        match parse_config_str(&text) {
            Err(Error::Config { path, message }) => {
                assert_eq!(path, "plan");
                assert!(message.contains("mode conflict"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn epsilon_mode() {
        let text = MINIMAL.replace(
            "beta = 1.0\nn_steps = 2\nq = 1\nsigma = 1.0",
            "epsilon = 2.0\nr_star = 1.0",
        );
        let c = parse_config_str(&text).unwrap();
        assert_eq!(
            c.plan,
            PlanMode::Epsilon {
                epsilon: 2.0,
                r_star: 1.0
            }
        );
    }

    #[test]
    fn diagnostics_name_the_key() {
        let err = |t: &str| match parse_config_str(t) {
            Err(Error::Config { path, message }) => format!("{path}: {message}"),
            other => panic!("{other:?}"),
        };
        assert!(err(&MINIMAL.replace("q = 1", "q = 1\nbogus = 3")).contains("bogus"));
        assert!(err(&MINIMAL.replace("q = 1\n", "")).starts_with("plan.q"));
        assert!(
            err(&MINIMAL.replace("\"integrator\"", "\"pendulum\"")).starts_with("system.catalog")
        );
        assert!(err(&MINIMAL.replace("x0 = [0.0]", "x0 = [0.0, 1.0]")).starts_with("instance.x0"));
        assert!(err(&MINIMAL.replace("r = 1.0", "r = -1.0")).starts_with("instance"));
        assert!(err(&MINIMAL.replace("sigma = 1.0", "sigma = 0.0")).starts_with("plan"));
    }

    #[test]
    fn expression_system() {
        let text = MINIMAL.replace(
            "catalog = \"integrator\"",
            "rhs = [\"-x1^3 + u1\"]\nm = 1\nconstants = { gamma1 = 12.0, gamma2 = 0.0, gamma3 = 1.0, c = 3.0 }",
        );
        let c = parse_config_str(&text).unwrap();
        assert_eq!(c.spec.sources(), vec!["-x1^3 + u1".to_string()]);
        let bad = text.replace("-x1^3 + u1", "x3 + u1");
        assert!(
            matches!(parse_config_str(&bad), Err(Error::Config { path, .. }) if path == "system.rhs")
        );
    }
}
