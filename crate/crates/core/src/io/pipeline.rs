//! End-to-end runs: plan resolution, artifact writing and error records.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use super::config::{PlanMode, RawLevel, RunConfig};
use super::export::{
    write_bundle_csv, write_distance_csv, write_funnel_csv, write_net_csv, DistanceRow,
};
use crate::control::count_words;
use crate::error::{Error, Result};
use crate::funnel::{attainable_slice, build_bundle, build_funnel, BundleMode, TrajectoryBundle};
use crate::metrics::{eval_grid, hausdorff_funnel, hausdorff_points, hausdorff_uniform};
use crate::modulus::build_omega;
use crate::params::{derive_constants, epsilon_schedule, ConstantsChain, DiscretizationPlan};
use crate::sphere::{build_sigma_net, SigmaNet};
use crate::study::{convergence_study, write_study_csv, Reference, StudyRow, StudySettings};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemEcho {
    pub label: String,
    pub n: usize,
    pub m: usize,
    pub rhs: Vec<String>,
    pub constants: crate::system::Constants,
}

/// Constants and resolved plan, as printed by `derive`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeriveReport {
    pub system: SystemEcho,
    pub instance: crate::system::ProblemInstance,
    pub mode: PlanMode,
    pub constants: ConstantsChain,
    pub plan: DiscretizationPlan,
    pub dt: f64,
    pub delta: f64,
}

pub struct Pipeline {
    pub config: RunConfig,
    pub chain: ConstantsChain,
    pub plan: DiscretizationPlan,
    net: Option<SigmaNet>,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self> {
        let chain = derive_constants(&config.spec, &config.instance);
        let plan = resolve_plan(&config, &chain)?;
        Ok(Pipeline {
            config,
            chain,
            plan,
            net: None,
        })
    }

    pub fn derive_report(&self) -> DeriveReport {
        let spec = &self.config.spec;
        DeriveReport {
            system: SystemEcho {
                label: spec.label.clone(),
                n: spec.n,
                m: spec.m,
                rhs: spec.sources(),
                constants: spec.constants,
            },
            instance: self.config.instance.clone(),
            mode: self.config.plan,
            constants: self.chain.clone(),
            plan: self.plan.clone(),
            dt: self.plan.dt(),
            delta: self.plan.delta(),
        }
    }

    pub fn net(&mut self) -> Result<&SigmaNet> {
        if self.net.is_none() {
            self.net = Some(build_sigma_net(
                self.config.spec.m,
                self.plan.sigma,
                self.config.net_cap,
            )?);
        }
        Ok(self.net.as_ref().expect("net just built"))
    }

    pub fn count_words(&mut self) -> Result<u64> {
        let a = self.net()?.len();
        count_words(&self.plan, &self.config.instance, a, self.config.word_cap)
    }

    pub fn words(&mut self) -> Result<crate::control::WordStream> {
        self.net()?;
        let net = self.net.as_ref().expect("net built");
        crate::control::enumerate_words(
            &self.plan,
            &self.config.instance,
            net,
            self.config.word_cap,
        )
    }

    pub fn bundle(&mut self, mode: BundleMode) -> Result<TrajectoryBundle> {
        self.net()?;
        let c = &self.config;
        build_bundle(
            &c.spec,
            &c.instance,
            &self.plan,
            self.net.as_ref().expect("net built"),
            mode,
            c.word_cap,
        )
    }

    pub fn oracle_mode(&self) -> BundleMode {
        BundleMode::Oracle {
            substeps: self.config.oracle_substeps,
        }
    }

    /// Euler bundle against the RK4 bundle of the same words: uniform
    /// distance, slice distance at `theta`, funnel distance.
    pub fn distances(
        &self,
        euler: &TrajectoryBundle,
        oracle: &TrajectoryBundle,
    ) -> Result<Vec<DistanceRow>> {
        let theta = self.plan.theta;
        let h_c = hausdorff_uniform(euler, oracle, &eval_grid(&self.plan))?;
        let h_n = hausdorff_points(
            &attainable_slice(euler, theta)?,
            &attainable_slice(oracle, theta)?,
        )?;
        let scale = self.config.raw.study.as_ref().map_or(1.0, |s| s.time_scale);
        let h_f = hausdorff_funnel(&build_funnel(euler), &build_funnel(oracle), scale)?;
        Ok(vec![
            DistanceRow::new("trajectories", &h_c),
            DistanceRow::new("slice_theta", &h_n),
            DistanceRow::new("funnel", &h_f),
        ])
    }

    /// Study rows, if the config has a `[study]` table.
    pub fn study(&self) -> Result<Option<Vec<StudyRow>>> {
        let Some(study) = &self.config.raw.study else {
            return Ok(None);
        };
        let c = &self.config;
        let level = |l: &RawLevel| {
            DiscretizationPlan::direct(&c.instance, self.plan.beta, l.n_steps, l.q, l.sigma)
        };
        let plans: Vec<DiscretizationPlan> =
            study.levels.iter().map(level).collect::<Result<_>>()?;
        let reference_plan = match &study.reference {
            Some(l) => level(l)?,
            None => plans.last().expect("levels validated nonempty").clone(),
        };
        let settings = StudySettings {
            word_cap: c.word_cap,
            net_cap: c.net_cap,
            materialize_limit: study.materialize_limit,
            omega: c.omega,
            time_scale: study.time_scale,
        };
        let reference = Reference::Oracle {
            plan: reference_plan,
            substeps: c.oracle_substeps,
        };
        convergence_study(&c.spec, &c.instance, &plans, &reference, &settings).map(Some)
    }
}

fn resolve_plan(config: &RunConfig, chain: &ConstantsChain) -> Result<DiscretizationPlan> {
    match config.plan {
        PlanMode::Direct {
            beta,
            n_steps,
            q,
            sigma,
        } => DiscretizationPlan::direct(&config.instance, beta, n_steps, q, sigma),
        PlanMode::Epsilon { epsilon, r_star } => {
            if !chain.alpha_star.is_finite() {
                return Err(Error::input(
                    "trajectory bound alpha* overflows; epsilon mode unavailable",
                ));
            }
            // the schedule rejects these before it looks at the modulus
            if !(epsilon > 0.0 && chain.kappa_star > 0.0) {
                let unused = crate::modulus::OmegaModel::Linear(0.0);
                return epsilon_schedule(
                    chain,
                    &config.instance,
                    epsilon,
                    r_star,
                    &unused,
                    config.schedule_caps,
                );
            }
            let beta = chain.beta_star(epsilon);
            let omega = build_omega(
                &config.spec,
                &config.instance,
                chain.alpha_star,
                beta,
                &config.omega,
            )?;
            epsilon_schedule(
                chain,
                &config.instance,
                epsilon,
                r_star,
                &omega,
                config.schedule_caps,
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub file: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub words: u64,
    pub artifacts: Vec<Artifact>,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn data_rows(dir: &Path, name: &str) -> Result<usize> {
    let text = fs::read_to_string(dir.join(name))?;
    Ok(text.lines().count().saturating_sub(1))
}

/// Run every stage and write the artifacts into the configured directory.
/// On failure an `error.json` record is written there before returning.
pub fn run_pipeline(config: &RunConfig) -> Result<RunSummary> {
    let dir = config.out_dir.clone();
    fs::create_dir_all(&dir)?;
    let stale = dir.join("error.json");
    if stale.exists() {
        fs::remove_file(&stale)?;
    }
    run_stages(config, &dir).inspect_err(|e| {
        // the original error matters more than a failed record write
        let _ = write_error_record(&dir, e);
    })
}

fn run_stages(config: &RunConfig, dir: &Path) -> Result<RunSummary> {
    let mut p = Pipeline::new(config.clone())?;
    let mut artifacts = Vec::new();

    let net = p.net()?.clone();
    write_net_csv(&net, create(dir, "net.csv")?)?;
    artifacts.push(Artifact {
        file: "net.csv".into(),
        rows: net.len(),
    });
    let words = p.count_words()?;

    let out = &config.raw.outputs;
    if out.bundle || out.funnel || out.distance {
        let euler = p.bundle(BundleMode::Euler)?;
        if out.bundle {
            write_bundle_csv(&euler, create(dir, "bundle.csv")?)?;
            artifacts.push(Artifact {
                file: "bundle.csv".into(),
                rows: data_rows(dir, "bundle.csv")?,
            });
        }
        if out.funnel {
            let cloud = build_funnel(&euler);
            write_funnel_csv(&cloud, create(dir, "funnel.csv")?)?;
            artifacts.push(Artifact {
                file: "funnel.csv".into(),
                rows: cloud.len(),
            });
        }
        if out.distance {
            let oracle = p.bundle(p.oracle_mode())?;
            let rows = p.distances(&euler, &oracle)?;
            write_distance_csv(&rows, create(dir, "distance.csv")?)?;
            artifacts.push(Artifact {
                file: "distance.csv".into(),
                rows: rows.len(),
            });
        }
    }
    if let Some(rows) = p.study()? {
        write_study_csv(&rows, create(dir, "study.csv")?)?;
        artifacts.push(Artifact {
            file: "study.csv".into(),
            rows: rows.len(),
        });
    }

    let manifest = json!({
        "config": config.raw,
        "derive": p.derive_report(),
        "net": { "size": net.len(), "sigma": net.sigma },
        "words": words,
        "artifacts": artifacts,
    });
    let mut f = create(dir, "manifest.json")?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    writeln!(f)?;
    f.flush()?;
    Ok(RunSummary {
        out_dir: dir.to_path_buf(),
        words,
        artifacts,
    })
}

/// Machine-readable failure record.
pub fn error_record(e: &Error) -> serde_json::Value {
    let mut v = json!({
        "kind": e.kind(),
        "exit_code": e.exit_code(),
        "message": e.to_string(),
    });
    if let Error::Capacity(c) = e {
        v["capacity"] = serde_json::to_value(c).unwrap_or_default();
    }
    if let Error::Divergence { step, word, norm } = e {
        v["divergence"] = json!({ "step": step, "word": word, "norm": norm });
    }
    v
}

pub fn write_error_record(dir: &Path, e: &Error) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut f = create(dir, "error.json")?;
    serde_json::to_writer_pretty(&mut f, &error_record(e))?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}
