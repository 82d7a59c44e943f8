use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lpreach::io::{
    error_record, load_funnel_csv, parse_config, run_pipeline, write_bundle_csv,
    write_distance_csv, write_error_record, write_funnel_csv, write_net_csv, write_words_csv,
    DistanceRow, Pipeline, RunConfig,
};
use lpreach::study::write_study_csv;
use lpreach::{build_funnel, hausdorff_funnel, BundleMode, Error, Result};

#[derive(Parser)]
#[command(
    name = "lpreach",
    version,
    about = "Finite inner approximations of reachable sets under L_p-bounded controls"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides `[outputs] dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the control-word cap.
    #[arg(long)]
    cap: Option<u64>,
}

#[derive(Copy, Clone, ValueEnum)]
enum Mode {
    Euler,
    Oracle,
}

#[derive(Subcommand)]
enum Command {
    /// Print the constant chain and the resolved plan as JSON.
    Derive(Common),
    /// Write the sphere net to net.csv.
    Net(Common),
    /// Count control words, or write them to words.csv.
    Enumerate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        count_only: bool,
    },
    /// Write the trajectory bundle to bundle.csv.
    Bundle {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "euler")]
        mode: Mode,
    },
    /// Write the funnel point cloud to funnel.csv.
    Funnel(Common),
    /// Euler bundle against the RK4 bundle (distance.csv), or two funnel CSVs.
    Distance {
        #[command(flatten)]
        common: Common,
        /// First funnel CSV; with --funnel-b, compare the two files instead.
        #[arg(long, requires = "funnel_b")]
        funnel_a: Option<PathBuf>,
        #[arg(long, requires = "funnel_a")]
        funnel_b: Option<PathBuf>,
    },
    /// Run the `[study]` refinement table and write study.csv.
    Study(Common),
    /// Run every stage and write all artifacts plus manifest.json.
    Run(Common),
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut config = parse_config(&common.config)?;
    if let Some(dir) = &common.out {
        config.set_out_dir(dir);
    }
    if let Some(seed) = common.seed {
        config.set_seed(seed);
    }
    if let Some(cap) = common.cap {
        config.set_word_cap(cap);
    }
    Ok(config)
}

fn writer(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    eprintln!("writing {}", path.display());
    Ok(BufWriter::new(File::create(path)?))
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn execute(command: &Command, config: RunConfig) -> Result<()> {
    let dir = config.out_dir.clone();
    let mut p = Pipeline::new(config)?;
    match command {
        Command::Derive(_) => print_json(&p.derive_report()),
        Command::Net(_) => {
            let net = p.net()?.clone();
            write_net_csv(&net, writer(&dir, "net.csv")?)?;
            println!("{}", net.len());
            Ok(())
        }
        Command::Enumerate { count_only, .. } => {
            if *count_only {
                println!("{}", p.count_words()?);
            } else {
                let words = p.words()?;
                let n = write_words_csv(words, p.plan.n_steps, writer(&dir, "words.csv")?)?;
                println!("{n}");
            }
            Ok(())
        }
        Command::Bundle { mode, .. } => {
            let mode = match mode {
                Mode::Euler => BundleMode::Euler,
                Mode::Oracle => p.oracle_mode(),
            };
            let bundle = p.bundle(mode)?;
            write_bundle_csv(&bundle, writer(&dir, "bundle.csv")?)?;
            println!("{}", bundle.len());
            Ok(())
        }
        Command::Funnel(_) => {
            let cloud = build_funnel(&p.bundle(BundleMode::Euler)?);
            write_funnel_csv(&cloud, writer(&dir, "funnel.csv")?)?;
            println!("{}", cloud.len());
            Ok(())
        }
        Command::Distance { .. } => {
            let euler = p.bundle(BundleMode::Euler)?;
            let oracle = p.bundle(p.oracle_mode())?;
            let rows = p.distances(&euler, &oracle)?;
            write_distance_csv(&rows, writer(&dir, "distance.csv")?)?;
            print_json(&rows)
        }
        Command::Study(_) => {
            let rows = p.study()?.ok_or_else(|| Error::Config {
                path: "study".into(),
                message: "missing [study] table".into(),
            })?;
            write_study_csv(&rows, writer(&dir, "study.csv")?)?;
            print_json(&rows)
        }
        Command::Run(_) => unreachable!("handled by run_pipeline"),
    }
}

fn compare_funnels(a: &Path, b: &Path) -> Result<()> {
    let fa = load_funnel_csv(File::open(a)?)?;
    let fb = load_funnel_csv(File::open(b)?)?;
    print_json(&DistanceRow::new(
        "funnel",
        &hausdorff_funnel(&fa, &fb, 1.0)?,
    ))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Derive(c)
        | Command::Net(c)
        | Command::Funnel(c)
        | Command::Study(c)
        | Command::Run(c) => c,
        Command::Enumerate { common, .. }
        | Command::Bundle { common, .. }
        | Command::Distance { common, .. } => common,
    };
    let mut out_dir = common.out.clone();
    let result = load(common).and_then(|config| {
        out_dir = Some(config.out_dir.clone());
        match &cli.command {
            Command::Run(_) => run_pipeline(&config).and_then(|s| print_json(&s)),
            Command::Distance {
                funnel_a: Some(a),
                funnel_b: Some(b),
                ..
            } => compare_funnels(a, b),
            cmd => execute(cmd, config),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(dir) = &out_dir {
                if !matches!(cli.command, Command::Run(_)) {
                    let _ = write_error_record(dir, &e);
                }
            }
            eprintln!("error: {e}");
            eprintln!("{}", error_record(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
