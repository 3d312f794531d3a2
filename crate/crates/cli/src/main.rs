//! `rsq`: run experiments from one JSON config.
//!
//! Exit codes: 0 success, 1 invalid config or usage, 2 runtime failure,
//! 3 a verification check failed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rsq_core::config::{self, ExperimentConfig};
use rsq_core::experiment::{self, ArtifactDir, ExperimentError, Prepared};
use rsq_core::verify::{self, VerifyOptions};

#[derive(Debug, Parser)]
#[command(name = "rsq", version, about = "Rate-scheduled queues in a switching environment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One trajectory of the queueing system.
    Simulate(Common),
    /// Heavy-traffic ladder: collapse, fluid and workload metrics per scale.
    Sweep(Common),
    /// Ensemble of the reflected limit diffusion.
    Rdrs(Common),
    /// Scaled simulation against the limit diffusion at the probe time.
    Compare(Common),
    /// Capacity boundary points over a weight grid.
    CapacityTrace(Common),
    /// Property suites of the allocator, dual cost and capacity regions.
    Verify(VerifyArgs),
    /// Print the JSON schema of the config document.
    Schema,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override a config field, e.g. `--set simulation.horizon=50`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory (overrides `output.directory`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Random instances of the certification suite.
    #[arg(long, default_value_t = VerifyOptions::default().kkt_instances)]
    instances: usize,
    /// Random feasible rivals per instance.
    #[arg(long, default_value_t = VerifyOptions::default().rivals)]
    rivals: usize,
}

fn prepare(c: &Common) -> Result<Prepared, ExperimentError> {
    if let Some(n) = c.jobs {
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let mut overrides = c.set.clone();
    if let Some(seed) = c.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(out) = &c.out {
        overrides.push(format!("output.directory={}", serde_json::Value::String(out.display().to_string())));
    }
    let cfg = ExperimentConfig::read(&c.config, &overrides)?;
    Prepared::new(cfg)
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable summary"));
}

fn run(cli: Cli) -> Result<u8, ExperimentError> {
    let common = match &cli.command {
        Command::Schema => {
            println!("{}", config::schema());
            return Ok(0);
        }
        Command::Simulate(c) | Command::Sweep(c) | Command::Rdrs(c) | Command::Compare(c) | Command::CapacityTrace(c) => c,
        Command::Verify(v) => &v.common,
    };
    let p = prepare(common)?;
    let out = Path::new(&p.config.output.directory).to_path_buf();
    match &cli.command {
        Command::Simulate(_) => print_json(&experiment::run_simulate(&p, &out)?),
        Command::Sweep(_) => print_json(&experiment::run_sweep(&p, &out)?),
        Command::Rdrs(_) => print_json(&experiment::run_rdrs(&p, &out)?),
        Command::Compare(_) => print_json(&experiment::run_compare(&p, &out)?),
        Command::CapacityTrace(_) => print_json(&experiment::run_capacity_trace(&p, &out)?),
        Command::Verify(v) => {
            let opts = VerifyOptions { kkt_instances: v.instances, rivals: v.rivals, ..VerifyOptions::default() };
            let results = verify::run_all(&p.region, &p.utility, &p.config.traffic.mu, &opts, p.config.seed);
            print!("{}", verify::table(&results));
            let mut dir = ArtifactDir::create(&out)?;
            dir.write_json("verify.json", &results)?;
            dir.finish("verify", &p.config)?;
            if results.iter().any(|r| !r.passed) {
                return Ok(3);
            }
        }
        Command::Schema => unreachable!(),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
