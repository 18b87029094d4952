use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gossipfpp_cli::config::{ConfigError, ExperimentConfig, Kind};
use gossipfpp_cli::{prepare, run, Failure, Overrides};

#[derive(Parser)]
#[command(name = "gossipfpp", version, about = "Rank-reward gossip experiments")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Master seed; replaces the config's.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "GOSSIPFPP_OUT", default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    replicates: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LatticeTask {
    Shape,
    Tau,
    Z,
    NashNn,
    UniformRank,
}

impl LatticeTask {
    fn name(self) -> &'static str {
        match self {
            LatticeTask::Shape => "shape",
            LatticeTask::Tau => "tau",
            LatticeTask::Z => "z",
            LatticeTask::NashNn => "nash_nn",
            LatticeTask::UniformRank => "uniform_rank",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run whatever experiment the config names.
    Run(Common),
    /// Percolate items and record receipt times.
    Simulate(Common),
    /// Closed-form complete-graph results.
    Analytic(Common),
    /// Solve the short-long limit equation.
    Fquad(Common),
    /// Lattice estimators.
    Lattice {
        task: Option<LatticeTask>,
        #[command(flatten)]
        common: Common,
    },
    /// Search for a symmetric Nash equilibrium.
    Nash(Common),
    /// Repeat an experiment over a parameter grid.
    Sweep(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let (expect, task, common) = match cli.command {
        Command::Run(c) => (None, None, c),
        Command::Simulate(c) => (Some(Kind::Simulate), None, c),
        Command::Analytic(c) => (Some(Kind::Analytic), None, c),
        Command::Fquad(c) => (Some(Kind::Fquad), None, c),
        Command::Lattice { task, common } => (Some(Kind::Lattice), task, common),
        Command::Nash(c) => (Some(Kind::Nash), None, c),
        Command::Sweep(c) => (Some(Kind::Sweep), None, c),
    };
    match go(expect, task, &common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}

fn go(expect: Option<Kind>, task: Option<LatticeTask>, c: &Common) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(&c.config)?;
    let ov = Overrides {
        seed: c.seed,
        replicates: c.replicates,
    };
    let cfg = prepare(cfg, expect, ov)?;
    if let (Some(t), Some(l)) = (task, &cfg.lattice) {
        if t.name() != l.task() {
            return Err(ConfigError::new(
                "lattice.task",
                format!(
                    "config asks for `{}`, command line for `{}`",
                    l.task(),
                    t.name()
                ),
            )
            .into());
        }
    }
    let record = run(&cfg, &c.out)?;
    println!(
        "{}: {} ({})",
        c.out.display(),
        record.outputs.join(", "),
        record.config_hash
    );
    Ok(())
}
