use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dynkin_core::cli::{
    cmd_solve, cmd_value_table, cmd_verify, CliError, CliResult, ExitStatus, Preset, RunConfig,
    DEFAULT_POINTS, DEFAULT_X_MAX, DEFAULT_X_MIN,
};

#[derive(Parser)]
#[command(
    name = "dynkin",
    version,
    about = "Perpetual Dynkin games for Lévy processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the game and write solution.json.
    Solve(Common),
    /// Write value_table.csv with V, G1, G2 and the region on a grid.
    ValueTable {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = DEFAULT_X_MIN, allow_negative_numbers = true)]
        x_min: f64,
        #[arg(long, default_value_t = DEFAULT_X_MAX, allow_negative_numbers = true)]
        x_max: f64,
        #[arg(long, default_value_t = DEFAULT_POINTS)]
        points: usize,
    },
    /// Run the Monte-Carlo checks and write verify.json.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    config: Option<PathBuf>,
    /// Built-in configuration: bm-sym, bm-drift, cl, cp-sym or cp-asym.
    #[arg(long, conflicts_with = "config")]
    preset: Option<Preset>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
}

impl Common {
    fn load(&self) -> CliResult<RunConfig> {
        let mut cfg = match (&self.config, self.preset) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(p)) => RunConfig::preset(p),
            (None, None) => {
                return Err(CliError::Usage(
                    "a config file or --preset is required".into(),
                ))
            }
        };
        if let Some(out) = &self.out {
            cfg.output.directory = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.mc.seed = seed;
        }
        if let Some(paths) = self.paths {
            cfg.mc.paths = paths;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> CliResult<ExitStatus> {
    match cli.command {
        Command::Solve(c) => cmd_solve(&c.load()?),
        Command::ValueTable {
            common,
            x_min,
            x_max,
            points,
        } => cmd_value_table(&common.load()?, x_min, x_max, points),
        Command::Verify(c) => cmd_verify(&c.load()?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap uses 2 for usage errors, which is reserved here
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let status = match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(status)) => status,
        Ok(Err(e)) => {
            eprintln!("dynkin: {e}");
            ExitStatus::Config
        }
        Err(_) => ExitStatus::Config,
    };
    match status {
        ExitStatus::NotCertified => {
            eprintln!("dynkin: hypothesis checks failed, solution is not certified")
        }
        ExitStatus::VerificationFailed => eprintln!("dynkin: verification failed, see verify.json"),
        _ => {}
    }
    ExitCode::from(status.code() as u8)
}
