use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mstp::commands::{run_chi, run_compare, run_fit, run_simulate};
use mstp::{CliError, RunConfig};

#[derive(Parser)]
#[command(name = "mstp", version, about = "Spatial skew-t trend models for multivariate climate indexes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the configured model in every zone and write its artifacts.
    Fit(Common),
    /// Simulate a dataset and its generating state.
    Simulate(Common),
    /// Empirical extremal dependence tables.
    Chi(Common),
    /// Fit several models per zone and tabulate DIC, WAIC and trend uncertainty.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set chain.seed=7`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Model kind: mstp, mtp, mgp, stp, tp or gp.
    #[arg(long)]
    model: Option<String>,
    /// Print the fully resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let mut sets = self.overrides.clone();
        if let Some(seed) = self.seed {
            sets.push(format!("chain.seed={seed}"));
        }
        if let Some(model) = &self.model {
            sets.push(format!("model=\"{model}\""));
        }
        cfg.apply_overrides(&sets)?;
        if let Some(input) = &self.input {
            cfg.input = Some(input.clone());
        }
        if let Some(output) = &self.output {
            cfg.output.dir = output.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Fit(c) | Command::Simulate(c) | Command::Chi(c) | Command::Compare(c) => c,
    };
    let cfg = common.resolve()?;
    if common.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    match cli.command {
        Command::Fit(_) => {
            for dir in run_fit(&cfg)? {
                println!("wrote {}", dir.display());
            }
        }
        Command::Simulate(_) => {
            let (data, truth) = run_simulate(&cfg)?;
            println!("wrote {} and {}", data.display(), truth.display());
        }
        Command::Chi(_) => {
            for dir in run_chi(&cfg)? {
                println!("wrote {}", dir.display());
            }
        }
        Command::Compare(_) => {
            let (path, _) = run_compare(&cfg)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
