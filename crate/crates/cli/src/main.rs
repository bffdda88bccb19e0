use std::error::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use climate_dfa::engine::{calibrate, output, run_simulation, RunConfig, RunOptions};
use climate_dfa::surplus::compute_risk_report;
use climate_dfa::DfaError;

#[derive(Parser)]
#[command(name = "climate-dfa", version, about = "Climate-dependent DFA for a general-insurance market")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the models listed under [[calibration]] in the config.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        /// Directory the job files are read from.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the Monte Carlo simulation and write reports.
    Simulate {
        /// Run configuration; the shipped default when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
        /// Run a single scenario.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (0 = all cores). Results do not depend on this.
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Recompute risk metrics from the paths of an earlier run.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// CAGR horizons in years.
        #[arg(long, value_delimiter = ',', default_values_t = [5usize, 10, 20, 30])]
        horizons: Vec<usize>,
    },
    /// Print the shipped default configuration.
    DefaultConfig,
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn run(cli: Cli) -> Result<(), DfaError> {
    match cli.command {
        Command::Calibrate { config, data, out } => {
            let cfg = RunConfig::load(&config)?;
            if cfg.calibration.is_empty() {
                return Err(DfaError::Config(format!("{} has no [[calibration]] jobs", config.display())));
            }
            let rows = calibrate::run_calibration(&cfg.calibration, &data, &out)?;
            eprintln!("wrote {} estimates to {}", rows.len(), out.join(calibrate::FITS).display());
        }
        Command::Simulate {
            config,
            seed,
            paths,
            scenario,
            out,
            workers,
        } => {
            let (cfg, base) = match &config {
                Some(p) => (RunConfig::load(p)?, base_dir(p)),
                None => (RunConfig::default_config(), PathBuf::from(".")),
            };
            let options = RunOptions {
                n_paths: paths,
                master_seed: seed,
                scenario,
                workers,
            };
            let result = run_simulation(&cfg, &options, &base)?;
            output::write_run(&result, &out)?;
            eprintln!(
                "simulated {} scenario(s) x {} paths x {} years; reports in {}",
                result.paths.len(),
                result.config.run.n_paths,
                result.config.horizon_years(),
                out.display()
            );
        }
        Command::Report { input, out, horizons } => {
            let paths = output::read_paths(&input)?;
            let report = compute_risk_report(&paths, &horizons)?;
            output::emit_report(&report, None, &out)?;
            eprintln!("wrote {} and {}", out.join(output::RISK_REPORT).display(), out.join(output::CAGR).display());
        }
        Command::DefaultConfig => print!("{}", climate_dfa::engine::config::DEFAULT_CONFIG),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = e.source();
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
