//! Command-line front end. Exit status: 0 success, 1 failed validation or
//! runtime error, 2 usage error.

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::harness::{self, contraction_onset, log_grid, HarnessError, CONTRACTION_GRID_POINTS};
use crate::topology::spectral_gap;

#[derive(Debug, Parser)]
#[command(name = "dpac", version, about = "Differentially private dynamic average consensus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check every assumption and print the report.
    Validate { config: PathBuf },
    /// Run the Monte-Carlo experiment and write artifacts.
    Run {
        config: PathBuf,
        #[arg(long)]
        runs: Option<u64>,
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Proceed even when a required check fails.
        #[arg(long)]
        override_assumptions: bool,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the privacy ledger as CSV.
    Budget {
        config: PathBuf,
        #[arg(long)]
        horizon: Option<u64>,
    },
    /// Print the Laplacian spectrum and contraction diagnostics.
    Spectrum { config: PathBuf },
}

/// Parses `args` (program name first) and executes; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            if let HarnessError::Validation(report) = &e {
                eprintln!("{report}");
            }
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(command: Command) -> Result<i32, HarnessError> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match command {
        Command::Validate { config } => {
            let config = ExperimentConfig::load(&config)?;
            let report = harness::validate(&config);
            writeln!(out, "{report}").map_err(stdout_error)?;
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::Run {
            config,
            runs,
            horizon,
            seed,
            out: out_dir,
            override_assumptions,
            workers,
        } => {
            let mut config = ExperimentConfig::load(&config)?;
            if let Some(r) = runs {
                config.runs = r;
            }
            if let Some(k) = horizon {
                config.horizon = k;
            }
            if let Some(s) = seed {
                config.master_seed = s;
            }
            if out_dir.is_some() {
                config.output_dir = out_dir;
            }
            if workers.is_some() {
                config.workers = workers;
            }
            config.override_assumptions |= override_assumptions;
            config.check()?;
            let result = harness::run_experiment(&config)?;
            if !result.report.passed() {
                eprintln!("warning: guarantees void, assumptions overridden");
            }
            writeln!(out, "wrote {} files to {}", result.manifest.files.len() + 1, result.dir.display())
                .map_err(stdout_error)?;
            for r in &result.results {
                if let Some(last) = r.ensemble.rows.last() {
                    writeln!(
                        out,
                        "{:<9} k = {:<6} tracking error mean {:.6e}, consensus error mean {:.6e}",
                        r.algorithm.name(),
                        last.k,
                        last.get(crate::metrics::Metric::TrackingError).mean,
                        last.get(crate::metrics::Metric::ConsensusError).mean,
                    )
                    .map_err(stdout_error)?;
                }
            }
            Ok(0)
        }
        Command::Budget { config, horizon } => {
            let config = ExperimentConfig::load(&config)?;
            let prepared = harness::prepare(&config)?;
            let horizon = horizon.unwrap_or(config.horizon);
            let Some(ledger) = prepared.ledger(horizon)? else {
                eprintln!("noise is off: no privacy guarantee");
                return Ok(1);
            };
            ledger.write_csv(&mut out)?;
            eprintln!("C_bar = {:.6e}", prepared.c_bar);
            eprintln!("epsilon_cum(K = {horizon}) = {:.6}", ledger.epsilon_cum());
            match ledger.epsilon_total_bounds() {
                Some((lo, hi)) => eprintln!("epsilon(K -> inf) in [{lo:.6}, {hi:.6}]"),
                None => eprintln!("epsilon(K -> inf): no finite bound"),
            }
            Ok(0)
        }
        Command::Spectrum { config } => {
            let config = ExperimentConfig::load(&config)?;
            let topology = config.topology.build()?;
            let eig: Vec<String> = topology.eigenvalues().iter().map(|v| format!("{v:.12e}")).collect();
            writeln!(out, "eigenvalues (ascending): {}", eig.join(", ")).map_err(stdout_error)?;
            writeln!(out, "spectral gap |rho_2|: {:.12e}", spectral_gap(&topology)).map_err(stdout_error)?;
            writeln!(out, "||I + L - 11'/m||: {:.12e}", topology.assumption_norm()).map_err(stdout_error)?;
            writeln!(out, "||L0||: {:.12e}", topology.off_diagonal()?.norm0).map_err(stdout_error)?;
            let s = &config.schedules;
            let hi = config.certify_horizon.max(config.horizon);
            let grid = log_grid(1, hi, CONTRACTION_GRID_POINTS);
            match contraction_onset(&topology, &s.alpha, &s.chi, &grid)? {
                Some(t) => writeln!(out, "contraction onset T: {t} (log grid to {hi})"),
                None => writeln!(out, "contraction onset T: none up to {hi}"),
            }
            .map_err(stdout_error)?;
            Ok(0)
        }
    }
}

fn stdout_error(source: io::Error) -> HarnessError {
    HarnessError::Io {
        path: "<stdout>".into(),
        source,
    }
}
