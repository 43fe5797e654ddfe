//! Command-line front end.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::config::{ScenarioConfig, PRESET_REFERENCE};
use super::report::{save_report, ExitStatus, RunReport};
use super::run::{self, SweepGrid, ORACLE_T_END, REPORT_FILE};
use crate::error::{Result, TcsError};

#[derive(Debug, Parser)]
#[command(
    name = "tcs",
    version,
    about = "Thermodynamic Cucker-Smale particles in a harmonic potential"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate, write the time series and verify the decay envelopes.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Directory for timeseries.csv and report.txt.
        #[arg(long, default_value = "tcs-out")]
        out_dir: PathBuf,
    },
    /// Evaluate the sufficient conditions on the sampled initial data.
    Check {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Also write the report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Fit exponential decay rates to an existing time series.
    Fit {
        /// Time-series CSV written by `simulate`.
        input: PathBuf,
        /// Fit window `start,end`; defaults to the second half of the series.
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
    },
    /// Compare the full system with the directly integrated fluctuation system.
    Oracle {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Run `simulate` over a (kappa1, kappa2, eps0) grid.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Comma-separated kappa1 values (default: the scenario value).
        #[arg(long, value_delimiter = ',')]
        kappa1: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        kappa2: Option<Vec<f64>>,
        #[arg(long = "eps0-grid", value_delimiter = ',')]
        eps0_grid: Option<Vec<f64>>,
        #[arg(long, default_value = "tcs-sweep")]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Built-in scenario.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Scenario file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set model.kappa2=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    eps0: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<ScenarioConfig> {
        let mut cfg = match (&self.preset, &self.config) {
            (_, Some(path)) => ScenarioConfig::load(path)?,
            (Some(name), None) => ScenarioConfig::preset(name)?,
            (None, None) => ScenarioConfig::preset(PRESET_REFERENCE)?,
        };
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| TcsError::Config(format!("--set expects KEY=VALUE, got `{o}`")))?;
            cfg.set(k.trim(), v)?;
        }
        if let Some(v) = self.eps {
            cfg.eps = v;
        }
        if let Some(v) = self.eps0 {
            cfg.eps0 = v;
        }
        if let Some(v) = self.t_end {
            cfg.t_end = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let values: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match values.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err("expected `start,end`".into()),
    }
}

/// Worker count from `TCS_WORKERS`, else the number of available cores.
pub fn sweep_workers() -> Result<usize> {
    match std::env::var("TCS_WORKERS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(TcsError::Config(format!(
                "TCS_WORKERS must be a positive integer, got `{v}`"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn usage(command: &str, err: TcsError) -> RunReport {
    let mut r = RunReport::new(command, None);
    r.fail(&err);
    r
}

fn emit(report: &RunReport) -> i32 {
    print!("{}", report.render());
    report.status.code()
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitStatus::Usage.code()
            } else {
                ExitStatus::Success.code()
            };
        }
    };
    match cli.command {
        Command::Check { scenario, report } => {
            let r = match scenario.resolve() {
                Ok(cfg) => run::check(&cfg),
                Err(e) => usage("check", e),
            };
            let code = emit(&r);
            if let Some(path) = report {
                if let Err(e) = save_report(&r, &path) {
                    eprintln!("error: {e}");
                    return ExitStatus::Usage.code();
                }
            }
            code
        }
        Command::Simulate { scenario, out_dir } => match scenario.resolve() {
            Ok(cfg) => {
                let out = run::simulate(&cfg, Some(&out_dir));
                let code = emit(&out.report);
                eprintln!("wrote {}", out_dir.join(REPORT_FILE).display());
                code
            }
            Err(e) => emit(&usage("simulate", e)),
        },
        Command::Fit { input, window } => emit(&run::fit_file(&input, window)),
        Command::Oracle { scenario } => match scenario.resolve() {
            Ok(cfg) => emit(&run::oracle(&cfg, scenario.t_end.unwrap_or(ORACLE_T_END))),
            Err(e) => emit(&usage("oracle", e)),
        },
        Command::Sweep {
            scenario,
            kappa1,
            kappa2,
            eps0_grid,
            out_dir,
        } => {
            let prepared = scenario
                .resolve()
                .and_then(|cfg| Ok((cfg, sweep_workers()?)));
            let (cfg, workers) = match prepared {
                Ok(v) => v,
                Err(e) => return emit(&usage("sweep", e)),
            };
            let grid = SweepGrid {
                kappa1: kappa1.unwrap_or_else(|| vec![cfg.kappa1]),
                kappa2: kappa2.unwrap_or_else(|| vec![cfg.kappa2]),
                eps0: eps0_grid.unwrap_or_else(|| vec![cfg.eps0]),
            };
            match run::sweep(&cfg, &grid, workers, Some(&out_dir)) {
                Ok(summary) => {
                    print!("{}", summary.to_csv());
                    summary.status.code()
                }
                Err(e) => emit(&usage("sweep", e)),
            }
        }
    }
}
