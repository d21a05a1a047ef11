use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hcvlab_core::checks::run_checks;
use hcvlab_core::scenario::{builtin, builtin_names, load_config};
use hcvlab_core::sweep::{parse_values, sweep, sweep_csv};
use hcvlab_core::{run_scenario, Error, ErrorCategory, Scenario, TimeStep};

const EXIT_OTHER: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_MONITOR: u8 = 4;

#[derive(Parser)]
#[command(name = "hcvlab", version, about = "Within-host HCV reaction-diffusion lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyse and integrate a scenario, writing CSVs and a report.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        n_cells: Option<usize>,
        /// Time step, or `auto` for the stability bound.
        #[arg(long)]
        dt: Option<String>,
        #[arg(long)]
        t_end: Option<f64>,
        /// Output directory for fields.csv, summary.csv, stability.csv, report.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Threshold analysis over one parameter (no PDE runs).
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Parameter key, e.g. `beta`.
        #[arg(long)]
        key: String,
        /// `a,b,c` or `start:stop:count`.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in scenarios.
    ListScenarios,
    /// Run the randomized invariant suite.
    Check {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Scenario config file (key = value).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in scenario name.
    #[arg(long)]
    scenario: Option<String>,
}

impl Source {
    fn load(&self) -> Result<Scenario, Error> {
        match (&self.config, &self.scenario) {
            (Some(path), _) => load_config(path),
            (None, Some(name)) => builtin(name).ok_or_else(|| Error::UnknownScenario(name.clone())),
            (None, None) => unreachable!("clap enforces one source"),
        }
    }
}

fn exit_code(cat: ErrorCategory) -> u8 {
    match cat {
        ErrorCategory::Config => EXIT_CONFIG,
        ErrorCategory::Solver => EXIT_SOLVER,
        ErrorCategory::Monitor => EXIT_MONITOR,
        ErrorCategory::Other => EXIT_OTHER,
    }
}

fn apply_overrides(
    s: &mut Scenario,
    n_cells: Option<usize>,
    dt: Option<&str>,
    t_end: Option<f64>,
) -> Result<(), Error> {
    if let Some(n) = n_cells {
        s.n_cells = n;
    }
    if let Some(dt) = dt {
        s.solver.dt = if dt == "auto" {
            TimeStep::Auto
        } else {
            TimeStep::Fixed(dt.parse().map_err(|e| Error::InvalidParam {
                key: "dt".into(),
                reason: format!("cannot parse `{dt}`: {e}"),
            })?)
        };
    }
    if let Some(t) = t_end {
        s.solver.t_end = t;
    }
    s.validate()
}

fn execute(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Run {
            source,
            n_cells,
            dt,
            t_end,
            out,
        } => {
            let mut s = source.load()?;
            apply_overrides(&mut s, n_cells, dt.as_deref(), t_end)?;
            let report = run_scenario(&s, out.as_deref())?;
            print!("{}", report.to_text());
            if let Some((cat, msg)) = &report.failure {
                eprintln!("error: {msg}");
                return Ok(exit_code(*cat));
            }
            if report.monitor_violation_count() > 0 {
                eprintln!("error: {} monitor violation(s)", report.monitor_violation_count());
                return Ok(EXIT_MONITOR);
            }
            Ok(0)
        }
        Command::Sweep {
            source,
            key,
            values,
            out,
        } => {
            let s = source.load()?;
            let rows = sweep(&s, &key, &parse_values(&values)?)?;
            let csv = sweep_csv(&rows);
            match out {
                Some(path) => fs::write(path, csv)?,
                None => print!("{csv}"),
            }
            Ok(0)
        }
        Command::ListScenarios => {
            for name in builtin_names() {
                let s = builtin(name).expect("built-in");
                println!("{name}\tt_end={}\tn_cells={}", s.solver.t_end, s.n_cells);
            }
            Ok(0)
        }
        Command::Check { seed, samples } => {
            let results = run_checks(seed, samples);
            for r in &results {
                println!("{r}");
            }
            Ok(if results.iter().all(|r| r.passed()) {
                0
            } else {
                EXIT_OTHER
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.category()))
        }
    }
}
