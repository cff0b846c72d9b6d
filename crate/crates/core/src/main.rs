use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mvdc_fdia_core::scenario::{
    header_comment, load_scenario, run, run_analytic, sweep, sweep_csv, write_atomic, RunError, Scenario,
};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Parser)]
#[command(
    name = "mvdc-fdia",
    version,
    about = "FDIA transient analysis for MVDC shipboard power systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Directory receiving the emitted files.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Accepted for interface stability; runs are deterministic and ignore it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write every requested artifact.
    Run { file: PathBuf },
    /// Evaluate only the closed-form rotor trajectories.
    Analytic { file: PathBuf },
    /// Run a scenario once per parameter value and write one summary row each.
    Sweep {
        file: PathBuf,
        /// Dotted field path, e.g. `attack.0.gamma` or `model.generators.0.d`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Parse and validate a scenario without running it.
    Validate { file: PathBuf },
}

fn load(file: &Path) -> Result<Scenario, RunError> {
    Ok(load_scenario(file)?)
}

fn execute(cli: &Cli) -> Result<(), RunError> {
    let Format::Csv = cli.format;
    match &cli.command {
        Command::Run { file } => {
            let s = load(file)?;
            let report = run(&s, &cli.out_dir)?;
            let m = &report.summary;
            println!("scenario {}", report.scenario);
            println!("  max |delta_omega|   {:.6e} pu", m.max_abs_delta_omega);
            println!("  max |dV_DC|/V_DC*   {:.6e}", m.max_abs_dvdc);
            println!("  trips               {}", m.trip_count);
            println!("  alarms              {}", m.alarm_count);
            println!("  attack success      {}", m.attack_success);
            println!("  portrait inside     {:.2} %", 100.0 * m.inside_fraction);
            for (machine, t) in &m.breaker_openings {
                println!("  breaker opened      machine {machine} at {t} s");
            }
            for f in &report.files {
                println!("  wrote {}", f.display());
            }
        }
        Command::Analytic { file } => {
            let s = load(file)?;
            let path = run_analytic(&s, &cli.out_dir)?;
            println!("wrote {}", path.display());
        }
        Command::Sweep { file, param, values } => {
            let s = load(file)?;
            let points = sweep(&s, param, values)?;
            let path = cli.out_dir.join(format!("{}_sweep.csv", s.name));
            write_atomic(&path, &sweep_csv(&header_comment(&s), param, &points))?;
            for p in &points {
                match &p.outcome {
                    Ok(m) => println!(
                        "{param} = {}: trips {}, max |delta_omega| {:.3e}",
                        p.value, m.trip_count, m.max_abs_delta_omega
                    ),
                    Err(e) => println!("{param} = {}: {e}", p.value),
                }
            }
            println!("wrote {}", path.display());
            if let Some(err) = points.into_iter().find_map(|p| p.outcome.err()) {
                return Err(err);
            }
        }
        Command::Validate { file } => {
            let s = load(file)?;
            println!(
                "{}: valid ({} machines, {} attacks, {} faults)",
                s.name,
                s.model.machine_count(),
                s.attacks.len(),
                s.faults.len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
