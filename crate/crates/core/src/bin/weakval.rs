use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use weakval::catalog;
use weakval::evolution::{evolve_exact, post_select};
use weakval::harness::{
    emit_report, parse_grid, run_scenario, sample_positions, sweep_scenario, Format, Results,
    RunOptions,
};
use weakval::weak::pointer_shift_check;
use weakval::{Result, WeakError};

/// Weak and joint weak measurement simulator.
#[derive(Parser)]
#[command(name = "weakval", version)]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = OutFormat::Csv, global = true)]
    format: OutFormat,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Fock dimension for every oscillator pointer.
    #[arg(long, global = true)]
    dim: Option<usize>,

    /// Absolute pass tolerance on |extracted - analytic|.
    #[arg(long, global = true)]
    tolerance: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios (catalog names or file paths) once each.
    Run {
        #[arg(required = true)]
        scenarios: Vec<String>,
    },
    /// Rerun a scenario over a grid of lambda values and fit the convergence slope.
    Sweep {
        scenario: String,
        #[arg(long, default_value = "0.16,0.08,0.04,0.02")]
        grid: String,
    },
    /// Sample positions of one post-selected pointer.
    Sample {
        scenario: String,
        #[arg(long, default_value_t = 0)]
        pointer: usize,
        #[arg(long, default_value_t = 1_000_000)]
        shots: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Inspect the scenario catalog.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    /// Print available scenario names.
    List,
    /// Print one scenario in the file format.
    Show { scenario: String },
}

fn write_text(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| WeakError::from(e).context(p.display().to_string()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Returns whether every run passed.
fn execute(cli: &Cli) -> Result<bool> {
    let format = match cli.format {
        OutFormat::Csv => Format::Csv,
        OutFormat::Json => Format::Json,
    };
    let opts = RunOptions {
        dim: cli.dim,
        tolerance: cli.tolerance,
    };
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Run { scenarios } => {
            let reports = scenarios
                .iter()
                .map(|name| run_scenario(&catalog::resolve(name)?, &opts))
                .collect::<Result<Vec<_>>>()?;
            emit_report(&Results::Runs(&reports), format, out)?;
            Ok(reports.iter().all(|r| r.pass))
        }
        Command::Sweep { scenario, grid } => {
            let sweep = sweep_scenario(&catalog::resolve(scenario)?, &parse_grid(grid)?, &opts)?;
            emit_report(&Results::Sweep(&sweep), format, out)?;
            eprintln!("{}: fitted slope {:.4}", sweep.scenario, sweep.fitted_slope);
            Ok(sweep.slope_ok() && sweep.reports.iter().all(|r| r.pass))
        }
        Command::Sample {
            scenario,
            pointer,
            shots,
            seed,
        } => {
            let s = catalog::resolve(scenario)?;
            let s = match cli.dim {
                Some(d) => s.with_fock_dim(d),
                None => s,
            };
            let r = post_select(&evolve_exact(&s)?, &s)?;
            let set = sample_positions(&r, *pointer, *shots, *seed)?;
            let text = match format {
                Format::Json => {
                    serde_json::to_string(&set).map_err(|e| WeakError::Numerical(e.to_string()))?
                        + "\n"
                }
                Format::Csv => {
                    let mut t = String::from("position\n");
                    for x in &set.positions {
                        t.push_str(&format!("{x:.11e}\n"));
                    }
                    t
                }
            };
            write_text(&text, cli.out.as_ref())?;
            let (mean, se) = (set.mean(), set.standard_error());
            eprintln!(
                "{}: pointer {pointer}, {shots} shots, mean {mean:.6e} +/- {se:.2e}",
                s.name
            );
            if s.num_pointers() == 1 {
                let (x, _) = pointer_shift_check(&r, &s)?;
                eprintln!("exact <X>_fi = {x:.6e}");
                return Ok((mean - x).abs() <= 5.0 * se);
            }
            Ok(true)
        }
        Command::Catalog {
            action: CatalogAction::List,
        } => {
            write_text(&(catalog::list().join("\n") + "\n"), cli.out.as_ref())?;
            Ok(true)
        }
        Command::Catalog {
            action: CatalogAction::Show { scenario },
        } => {
            write_text(
                &(weakval::scenario_to_json(&catalog::resolve(scenario)?) + "\n"),
                cli.out.as_ref(),
            )?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
