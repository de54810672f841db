use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hj_singular_cli::{builtin, plotdata, runner, CliError, Format, RunOptions};

#[derive(Parser)]
#[command(
    name = "hjsing",
    version,
    about = "Singular characteristics of 2D Hamilton-Jacobi equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run bundled scenarios or scenario files.
    Run {
        /// Scenario names or .toml paths; all bundled scenarios when empty.
        scenarios: Vec<String>,
        /// Output root; each scenario writes to <out>/<name>.
        #[arg(long, env = "HJSING_OUT", default_value = "hjsing-out")]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the propagation step.
        #[arg(long)]
        dt: Option<f64>,
        /// Exit with status 1 when a verifier fails (default).
        #[arg(long, overrides_with = "no_assert")]
        assert: bool,
        /// Report failures without changing the exit status.
        #[arg(long = "no-assert")]
        no_assert: bool,
        /// Arc file format.
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// List bundled scenarios.
    List,
    /// Show a bundled scenario.
    Describe { name: String },
    /// Write polyline files for the arcs, calibrated rays and cone edges of a finished run.
    EmitPlotdata { run_dir: PathBuf },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::List => {
            for n in builtin::names() {
                let sc = builtin::load(n)?;
                println!("{n:<20} {}", sc.summary);
            }
        }
        Command::Describe { name } => {
            let sc = builtin::load(&name)?;
            println!("{}\n\n{}\n{}", sc.name, sc.summary, sc.description.trim());
            println!(
                "\n--- scenario file ---\n{}",
                builtin::source(&name).unwrap_or_default()
            );
        }
        Command::Run {
            scenarios,
            out,
            seed,
            dt,
            assert: _,
            no_assert,
            format,
        } => {
            let names: Vec<String> = if scenarios.is_empty() {
                builtin::names().into_iter().map(String::from).collect()
            } else {
                scenarios
            };
            let opts = RunOptions {
                out,
                seed,
                dt,
                assert: !no_assert,
                format,
            };
            let mut first_err = None;
            for n in &names {
                let sc = builtin::resolve(n)?;
                let mut o = opts.clone();
                o.assert = false;
                let report = runner::run(&sc, &o)?;
                print!("{}", runner::render(&report));
                if opts.assert && !report.passed && first_err.is_none() {
                    first_err = Some(verification_error(&report));
                }
            }
            if let Some(e) = first_err {
                return Err(e);
            }
        }
        Command::EmitPlotdata { run_dir } => {
            for p in plotdata::emit(&run_dir)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn verification_error(report: &runner::RunReport) -> CliError {
    let parts: Vec<String> = report
        .failures()
        .iter()
        .map(|e| match e.params.get("error") {
            Some(serde_json::Value::String(m)) => format!("{}: {m}", e.name),
            _ => e.name.clone(),
        })
        .collect();
    CliError::Verification(format!("scenario `{}` failed: {}", report.scenario, parts.join("; ")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hjsing: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
