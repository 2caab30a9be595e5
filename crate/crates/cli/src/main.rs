//! `magflow`: runs scenario files and writes reports.
//!
//! Exit codes: 0 when every assertion passes, 1 on a failed assertion or a
//! runtime error, 2 on a schema violation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use magflow_core::scenario::{
    load_config, run_scenario, Overrides, Scenario, ScenarioKind, EXIT_ASSERTION, EXIT_OK, EXIT_SCHEMA,
};
use magflow_core::Error;

#[derive(Parser)]
#[command(name = "magflow", version, about = "Closed orbits of magnetic flows on tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Isoperimetric and growth constants with the δ thresholds.
    Constants(RunArgs),
    /// Multi-start survey of critical loops in a class.
    Orbits(RunArgs),
    /// Random-loop checks of the isoperimetric and coercivity bounds.
    Isoperimetric(RunArgs),
    /// Integrates the Hamiltonian flow from an initial state.
    Flow(RunArgs),
    /// Morse index of a constant loop over a grid of field strengths.
    IndexSweep(RunArgs),
    /// Runs the scenario named in the config (`full_report` by default).
    Report(RunArgs),
    /// Checks a config and prints warnings without running it.
    Validate(ConfigArg),
}

#[derive(Args)]
struct ConfigArg {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; `outputs.dir` from the config, else `magflow-out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `solver.rng_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `solver.samples` and the index-sweep resolutions.
    #[arg(long)]
    resolution: Option<usize>,
}

fn prepare(path: &PathBuf, overrides: Overrides) -> Result<Scenario, ExitCode> {
    let mut cfg = load_config(path).map_err(report_error)?;
    overrides.apply(&mut cfg);
    magflow_core::scenario::build_scenario(cfg).map_err(report_error)
}

fn report_error(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config { .. } => ExitCode::from(EXIT_SCHEMA as u8),
        _ => ExitCode::from(EXIT_ASSERTION as u8),
    }
}

fn print_diagnostics(sc: &Scenario) {
    for n in &sc.notices {
        eprintln!("notice: {n}");
    }
    for w in &sc.warnings {
        eprintln!("warning: {w}");
    }
}

fn configure_threads() -> Result<(), ExitCode> {
    let Ok(value) = std::env::var("MAGFLOW_THREADS") else {
        return Ok(());
    };
    let threads: usize = match value.trim().parse() {
        Ok(n) if n >= 1 => n,
        _ => {
            eprintln!("error: MAGFLOW_THREADS must be a positive integer, got `{value}`");
            return Err(ExitCode::from(EXIT_SCHEMA as u8));
        }
    };
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_ASSERTION as u8)
    })
}

fn run(kind: Option<ScenarioKind>, args: RunArgs) -> Result<ExitCode, ExitCode> {
    let sc = prepare(&args.config, Overrides { seed: args.seed, resolution: args.resolution })?;
    print_diagnostics(&sc);
    let out = args
        .out
        .or_else(|| sc.config.outputs.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("magflow-out"));
    let outcome = run_scenario(&sc, kind, &out).map_err(report_error)?;
    for a in &outcome.report.assertions {
        let tag = if a.passed { "PASS" } else { "FAIL" };
        println!("{tag} {}: {}", a.name, a.detail);
    }
    println!("report: {}", out.join("report.json").display());
    if outcome.exit_code != EXIT_OK {
        let failed: Vec<&str> = outcome.report.failed().iter().map(|a| a.name.as_str()).collect();
        eprintln!("failed assertions: {}", failed.join(", "));
    }
    Ok(ExitCode::from(outcome.exit_code as u8))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(code) = configure_threads() {
        return code;
    }
    let result = match cli.command {
        Command::Constants(a) => run(Some(ScenarioKind::Constants), a),
        Command::Orbits(a) => run(Some(ScenarioKind::Orbits), a),
        Command::Isoperimetric(a) => run(Some(ScenarioKind::Isoperimetric), a),
        Command::Flow(a) => run(Some(ScenarioKind::Flow), a),
        Command::IndexSweep(a) => run(Some(ScenarioKind::IndexSweep), a),
        Command::Report(a) => run(None, a),
        Command::Validate(a) => prepare(&a.config, Overrides::default()).map(|sc| {
            print_diagnostics(&sc);
            println!("ok: {} ({})", a.config.display(), sc.config.scenario.as_str());
            ExitCode::from(EXIT_OK as u8)
        }),
    };
    result.unwrap_or_else(|code| code)
}
