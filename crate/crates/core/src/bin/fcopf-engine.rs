use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fcopf::compare::cmd_compare;
use fcopf::fcopf::Weights;
use fcopf::netmodel::random::{random_radial_network, RandomNetworkOptions};
use fcopf::netmodel::{build_cigre_lv_fixture, parse_network, Network};
use fcopf::study::{run_study, StudyKind, StudyOptions};
use fcopf::Error;

#[derive(Parser)]
#[command(name = "fcopf-engine", version, about = "Unbalanced distribution network studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Power flow (every unit at capacity unless --no-dg)
    Pf(RunArgs),
    /// Short-circuit study of every fault scenario
    Sc(RunArgs),
    /// Minimum-cost optimal power flow
    Opf(RunArgs),
    /// Fault-current-constrained optimal power flow
    Fcopf(RunArgs),
    /// Compare result files side by side
    Compare {
        #[arg(required = true)]
        results: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Fixture {
    CigreLv,
    Random,
}

#[derive(Args)]
struct RunArgs {
    /// Network document (JSON)
    network: Option<PathBuf>,
    #[arg(long, value_enum, conflicts_with = "network")]
    fixture: Option<Fixture>,
    /// Keep every dispatchable unit off
    #[arg(long)]
    no_dg: bool,
    #[arg(long, default_value_t = 1.0)]
    w_cost: f64,
    #[arg(long, default_value_t = 1.0)]
    w_fault: f64,
    /// Upper bound on every fault current (A)
    #[arg(long)]
    hard_cap: Option<f64>,
    /// Directory for CSV tables
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value = "result.json")]
    out: PathBuf,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Seed of the random test network
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn load_network(args: &RunArgs) -> Result<Network, String> {
    match (&args.network, args.fixture) {
        (_, Some(Fixture::CigreLv)) => Ok(build_cigre_lv_fixture()),
        (_, Some(Fixture::Random)) => Ok(random_radial_network(args.seed, &RandomNetworkOptions::default())),
        (Some(path), None) => {
            let doc = fs::read_to_string(path).map_err(|e| format!("cannot read `{}`: {e}", path.display()))?;
            parse_network(&doc).map_err(|e| format!("{}: {e}", path.display()))
        }
        (None, None) => Err("give a network file or --fixture".into()),
    }
}

fn is_solver_failure(e: &Error) -> bool {
    matches!(e, Error::NonConvergence { .. } | Error::Solver { .. } | Error::Singular(_))
}

fn run(kind: StudyKind, args: RunArgs) -> ExitCode {
    let net = match load_network(&args) {
        Ok(n) => n,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let opts = StudyOptions {
        no_dg: args.no_dg,
        weights: Weights {
            cost: args.w_cost,
            fault: args.w_fault,
        },
        hard_cap_amps: args.hard_cap,
        tol: args.tol,
        max_iter: args.max_iter,
    };
    let result = match run_study(kind, &net, &opts) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if is_solver_failure(&e) { 2 } else { 1 });
        }
    };
    print!("{}", result.render());
    if let Err(e) = result.write(&args.out) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    if let Some(dir) = &args.csv {
        if let Err(e) = result.write_csv(dir) {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    if result.diagnostics.succeeded() {
        ExitCode::SUCCESS
    } else {
        eprintln!("error: solver finished with status {}", result.diagnostics.status);
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Pf(a) => run(StudyKind::PowerFlow, a),
        Command::Sc(a) => run(StudyKind::ShortCircuit, a),
        Command::Opf(a) => run(StudyKind::Opf, a),
        Command::Fcopf(a) => run(StudyKind::Fcopf, a),
        Command::Compare { results } => match cmd_compare(&results) {
            Ok(c) => {
                print!("{}", c.render());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
    }
}
