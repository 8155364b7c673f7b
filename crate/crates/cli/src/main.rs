use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qprob::qrv::DEFAULT_GROUPING_TOL;
use qprob::Tolerances;
use qprob_cli::commands::{self, Factor};
use qprob_cli::{run_campaign, CampaignConfig, CliError, CliResult, Instance, Theorem};
use serde_json::Value;

#[derive(Parser)]
#[command(name = "qprob", version, about = "Quantum probability calculus on finite sample spaces")]
struct Cli {
    /// Residual tolerance
    #[arg(long, global = true, env = "QPROB_DEFAULT_TOL", default_value_t = 1e-8)]
    tol: f64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Load {
    /// Instance file (JSON)
    instance: PathBuf,

    /// Symmetrize non-Hermitian matrices with a warning instead of failing
    #[arg(long)]
    lenient: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random instance: measures nu1, nu2, PSD variable psi, partition F
    Gen {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 4)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path; stdout if omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quantum expectation E_nu[psi]
    Expect {
        #[command(flatten)]
        load: Load,
        #[arg(long)]
        measure: String,
        #[arg(long)]
        qrv: String,
    },
    /// Radon-Nikodym derivative d(num)/d(den), per point
    Rnderiv {
        #[command(flatten)]
        load: Load,
        #[arg(long)]
        num: String,
        #[arg(long)]
        den: String,
    },
    /// psi ⊠ phi in the context of a measure; phi is a stored variable or d(num)/d(measure)
    #[command(group = clap::ArgGroup::new("factor").required(true).args(["phi", "num"]))]
    Boxtimes {
        #[command(flatten)]
        load: Load,
        #[arg(long)]
        qrv: String,
        /// Context measure
        #[arg(long)]
        measure: String,
        #[arg(long)]
        phi: Option<String>,
        #[arg(long)]
        num: Option<String>,
    },
    /// Conditional expectation of psi given a partition
    Condexp {
        #[command(flatten)]
        load: Load,
        #[arg(long)]
        measure: String,
        #[arg(long)]
        qrv: String,
        #[arg(long)]
        partition: String,
    },
    /// Law (pushforward) of psi under a measure
    Law {
        #[command(flatten)]
        load: Load,
        #[arg(long)]
        measure: String,
        #[arg(long)]
        qrv: String,
        /// Values closer than this in Frobenius norm are grouped together
        #[arg(long, default_value_t = DEFAULT_GROUPING_TOL)]
        grouping_tol: f64,
    },
    /// Parse an instance and report diagnostics
    Validate {
        #[command(flatten)]
        load: Load,
    },
    /// Run a seeded verification campaign for one theorem
    Verify {
        #[arg(value_enum)]
        theorem: Theorem,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fixed dimension; drawn per trial if omitted
        #[arg(long)]
        dim: Option<usize>,
        /// Fixed number of points; drawn per trial if omitted
        #[arg(long)]
        points: Option<usize>,
        /// Worker threads (results do not depend on this)
        #[arg(long)]
        threads: Option<usize>,
        /// Report path; stdout if omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(l: &Load, tol: &Tolerances) -> CliResult<Instance> {
    let inst = Instance::load(&l.instance, l.lenient, tol)?;
    for w in &inst.warnings {
        eprintln!("warning: {w}");
    }
    Ok(inst)
}

fn print(value: &Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("JSON values serialize"));
}

fn write_or_print(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io { path: path.to_owned(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> CliResult<ExitCode> {
    if !(cli.tol.is_finite() && cli.tol > 0.0) {
        return Err(CliError::Usage(format!("tolerance must be positive and finite, got {}", cli.tol)));
    }
    let tol = Tolerances::with_residual(cli.tol);
    let value = match cli.command {
        Command::Gen { dim, points, seed, out } => {
            write_or_print(out.as_deref(), &commands::generate(dim, points, seed)?.to_json())?;
            return Ok(ExitCode::SUCCESS);
        }
        Command::Expect { load: l, measure, qrv } => commands::expect(&load(&l, &tol)?, &measure, &qrv)?,
        Command::Rnderiv { load: l, num, den } => commands::rnderiv(&load(&l, &tol)?, &num, &den, &tol)?,
        Command::Boxtimes { load: l, qrv, measure, phi, num } => {
            let factor = match (&phi, &num) {
                (Some(p), _) => Factor::Qrv(p),
                (None, Some(n)) => Factor::DerivativeOf(n),
                (None, None) => unreachable!("clap enforces the factor group"),
            };
            commands::boxtimes_cmd(&load(&l, &tol)?, &qrv, factor, &measure, &tol)?
        }
        Command::Condexp { load: l, measure, qrv, partition } => {
            commands::condexp(&load(&l, &tol)?, &measure, &qrv, &partition, &tol)?
        }
        Command::Law { load: l, measure, qrv, grouping_tol } => {
            commands::law_cmd(&load(&l, &tol)?, &measure, &qrv, grouping_tol)?
        }
        Command::Validate { load: l } => commands::validate(&load(&l, &tol)?, &tol)?,
        Command::Verify { theorem, trials, seed, dim, points, threads, out } => {
            let cfg = CampaignConfig { theorem, trials, seed, dim, points, tol: cli.tol, threads };
            let report = run_campaign(&cfg)?;
            write_or_print(out.as_deref(), &report.to_json())?;
            eprintln!("{}", report.summary());
            return Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
    };
    print(&value);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
