use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fracsup_cli::config::{parse_scenario_str, Scenario};
use fracsup_cli::run::{self, CliError, EXIT_IO, EXIT_PARSE};

#[derive(Parser)]
#[command(
    name = "fracsup",
    about = "Variational solver for superpositions of fractional p-Laplacians",
    version
)]
struct Cli {
    /// Size of the global thread pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the solver RNG seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: config `outputs`, else cwd).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the grid spacing from the config.
    #[arg(long)]
    h: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the free energy J for a linear-source problem.
    Solve(ScenarioArgs),
    /// Run the numerical mountain pass for a nonlinear problem.
    Mountainpass(ScenarioArgs),
    /// Verification commands for the structural theorems and examples.
    Verify {
        #[command(subcommand)]
        what: VerifyCommand,
    },
    /// Empirical embedding/comparison/reabsorption constants for a scenario.
    EstimateConstants {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Probe family size.
        #[arg(long, default_value_t = 64)]
        probes: usize,
    },
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Check the reabsorption inequality on a probe family.
    Reabsorption {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 64)]
        probes: usize,
    },
    /// Divergent-energy series with convergent membership norm.
    Appendix1 {
        /// Ambient dimension.
        #[arg(long = "N", visible_alias = "n")]
        n: u32,
        /// Series exponent parameter in (0,1).
        #[arg(long)]
        eps: f64,
        /// Series truncation.
        #[arg(long = "K", visible_alias = "k", default_value_t = 1024)]
        k: usize,
        /// Grid spacing for the quadrature spot checks.
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-norm, divergent-energy density example.
    Appendix2 {
        #[arg(long = "N", visible_alias = "n", default_value_t = 2)]
        n: u32,
        /// Quadrature panels per dyadic piece.
        #[arg(long, default_value_t = 64)]
        panels: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Probe-based norm axiom checks for the scenario measure.
    NormAxioms {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 64)]
        probes: usize,
    },
    /// Structural hypothesis report for the scenario measure.
    Hypotheses {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
}

fn load_scenario(args: &ScenarioArgs) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| CliError {
        code: EXIT_IO,
        message: format!("cannot read config {}: {e}", args.config.display()),
    })?;
    let mut sc = parse_scenario_str(&text, args.h)?;
    if let Some(seed) = args.seed {
        sc.solver.rng_seed = seed;
    }
    Ok(sc)
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Solve(args) => {
            let sc = load_scenario(args)?;
            run::run_solve(&sc, &args.out)
        }
        Command::Mountainpass(args) => {
            let sc = load_scenario(args)?;
            run::run_mountain_pass(&sc, &args.out)
        }
        Command::Verify { what } => match what {
            VerifyCommand::Reabsorption { scenario, probes } => {
                let sc = load_scenario(scenario)?;
                run::run_verify_reabsorption(&sc, &scenario.out, *probes)
            }
            VerifyCommand::Appendix1 { n, eps, k, h, out } => {
                run::run_verify_appendix1(*n, *eps, *k, *h, out)
            }
            VerifyCommand::Appendix2 { n, panels, out } => {
                run::run_verify_appendix2(*n, *panels, out)
            }
            VerifyCommand::NormAxioms { scenario, probes } => {
                let sc = load_scenario(scenario)?;
                run::run_verify_norm_axioms(&sc, &scenario.out, *probes)
            }
            VerifyCommand::Hypotheses { scenario } => {
                let sc = load_scenario(scenario)?;
                run::run_verify_hypotheses(&sc, &scenario.out)
            }
        },
        Command::EstimateConstants { scenario, probes } => {
            let sc = load_scenario(scenario)?;
            run::run_estimate_constants(&sc, &scenario.out, *probes)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot size thread pool: {e}");
            return ExitCode::from(EXIT_PARSE as u8);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
