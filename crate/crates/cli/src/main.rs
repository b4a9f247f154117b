use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use vpp_cli::report::p_label;
use vpp_cli::{
    cmd_dag, cmd_export_lp, cmd_generate, cmd_offer_curves, cmd_solve, cmd_sweep, cmd_validate, CliError, GridSpec,
    ModelSelector, RunOptions, EXIT_SOLVER, EXIT_VALIDATION,
};
use vpp_core::dataset::DEFAULT_SEED;

#[derive(Parser)]
#[command(name = "vpp", version, about = "Offering strategy of a virtual power plant under uncertainty")]
struct Cli {
    /// Dataset config file.
    #[arg(long, global = true, default_value = "vpp.toml")]
    config: PathBuf,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for independent solves (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for `generate`.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Relative MIP gap, overriding the config.
    #[arg(long, global = true)]
    gap: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the dataset and report every violation.
    Validate,
    /// Self-schedule the contract portfolio against a price series.
    Dag {
        /// `hour,price` CSV; defaults to the expected day-ahead price.
        #[arg(long)]
        prices: Option<PathBuf>,
    },
    /// Solve once at a regret limit.
    Solve {
        /// Relative regret limit; omit for the risk-neutral model.
        #[arg(long, value_parser = parse_p)]
        p: Option<f64>,
    },
    /// Sweep p downward from the risk-neutral regret until infeasible.
    Sweep {
        /// Number of equal steps from the risk-neutral regret to zero.
        #[arg(long, conflicts_with_all = ["start", "p_list"])]
        steps: Option<usize>,
        #[arg(long, requires_all = ["step", "stop"], conflicts_with = "p_list")]
        start: Option<f64>,
        #[arg(long, requires = "start")]
        step: Option<f64>,
        #[arg(long, requires = "start")]
        stop: Option<f64>,
        /// Explicit descending p values, comma separated.
        #[arg(long, value_delimiter = ',')]
        p_list: Option<Vec<f64>>,
        /// Also bisect for the smallest feasible p.
        #[arg(long)]
        bisect: bool,
    },
    /// Write the hourly day-ahead offering curves of one solve.
    OfferCurves {
        #[arg(long, value_parser = parse_p)]
        p: Option<f64>,
    },
    /// Write a model in CPLEX LP format.
    ExportLp {
        /// `dag`, `vpp` or `probust@<p>`.
        #[arg(long)]
        model: ModelSelector,
        /// Price series for the `dag` model.
        #[arg(long)]
        prices: Option<PathBuf>,
        /// Target file.
        #[arg(long)]
        output: PathBuf,
    },
    /// Write the synthetic dataset into `--out`.
    Generate,
}

fn parse_p(s: &str) -> Result<f64, String> {
    let p = match s {
        "inf" | "+inf" => f64::INFINITY,
        _ => s.parse::<f64>().map_err(|e| e.to_string())?,
    };
    if p >= 0.0 {
        Ok(p)
    } else {
        Err(format!("p must be >= 0, got {s}"))
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let opts = RunOptions { gap: cli.gap };
    match cli.command {
        Command::Validate => {
            let report = cmd_validate(&cli.config)?;
            for v in &report.violations {
                println!("violation: {v}");
            }
            if report.is_clean() {
                println!(
                    "{}: ok ({} scenarios, {} hours, sha256 {})",
                    report.dataset.name, report.dataset.scenarios, report.dataset.horizon, report.dataset.hash
                );
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(EXIT_VALIDATION as u8))
            }
        }
        Command::Dag { prices } => {
            let r = cmd_dag(&cli.config, prices.as_deref(), &cli.out, &opts)?;
            println!("dag objective {:.6}", r.objective);
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve { p } => {
            let r = cmd_solve(&cli.config, p, &cli.out, &opts)?;
            if r.is_feasible() {
                println!("p {}: expected profit {:.6}, MRR {:.6}", p_label(r.p), r.expected_profit, r.mrr);
                Ok(ExitCode::SUCCESS)
            } else {
                println!("p {}: infeasible", p_label(r.p));
                Ok(ExitCode::from(EXIT_SOLVER as u8))
            }
        }
        Command::Sweep { steps, start, step, stop, p_list, bisect } => {
            let grid = match (start, step, stop, p_list) {
                (Some(start), Some(step), Some(stop), None) => GridSpec::Linear { start, step, stop },
                (None, None, None, Some(list)) => GridSpec::List(list),
                _ => GridSpec::Auto { steps },
            };
            let r = cmd_sweep(&cli.config, &grid, bisect, &cli.out, &opts)?;
            for res in &r.report.results {
                if res.is_feasible() {
                    println!("p {:>10}: expected profit {:.6}, MRR {:.6}", p_label(res.p), res.expected_profit, res.mrr);
                } else {
                    println!("p {:>10}: infeasible", p_label(res.p));
                }
            }
            match r.report.p_min {
                Some(p) => println!("smallest feasible grid p {p:.6}"),
                None => println!("no feasible finite p on the grid"),
            }
            if let Some(p) = r.p_min_bisection {
                println!("bisection p_min {p:.6}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::OfferCurves { p } => {
            cmd_offer_curves(&cli.config, p, &cli.out, &opts)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::ExportLp { model, prices, output } => {
            cmd_export_lp(&cli.config, model, prices.as_deref(), &output, &opts)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Generate => {
            let path = cmd_generate(&cli.out, cli.seed)?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_VALIDATION as u8),
            };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_VALIDATION as u8);
        }
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
