//! `treecast` command-line interface.
//!
//! Exit status is 0 on success, 1 for invalid input (bad flags, files,
//! schemas or configuration) and 2 for failures while computing.

mod commands;
mod manifest;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "treecast", version, about = "Tree-structured predictive distributions for signal panels")]
struct Cli {
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct PanelArgs {
    /// Panel CSV: `date,<signal>...,<target>`.
    #[arg(long)]
    pub panel: PathBuf,
    /// Name of the target column.
    #[arg(long)]
    pub target: String,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Widest tree on the expanding window up to a date.
    Tree {
        #[command(flatten)]
        panel: PanelArgs,
        /// Last date of the window; defaults to the last panel date.
        #[arg(long)]
        as_of: Option<String>,
        /// Output JSON file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Attachment node and conditioning path at a date.
    Attach {
        #[command(flatten)]
        panel: PanelArgs,
        #[arg(long)]
        as_of: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predictive distribution of the return following a date.
    Predict {
        #[command(flatten)]
        panel: PanelArgs,
        #[arg(long)]
        as_of: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Walk-forward evaluation over the panel.
    Backtest {
        #[command(flatten)]
        panel: PanelArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthetic regime-switching panel.
    Simulate {
        /// Flat `key = value` model parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output panel CSV; `regimes.csv` is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Numerical check of the tree properties on a panel.
    VerifyProps {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long, default_value = "ret")]
        target: String,
        #[arg(long, default_value = "upper")]
        side: String,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plot-ready long-format series from a walk-forward run.
    Report {
        #[command(flatten)]
        panel: PanelArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Input that cannot be processed as given.
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Invalid>().is_some() {
        return 1;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<treecast::Error>() {
            return if e.is_validation() { 1 } else { 2 };
        }
    }
    2
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Invalid("--jobs must be at least 1".into()).into());
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    pool.install(|| match cli.command {
        Command::Tree { panel, as_of, out } => commands::tree(&panel, as_of.as_deref(), &out),
        Command::Attach { panel, as_of, out } => commands::attach(&panel, as_of.as_deref(), &out),
        Command::Predict { panel, as_of, out } => commands::predict(&panel, as_of.as_deref(), &out),
        Command::Backtest { panel, out } => commands::backtest(&panel, &out),
        Command::Simulate { config, seed, out } => commands::simulate(config.as_deref(), seed, &out),
        Command::VerifyProps {
            panel,
            target,
            side,
            tolerance,
            out,
        } => commands::verify_props(&panel, &target, &side, tolerance, &out),
        Command::Report { panel, out } => commands::report(&panel, &out),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::new().parse_filters(level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            for cause in err.chain().skip(1) {
                eprintln!("  caused by: {cause}");
            }
            if let Some(hint) = commands::hint(&err) {
                eprintln!("hint: {hint}");
            }
            ExitCode::from(exit_code(&err))
        }
    }
}
