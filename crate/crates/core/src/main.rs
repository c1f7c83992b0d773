use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cpi_core::experiment::{run, Experiment, RunConfig};
use cpi_core::Error;

/// Conformalized percentile intervals: experiment runner.
#[derive(Parser)]
#[command(name = "cpi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// CPI vs DCP on PIT values drawn from a Beta law.
    PitBench {
        #[command(flatten)]
        common: Common,
        /// Comma-separated starting points z.
        #[arg(long)]
        z_values: Option<String>,
        #[arg(long)]
        beta_a: Option<String>,
        #[arg(long)]
        beta_b: Option<String>,
    },
    /// All methods on the synthetic process.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Models trained without shift, calibrated and tested under each shift.
    Shift {
        #[command(flatten)]
        common: Common,
        /// Comma-separated location shifts.
        #[arg(long)]
        deltas: Option<String>,
    },
    /// Repeated 45/35/20 partitions of a CSV file.
    Real {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        csv: Option<String>,
        /// Name of the response column.
        #[arg(long)]
        response: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// Plain-text `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Full-size replication counts (1000 for simulate and shift).
    #[arg(long)]
    full_scale: bool,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    n_train: Option<String>,
    #[arg(long)]
    n_cal: Option<String>,
    #[arg(long)]
    n_test: Option<String>,
    #[arg(long)]
    replications: Option<String>,
    /// Comma-separated subset of cpi,dcp,residual,rescaled,cqr.
    #[arg(long)]
    methods: Option<String>,
    /// fixed:<z>, grid or amortized.
    #[arg(long)]
    z_strategy: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    run_id: Option<String>,
    /// Caps the epoch budget of every network.
    #[arg(long)]
    max_epochs: Option<String>,
    /// Response bins of the hazard network.
    #[arg(long)]
    bins: Option<String>,
    /// Grid size for the per-point z search.
    #[arg(long)]
    grid_points: Option<String>,
    #[arg(long)]
    curve_points: Option<String>,
}

impl Common {
    fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("alpha", &self.alpha),
            ("n_train", &self.n_train),
            ("n_cal", &self.n_cal),
            ("n_test", &self.n_test),
            ("replications", &self.replications),
            ("methods", &self.methods),
            ("z_strategy", &self.z_strategy),
            ("seed", &self.seed),
            ("workers", &self.workers),
            ("out", &self.out),
            ("run_id", &self.run_id),
            ("max_epochs", &self.max_epochs),
            ("bins", &self.bins),
            ("grid_points", &self.grid_points),
            ("curve_points", &self.curve_points),
        ]
    }
}

fn resolve(command: &Command) -> cpi_core::Result<RunConfig> {
    let (experiment, common, extra): (Experiment, &Common, Vec<(&str, &Option<String>)>) = match command {
        Command::PitBench {
            common,
            z_values,
            beta_a,
            beta_b,
        } => (
            Experiment::PitBench,
            common,
            vec![("z_values", z_values), ("beta_a", beta_a), ("beta_b", beta_b)],
        ),
        Command::Simulate { common } => (Experiment::Simulate, common, vec![]),
        Command::Shift { common, deltas } => (Experiment::Shift, common, vec![("deltas", deltas)]),
        Command::Real { common, csv, response } => {
            (Experiment::Real, common, vec![("csv", csv), ("response", response)])
        }
    };
    let mut cfg = RunConfig::defaults(experiment);
    if let Some(path) = &common.config {
        cfg.apply_text(&std::fs::read_to_string(path)?)?;
    }
    if common.full_scale {
        cfg.full_scale();
    }
    for (key, value) in common.pairs().into_iter().chain(extra) {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = resolve(&cli.command).and_then(|cfg| run(&cfg));
    match result {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e @ Error::InvalidConfig { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
