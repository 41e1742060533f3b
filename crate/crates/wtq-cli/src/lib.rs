//! Library side of the `wtq` batch runner: argument model, subcommand
//! implementations, and CSV / manifest output.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::ExperimentConfig;
pub use output::{Report, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] wtq::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => e.exit_code(),
            CliError::Config(_) => 1,
            CliError::Io(_) | CliError::Csv(_) => 2,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            CliError::Core(e) => serde_json::to_value(e.to_report()).unwrap_or_default(),
            other => serde_json::json!({
                "kind": if matches!(other, CliError::Config(_)) { "domain" } else { "io" },
                "message": other.to_string(),
                "exit_code": other.exit_code(),
            }),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "wtq",
    version,
    about = "Experiments for the weak-turbulence limit of the quintic Schrödinger equation",
    long_about = "Each subcommand writes one or more long-format CSV files plus `manifest.json` \
                  (config echo, version, seed, workers, wall time) into the output directory. \
                  Exit codes: 0 ok, 1 domain/config error, 2 resource or numerical failure; \
                  failures also write `error.json`."
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// JSON experiment configuration; unknown keys are rejected.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", env = "WTQ_OUT_DIR", default_value = "wtq-out")]
    pub out: PathBuf,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Seed for Monte-Carlo estimates (overrides the config).
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Largest tree order enumerated.
    #[arg(long, global = true, value_name = "N", default_value_t = wtq::trees::DEFAULT_TREE_CAP)]
    pub cap_trees: usize,
    /// Largest number of lattice tuples a single sum may visit.
    #[arg(long, global = true, value_name = "N", default_value_t = 50_000_000_000)]
    pub cap_lattice: u64,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Enumerate quintic trees with n nodes.
    ///
    /// trees.csv: index, tree (bracket form), nodes, leaves, sign_exponent,
    /// linear_extensions.
    Trees {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Exact G_M values against the quadrature oracle plus the case audit.
    ///
    /// gm.csv: instance, omegas, kind, predicted_power, fitted_power,
    /// modulus_ok, t, re, im, oracle_abs_diff.
    Gm,
    /// Tree sum versus Picard recursion, coefficientwise.
    ///
    /// picard.csv: n, k, t, coefficients, max_rel_dev.
    Picard,
    /// n = 1 mass-derivative tables.
    ///
    /// mass.csv: lattice_size, k, t, exact, main, remainder, literal_remainder,
    /// finite_difference, mc_mass, mc_stderr, exact_mass.
    Mass,
    /// Lattice pairings I_L(t) over L against the continuum integral.
    ///
    /// kinetic_sum.csv: lattice_size, t, rho, mu, value, continuum,
    /// continuum_error, abs_gap, rel_gap.
    KineticSum,
    /// ρ-sweep of the continuum integral towards the δ-reduced integral.
    ///
    /// kinetic_limit.csv: rho, t, mu, continuum, continuum_error, gap,
    /// gap_error, delta_reduced, delta_reduced_error.
    KineticLimit,
    /// Counts of mod-3 frequency classes.
    ///
    /// residues.csv: residue, count.
    Residues,
    /// Check a power-law regime against the standing assumptions.
    ///
    /// regime.csv: condition, symbolic, pass, numeric_trend_ok, lattice_size,
    /// ratio; regime.json: the full report.
    Regime,
    /// Dyadic versus one-third kinetic constants.
    ///
    /// discontinuity.csv: branch, net_cosine_weight, prelimit_coefficient,
    /// limit_coefficient, dyadic_over_branch.
    Discontinuity,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Trees { .. } => "trees",
            Command::Gm => "gm",
            Command::Picard => "picard",
            Command::Mass => "mass",
            Command::KineticSum => "kinetic-sum",
            Command::KineticLimit => "kinetic-limit",
            Command::Residues => "residues",
            Command::Regime => "regime",
            Command::Discontinuity => "discontinuity",
        }
    }
}

/// Run one subcommand, returning its tables and summary without touching disk.
pub fn execute(command: &Command, cfg: &ExperimentConfig, opts: &GlobalOpts) -> Result<Report, CliError> {
    cfg.validate()?;
    match command {
        Command::Trees { n } => commands::trees(*n, cfg, opts),
        Command::Gm => commands::gm(cfg),
        Command::Picard => commands::picard(cfg, opts),
        Command::Mass => commands::mass(cfg, opts),
        Command::KineticSum => commands::kinetic_sum(cfg, opts),
        Command::KineticLimit => commands::kinetic_limit(cfg),
        Command::Residues => Ok(commands::residues()),
        Command::Regime => commands::regime(cfg),
        Command::Discontinuity => Ok(commands::discontinuity()),
    }
}
