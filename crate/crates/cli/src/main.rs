//! `mpp`: runs inequality suites, parameter scans, extremal searches, height
//! decompositions, and DP-versus-enumeration oracles on exact finite
//! filtered probability spaces.
//!
//! Exit codes: 0 when every check that carries an explicit constant passes
//! and every oracle comparison matches; 1 on a bound or oracle failure;
//! 2 on a configuration error.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Outcome;
use config::{ConfigError, GeneratorKind, OutputFormat, RunConfig};

#[derive(Parser)]
#[command(name = "mpp", version, about = "Martingale paraproduct inequality verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON config file; flags override file values
    #[arg(long)]
    config: Option<String>,
    /// Input generator kind
    #[arg(long, value_enum)]
    generator: Option<GeneratorKind>,
    /// Filtration depth of generated inputs
    #[arg(long)]
    depth: Option<u32>,
    /// Seed for all generated inputs
    #[arg(long)]
    seed: Option<u64>,
    /// Conditional probability of the left child for biased trees
    #[arg(long)]
    bias: Option<f64>,
    /// Load the space and processes f, g, w from a JSON document instead
    #[arg(long)]
    space: Option<String>,
    /// Grid of first exponents
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    /// Grid of second exponents
    #[arg(long, value_delimiter = ',')]
    q: Option<Vec<f64>>,
    /// Grid of variation exponents
    #[arg(long, value_delimiter = ',')]
    rho: Option<Vec<f64>>,
    /// Grid of jump thresholds
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    /// Grid of decomposition heights, as multiples of the L1 norm
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    /// Report format
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Output path (stdout when absent)
    #[arg(long)]
    out: Option<String>,
    /// Multiplicative slack on explicit constants (default 1e-9)
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full check suite once at the first value of each grid
    Verify(CommonArgs),
    /// Run every applicable check over the Cartesian parameter grid
    Scan(CommonArgs),
    /// Hill-climb for ratio-extremal inputs of one check
    Search {
        #[command(flatten)]
        common: CommonArgs,
        /// Check id to maximize (e.g. lepingle, thm_variation, doob)
        #[arg(long)]
        target: Option<String>,
        /// Proposals per restart
        #[arg(long)]
        iterations: Option<usize>,
        /// Independent restarts (run in parallel)
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Decompose the generated martingale at the configured heights
    Decompose(CommonArgs),
    /// Compare the variation/jump DP against exhaustive enumeration
    Oracle {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of generated instances
        #[arg(long)]
        count: Option<usize>,
    },
}

impl CommonArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(kind) = self.generator {
            cfg.generator.kind = kind;
        }
        if let Some(depth) = self.depth {
            cfg.generator.depth = Some(depth);
        }
        if let Some(seed) = self.seed {
            cfg.generator.seed = seed;
        }
        if self.bias.is_some() {
            cfg.generator.bias = self.bias;
        }
        if self.space.is_some() {
            cfg.space = self.space.clone();
        }
        macro_rules! override_field {
            ($($name:ident),*) => {
                $(if let Some(v) = &self.$name { cfg.$name = v.clone(); })*
            };
        }
        override_field!(p, q, rho, lambda, alpha);
        if let Some(format) = self.format {
            cfg.format = format;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        if self.tolerance.is_some() {
            cfg.tolerance = self.tolerance;
        }
    }
}

fn init_thread_pool() {
    if let Ok(value) = std::env::var("MPP_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
            }
        }
    }
}

fn resolve(common: &CommonArgs) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    common.apply(&mut cfg);
    Ok(cfg)
}

fn emit(text: &str, out: Option<&str>) -> Result<(), ConfigError> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => std::fs::write(path, text)
            .map_err(|e| ConfigError(format!("out: cannot write {path}: {e}"))),
    }
}

fn run() -> Result<bool, ConfigError> {
    let cli = Cli::parse();
    init_thread_pool();
    let (cfg, outcome) = match &cli.command {
        Command::Verify(common) => {
            let cfg = resolve(common)?;
            cfg.validate("verify")?;
            let out = commands::cmd_verify(&cfg)?;
            (cfg, out)
        }
        Command::Scan(common) => {
            let cfg = resolve(common)?;
            cfg.validate("scan")?;
            let out = commands::cmd_scan(&cfg)?;
            (cfg, out)
        }
        Command::Search { common, target, iterations, restarts } => {
            let mut cfg = resolve(common)?;
            if let Some(t) = target {
                cfg.target = Some(t.clone());
            }
            if let Some(i) = iterations {
                cfg.iterations = *i;
            }
            if let Some(r) = restarts {
                cfg.restarts = *r;
            }
            cfg.validate("search")?;
            let out = commands::cmd_search(&cfg)?;
            (cfg, out)
        }
        Command::Decompose(common) => {
            let cfg = resolve(common)?;
            cfg.validate("decompose")?;
            let out = commands::cmd_decompose(&cfg)?;
            (cfg, out)
        }
        Command::Oracle { common, count } => {
            let mut cfg = resolve(common)?;
            if let Some(c) = count {
                cfg.count = *c;
            }
            cfg.validate("oracle")?;
            let out = commands::cmd_oracle(&cfg)?;
            (cfg, out)
        }
    };
    match outcome {
        Outcome::Reports(reports, failed) => {
            let text = commands::render(&reports, cfg.format)?;
            emit(&text, cfg.out.as_deref())?;
            Ok(failed)
        }
        Outcome::Text(text, failed) => {
            emit(&text, cfg.out.as_deref())?;
            Ok(failed)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}
