//! Command-line driver: reads a TOML run configuration, runs one pipeline
//! per invocation and writes CSV tables plus a manifest.
//!
//! Exit status: 0 on success, 1 when an asserted invariant fails or a module
//! reports an error, 2 when the configuration is rejected (nothing is
//! written in that case).

pub mod config;
pub mod output;
pub mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ConfigError, Pipeline, RunConfig};
use output::Artifacts;
use pipeline::Runner;

#[derive(Debug, Parser)]
#[command(
    name = "hschwarz",
    version,
    about = "Two-level hybrid Schwarz experiments for Helmholtz problems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the pipeline named in the configuration.
    Run(RunArgs),
    /// Run the k-sweep pipeline over the configured wavenumbers.
    Sweep(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `run.output`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 lets the runtime decide.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Seed of every random choice; overrides `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub const EXIT_INVARIANT: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

fn load(args: &RunArgs, sweep: bool) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| ConfigError {
        field: "--config",
        message: format!("{}: {e}", args.config.display()),
    })?;
    let mut cfg = RunConfig::parse(&text)?;
    if sweep {
        cfg.run.pipeline = Pipeline::Sweep;
    }
    if let Some(out) = &args.out {
        cfg.run.output = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    Ok(cfg)
}

/// Runs a parsed command line and maps the outcome to an exit status.
pub fn run(cli: Cli) -> ExitCode {
    let (args, sweep) = match &cli.command {
        Command::Run(a) => (a, false),
        Command::Sweep(a) => (a, true),
    };
    let cfg = match load(args, sweep) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let derived = match cfg.derive() {
        Ok(d) => d,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("configuration error: --threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let mut out = match Artifacts::create(&cfg.run.output) {
        Ok(o) => o,
        Err(e) => {
            eprintln!(
                "configuration error: run.output: {}: {e}",
                cfg.run.output.display()
            );
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    let mut runner = Runner {
        config: &cfg,
        derived: &derived,
        out: &mut out,
        failures: Vec::new(),
    };
    let result = pool.install(|| runner.run());
    let mut failures = std::mem::take(&mut runner.failures);
    if let Err(e) = &result {
        failures.push(format!("runtime error in {e}"));
    }

    let status = if result.is_err() {
        "runtime error"
    } else if failures.is_empty() {
        "ok"
    } else {
        "invariant failed"
    };
    let head = [
        ("version", env!("CARGO_PKG_VERSION").to_string()),
        ("command", if sweep { "sweep" } else { "run" }.to_string()),
        ("pipeline", format!("{:?}", cfg.run.pipeline).to_lowercase()),
        ("seed", cfg.run.seed.to_string()),
        ("threads", pool.current_num_threads().to_string()),
        ("status", status.to_string()),
    ];
    let discretisation: String = derived
        .iter()
        .map(|d| {
            let s = &d.spec;
            format!(
                "k = {}: p = {}, fine_cells = {}, coarse_cells = {}, per_side = {}, extension = {}, points_per_wavelength = {:.3}\n",
                s.k, s.degree, s.fine_cells, s.coarse_cells, s.per_side, s.extension, d.points_per_wavelength
            )
        })
        .collect();
    let failure_text: String = failures.iter().map(|f| format!("{f}\n")).collect();
    let sections = [
        ("discretisation", discretisation),
        ("failures", failure_text),
        ("config", cfg.to_toml()),
    ];
    if let Err(e) = out.manifest(&head, &sections) {
        eprintln!("error writing manifest: {e}");
        return ExitCode::from(EXIT_INVARIANT);
    }
    for f in &failures {
        eprintln!("{f}");
    }
    if failures.is_empty() {
        println!(
            "{status}: wrote {} artifacts to {}",
            out.files().len() + 1,
            out.dir().display()
        );
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_INVARIANT)
    }
}
