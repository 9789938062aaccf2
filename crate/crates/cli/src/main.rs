//! `hus`: stability constants, shadowing certificates, built-in
//! scenarios, and parameter sweeps, driven by a JSON configuration.
//!
//! Exit codes: 0 success, 2 bad invocation or configuration, 3 violated
//! precondition, 4 failed certificate or scenario assertion, 5 iteration
//! that did not converge.

// Validation guards are written as `!(x > 0.0)` on purpose: the negated
// comparison also rejects NaN, which `x <= 0.0` would silently accept.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use commands::{cmd_constants, cmd_scenario, cmd_solve, cmd_sweep, Context};
use config::RunConfig;

/// Report format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Anything that stops a run, tagged with who is at fault.
#[derive(Debug)]
pub enum Failure {
    /// Bad invocation, unreadable file, or invalid configuration.
    Usage(String),
    /// The library rejected the inputs or the run itself failed.
    Domain(hus::Error),
}

impl From<hus::Error> for Failure {
    fn from(e: hus::Error) -> Self {
        Failure::Domain(e)
    }
}

impl Failure {
    fn message(&self) -> String {
        match self {
            Failure::Usage(msg) => msg.clone(),
            Failure::Domain(e) => e.to_string(),
        }
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Domain(e) => match e {
                hus::Error::CertificateFailure { .. } => 4,
                hus::Error::NoConvergence { .. } => 5,
                _ => 3,
            },
        }
    }
}

#[derive(Parser)]
#[command(
    name = "hus",
    version,
    about = "Hyers-Ulam stability toolkit: constants, certificates, scenarios, sweeps"
)]
struct Cli {
    /// Print the built-in default configuration as JSON and exit.
    #[arg(long)]
    print_defaults: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Write the report to this file instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Report format. Defaults to json; sweep defaults to csv.
    #[arg(long, value_enum, value_name = "FORMAT")]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute upper and lower stability constants and their gap.
    Constants(CommonArgs),
    /// Certify a shadowing solution near a pseudosolution.
    Solve(CommonArgs),
    /// Run a built-in scenario and check its assertions.
    Scenario {
        /// One of: sine, sharpness, pq_counterexample, 2d_minimal,
        /// unbounded_residual.
        name: String,

        /// Override a scenario parameter, e.g. --param a=2 (repeatable;
        /// "inf" is a valid value).
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,

        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the configured parameter sweep and emit a table.
    Sweep(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Constants(c) | Command::Solve(c) | Command::Sweep(c) => c,
            Command::Scenario { common, .. } => common,
        }
    }

    fn default_format(&self) -> Format {
        match self {
            Command::Sweep(_) => Format::Csv,
            _ => Format::Json,
        }
    }
}

fn sha_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = std::fmt::Write::write_fmt(&mut out, format_args!("{byte:02x}"));
    }
    out
}

/// Loads the configuration and fixes the hash every report will carry:
/// the raw file bytes when a file is given, the canonical JSON of the
/// defaults otherwise.
fn load_context(path: Option<&Path>) -> Result<Context, Failure> {
    match path {
        Some(p) => {
            let bytes = std::fs::read(p)
                .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", p.display())))?;
            let config: RunConfig = serde_json::from_slice(&bytes)
                .map_err(|e| Failure::Usage(format!("invalid config {}: {e}", p.display())))?;
            Ok(Context {
                config,
                hash: sha_hex(&bytes),
            })
        }
        None => {
            let config = RunConfig::default();
            let canonical = serde_json::to_string(&config).expect("default config serializes");
            Ok(Context {
                hash: sha_hex(canonical.as_bytes()),
                config,
            })
        }
    }
}

fn parse_param(item: &str) -> Result<(String, f64), Failure> {
    let (key, value) = item
        .split_once('=')
        .ok_or_else(|| Failure::Usage(format!("--param expects KEY=VALUE, got {item:?}")))?;
    let number: f64 = value.trim().parse().map_err(|_| {
        Failure::Usage(format!("--param {key}: {value:?} is not a number (or \"inf\")"))
    })?;
    Ok((key.trim().to_string(), number))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            use std::io::Write as _;
            match std::io::stdout().lock().write_all(text.as_bytes()) {
                Ok(()) => Ok(()),
                // a downstream reader hanging up is not our failure
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                Err(e) => Err(Failure::Usage(format!("cannot write to stdout: {e}"))),
            }
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    if cli.print_defaults {
        let mut text = serde_json::to_string_pretty(&RunConfig::default())
            .expect("default config serializes");
        text.push('\n');
        print!("{text}");
        return Ok(0);
    }
    let command = cli
        .command
        .ok_or_else(|| Failure::Usage("missing subcommand; see --help".into()))?;

    let common = command.common();
    let ctx = load_context(common.config.as_deref())?;
    let format = common.format.unwrap_or_else(|| command.default_format());

    let rendered = match &command {
        Command::Constants(_) => cmd_constants(&ctx, format)?,
        Command::Solve(_) => cmd_solve(&ctx, format)?,
        Command::Scenario { name, params, .. } => {
            let mut overrides: BTreeMap<String, f64> = ctx.config.param_map()?;
            for item in params {
                let (key, value) = parse_param(item)?;
                overrides.insert(key, value);
            }
            cmd_scenario(&ctx, name, &overrides, format)?
        }
        Command::Sweep(_) => cmd_sweep(&ctx, format)?,
    };

    emit(common.out.as_deref(), &rendered.text)?;
    Ok(rendered.code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
