//! `degenhom` command line: one JSON config per run, CSV data files plus a
//! JSON summary in the output directory.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 property-check failure.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{ExperimentConfig, Validated};

use crate::error::Error;

pub const CSV_SCHEMA: &str = "degenhom-csv/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Cell,
    Homogenize,
    Tensor,
    LayeredVerify,
    Dirichlet,
    Poincare,
    Mu,
    GlueDemo,
    Moments,
}

impl Command {
    pub fn from_name(name: &str) -> Option<Self> {
        <Self as ValueEnum>::from_str(name, false).ok()
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Cell => "cell",
            Command::Homogenize => "homogenize",
            Command::Tensor => "tensor",
            Command::LayeredVerify => "layered-verify",
            Command::Dirichlet => "dirichlet",
            Command::Poincare => "poincare",
            Command::Mu => "mu",
            Command::GlueDemo => "glue-demo",
            Command::Moments => "moments",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "degenhom", version, about = "Random lattice energies with degenerate growth")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// Experiment config (JSON).
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Failure of a run, carrying its exit code.
#[derive(Debug)]
pub enum RunError {
    Engine(Error),
    /// A property check failed; outputs were still written.
    Check(String),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Engine(e)
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Check(_) => 4,
            RunError::Engine(e) => match e {
                Error::NoConvergence { .. } | Error::NullSpace | Error::TooLarge(_) | Error::Io(_) => 3,
                Error::BoundViolated(_) | Error::EnvelopeViolated { .. } => 4,
                _ => 2,
            },
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Engine(e) => write!(f, "{e}"),
            RunError::Check(msg) => write!(f, "check failed: {msg}"),
        }
    }
}

/// Output directory writer. Files are written to a temporary name and
/// renamed into place; CSV files start with a schema/config-hash comment.
pub struct Output {
    dir: PathBuf,
    config_hash: String,
}

impl Output {
    pub fn new(dir: &Path, config_hash: String) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), config_hash })
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    fn write_atomic(&self, name: &str, body: &[u8]) -> std::io::Result<()> {
        let tmp = self.dir.join(format!(".{name}.tmp"));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(body)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, self.dir.join(name))
    }

    pub fn csv(&self, name: &str, body: &str) -> std::io::Result<()> {
        let text = format!("# schema={CSV_SCHEMA} config_sha256={}\n{body}", self.config_hash);
        self.write_atomic(name, text.as_bytes())
    }

    pub fn json(&self, name: &str, value: &impl Serialize) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        text.push('\n');
        self.write_atomic(name, text.as_bytes())
    }
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let canon = serde_json::to_string(cfg).expect("serializable config");
    Sha256::digest(canon.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs one command with an already-parsed config.
pub fn run(command: Command, cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), RunError> {
    let v = config::validate(cfg, command.name())?;
    let out = Output::new(out_dir, config_hash(cfg)).map_err(Error::from)?;
    commands::dispatch(command, cfg, &v, &out)
}

/// Full entry point: parses arguments, applies overrides, runs and maps
/// the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(t) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return 2;
        }
    }
    let result = fs::read_to_string(&args.config)
        .map_err(|e| RunError::Engine(Error::ConfigInvalid(format!("{}: {e}", args.config.display()))))
        .and_then(|text| ExperimentConfig::from_json(&text).map_err(RunError::from))
        .and_then(|mut cfg| {
            let seed = args.seed.unwrap_or(cfg.seed);
            cfg = cfg.with_seed(seed);
            if let Some(s) = args.samples {
                cfg.samples = s;
            }
            run(args.command, &cfg, &args.out_dir)
        });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
