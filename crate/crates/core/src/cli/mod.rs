//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for bad arguments, 2 when an algorithm fails.
//! Errors are written to stderr as a JSON document.

mod commands;
mod output;

pub use output::{schema_id, sha256_hex, RunManifest, ERROR_SCHEMA, MANIFEST_SCHEMA};

use crate::dynamics::DynamicsError;
use crate::engine::{EngineConfig, EngineError};
use crate::measure::{LambdaMeasure, MeasureError, MeasureSpec};
use crate::montecarlo::MonteCarloError;
use crate::par::Execution;
use crate::poly::PolyError;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Debug, Parser, Serialize)]
#[command(name = "stochnewton", version, about = "Random relaxed Newton root finding and random-dynamics diagnostics")]
pub struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true, env = "STOCHNEWTON_SEED")]
    pub seed: Option<u64>,
    /// Print the result document as JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// JSON config file (or a previous run manifest) supplying defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Also write the result document to this file.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Write the run manifest to this file.
    #[arg(long, global = true, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
    /// Run every Monte Carlo loop on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MeasureArgs {
    /// Radius of the uniform disk around λ = 1.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Measure as JSON, or @PATH to read it from a file.
    #[arg(long)]
    pub measure: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EngineArgs {
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    RelaxedNewton,
    Quadratic,
    Rotation,
    EmbeddedMarkov,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FamilyArgs {
    #[arg(long, value_enum, default_value = "relaxed-newton")]
    pub family: FamilyKind,
    /// Polynomial for the relaxed Newton family.
    #[arg(long)]
    pub poly: Option<String>,
    /// Order of the rotation family.
    #[arg(long)]
    pub n: Option<usize>,
    /// Embedded Markov points as JSON `[[re, im], ...]`.
    #[arg(long)]
    pub points: Option<String>,
    /// Embedded Markov maps as JSON index lists, one per label.
    #[arg(long)]
    pub maps: Option<String>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Find every root with the random relaxed Newton scheme and deflation.
    FindRoots {
        #[arg(long)]
        poly: String,
        /// Starting point of each orbit.
        #[arg(long)]
        start: Option<String>,
        #[command(flatten)]
        measure: MeasureArgs,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Deterministic Newton against the randomized scheme on a trap.
    TrapDemo {
        #[arg(long, default_value = "2 - 2z + z^3")]
        poly: String,
        #[arg(long, default_value = "0")]
        start: String,
        #[arg(long, default_value_t = 1000)]
        runs: u64,
        #[command(flatten)]
        measure: MeasureArgs,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Lyapunov exponent at a common fixed point.
    Lyapunov {
        #[command(flatten)]
        family: FamilyArgs,
        /// Fixed point, a complex number or `inf`.
        #[arg(long)]
        point: String,
        /// Root order used in the multiplier `1 − λ/m`.
        #[arg(long)]
        multiplicity: Option<usize>,
        #[command(flatten)]
        measure: MeasureArgs,
    },
    /// Minimal sets in the family's finite invariant set.
    Markov {
        #[command(flatten)]
        family: FamilyArgs,
        #[command(flatten)]
        measure: MeasureArgs,
    },
    /// Type of the random quadratic family `λ z (1 − z)` under a measure.
    Classify {
        #[command(flatten)]
        measure: MeasureArgs,
    },
    /// Grid of convergence probabilities, as CSV and PNG.
    BasinMap {
        #[arg(long)]
        poly: String,
        /// `re_min,re_max,im_min,im_max`.
        #[arg(long, default_value = "-2,2,-2,2", allow_hyphen_values = true)]
        bounds: String,
        /// `N` or `NXxNY`.
        #[arg(long, default_value = "64")]
        res: String,
        #[arg(long, default_value_t = 20)]
        runs: u64,
        #[arg(long)]
        png: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Keep every root's probability in the CSV.
        #[arg(long)]
        full: bool,
        #[command(flatten)]
        measure: MeasureArgs,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Tail contraction rate of traced orbits against the Lyapunov exponent.
    RateCheck {
        #[arg(long, default_value = "-1 + z^2")]
        poly: String,
        #[arg(long, default_value = "2")]
        start: String,
        #[arg(long, default_value_t = 500)]
        traces: u64,
        /// Distance at which a trace stops.
        #[arg(long, default_value_t = 1e-200)]
        floor: f64,
        #[arg(long, default_value_t = 0.1)]
        lock_radius: f64,
        #[command(flatten)]
        measure: MeasureArgs,
        #[command(flatten)]
        engine: EngineArgs,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::FindRoots { .. } => "find-roots",
            Command::TrapDemo { .. } => "trap-demo",
            Command::Lyapunov { .. } => "lyapunov",
            Command::Markov { .. } => "markov",
            Command::Classify { .. } => "classify",
            Command::BasinMap { .. } => "basin-map",
            Command::RateCheck { .. } => "rate-check",
        }
    }
}

/// Settings read from `--config`; every field is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub measure: Option<MeasureSpec>,
    pub engine: Option<Value>,
    pub sequential: Option<bool>,
}

#[derive(Debug)]
pub enum CliError {
    BadArguments(String),
    Failure { code: &'static str, message: String, details: Option<Value> },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::BadArguments(_) => 1,
            CliError::Failure { .. } => 2,
        }
    }

    fn failure(code: &'static str, message: impl ToString) -> Self {
        CliError::Failure { code, message: message.to_string(), details: None }
    }

    fn to_json(&self) -> Value {
        let (kind, code, message, details) = match self {
            CliError::BadArguments(m) => ("bad_arguments", "bad_arguments", m.as_str(), None),
            CliError::Failure { code, message, details } => ("algorithmic_failure", *code, message.as_str(), details.as_ref()),
        };
        let mut err = json!({ "kind": kind, "code": code, "message": message });
        if let Some(d) = details {
            err["details"] = d.clone();
        }
        json!({ "schema": ERROR_SCHEMA, "exit_code": self.exit_code(), "error": err })
    }
}

impl From<PolyError> for CliError {
    fn from(e: PolyError) -> Self {
        CliError::BadArguments(e.to_string())
    }
}

impl From<MeasureError> for CliError {
    fn from(e: MeasureError) -> Self {
        CliError::BadArguments(e.to_string())
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::IncompleteFactorization { ref found, .. } => {
                CliError::Failure { code: "incomplete_factorization", message: e.to_string(), details: Some(json!({ "found": found })) }
            }
            EngineError::HitCriticalPoint { .. } => CliError::failure("hit_critical_point", e),
            other => CliError::BadArguments(other.to_string()),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::ZeroLyapunov { .. } => CliError::failure("zero_lyapunov", e),
            DynamicsError::SingularChain => CliError::failure("singular_chain", e),
            DynamicsError::NoFiniteInvariantSet => CliError::failure("no_finite_invariant_set", e),
            other => CliError::BadArguments(other.to_string()),
        }
    }
}

impl From<MonteCarloError> for CliError {
    fn from(e: MonteCarloError) -> Self {
        match e {
            MonteCarloError::InvalidArgument(m) => CliError::BadArguments(m),
            MonteCarloError::Engine(e) => e.into(),
            MonteCarloError::TraceTooShort { .. } => CliError::failure("trace_too_short", e),
            MonteCarloError::Io(e) => CliError::failure("io", e),
        }
    }
}

/// Global settings after merging flags, config file and defaults.
#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub file: FileConfig,
    pub execution: Execution,
}

impl Settings {
    fn resolve(cli: &Cli) -> Result<Self, CliError> {
        let file = match &cli.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::BadArguments(format!("cannot read config {}: {e}", path.display())))?;
                let mut v: Value = serde_json::from_str(&text).map_err(|e| CliError::BadArguments(format!("config: {e}")))?;
                if v.get("schema").and_then(Value::as_str) == Some(MANIFEST_SCHEMA) {
                    v = v["config"].clone();
                }
                serde_json::from_value(v).map_err(|e| CliError::BadArguments(format!("config: {e}")))?
            }
            None => FileConfig::default(),
        };
        let seed = cli.seed.or(file.seed).unwrap_or(0);
        let sequential = cli.sequential || file.sequential.unwrap_or(false);
        Ok(Self { seed, file, execution: if sequential { Execution::Sequential } else { Execution::Parallel } })
    }

    /// `--measure` beats `--radius` beats the config file beats `UniformDisk(0.75)`.
    /// The seed comes from `--seed`, then the measure's own seed, then the config.
    pub fn measure(&self, args: &MeasureArgs, cli_seed: Option<u64>) -> Result<LambdaMeasure, CliError> {
        let spec = match (&args.measure, args.radius) {
            (Some(text), _) => {
                let text = match text.strip_prefix('@') {
                    Some(path) => std::fs::read_to_string(path).map_err(|e| CliError::BadArguments(format!("cannot read {path}: {e}")))?,
                    None => text.clone(),
                };
                serde_json::from_str::<MeasureSpec>(&text).map_err(|e| CliError::BadArguments(format!("measure: {e}")))?
            }
            (None, Some(radius)) => MeasureSpec::UniformDisk { radius, center: None, seed: None },
            (None, None) => self.file.measure.clone().unwrap_or(MeasureSpec::UniformDisk { radius: 0.75, center: None, seed: None }),
        };
        let seed = cli_seed.or(spec.seed()).unwrap_or(self.seed);
        Ok(spec.build()?.with_seed(seed))
    }

    pub fn engine(&self, args: &EngineArgs) -> Result<EngineConfig, CliError> {
        let mut cfg: EngineConfig = match &self.file.engine {
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| CliError::BadArguments(format!("engine config: {e}")))?,
            None => EngineConfig::default(),
        };
        if let Some(m) = args.max_iterations {
            cfg.max_iterations = m;
        }
        cfg.execution = self.execution;
        Ok(cfg)
    }
}

/// What a command produced: the JSON payload, its text rendering, and files written.
pub struct Outcome {
    pub result: Value,
    pub text: String,
    pub files: Vec<(String, PathBuf, Vec<u8>)>,
    /// Effective settings echoed into the manifest.
    pub config: Value,
}

/// Parses `args` (including the program name) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let err = CliError::BadArguments(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("{}", err.to_json());
            err.exit_code()
        }
    }
}

fn write_file(path: &PathBuf, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::failure("io", format!("cannot write {}: {e}", path.display())))
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let settings = Settings::resolve(cli)?;
    let outcome = commands::dispatch(cli, &settings)?;
    let name = cli.command.name();

    let document = output::result_document(name, &outcome.result);
    let document_text = output::pretty(&document);
    let mut outputs = vec![output::OutputRecord::bytes("result", cli.out.as_deref(), document_text.as_bytes())];
    if let Some(path) = &cli.out {
        write_file(path, document_text.as_bytes())?;
    }
    for (label, path, bytes) in &outcome.files {
        outputs.push(output::OutputRecord::bytes(label, Some(path), bytes));
    }
    let manifest = RunManifest {
        schema: MANIFEST_SCHEMA,
        command: name.to_string(),
        args: serde_json::to_value(&cli.command).expect("arguments serialize"),
        config: outcome.config.clone(),
        seed: settings.seed,
        version: env!("CARGO_PKG_VERSION"),
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs,
    };
    if let Some(path) = &cli.manifest {
        write_file(path, output::pretty(&manifest).as_bytes())?;
    }

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let printed = if cli.json {
        let mut full = document;
        full["manifest"] = serde_json::to_value(&manifest).expect("manifest serializes");
        out.write_all(output::pretty(&full).as_bytes())
    } else {
        out.write_all(outcome.text.as_bytes())
    };
    printed.map_err(|e| CliError::failure("io", e))
}
