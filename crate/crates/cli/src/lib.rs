//! Config-driven experiment runner.
//!
//! Every run writes `report.txt`, `data.csv`, an optional `plot.svg`, extra
//! per-command files, a `witness/` directory when a violation was found, and
//! `manifest.txt` echoing the resolved config and the sha256 of each artifact.

pub mod commands;
pub mod config;
pub mod svg;

use std::fmt;
use std::fs;
use std::path::Path;

use thermoqc_core::error::Error;
use thermoqc_core::witness::sha256_hex;

pub use commands::RunOutput;
pub use config::{parse_args, ConfigError, ExperimentConfig};

pub const EXIT_PASSED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Core(Error),
    Artifact(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Artifact(s) => write!(f, "artifact write failed: {s}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

/// Result of a completed run.
#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub output: RunOutput,
    /// Artifact name and sha256, in manifest order.
    pub artifacts: Vec<(String, String)>,
}

/// Execute the run in a pool sized by `threads` (0 = rayon default).
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let threads = cfg.values.get("threads").map(|s| s.parse::<usize>()).transpose().map_err(|_| ConfigError::Invalid("threads".into()))?.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| CliError::Artifact(e.to_string()))?;
    pool.install(|| commands::dispatch(cfg))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], list: &mut Vec<(String, String)>) -> Result<(), CliError> {
    let path = dir.join(name);
    if let Some(p) = path.parent() {
        fs::create_dir_all(p).map_err(|e| CliError::Artifact(format!("{}: {e}", p.display())))?;
    }
    fs::write(&path, bytes).map_err(|e| CliError::Artifact(format!("{}: {e}", path.display())))?;
    list.push((name.to_string(), sha256_hex(bytes)));
    Ok(())
}

/// Run and write all artifacts into `cfg.output_dir`.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let out = execute(cfg)?;
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| CliError::Artifact(format!("{}: {e}", dir.display())))?;
    let mut artifacts = Vec::new();
    write_file(dir, "report.txt", out.report.as_bytes(), &mut artifacts)?;
    write_file(dir, "data.csv", out.data_csv.as_bytes(), &mut artifacts)?;
    if let Some(svg) = &out.plot {
        write_file(dir, "plot.svg", svg.as_bytes(), &mut artifacts)?;
    }
    for (name, bytes) in &out.extra {
        write_file(dir, name, bytes, &mut artifacts)?;
    }
    if let Some(w) = &out.witness {
        let (manifest, files) = w.encode();
        for (name, bytes) in &files {
            write_file(dir, &format!("witness/{name}"), bytes, &mut artifacts)?;
        }
        write_file(dir, &format!("witness/{}", thermoqc_core::witness::MANIFEST_NAME), manifest.as_bytes(), &mut artifacts)?;
    }
    let mut m = String::from("# thermoqc run manifest\n[config]\n");
    for (k, v) in cfg.resolved() {
        m.push_str(&format!("{k}={v}\n"));
    }
    m.push_str("[artifacts]\n");
    for (name, sum) in &artifacts {
        m.push_str(&format!("{name} sha256={sum}\n"));
    }
    let exit_code = if out.passed { EXIT_PASSED } else { EXIT_VIOLATION };
    m.push_str(&format!("[result]\nexit_code={exit_code}\n"));
    fs::write(dir.join("manifest.txt"), &m).map_err(|e| CliError::Artifact(e.to_string()))?;
    Ok(Outcome { exit_code, output: out, artifacts })
}

/// Parse, run and map the result onto an exit code, printing to stdout/stderr.
pub fn main_with_args(args: &[String], env_output: Option<String>) -> i32 {
    let cfg = match parse_args(args, env_output) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    match run(&cfg) {
        Ok(o) => {
            print!("{}", o.output.report);
            println!("artifacts written to {}", cfg.output_dir.display());
            o.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
