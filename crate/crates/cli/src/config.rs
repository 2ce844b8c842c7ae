//! `command key=value ... [--config file]` parsing and per-command key sets.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use thermoqc_core::constitutive::{build_model, model_keys, EnergyModel, ModelSpec};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "THERMOQC_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "thermoqc-out";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConfigError {
    Parse(String),
    UnknownCommand(String),
    UnknownKey { command: String, key: String },
    ModelNotFound(String),
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse(s) => write!(f, "config parse error: {s}"),
            ConfigError::UnknownCommand(s) => write!(f, "unknown command {s:?}"),
            ConfigError::UnknownKey { command, key } => write!(f, "unknown key {key:?} for {command}"),
            ConfigError::ModelNotFound(s) => write!(f, "model not found: {s}"),
            ConfigError::Invalid(s) => write!(f, "invalid value: {s}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Symmetrize,
    QcCheck,
    Garding,
    Simulate,
    WeakStrong,
    Young,
    Localize,
    AuditModel,
    Replay,
}

pub const COMMANDS: [Command; 9] = [
    Command::Symmetrize,
    Command::QcCheck,
    Command::Garding,
    Command::Simulate,
    Command::WeakStrong,
    Command::Young,
    Command::Localize,
    Command::AuditModel,
    Command::Replay,
];

/// Keys shared by every command that builds a model.
const MODEL_COMMON: &[(&str, &str)] = &[("model", "quadratic"), ("seed", "0"), ("threads", "0")];

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Symmetrize => "symmetrize",
            Command::QcCheck => "qc-check",
            Command::Garding => "garding",
            Command::Simulate => "simulate",
            Command::WeakStrong => "weak-strong",
            Command::Young => "young",
            Command::Localize => "localize",
            Command::AuditModel => "audit-model",
            Command::Replay => "replay",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        COMMANDS.iter().copied().find(|c| c.as_str() == s)
    }

    pub fn uses_model(self) -> bool {
        !matches!(self, Command::Replay | Command::Localize)
    }

    /// Command-specific keys with their defaults.
    pub fn defaults(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Command::Symmetrize => &[
                ("dim", "2"),
                ("F", "identity"),
                ("eta", "0.5"),
                ("mode", "wave_cone"),
                ("dirs", "64"),
                ("samples", "100"),
                ("tol", "1e-10"),
                ("pair_tol", "1e-5"),
            ],
            Command::QcCheck => &[
                ("dim", "2"),
                ("n", "64"),
                ("F", "identity"),
                ("eta", "0.5"),
                ("modes", "32"),
                ("iters", "40"),
                ("amplitudes", "0.01,0.1,1,3"),
                ("boundary", "periodic"),
                ("smoothing", "1"),
            ],
            Command::Garding => &[
                ("dim", "2"),
                ("n", "32"),
                ("task", "estimate"),
                ("background", "constant"),
                ("F", "identity"),
                ("eta", "0.5"),
                ("A", "0.1"),
                ("wavenumber", "1"),
                ("c0", "4"),
                ("c1", "0"),
                ("budget", "64"),
                ("holdout", "200"),
                ("iters", "20"),
                ("cpen", "0,0.1,1,10,100"),
                ("fields", "24"),
            ],
            Command::Simulate => &[
                ("dim", "1"),
                ("n", "256"),
                ("init", "wave"),
                ("A", "0.1"),
                ("t", "1"),
                ("cfl", "0.45"),
                ("viscosity", "0"),
                ("record", "0.05"),
                ("eta", "0.5"),
                ("tol", "1e-10"),
            ],
            Command::WeakStrong => &[
                ("dim", "1"),
                ("reference", "wave"),
                ("deltas", "0,0.01,0.02,0.04"),
                ("meshes", "64,128"),
                ("t", "0.5"),
                ("tol", "1e-4"),
            ],
            Command::Young => &[
                ("dim", "1"),
                ("n", "16"),
                ("generator", "laminate"),
                ("fraction", "0.25"),
                ("mass", "0.5"),
                ("lattice", "1"),
                ("scales", "0.125,0.0625,0.03125"),
                ("subgrid", "32"),
                ("A", "1"),
                ("B", "-1"),
                ("eta", "0.5"),
            ],
            Command::Localize => &[
                ("seed", "0"),
                ("threads", "0"),
                ("dim", "2"),
                ("n", "16"),
                ("t0", "0.5"),
                ("n_trunc", "inf"),
                ("scales", "0.25,0.125,0.0625"),
                ("subgrid", "16"),
                ("time_samples", "8"),
                ("fraction", "0.25"),
                ("rate", "0.2"),
                ("p", "2"),
            ],
            Command::AuditModel => &[("dim", "2"), ("K", "5"), ("samples", "2000"), ("slack", "0.05")],
            Command::Replay => &[("witness", ""), ("threads", "0")],
        }
    }

    /// Keys accepted for this command (model parameters excluded).
    pub fn keys(self) -> Vec<&'static str> {
        let mut k: Vec<&str> = self.defaults().iter().map(|x| x.0).collect();
        if self.uses_model() {
            k.extend(MODEL_COMMON.iter().map(|x| x.0));
        }
        k.push("output_dir");
        k
    }

    /// Bare words accepted on the command line and the key they set.
    fn bare_word(self, w: &str) -> Option<(&'static str, String)> {
        match (self, w) {
            (Command::Simulate, "wave" | "shock" | "smooth" | "mms") => Some(("init", w.to_string())),
            (Command::Replay, _) => Some(("witness", w.to_string())),
            _ => None,
        }
    }
}

/// Command-line spelling of model parameters that clash with run keys.
fn model_key_alias(k: &str) -> &str {
    match k {
        "normal" => "n",
        other => other,
    }
}

/// A validated run request with every default filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub values: BTreeMap<String, String>,
    pub model: Option<ModelSpec>,
    pub output_dir: PathBuf,
}

/// Parse `key=value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Parse(format!("line {}: expected key=value", i + 1)))?;
        let k = k.trim();
        if k.is_empty() || !k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.') {
            return Err(ConfigError::Parse(format!("line {}: bad key {k:?}", i + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Build from raw pairs; later pairs override earlier ones.
    pub fn from_pairs(command: Command, pairs: &[(String, String)], env_output: Option<String>) -> Result<Self, ConfigError> {
        let mut values: BTreeMap<String, String> = BTreeMap::new();
        if command.uses_model() {
            for (k, v) in MODEL_COMMON {
                values.insert(k.to_string(), v.to_string());
            }
        }
        for (k, v) in command.defaults() {
            values.insert(k.to_string(), v.to_string());
        }
        let allowed = command.keys();
        let model_name = pairs.iter().rev().find(|(k, _)| k == "model").map(|p| p.1.clone()).unwrap_or_else(|| values.get("model").cloned().unwrap_or_default());
        let mkeys: &[&str] = if command.uses_model() {
            model_keys(&model_name).ok_or_else(|| ConfigError::ModelNotFound(model_name.clone()))?
        } else {
            &[]
        };
        let mut params: BTreeMap<String, String> = BTreeMap::new();
        let mut output_dir = env_output.filter(|s| !s.is_empty()).map(PathBuf::from);
        for (k, v) in pairs {
            if k == "command" {
                if v != command.as_str() {
                    return Err(ConfigError::Invalid(format!("config is for {v}, not {}", command.as_str())));
                }
                continue;
            }
            if k == "output_dir" {
                output_dir = Some(PathBuf::from(v));
                continue;
            }
            if allowed.contains(&k.as_str()) {
                values.insert(k.clone(), v.clone());
                // `dim` is shared with the model
                if k == "dim" && mkeys.contains(&"dim") {
                    params.insert("dim".into(), v.clone());
                }
                continue;
            }
            let mk = model_key_alias(k);
            if mkeys.contains(&mk) && mk != "dim" && !(mk == "n" && k == "n") {
                params.insert(mk.to_string(), v.clone());
                continue;
            }
            return Err(ConfigError::UnknownKey { command: command.as_str().into(), key: k.clone() });
        }
        let model = if command.uses_model() {
            let mut spec = ModelSpec::new(&model_name);
            if mkeys.contains(&"dim") {
                spec = spec.with("dim", values.get("dim").cloned().unwrap_or_else(|| "2".into()));
            }
            for (k, v) in params {
                spec = spec.with(&k, v);
            }
            let built = build_model(&spec).map_err(|e| match e {
                thermoqc_core::error::Error::InvalidParameter(s) if s.starts_with("unknown model") => ConfigError::ModelNotFound(s),
                other => ConfigError::Invalid(other.to_string()),
            })?;
            // echo the resolved parameters, defaults included
            Some(built.spec().unwrap_or(spec))
        } else {
            None
        };
        if let Some(m) = &model {
            if let Some(d) = m.get("dim") {
                values.insert("dim".into(), d.to_string());
            }
        }
        Ok(ExperimentConfig {
            command,
            values,
            model,
            output_dir: output_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
        })
    }

    pub fn build_model(&self) -> Result<EnergyModel, ConfigError> {
        let spec = self.model.as_ref().ok_or_else(|| ConfigError::Invalid("command has no model".into()))?;
        build_model(spec).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        let s = self.get(key);
        match s {
            "inf" => Ok(f64::INFINITY),
            _ => s.parse::<f64>().ok().filter(|v| !v.is_nan()).ok_or_else(|| ConfigError::Invalid(format!("{key}={s}"))),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        let s = self.get(key);
        s.parse().map_err(|_| ConfigError::Invalid(format!("{key}={s}")))
    }

    pub fn u64(&self, key: &str) -> Result<u64, ConfigError> {
        let s = self.get(key);
        s.parse().map_err(|_| ConfigError::Invalid(format!("{key}={s}")))
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let s = self.get(key);
        s.split(',')
            .map(|t| t.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| ConfigError::Invalid(format!("{key}={s}"))))
            .collect()
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>, ConfigError> {
        let s = self.get(key);
        s.split(',').map(|t| t.trim().parse::<usize>().map_err(|_| ConfigError::Invalid(format!("{key}={s}")))).collect()
    }

    /// Every resolved key, model parameters prefixed with `model.`.
    pub fn resolved(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = vec![("command".into(), self.command.as_str().into())];
        out.extend(self.values.iter().map(|(k, v)| (k.clone(), v.clone())));
        if let Some(m) = &self.model {
            let mut p = m.params.clone();
            p.sort();
            out.extend(p.into_iter().map(|(k, v)| (format!("model.{k}"), v)));
        }
        out.push(("output_dir".into(), self.output_dir.display().to_string()));
        out
    }
}

/// Parse command-line arguments (without the program name).
pub fn parse_args(args: &[String], env_output: Option<String>) -> Result<ExperimentConfig, ConfigError> {
    let mut it = args.iter();
    let first = it.next().ok_or_else(|| ConfigError::Parse("missing command".into()))?;
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut cli: Vec<(String, String)> = Vec::new();
    let mut command = Command::parse(first);
    let mut file_command: Option<String> = None;
    let rest: Vec<&String> = if command.is_some() { it.collect() } else { args.iter().collect() };
    let mut i = 0;
    let mut bare: Vec<String> = Vec::new();
    while i < rest.len() {
        let a = rest[i].as_str();
        if a == "--config" {
            let path = rest.get(i + 1).ok_or_else(|| ConfigError::Parse("--config needs a path".into()))?;
            let text = std::fs::read_to_string(path.as_str()).map_err(|e| ConfigError::Parse(format!("{path}: {e}")))?;
            for (k, v) in parse_config_text(&text)? {
                if k == "command" {
                    file_command = Some(v.clone());
                }
                pairs.push((k, v));
            }
            i += 2;
            continue;
        }
        if let Some(kv) = a.strip_prefix("--") {
            let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError::Parse(format!("expected --key=value, found {a}")))?;
            cli.push((k.to_string(), v.to_string()));
        } else if let Some((k, v)) = a.split_once('=') {
            cli.push((k.to_string(), v.to_string()));
        } else {
            bare.push(a.to_string());
        }
        i += 1;
    }
    if command.is_none() {
        let name = file_command.clone().unwrap_or_else(|| first.clone());
        command = Some(Command::parse(&name).ok_or(ConfigError::UnknownCommand(name))?);
    }
    let command = command.unwrap();
    for w in bare {
        let (k, v) = command.bare_word(&w).ok_or_else(|| ConfigError::Parse(format!("unexpected argument {w:?}")))?;
        cli.push((k.to_string(), v));
    }
    pairs.extend(cli);
    ExperimentConfig::from_pairs(command, &pairs, env_output)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse_args(&args("qc-check model=quadratic bogus=1"), None).unwrap_err();
        assert!(matches!(e, ConfigError::UnknownKey { .. }));
        assert!(matches!(parse_args(&args("qc-check model=nope"), None), Err(ConfigError::ModelNotFound(_))));
        assert!(matches!(parse_args(&args("frobnicate"), None), Err(ConfigError::UnknownCommand(_))));
    }

    #[test]
    fn model_parameters_and_bare_words() {
        let c = parse_args(&args("simulate model=quadratic wave A=0.1 n=256 t=1"), None).unwrap();
        assert_eq!(c.get("init"), "wave");
        assert_eq!(c.get("n"), "256");
        assert_eq!(c.model.as_ref().unwrap().get("dim"), Some("1"));
        let c = parse_args(&args("qc-check model=rank1defective beta=2 normal=0,1"), None).unwrap();
        assert_eq!(c.model.as_ref().unwrap().get("beta"), Some("2"));
        assert_eq!(c.model.as_ref().unwrap().get("n"), Some("0,1"));
    }

    #[test]
    fn config_text() {
        let p = parse_config_text("# comment\ncommand = qc-check\n\nbeta=2 # trailing\n").unwrap();
        assert_eq!(p, vec![("command".into(), "qc-check".into()), ("beta".into(), "2".into())]);
        assert!(parse_config_text("novalue\n").is_err());
    }

    #[test]
    fn output_dir_from_environment() {
        let c = parse_args(&args("audit-model"), Some("/tmp/x".into())).unwrap();
        assert_eq!(c.output_dir, PathBuf::from("/tmp/x"));
        let c = parse_args(&args("audit-model output_dir=/tmp/y"), Some("/tmp/x".into())).unwrap();
        assert_eq!(c.output_dir, PathBuf::from("/tmp/y"));
    }
}
