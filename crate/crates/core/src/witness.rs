//! Replayable witness artifacts: a `key=value` manifest plus grid-field
//! binaries, each pinned by a SHA-256 checksum.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::constitutive::{build_model, EnergyModel, ModelSpec};
use crate::error::{Error, Result};
use crate::fields::{decode_binary, encode_binary, BoundaryMode, GridField, TestField};
use crate::quasiconvexity::{garding_check, qc_quotient, BackgroundField};
use crate::symmetrizer::symmetrizer_matrix;
use crate::tensor::{vec_norm, Mat};

pub const WITNESS_FORMAT_VERSION: u32 = 1;
pub const WITNESS_MAGIC: &str = "thermoqc-witness";
pub const MANIFEST_NAME: &str = "witness.txt";
/// Largest accepted gap between the recorded and the recomputed value.
pub const REPLAY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug)]
pub enum WitnessData {
    /// Quasiconvexity quotient of a test pair at a constant state.
    QcQuotient { lambda1: Mat, lambda2: f64, field: TestField },
    /// Garding margin `C0 R + C1 P - D` of a test pair on a background.
    GardingMargin { background: BackgroundField, c0: f64, c1: f64, field: TestField },
    /// Symmetrizer form `Xᵀ S X` of a unit wave-cone direction.
    WaveCone { f: Mat, eta: f64, direction: Vec<f64> },
}

impl WitnessData {
    pub fn kind(&self) -> &'static str {
        match self {
            WitnessData::QcQuotient { .. } => "qc-quotient",
            WitnessData::GardingMargin { .. } => "garding-margin",
            WitnessData::WaveCone { .. } => "wave-cone",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Witness {
    pub model: ModelSpec,
    pub data: WitnessData,
    pub recorded: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub kind: String,
    pub recorded: f64,
    pub recomputed: f64,
    pub confirmed: bool,
}

/// Parsed manifest before any binary is loaded.
#[derive(Clone, Debug, PartialEq)]
pub struct WitnessManifest {
    pub version: u32,
    pub kind: String,
    pub model: ModelSpec,
    pub entries: BTreeMap<String, String>,
    /// `label -> (file name, sha256 hex)`.
    pub files: BTreeMap<String, (String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",")
}

fn parse_f64(key: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Format(format!("{key}: not a finite number")))
}

fn parse_list(key: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|t| parse_f64(key, t)).collect()
}

fn valid_file_name(s: &str) -> bool {
    !s.is_empty() && s.len() <= 64 && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.') && !s.starts_with('.')
}

const KIND_KEYS: &[(&str, &[&str], &[&str])] = &[
    ("qc-quotient", &["lambda1", "lambda2", "mode", "value"], &["phi", "psi"]),
    ("garding-margin", &["c0", "c1", "mode", "value"], &["phi", "psi", "fbar", "etabar"]),
    ("wave-cone", &["f", "eta", "direction", "value"], &[]),
];

/// Parse and validate a manifest; binaries are not touched.
pub fn parse_manifest(text: &str) -> Result<WitnessManifest> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    if lines.next() != Some(WITNESS_MAGIC) {
        return Err(Error::Format("missing witness header".into()));
    }
    let mut raw: BTreeMap<String, String> = BTreeMap::new();
    for l in lines {
        let (k, v) = l.split_once('=').ok_or_else(|| Error::Format(format!("expected key=value, found {l:?}")))?;
        if raw.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(Error::Format(format!("duplicate key {}", k.trim())));
        }
    }
    let version: u32 = raw
        .remove("format_version")
        .ok_or_else(|| Error::Format("missing format_version".into()))?
        .parse()
        .map_err(|_| Error::Format("bad format_version".into()))?;
    if version != WITNESS_FORMAT_VERSION {
        return Err(Error::FormatVersion { found: version, expected: WITNESS_FORMAT_VERSION });
    }
    let kind = raw.remove("kind").ok_or_else(|| Error::Format("missing kind".into()))?;
    let (_, keys, file_labels) =
        KIND_KEYS.iter().find(|(k, _, _)| *k == kind).ok_or_else(|| Error::Format(format!("unknown witness kind {kind}")))?;
    let mut model = ModelSpec::new(&raw.remove("model").ok_or_else(|| Error::Format("missing model".into()))?);
    let mut entries = BTreeMap::new();
    let mut files = BTreeMap::new();
    for (k, v) in raw {
        if let Some(p) = k.strip_prefix("model.") {
            model = model.with(p, v);
        } else if let Some(label) = k.strip_prefix("file.") {
            if !file_labels.contains(&label) {
                return Err(Error::Format(format!("unexpected file {label}")));
            }
            if !valid_file_name(&v) {
                return Err(Error::Format(format!("bad file name {v:?}")));
            }
            files.entry(label.to_string()).or_insert((String::new(), String::new())).0 = v;
        } else if let Some(label) = k.strip_prefix("sha256.") {
            if !file_labels.contains(&label) {
                return Err(Error::Format(format!("unexpected checksum {label}")));
            }
            if v.len() != 64 || !v.chars().all(|c| c.is_ascii_hexdigit()) {
                return Err(Error::Format(format!("bad checksum for {label}")));
            }
            files.entry(label.to_string()).or_insert((String::new(), String::new())).1 = v.to_ascii_lowercase();
        } else if keys.contains(&k.as_str()) {
            entries.insert(k, v);
        } else {
            return Err(Error::Format(format!("unknown key {k}")));
        }
    }
    for k in keys.iter() {
        if !entries.contains_key(*k) {
            return Err(Error::Format(format!("missing key {k}")));
        }
    }
    for l in file_labels.iter() {
        match files.get(*l) {
            Some((f, h)) if !f.is_empty() && !h.is_empty() => {}
            _ => return Err(Error::Format(format!("missing file or checksum for {l}"))),
        }
    }
    parse_f64("value", &entries["value"])?;
    Ok(WitnessManifest { version, kind, model, entries, files })
}

impl Witness {
    /// Manifest text and the binaries it references.
    pub fn encode(&self) -> (String, Vec<(String, Vec<u8>)>) {
        let mut m = format!("{WITNESS_MAGIC}\nformat_version={WITNESS_FORMAT_VERSION}\nkind={}\nmodel={}\n", self.data.kind(), self.model.name);
        for (k, v) in &self.model.params {
            let _ = writeln!(m, "model.{k}={v}");
        }
        let mut bins: Vec<(String, GridField)> = Vec::new();
        match &self.data {
            WitnessData::QcQuotient { lambda1, lambda2, field } => {
                let _ = writeln!(m, "lambda1={}\nlambda2={lambda2:e}\nmode={}", join(lambda1.as_slice()), field.mode.as_str());
                bins.push(("phi".into(), field.phi.clone()));
                bins.push(("psi".into(), field.psi.clone()));
            }
            WitnessData::GardingMargin { background, c0, c1, field } => {
                let _ = writeln!(m, "c0={c0:e}\nc1={c1:e}\nmode={}", field.mode.as_str());
                bins.push(("phi".into(), field.phi.clone()));
                bins.push(("psi".into(), field.psi.clone()));
                bins.push(("fbar".into(), background.fbar.clone()));
                bins.push(("etabar".into(), background.etabar.clone()));
            }
            WitnessData::WaveCone { f, eta, direction } => {
                let _ = writeln!(m, "f={}\neta={eta:e}\ndirection={}", join(f.as_slice()), join(direction));
            }
        }
        let _ = writeln!(m, "value={:e}", self.recorded);
        let mut files = Vec::new();
        for (label, field) in bins {
            let bytes = encode_binary(&field);
            let name = format!("{label}.bin");
            let _ = writeln!(m, "file.{label}={name}\nsha256.{label}={}", sha256_hex(&bytes));
            files.push((name, bytes));
        }
        (m, files)
    }

    /// Write the manifest and binaries into `dir`; returns the manifest path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let (m, files) = self.encode();
        for (name, bytes) in files {
            std::fs::write(dir.join(name), bytes)?;
        }
        let path = dir.join(MANIFEST_NAME);
        std::fs::write(&path, m)?;
        Ok(path)
    }

    /// Rebuild from a manifest, fetching binaries through `load` and
    /// verifying their checksums.
    pub fn from_manifest<L>(man: &WitnessManifest, mut load: L) -> Result<Witness>
    where
        L: FnMut(&str) -> Result<Vec<u8>>,
    {
        let mut field = |label: &str| -> Result<GridField> {
            let (name, hash) = &man.files[label];
            let bytes = load(name)?;
            if sha256_hex(&bytes) != *hash {
                return Err(Error::ChecksumMismatch(name.clone()));
            }
            decode_binary(&bytes)
        };
        let e = &man.entries;
        let mode = || BoundaryMode::parse(&e["mode"]).ok_or_else(|| Error::Format(format!("unknown mode {}", e["mode"])));
        let square = |key: &str| -> Result<Mat> {
            let v = parse_list(key, &e[key])?;
            let d = (1..=3).find(|d| d * d == v.len()).ok_or_else(|| Error::Format(format!("{key} is not a square matrix")))?;
            Ok(Mat::from_slice(d, &v))
        };
        let data = match man.kind.as_str() {
            "qc-quotient" => {
                let tf = TestField::from_parts(field("phi")?, field("psi")?, mode()?)?;
                WitnessData::QcQuotient { lambda1: square("lambda1")?, lambda2: parse_f64("lambda2", &e["lambda2"])?, field: tf }
            }
            "garding-margin" => {
                let tf = TestField::from_parts(field("phi")?, field("psi")?, mode()?)?;
                let background = BackgroundField::from_fields(field("fbar")?, field("etabar")?)?;
                WitnessData::GardingMargin { background, c0: parse_f64("c0", &e["c0"])?, c1: parse_f64("c1", &e["c1"])?, field: tf }
            }
            "wave-cone" => WitnessData::WaveCone {
                f: square("f")?,
                eta: parse_f64("eta", &e["eta"])?,
                direction: parse_list("direction", &e["direction"])?,
            },
            k => return Err(Error::Format(format!("unknown witness kind {k}"))),
        };
        Ok(Witness { model: man.model.clone(), data, recorded: parse_f64("value", &e["value"])? })
    }

    /// Read a witness from its manifest path.
    pub fn read(path: &Path) -> Result<Witness> {
        let text = std::fs::read_to_string(path)?;
        let man = parse_manifest(&text)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Witness::from_manifest(&man, |name| Ok(std::fs::read(dir.join(name))?))
    }

    /// Recompute the recorded value.
    pub fn evaluate(&self) -> Result<f64> {
        let model: EnergyModel = build_model(&self.model)?;
        match &self.data {
            WitnessData::QcQuotient { lambda1, lambda2, field } => qc_quotient(&model, lambda1, *lambda2, field),
            WitnessData::GardingMargin { background, c0, c1, field } => {
                Ok(garding_check(&model, background, *c0, *c1, std::slice::from_ref(field))?.margins[0])
            }
            WitnessData::WaveCone { f, eta, direction } => {
                let s = symmetrizer_matrix(&model, f, *eta)?;
                if direction.len() != s.size {
                    return Err(Error::Format(format!("direction has {} entries, expected {}", direction.len(), s.size)));
                }
                let n = vec_norm(direction);
                if !(n > 0.0) {
                    return Err(Error::ZeroDenominator("zero witness direction".into()));
                }
                Ok(s.quadratic_form(direction) / (n * n))
            }
        }
    }

    pub fn replay(&self) -> Result<Verdict> {
        let recomputed = self.evaluate()?;
        Ok(Verdict {
            kind: self.data.kind().to_string(),
            recorded: self.recorded,
            recomputed,
            confirmed: (recomputed - self.recorded).abs() <= REPLAY_TOLERANCE,
        })
    }
}

/// Load and re-evaluate the witness at `path` (a manifest or its directory).
pub fn replay(path: &Path) -> Result<Verdict> {
    let p = if path.is_dir() { path.join(MANIFEST_NAME) } else { path.to_path_buf() };
    Witness::read(&p)?.replay()
}
