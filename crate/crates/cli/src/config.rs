//! Run configuration: defaults, optional JSON config file, flag overrides,
//! and the provenance hash embedded in every artifact.

use serde_json::Value;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::PathBuf;

/// A configuration problem; distinct from domain errors because the process
/// exits with code 2 instead of 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Shared knobs after merging defaults, the config file, and flags.
///
/// Flags win over the file, the file wins over defaults. `out` has no
/// default; commands that must write an artifact reject its absence.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub model_alpha: f64,
    pub model_theta: f64,
    pub k: u32,
    pub m_cap: u32,
    pub delta: f64,
    pub depth: u32,
    pub horizon: usize,
    pub seeds: usize,
    pub rng_seed: u64,
    pub threads: usize,
    pub out: Option<PathBuf>,
}

/// The shared flags exactly as given on the command line.
#[derive(Debug, Clone, Default)]
pub struct SharedFlags {
    pub config: Option<PathBuf>,
    pub model_alpha: Option<f64>,
    pub model_theta: Option<f64>,
    pub k: Option<u32>,
    pub m_cap: Option<u32>,
    pub delta: Option<f64>,
    pub depth: Option<u32>,
    pub horizon: Option<usize>,
    pub seeds: Option<usize>,
    pub rng_seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

const KEYS: [&str; 11] = [
    "model_alpha", "model_theta", "k", "m_cap", "delta", "depth",
    "horizon", "seeds", "rng_seed", "threads", "out",
];

fn file_f64(map: &serde_json::Map<String, Value>, key: &str) -> Result<Option<f64>, ConfigError> {
    match map.get(key) {
        None => Ok(None),
        Some(Value::Number(n)) => n
            .as_f64()
            .map(Some)
            .ok_or_else(|| ConfigError(format!("config key {key}: not representable as f64"))),
        Some(other) => Err(ConfigError(format!("config key {key}: expected a number, got {other}"))),
    }
}

fn file_u64(map: &serde_json::Map<String, Value>, key: &str) -> Result<Option<u64>, ConfigError> {
    match map.get(key) {
        None => Ok(None),
        Some(Value::Number(n)) => n
            .as_u64()
            .map(Some)
            .ok_or_else(|| ConfigError(format!("config key {key}: expected a nonnegative integer"))),
        Some(other) => Err(ConfigError(format!(
            "config key {key}: expected a nonnegative integer, got {other}"
        ))),
    }
}

impl Resolved {
    pub fn merge(flags: &SharedFlags) -> Result<Resolved, ConfigError> {
        let map = match &flags.config {
            None => serde_json::Map::new(),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ConfigError(format!("config file {}: {e}", path.display())))?;
                let v: Value = serde_json::from_str(&text)
                    .map_err(|e| ConfigError(format!("config file {}: {e}", path.display())))?;
                match v {
                    Value::Object(m) => m,
                    other => {
                        return Err(ConfigError(format!(
                            "config file {}: expected a flat object, got {other}",
                            path.display()
                        )))
                    }
                }
            }
        };
        if let Some(unknown) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(ConfigError(format!("config file: unknown key {unknown}")));
        }

        let out_file = match map.get("out") {
            None => None,
            Some(Value::String(s)) => Some(PathBuf::from(s)),
            Some(other) => {
                return Err(ConfigError(format!("config key out: expected a string, got {other}")))
            }
        };
        let r = Resolved {
            model_alpha: flags.model_alpha.or(file_f64(&map, "model_alpha")?).unwrap_or(0.75),
            model_theta: flags.model_theta.or(file_f64(&map, "model_theta")?).unwrap_or(1.65),
            k: flags.k.or(file_u64(&map, "k")?.map(|v| v as u32)).unwrap_or(1),
            m_cap: flags.m_cap.or(file_u64(&map, "m_cap")?.map(|v| v as u32)).unwrap_or(10),
            delta: flags.delta.or(file_f64(&map, "delta")?).unwrap_or(1e-2),
            depth: flags.depth.or(file_u64(&map, "depth")?.map(|v| v as u32)).unwrap_or(4),
            horizon: flags.horizon.or(file_u64(&map, "horizon")?.map(|v| v as usize)).unwrap_or(1000),
            seeds: flags.seeds.or(file_u64(&map, "seeds")?.map(|v| v as usize)).unwrap_or(100),
            rng_seed: flags.rng_seed.or(file_u64(&map, "rng_seed")?).unwrap_or(7),
            threads: flags.threads.or(file_u64(&map, "threads")?.map(|v| v as usize)).unwrap_or(0),
            out: flags.out.clone().or(out_file),
        };
        Ok(r)
    }

    /// The artifact path, required by commands whose whole point is the file.
    pub fn out_required(&self) -> Result<&PathBuf, ConfigError> {
        self.out
            .as_ref()
            .ok_or_else(|| ConfigError("this command writes an artifact; pass --out".into()))
    }

    /// Canonical `key=value` pairs of the shared knobs, the prefix of every
    /// provenance string.
    pub fn pairs(&self) -> Vec<(String, String)> {
        vec![
            ("model_alpha".into(), format!("{:?}", self.model_alpha)),
            ("model_theta".into(), format!("{:?}", self.model_theta)),
            ("k".into(), self.k.to_string()),
            ("m_cap".into(), self.m_cap.to_string()),
            ("delta".into(), format!("{:?}", self.delta)),
            ("depth".into(), self.depth.to_string()),
            ("horizon".into(), self.horizon.to_string()),
            ("seeds".into(), self.seeds.to_string()),
            ("rng_seed".into(), self.rng_seed.to_string()),
        ]
    }
}

/// Provenance line for artifact headers: the tool name, the subcommand, and
/// a hash of the fully resolved configuration. Byte-identical configs give
/// byte-identical lines; `threads` and the output path are deliberately
/// excluded so they never perturb artifact content.
pub fn provenance(subcommand: &str, pairs: &[(String, String)]) -> String {
    let mut canon = String::from(subcommand);
    for (k, v) in pairs {
        let _ = write!(canon, " {k}={v}");
    }
    let digest = Sha256::digest(canon.as_bytes());
    let mut hex = String::with_capacity(16);
    for b in &digest[..8] {
        let _ = write!(hex, "{b:02x}");
    }
    format!("geolorenz {subcommand} config={hex}")
}
