//! Flat key/value run configuration.
//!
//! The file format is one `key = value` pair per line; blank lines and `#`
//! comments are skipped. Keys are validated against the documented set;
//! values are kept verbatim. The canonical form sorts keys and normalizes
//! spacing, so `serialize(parse(text))` is the canonical rendering of
//! `text` and a fixed point of the round trip.

use std::collections::BTreeMap;
use std::fmt;

/// Keys understood by the CLI, shared between config files and flags.
pub const KNOWN_KEYS: &[&str] = &[
    // protocol / run
    "n",
    "error",
    "fidelity",
    "mixture",
    "seed",
    "trials",
    "out",
    "rounds",
    "target",
    "leakage_threshold",
    // sweep
    "f_min",
    "f_max",
    "f_step",
    // cavity
    "omega_c",
    "omega_0",
    "omega_p",
    "kappa",
    "gamma",
    "g",
    "ideal_point",
    // faraday scan
    "omega_p_min",
    "omega_p_max",
    "steps",
    // efficiencies
    "T_f",
    "eta_0",
    "eta_d",
    "eta_a",
    "per_photon_losses",
    "with_efficiencies",
];

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Parsed configuration: an ordered key → raw-value map.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(ConfigError(format!("line {}: unknown key `{key}`", lineno + 1)));
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(ConfigError(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        Ok(Config { values })
    }

    /// Canonical rendering: sorted keys, `key = value`, newline-terminated.
    #[cfg_attr(not(test), allow(dead_code))]
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| ConfigError(format!("key `{key}`: {e}")))
            })
            .transpose()
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|e| ConfigError(format!("key `{key}`: {e}")))
            })
            .transpose()
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|e| ConfigError(format!("key `{key}`: {e}")))
            })
            .transpose()
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.raw(key)
            .map(|v| match v {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(ConfigError(format!(
                    "key `{key}`: expected `true` or `false`, got `{v}`"
                ))),
            })
            .transpose()
    }

    pub fn get_string(&self, key: &str) -> Option<String> {
        self.raw(key).map(|s| s.to_string())
    }
}
