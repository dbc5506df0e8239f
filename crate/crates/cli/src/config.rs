//! Training configuration: defaults, then a TOML file, then environment
//! overrides, then command-line flags.

use std::path::Path;

use rankdistill_core::TrainConfig;

use crate::error::{CliResult, DataContext, Failure};

/// Prefix of environment variables overriding config keys, e.g.
/// `RANKDISTILL_LAMBDA_UCD=0.001`.
pub const ENV_PREFIX: &str = "RANKDISTILL_";

fn defaults_table() -> toml::Table {
    toml::Table::try_from(TrainConfig::default()).expect("default config serializes")
}

/// Parses an override value as a TOML scalar, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Builds a config from an optional TOML file and `(name, value)` environment
/// pairs. Unknown keys are rejected by name.
pub fn resolve(file: Option<&Path>, env: impl IntoIterator<Item = (String, String)>) -> CliResult<TrainConfig> {
    let known = defaults_table();
    let mut table = known.clone();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).data_ctx(format!("reading config {}", path.display()))?;
        let parsed: toml::Table =
            text.parse().map_err(|e| Failure::usage(format!("parsing config {}: {e}", path.display())))?;
        for (key, value) in parsed {
            if !known.contains_key(&key) {
                return Err(Failure::usage(format!("unknown config key `{key}` in {}", path.display())));
            }
            table.insert(key, value);
        }
    }
    let mut overrides: Vec<(String, String)> =
        env.into_iter().filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|k| (k.to_ascii_lowercase(), v))).collect();
    overrides.sort();
    for (key, raw) in overrides {
        if !known.contains_key(&key) {
            return Err(Failure::usage(format!("unknown config key `{key}` from {ENV_PREFIX}{}", key.to_uppercase())));
        }
        table.insert(key, parse_value(&raw));
    }
    let config: TrainConfig =
        table.try_into().map_err(|e: toml::de::Error| Failure::usage(format!("invalid config: {}", e.message())))?;
    config.validate()?;
    Ok(config)
}

/// The process environment's override variables.
pub fn env_overrides() -> Vec<(String, String)> {
    std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect()
}

/// TOML snapshot that [`resolve`] reads back to an equal config.
pub fn snapshot(config: &TrainConfig) -> String {
    toml::to_string(config).expect("config serializes")
}
