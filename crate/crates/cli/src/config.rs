//! Option layering: command-line flag, then config file, then environment.

use std::path::Path;

/// Keys accepted in the config file. The matching environment variable is
/// `FRACTSCAN_` followed by the key in upper case with `-` replaced by `_`.
pub const KEYS: &[&str] = &[
    "seed",
    "format",
    "kind",
    "depth",
    "rows",
    "cols",
    "direction",
    "shift",
    "channels",
    "state-size",
    "merge",
    "suite",
];

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Debug, Default)]
pub struct Layers {
    file: toml::Table,
}

impl Layers {
    pub fn load(path: Option<&Path>) -> Result<Self, UsageError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, UsageError> {
        let file: toml::Table = text
            .parse()
            .map_err(|e| UsageError(format!("invalid config file: {e}")))?;
        if let Some(key) = file.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(UsageError(format!("unknown config key {key:?}")));
        }
        Ok(Self { file })
    }

    fn raw(&self, key: &str) -> Option<String> {
        if let Some(value) = self.file.get(key) {
            return Some(match value {
                toml::Value::String(s) => s.clone(),
                other => other.to_string(),
            });
        }
        let var = format!("FRACTSCAN_{}", key.to_uppercase().replace('-', "_"));
        std::env::var(var).ok()
    }

    /// `flag` if given, else the file or environment value parsed with `parse`.
    pub fn get_with<T>(
        &self,
        flag: Option<T>,
        key: &str,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, UsageError> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.raw(key)
            .map(|s| {
                parse(s.trim())
                    .map_err(|e| UsageError(format!("invalid value {s:?} for {key}: {e}")))
            })
            .transpose()
    }

    pub fn get<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
    ) -> Result<Option<T>, UsageError>
    where
        T::Err: std::fmt::Display,
    {
        self.get_with(flag, key, |s| s.parse::<T>().map_err(|e| e.to_string()))
    }

    pub fn get_enum<T: clap::ValueEnum>(
        &self,
        flag: Option<T>,
        key: &str,
    ) -> Result<Option<T>, UsageError> {
        self.get_with(flag, key, |s| T::from_str(s, true))
    }
}
