//! Flat `key = value` configuration with per-command schemas.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{source_name}:{line}: expected `key = value`")]
    Syntax { source_name: String, line: usize },
    #[error("unknown key `{key}` for `{command}`")]
    UnknownKey { command: String, key: String },
    #[error("key `{0}` given twice in the config file")]
    Duplicate(String),
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    Invalid {
        key: String,
        value: String,
        reason: String,
    },
    #[error("flag `{0}` needs a value")]
    DanglingFlag(String),
    #[error("expected a `--key` flag, found `{0}`")]
    Positional(String),
    #[error("cannot read config file {path}: {reason}")]
    Read { path: String, reason: String },
}

/// One recognized key. `default: None` makes the key required.
#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub default: Option<&'static str>,
}

pub const fn req(name: &'static str) -> Key {
    Key {
        name,
        default: None,
    }
}

pub const fn opt(name: &'static str, default: &'static str) -> Key {
    Key {
        name,
        default: Some(default),
    }
}

/// Value written for optional keys that are unset.
pub const UNSET: &str = "-";

/// Every key of a command with its final value, in schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub command: String,
    entries: Vec<(&'static str, String)>,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_file(text: &str, source_name: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            source_name: source_name.to_string(),
            line: i + 1,
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || k.contains(char::is_whitespace) {
            return Err(ConfigError::Syntax {
                source_name: source_name.to_string(),
                line: i + 1,
            });
        }
        if out.iter().any(|(seen, _)| seen == k) {
            return Err(ConfigError::Duplicate(k.to_string()));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Splits `--key value` pairs. `--config` and `--seed` are ordinary keys here.
pub fn parse_flags(args: &[String]) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let key = a
            .strip_prefix("--")
            .ok_or_else(|| ConfigError::Positional(a.clone()))?;
        if let Some((k, v)) = key.split_once('=') {
            out.push((k.to_string(), v.to_string()));
            continue;
        }
        let value = it
            .next()
            .ok_or_else(|| ConfigError::DanglingFlag(a.clone()))?;
        out.push((key.to_string(), value.clone()));
    }
    Ok(out)
}

impl Resolved {
    /// Applies schema defaults, then the config file, then flag overrides.
    pub fn resolve(
        command: &str,
        schema: &[Key],
        file: &[(String, String)],
        flags: &[(String, String)],
    ) -> Result<Self, ConfigError> {
        let mut entries: Vec<(&'static str, Option<String>)> = schema
            .iter()
            .map(|k| (k.name, k.default.map(str::to_string)))
            .collect();
        for (k, v) in file.iter().chain(flags) {
            let slot = entries
                .iter_mut()
                .find(|(name, _)| name == k)
                .ok_or_else(|| ConfigError::UnknownKey {
                    command: command.to_string(),
                    key: k.clone(),
                })?;
            slot.1 = Some(v.clone());
        }
        let entries = entries
            .into_iter()
            .map(|(k, v)| {
                v.map(|v| (k, v))
                    .ok_or_else(|| ConfigError::Missing(k.to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            command: command.to_string(),
            entries,
        })
    }

    pub fn raw(&self, key: &str) -> &str {
        self.entries
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.as_str())
            .unwrap_or_else(|| panic!("key `{key}` is not in the `{}` schema", self.command))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let v = self.raw(key);
        v.parse().map_err(|e: T::Err| ConfigError::Invalid {
            key: key.to_string(),
            value: v.to_string(),
            reason: e.to_string(),
        })
    }

    /// `None` when the key holds [`UNSET`].
    pub fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        if self.raw(key) == UNSET {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let v = self.raw(key);
        if v == UNSET || v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|x| {
                x.trim().parse().map_err(|e: T::Err| ConfigError::Invalid {
                    key: key.to_string(),
                    value: v.to_string(),
                    reason: e.to_string(),
                })
            })
            .collect()
    }

    pub fn path(&self, key: &str) -> &Path {
        Path::new(self.raw(key))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (*k, v.as_str()))
    }
}

impl fmt::Display for Resolved {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# resolved configuration for `{}`", self.command)?;
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}
