//! Flat `key = value` configuration files.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! # comment (also allowed after a value)
//! key = value
//! list_key = a, b, c
//! ```
//!
//! Keys are case sensitive identifiers. Blank lines are ignored. A key may
//! appear only once. Command line overrides use the same `key=value` syntax.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("key `{key}`: cannot parse {value:?}: {reason}")]
    Value {
        key: String,
        value: String,
        reason: String,
    },
    #[error("unknown key `{0}`")]
    Unknown(String),
}

/// Parsed entries; typed accessors remove what they read so leftovers can be
/// reported as unknown keys.
#[derive(Clone, Debug, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut kv = KeyValues::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            kv.insert_line(line, i + 1)?;
        }
        Ok(kv)
    }

    fn insert_line(&mut self, line: &str, number: usize) -> Result<(), ConfigError> {
        let (key, value) = line
            .split_once('=')
            .ok_or(ConfigError::Syntax { line: number })?;
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(ConfigError::Syntax { line: number });
        }
        if self.entries.contains_key(key) {
            return Err(ConfigError::Duplicate {
                line: number,
                key: key.to_string(),
            });
        }
        self.entries
            .insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    /// Applies a `key=value` override, replacing any existing value.
    pub fn set_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or(ConfigError::Syntax { line: 0 })?;
        self.entries
            .insert(key.trim().to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn take_raw(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    pub fn take<T>(&mut self, key: &'static str) -> Result<Option<T>, ConfigError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.take_raw(key).map(|v| parse_value(key, &v)).transpose()
    }

    pub fn take_or<T>(&mut self, key: &'static str, default: T) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.take(key)?.unwrap_or(default))
    }

    pub fn require<T>(&mut self, key: &'static str) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.take(key)?.ok_or(ConfigError::Missing(key))
    }

    /// Comma separated list; `None` when the key is absent.
    pub fn take_list<T>(&mut self, key: &'static str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some(v) = self.take_raw(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| parse_value(key, s))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    /// Fails on the first key nobody asked for.
    pub fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_keys().next() {
            Some(k) => Err(ConfigError::Unknown(k)),
            None => Ok(()),
        }
    }
}

fn parse_value<T>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T: FromStr,
    T::Err: Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_scalars_and_lists() {
        let text = "# header\nruns = 20\n\nattack_edges = 5, 25 # trailing\nname = x\n";
        let mut kv = KeyValues::parse(text).unwrap();
        assert_eq!(kv.require::<u32>("runs").unwrap(), 20);
        assert_eq!(
            kv.take_list::<u32>("attack_edges").unwrap(),
            Some(vec![5, 25])
        );
        assert_eq!(kv.take_or("missing", 7u8).unwrap(), 7);
        assert_eq!(kv.finish(), Err(ConfigError::Unknown("name".into())));
    }

    #[test]
    fn rejects_bad_lines() {
        assert_eq!(
            KeyValues::parse("a = 1\nnot a pair").unwrap_err(),
            ConfigError::Syntax { line: 2 }
        );
        assert!(matches!(
            KeyValues::parse("a=1\na=2"),
            Err(ConfigError::Duplicate { line: 2, .. })
        ));
        let mut kv = KeyValues::parse("runs = many").unwrap();
        assert!(matches!(
            kv.require::<u32>("runs"),
            Err(ConfigError::Value { .. })
        ));
        let mut kv = KeyValues::parse("").unwrap();
        assert_eq!(kv.require::<u32>("runs"), Err(ConfigError::Missing("runs")));
    }

    #[test]
    fn overrides_replace_values() {
        let mut kv = KeyValues::parse("runs = 2").unwrap();
        kv.set_override("runs=5").unwrap();
        assert_eq!(kv.require::<u32>("runs").unwrap(), 5);
    }
}
