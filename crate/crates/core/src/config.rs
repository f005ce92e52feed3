//! Flat `key = value` configuration documents with environment overrides.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use thiserror::Error;

/// Prefix for environment overrides: `CLAP_DELTA_T=0.9` sets `delta_t`.
pub const ENV_PREFIX: &str = "CLAP_";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("key `{key}`: {message}")]
    InvalidValue { key: String, message: String },
    #[error("unknown configuration key(s): {0}")]
    UnknownKeys(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValueDoc {
    entries: BTreeMap<String, String>,
}

impl KeyValueDoc {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: content.to_string(),
                });
            };
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(ConfigError::Syntax {
                    line,
                    text: content.to_string(),
                });
            }
            if entries
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
        }
        Ok(Self { entries })
    }

    /// Overlay `PREFIX_KEY=value` variables; keys are lowercased after the
    /// prefix is stripped.
    pub fn with_env_overrides<I, K, V>(mut self, prefix: &str, vars: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (k, v) in vars {
            if let Some(rest) = k.as_ref().strip_prefix(prefix) {
                if !rest.is_empty() {
                    self.entries
                        .insert(rest.to_ascii_lowercase(), v.as_ref().trim().to_string());
                }
            }
        }
        self
    }

    /// Overlay variables from the process environment.
    pub fn with_process_env(self) -> Self {
        self.with_env_overrides(ENV_PREFIX, std::env::vars())
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get_raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.entries
            .get(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| ConfigError::InvalidValue {
                    key: key.to_string(),
                    message: e.to_string(),
                })
            })
            .transpose()
    }

    /// Overwrite `slot` when `key` is present.
    pub fn read_into<T>(&self, key: &str, slot: &mut T) -> Result<(), ConfigError>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(v) = self.get(key)? {
            *slot = v;
        }
        Ok(())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Fail on any key outside `known`.
    pub fn deny_unknown(&self, known: &[&str]) -> Result<(), ConfigError> {
        let unknown: Vec<&str> = self.keys().filter(|k| !known.contains(k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::UnknownKeys(unknown.join(", ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_lookup() {
        let doc = KeyValueDoc::parse("# c\ndelta_t = 0.9\n\nbuffer_frames=4 # inline\n").unwrap();
        assert_eq!(doc.get::<f64>("delta_t").unwrap(), Some(0.9));
        assert_eq!(doc.get::<usize>("buffer_frames").unwrap(), Some(4));
        assert_eq!(doc.get::<usize>("missing").unwrap(), None);
        assert!(doc.get::<usize>("delta_t").is_err());
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(
            KeyValueDoc::parse("a = 1\nnot a pair\n"),
            Err(ConfigError::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            KeyValueDoc::parse("a = 1\na = 2\n"),
            Err(ConfigError::DuplicateKey { line: 2, .. })
        ));
        assert!(KeyValueDoc::parse("two words = 1").is_err());
    }

    #[test]
    fn env_overrides_win() {
        let doc = KeyValueDoc::parse("delta_t = 0.9\n")
            .unwrap()
            .with_env_overrides("CLAP_", [("CLAP_DELTA_T", "1.1"), ("OTHER", "x"), ("CLAP_SEED", "3")]);
        assert_eq!(doc.get::<f64>("delta_t").unwrap(), Some(1.1));
        assert_eq!(doc.get::<u64>("seed").unwrap(), Some(3));
        assert!(doc.get_raw("other").is_none());
        assert!(doc.deny_unknown(&["delta_t"]).is_err());
        assert!(doc.deny_unknown(&["delta_t", "seed"]).is_ok());
    }
}
