//! Flat key-value configuration files: one `key = value` pair per line,
//! `#` comments, keys case-sensitive. Lists are comma separated.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    Io(String),
    Parse { line: usize, text: String },
    BadValue { key: String, value: String },
    Missing(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "config io error: {e}"),
            ConfigError::Parse { line, text } => {
                write!(f, "config line {line} is not 'key = value': {text:?}")
            }
            ConfigError::BadValue { key, value } => {
                write!(f, "config key '{key}' has unusable value {value:?}")
            }
            ConfigError::Missing(k) => write!(f, "config key '{k}' is required"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
    /// Raw bytes, for manifest hashing.
    pub raw: Vec<u8>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Parse {
                    line: idx + 1,
                    text: line.to_string(),
                });
            };
            values.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Config {
            values,
            raw: text.as_bytes().to_vec(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(e.to_string()))?;
        Config::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: v.to_string(),
            }),
        }
    }

    pub fn u32_or(&self, key: &str, default: u32) -> Result<u32, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: v.to_string(),
            }),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
                key: key.to_string(),
                value: v.to_string(),
            }),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(v) => Err(ConfigError::BadValue {
                key: key.to_string(),
                value: v.to_string(),
            }),
        }
    }

    pub fn usize_opt(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.get(key) {
            None | Some("") => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError::BadValue {
                    key: key.to_string(),
                    value: v.to_string(),
                }),
        }
    }

    pub fn usize_list_or(&self, key: &str, default: &[usize]) -> Result<Vec<usize>, ConfigError> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) if v.trim().is_empty() => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim().parse().map_err(|_| ConfigError::BadValue {
                        key: key.to_string(),
                        value: s.to_string(),
                    })
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_comments_and_lists() {
        let cfg = Config::parse("a = 3\n# comment\nlist = 1, 2,3\nflag= true\n").unwrap();
        assert_eq!(cfg.usize_or("a", 0).unwrap(), 3);
        assert_eq!(cfg.usize_list_or("list", &[]).unwrap(), vec![1, 2, 3]);
        assert!(cfg.bool_or("flag", false).unwrap());
        assert_eq!(cfg.usize_or("absent", 7).unwrap(), 7);
    }

    #[test]
    fn rejects_bad_lines_and_values() {
        assert!(Config::parse("just words\n").is_err());
        let cfg = Config::parse("x = notanumber\n").unwrap();
        assert!(cfg.usize_or("x", 0).is_err());
    }
}
