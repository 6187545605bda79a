//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys may contain dots
//! (`q.advice`, `f2.advice.social`). Lists are comma-separated.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::split_list;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
    source: String,
}

impl Config {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let location = format!("{source}:{}", lineno + 1);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(&location, "expected `key = value`"))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(&location, "empty key"));
            }
            if entries
                .insert(key.to_owned(), value.trim().to_owned())
                .is_some()
            {
                return Err(Error::parse(&location, format!("duplicate key `{key}`")));
            }
        }
        Ok(Config {
            entries,
            source: source.to_owned(),
        })
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_owned(), value.to_string());
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get_str(key)
            .map(|v| {
                v.parse().map_err(|_| {
                    Error::parse(&self.source, format!("invalid value `{v}` for `{key}`"))
                })
            })
            .transpose()
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::parse(&self.source, format!("missing key `{key}`")))
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.get_str(key)
            .map(|v| {
                split_list(v)
                    .into_iter()
                    .map(|item| {
                        item.parse().map_err(|_| {
                            Error::parse(
                                &self.source,
                                format!("invalid list item `{item}` for `{key}`"),
                            )
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    /// Entries whose key starts with `prefix.`, with the prefix stripped.
    pub fn with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> {
        self.entries.iter().filter_map(move |(k, v)| {
            k.strip_prefix(prefix)
                .and_then(|rest| rest.strip_prefix('.'))
                .map(|rest| (rest, v.as_str()))
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Canonical text form: sorted `key = value` lines.
    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_keys() {
        let cfg = Config::parse(
            "# experiment\ntau = 2\nq_grid = 0.1, 0.2,0.3\nq.advice = 0.4\n\nf2.advice.social=0.1\n",
            "t",
        )
        .unwrap();
        assert_eq!(cfg.require::<u32>("tau").unwrap(), 2);
        assert_eq!(
            cfg.get_list::<f64>("q_grid").unwrap().unwrap(),
            vec![0.1, 0.2, 0.3]
        );
        let qs: Vec<_> = cfg.with_prefix("q").collect();
        assert_eq!(qs, vec![("advice", "0.4")]);
        assert_eq!(cfg.with_prefix("f2").next(), Some(("advice.social", "0.1")));
        assert!(cfg.require::<u32>("reps").is_err());
        assert_eq!(cfg.get_or("reps", 5u32).unwrap(), 5);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(Config::parse("tau 2\n", "t").is_err());
        assert!(Config::parse("tau = 1\ntau = 2\n", "t").is_err());
        let cfg = Config::parse("tau = x\n", "t").unwrap();
        assert!(cfg.require::<u32>("tau").is_err());
    }
}
