//! Flat sectioned `key = value` configuration files.
//!
//! ```text
//! # comment
//! [run]
//! seed = 7
//!
//! [scenario rough_interval]
//! kind = rough
//! grid.h = 0.015625
//! ```

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

/// One `[header]` block with its keys in file order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub header: String,
    pub name: Option<String>,
    pub line: usize,
    pub values: BTreeMap<String, String>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| Error::Config(format!("key `{key}` = `{raw}`: {e}"))),
        }
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    pub fn parse_required<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.parse(key)?.ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    /// Comma separated list; empty when the key is absent.
    pub fn list(&self, key: &str) -> Vec<String> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Keys under `prefix.` with the prefix stripped.
    pub fn subsection(&self, prefix: &str) -> BTreeMap<String, String> {
        let p = format!("{prefix}.");
        self.values
            .iter()
            .filter_map(|(k, v)| k.strip_prefix(&p).map(|s| (s.to_string(), v.clone())))
            .collect()
    }
}

pub fn parse_sections(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let inner = rest.strip_suffix(']').ok_or_else(|| Error::ConfigParse {
                line,
                message: format!("unterminated section header `{content}`"),
            })?;
            let mut parts = inner.split_whitespace();
            let header = parts.next().ok_or_else(|| Error::ConfigParse {
                line,
                message: "empty section header".into(),
            })?;
            let name = parts.next().map(str::to_string);
            if parts.next().is_some() {
                return Err(Error::ConfigParse {
                    line,
                    message: format!("section header `{content}` has more than one name"),
                });
            }
            sections.push(Section {
                header: header.to_string(),
                name,
                line,
                values: BTreeMap::new(),
            });
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::ConfigParse {
            line,
            message: format!("expected `key = value`, found `{content}`"),
        })?;
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(Error::ConfigParse {
                line,
                message: format!("invalid key `{key}`"),
            });
        }
        let section = sections.last_mut().ok_or_else(|| Error::ConfigParse {
            line,
            message: "key outside of any section".into(),
        })?;
        if section.values.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(Error::ConfigParse {
                line,
                message: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(sections)
}
