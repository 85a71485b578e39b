//! Plain-text `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Vector values are comma
//! separated. Keys are matched exactly.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!("duplicate key '{key}'")));
            }
        }
        Ok(KeyValues { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.entries
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("bad value for '{key}': '{v}'")))
            })
            .transpose()
    }

    pub fn get_vec3(&self, key: &str) -> Result<Option<[f64; 3]>> {
        let Some(v) = self.entries.get(key) else {
            return Ok(None);
        };
        let parts: Vec<f64> = v
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("bad vector for '{key}': '{v}'")))?;
        match *parts.as_slice() {
            [x] => Ok(Some([x; 3])),
            [x, y, z] => Ok(Some([x, y, z])),
            _ => Err(Error::Config(format!("'{key}' needs 1 or 3 values"))),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Keys present here but absent from `known`.
    pub fn unknown_keys<'a>(&'a self, known: &'a [&str]) -> Vec<&'a str> {
        self.keys().filter(|k| !known.contains(k)).collect()
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

pub(crate) fn fmt_vec3(v: [f64; 3]) -> String {
    format!("{}, {}, {}", v[0], v[1], v[2])
}
