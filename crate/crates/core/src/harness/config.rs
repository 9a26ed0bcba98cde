//! Flat `key = value` configuration with `[section]` headers.
//!
//! ```text
//! # comment
//! [run]
//! seed = 42
//! replicas = 10000
//!
//! [cellsystem]
//! x_min = 0.005
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key '{section}.{key}'")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: key '{section}.{key}': {message}")]
    BadValue { line: usize, section: String, key: String, message: String },
    #[error("environment variable {var}: {message}")]
    Env { var: String, message: String },
    #[error("cannot read config: {0}")]
    Io(String),
}

/// Keys accepted in each section.
pub const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("run", &["seed", "replicas", "format", "ks_level"]),
    ("experiment", &["theta", "x", "eps_grid", "t_grid", "n_grid", "x_grid", "theta_grid"]),
    ("levy", &["delta"]),
    ("lamperti", &["level_floor", "levy_horizon"]),
    (
        "cellsystem",
        &["x_min", "martingale_x_min", "delta_max", "delta_min", "delta_factor", "diffuse", "gaussian", "max_cells"],
    ),
    ("spine", &["delta", "x0_floor", "child_threshold", "pool_size", "tree_x_min"]),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        let mut section = String::from("run");
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                continue;
            }
            if let Some(rest) = l.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::Syntax { line, message: format!("unterminated section header {l:?}") })?
                    .trim();
                if !KNOWN_KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(ConfigError::Syntax { line, message: format!("unknown section [{name}]") });
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line, message: format!("expected 'key = value', got {l:?}") })?;
            let (k, v) = (k.trim(), v.trim());
            let allowed = KNOWN_KEYS.iter().find(|(s, _)| *s == section).map_or(&[][..], |(_, ks)| *ks);
            if !allowed.contains(&k) {
                return Err(ConfigError::UnknownKey { line, section, key: k.to_string() });
            }
            if v.is_empty() {
                return Err(ConfigError::BadValue { line, section, key: k.into(), message: "empty value".into() });
            }
            let prev =
                cfg.sections.entry(section.clone()).or_default().insert(k.into(), Entry { value: v.into(), line });
            if let Some(p) = prev {
                return Err(ConfigError::BadValue {
                    line,
                    section,
                    key: k.into(),
                    message: format!("duplicate key (first set on line {})", p.line),
                });
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn is_set(&self, section: &str, key: &str) -> bool {
        self.sections.get(section).is_some_and(|s| s.contains_key(key))
    }

    /// Parsed value of `section.key`, or `default` when absent.
    pub fn get<T>(&self, section: &str, key: &str, default: T) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        match self.sections.get(section).and_then(|s| s.get(key)) {
            None => Ok(default),
            Some(e) => e.value.parse::<T>().map_err(|err| ConfigError::BadValue {
                line: e.line,
                section: section.into(),
                key: key.into(),
                message: format!("{:?}: {err}", e.value),
            }),
        }
    }

    /// Positive finite real, named in the error otherwise.
    pub fn positive(&self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v: f64 = self.get(section, key, default)?;
        if v > 0.0 && v.is_finite() {
            return Ok(v);
        }
        let line = self.sections.get(section).and_then(|s| s.get(key)).map_or(0, |e| e.line);
        Err(ConfigError::BadValue {
            line,
            section: section.into(),
            key: key.into(),
            message: "must be positive".into(),
        })
    }

    /// One of a fixed set of words.
    pub fn choice(&self, section: &str, key: &str, default: &str, options: &[&str]) -> Result<String, ConfigError> {
        let v: String = self.get(section, key, default.to_string())?;
        if options.contains(&v.as_str()) {
            return Ok(v);
        }
        let line = self.sections.get(section).and_then(|s| s.get(key)).map_or(0, |e| e.line);
        Err(ConfigError::BadValue {
            line,
            section: section.into(),
            key: key.into(),
            message: format!("{v:?} is not one of {}", options.join(", ")),
        })
    }

    /// Comma-separated list of reals.
    pub fn list(&self, section: &str, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.sections.get(section).and_then(|s| s.get(key)) {
            None => Ok(default.to_vec()),
            Some(e) => {
                let bad = |m: String| ConfigError::BadValue {
                    line: e.line,
                    section: section.into(),
                    key: key.into(),
                    message: m,
                };
                let v = e
                    .value
                    .split(',')
                    .map(|p| p.trim().parse::<f64>().map_err(|err| bad(format!("{p:?}: {err}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                if v.is_empty() {
                    return Err(bad("empty list".into()));
                }
                Ok(v)
            }
        }
    }

    /// Canonical `section.key=value` lines, for hashing.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for (sec, kv) in &self.sections {
            for (k, e) in kv {
                s.push_str(&format!("{sec}.{k}={}\n", e.value));
            }
        }
        s
    }
}
