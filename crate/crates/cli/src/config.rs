//! Run configuration: command-line flags over a flat `key=value` file over
//! built-in defaults. Every value looked up is recorded so the resolved
//! configuration can be echoed into the run manifest.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, Result};

pub const SEED_ENV: &str = "TRAJSCAN_SEED";
pub const DEFAULT_SEED: u64 = 1;

/// Parses `key=value` lines; blank lines and lines starting with `#` are skipped.
pub fn parse_config(text: &str, origin: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("{origin}:{}: expected key=value, got '{line}'", n + 1)))?;
        let key = k.trim().replace('-', "_");
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(CliError::usage(format!("{origin}:{}: duplicate key '{key}'", n + 1)));
        }
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config file {}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

#[derive(Debug, Default)]
pub struct Resolver {
    flags: BTreeMap<String, String>,
    file: BTreeMap<String, String>,
    resolved: Vec<(String, String)>,
}

impl Resolver {
    pub fn new(file: BTreeMap<String, String>) -> Self {
        Self {
            file,
            ..Self::default()
        }
    }

    /// Adds a command-line value; `None` leaves lower layers in charge.
    pub fn flag(&mut self, key: &str, value: Option<impl Display>) {
        if let Some(v) = value {
            self.flags.insert(key.to_string(), v.to_string());
        }
    }

    /// `key=value` overrides given on the command line.
    pub fn flag_assignments(&mut self, assignments: &[String]) -> Result<()> {
        for a in assignments {
            let (k, v) = a
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("--set expects key=value, got '{a}'")))?;
            self.flags.insert(k.trim().replace('-', "_"), v.trim().to_string());
        }
        Ok(())
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.flags.get(key).or_else(|| self.file.get(key)).map(String::as_str)
    }

    fn parse<T: FromStr>(key: &str, text: &str) -> Result<T> {
        text.parse::<T>()
            .map_err(|_| CliError::usage(format!("invalid value for {key}: '{text}'")))
    }

    fn record(&mut self, key: &str, text: String) {
        self.resolved.push((key.to_string(), text));
    }

    pub fn get<T: FromStr + Display>(&mut self, key: &str, default: T) -> Result<T> {
        let value = match self.raw(key) {
            Some(text) => Self::parse(key, text)?,
            None => default,
        };
        self.record(key, value.to_string());
        Ok(value)
    }

    pub fn get_opt<T: FromStr + Display>(&mut self, key: &str) -> Result<Option<T>> {
        let value = self.raw(key).filter(|t| !t.is_empty()).map(|t| Self::parse(key, t)).transpose()?;
        self.record(key, value.as_ref().map(ToString::to_string).unwrap_or_default());
        Ok(value)
    }

    /// Raw text value with a default; the caller interprets it.
    pub fn get_text(&mut self, key: &str, default: &str) -> String {
        let value = self.raw(key).unwrap_or(default).to_string();
        self.record(key, value.clone());
        value
    }

    /// Master seed: flag, then config file, then `TRAJSCAN_SEED`, then the default.
    pub fn seed(&mut self) -> Result<u64> {
        let env = std::env::var(SEED_ENV).ok();
        let (seed, source) = match (self.raw("seed"), env.as_deref()) {
            (Some(text), _) => (Self::parse("seed", text)?, if self.flags.contains_key("seed") { "flag" } else { "config" }),
            (None, Some(text)) => (Self::parse(SEED_ENV, text.trim())?, "env"),
            (None, None) => (DEFAULT_SEED, "default"),
        };
        self.record("seed", seed.to_string());
        self.record("seed_source", source.to_string());
        Ok(seed)
    }

    /// Keys given on the command line or in the config file that no lookup used.
    pub fn unused(&self) -> Vec<String> {
        self.flags
            .keys()
            .chain(self.file.keys())
            .filter(|k| !self.resolved.iter().any(|(r, _)| r == *k))
            .cloned()
            .collect()
    }

    pub fn into_entries(self) -> Vec<(String, String)> {
        self.resolved
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_override_defaults() {
        let file = parse_config("# comment\nn_women = 100\nnoise_sd=0.5\n", "test").unwrap();
        let mut r = Resolver::new(file);
        r.flag("noise_sd", Some(0.25));
        r.flag("chip_sd", None::<f64>);
        assert_eq!(r.get("n_women", 7usize).unwrap(), 100);
        assert_eq!(r.get("noise_sd", 1.0).unwrap(), 0.25);
        assert_eq!(r.get("chip_sd", 0.5).unwrap(), 0.5);
        assert!(r.unused().is_empty());
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(parse_config("n_women 100", "x").is_err());
        assert!(parse_config("a=1\na=2", "x").is_err());
        let mut r = Resolver::new(parse_config("n_women=lots", "x").unwrap());
        let err = r.get("n_women", 1usize).unwrap_err();
        assert!(err.to_string().contains("n_women"));
        assert_eq!(err.exit_code(), 2);
    }
}
