//! Layered run settings: defaults, then a `key=value` file, then flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::error::CliError;

/// One setting a command accepts, exposed as `--<key>`.
#[derive(Debug, Clone, Copy)]
pub struct Param {
    pub key: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

pub const fn param(key: &'static str, default: &'static str, help: &'static str) -> Param {
    Param { key, default: Some(default), help }
}

pub const fn optional(key: &'static str, help: &'static str) -> Param {
    Param { key, default: None, help }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Default,
    Config,
    Flag,
}

impl Source {
    fn as_str(self) -> &'static str {
        match self {
            Self::Default => "default",
            Self::Config => "config",
            Self::Flag => "flag",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Settings {
    command: String,
    resolved: BTreeMap<&'static str, (String, Source)>,
    layers: Vec<(Source, &'static str, String)>,
}

/// Parses `key=value` lines; `#` starts a comment line.
pub fn parse_config_file(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::config("config", format!("line {} is not key=value: {line:?}", k + 1)))?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

impl Settings {
    pub fn resolve(
        command: &str,
        params: &[Param],
        config: &[(String, String)],
        flags: &[(&'static str, String)],
    ) -> Result<Self, CliError> {
        let mut resolved = BTreeMap::new();
        let mut layers = Vec::new();
        for p in params {
            if let Some(d) = p.default {
                resolved.insert(p.key, (d.to_string(), Source::Default));
                layers.push((Source::Default, p.key, d.to_string()));
            }
        }
        for (key, value) in config {
            let p = params
                .iter()
                .find(|p| p.key == key)
                .ok_or_else(|| CliError::config(key, format!("not a setting of {command}")))?;
            resolved.insert(p.key, (value.clone(), Source::Config));
            layers.push((Source::Config, p.key, value.clone()));
        }
        for (key, value) in flags {
            resolved.insert(key, (value.clone(), Source::Flag));
            layers.push((Source::Flag, key, value.clone()));
        }
        Ok(Self { command: command.to_string(), resolved, layers })
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.resolved.get(key).map(|(v, _)| v.as_str()).filter(|v| !v.is_empty())
    }

    fn parse<T: std::str::FromStr>(key: &str, s: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        s.trim().parse::<T>().map_err(|e| CliError::config(key, format!("{s:?}: {e}")))
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let s = self.raw(key).ok_or_else(|| CliError::config(key, "missing value"))?;
        Self::parse(key, s)
    }

    pub fn opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key).map(|s| Self::parse(key, s)).transpose()
    }

    /// Comma-separated list.
    pub fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let s = self.raw(key).ok_or_else(|| CliError::config(key, "missing value"))?;
        let v: Vec<T> = s.split(',').map(|p| Self::parse(key, p)).collect::<Result<_, _>>()?;
        Ok(v)
    }

    /// Resolved settings that determine the results, in a fixed order. The
    /// manifest hash covers exactly these lines.
    fn hashed_body(&self, version: &str, seed: Option<u64>) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command={}", self.command);
        let _ = writeln!(s, "version={version}");
        let _ = writeln!(s, "seed={}", seed.map_or_else(|| "none".to_string(), |v| v.to_string()));
        for (k, (v, _)) in &self.resolved {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn manifest(&self, version: &str, seed: Option<u64>, run: &[(&str, String)]) -> Manifest {
        let body = self.hashed_body(version, seed);
        let hash: String = Sha256::digest(body.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
        let mut text = body;
        let _ = writeln!(text, "manifest_hash={hash}");
        for (k, v) in run {
            let _ = writeln!(text, "{k}={v}");
        }
        for (k, (_, src)) in &self.resolved {
            let _ = writeln!(text, "source.{k}={}", src.as_str());
        }
        for (src, k, v) in &self.layers {
            let _ = writeln!(text, "{}.{k}={v}", src.as_str());
        }
        Manifest { hash, text }
    }
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub hash: String,
    pub text: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    const PARAMS: [Param; 3] = [param("n", "10", ""), param("b", "1", ""), optional("imin", "")];

    #[test]
    fn precedence() {
        let cfg = parse_config_file("# c\nn = 20\nb=2\n\n").unwrap();
        let s = Settings::resolve("x", &PARAMS, &cfg, &[("n", "30".into())]).unwrap();
        assert_eq!(s.get::<u64>("n").unwrap(), 30);
        assert_eq!(s.get::<f64>("b").unwrap(), 2.0);
        assert_eq!(s.opt::<f64>("imin").unwrap(), None);
        let m = s.manifest("0", Some(1), &[]);
        assert!(m.text.contains("default.n=10\n") && m.text.contains("config.n=20\n"));
        assert!(m.text.contains("flag.n=30\n"));
        assert!(m.text.contains("source.b=config\n"));
    }

    #[test]
    fn errors_name_the_key() {
        let err = Settings::resolve("x", &PARAMS, &[("bogus".into(), "1".into())], &[]).unwrap_err();
        assert!(err.to_string().contains("bogus"));
        let s = Settings::resolve("x", &PARAMS, &[], &[("b", "zero".into())]).unwrap();
        assert!(s.get::<f64>("b").unwrap_err().to_string().contains("--b"));
        assert!(parse_config_file("novalue").is_err());
    }

    #[test]
    fn hash_ignores_run_details() {
        let s = Settings::resolve("x", &PARAMS, &[], &[]).unwrap();
        let a = s.manifest("0", Some(1), &[("jobs", "1".into())]);
        let b = s.manifest("0", Some(1), &[("jobs", "8".into())]);
        assert_eq!(a.hash, b.hash);
        assert_ne!(a.hash, s.manifest("0", Some(2), &[]).hash);
        assert_eq!(a.hash.len(), 64);
    }
}
