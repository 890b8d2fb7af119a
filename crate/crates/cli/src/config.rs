//! Layered run settings: built-in defaults, then a config file, then
//! command-line flags.
//!
//! Config files are flat `key = value` lines with dotted keys
//! (`recovery.gamma = 2.0`); `#` starts a comment. A JSON run manifest is
//! also accepted, in which case its `config` table is loaded.

use crate::error::{CliError, Result};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "MCS_OUT_DIR";
const FALLBACK_OUT_DIR: &str = "mcs-out";

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Default,
    File { path: PathBuf, line: usize },
    Manifest(PathBuf),
    Flag,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Default => f.write_str("default"),
            Self::File { path, line } => write!(f, "{}:{line}", path.display()),
            Self::Manifest(path) => write!(f, "{}", path.display()),
            Self::Flag => f.write_str("command line"),
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    source: Source,
}

#[derive(Debug, Clone)]
pub struct Settings {
    command: &'static str,
    entries: BTreeMap<String, Entry>,
}

pub fn default_out_dir() -> String {
    std::env::var(OUT_DIR_ENV)
        .ok()
        .filter(|v| !v.is_empty())
        .unwrap_or_else(|| FALLBACK_OUT_DIR.to_string())
}

impl Settings {
    /// Only keys listed in `defaults` are accepted later on.
    pub fn new(command: &'static str, defaults: &[(&str, String)]) -> Self {
        let entries = defaults
            .iter()
            .map(|(k, v)| {
                (
                    k.to_string(),
                    Entry {
                        value: v.clone(),
                        source: Source::Default,
                    },
                )
            })
            .collect();
        Self { command, entries }
    }

    fn put(&mut self, key: &str, value: &str, source: Source) -> Result<()> {
        match self.entries.get_mut(key) {
            Some(e) => {
                *e = Entry {
                    value: value.trim().to_string(),
                    source,
                };
                Ok(())
            }
            None => Err(CliError::Config(format!(
                "{source}: unknown key '{key}' for '{}'",
                self.command
            ))),
        }
    }

    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            return self.load_manifest(path, &text);
        }
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let source = Source::File {
                path: path.to_path_buf(),
                line: i + 1,
            };
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!("{source}: expected key=value, got '{line}'")));
            };
            let key = key.trim();
            if let Some(first) = seen.insert(key.to_string(), i + 1) {
                return Err(CliError::Config(format!("{source}: key '{key}' already set on line {first}")));
            }
            self.put(key, value, source)?;
        }
        Ok(())
    }

    fn load_manifest(&mut self, path: &Path, text: &str) -> Result<()> {
        let manifest: crate::manifest::RunManifest =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("{}: not a run manifest: {e}", path.display())))?;
        if manifest.command != self.command {
            return Err(CliError::Config(format!(
                "{}: manifest is for '{}', not '{}'",
                path.display(),
                manifest.command,
                self.command
            )));
        }
        for (k, v) in &manifest.config {
            self.put(k, v, Source::Manifest(path.to_path_buf()))?;
        }
        Ok(())
    }

    /// A `key=value` override from the command line.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let Some((key, value)) = pair.split_once('=') else {
            return Err(CliError::Usage(format!("--set expects key=value, got '{pair}'")));
        };
        self.put(key.trim(), value, Source::Flag)
    }

    pub fn set_flag(&mut self, key: &str, value: Option<impl ToString>) -> Result<()> {
        match value {
            Some(v) => self.put(key, &v.to_string(), Source::Flag),
            None => Ok(()),
        }
    }

    /// Replace an empty "derive it" default with the value actually used,
    /// so the manifest never hides a parameter.
    pub fn materialize(&mut self, key: &str, value: impl ToString) {
        if let Some(e) = self.entries.get_mut(key) {
            if e.value.is_empty() {
                e.value = value.to_string();
            }
        }
    }

    /// Overwrite a value with what the run actually used (for example the
    /// cosets read from a pattern file), keeping its source.
    pub fn record(&mut self, key: &str, value: impl ToString) {
        if let Some(e) = self.entries.get_mut(key) {
            e.value = value.to_string();
        }
    }

    pub fn raw(&self, key: &str) -> &str {
        &self.entries[key].value
    }

    pub fn is_empty(&self, key: &str) -> bool {
        self.raw(key).is_empty()
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let e = &self.entries[key];
        e.value
            .parse()
            .map_err(|err| CliError::Config(format!("{}: key '{key}': invalid value '{}': {err}", e.source, e.value)))
    }

    /// Comma-separated list; empty string gives an empty list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: fmt::Display,
    {
        let e = &self.entries[key];
        e.value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|err| CliError::Config(format!("{}: key '{key}': invalid item '{s}': {err}", e.source)))
            })
            .collect()
    }

    pub fn invalid(&self, key: &str, why: impl fmt::Display) -> CliError {
        let e = &self.entries[key];
        CliError::Config(format!("{}: key '{key}' = '{}': {why}", e.source, e.value))
    }

    pub fn resolved(&self) -> BTreeMap<String, String> {
        self.entries.iter().map(|(k, e)| (k.clone(), e.value.clone())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn settings() -> Settings {
        Settings::new("simulate", &[("snr_db", "10".into()), ("recovery.gamma", "2".into()), ("seed", "1".into())])
    }

    #[test]
    fn precedence_and_comments() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# run\nsnr_db = 5   # low\n\nrecovery.gamma=3").unwrap();
        let mut s = settings();
        s.load_file(f.path()).unwrap();
        assert_eq!(s.get::<f64>("snr_db").unwrap(), 5.0);
        s.set_pair("snr_db=20").unwrap();
        assert_eq!(s.get::<f64>("snr_db").unwrap(), 20.0);
        assert_eq!(s.raw("recovery.gamma"), "3");
        assert_eq!(s.raw("seed"), "1");
    }

    #[test]
    fn errors_name_key_and_line() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "seed=1\nbogus=2").unwrap();
        let err = settings().load_file(f.path()).unwrap_err().to_string();
        assert!(err.contains(":2:") && err.contains("bogus"), "{err}");

        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "\nsnr_db=loud").unwrap();
        let mut s = settings();
        s.load_file(f.path()).unwrap();
        let err = s.get::<f64>("snr_db").unwrap_err().to_string();
        assert!(err.contains(":2:") && err.contains("snr_db") && err.contains("loud"), "{err}");

        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "seed").unwrap();
        assert!(settings().load_file(f.path()).is_err());
    }

    #[test]
    fn lists_and_materialize() {
        let mut s = Settings::new("x", &[("a", "1, 2,3".into()), ("b", String::new())]);
        assert_eq!(s.list::<u32>("a").unwrap(), vec![1, 2, 3]);
        assert!(s.list::<u32>("b").unwrap().is_empty());
        s.materialize("b", 7);
        s.materialize("a", 9);
        assert_eq!((s.raw("a"), s.raw("b")), ("1, 2,3", "7"));
    }
}
