//! `key = value` settings files. Keys are flag names without the leading
//! dashes; `#` starts a comment. Command-line flags override file values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
    /// Directory relative paths from the file are resolved against.
    base: Option<PathBuf>,
}

impl Settings {
    pub fn load(path: &Path, known: &[&str]) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut s = Self::parse(&text, known).with_context(|| format!("in config {}", path.display()))?;
        s.base = path.parent().map(Path::to_path_buf);
        Ok(s)
    }

    pub fn parse(text: &str, known: &[&str]) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", n + 1))?;
            let key = key.trim().trim_start_matches("--").to_string();
            if !known.contains(&key.as_str()) {
                bail!("line {}: unknown key `{key}`", n + 1);
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values, base: None })
    }

    /// A flag value, when given, replaces the file value.
    pub fn set(&mut self, key: &str, value: Option<impl ToString>) {
        if let Some(v) = value {
            self.values.insert(key.to_string(), v.to_string());
        }
    }

    /// Boolean switches only ever turn an option on from the command line.
    pub fn set_flag(&mut self, key: &str, on: bool) {
        if on {
            self.values.insert(key.to_string(), "true".into());
        }
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("invalid value `{v}` for {key}: {e}")))
            .transpose()
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        Ok(self.get::<bool>(key)?.unwrap_or(false))
    }

    /// A path, resolved against the config file directory when it came from there.
    pub fn path(&self, key: &str, from_flag: bool) -> Option<PathBuf> {
        let p = PathBuf::from(self.values.get(key)?);
        match (&self.base, from_flag) {
            (Some(base), false) if p.is_relative() => Some(base.join(p)),
            _ => Some(p),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KEYS: &[&str] = &["max-depth", "legacy-sqrel", "format"];

    #[test]
    fn parses_and_overrides() {
        let mut s = Settings::parse("# defaults\nmax-depth = 80\n--legacy-sqrel=true  # old protocol\n", KEYS).unwrap();
        assert_eq!(s.get::<f64>("max-depth").unwrap(), Some(80.0));
        assert!(s.flag("legacy-sqrel").unwrap());
        s.set("max-depth", Some(50.0));
        assert_eq!(s.get::<f64>("max-depth").unwrap(), Some(50.0));
        s.set("format", None::<String>);
        assert_eq!(s.get::<String>("format").unwrap(), None);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(Settings::parse("colour = red", KEYS).is_err());
        assert!(Settings::parse("max-depth", KEYS).is_err());
        let s = Settings::parse("max-depth = far", KEYS).unwrap();
        assert!(s.get::<f64>("max-depth").is_err());
    }
}
