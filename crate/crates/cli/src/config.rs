//! Plain `key=value` configuration files and flag/file/default resolution.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Input(format!("config line {}: expected key=value", i + 1)))?;
            values.insert(k.trim().replace('-', "_"), v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Resolves a setting with precedence flag > config file > default and
/// records the effective value for the manifest.
pub struct Resolver<'a> {
    file: &'a ConfigFile,
    pub effective: BTreeMap<String, String>,
}

impl<'a> Resolver<'a> {
    pub fn new(file: &'a ConfigFile) -> Self {
        Self { file, effective: BTreeMap::new() }
    }

    pub fn value<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + ToString,
    {
        let v = match (flag, self.file.get(key)) {
            (Some(v), _) => v,
            (None, Some(s)) => {
                s.parse().map_err(|_| CliError::Usage(format!("config key {key}: cannot parse '{s}'")))?
            }
            (None, None) => default,
        };
        self.effective.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr + ToString,
    {
        let v = match (flag, self.file.get(key)) {
            (Some(v), _) => Some(v),
            (None, Some(s)) => {
                Some(s.parse().map_err(|_| CliError::Usage(format!("config key {key}: cannot parse '{s}'")))?)
            }
            (None, None) => None,
        };
        if let Some(v) = &v {
            self.effective.insert(key.to_string(), v.to_string());
        }
        Ok(v)
    }

    /// Comma-separated list of numbers; `inf`/`+inf` allowed.
    pub fn list(&mut self, key: &str, flag: Option<String>, default: &str) -> Result<Vec<f64>, CliError> {
        let s = self.value(key, flag, default.to_string())?;
        parse_list(&s).map_err(|e| CliError::Usage(format!("{key}: {e}")))
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad number '{t}'")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let file = ConfigFile::parse("# comment\nreplicas = 300\npacket-bits=64\n").unwrap();
        let mut r = Resolver::new(&file);
        assert_eq!(r.value("replicas", Some(500usize), 100).unwrap(), 500);
        assert_eq!(r.value("packet_bits", None, 128usize).unwrap(), 64);
        assert_eq!(r.value("seed", None, 7u64).unwrap(), 7);
        assert_eq!(r.effective["packet_bits"], "64");
    }

    #[test]
    fn bad_lines_and_values() {
        assert!(matches!(ConfigFile::parse("novalue\n"), Err(CliError::Input(_))));
        let file = ConfigFile::parse("replicas=lots\n").unwrap();
        assert!(matches!(Resolver::new(&file).value("replicas", None, 1usize), Err(CliError::Usage(_))));
        assert_eq!(parse_list("0, 1,inf").unwrap(), vec![0.0, 1.0, f64::INFINITY]);
        assert!(parse_list("0,x").is_err());
    }
}
