//! Line-oriented experiment configuration.
//!
//! ```text
//! # comment
//! [section]
//! key = value   # trailing comment
//! ```
//!
//! Keys before the first section header belong to the section `""`.
//! Duplicate keys and unknown keys are errors carrying the line number.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path as FsPath, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)>,
    hash: String,
    base_dir: Option<PathBuf>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)> = BTreeMap::new();
        let mut current = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::parse(line_no, "section header lacks a closing ']'"))?
                    .trim();
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(Error::parse(line_no, format!("invalid section name {name:?}")));
                }
                if sections.contains_key(name) {
                    return Err(Error::parse(line_no, format!("section [{name}] appears twice")));
                }
                sections.insert(name.to_string(), (line_no, BTreeMap::new()));
                current = name.to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(line_no, format!("expected `key = value`, got {line:?}")))?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::parse(line_no, format!("invalid key {key:?}")));
            }
            let section = sections.entry(current.clone()).or_insert((line_no, BTreeMap::new()));
            if section.1.contains_key(key) {
                return Err(Error::parse(line_no, format!("key {key:?} repeated in [{current}]")));
            }
            section.1.insert(key.to_string(), Entry { value: value.trim().to_string(), line: line_no });
        }
        let hash = hex::encode(Sha256::digest(text.as_bytes()))[..16].to_string();
        Ok(Config { sections, hash, base_dir: None })
    }

    /// Parses a file; relative paths inside resolve against its directory.
    pub fn from_file(path: &FsPath) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        let mut config = Self::parse(&text)?;
        config.base_dir = path.parent().map(FsPath::to_path_buf);
        Ok(config)
    }

    /// Short SHA-256 digest of the configuration text.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn get_str(&self, section: &str, key: &str) -> Option<&str> {
        self.entry(section, key).map(|e| e.value.as_str())
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|(_, s)| s.get(key))
    }

    pub fn get<T>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|err| Error::parse(e.line, format!("[{section}] {key} = {:?}: {err}", e.value))),
        }
    }

    pub fn get_or<T>(&self, section: &str, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    /// Comma-separated list; `Some(vec![])` for an empty value.
    pub fn get_list(&self, section: &str, key: &str) -> Option<Vec<String>> {
        self.get_str(section, key).map(|v| {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect()
        })
    }

    pub fn get_parsed_list<T>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some(items) = self.get_list(section, key) else {
            return Ok(None);
        };
        let line = self.entry(section, key).map(|e| e.line).unwrap_or(0);
        items
            .iter()
            .map(|s| s.parse::<T>().map_err(|err| Error::parse(line, format!("[{section}] {key}: {s:?}: {err}"))))
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// Line of a key, for error messages raised after parsing.
    pub fn line_of(&self, section: &str, key: &str) -> usize {
        self.entry(section, key).map(|e| e.line).unwrap_or(0)
    }

    /// Rejects sections and keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[(&str, &[&str])]) -> Result<()> {
        for (name, (line, entries)) in &self.sections {
            let Some((_, keys)) = allowed.iter().find(|(s, _)| s == name) else {
                return Err(Error::parse(*line, format!("unknown section [{name}]")));
            };
            for (key, entry) in entries {
                if !keys.contains(&key.as_str()) {
                    return Err(Error::parse(entry.line, format!("unknown key {key:?} in [{name}]")));
                }
            }
        }
        Ok(())
    }

    pub fn resolve_path(&self, p: &str) -> PathBuf {
        let path = PathBuf::from(p);
        match &self.base_dir {
            Some(base) if path.is_relative() => base.join(path),
            _ => path,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "seed = 3\n[grid]\nhorizon = 1.0 # T\nsteps = 64\n\n[verify]\nsuites = chen, sewing\nempty =\n";

    #[test]
    fn parses_sections_and_types() {
        let c = Config::parse(SAMPLE).unwrap();
        assert_eq!(c.get::<u64>("", "seed").unwrap(), Some(3));
        assert_eq!(c.get::<f64>("grid", "horizon").unwrap(), Some(1.0));
        assert_eq!(c.get_or::<usize>("grid", "missing", 7).unwrap(), 7);
        assert_eq!(c.get_list("verify", "suites").unwrap(), vec!["chen", "sewing"]);
        assert_eq!(c.get_list("verify", "empty").unwrap(), Vec::<String>::new());
        assert_eq!(c.hash().len(), 16);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = |text: &str| match Config::parse(text) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        };
        assert_eq!(err("[grid]\nsteps 64\n"), 2);
        assert_eq!(err("[grid\n"), 1);
        assert_eq!(err("[a]\nx=1\nx=2\n"), 3);
        let c = Config::parse("[grid]\nsteps = many\n").unwrap();
        assert!(matches!(c.get::<usize>("grid", "steps"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(
            c.check_keys(&[("grid", &["horizon"])]),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn hash_tracks_content() {
        let a = Config::parse("[grid]\nsteps = 64\n").unwrap();
        let b = Config::parse("[grid]\nsteps = 65\n").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), Config::parse("[grid]\nsteps = 64\n").unwrap().hash());
    }
}
