//! INI-style experiment configuration: `[section]` headers and
//! `key = value` lines, `#` or `;` comments. Errors carry line numbers.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Prefix of config lines echoed into output headers.
pub const ECHO_PREFIX: &str = "# config: ";

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Config {
    sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)>,
    used: RefCell<BTreeSet<(String, String)>>,
}

impl PartialEq for Config {
    fn eq(&self, other: &Self) -> bool {
        self.render() == other.render()
    }
}

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.trim();
            if body.is_empty() || body.starts_with('#') || body.starts_with(';') {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let name =
                    rest.strip_suffix(']').ok_or_else(|| config_err(line, "unterminated section header"))?.trim();
                if name.is_empty() {
                    return Err(config_err(line, "empty section name"));
                }
                if cfg.sections.contains_key(name) {
                    return Err(config_err(line, format!("duplicate section [{name}]")));
                }
                cfg.sections.insert(name.to_string(), (line, BTreeMap::new()));
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| config_err(line, format!("expected `key = value`, got `{body}`")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(config_err(line, "empty key"));
            }
            let section = current.as_ref().ok_or_else(|| config_err(line, "key outside any section"))?;
            let entries = &mut cfg.sections.get_mut(section).expect("section exists").1;
            if entries.contains_key(key) {
                return Err(config_err(line, format!("duplicate key `{key}` in [{section}]")));
            }
            entries.insert(key.to_string(), Entry { value: value.trim().to_string(), line });
        }
        Ok(cfg)
    }

    /// Parses a config file or the echoed header of an output file.
    pub fn parse_any(text: &str) -> Result<Self> {
        if text.lines().any(|l| l.starts_with(ECHO_PREFIX)) {
            Self::parse(&Self::strip_echo(text))
        } else {
            Self::parse(text)
        }
    }

    /// Recovers config text from an echoed output header.
    pub fn strip_echo(text: &str) -> String {
        let mut out = String::new();
        for l in text.lines() {
            if let Some(rest) = l.strip_prefix(ECHO_PREFIX) {
                out.push_str(rest);
                out.push('\n');
            }
        }
        out
    }

    /// Canonical text: sections and keys sorted.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (name, (_, entries)) in &self.sections {
            out.push_str(&format!("[{name}]\n"));
            for (k, e) in entries {
                out.push_str(&format!("{k} = {}\n", e.value));
            }
        }
        out
    }

    /// The canonical text with every line prefixed for an output header.
    pub fn echo(&self) -> String {
        self.render().lines().map(|l| format!("{ECHO_PREFIX}{l}\n")).collect()
    }

    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        let entry = self.sections.entry(section.to_string()).or_insert((0, BTreeMap::new()));
        let line = entry.1.get(key).map(|e| e.line).unwrap_or(0);
        entry.1.insert(key.to_string(), Entry { value: value.into(), line });
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        let e = self.sections.get(section)?.1.get(key)?;
        self.used.borrow_mut().insert((section.to_string(), key.to_string()));
        Some(e)
    }

    fn section_line(&self, section: &str) -> usize {
        self.sections.get(section).map(|s| s.0).unwrap_or(0)
    }

    pub fn get_str(&self, section: &str, key: &str) -> Option<&str> {
        self.entry(section, key).map(|e| e.value.as_str())
    }

    pub fn require_str(&self, section: &str, key: &str) -> Result<&str> {
        self.get_str(section, key)
            .ok_or_else(|| config_err(self.section_line(section), format!("missing `{key}` in [{section}]")))
    }

    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|err| config_err(e.line, format!("bad value for `{key}`: {err}"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, section: &str, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(section, key)?
            .ok_or_else(|| config_err(self.section_line(section), format!("missing `{key}` in [{section}]")))
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split(',')
                .map(|s| s.trim())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<T>().map_err(|err| config_err(e.line, format!("bad item `{s}` in `{key}`: {err}"))))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    /// Fails on the first key that no getter asked for.
    pub fn check_unused(&self) -> Result<()> {
        let used = self.used.borrow();
        for (name, (_, entries)) in &self.sections {
            for (k, e) in entries {
                if !used.contains(&(name.clone(), k.clone())) {
                    return Err(config_err(e.line, format!("unknown key `{k}` in [{name}]")));
                }
            }
        }
        Ok(())
    }

    /// Line number of a key, when it came from parsed text.
    pub fn line_of(&self, section: &str, key: &str) -> usize {
        self.sections.get(section).and_then(|s| s.1.get(key)).map(|e| e.line).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "# demo\n[experiment]\nkind = converge\nseed = 7\n\n[grid]\nn = 16, 32,64\n";

    #[test]
    fn parses_values_and_lists() {
        let c = Config::parse(TEXT).unwrap();
        assert_eq!(c.require_str("experiment", "kind").unwrap(), "converge");
        assert_eq!(c.require::<u64>("experiment", "seed").unwrap(), 7);
        assert_eq!(c.get_list::<usize>("grid", "n").unwrap().unwrap(), vec![16, 32, 64]);
        assert_eq!(c.get_or("grid", "k", 32usize).unwrap(), 32);
        c.check_unused().unwrap();
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = Config::parse("[a]\nx = 1\ny\n").unwrap_err();
        assert!(matches!(bad, Error::Config { line: 3, .. }));
        let c = Config::parse("[a]\nx = one\n").unwrap();
        assert!(matches!(c.require::<f64>("a", "x"), Err(Error::Config { line: 2, .. })));
        let c = Config::parse("[a]\nx = 1\n\n[b]\nz = 2\n").unwrap();
        assert!(matches!(c.require::<f64>("b", "w"), Err(Error::Config { line: 4, .. })));
        c.get_str("a", "x");
        assert!(matches!(c.check_unused(), Err(Error::Config { line: 5, .. })));
        assert!(matches!(Config::parse("x = 1\n"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(Config::parse("[a]\nx=1\nx=2\n"), Err(Error::Config { line: 3, .. })));
    }

    #[test]
    fn echo_round_trips() {
        let mut c = Config::parse(TEXT).unwrap();
        c.set("experiment", "seed", "9");
        let header = format!("# mcqmc 0.1.0\n{}n,value\n1,2\n", c.echo());
        let back = Config::parse_any(&header).unwrap();
        assert_eq!(back.render(), c.render());
        assert_eq!(back.require::<u64>("experiment", "seed").unwrap(), 9);
    }
}
