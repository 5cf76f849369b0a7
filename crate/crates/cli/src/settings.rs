//! Per-subcommand settings merged from defaults, a `key = value` config file
//! and command-line flags (highest precedence).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::parser::ValueSource;
use clap::{Arg, ArgAction, ArgMatches};
use uos_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Value,
    /// Filesystem path; relative paths in a config file resolve against the
    /// file's directory.
    Path,
    /// Boolean flag; in a config file written as `key = true|false`.
    Switch,
}

#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub help: &'static str,
    pub default: Option<&'static str>,
    pub kind: Kind,
}

pub const fn value(name: &'static str, default: Option<&'static str>, help: &'static str) -> Key {
    Key {
        name,
        help,
        default,
        kind: Kind::Value,
    }
}

pub const fn path(name: &'static str, help: &'static str) -> Key {
    Key {
        name,
        help,
        default: None,
        kind: Kind::Path,
    }
}

pub const fn switch(name: &'static str, help: &'static str) -> Key {
    Key {
        name,
        help,
        default: None,
        kind: Kind::Switch,
    }
}

pub fn args(keys: &[Key]) -> Vec<Arg> {
    let mut out: Vec<Arg> = keys
        .iter()
        .map(|k| {
            let arg = Arg::new(k.name).long(k.name).help(k.help);
            match k.kind {
                Kind::Switch => arg.action(ArgAction::SetTrue),
                Kind::Path => arg.value_name("PATH"),
                Kind::Value => match k.default {
                    Some(d) => arg.value_name("VALUE").default_value(d),
                    None => arg.value_name("VALUE"),
                },
            }
        })
        .collect();
    out.push(
        Arg::new("config")
            .long("config")
            .value_name("PATH")
            .help("Plain-text `key = value` file; flags override its entries"),
    );
    out
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

/// Parses config text into `(key, value, line)` entries.
pub fn parse_config(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        out.push((normalize(k), v.trim().to_string(), i + 1));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn resolve(keys: &[Key], matches: &ArgMatches) -> Result<Settings> {
        let mut values = BTreeMap::new();
        for k in keys {
            if let Some(d) = k.default {
                values.insert(k.name.to_string(), d.to_string());
            }
        }
        if let Some(cfg) = matches.get_one::<String>("config") {
            let cfg = Path::new(cfg);
            let text = fs::read_to_string(cfg)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", cfg.display())))?;
            let base = cfg.parent().unwrap_or(Path::new(""));
            let mut seen = BTreeMap::new();
            for (name, v, line) in parse_config(&text)? {
                let key = keys.iter().find(|k| k.name == name).ok_or_else(|| {
                    Error::Config(format!("{}:{line}: unknown key `{name}`", cfg.display()))
                })?;
                if let Some(first) = seen.insert(name.clone(), line) {
                    return Err(Error::Config(format!(
                        "{}:{line}: key `{name}` already set on line {first}",
                        cfg.display()
                    )));
                }
                let v = match key.kind {
                    Kind::Path if Path::new(&v).is_relative() => {
                        base.join(&v).to_string_lossy().into_owned()
                    }
                    _ => v,
                };
                values.insert(name, v);
            }
        }
        for k in keys {
            if matches.value_source(k.name) != Some(ValueSource::CommandLine) {
                continue;
            }
            let v = match k.kind {
                Kind::Switch => "true".to_string(),
                _ => matches
                    .get_one::<String>(k.name)
                    .cloned()
                    .unwrap_or_default(),
            };
            values.insert(k.name.to_string(), v);
        }
        Ok(Settings { values })
    }

    #[cfg(test)]
    pub fn from_pairs(pairs: &[(&str, &str)]) -> Settings {
        Settings {
            values: pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn required(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing required setting `{key}`")))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.required(key)?;
        raw.parse()
            .map_err(|_| Error::Config(format!("invalid value `{raw}` for `{key}`")))
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(_) => self.parse(key).map(Some),
        }
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            None => Ok(false),
            Some("true" | "1" | "yes" | "on") => Ok(true),
            Some("false" | "0" | "no" | "off") => Ok(false),
            Some(other) => Err(Error::Config(format!(
                "invalid boolean `{other}` for `{key}`"
            ))),
        }
    }

    pub fn path(&self, key: &str) -> Result<PathBuf> {
        self.required(key).map(PathBuf::from)
    }

    pub fn path_opt(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }

    /// Every resolved setting, for report headers.
    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Command;

    const KEYS: &[Key] = &[
        value("lambda", Some("3"), "weight"),
        path("out", "output"),
        switch("roi", "roi"),
    ];

    fn matches(argv: &[&str]) -> ArgMatches {
        Command::new("t")
            .args(args(KEYS))
            .try_get_matches_from(argv)
            .unwrap()
    }

    #[test]
    fn defaults_file_and_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(
            &cfg,
            "# comment\nlambda = 5 # trailing\nout = rel/out.txt\nroi = true\n",
        )
        .unwrap();
        let cfg = cfg.to_str().unwrap();

        let s = Settings::resolve(KEYS, &matches(&["t"])).unwrap();
        assert_eq!(s.get("lambda"), Some("3"));
        assert!(!s.flag("roi").unwrap());

        let s = Settings::resolve(KEYS, &matches(&["t", "--config", cfg])).unwrap();
        assert_eq!(s.parse::<f64>("lambda").unwrap(), 5.0);
        assert_eq!(s.path("out").unwrap(), dir.path().join("rel/out.txt"));
        assert!(s.flag("roi").unwrap());

        let s =
            Settings::resolve(KEYS, &matches(&["t", "--config", cfg, "--lambda", "7"])).unwrap();
        assert_eq!(s.get("lambda"), Some("7"));
    }

    #[test]
    fn unknown_and_duplicate_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("bad.cfg");
        fs::write(&cfg, "lamda = 5\n").unwrap();
        let m = matches(&["t", "--config", cfg.to_str().unwrap()]);
        assert!(Settings::resolve(KEYS, &m).is_err());
        fs::write(&cfg, "lambda = 5\nlambda = 6\n").unwrap();
        assert!(Settings::resolve(KEYS, &m).is_err());
        fs::write(&cfg, "just words\n").unwrap();
        assert!(Settings::resolve(KEYS, &m).is_err());
    }

    #[test]
    fn underscores_accepted_in_files() {
        let parsed = parse_config("out_dir = x\n").unwrap();
        assert_eq!(parsed, vec![("out-dir".to_string(), "x".to_string(), 1)]);
    }

    #[test]
    fn typed_getters() {
        let s = Settings::from_pairs(&[("n", "12"), ("b", "maybe")]);
        assert_eq!(s.parse::<usize>("n").unwrap(), 12);
        assert!(s.parse::<usize>("b").is_err());
        assert!(s.flag("b").is_err());
        assert!(s.required("zzz").is_err());
        assert_eq!(s.parse_opt::<usize>("zzz").unwrap(), None);
    }
}
