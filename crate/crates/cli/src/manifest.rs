//! Plain-text manifests: one record per image, whitespace-separated
//! `key=value` fields. `# key=value` lines before the first record form the
//! header; other `#` lines are comments. Relative paths resolve against the
//! manifest's directory, so paths may not contain spaces.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use uos_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Record {
    pub fields: BTreeMap<String, String>,
}

impl Record {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.fields.insert(key.to_string(), value.into());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: BTreeMap<String, String>,
    pub records: Vec<Record>,
    /// Directory that relative paths resolve against.
    pub base: PathBuf,
}

impl Manifest {
    pub fn new(base: impl Into<PathBuf>) -> Self {
        Manifest {
            header: BTreeMap::new(),
            records: Vec::new(),
            base: base.into(),
        }
    }

    pub fn parse(text: &str, base: impl Into<PathBuf>) -> Result<Self> {
        let mut m = Manifest::new(base);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if m.records.is_empty() {
                    if let Some((k, v)) = comment.trim().split_once('=') {
                        m.header.insert(k.trim().to_string(), v.trim().to_string());
                    }
                }
                continue;
            }
            let mut rec = Record::default();
            for token in line.split_whitespace() {
                let (k, v) = token.split_once('=').ok_or_else(|| {
                    Error::Format(format!(
                        "manifest line {}: field `{token}` is not key=value",
                        i + 1
                    ))
                })?;
                if rec.fields.insert(k.to_string(), v.to_string()).is_some() {
                    return Err(Error::Format(format!(
                        "manifest line {}: field `{k}` repeated",
                        i + 1
                    )));
                }
            }
            m.records.push(rec);
        }
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read manifest {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Manifest::parse(&text, base)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.header {
            let _ = writeln!(out, "# {k}={v}");
        }
        for r in &self.records {
            let line: Vec<String> = r.fields.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
    }

    /// Path in field `key` of `record`, resolved against the manifest.
    pub fn path(&self, record: usize, key: &str) -> Result<Option<PathBuf>> {
        Ok(self.records[record].get(key).map(|p| {
            let p = Path::new(p);
            if p.is_relative() {
                self.base.join(p)
            } else {
                p.to_path_buf()
            }
        }))
    }

    pub fn require_path(&self, record: usize, key: &str) -> Result<PathBuf> {
        self.path(record, key)?.ok_or_else(|| {
            Error::Config(format!(
                "manifest record {} lacks field `{key}`",
                record + 1
            ))
        })
    }
}
