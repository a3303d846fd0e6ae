//! `vl.lock`: one `url<TAB>version<TAB>revision<TAB>name` line per dependency.

use std::fmt;
use std::path::Path;

use crate::error::ProjectError;

pub const LOCK_FILE: &str = "vl.lock";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LockEntry {
    pub url: String,
    pub version: String,
    pub revision: String,
    pub name: String,
}

/// Entries are kept sorted by URL, one per URL.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lockfile {
    entries: Vec<LockEntry>,
}

impl Lockfile {
    pub fn new(mut entries: Vec<LockEntry>) -> Lockfile {
        entries.sort();
        entries.dedup_by(|a, b| a.url == b.url);
        Lockfile { entries }
    }

    pub fn entries(&self) -> &[LockEntry] {
        &self.entries
    }

    pub fn get(&self, url: &str) -> Option<&LockEntry> {
        self.entries.binary_search_by(|e| e.url.as_str().cmp(url)).ok().map(|i| &self.entries[i])
    }

    pub fn parse(text: &str, path: &Path) -> Result<Lockfile, ProjectError> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [url, version, revision, name] = fields[..] else {
                return Err(ProjectError::Lockfile {
                    path: path.to_path_buf(),
                    message: format!("line {}: expected 4 tab-separated fields, found {}", n + 1, fields.len()),
                });
            };
            entries.push(LockEntry { url: url.into(), version: version.into(), revision: revision.into(), name: name.into() });
        }
        let lock = Lockfile::new(entries);
        Ok(lock)
    }

    /// `Ok(None)` if the file does not exist.
    pub fn load(path: &Path) -> Result<Option<Lockfile>, ProjectError> {
        match std::fs::read_to_string(path) {
            Ok(text) => Lockfile::parse(&text, path).map(Some),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(ProjectError::io(path, e)),
        }
    }

    /// Writes only when the contents differ. Returns whether it wrote.
    pub fn store(&self, path: &Path) -> Result<bool, ProjectError> {
        let text = self.to_string();
        if std::fs::read_to_string(path).is_ok_and(|old| old == text) {
            return Ok(false);
        }
        std::fs::write(path, text).map_err(|e| ProjectError::io(path, e))?;
        Ok(true)
    }
}

impl fmt::Display for Lockfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(f, "{}\t{}\t{}\t{}", e.url, e.version, e.revision, e.name)?;
        }
        Ok(())
    }
}
