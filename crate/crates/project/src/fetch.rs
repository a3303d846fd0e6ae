//! Dependency cache and git fetching.

use std::path::{Path, PathBuf};
use std::process::Command;

use sha2::{Digest, Sha256};

use crate::error::ProjectError;

pub const CACHE_ENV: &str = "VL_CACHE_DIR";

/// On-disk cache: `<root>/<sha256(url)>/<revision>/` holds a checkout,
/// `<root>/<sha256(url)>/tags/<version>` the revision a version resolved to.
#[derive(Debug, Clone)]
pub struct Cache {
    root: PathBuf,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Cache {
        Cache { root: root.into() }
    }

    /// `$VL_CACHE_DIR`, else `~/.cache/vl`.
    pub fn from_env() -> Cache {
        if let Some(dir) = std::env::var_os(CACHE_ENV).filter(|d| !d.is_empty()) {
            return Cache::new(dir);
        }
        let home = std::env::var_os("HOME").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
        Cache::new(home.join(".cache").join("vl"))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn url_dir(&self, url: &str) -> PathBuf {
        self.root.join(hex::encode(Sha256::digest(url.as_bytes())))
    }

    pub fn entry_dir(&self, url: &str, revision: &str) -> PathBuf {
        self.url_dir(url).join(revision)
    }

    pub fn contains(&self, url: &str, revision: &str) -> bool {
        self.entry_dir(url, revision).is_dir()
    }

    pub fn cached_tag(&self, url: &str, version: &str) -> Option<String> {
        let rev = std::fs::read_to_string(self.url_dir(url).join("tags").join(version)).ok()?;
        let rev = rev.trim();
        (!rev.is_empty()).then(|| rev.to_string())
    }

    pub fn record_tag(&self, url: &str, version: &str, revision: &str) -> Result<(), ProjectError> {
        let dir = self.url_dir(url).join("tags");
        std::fs::create_dir_all(&dir).map_err(|e| ProjectError::io(&dir, e))?;
        write_atomic(&dir.join(version), format!("{revision}\n").as_bytes())
    }

    /// Fetches into a sibling temp directory and renames it into place.
    /// An existing entry is left untouched.
    pub fn populate(&self, url: &str, revision: &str, fetcher: &dyn Fetcher) -> Result<PathBuf, ProjectError> {
        let dest = self.entry_dir(url, revision);
        if dest.is_dir() {
            return Ok(dest);
        }
        let parent = self.url_dir(url);
        std::fs::create_dir_all(&parent).map_err(|e| ProjectError::io(&parent, e))?;
        let tmp = parent.join(format!(".tmp-{revision}-{}", std::process::id()));
        if tmp.exists() {
            std::fs::remove_dir_all(&tmp).map_err(|e| ProjectError::io(&tmp, e))?;
        }
        if let Err(e) = fetcher.fetch(url, revision, &tmp) {
            let _ = std::fs::remove_dir_all(&tmp);
            return Err(e);
        }
        if let Err(e) = std::fs::rename(&tmp, &dest) {
            let _ = std::fs::remove_dir_all(&tmp);
            if !dest.is_dir() {
                return Err(ProjectError::io(&dest, e));
            }
        }
        Ok(dest)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ProjectError> {
    let tmp = path.with_extension(format!("tmp-{}", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(|e| ProjectError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| ProjectError::io(path, e))
}

pub trait Fetcher {
    /// Commit id for `version` of the repository at `url`.
    fn resolve_tag(&self, url: &str, version: &str) -> Result<String, ProjectError>;
    /// Materializes `revision` of `url` as a plain source tree at `dest`,
    /// which does not exist yet.
    fn fetch(&self, url: &str, revision: &str, dest: &Path) -> Result<(), ProjectError>;
}

/// Shells out to the system `git`.
#[derive(Debug, Default, Clone, Copy)]
pub struct GitFetcher;

impl GitFetcher {
    fn git(&self, url: &str, args: &[&str]) -> Result<String, ProjectError> {
        let out = Command::new("git")
            .args(args)
            .env("GIT_TERMINAL_PROMPT", "0")
            .output()
            .map_err(|e| ProjectError::Fetch { url: url.into(), message: format!("cannot run git: {e}") })?;
        if !out.status.success() {
            let stderr = String::from_utf8_lossy(&out.stderr);
            return Err(ProjectError::Fetch { url: url.into(), message: format!("git {}: {}", args[0], stderr.trim()) });
        }
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    }
}

impl Fetcher for GitFetcher {
    fn resolve_tag(&self, url: &str, version: &str) -> Result<String, ProjectError> {
        let listing = self.git(url, &["ls-remote", "--tags", url])?;
        pick_tag(&listing, version)
            .ok_or_else(|| ProjectError::Fetch { url: url.into(), message: format!("no tag `v{version}` or `{version}`") })
    }

    fn fetch(&self, url: &str, revision: &str, dest: &Path) -> Result<(), ProjectError> {
        let d = dest.to_string_lossy();
        self.git(url, &["clone", "--quiet", "--no-checkout", url, &d])?;
        self.git(url, &["-C", &d, "checkout", "--quiet", "--detach", revision])?;
        let git_dir = dest.join(".git");
        std::fs::remove_dir_all(&git_dir).map_err(|e| ProjectError::io(&git_dir, e))
    }
}

/// Picks the commit for `version` from `git ls-remote --tags` output,
/// preferring `vX.Y.Z` over `X.Y.Z` and peeled over direct refs.
pub fn pick_tag(listing: &str, version: &str) -> Option<String> {
    let wanted = [
        format!("refs/tags/v{version}^{{}}"),
        format!("refs/tags/v{version}"),
        format!("refs/tags/{version}^{{}}"),
        format!("refs/tags/{version}"),
    ];
    let refs: Vec<(&str, &str)> = listing.lines().filter_map(|l| l.split_once('\t')).collect();
    wanted.iter().find_map(|w| refs.iter().find(|(_, r)| r == w).map(|(rev, _)| rev.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    #[test]
    fn tag_preference() {
        let listing = "aaa\trefs/tags/0.1.0\nbbb\trefs/tags/v0.1.0\nccc\trefs/tags/v0.1.0^{}\nddd\trefs/tags/v0.2.0\n";
        assert_eq!(pick_tag(listing, "0.1.0").as_deref(), Some("ccc"));
        assert_eq!(pick_tag("aaa\trefs/tags/0.1.0\n", "0.1.0").as_deref(), Some("aaa"));
        assert_eq!(pick_tag(listing, "0.3.0"), None);
        assert_eq!(pick_tag("aaa\trefs/tags/v0.1.00\n", "0.1.0"), None);
    }

    struct Touch(Cell<usize>);

    impl Fetcher for Touch {
        fn resolve_tag(&self, _: &str, _: &str) -> Result<String, ProjectError> {
            unreachable!()
        }
        fn fetch(&self, _: &str, _: &str, dest: &Path) -> Result<(), ProjectError> {
            self.0.set(self.0.get() + 1);
            std::fs::create_dir_all(dest).unwrap();
            std::fs::write(dest.join("f"), "x").unwrap();
            Ok(())
        }
    }

    #[test]
    fn populate_once() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path());
        let f = Touch(Cell::new(0));
        let a = cache.populate("file:///r", "r1", &f).unwrap();
        let b = cache.populate("file:///r", "r1", &f).unwrap();
        assert_eq!(a, b);
        assert_eq!(f.0.get(), 1);
        assert!(cache.contains("file:///r", "r1"));
        assert!(!cache.contains("file:///other", "r1"));
        assert_eq!(std::fs::read_dir(a.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn tag_index() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path());
        assert_eq!(cache.cached_tag("u", "0.1.0"), None);
        cache.record_tag("u", "0.1.0", "deadbeef").unwrap();
        assert_eq!(cache.cached_tag("u", "0.1.0").as_deref(), Some("deadbeef"));
    }
}
