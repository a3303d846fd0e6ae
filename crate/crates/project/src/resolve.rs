//! Transitive dependency resolution and build ordering.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use vl_core::driver::{CompileUnit, InputFile};
use vl_core::emitter::UnitOutput;

use crate::error::ProjectError;
use crate::fetch::{Cache, Fetcher};
use crate::lockfile::{LockEntry, Lockfile};
use crate::manifest::{Manifest, MANIFEST_FILE};

#[derive(Debug, Clone)]
pub struct DependencySource {
    pub url: String,
    pub version: String,
    pub revision: String,
    /// Project name of the dependency; also its namespace.
    pub name: String,
    pub path: PathBuf,
    pub manifest: Manifest,
    /// Names of its direct dependencies.
    pub deps: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Resolved {
    /// Sorted by URL.
    pub sources: Vec<DependencySource>,
    pub lock: Lockfile,
}

impl Resolved {
    pub fn by_url(&self, url: &str) -> Option<&DependencySource> {
        self.sources.iter().find(|s| s.url == url)
    }
}

struct Resolver<'a> {
    lock: Option<&'a Lockfile>,
    offline: bool,
    cache: &'a Cache,
    fetcher: &'a dyn Fetcher,
    done: BTreeMap<String, DependencySource>,
    names: BTreeMap<String, String>,
    stack: Vec<String>,
}

impl Resolver<'_> {
    fn revision(&self, url: &str, version: &str) -> Result<String, ProjectError> {
        if let Some(e) = self.lock.and_then(|l| l.get(url)).filter(|e| e.version == version) {
            return Ok(e.revision.clone());
        }
        if self.offline {
            return self.cache.cached_tag(url, version).ok_or_else(|| ProjectError::NotCached { url: url.into(), version: version.into() });
        }
        let rev = self.fetcher.resolve_tag(url, version)?;
        self.cache.record_tag(url, version, &rev)?;
        Ok(rev)
    }

    fn visit(&mut self, url: &str, version: &str) -> Result<String, ProjectError> {
        if let Some(d) = self.done.get(url) {
            if d.version != version {
                return Err(ProjectError::Conflict {
                    message: format!("`{url}` is required at both {} and {version}", d.version),
                });
            }
            return Ok(d.name.clone());
        }
        let revision = self.revision(url, version)?;
        let path = if self.cache.contains(url, &revision) {
            self.cache.entry_dir(url, &revision)
        } else if self.offline {
            return Err(ProjectError::NotCached { url: url.into(), version: version.into() });
        } else {
            self.cache.populate(url, &revision, self.fetcher)?
        };
        let manifest = Manifest::load(&path.join(MANIFEST_FILE))?;
        let name = manifest.name.clone();
        if self.stack.contains(&name) {
            let mut chain = self.stack.clone();
            chain.push(name);
            return Err(ProjectError::Cycle { chain });
        }
        if let Some(other) = self.names.get(&name) {
            return Err(ProjectError::Conflict {
                message: format!("`{other}` and `{url}` both declare project name `{name}`"),
            });
        }
        self.stack.push(name.clone());
        let mut deps = Vec::new();
        for (u, v) in &manifest.dependencies {
            deps.push(self.visit(u, v)?);
        }
        self.stack.pop();
        if let Some(other) = self.names.get(&name) {
            return Err(ProjectError::Conflict {
                message: format!("`{other}` and `{url}` both declare project name `{name}`"),
            });
        }
        self.names.insert(name.clone(), url.to_string());
        let source = DependencySource { url: url.into(), version: version.into(), revision, name: name.clone(), path, manifest, deps };
        self.done.insert(url.to_string(), source);
        Ok(name)
    }
}

/// Resolves every transitive dependency of `manifest`. Locked revisions are
/// reused when the locked version still matches; otherwise the version tag
/// is resolved through `fetcher`. Offline, everything must already be cached.
pub fn resolve_dependencies(
    manifest: &Manifest,
    lock: Option<&Lockfile>,
    offline: bool,
    cache: &Cache,
    fetcher: &dyn Fetcher,
) -> Result<Resolved, ProjectError> {
    let mut r = Resolver {
        lock,
        offline,
        cache,
        fetcher,
        done: BTreeMap::new(),
        names: BTreeMap::new(),
        stack: vec![manifest.name.clone()],
    };
    for (url, version) in &manifest.dependencies {
        r.visit(url, version)?;
    }
    let sources: Vec<DependencySource> = r.done.into_values().collect();
    let lock = Lockfile::new(
        sources
            .iter()
            .map(|s| LockEntry { url: s.url.clone(), version: s.version.clone(), revision: s.revision.clone(), name: s.name.clone() })
            .collect(),
    );
    Ok(Resolved { sources, lock })
}

/// One project in build order.
#[derive(Debug, Clone)]
pub struct PlanUnit {
    pub name: String,
    /// Project root holding `vl.toml` and `src/`.
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub deps: Vec<String>,
    pub is_root: bool,
}

/// Dependencies first, ties broken by name; the root project comes last.
pub fn build_plan(root: &Manifest, root_dir: &Path, resolved: &Resolved) -> Result<Vec<PlanUnit>, ProjectError> {
    let mut units: BTreeMap<String, PlanUnit> = BTreeMap::new();
    for s in &resolved.sources {
        units.insert(
            s.name.clone(),
            PlanUnit { name: s.name.clone(), dir: s.path.clone(), manifest: s.manifest.clone(), deps: s.deps.clone(), is_root: false },
        );
    }
    let mut root_deps = Vec::new();
    for url in root.dependencies.keys() {
        let s = resolved.by_url(url).ok_or_else(|| ProjectError::Fetch { url: url.clone(), message: "dependency was not resolved".into() })?;
        root_deps.push(s.name.clone());
    }

    let mut pending: BTreeMap<&str, BTreeSet<&str>> =
        units.values().map(|u| (u.name.as_str(), u.deps.iter().map(String::as_str).collect())).collect();
    let mut order = Vec::new();
    while !pending.is_empty() {
        let Some(next) = pending.iter().find(|(_, deps)| deps.is_empty()).map(|(n, _)| *n) else {
            return Err(ProjectError::Cycle { chain: pending.keys().map(|s| s.to_string()).collect() });
        };
        pending.remove(next);
        for deps in pending.values_mut() {
            deps.remove(next);
        }
        order.push(next.to_string());
    }
    let mut plan: Vec<PlanUnit> = order.iter().map(|n| units[n].clone()).collect();
    plan.push(PlanUnit { name: root.name.clone(), dir: root_dir.to_path_buf(), manifest: root.clone(), deps: root_deps, is_root: true });
    Ok(plan)
}

/// All `.vl` files under `src_dir`, as (path relative to `src_dir` with `/`
/// separators, full path), sorted by relative path. A missing directory
/// yields nothing.
pub fn discover_sources(src_dir: &Path) -> Result<Vec<(String, PathBuf)>, ProjectError> {
    if !src_dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut found = Vec::new();
    for entry in walkdir::WalkDir::new(src_dir).follow_links(true) {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(src_dir).to_path_buf();
            ProjectError::io(path, e.into())
        })?;
        if !entry.file_type().is_file() || entry.path().extension().is_none_or(|x| x != "vl") {
            continue;
        }
        let rel = entry.path().strip_prefix(src_dir).unwrap_or(entry.path());
        let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        found.push((rel, entry.path().to_path_buf()));
    }
    found.sort();
    Ok(found)
}

impl PlanUnit {
    pub fn src_dir(&self) -> PathBuf {
        self.dir.join("src")
    }

    /// Output prefix inside the target directory.
    pub fn out_prefix(&self) -> PathBuf {
        if self.is_root {
            PathBuf::new()
        } else {
            Path::new("dependencies").join(&self.name)
        }
    }

    /// Reads the unit's sources into a compile unit.
    pub fn compile_unit(&self) -> Result<CompileUnit, ProjectError> {
        let mut files = Vec::new();
        for (rel, path) in discover_sources(&self.src_dir())? {
            let text = std::fs::read_to_string(&path).map_err(|e| ProjectError::io(&path, e))?;
            files.push(InputFile { rel_path: rel, display: path.display().to_string(), text });
        }
        Ok(CompileUnit {
            name: self.name.clone(),
            deps: self.deps.clone(),
            files,
            output: UnitOutput { cfg: self.manifest.emit_config(), prefix: self.out_prefix() },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(name: &str, deps: &[(&str, &str)]) -> Manifest {
        let mut text = format!("[project]\nname = \"{name}\"\nversion = \"0.1.0\"\n[dependencies]\n");
        for (u, v) in deps {
            text.push_str(&format!("\"{u}\" = \"{v}\"\n"));
        }
        Manifest::parse(&text, Path::new("vl.toml")).unwrap()
    }

    #[test]
    fn discover_sorted_recursive() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src");
        std::fs::create_dir_all(src.join("sub")).unwrap();
        for f in ["b.vl", "a.vl", "sub/c.vl", "notes.txt"] {
            std::fs::write(src.join(f), "").unwrap();
        }
        let rels: Vec<String> = discover_sources(&src).unwrap().into_iter().map(|(r, _)| r).collect();
        assert_eq!(rels, ["a.vl", "b.vl", "sub/c.vl"]);
        assert!(discover_sources(&dir.path().join("nope")).unwrap().is_empty());
    }

    #[test]
    fn plan_orders_dependencies_first() {
        let src = |name: &str, deps: &[&str]| DependencySource {
            url: format!("file:///{name}"),
            version: "0.1.0".into(),
            revision: "r".into(),
            name: name.into(),
            path: PathBuf::from(name),
            manifest: manifest(name, &[]),
            deps: deps.iter().map(|s| s.to_string()).collect(),
        };
        let resolved = Resolved {
            sources: vec![src("c", &[]), src("a", &["c"]), src("b", &[])],
            lock: Lockfile::default(),
        };
        let root = manifest("top", &[("file:///a", "0.1.0"), ("file:///b", "0.1.0")]);
        let plan = build_plan(&root, Path::new(""), &resolved).unwrap();
        let names: Vec<_> = plan.iter().map(|u| u.name.as_str()).collect();
        assert_eq!(names, ["b", "c", "a", "top"]);
        assert_eq!(plan[3].deps, ["a", "b"]);
        assert!(plan[3].is_root);
        assert_eq!(plan[2].out_prefix(), PathBuf::from("dependencies/a"));
        assert_eq!(plan[3].out_prefix(), PathBuf::new());
    }

    #[test]
    fn empty_dependencies() {
        struct Never;
        impl Fetcher for Never {
            fn resolve_tag(&self, _: &str, _: &str) -> Result<String, ProjectError> {
                unreachable!()
            }
            fn fetch(&self, _: &str, _: &str, _: &Path) -> Result<(), ProjectError> {
                unreachable!()
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let r = resolve_dependencies(&manifest("top", &[]), None, false, &Cache::new(dir.path()), &Never).unwrap();
        assert!(r.sources.is_empty());
        assert_eq!(r.lock.to_string(), "");
    }
}
