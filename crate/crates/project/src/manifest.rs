//! `vl.toml` loading.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use vl_core::emitter::{ClockType, EmitConfig, ResetType};

use crate::error::{ProjectError, Warning};

pub const MANIFEST_FILE: &str = "vl.toml";
pub const DEFAULT_TARGET_DIR: &str = "target";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildSettings {
    pub clock_type: ClockType,
    pub reset_type: ResetType,
    pub target_dir: PathBuf,
    pub wavedrom_url: String,
}

impl Default for BuildSettings {
    fn default() -> Self {
        BuildSettings {
            clock_type: ClockType::Posedge,
            reset_type: ResetType::AsyncLow,
            target_dir: PathBuf::from(DEFAULT_TARGET_DIR),
            wavedrom_url: vl_core::docgen::DEFAULT_WAVEDROM_URL.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub name: String,
    pub version: String,
    pub build: BuildSettings,
    /// Git URL to exact version.
    pub dependencies: BTreeMap<String, String>,
    pub warnings: Vec<Warning>,
}

impl Manifest {
    pub fn emit_config(&self) -> EmitConfig {
        EmitConfig { clock_type: self.build.clock_type, reset_type: self.build.reset_type }
    }

    pub fn load(path: &Path) -> Result<Manifest, ProjectError> {
        let text = std::fs::read_to_string(path).map_err(|e| ProjectError::io(path, e))?;
        Manifest::parse(&text, path)
    }

    /// `path` is only used in messages.
    pub fn parse(text: &str, path: &Path) -> Result<Manifest, ProjectError> {
        let bad = |message: String| ProjectError::Manifest { path: path.to_path_buf(), message };
        let doc: toml::Table = toml::from_str(text).map_err(|e| bad(e.to_string().trim_end().to_string()))?;
        let mut warnings = Vec::new();
        let mut name = None;
        let mut version = None;
        let mut build = BuildSettings::default();
        let mut dependencies = BTreeMap::new();
        let mut saw_project = false;

        for (section, value) in &doc {
            let table = match (section.as_str(), value.as_table()) {
                ("project" | "build" | "dependencies", Some(t)) => t,
                ("project" | "build" | "dependencies", None) => return Err(bad(format!("`{section}` must be a table"))),
                _ => {
                    warnings.push(unknown(section));
                    continue;
                }
            };
            for (key, v) in table {
                let qualified = format!("{section}.{key}");
                let s = || v.as_str().ok_or_else(|| bad(format!("`{qualified}` must be a string")));
                match (section.as_str(), key.as_str()) {
                    ("project", "name") => name = Some(s()?.to_string()),
                    ("project", "version") => version = Some(s()?.to_string()),
                    ("build", "clock_type") => {
                        build.clock_type = parse_enum(s()?, &qualified, path, ClockType::ALL.iter().map(|c| c.as_str()))?
                    }
                    ("build", "reset_type") => {
                        build.reset_type = parse_enum(s()?, &qualified, path, ResetType::ALL.iter().map(|r| r.as_str()))?
                    }
                    ("build", "target_dir") => {
                        let dir = PathBuf::from(s()?);
                        if dir.is_absolute() || dir.as_os_str().is_empty() {
                            return Err(bad(format!("`{qualified}` must be a relative path")));
                        }
                        build.target_dir = dir;
                    }
                    ("build", "wavedrom_url") => build.wavedrom_url = s()?.to_string(),
                    ("dependencies", url) => {
                        let req = s()?;
                        if !is_version(req) {
                            return Err(bad(format!("dependency `{url}` version `{req}` is not an exact X.Y.Z version")));
                        }
                        dependencies.insert(url.to_string(), req.to_string());
                    }
                    _ => warnings.push(unknown(&qualified)),
                }
            }
            saw_project |= section == "project";
        }

        if !saw_project {
            return Err(bad("missing [project] table".into()));
        }
        let name = name.ok_or_else(|| bad("missing `project.name`".into()))?;
        if !is_identifier(&name) {
            return Err(bad(format!("project name `{name}` is not an identifier")));
        }
        let version = version.ok_or_else(|| bad("missing `project.version`".into()))?;
        if !is_version(&version) {
            return Err(bad(format!("project version `{version}` is not an X.Y.Z version")));
        }
        Ok(Manifest { name, version, build, dependencies, warnings })
    }
}

fn unknown(key: &str) -> Warning {
    Warning { code: "W0401", message: format!("unknown manifest key `{key}`") }
}

fn parse_enum<T: FromStr>(value: &str, key: &str, path: &Path, allowed: impl Iterator<Item = &'static str>) -> Result<T, ProjectError> {
    value.parse().map_err(|_| ProjectError::InvalidEnum {
        path: path.to_path_buf(),
        key: key.to_string(),
        value: value.to_string(),
        allowed: allowed.map(|a| format!("`{a}`")).collect::<Vec<_>>().join(", "),
    })
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_') && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// `X.Y.Z`, each part a decimal number.
pub fn is_version(s: &str) -> bool {
    let parts: Vec<&str> = s.split('.').collect();
    parts.len() == 3 && parts.iter().all(|p| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit()))
}

/// Manifest written by `vl new`.
pub fn scaffold_manifest(name: &str) -> String {
    let d = BuildSettings::default();
    format!(
        "[project]\nname = \"{name}\"\nversion = \"0.1.0\"\n\n[build]\nclock_type = \"{}\"\nreset_type = \"{}\"\ntarget_dir = \"{}\"\n\n[dependencies]\n",
        d.clock_type,
        d.reset_type,
        d.target_dir.display()
    )
}
