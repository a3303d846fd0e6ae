#![allow(dead_code)]

pub mod sv;

use std::path::{Path, PathBuf};
use std::process::Command;

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Runs `vl` in `cwd` with `cache` as the dependency cache.
pub fn vl(cwd: &Path, cache: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_vl"))
        .args(args)
        .current_dir(cwd)
        .env("VL_CACHE_DIR", cache)
        .output()
        .expect("run vl");
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let dest = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &dest);
        } else {
            std::fs::copy(entry.path(), dest).unwrap();
        }
    }
}

/// Copies the fixture project `name` into `dir`.
pub fn project(name: &str, dir: &Path) -> PathBuf {
    let dest = dir.join(name);
    copy_dir(&fixtures().join("projects").join(name), &dest);
    dest
}

/// Single-file project holding `source` as `src/main.vl`.
pub fn single_file_project(dir: &Path, source: &str) -> PathBuf {
    std::fs::create_dir_all(dir.join("src")).unwrap();
    std::fs::write(dir.join("vl.toml"), "[project]\nname = \"fixture\"\nversion = \"0.1.0\"\n").unwrap();
    std::fs::write(dir.join("src/main.vl"), source).unwrap();
    dir.to_path_buf()
}

pub fn git(dir: &Path, args: &[&str]) {
    let out = Command::new("git")
        .args(["-c", "user.name=fixture", "-c", "user.email=fixture@example.com", "-c", "init.defaultBranch=main", "-c", "commit.gpgsign=false"])
        .args(args)
        .current_dir(dir)
        .output()
        .expect("run git");
    assert!(out.status.success(), "git {args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

/// Turns `dir` into a git repository tagged `tag`; returns its `file://` URL.
pub fn git_repo(dir: &Path, tag: &str) -> String {
    git(dir, &["init", "--quiet"]);
    git(dir, &["add", "."]);
    git(dir, &["commit", "--quiet", "-m", "release"]);
    git(dir, &["tag", "-a", tag, "-m", tag]);
    format!("file://{}", dir.display())
}

/// `(code, line, column)` of each diagnostic in `vl --format json` output.
pub fn json_codes(stdout: &str) -> Result<Vec<(String, u64, u64)>, String> {
    let v: serde_json::Value = serde_json::from_str(stdout).map_err(|e| format!("bad JSON: {e}: {stdout}"))?;
    let arr = v.as_array().ok_or("not a JSON array")?;
    Ok(arr
        .iter()
        .map(|d| (d["code"].as_str().unwrap_or("").to_string(), d["line"].as_u64().unwrap_or(0), d["column"].as_u64().unwrap_or(0)))
        .collect())
}

/// Code, line and column.
pub type Expect = (String, u64, u64);

/// Diagnostic fixtures with the `// expect: CODE LINE:COL` (or `none`)
/// header parsed.
pub fn diagnostic_fixtures() -> Vec<(String, String, Option<Expect>)> {
    let mut out = Vec::new();
    let mut paths: Vec<PathBuf> =
        std::fs::read_dir(fixtures().join("diagnostics")).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    for path in paths {
        let text = std::fs::read_to_string(&path).unwrap();
        let header = text.lines().next().unwrap_or("").trim_start_matches("// expect:").trim();
        let expect = (header != "none").then(|| {
            let (code, pos) = header.split_once(' ').expect("expect header");
            let (l, c) = pos.split_once(':').expect("line:col");
            (code.to_string(), l.parse().unwrap(), c.parse().unwrap())
        });
        out.push((path.file_name().unwrap().to_string_lossy().into_owned(), text, expect));
    }
    out
}

/// Every `.vl` file below the fixture tree, sorted.
pub fn all_sources() -> Vec<PathBuf> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p, out);
            } else if p.extension().is_some_and(|x| x == "vl") {
                out.push(p);
            }
        }
    }
    let mut out = Vec::new();
    walk(&fixtures(), &mut out);
    out.sort();
    out
}

/// Relative path to file contents for every file below `dir`.
pub fn tree(dir: &Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut std::collections::BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = std::collections::BTreeMap::new();
    if dir.is_dir() {
        walk(dir, dir, &mut out);
    }
    out
}
