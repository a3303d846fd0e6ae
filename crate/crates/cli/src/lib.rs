//! The `vl` command line: `new`, `check`, `build`, `fmt`, `doc`, `update`.

pub mod render;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use vl_core::diag::{has_errors, sort_and_dedup, to_json};
use vl_core::driver::{compile, Compilation};
use vl_core::emitter::EmitError;
use vl_core::syntax::{format, parse_source};
use vl_core::{Diagnostic, SourceMap};
use vl_project::manifest::{is_identifier, scaffold_manifest};
use vl_project::{build_plan, resolve_dependencies, Cache, GitFetcher, Lockfile, Manifest, PlanUnit, ProjectError, LOCK_FILE, MANIFEST_FILE};

pub use render::render_human;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DIAGNOSTICS: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "vl", version, about = "Transpiles vl sources to SystemVerilog")]
struct Cli {
    /// Path to the project manifest.
    #[arg(long, global = true, value_name = "PATH", default_value = MANIFEST_FILE)]
    manifest: PathBuf,
    /// Never touch the network; dependencies must be cached.
    #[arg(long, global = true)]
    offline: bool,
    /// Diagnostic output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Create a new project directory.
    New { name: PathBuf },
    /// Run all checks without writing output.
    Check,
    /// Check and emit SystemVerilog.
    Build {
        /// Output directory (default: the manifest's target_dir).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Rewrite sources in canonical form.
    Fmt {
        /// Only report files that would change.
        #[arg(long)]
        check: bool,
    },
    /// Check and generate module documentation.
    Doc {
        /// Output directory (default: <target_dir>/doc).
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Re-resolve dependencies and rewrite vl.lock.
    Update,
}

#[derive(Debug)]
enum Failure {
    Project(ProjectError),
    Emit(EmitError),
    Usage(String),
}

impl From<ProjectError> for Failure {
    fn from(e: ProjectError) -> Self {
        Failure::Project(e)
    }
}

impl From<EmitError> for Failure {
    fn from(e: EmitError) -> Self {
        Failure::Emit(e)
    }
}

/// Runs the tool and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_FAILURE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::New { name } => new_project(name),
        Command::Check => check(&cli),
        Command::Build { out } => build(&cli, out.as_deref()),
        Command::Fmt { check } => fmt(&cli, *check),
        Command::Doc { out } => doc(&cli, out.as_deref()),
        Command::Update => update(&cli),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Project(e) => (e.code(), e.to_string()),
                Failure::Emit(e) => (e.code().as_str(), e.to_string()),
                Failure::Usage(m) => ("usage", m),
            };
            eprintln!("error[{code}]: {msg}");
            EXIT_FAILURE
        }
    }
}

struct Project {
    manifest: Manifest,
    root: PathBuf,
    plan: Vec<PlanUnit>,
}

fn root_of(manifest_path: &Path) -> PathBuf {
    manifest_path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn load_manifest(cli: &Cli) -> Result<Manifest, Failure> {
    let manifest = Manifest::load(&cli.manifest)?;
    for w in &manifest.warnings {
        eprintln!("warning[{}]: {}\n --> {}", w.code, w.message, cli.manifest.display());
    }
    Ok(manifest)
}

/// Loads the manifest, resolves dependencies, and refreshes `vl.lock`.
/// `relock` ignores the existing lockfile.
fn load_project(cli: &Cli, relock: bool) -> Result<Project, Failure> {
    let manifest = load_manifest(cli)?;
    let root = root_of(&cli.manifest);
    let lock_path = root.join(LOCK_FILE);
    let lock = if relock { None } else { Lockfile::load(&lock_path)? };
    let resolved = resolve_dependencies(&manifest, lock.as_ref(), cli.offline, &Cache::from_env(), &GitFetcher)?;
    if relock || !manifest.dependencies.is_empty() || lock.is_some() {
        resolved.lock.store(&lock_path)?;
    }
    let plan = build_plan(&manifest, &root, &resolved)?;
    Ok(Project { manifest, root, plan })
}

fn compile_project(p: &Project) -> Result<Compilation, Failure> {
    let units = p.plan.iter().map(PlanUnit::compile_unit).collect::<Result<Vec<_>, _>>()?;
    Ok(compile(units))
}

fn report(cli: &Cli, diags: &[Diagnostic], sources: &SourceMap) -> i32 {
    match cli.format {
        Format::Json => println!("{}", to_json(diags, sources)),
        Format::Human => {
            let mut err = std::io::stderr().lock();
            for d in diags {
                let _ = writeln!(err, "{}", render_human(d, sources));
            }
        }
    }
    if has_errors(diags) {
        EXIT_DIAGNOSTICS
    } else {
        EXIT_OK
    }
}

fn check(cli: &Cli) -> Result<i32, Failure> {
    let p = load_project(cli, false)?;
    let c = compile_project(&p)?;
    Ok(report(cli, &c.diagnostics, &c.sources))
}

fn build(cli: &Cli, out: Option<&Path>) -> Result<i32, Failure> {
    let p = load_project(cli, false)?;
    let c = compile_project(&p)?;
    let code = report(cli, &c.diagnostics, &c.sources);
    if code == EXIT_OK {
        let out = out.map(Path::to_path_buf).unwrap_or_else(|| p.root.join(&p.manifest.build.target_dir));
        c.emit(&out)?;
    }
    Ok(code)
}

fn doc(cli: &Cli, out: Option<&Path>) -> Result<i32, Failure> {
    let p = load_project(cli, false)?;
    let c = compile_project(&p)?;
    if !c.parsed {
        return Ok(report(cli, &c.diagnostics, &c.sources));
    }
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| p.root.join(&p.manifest.build.target_dir).join("doc"));
    let (_, doc_diags) = c.write_docs(c.design.len() - 1, &p.manifest.build.wavedrom_url, &out)?;
    let mut diags = c.diagnostics.clone();
    diags.extend(doc_diags);
    sort_and_dedup(&mut diags);
    Ok(report(cli, &diags, &c.sources))
}

fn update(cli: &Cli) -> Result<i32, Failure> {
    let p = load_project(cli, true)?;
    let deps = p.plan.len() - 1;
    eprintln!("locked {deps} dependenc{}", if deps == 1 { "y" } else { "ies" });
    Ok(EXIT_OK)
}

fn fmt(cli: &Cli, check_only: bool) -> Result<i32, Failure> {
    load_manifest(cli)?;
    let root = root_of(&cli.manifest);
    let mut sources = SourceMap::new();
    let mut diags = Vec::new();
    let mut changed = Vec::new();
    for (_, path) in vl_project::discover_sources(&root.join("src"))? {
        let text = std::fs::read_to_string(&path).map_err(|e| ProjectError::Io { path: path.clone(), source: e })?;
        let id = sources.add(path.display().to_string(), text);
        let parsed = parse_source(&sources.get(id).text, id);
        if has_errors(&parsed.diagnostics) {
            diags.extend(parsed.diagnostics);
            continue;
        }
        let formatted = format(&parsed.file);
        if formatted != sources.get(id).text {
            if !check_only {
                std::fs::write(&path, &formatted).map_err(|e| ProjectError::Io { path: path.clone(), source: e })?;
            }
            changed.push(path);
        }
    }
    sort_and_dedup(&mut diags);
    let code = report(cli, &diags, &sources);
    for path in &changed {
        eprintln!("{} {}", if check_only { "would reformat" } else { "formatted" }, path.display());
    }
    Ok(if check_only && !changed.is_empty() { EXIT_DIAGNOSTICS } else { code })
}

/// `counter` -> `Counter`, `my_top` -> `MyTop`.
fn module_name(project: &str) -> String {
    let camel: String = project
        .split('_')
        .filter(|s| !s.is_empty())
        .map(|s| {
            let mut c = s.chars();
            c.next().map(|f| f.to_ascii_uppercase().to_string() + c.as_str()).unwrap_or_default()
        })
        .collect();
    if camel.is_empty() || camel.starts_with(|c: char| c.is_ascii_digit()) {
        format!("M{camel}")
    } else {
        camel
    }
}

/// Canonically formatted `src/main.vl` for a new project.
fn scaffold_source(project: &str) -> String {
    let text = format!("pub module {} {{}}\n", module_name(project));
    format(&parse_source(&text, vl_core::FileId(0)).file)
}

fn new_project(dir: &Path) -> Result<i32, Failure> {
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    if !is_identifier(&name) {
        return Err(Failure::Usage(format!("project name `{name}` is not an identifier")));
    }
    if dir.exists() {
        return Err(Failure::Usage(format!("`{}` already exists", dir.display())));
    }
    let src = dir.join("src");
    std::fs::create_dir_all(&src).map_err(|e| ProjectError::Io { path: src.clone(), source: e })?;
    let files = [
        (dir.join(MANIFEST_FILE), scaffold_manifest(&name)),
        (src.join("main.vl"), scaffold_source(&name)),
    ];
    for (path, text) in files {
        std::fs::write(&path, text).map_err(|e| ProjectError::Io { path: path.clone(), source: e })?;
    }
    eprintln!("created `{}`", dir.display());
    Ok(EXIT_OK)
}
