//! Runs the whole pipeline over a set of compile units.

use std::path::{Path as FsPath, PathBuf};

use crate::analyzer::{analyze, Context};
use crate::diag::{has_errors, sort_and_dedup, Diagnostic};
use crate::docgen::{extract_docs, render_docs, DocModel};
use crate::emitter::{render_project, write_project, EmitError, ProjectOutput, UnitOutput};
use crate::resolver::{build_symbols, monomorphize, resolve_design, ConcreteModule, Namespace, ParsedFile, Resolution, SymbolTable};
use crate::source::SourceMap;
use crate::syntax::parse_source;

#[derive(Debug, Clone)]
pub struct InputFile {
    /// Path relative to the unit's source root; fixes ordering and the
    /// output file name.
    pub rel_path: String,
    /// Name shown in diagnostics.
    pub display: String,
    pub text: String,
}

/// One project (the root or a dependency) to compile.
#[derive(Debug, Clone)]
pub struct CompileUnit {
    pub name: String,
    pub deps: Vec<String>,
    pub files: Vec<InputFile>,
    pub output: UnitOutput,
}

#[derive(Debug)]
pub struct Compilation {
    pub sources: SourceMap,
    pub design: Vec<Namespace>,
    pub outputs: Vec<UnitOutput>,
    pub table: SymbolTable,
    pub res: Resolution,
    pub modules: Vec<ConcreteModule>,
    /// Sorted by position.
    pub diagnostics: Vec<Diagnostic>,
    /// False when lexing or parsing failed; later passes were skipped.
    pub parsed: bool,
}

/// Parses, resolves, monomorphizes and checks every unit. Semantic passes
/// are skipped if any file fails to parse.
pub fn compile(units: Vec<CompileUnit>) -> Compilation {
    let mut sources = SourceMap::new();
    let mut diagnostics = Vec::new();
    let mut design = Vec::new();
    let mut outputs = Vec::new();
    for unit in units {
        let mut files = Vec::new();
        for f in unit.files {
            let id = sources.add(f.display, f.text);
            let r = parse_source(&sources.get(id).text, id);
            diagnostics.extend(r.diagnostics);
            files.push(ParsedFile { id, path: f.rel_path, ast: r.file });
        }
        design.push(Namespace { name: unit.name, deps: unit.deps, files });
        outputs.push(unit.output);
    }
    let parsed = !has_errors(&diagnostics);
    let (table, res, modules) = if parsed {
        let (table, d) = build_symbols(&design);
        diagnostics.extend(d);
        let (res, d) = resolve_design(&design, &table);
        diagnostics.extend(d);
        let (modules, d) = monomorphize(&design, &table, &res);
        diagnostics.extend(d);
        diagnostics.extend(analyze(&Context { design: &design, table: &table, res: &res, modules: &modules }));
        (table, res, modules)
    } else {
        Default::default()
    };
    sort_and_dedup(&mut diagnostics);
    Compilation { sources, design, outputs, table, res, modules, diagnostics, parsed }
}

impl Compilation {
    pub fn has_errors(&self) -> bool {
        has_errors(&self.diagnostics)
    }

    pub fn context(&self) -> Context<'_> {
        Context { design: &self.design, table: &self.table, res: &self.res, modules: &self.modules }
    }

    pub fn render(&self) -> ProjectOutput {
        render_project(&self.context(), &self.outputs)
    }

    pub fn emit(&self, out_dir: &FsPath) -> Result<Vec<PathBuf>, EmitError> {
        write_project(&self.render(), out_dir)
    }

    /// Doc models for the unit at `ns`, files in path order.
    pub fn doc_models(&self, ns: usize) -> (Vec<DocModel>, Vec<Diagnostic>) {
        let mut files: Vec<&ParsedFile> = self.design[ns].files.iter().collect();
        files.sort_by(|a, b| a.path.cmp(&b.path));
        let asts: Vec<_> = files.iter().map(|f| &f.ast).collect();
        extract_docs(&asts)
    }

    /// Writes the documentation tree for unit `ns` into `out_dir`.
    pub fn write_docs(&self, ns: usize, wavedrom_url: &str, out_dir: &FsPath) -> Result<(Vec<PathBuf>, Vec<Diagnostic>), EmitError> {
        let (models, diags) = self.doc_models(ns);
        let mut written = Vec::new();
        std::fs::create_dir_all(out_dir).map_err(|source| EmitError { path: out_dir.to_path_buf(), source })?;
        for (name, text) in render_docs(&models, wavedrom_url) {
            let path = out_dir.join(name);
            std::fs::write(&path, text).map_err(|source| EmitError { path: path.clone(), source })?;
            written.push(path);
        }
        Ok((written, diags))
    }
}
