//! Compiler core for `vl`, a small hardware description language that
//! transpiles to readable SystemVerilog.
//!
//! Pipeline: [`lexer`] → [`syntax`] → [`resolver`] (symbols and generic
//! monomorphization) → [`analyzer`] (semantic checks) → [`emitter`].
//! [`docgen`] renders module documentation from `///` comments, and
//! [`driver`] wires the passes together for a set of projects.

pub mod analyzer;
pub mod diag;
pub mod docgen;
pub mod driver;
pub mod emitter;
pub mod lexer;
pub mod resolver;
pub mod source;
pub mod syntax;

pub use diag::{Code, Diagnostic, Severity};
pub use source::{FileId, SourceMap, Span};
