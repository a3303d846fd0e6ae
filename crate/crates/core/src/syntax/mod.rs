//! Syntax tree, parser, and canonical formatter.

pub mod ast;
pub mod format;
pub mod parser;

pub use format::format;
pub use parser::{parse, parse_expr_str, parse_source, ParseResult};
