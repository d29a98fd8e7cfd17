//! The snippet language executed by the lexec toolkit.
//!
//! A small dynamically-typed language with Python-flavored surface syntax:
//! indentation blocks, `def`/`lambda`, `try`/`except`/`finally`, `with`,
//! lists/tuples/sets/dicts, and an exception model with named error kinds.
//! The interpreter exposes exactly the hooks the toolkit needs: per-line
//! execution tracking, a capturable output stream, a wall-clock deadline,
//! and a pluggable set of three loader functions that instrumented code
//! binds via an import of the [`RUNTIME_MODULE`].
//!
//! Deliberately out of scope (a snippet using these counts as
//! non-executable): classes, comprehensions, generators/`yield`,
//! `global`/`nonlocal`, decorators, star-args, and f-strings.

pub mod ast;
pub mod builtins;
pub mod interp;
pub mod lexer;
pub mod parser;
pub mod token;
pub mod value;

/// Module name the instrumentation preamble imports the loaders from.
pub const RUNTIME_MODULE: &str = "lexec_runtime";
/// Loader wrapping variable reads: `_lx_n_(iid, name, accessor)`.
pub const NAME_LOADER_FN: &str = "_lx_n_";
/// Loader wrapping attribute reads: `_lx_a_(iid, base, attr_name)`.
pub const ATTR_LOADER_FN: &str = "_lx_a_";
/// Loader wrapping calls: `_lx_c_(iid, callee, args..., kwargs...)`.
pub const CALL_LOADER_FN: &str = "_lx_c_";

/// Lexer/parser failure: the snippet is not well-formed in this language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LangError {
    pub line: u32,
    pub message: String,
}

impl LangError {
    pub fn syntax(line: u32, message: impl Into<String>) -> LangError {
        LangError {
            line,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for LangError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "syntax error at line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for LangError {}

pub use ast::Program;
pub use interp::{Env, ExcKind, Flow, HostError, Interp, LineTracker, LoaderSet, ValueIter};
pub use lexer::{lex, LexOutput};
pub use parser::parse_program;
pub use token::Span;
pub use value::{DummyObj, Value};
