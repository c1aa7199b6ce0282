//! Shared language front end for the Python-like MiniLang surface.
//!
//! One grammar backs both the static scorer and the bundled interpreter, so
//! the two agree exactly on which programs are well formed.

pub mod ast;
mod lexer;
mod parser;

pub use parser::parse;
