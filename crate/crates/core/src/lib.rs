//! Core machinery for distilling visual programs: a parser and canonical
//! printer for the program mini-language, variable renaming and template
//! extraction, template-based augmentation, a deterministic scene-graph
//! executor, the auto-context annotation loop, and evaluation metrics.
//!
//! The crate is `no_std` and only needs an allocator. File formats, HTTP,
//! and the command line live in the `vpdistill` crate.
#![no_std]
extern crate alloc;

pub mod analysis;
pub mod ast;
pub mod bench;
pub mod dataset;
pub mod augment;
pub mod error;
pub mod exec;
mod lexer;
pub mod parser;
pub mod printer;
pub mod rename;
pub mod scene;
pub mod slots;
pub mod teacher;
pub mod template;
pub mod text;

pub use ast::{AssignTarget, Expr, Program, Stmt};
pub use error::SyntaxError;
pub use parser::parse;
pub use printer::print_canonical;
pub use rename::{rename_variables, rename_variables_with};
pub use template::{ArgBinding, Template, TemplateRecord, abstract_arguments, extract, instantiate};
