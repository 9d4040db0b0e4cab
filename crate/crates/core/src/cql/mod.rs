//! Frontend for the clinical query language subset the pipeline emits:
//! lexer, parser, canonical printer, semantic checker and node bindings.

pub mod ast;
pub mod bindings;
pub mod checker;
pub mod lexer;
pub mod parser;
pub mod printer;

use thiserror::Error;

pub use ast::{Define, Expr, Library, Location};
pub use bindings::{extract_bindings, LibraryBindings};
pub use checker::{check_library, CheckCode, CheckIssue, CheckReport};
pub use parser::{parse_expression, parse_library, parse_library_bytes};
pub use printer::print_library;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CqlError {
    #[error("{location}: {message}")]
    Lex { message: String, location: Location },
    #[error("{location}: expected {expected}, found {found}")]
    Parse { expected: String, found: String, location: Location },
}

impl CqlError {
    pub fn code(&self) -> &'static str {
        match self {
            CqlError::Lex { .. } => "E_LEX",
            CqlError::Parse { .. } => "E_PARSE",
        }
    }

    pub fn location(&self) -> Location {
        match self {
            CqlError::Lex { location, .. } | CqlError::Parse { location, .. } => *location,
        }
    }
}
