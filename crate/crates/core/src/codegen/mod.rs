//! Generation of the definitions and routing libraries.
//!
//! The definitions library holds one define per pathway node, bound to it by
//! a `// node: <id>` comment. The routing library includes it, conjoins node
//! defines along each enumerated journey and picks the first matching
//! journey's outcome. Definitions pass through a bounded critic loop that
//! checks them and feeds failures back to the generator.

mod critic;
mod definitions;
mod routing;

use thiserror::Error;

pub use critic::{
    critic_loop, generator_by_id, mechanical_repair, BaselineGenerator, CriticOutcome, DefinitionsGenerator,
    MAX_CRITIC_ITERATIONS,
};
pub use definitions::{
    define_name, generate_definitions, sentinel_code_name, DefineKind, GenerationContext, PLACEHOLDER_CODE,
    PLACEHOLDER_CODESYSTEM, PLACEHOLDER_URI,
};
pub use routing::{generate_routing, routing_library_name, DEFS_ALIAS, LOOP_OUTCOME, NO_MATCH_OUTCOME};

use crate::cql::bindings::DuplicateBinding;

pub const DEFAULT_VERSION: &str = "1.0.0";

#[derive(Debug, Error)]
pub enum CodegenError {
    #[error("audit and diagram disagree: {0}")]
    CtxMismatch(String),
    #[error("journey {journey} passes node {node}, which has no bound define")]
    MissingBinding { journey: usize, node: String },
    #[error(transparent)]
    DuplicateBinding(#[from] DuplicateBinding),
    #[error("no definitions generator named {0:?}")]
    UnknownGenerator(String),
    #[error("definitions still fail the checker after {} iterations", .0.iterations_used)]
    CriticExhausted(Box<CriticOutcome>),
}

impl CodegenError {
    pub fn code(&self) -> &'static str {
        match self {
            CodegenError::CtxMismatch(_) => "E_CTX_MISMATCH",
            CodegenError::MissingBinding { .. } => "E_MISSING_BINDING",
            CodegenError::DuplicateBinding(e) => e.code(),
            CodegenError::UnknownGenerator(_) => "E_UNKNOWN_GENERATOR",
            CodegenError::CriticExhausted(_) => "E_CRITIC_EXHAUSTED",
        }
    }
}
