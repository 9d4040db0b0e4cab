use std::collections::HashSet;

use pathwise_core::codegen::{
    generate_definitions, mechanical_repair, CodegenError, DefinitionsGenerator, GenerationContext, PLACEHOLDER_CODE,
    PLACEHOLDER_URI,
};
use pathwise_core::cql::ast::{CodeDecl, CodeSystemDecl, Location};
use pathwise_core::cql::checker::is_sentinel_name;
use pathwise_core::cql::{extract_bindings, CheckReport, Expr, Library};
use pathwise_core::terminology::TerminologyDictionary;

use super::Compiled;

pub const FABRICATED: &str = "999999999";

/// Rewrites the first real code to a value outside the dictionary, or adds
/// a fabricated one if the library has none.
pub fn fabricate(mut lib: Library) -> Library {
    match lib.codes.iter_mut().find(|c| !is_sentinel_name(&c.name)) {
        Some(code) => code.code = FABRICATED.to_string(),
        None => {
            if lib.codesystem("SNOMED").is_none() {
                lib.codesystems.push(CodeSystemDecl {
                    name: "SNOMED".into(),
                    uri: "http://snomed.info/sct".into(),
                    location: Location::default(),
                });
            }
            lib.codes.push(CodeDecl {
                name: "fabricated finding".into(),
                code: FABRICATED.into(),
                codesystem: "SNOMED".into(),
                display: Some("Fabricated finding".into()),
                location: Location::default(),
            });
        }
    }
    lib
}

/// Generator stub that injects a hallucinated code. With `repairs` it falls
/// back to mechanical repair; without, it resubmits the same library.
pub struct Fabricator {
    pub repairs: bool,
}

impl DefinitionsGenerator for Fabricator {
    fn id(&self) -> &str {
        "fabricator"
    }

    fn generate(&self, ctx: &GenerationContext<'_>) -> Result<Library, CodegenError> {
        Ok(fabricate(generate_definitions(ctx)?))
    }

    fn repair(&self, ctx: &GenerationContext<'_>, library: &Library, report: &CheckReport) -> Result<Library, CodegenError> {
        if self.repairs {
            Ok(mechanical_repair(library, report, ctx.dictionary))
        } else {
            Ok(library.clone())
        }
    }
}

pub fn code_pairs_are_grounded(lib: &Library, dict: &TerminologyDictionary) -> bool {
    lib.codes.iter().all(|c| {
        let uri = lib.code_system_uri(c).unwrap_or_default();
        dict.contains_pair(uri, &c.code) || (is_sentinel_name(&c.name) && uri == PLACEHOLDER_URI && c.code == PLACEHOLDER_CODE)
    })
}

/// Nodes whose define is the literal `false` placeholder.
pub fn false_nodes(c: &Compiled) -> HashSet<String> {
    let bindings = extract_bindings(&c.defs).unwrap();
    bindings
        .node_to_define
        .iter()
        .filter(|(_, def)| c.defs.define(def).is_some_and(|x| x.expression == Expr::Bool(false)))
        .map(|(node, _)| node.clone())
        .collect()
}
