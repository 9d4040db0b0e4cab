use std::collections::{HashMap, HashSet};

use log::debug;

use super::definitions::{generate_definitions, CodeTable, GenerationContext};
use super::CodegenError;
use crate::cql::ast::{Expr, Library};
use crate::cql::checker::{check_library, CheckCode, CheckReport};
use crate::cql::parser::parse_library;
use crate::cql::printer::print_library;
use crate::terminology::TerminologyDictionary;

pub const MAX_CRITIC_ITERATIONS: u32 = 3;

/// Produces a definitions library and revises it from checker feedback.
pub trait DefinitionsGenerator {
    fn id(&self) -> &str;
    fn generate(&self, ctx: &GenerationContext<'_>) -> Result<Library, CodegenError>;
    fn repair(&self, ctx: &GenerationContext<'_>, library: &Library, report: &CheckReport) -> Result<Library, CodegenError>;
}

/// The deterministic template generator; repairs are mechanical.
#[derive(Clone, Copy, Debug, Default)]
pub struct BaselineGenerator;

impl DefinitionsGenerator for BaselineGenerator {
    fn id(&self) -> &str {
        "baseline"
    }

    fn generate(&self, ctx: &GenerationContext<'_>) -> Result<Library, CodegenError> {
        generate_definitions(ctx)
    }

    fn repair(&self, ctx: &GenerationContext<'_>, library: &Library, report: &CheckReport) -> Result<Library, CodegenError> {
        Ok(mechanical_repair(library, report, ctx.dictionary))
    }
}

pub fn generator_by_id(id: &str) -> Result<Box<dyn DefinitionsGenerator>, CodegenError> {
    match id {
        "baseline" => Ok(Box::new(BaselineGenerator)),
        other => Err(CodegenError::UnknownGenerator(other.to_string())),
    }
}

#[derive(Clone, Debug)]
pub struct CriticOutcome {
    pub library: Library,
    /// Printed form of `library`, exactly as checked.
    pub source: String,
    pub iterations_used: u32,
    pub final_report: CheckReport,
}

/// Generate, print, reparse and check, handing failures back to the
/// generator, for at most [`MAX_CRITIC_ITERATIONS`] rounds.
pub fn critic_loop(ctx: &GenerationContext<'_>, generator: &dyn DefinitionsGenerator) -> Result<CriticOutcome, CodegenError> {
    let mut library = generator.generate(ctx)?;
    let mut iteration = 1;
    loop {
        let source = print_library(&library);
        let reparsed = parse_library(&source).expect("printed libraries reparse");
        let report = check_library(&reparsed, &[], ctx.dictionary);
        debug!(
            "critic iteration {iteration} ({}): {} errors, {} warnings",
            generator.id(),
            report.errors.len(),
            report.warnings.len()
        );
        let outcome = CriticOutcome { library: reparsed, source, iterations_used: iteration, final_report: report };
        if outcome.final_report.ok {
            return Ok(outcome);
        }
        if iteration >= MAX_CRITIC_ITERATIONS {
            return Err(CodegenError::CriticExhausted(Box::new(outcome)));
        }
        library = generator.repair(ctx, &outcome.library, &outcome.final_report)?;
        iteration += 1;
    }
}

/// Fixes the checker failures that have a safe mechanical remedy: later
/// duplicate defines are dropped, codes outside the dictionary are rewritten
/// to placeholder form, and defines with type errors become `false`.
pub fn mechanical_repair(library: &Library, report: &CheckReport, dict: &TerminologyDictionary) -> Library {
    let mut lib = library.clone();

    if report.has(CheckCode::DupDefine) {
        let mut seen = HashSet::new();
        lib.defines.retain(|d| seen.insert(d.name.clone()));
    }

    let hallucinated: HashSet<&str> =
        report.errors_with(CheckCode::HallucinatedCode).filter_map(|i| i.symbol.as_deref()).collect();
    if !hallucinated.is_empty() {
        let mut table = CodeTable::from_library(dict, &lib);
        let mut renames = HashMap::new();
        for code in lib.codes.iter().filter(|c| hallucinated.contains(c.name.as_str())) {
            let concept = code.display.clone().unwrap_or_else(|| code.name.clone());
            renames.insert(code.name.clone(), table.sentinel(&concept));
        }
        lib.codesystems = table.codesystems;
        lib.codes = table.codes.into_iter().filter(|c| !renames.contains_key(&c.name)).collect();
        for d in &mut lib.defines {
            d.expression.walk_mut(&mut |e| {
                if let Expr::Exists(r) = e {
                    if let Some(new) = r.code_ref.as_ref().and_then(|c| renames.get(c)) {
                        r.code_ref = Some(new.clone());
                    }
                }
            });
        }
        lib.codesystems.retain(|cs| lib.codes.iter().any(|c| c.codesystem == cs.name));
    }

    let mistyped: HashMap<&str, &str> =
        report.errors_with(CheckCode::Type).filter_map(|i| i.define.as_deref().map(|d| (d, i.message.as_str()))).collect();
    for d in &mut lib.defines {
        if let Some(message) = mistyped.get(d.name.as_str()) {
            d.expression = Expr::Bool(false);
            let note = format!("UNCOMPUTABLE: replaced after type error: {message}");
            d.leading_comment = Some(match d.leading_comment.take() {
                Some(c) => format!("{c}\n{note}"),
                None => note,
            });
        }
    }
    lib
}
