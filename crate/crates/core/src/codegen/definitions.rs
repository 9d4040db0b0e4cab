use std::collections::{HashMap, HashSet};
use std::fmt;

use super::{CodegenError, DEFAULT_VERSION};
use crate::cql::ast::{CodeDecl, CodeSystemDecl, Define, Expr, Library, Location};
use crate::cql::parser::parse_expression;
use crate::diagram::{FlowNode, FlowchartDiagram, NodeType};
use crate::semantic_audit::{CqlAuditReport, NodeAudit};
use crate::terminology::{MatchResult, TerminologyDictionary, REQUIRES_HUMAN_MAPPING};
use crate::text::{pascal_ident, single_line};
use crate::{normalize_term, slug};

pub const PLACEHOLDER_CODESYSTEM: &str = "PLACEHOLDER";
pub const PLACEHOLDER_URI: &str = "urn:pathwise:requires-human-mapping";
pub const PLACEHOLDER_CODE: &str = "UNMAPPED";

const KNOWN_SYSTEMS: &[(&str, &str)] = &[
    ("http://snomed.info/sct", "SNOMED"),
    ("http://loinc.org", "LOINC"),
    ("http://hl7.org/fhir/sid/icd-10", "ICD10"),
    ("http://www.nlm.nih.gov/research/umls/rxnorm", "RxNorm"),
];

/// Inputs shared by the definitions generators.
#[derive(Clone, Copy, Debug)]
pub struct GenerationContext<'a> {
    pub diagram: &'a FlowchartDiagram,
    pub audit: &'a CqlAuditReport,
    pub dictionary: &'a TerminologyDictionary,
    pub library_base_name: &'a str,
    pub version: &'a str,
}

impl<'a> GenerationContext<'a> {
    pub fn new(diagram: &'a FlowchartDiagram, audit: &'a CqlAuditReport, dictionary: &'a TerminologyDictionary) -> Self {
        GenerationContext { diagram, audit, dictionary, library_base_name: &diagram.pathway_name, version: DEFAULT_VERSION }
    }

    pub fn definitions_library_name(&self) -> String {
        format!("{}Definitions", pascal_ident(self.library_base_name))
    }

    /// The audit must cover exactly the diagram's nodes, in order.
    pub fn validate(&self) -> Result<(), CodegenError> {
        let nodes: Vec<&str> = self.diagram.nodes.iter().map(|n| n.id.as_str()).collect();
        let audited: Vec<&str> = self.audit.node_audits.iter().map(|a| a.node_id.as_str()).collect();
        if nodes == audited {
            return Ok(());
        }
        let missing: Vec<&str> = nodes.iter().filter(|n| !audited.contains(n)).copied().collect();
        let extra: Vec<&str> = audited.iter().filter(|a| !nodes.contains(a)).copied().collect();
        Err(CodegenError::CtxMismatch(if missing.is_empty() && extra.is_empty() {
            "node order differs".to_string()
        } else {
            format!("unaudited nodes {missing:?}, unknown audited nodes {extra:?}")
        }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DefineKind {
    Criteria,
    Action,
    Outcome,
}

impl DefineKind {
    pub fn for_node(node_type: NodeType) -> Option<DefineKind> {
        match node_type {
            NodeType::Annotation => None,
            NodeType::EndBlock => Some(DefineKind::Outcome),
            NodeType::StartBlock | NodeType::ActionBlock | NodeType::ProcessBlock => Some(DefineKind::Action),
            NodeType::CriteriaBlock | NodeType::DecisionDiamond | NodeType::Other => Some(DefineKind::Criteria),
        }
    }
}

impl fmt::Display for DefineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DefineKind::Criteria => "Criteria",
            DefineKind::Action => "Action",
            DefineKind::Outcome => "Outcome",
        })
    }
}

pub fn define_name(node_id: &str, kind: DefineKind) -> String {
    format!("{node_id}_{kind}")
}

/// Local code name for a concept with no approved code.
pub fn sentinel_code_name(concept: &str) -> String {
    let s = slug(concept);
    format!("{REQUIRES_HUMAN_MAPPING}_{}", if s.is_empty() { "concept" } else { &s })
}

/// Code and codesystem declarations accumulated while generating.
pub(crate) struct CodeTable<'d> {
    dict: &'d TerminologyDictionary,
    pub codesystems: Vec<CodeSystemDecl>,
    pub codes: Vec<CodeDecl>,
    by_concept: HashMap<String, String>,
    names: HashSet<String>,
}

impl<'d> CodeTable<'d> {
    pub fn new(dict: &'d TerminologyDictionary) -> Self {
        CodeTable { dict, codesystems: Vec::new(), codes: Vec::new(), by_concept: HashMap::new(), names: HashSet::new() }
    }

    /// Seeds the table with a library's existing declarations.
    pub fn from_library(dict: &'d TerminologyDictionary, lib: &Library) -> Self {
        let mut t = CodeTable::new(dict);
        t.codesystems = lib.codesystems.clone();
        t.codes = lib.codes.clone();
        t.names = lib.codes.iter().map(|c| c.name.clone()).collect();
        t
    }

    fn codesystem_for(&mut self, uri: &str) -> String {
        if let Some(cs) = self.codesystems.iter().find(|cs| cs.uri == uri) {
            return cs.name.clone();
        }
        let preferred = if uri == PLACEHOLDER_URI {
            Some(PLACEHOLDER_CODESYSTEM)
        } else {
            KNOWN_SYSTEMS.iter().find(|(u, _)| *u == uri).map(|(_, n)| *n)
        };
        let taken = |name: &str, css: &[CodeSystemDecl]| css.iter().any(|cs| cs.name == name);
        let name = match preferred {
            Some(n) if !taken(n, &self.codesystems) => n.to_string(),
            _ => (1..).map(|i| format!("CS_{i}")).find(|n| !taken(n, &self.codesystems)).expect("unbounded"),
        };
        self.codesystems.push(CodeSystemDecl { name: name.clone(), uri: uri.to_string(), location: Location::default() });
        name
    }

    fn unique_name(&self, base: String) -> String {
        if !self.names.contains(&base) {
            return base;
        }
        (2..).map(|i| format!("{base}_{i}")).find(|n| !self.names.contains(n)).expect("unbounded")
    }

    /// Declares a placeholder code for `concept` and returns its name.
    pub fn sentinel(&mut self, concept: &str) -> String {
        let cs = self.codesystem_for(PLACEHOLDER_URI);
        let name = self.unique_name(sentinel_code_name(concept));
        self.names.insert(name.clone());
        self.codes.push(CodeDecl {
            name: name.clone(),
            code: PLACEHOLDER_CODE.to_string(),
            codesystem: cs,
            display: Some(concept.to_string()),
            location: Location::default(),
        });
        name
    }

    /// Name of the code declaration for `concept`, declaring it on first use.
    /// The second value is false when the concept needs a human mapping.
    pub fn resolve(&mut self, concept: &str) -> (String, bool) {
        let key = normalize_term(concept);
        let matched = self.dict.lookup(&key);
        if let Some(name) = self.by_concept.get(&key) {
            return (name.clone(), matched.is_matched());
        }
        let name = match &matched {
            MatchResult::Matched(entry) => {
                let cs = self.codesystem_for(&entry.system_uri);
                let name = self.unique_name(entry.concept_term.clone());
                self.names.insert(name.clone());
                self.codes.push(CodeDecl {
                    name: name.clone(),
                    code: entry.code.clone(),
                    codesystem: cs,
                    display: Some(entry.display.clone()),
                    location: Location::default(),
                });
                name
            }
            MatchResult::Unmatched => self.sentinel(&key),
        };
        self.by_concept.insert(key, name.clone());
        (name, matched.is_matched())
    }
}

fn governance_comment(node: &FlowNode, audit: &NodeAudit, extra: &[String]) -> String {
    let mut lines = Vec::new();
    let text = single_line(&node.text);
    lines.push(if text.is_empty() { node.node_type.to_string() } else { format!("{}: {text}", node.node_type) });
    if !audit.computable {
        let cats: Vec<&str> = audit.categories().iter().map(|c| c.as_str()).collect();
        lines.push(if cats.is_empty() {
            "UNCOMPUTABLE: no computable pattern matched; requires clinical review".to_string()
        } else {
            format!("UNCOMPUTABLE ({}): requires clinical review", cats.join(", "))
        });
    }
    for f in &audit.findings {
        lines.push(format!("{}: {} [{}]", f.category, single_line(&f.detail), single_line(&f.evidence)));
    }
    lines.extend(extra.iter().cloned());
    lines.join("\n")
}

/// Builds the definitions library: one bound define per non-annotation node.
/// Computable nodes use the audit's proposed expression with concepts
/// resolved through the dictionary; uncomputable nodes become `false`.
pub fn generate_definitions(ctx: &GenerationContext<'_>) -> Result<Library, CodegenError> {
    ctx.validate()?;
    let mut lib = Library::new(ctx.definitions_library_name(), ctx.version);
    let mut table = CodeTable::new(ctx.dictionary);

    for (node, audit) in ctx.diagram.nodes.iter().zip(&ctx.audit.node_audits) {
        let Some(kind) = DefineKind::for_node(node.node_type) else {
            continue;
        };
        let mut notes = Vec::new();
        let expression = if kind == DefineKind::Outcome {
            Expr::Str(node.text.clone())
        } else {
            let parsed = audit.proposed_expression.as_deref().filter(|_| audit.computable).and_then(|e| parse_expression(e).ok());
            match parsed {
                Some(mut e) => {
                    e.walk_mut(&mut |sub| {
                        if let Expr::Exists(r) = sub {
                            if let Some(concept) = r.code_ref.take() {
                                let (name, mapped) = table.resolve(&concept);
                                if !mapped {
                                    notes.push(format!(
                                        "WARNING: \"{}\" has no approved code; {REQUIRES_HUMAN_MAPPING}",
                                        normalize_term(&concept)
                                    ));
                                }
                                r.code_ref = Some(name);
                            }
                        }
                    });
                    if kind == DefineKind::Action && e == Expr::Bool(true) {
                        notes.push("no criteria apply; this step gates nothing".to_string());
                    }
                    e
                }
                None => Expr::Bool(false),
            }
        };
        notes.dedup();
        let mut define = Define::new(define_name(&node.id, kind), expression);
        define.node_binding = Some(node.id.clone());
        define.leading_comment = Some(governance_comment(node, audit, &notes));
        lib.defines.push(define);
    }
    lib.codesystems = table.codesystems;
    lib.codes = table.codes;
    Ok(lib)
}
