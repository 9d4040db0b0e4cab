//! Node-level computability audit.
//!
//! Each node gets a computable label plus governance findings in four
//! categories. The bundled [`LexiconAuditor`] is a deterministic rules engine
//! driven by an editable [`AuditLexicon`]; other auditors plug in through
//! [`NodeAuditor`].

pub mod lexicon;
mod matcher;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::cql::parser::parse_expression;
use crate::cql::printer::{print_expr, quote_str};
use crate::diagram::{FlowNode, FlowchartDiagram, FontWeight, NodeType, TextCase};
use crate::normalize_term;
pub use lexicon::{AuditLexicon, ComputablePattern, LexiconError};
use matcher::{build_expression, connective, find_phrase, satisfiable, AtomKind, Connective, Matchers};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueCategory {
    ContentError,
    ContentAmbiguity,
    ContentComplexity,
    FormatInconsistency,
}

impl IssueCategory {
    pub const ALL: [IssueCategory; 4] = [
        IssueCategory::ContentError,
        IssueCategory::ContentAmbiguity,
        IssueCategory::ContentComplexity,
        IssueCategory::FormatInconsistency,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IssueCategory::ContentError => "content_error",
            IssueCategory::ContentAmbiguity => "content_ambiguity",
            IssueCategory::ContentComplexity => "content_complexity",
            IssueCategory::FormatInconsistency => "format_inconsistency",
        }
    }

    /// Errors and ambiguity make a node uncomputable; the others are advisory.
    pub fn disqualifies(self) -> bool {
        matches!(self, IssueCategory::ContentError | IssueCategory::ContentAmbiguity)
    }
}

impl fmt::Display for IssueCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub category: IssueCategory,
    pub detail: String,
    /// Matched text, or the visual attribute that triggered the finding.
    pub evidence: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeAudit {
    pub node_id: String,
    pub node_type: NodeType,
    pub computable: bool,
    pub findings: Vec<Finding>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proposed_expression: Option<String>,
}

impl NodeAudit {
    pub fn categories(&self) -> Vec<IssueCategory> {
        let mut cats: Vec<_> = self.findings.iter().map(|f| f.category).collect();
        cats.sort();
        cats.dedup();
        cats
    }

    pub fn is_informational(&self) -> bool {
        self.node_type == NodeType::Annotation
    }

    /// Brings an audit from any auditor in line with the label contract: a
    /// computable node carries a parseable expression and no disqualifying
    /// finding.
    fn enforce_contract(mut self) -> NodeAudit {
        if self.is_informational() {
            self.computable = false;
            self.findings.clear();
            self.proposed_expression = None;
            return self;
        }
        if self.computable {
            let parses = self.proposed_expression.as_deref().is_some_and(|e| parse_expression(e).is_ok());
            if !parses {
                self.findings.push(Finding {
                    category: IssueCategory::ContentError,
                    detail: "proposed expression is missing or does not parse".into(),
                    evidence: self.proposed_expression.clone().unwrap_or_default(),
                });
            }
            if self.findings.iter().any(|f| f.category.disqualifies()) {
                self.computable = false;
            }
        }
        if !self.computable {
            self.proposed_expression = None;
        }
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AuditCounts {
    pub passed: usize,
    pub failed: usize,
    pub uncomputable: usize,
    pub content_ambiguity: usize,
    pub content_complexity: usize,
    pub content_error: usize,
    pub format_inconsistency: usize,
}

impl AuditCounts {
    /// Aggregates node audits. Annotations are informational and excluded;
    /// category totals count findings, not nodes.
    pub fn from_audits(audits: &[NodeAudit]) -> AuditCounts {
        let mut c = AuditCounts::default();
        for a in audits.iter().filter(|a| !a.is_informational()) {
            if a.computable {
                c.passed += 1;
            } else if a.findings.is_empty() {
                c.uncomputable += 1;
            } else {
                c.failed += 1;
            }
            for f in &a.findings {
                *c.category_mut(f.category) += 1;
            }
        }
        c
    }

    pub fn category(&self, cat: IssueCategory) -> usize {
        match cat {
            IssueCategory::ContentError => self.content_error,
            IssueCategory::ContentAmbiguity => self.content_ambiguity,
            IssueCategory::ContentComplexity => self.content_complexity,
            IssueCategory::FormatInconsistency => self.format_inconsistency,
        }
    }

    fn category_mut(&mut self, cat: IssueCategory) -> &mut usize {
        match cat {
            IssueCategory::ContentError => &mut self.content_error,
            IssueCategory::ContentAmbiguity => &mut self.content_ambiguity,
            IssueCategory::ContentComplexity => &mut self.content_complexity,
            IssueCategory::FormatInconsistency => &mut self.format_inconsistency,
        }
    }

    pub fn total_findings(&self) -> usize {
        IssueCategory::ALL.iter().map(|c| self.category(*c)).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CqlAuditReport {
    pub pathway_name: String,
    pub node_audits: Vec<NodeAudit>,
    pub counts: AuditCounts,
}

impl CqlAuditReport {
    pub fn audit(&self, node_id: &str) -> Option<&NodeAudit> {
        self.node_audits.iter().find(|a| a.node_id == node_id)
    }

    pub fn by_node(&self) -> BTreeMap<&str, &NodeAudit> {
        self.node_audits.iter().map(|a| (a.node_id.as_str(), a)).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("audit report serializes");
        s.push('\n');
        s
    }
}

pub trait NodeAuditor: Send + Sync {
    fn id(&self) -> &str;
    fn audit_node(&self, node: &FlowNode) -> NodeAudit;
}

/// Deterministic rules engine over an [`AuditLexicon`].
pub struct LexiconAuditor {
    lexicon: AuditLexicon,
    matchers: Matchers,
}

impl LexiconAuditor {
    pub fn new(lexicon: AuditLexicon) -> Self {
        let matchers = Matchers::new(&lexicon);
        LexiconAuditor { lexicon, matchers }
    }

    pub fn lexicon(&self) -> &AuditLexicon {
        &self.lexicon
    }

    fn urgency_signal(&self, node: &FlowNode) -> Option<String> {
        let v = &node.visual;
        if self.lexicon.is_urgency_color(&v.background_color) {
            Some(format!("background_color={}", v.background_color))
        } else if v.font_weight == FontWeight::Bold && v.text_case == TextCase::Upper {
            Some("font_weight=bold, text_case=upper".to_string())
        } else {
            None
        }
    }

    fn format_rule(&self, node: &FlowNode, has_pattern: bool, findings: &mut Vec<Finding>) {
        if has_pattern {
            return;
        }
        if let Some(evidence) = self.urgency_signal(node) {
            findings.push(Finding {
                category: IssueCategory::FormatInconsistency,
                detail: "visual urgency signal has no corresponding textual rule".into(),
                evidence,
            });
        }
    }
}

impl Default for LexiconAuditor {
    fn default() -> Self {
        LexiconAuditor::new(AuditLexicon::default())
    }
}

impl NodeAuditor for LexiconAuditor {
    fn id(&self) -> &str {
        "lexicon"
    }

    fn audit_node(&self, node: &FlowNode) -> NodeAudit {
        let mut audit = NodeAudit {
            node_id: node.id.clone(),
            node_type: node.node_type,
            computable: false,
            findings: Vec::new(),
            proposed_expression: None,
        };
        let text = normalize_term(&node.text);
        let lex = &self.lexicon;

        match node.node_type {
            NodeType::Annotation => return audit,
            NodeType::EndBlock => {
                self.format_rule(node, false, &mut audit.findings);
                audit.computable = true;
                audit.proposed_expression = Some(quote_str(&node.text));
                return audit;
            }
            _ => {}
        }

        let atoms = self.matchers.atoms(&text);
        let mode = connective(&text, &atoms);
        let findings = &mut audit.findings;

        // content_error
        if mode != Connective::Or {
            let mut by_concept: BTreeMap<&str, Vec<_>> = BTreeMap::new();
            for a in &atoms {
                if let AtomKind::Quantity { concept, op, value, .. } = &a.kind {
                    by_concept.entry(concept).or_default().push((*op, *value, &text[a.start..a.end]));
                }
            }
            for (concept, cs) in by_concept {
                let ops: Vec<_> = cs.iter().map(|(op, v, _)| (*op, *v)).collect();
                if !satisfiable(&ops) {
                    findings.push(Finding {
                        category: IssueCategory::ContentError,
                        detail: format!("thresholds on {concept} cannot all hold"),
                        evidence: cs.iter().map(|(_, _, t)| *t).collect::<Vec<_>>().join("; "),
                    });
                }
            }
        }
        for a in &atoms {
            if let AtomKind::Quantity { concept, unit: None, expected_unit, unit_required: true, .. } = &a.kind {
                findings.push(Finding {
                    category: IssueCategory::ContentError,
                    detail: format!("threshold on {concept} has no unit (expected {expected_unit})"),
                    evidence: text[a.start..a.end].to_string(),
                });
            }
        }

        // content_ambiguity
        let mut ambiguous_spans = Vec::new();
        for term in &lex.ambiguity_terms {
            let spans = find_phrase(&text, term);
            if let Some(&(s, e)) = spans.first() {
                findings.push(Finding {
                    category: IssueCategory::ContentAmbiguity,
                    detail: format!("subjective term \"{term}\" has no computable definition"),
                    evidence: text[s..e].to_string(),
                });
            }
            ambiguous_spans.extend(spans);
        }
        if !text.chars().any(|c| c.is_ascii_digit()) {
            for word in &lex.vague_comparators {
                let hit = find_phrase(&text, word)
                    .into_iter()
                    .find(|&(s, e)| !ambiguous_spans.iter().any(|&(as_, ae)| s < ae && as_ < e));
                if let Some((s, e)) = hit {
                    findings.push(Finding {
                        category: IssueCategory::ContentAmbiguity,
                        detail: format!("comparator \"{word}\" has no threshold"),
                        evidence: text[s..e].to_string(),
                    });
                }
            }
        }
        if mode == Connective::Mixed {
            findings.push(Finding {
                category: IssueCategory::ContentAmbiguity,
                detail: "criteria mix \"and\" and \"or\" without grouping".into(),
                evidence: text.clone(),
            });
        }

        // content_complexity
        for term in &lex.complexity_terms {
            if let Some(&(s, e)) = find_phrase(&text, term).first() {
                findings.push(Finding {
                    category: IssueCategory::ContentComplexity,
                    detail: format!("\"{term}\" implies scoring or historical aggregation"),
                    evidence: text[s..e].to_string(),
                });
            }
        }
        for (window, days) in self.matchers.lookbacks(&text) {
            if days > u64::from(lex.lookback_horizon_days) {
                findings.push(Finding {
                    category: IssueCategory::ContentComplexity,
                    detail: format!("lookback of {days} days exceeds the {}-day horizon", lex.lookback_horizon_days),
                    evidence: window.to_string(),
                });
            }
        }

        // format_inconsistency
        self.format_rule(node, !atoms.is_empty(), findings);

        let disqualified = audit.findings.iter().any(|f| f.category.disqualifies());
        let expression = match node.node_type {
            NodeType::StartBlock | NodeType::ActionBlock | NodeType::ProcessBlock => Some(crate::cql::Expr::Bool(true)),
            _ => build_expression(&atoms, mode),
        };
        if let (false, Some(e)) = (disqualified, expression) {
            audit.computable = true;
            audit.proposed_expression = Some(print_expr(&e, 0));
        }
        audit
    }
}

pub fn audit_node(node: &FlowNode, lexicon: &AuditLexicon) -> NodeAudit {
    LexiconAuditor::new(lexicon.clone()).audit_node(node).enforce_contract()
}

pub fn audit_all(diagram: &FlowchartDiagram, lexicon: &AuditLexicon) -> CqlAuditReport {
    audit_all_with(diagram, &LexiconAuditor::new(lexicon.clone()))
}

/// One audit per node in diagram order, with counts folded from them.
pub fn audit_all_with(diagram: &FlowchartDiagram, auditor: &dyn NodeAuditor) -> CqlAuditReport {
    let node_audits: Vec<NodeAudit> = diagram.nodes.iter().map(|n| auditor.audit_node(n).enforce_contract()).collect();
    let counts = AuditCounts::from_audits(&node_audits);
    CqlAuditReport { pathway_name: diagram.pathway_name.clone(), node_audits, counts }
}
