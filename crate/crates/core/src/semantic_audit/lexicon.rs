use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cql::ast::ResourceType;
use crate::normalize_term;

const DEFAULT_LEXICON: &str = include_str!("../../data/default_lexicon.json");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid lexicon: {0}")]
    Invalid(String),
}

impl LexiconError {
    pub fn code(&self) -> &'static str {
        "E_LEXICON"
    }
}

/// Rule that turns a span of node text into a computable atom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ComputablePattern {
    /// `<alias> <comparator> <number> [unit]`, compiled to an Observation
    /// value filter.
    Quantity {
        concept: String,
        aliases: Vec<String>,
        unit: String,
        #[serde(default)]
        unit_required: bool,
    },
    /// Presence of a coded record, optionally negated.
    Concept { concept: String, phrases: Vec<String>, resource: String },
    /// Age comparisons such as `aged 40 and over`.
    Age { words: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditLexicon {
    pub ambiguity_terms: Vec<String>,
    pub complexity_terms: Vec<String>,
    pub urgency_colors: Vec<String>,
    #[serde(default)]
    pub vague_comparators: Vec<String>,
    #[serde(default)]
    pub negation_words: Vec<String>,
    /// Lookback windows longer than this many days count as complex.
    #[serde(default = "default_horizon")]
    pub lookback_horizon_days: u32,
    pub computable_patterns: Vec<ComputablePattern>,
}

fn default_horizon() -> u32 {
    90
}

impl Default for AuditLexicon {
    fn default() -> Self {
        AuditLexicon::from_json(DEFAULT_LEXICON).expect("bundled lexicon is valid")
    }
}

impl AuditLexicon {
    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    /// Parses and validates a lexicon, normalizing every phrase to lowercase
    /// single-spaced form.
    pub fn from_json(text: &str) -> Result<Self, LexiconError> {
        let mut lex: AuditLexicon = serde_json::from_str(text)?;
        lex.normalize();
        lex.validate()?;
        Ok(lex)
    }

    fn normalize(&mut self) {
        for list in [
            &mut self.ambiguity_terms,
            &mut self.complexity_terms,
            &mut self.urgency_colors,
            &mut self.vague_comparators,
            &mut self.negation_words,
        ] {
            for s in list.iter_mut() {
                *s = normalize_term(s);
            }
        }
        for p in &mut self.computable_patterns {
            let phrases = match p {
                ComputablePattern::Quantity { aliases, concept, .. } => {
                    *concept = normalize_term(concept);
                    aliases
                }
                ComputablePattern::Concept { phrases, concept, .. } => {
                    *concept = normalize_term(concept);
                    phrases
                }
                ComputablePattern::Age { words } => words,
            };
            for s in phrases.iter_mut() {
                *s = normalize_term(s);
            }
        }
    }

    fn validate(&self) -> Result<(), LexiconError> {
        let invalid = |m: String| Err(LexiconError::Invalid(m));
        let lists = [
            ("ambiguity_terms", &self.ambiguity_terms),
            ("complexity_terms", &self.complexity_terms),
            ("urgency_colors", &self.urgency_colors),
            ("vague_comparators", &self.vague_comparators),
            ("negation_words", &self.negation_words),
        ];
        for (name, list) in lists {
            if list.iter().any(String::is_empty) {
                return invalid(format!("{name} contains an empty entry"));
            }
        }
        for (i, p) in self.computable_patterns.iter().enumerate() {
            match p {
                ComputablePattern::Quantity { concept, aliases, unit, .. } => {
                    if concept.is_empty() || unit.trim().is_empty() {
                        return invalid(format!("computable_patterns[{i}] needs a concept and a unit"));
                    }
                    if aliases.is_empty() || aliases.iter().any(String::is_empty) {
                        return invalid(format!("computable_patterns[{i}] needs non-empty aliases"));
                    }
                }
                ComputablePattern::Concept { concept, phrases, resource } => {
                    if concept.is_empty() || phrases.is_empty() || phrases.iter().any(String::is_empty) {
                        return invalid(format!("computable_patterns[{i}] needs a concept and phrases"));
                    }
                    match ResourceType::parse(resource) {
                        Some(r) if r.is_coded() => {}
                        _ => {
                            return invalid(format!(
                                "computable_patterns[{i}] resource {resource:?} is not a coded resource type"
                            ))
                        }
                    }
                }
                ComputablePattern::Age { words } => {
                    if words.is_empty() || words.iter().any(String::is_empty) {
                        return invalid(format!("computable_patterns[{i}] needs non-empty words"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_urgency_color(&self, color: &str) -> bool {
        let color = normalize_term(color);
        self.urgency_colors.contains(&color)
    }
}
