//! Approved terminology dictionary. Every code emitted by the generator must
//! come from here; anything else is surfaced with the human-mapping sentinel.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::normalize_term;

pub const REQUIRES_HUMAN_MAPPING: &str = "REQUIRES_HUMAN_MAPPING";
const HEADER: [&str; 4] = ["concept_term", "system_uri", "code", "display"];

#[derive(Debug, Error)]
pub enum TerminologyError {
    #[error("E_DICT_FORMAT: line {line}: {message}")]
    Format { line: u64, message: String },
    #[error("E_DICT_DUPLICATE: line {line}: {message}")]
    Duplicate { line: u64, message: String },
    #[error("E_DICT_FORMAT: cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl TerminologyError {
    pub fn code(&self) -> &'static str {
        match self {
            TerminologyError::Format { .. } | TerminologyError::Io { .. } => "E_DICT_FORMAT",
            TerminologyError::Duplicate { .. } => "E_DICT_DUPLICATE",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TerminologyEntry {
    pub concept_term: String,
    pub system_uri: String,
    pub code: String,
    pub display: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MatchResult {
    Matched(TerminologyEntry),
    Unmatched,
}

impl MatchResult {
    pub fn is_matched(&self) -> bool {
        matches!(self, MatchResult::Matched(_))
    }

    pub fn entry(&self) -> Option<&TerminologyEntry> {
        match self {
            MatchResult::Matched(e) => Some(e),
            MatchResult::Unmatched => None,
        }
    }

    pub fn sentinel(&self) -> Option<&'static str> {
        match self {
            MatchResult::Matched(_) => None,
            MatchResult::Unmatched => Some(REQUIRES_HUMAN_MAPPING),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TerminologyDictionary {
    entries: BTreeMap<String, TerminologyEntry>,
    pairs: HashSet<(String, String)>,
    pub source_path: String,
}

impl TerminologyDictionary {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, TerminologyError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|source| TerminologyError::Io { path: path.display().to_string(), source })?;
        let mut dict = Self::from_csv(&text)?;
        dict.source_path = path.display().to_string();
        Ok(dict)
    }

    /// Parses CSV with the header `concept_term,system_uri,code,display`.
    /// An empty document is a valid empty dictionary.
    pub fn from_csv(text: &str) -> Result<Self, TerminologyError> {
        let mut dict = TerminologyDictionary::default();
        if text.trim().is_empty() {
            return Ok(dict);
        }
        let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| format_error(1, e))?;
        if headers.iter().map(str::trim).ne(HEADER) {
            return Err(TerminologyError::Format { line: 1, message: format!("header must be {}", HEADER.join(",")) });
        }
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                format_error(line, e)
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let field = |i: usize| record.get(i).unwrap_or_default().trim().to_string();
            let entry = TerminologyEntry {
                concept_term: normalize_term(&field(0)),
                system_uri: field(1),
                code: field(2),
                display: field(3),
            };
            for (name, value) in [("concept_term", &entry.concept_term), ("system_uri", &entry.system_uri), ("code", &entry.code)]
            {
                if value.is_empty() {
                    return Err(TerminologyError::Format { line, message: format!("{name} is empty") });
                }
            }
            dict.insert(entry, line)?;
        }
        Ok(dict)
    }

    fn insert(&mut self, entry: TerminologyEntry, line: u64) -> Result<(), TerminologyError> {
        if self.entries.contains_key(&entry.concept_term) {
            return Err(TerminologyError::Duplicate {
                line,
                message: format!("concept_term {:?} already defined", entry.concept_term),
            });
        }
        let pair = (entry.system_uri.clone(), entry.code.clone());
        if !self.pairs.insert(pair) {
            return Err(TerminologyError::Duplicate {
                line,
                message: format!("{} | {} already defined", entry.system_uri, entry.code),
            });
        }
        self.entries.insert(entry.concept_term.clone(), entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &TerminologyEntry> {
        self.entries.values()
    }

    /// Exact match on the normalized concept term.
    pub fn lookup(&self, term: &str) -> MatchResult {
        match self.entries.get(&normalize_term(term)) {
            Some(e) => MatchResult::Matched(e.clone()),
            None => MatchResult::Unmatched,
        }
    }

    /// Byte-exact comparison of both system URI and code.
    pub fn contains_pair(&self, system_uri: &str, code: &str) -> bool {
        self.pairs.contains(&(system_uri.to_string(), code.to_string()))
    }

    /// Canonical CSV, entries sorted by concept term.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(HEADER).expect("write to Vec");
        for e in self.entries.values() {
            writer.write_record([&e.concept_term, &e.system_uri, &e.code, &e.display]).expect("write to Vec");
        }
        String::from_utf8(writer.into_inner().expect("flush Vec")).expect("utf-8 input")
    }
}

fn format_error(line: u64, e: csv::Error) -> TerminologyError {
    TerminologyError::Format { line, message: e.to_string() }
}
