//! Deterministic semantic checker: the critic that generated libraries must
//! satisfy before they are used.
//!
//! Checks run in a fixed order and the report is sorted by
//! `(check index, location)` so reports diff cleanly:
//!
//! 1. duplicate defines and declarations
//! 2. undefined identifiers and circular defines
//! 3. unknown includes
//! 4. unknown code systems
//! 5. attribute paths outside the per-resource whitelist
//! 6. type errors
//! 7. code pairs missing from the approved dictionary

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Serialize, Serializer};

use super::ast::*;
use crate::terminology::{TerminologyDictionary, REQUIRES_HUMAN_MAPPING};

pub const RECOMMENDED_ACTION: &str = "Recommended Action";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CheckCode {
    DupDefine,
    DupDeclaration,
    UndefinedIdent,
    CircularRef,
    UnknownInclude,
    UnknownCodesystem,
    BadPath,
    Type,
    HallucinatedCode,
    HumanMapping,
    ModelVersion,
}

impl CheckCode {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckCode::DupDefine => "E_DUP_DEFINE",
            CheckCode::DupDeclaration => "E_DUP_DECLARATION",
            CheckCode::UndefinedIdent => "E_UNDEFINED_IDENT",
            CheckCode::CircularRef => "E_CIRCULAR_REF",
            CheckCode::UnknownInclude => "E_UNKNOWN_INCLUDE",
            CheckCode::UnknownCodesystem => "E_UNKNOWN_CODESYSTEM",
            CheckCode::BadPath => "E_BAD_PATH",
            CheckCode::Type => "E_TYPE",
            CheckCode::HallucinatedCode => "E_HALLUCINATED_CODE",
            CheckCode::HumanMapping => "W_HUMAN_MAPPING",
            CheckCode::ModelVersion => "W_MODEL_VERSION",
        }
    }

    /// Position of the check in the fixed running order.
    pub fn check_index(self) -> u8 {
        match self {
            CheckCode::DupDefine | CheckCode::DupDeclaration => 1,
            CheckCode::UndefinedIdent | CheckCode::CircularRef => 2,
            CheckCode::UnknownInclude => 3,
            CheckCode::UnknownCodesystem => 4,
            CheckCode::BadPath => 5,
            CheckCode::Type => 6,
            CheckCode::HallucinatedCode => 7,
            CheckCode::HumanMapping | CheckCode::ModelVersion => 8,
        }
    }
}

impl fmt::Display for CheckCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for CheckCode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckIssue {
    pub code: CheckCode,
    pub message: String,
    #[serde(serialize_with = "location_string")]
    pub location: Location,
    /// The offending symbol: a define, code, alias or path.
    pub symbol: Option<String>,
    /// Enclosing define, when the issue sits inside one.
    pub define: Option<String>,
}

fn location_string<S: Serializer>(loc: &Location, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&loc.to_string())
}

impl fmt::Display for CheckIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.location, self.code, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub ok: bool,
    pub errors: Vec<CheckIssue>,
    pub warnings: Vec<CheckIssue>,
}

impl CheckReport {
    pub fn has(&self, code: CheckCode) -> bool {
        self.errors.iter().chain(&self.warnings).any(|i| i.code == code)
    }

    pub fn errors_with(&self, code: CheckCode) -> impl Iterator<Item = &CheckIssue> {
        self.errors.iter().filter(move |i| i.code == code)
    }

    /// Compiler-style text, one issue per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for issue in self.errors.iter().chain(&self.warnings) {
            out.push_str(&issue.to_string());
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Ty {
    Bool,
    Str,
    Num,
    Unknown,
}

impl Ty {
    fn name(self) -> &'static str {
        match self {
            Ty::Bool => "Boolean",
            Ty::Str => "String",
            Ty::Num => "Decimal",
            Ty::Unknown => "Any",
        }
    }

    fn is(self, want: Ty) -> bool {
        self == want || self == Ty::Unknown
    }
}

pub fn is_journey_define(name: &str) -> bool {
    name.strip_prefix("Journey_").is_some_and(|n| !n.is_empty() && n.chars().all(|c| c.is_ascii_digit()))
}

pub fn is_sentinel_name(name: &str) -> bool {
    name.contains(REQUIRES_HUMAN_MAPPING)
}

/// Type inference over one library's defines. Aliased references resolve
/// through `deps`; a `None` slot means the include did not resolve.
struct Typer<'l> {
    lib: &'l Library,
    deps: HashMap<&'l str, Typer<'l>>,
    memo: HashMap<&'l str, Ty>,
    visiting: HashSet<&'l str>,
}

struct TypeIssue {
    message: String,
    symbol: Option<String>,
}

impl<'l> Typer<'l> {
    fn new(lib: &'l Library, deps: HashMap<&'l str, Typer<'l>>) -> Self {
        Typer { lib, deps, memo: HashMap::new(), visiting: HashSet::new() }
    }

    fn define_type(&mut self, name: &str) -> Ty {
        let Some(def) = self.lib.define(name) else {
            return Ty::Unknown;
        };
        if let Some(t) = self.memo.get(def.name.as_str()) {
            return *t;
        }
        if !self.visiting.insert(def.name.as_str()) {
            return Ty::Unknown;
        }
        let t = self.ty(&def.expression, &mut None);
        self.visiting.remove(def.name.as_str());
        self.memo.insert(def.name.as_str(), t);
        t
    }

    fn expect(&mut self, e: &Expr, want: Ty, what: &str, sink: &mut Option<&mut Vec<TypeIssue>>) {
        let got = self.ty(e, sink);
        if !got.is(want) {
            if let Some(sink) = sink {
                sink.push(TypeIssue { message: format!("{what} must be {}, found {}", want.name(), got.name()), symbol: None });
            }
        }
    }

    fn ty(&mut self, e: &Expr, sink: &mut Option<&mut Vec<TypeIssue>>) -> Ty {
        match e {
            Expr::Bool(_) => Ty::Bool,
            Expr::Str(_) => Ty::Str,
            Expr::AgeInYears => Ty::Num,
            Expr::Ref { alias: None, name } => self.define_type(name),
            Expr::Ref { alias: Some(a), name } => match self.deps.get_mut(a.as_str()) {
                Some(dep) => dep.define_type(name),
                None => Ty::Unknown,
            },
            Expr::And(l, r) | Expr::Or(l, r) => {
                let op = if matches!(e, Expr::And(..)) { "and" } else { "or" };
                self.expect(l, Ty::Bool, &format!("left operand of `{op}`"), sink);
                self.expect(r, Ty::Bool, &format!("right operand of `{op}`"), sink);
                Ty::Bool
            }
            Expr::Not(inner) => {
                self.expect(inner, Ty::Bool, "operand of `not`", sink);
                Ty::Bool
            }
            Expr::If { cond, then, otherwise } => {
                self.expect(cond, Ty::Bool, "if condition", sink);
                let t = self.ty(then, sink);
                let o = self.ty(otherwise, sink);
                if t != Ty::Unknown && o != Ty::Unknown && t != o {
                    if let Some(sink) = sink {
                        sink.push(TypeIssue {
                            message: format!("if branches disagree: then is {}, else is {}", t.name(), o.name()),
                            symbol: None,
                        });
                    }
                }
                if t == Ty::Unknown {
                    o
                } else {
                    t
                }
            }
            Expr::Compare { left, op, right } => {
                let lt = self.ty(left, sink);
                let numeric = matches!(right, Literal::Number(_));
                if !(lt.is(Ty::Num) && numeric) {
                    if let Some(sink) = sink {
                        sink.push(TypeIssue {
                            message: format!("`{}` compares {} with a non-matching literal", op.symbol(), lt.name()),
                            symbol: None,
                        });
                    }
                }
                Ty::Bool
            }
            Expr::Exists(r) => {
                if let (Some(resource), Some(sink)) = (ResourceType::parse(&r.resource), sink.as_mut()) {
                    for f in &r.filters {
                        let Some(pt) = resource.attribute_type(&f.path) else {
                            continue;
                        };
                        let fits = matches!(
                            (pt, &f.value),
                            (PathType::Number, Literal::Number(_))
                                | (PathType::Date, Literal::Date(_))
                                | (PathType::Text, Literal::Text(_))
                        );
                        let ordered = pt != PathType::Text || matches!(f.op, CompareOp::Eq | CompareOp::Ne);
                        if !fits || !ordered {
                            sink.push(TypeIssue {
                                message: format!(
                                    "{}.{} cannot be compared with `{}` against this literal",
                                    r.resource,
                                    f.path,
                                    f.op.symbol()
                                ),
                                symbol: Some(f.path.clone()),
                            });
                        }
                    }
                }
                Ty::Bool
            }
        }
    }
}

struct Checker<'a> {
    lib: &'a Library,
    deps: &'a [Library],
    dict: &'a TerminologyDictionary,
    errors: Vec<CheckIssue>,
    warnings: Vec<CheckIssue>,
}

impl<'a> Checker<'a> {
    fn push(&mut self, code: CheckCode, location: Location, message: String, symbol: Option<&str>, define: Option<&str>) {
        let issue =
            CheckIssue { code, message, location, symbol: symbol.map(str::to_string), define: define.map(str::to_string) };
        if code.as_str().starts_with('W') {
            self.warnings.push(issue);
        } else {
            self.errors.push(issue);
        }
    }

    fn resolve_include(&self, inc: &IncludeDecl) -> Option<&'a Library> {
        self.deps.iter().find(|d| d.name == inc.name && d.version == inc.version)
    }

    fn duplicates(&mut self) {
        let lib = self.lib;
        let mut seen = HashSet::new();
        for d in &lib.defines {
            if !seen.insert(d.name.as_str()) {
                self.push(
                    CheckCode::DupDefine,
                    d.location,
                    format!("define \"{}\" is declared more than once", d.name),
                    Some(&d.name),
                    Some(&d.name),
                );
            }
        }
        let dup = |kind: &str, names: Vec<(&'a str, Location)>, this: &mut Self| {
            let mut seen = HashSet::new();
            for (name, loc) in names {
                if !seen.insert(name) {
                    this.push(
                        CheckCode::DupDeclaration,
                        loc,
                        format!("{kind} {name:?} is declared more than once"),
                        Some(name),
                        None,
                    );
                }
            }
        };
        dup("include alias", lib.includes.iter().map(|i| (i.alias.as_str(), i.location)).collect(), self);
        dup("codesystem", lib.codesystems.iter().map(|c| (c.name.as_str(), c.location)).collect(), self);
        dup("code", lib.codes.iter().map(|c| (c.name.as_str(), c.location)).collect(), self);
    }

    fn identifiers(&mut self) {
        let lib = self.lib;
        for d in &lib.defines {
            let mut missing = Vec::new();
            d.expression.walk(&mut |e| match e {
                Expr::Ref { alias: None, name } if lib.define(name).is_none() => {
                    missing.push(format!("\"{name}\""));
                }
                Expr::Ref { alias: Some(a), name } => {
                    let dep = lib.include_by_alias(a).and_then(|inc| self.resolve_include(inc));
                    if dep.is_some_and(|dep| dep.define(name).is_none()) {
                        missing.push(format!("{a}.\"{name}\""));
                    }
                }
                Expr::Exists(Retrieve { code_ref: Some(code), .. }) if lib.code(code).is_none() => {
                    missing.push(format!("code \"{code}\""))
                }
                _ => {}
            });
            for sym in missing {
                self.push(CheckCode::UndefinedIdent, d.location, format!("{sym} is not defined"), Some(&sym), Some(&d.name));
            }
        }
        self.cycles();
    }

    fn cycles(&mut self) {
        let lib = self.lib;
        let index: HashMap<&str, usize> = lib.defines.iter().enumerate().rev().map(|(i, d)| (d.name.as_str(), i)).collect();
        let edges: Vec<Vec<usize>> = lib
            .defines
            .iter()
            .map(|d| {
                let mut out = Vec::new();
                d.expression.walk(&mut |e| {
                    if let Expr::Ref { alias: None, name } = e {
                        if let Some(&j) = index.get(name.as_str()) {
                            out.push(j);
                        }
                    }
                });
                out
            })
            .collect();
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; edges.len()];
        let mut reported = HashSet::new();
        for root in 0..edges.len() {
            if state[root] != 0 {
                continue;
            }
            let mut stack = vec![(root, 0usize)];
            state[root] = 1;
            while let Some((u, next)) = stack.last_mut() {
                let u = *u;
                if let Some(&w) = edges[u].get(*next) {
                    *next += 1;
                    if state[w] == 1 && reported.insert(w) {
                        let d = &lib.defines[w];
                        self.push(
                            CheckCode::CircularRef,
                            d.location,
                            format!("define \"{}\" refers to itself through {}", d.name, lib.defines[u].name),
                            Some(&d.name),
                            Some(&d.name),
                        );
                    } else if state[w] == 0 {
                        state[w] = 1;
                        stack.push((w, 0));
                    }
                } else {
                    state[u] = 2;
                    stack.pop();
                }
            }
        }
    }

    fn includes(&mut self) {
        let lib = self.lib;
        for inc in &lib.includes {
            if self.resolve_include(inc).is_none() {
                self.push(
                    CheckCode::UnknownInclude,
                    inc.location,
                    format!("library {} version '{}' is not available", inc.name, inc.version),
                    Some(&inc.name),
                    None,
                );
            }
        }
        for d in &lib.defines {
            let mut unknown = Vec::new();
            d.expression.walk(&mut |e| {
                if let Expr::Ref { alias: Some(a), .. } = e {
                    if lib.include_by_alias(a).is_none() {
                        unknown.push(a.clone());
                    }
                }
            });
            unknown.dedup();
            for alias in unknown {
                self.push(
                    CheckCode::UnknownInclude,
                    d.location,
                    format!("alias {alias} does not name an include"),
                    Some(&alias),
                    Some(&d.name),
                );
            }
        }
    }

    fn codesystems(&mut self) {
        for c in &self.lib.codes {
            if self.lib.codesystem(&c.codesystem).is_none() {
                self.push(
                    CheckCode::UnknownCodesystem,
                    c.location,
                    format!("code \"{}\" uses undeclared codesystem \"{}\"", c.name, c.codesystem),
                    Some(&c.name),
                    None,
                );
            }
        }
    }

    fn paths(&mut self) {
        let lib = self.lib;
        for d in &lib.defines {
            let mut bad = Vec::new();
            d.expression.walk(&mut |e| {
                let Expr::Exists(r) = e else { return };
                let Some(resource) = ResourceType::parse(&r.resource) else {
                    bad.push((r.resource.clone(), format!("{} is not a supported resource type", r.resource)));
                    return;
                };
                if r.code_ref.is_some() && !resource.is_coded() {
                    bad.push((r.resource.clone(), format!("{resource} retrieves cannot filter by code")));
                }
                for f in &r.filters {
                    if resource.attribute_type(&f.path).is_none() {
                        bad.push((
                            format!("{resource}.{}", f.path),
                            format!("{resource}.{} is not a supported attribute path", f.path),
                        ));
                    }
                }
            });
            for (sym, msg) in bad {
                self.push(CheckCode::BadPath, d.location, msg, Some(&sym), Some(&d.name));
            }
        }
    }

    fn types(&mut self) {
        let lib = self.lib;
        let deps: HashMap<&str, Typer> = lib
            .includes
            .iter()
            .filter_map(|inc| self.resolve_include(inc).map(|dep| (inc.alias.as_str(), Typer::new(dep, HashMap::new()))))
            .collect();
        let mut typer = Typer::new(lib, deps);
        for d in &lib.defines {
            let mut issues = Vec::new();
            let t = typer.ty(&d.expression, &mut Some(&mut issues));
            if is_journey_define(&d.name) && !t.is(Ty::Bool) {
                issues.push(TypeIssue { message: format!("journey define must be Boolean, found {}", t.name()), symbol: None });
            }
            if d.name == RECOMMENDED_ACTION {
                let mut e = &d.expression;
                let mut outcomes = Vec::new();
                while let Expr::If { then, otherwise, .. } = e {
                    outcomes.push(then.as_ref());
                    e = otherwise;
                }
                outcomes.push(e);
                for outcome in outcomes {
                    let t = typer.ty(outcome, &mut None);
                    if !t.is(Ty::Str) {
                        issues.push(TypeIssue {
                            message: format!("recommended action outcomes must be String, found {}", t.name()),
                            symbol: None,
                        });
                    }
                }
            }
            for issue in issues {
                let symbol = issue.symbol.unwrap_or_else(|| d.name.clone());
                self.push(CheckCode::Type, d.location, issue.message, Some(&symbol), Some(&d.name));
            }
        }
    }

    fn terminology(&mut self) {
        let lib = self.lib;
        for c in &lib.codes {
            if is_sentinel_name(&c.name) {
                self.push(
                    CheckCode::HumanMapping,
                    c.location,
                    format!("code \"{}\" needs a human terminology mapping", c.name),
                    Some(&c.name),
                    None,
                );
                continue;
            }
            let Some(uri) = lib.code_system_uri(c) else { continue };
            if !self.dict.contains_pair(uri, &c.code) {
                self.push(
                    CheckCode::HallucinatedCode,
                    c.location,
                    format!("code '{}' from {uri} is not in the approved dictionary", c.code),
                    Some(&c.name),
                    None,
                );
            }
        }
        if lib.fhir_version.as_deref() != Some(FHIR_VERSION) {
            self.push(
                CheckCode::ModelVersion,
                Location::new(1, 1),
                format!("library should declare `using FHIR version '{FHIR_VERSION}'`"),
                None,
                None,
            );
        }
    }
}

/// Checks `lib` against its included libraries and the approved dictionary.
pub fn check_library(lib: &Library, deps: &[Library], dict: &TerminologyDictionary) -> CheckReport {
    let mut c = Checker { lib, deps, dict, errors: Vec::new(), warnings: Vec::new() };
    c.duplicates();
    c.identifiers();
    c.includes();
    c.codesystems();
    c.paths();
    c.types();
    c.terminology();

    let key = |i: &CheckIssue| (i.code.check_index(), i.location.key());
    c.errors.sort_by_key(key);
    c.warnings.sort_by_key(key);
    CheckReport { ok: c.errors.is_empty(), errors: c.errors, warnings: c.warnings }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_library;
    use super::*;

    fn dict() -> TerminologyDictionary {
        TerminologyDictionary::from_csv(
            "concept_term,system_uri,code,display\n\
             iron deficiency anaemia,http://snomed.info/sct,87522002,IDA\n",
        )
        .unwrap()
    }

    fn check(src: &str) -> CheckReport {
        check_library(&parse_library(src).unwrap(), &[], &dict())
    }

    fn codes(r: &CheckReport) -> Vec<&'static str> {
        r.errors.iter().map(|i| i.code.as_str()).collect()
    }

    const HEAD: &str = "library T version '1.0.0'\nusing FHIR version '4.0.1'\n\
                        codesystem \"SNOMED\": 'http://snomed.info/sct'\n";

    #[test]
    fn clean_library() {
        let r = check(&format!(
            "{HEAD}code \"ida\": '87522002' from \"SNOMED\"\n\
             define \"A\": exists([Condition: \"ida\"] R where R.onsetDateTime >= @2020-01-01)\n\
             define \"Journey_1\": \"A\" and AgeInYears() >= 40\n\
             define \"Recommended Action\": if \"Journey_1\" then 'Refer' else 'None'\n"
        ));
        assert!(r.ok, "{}", r.render());
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn undefined_identifier() {
        let r = check(&format!("{HEAD}define \"A\": \"Nope\"\n"));
        assert_eq!(codes(&r), ["E_UNDEFINED_IDENT"]);
        assert_eq!(r.errors[0].location.key(), (4, 1));
        assert!(!r.ok);
    }

    #[test]
    fn hallucinated_code() {
        let r = check(&format!(
            "{HEAD}code \"made up\": '99999999' from \"SNOMED\"\ndefine \"A\": exists([Condition: \"made up\"])\n"
        ));
        assert_eq!(codes(&r), ["E_HALLUCINATED_CODE"]);
        assert_eq!(r.errors[0].symbol.as_deref(), Some("made up"));
    }

    #[test]
    fn sentinel_code_is_a_warning() {
        let r = check(&format!(
            "{HEAD}codesystem \"PLACEHOLDER\": 'urn:pathwise:unmapped'\n\
             code \"REQUIRES_HUMAN_MAPPING_chest_pain\": 'UNMAPPED' from \"PLACEHOLDER\"\n\
             define \"A\": exists([Condition: \"REQUIRES_HUMAN_MAPPING_chest_pain\"])\n"
        ));
        assert!(r.ok, "{}", r.render());
        assert_eq!(r.warnings.len(), 1);
        assert_eq!(r.warnings[0].code, CheckCode::HumanMapping);
    }

    #[test]
    fn bad_paths() {
        let r = check(&format!("{HEAD}define \"A\": exists([Observation] R where R.flavor = 'x')\n"));
        assert_eq!(codes(&r), ["E_BAD_PATH"]);
        assert_eq!(r.errors[0].symbol.as_deref(), Some("Observation.flavor"));
        let r = check(&format!("{HEAD}define \"A\": exists([Encounter])\n"));
        assert_eq!(codes(&r), ["E_BAD_PATH"]);
    }

    #[test]
    fn type_errors() {
        let r = check(&format!("{HEAD}define \"J\": 'text' and true\n"));
        assert_eq!(codes(&r), ["E_TYPE"]);
        let r = check(&format!("{HEAD}define \"Journey_1\": 'text'\n"));
        assert_eq!(codes(&r), ["E_TYPE"]);
        let r = check(&format!(
            "{HEAD}define \"Journey_1\": true\ndefine \"Recommended Action\": if \"Journey_1\" then true else 'x'\n"
        ));
        assert_eq!(codes(&r), ["E_TYPE", "E_TYPE"]);
        let r = check(&format!("{HEAD}define \"A\": exists([Observation] R where R.value.value > 'ten')\n"));
        assert_eq!(codes(&r), ["E_TYPE"]);
        let r = check(&format!("{HEAD}define \"A\": exists([Patient] R where R.gender > 'f')\n"));
        assert_eq!(codes(&r), ["E_TYPE"]);
    }

    #[test]
    fn duplicates_includes_and_codesystems() {
        let r = check(&format!(
            "{HEAD}include Missing version '1' called M\ncode \"c\": '1' from \"Nowhere\"\n\
             define \"A\": true\ndefine \"A\": false\ndefine \"B\": X.\"y\"\n"
        ));
        assert_eq!(codes(&r), ["E_DUP_DEFINE", "E_UNKNOWN_INCLUDE", "E_UNKNOWN_INCLUDE", "E_UNKNOWN_CODESYSTEM"]);
    }

    #[test]
    fn circular_defines() {
        let r = check(&format!("{HEAD}define \"A\": \"B\"\ndefine \"B\": not \"A\"\n"));
        assert_eq!(codes(&r), ["E_CIRCULAR_REF"]);
    }

    #[test]
    fn resolves_through_includes() {
        let defs = parse_library(&format!("{HEAD}define \"S_Action\": true\ndefine \"E_Outcome\": 'Refer'\n")).unwrap();
        let routing = parse_library(
            "library R version '1.0.0'\nusing FHIR version '4.0.1'\n\
             include T version '1.0.0' called Defs\n\
             define \"Journey_1\": Defs.\"S_Action\"\n\
             define \"Recommended Action\": if \"Journey_1\" then Defs.\"E_Outcome\" else 'none'\n",
        )
        .unwrap();
        let r = check_library(&routing, std::slice::from_ref(&defs), &dict());
        assert!(r.ok, "{}", r.render());

        let bad = parse_library(
            "library R version '1.0.0'\nusing FHIR version '4.0.1'\n\
             include T version '1.0.0' called Defs\n\
             define \"Journey_1\": Defs.\"E_Outcome\" and Defs.\"Ghost\"\n",
        )
        .unwrap();
        let r = check_library(&bad, &[defs], &dict());
        assert_eq!(codes(&r), ["E_UNDEFINED_IDENT", "E_TYPE"]);
    }

    #[test]
    fn report_is_sorted_by_check_then_location() {
        let r = check(&format!("{HEAD}define \"A\": 'x' and true\ndefine \"B\": \"Nope\"\ndefine \"A\": true\n"));
        assert_eq!(codes(&r), ["E_DUP_DEFINE", "E_UNDEFINED_IDENT", "E_TYPE"]);
    }
}
