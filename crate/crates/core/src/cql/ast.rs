use std::fmt;

use chrono::NaiveDate;
use serde::Serialize;

/// Source position of a declaration (1-based). Positions are provenance, not
/// structure: any two locations compare equal, so a printed-and-reparsed
/// library is `==` to the tree it was printed from.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Location {
    pub line: u32,
    pub col: u32,
}

impl Location {
    pub fn new(line: u32, col: u32) -> Self {
        Location { line, col }
    }

    pub fn key(&self) -> (u32, u32) {
        (self.line, self.col)
    }
}

impl PartialEq for Location {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Library {
    pub name: String,
    pub version: String,
    /// Version of the `using FHIR` declaration, when present.
    pub fhir_version: Option<String>,
    pub includes: Vec<IncludeDecl>,
    pub codesystems: Vec<CodeSystemDecl>,
    pub codes: Vec<CodeDecl>,
    pub defines: Vec<Define>,
}

impl Library {
    pub fn new(name: impl Into<String>, version: impl Into<String>) -> Self {
        Library {
            name: name.into(),
            version: version.into(),
            fhir_version: Some(FHIR_VERSION.to_string()),
            includes: Vec::new(),
            codesystems: Vec::new(),
            codes: Vec::new(),
            defines: Vec::new(),
        }
    }

    pub fn define(&self, name: &str) -> Option<&Define> {
        self.defines.iter().find(|d| d.name == name)
    }

    pub fn code(&self, name: &str) -> Option<&CodeDecl> {
        self.codes.iter().find(|c| c.name == name)
    }

    pub fn codesystem(&self, name: &str) -> Option<&CodeSystemDecl> {
        self.codesystems.iter().find(|c| c.name == name)
    }

    pub fn include_by_alias(&self, alias: &str) -> Option<&IncludeDecl> {
        self.includes.iter().find(|i| i.alias == alias)
    }

    /// System URI a code declaration resolves to, if its codesystem exists.
    pub fn code_system_uri(&self, code: &CodeDecl) -> Option<&str> {
        self.codesystem(&code.codesystem).map(|cs| cs.uri.as_str())
    }
}

pub const FHIR_VERSION: &str = "4.0.1";

#[derive(Clone, Debug, PartialEq)]
pub struct IncludeDecl {
    pub name: String,
    pub version: String,
    pub alias: String,
    pub location: Location,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CodeSystemDecl {
    pub name: String,
    pub uri: String,
    pub location: Location,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CodeDecl {
    pub name: String,
    pub code: String,
    pub codesystem: String,
    pub display: Option<String>,
    pub location: Location,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Define {
    pub name: String,
    pub node_binding: Option<String>,
    /// Comment lines (without the `//` marker) printed above the define.
    pub leading_comment: Option<String>,
    pub expression: Expr,
    pub location: Location,
}

impl Define {
    pub fn new(name: impl Into<String>, expression: Expr) -> Self {
        Define { name: name.into(), node_binding: None, leading_comment: None, expression, location: Location::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ResourceType {
    Patient,
    Condition,
    Observation,
    Procedure,
    ServiceRequest,
}

impl ResourceType {
    pub const ALL: [ResourceType; 5] = [
        ResourceType::Patient,
        ResourceType::Condition,
        ResourceType::Observation,
        ResourceType::Procedure,
        ResourceType::ServiceRequest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ResourceType::Patient => "Patient",
            ResourceType::Condition => "Condition",
            ResourceType::Observation => "Observation",
            ResourceType::Procedure => "Procedure",
            ResourceType::ServiceRequest => "ServiceRequest",
        }
    }

    pub fn parse(s: &str) -> Option<ResourceType> {
        ResourceType::ALL.into_iter().find(|r| r.as_str() == s)
    }

    /// Attribute paths a where-clause may compare on.
    pub fn attributes(self) -> &'static [(&'static str, PathType)] {
        use PathType::*;
        match self {
            ResourceType::Patient => &[("birthDate", Date), ("gender", Text)],
            ResourceType::Condition => &[("code", Text), ("onsetDateTime", Date), ("clinicalStatus", Text)],
            ResourceType::Observation => {
                &[("code", Text), ("value.value", Number), ("value.unit", Text), ("effectiveDateTime", Date)]
            }
            ResourceType::Procedure => &[("code", Text), ("performedDateTime", Date)],
            ResourceType::ServiceRequest => &[("code", Text), ("authoredOn", Date)],
        }
    }

    pub fn attribute_type(self, path: &str) -> Option<PathType> {
        self.attributes().iter().find(|(p, _)| *p == path).map(|(_, t)| *t)
    }

    pub fn is_coded(self) -> bool {
        self != ResourceType::Patient
    }
}

impl fmt::Display for ResourceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathType {
    Text,
    Number,
    Date,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CompareOp::Eq => ord == Equal,
            CompareOp::Ne => ord != Equal,
            CompareOp::Lt => ord == Less,
            CompareOp::Le => ord != Greater,
            CompareOp::Gt => ord == Greater,
            CompareOp::Ge => ord != Less,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Literal {
    Bool(bool),
    Number(f64),
    Text(String),
    Date(NaiveDate),
}

/// One `<path> <op> <literal>` condition of a retrieve's where clause. Paths
/// are stored without the `R.` alias prefix.
#[derive(Clone, Debug, PartialEq)]
pub struct Filter {
    pub path: String,
    pub op: CompareOp,
    pub value: Literal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Retrieve {
    /// Resource type name as written; unsupported names are a checker error.
    pub resource: String,
    /// Local code declaration the retrieve filters on.
    pub code_ref: Option<String>,
    pub filters: Vec<Filter>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Bool(bool),
    Str(String),
    Ref {
        alias: Option<String>,
        name: String,
    },
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Exists(Retrieve),
    If {
        cond: Box<Expr>,
        then: Box<Expr>,
        otherwise: Box<Expr>,
    },
    /// `<left> <op> <literal>`; the parser only produces this with
    /// [`Expr::AgeInYears`] on the left.
    Compare {
        left: Box<Expr>,
        op: CompareOp,
        right: Literal,
    },
    AgeInYears,
}

impl Expr {
    pub fn local(name: impl Into<String>) -> Expr {
        Expr::Ref { alias: None, name: name.into() }
    }

    pub fn aliased(alias: impl Into<String>, name: impl Into<String>) -> Expr {
        Expr::Ref { alias: Some(alias.into()), name: name.into() }
    }

    /// Left-nested conjunction; `None` for an empty list.
    pub fn conjunction(items: impl IntoIterator<Item = Expr>) -> Option<Expr> {
        items.into_iter().reduce(|acc, e| Expr::And(Box::new(acc), Box::new(e)))
    }

    pub fn disjunction(items: impl IntoIterator<Item = Expr>) -> Option<Expr> {
        items.into_iter().reduce(|acc, e| Expr::Or(Box::new(acc), Box::new(e)))
    }

    /// Visits this expression and every sub-expression, parents first.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::And(l, r) | Expr::Or(l, r) => {
                l.walk(f);
                r.walk(f);
            }
            Expr::Not(e) => e.walk(f),
            Expr::If { cond, then, otherwise } => {
                cond.walk(f);
                then.walk(f);
                otherwise.walk(f);
            }
            Expr::Compare { left, .. } => left.walk(f),
            Expr::Bool(_) | Expr::Str(_) | Expr::Ref { .. } | Expr::Exists(_) | Expr::AgeInYears => {}
        }
    }

    pub fn walk_mut(&mut self, f: &mut dyn FnMut(&mut Expr)) {
        f(self);
        match self {
            Expr::And(l, r) | Expr::Or(l, r) => {
                l.walk_mut(f);
                r.walk_mut(f);
            }
            Expr::Not(e) => e.walk_mut(f),
            Expr::If { cond, then, otherwise } => {
                cond.walk_mut(f);
                then.walk_mut(f);
                otherwise.walk_mut(f);
            }
            Expr::Compare { left, .. } => left.walk_mut(f),
            Expr::Bool(_) | Expr::Str(_) | Expr::Ref { .. } | Expr::Exists(_) | Expr::AgeInYears => {}
        }
    }

    /// Local code names referenced by retrieves in this expression.
    pub fn code_refs(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Exists(r) = e {
                if let Some(c) = &r.code_ref {
                    out.push(c.as_str());
                }
            }
        });
        out
    }
}
