use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use chrono::NaiveDate;
use serde::Serialize;
use thiserror::Error;

use super::{
    age_in_years, Coding, ConditionRecord, ObservationRecord, PatientInfo, PatientRecord, ProcedureRecord, ServiceRequestRecord,
};
use crate::cql::ast::{Expr, Filter, Library, Literal, ResourceType, Retrieve};
use crate::cql::checker::{is_journey_define, is_sentinel_name, RECOMMENDED_ACTION};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("type error: {0}")]
    Type(String),
    #[error("unresolved reference: {0}")]
    Reference(String),
}

impl EvalError {
    pub fn code(&self) -> &'static str {
        match self {
            EvalError::Type(_) => "E_EVAL_TYPE",
            EvalError::Reference(_) => "E_EVAL_REF",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalOptions {
    /// Cache each define's value per library for the duration of one call.
    pub memoize: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { memoize: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewReason {
    UncomputablePlaceholder,
    UnmappedTerminology,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ReviewFlag {
    pub node_id: String,
    pub reason: ReviewReason,
    /// The placeholder define or the sentinel code name.
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationResult {
    pub recommended_action: String,
    pub matched_journey: Option<String>,
    pub journey_values: BTreeMap<String, bool>,
    pub review_flags: Vec<ReviewFlag>,
    pub as_of: NaiveDate,
}

#[derive(Clone, Debug, PartialEq)]
enum Value {
    Bool(bool),
    Str(String),
    Num(f64),
    Null,
}

impl Value {
    fn describe(&self) -> &'static str {
        match self {
            Value::Bool(_) => "Boolean",
            Value::Str(_) => "String",
            Value::Num(_) => "Decimal",
            Value::Null => "null",
        }
    }
}

enum Field<'r> {
    Num(f64),
    Text(&'r str),
    Date(NaiveDate),
}

const DEFS: usize = 0;
const ROUTING: usize = 1;

struct Evaluator<'a> {
    libs: [&'a Library; 2],
    defs_alias: &'a str,
    record: &'a PatientRecord,
    as_of: NaiveDate,
    options: EvalOptions,
    memo: HashMap<(usize, &'a str), Value>,
    active: HashSet<(usize, &'a str)>,
    tracing: bool,
    trace: BTreeSet<(usize, &'a str)>,
}

impl<'a> Evaluator<'a> {
    fn define(&mut self, lib: usize, name: &str) -> Result<Value, EvalError> {
        let library = self.libs[lib];
        let Some(def) = library.define(name) else {
            return Err(EvalError::Reference(format!("{}.\"{name}\"", library.name)));
        };
        let key = (lib, def.name.as_str());
        if self.tracing {
            self.trace.insert(key);
        }
        if let Some(v) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        if !self.active.insert(key) {
            return Err(EvalError::Reference(format!("\"{name}\" refers to itself")));
        }
        let result = self.eval(lib, &def.expression);
        self.active.remove(&key);
        let v = result?;
        if self.options.memoize {
            self.memo.insert(key, v.clone());
        }
        Ok(v)
    }

    fn truth(&mut self, lib: usize, e: &Expr) -> Result<bool, EvalError> {
        match self.eval(lib, e)? {
            Value::Bool(b) => Ok(b),
            other => Err(EvalError::Type(format!("expected Boolean, found {}", other.describe()))),
        }
    }

    fn eval(&mut self, lib: usize, e: &Expr) -> Result<Value, EvalError> {
        Ok(match e {
            Expr::Bool(b) => Value::Bool(*b),
            Expr::Str(s) => Value::Str(s.clone()),
            Expr::Ref { alias: None, name } => self.define(lib, name)?,
            Expr::Ref { alias: Some(alias), name } => {
                if lib != ROUTING || alias != self.defs_alias {
                    return Err(EvalError::Reference(format!("{alias}.\"{name}\"")));
                }
                self.define(DEFS, name)?
            }
            // Strict: both operands are always evaluated.
            Expr::And(l, r) => {
                let (l, r) = (self.truth(lib, l)?, self.truth(lib, r)?);
                Value::Bool(l && r)
            }
            Expr::Or(l, r) => {
                let (l, r) = (self.truth(lib, l)?, self.truth(lib, r)?);
                Value::Bool(l || r)
            }
            Expr::Not(inner) => Value::Bool(!self.truth(lib, inner)?),
            Expr::If { .. } => {
                let mut e = e;
                while let Expr::If { cond, then, otherwise } = e {
                    if self.truth(lib, cond)? {
                        return self.eval(lib, then);
                    }
                    e = otherwise;
                }
                self.eval(lib, e)?
            }
            Expr::Compare { left, op, right } => match (self.eval(lib, left)?, right) {
                (Value::Null, _) => Value::Bool(false),
                (Value::Num(l), Literal::Number(r)) => Value::Bool(l.partial_cmp(r).is_some_and(|ord| op.holds(ord))),
                (l, _) => {
                    return Err(EvalError::Type(format!(
                        "cannot compare {} with {}",
                        l.describe(),
                        crate::cql::printer::print_literal(right)
                    )))
                }
            },
            Expr::AgeInYears => match self.record.patient.as_ref().and_then(|p| p.birth_date) {
                Some(birth) => Value::Num(f64::from(age_in_years(birth, self.as_of))),
                None => Value::Null,
            },
            Expr::Exists(r) => Value::Bool(self.exists(lib, r)?),
        })
    }

    fn exists(&mut self, lib: usize, r: &Retrieve) -> Result<bool, EvalError> {
        let resource =
            ResourceType::parse(&r.resource).ok_or_else(|| EvalError::Reference(format!("resource type {}", r.resource)))?;
        let coding = match &r.code_ref {
            None => None,
            // an unmapped concept has no real code, so nothing can match it
            Some(name) if is_sentinel_name(name) => return Ok(false),
            Some(name) => {
                let library = self.libs[lib];
                let code = library.code(name).ok_or_else(|| EvalError::Reference(format!("code \"{name}\"")))?;
                let system = library
                    .code_system_uri(code)
                    .ok_or_else(|| EvalError::Reference(format!("codesystem \"{}\"", code.codesystem)))?;
                Some(Coding { system: system.to_string(), code: code.code.clone() })
            }
        };
        let coded = |codings: &[Coding]| coding.as_ref().is_none_or(|c| codings.contains(c));
        let rec = self.record;
        let candidates: Vec<Res<'_>> = match resource {
            ResourceType::Patient => rec.patient.iter().filter(|_| coding.is_none()).map(Res::Patient).collect(),
            ResourceType::Condition => rec.conditions.iter().filter(|c| coded(&c.codings)).map(Res::Condition).collect(),
            ResourceType::Observation => rec.observations.iter().filter(|o| coded(&o.codings)).map(Res::Observation).collect(),
            ResourceType::Procedure => rec.procedures.iter().filter(|p| coded(&p.codings)).map(Res::Procedure).collect(),
            ResourceType::ServiceRequest => {
                rec.service_requests.iter().filter(|s| coded(&s.codings)).map(Res::ServiceRequest).collect()
            }
        };
        for res in candidates {
            let mut all = true;
            for f in &r.filters {
                if !filter_holds(res.field(&f.path), f)? {
                    all = false;
                    break;
                }
            }
            if all {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

#[derive(Clone, Copy)]
enum Res<'r> {
    Patient(&'r PatientInfo),
    Condition(&'r ConditionRecord),
    Observation(&'r ObservationRecord),
    Procedure(&'r ProcedureRecord),
    ServiceRequest(&'r ServiceRequestRecord),
}

impl<'r> Res<'r> {
    fn field(self, path: &str) -> Option<Field<'r>> {
        let first_code = |codings: &'r [Coding]| codings.first().map(|c| Field::Text(c.code.as_str()));
        match (self, path) {
            (Res::Patient(p), "birthDate") => p.birth_date.map(Field::Date),
            (Res::Patient(p), "gender") => p.gender.as_deref().map(Field::Text),
            (Res::Condition(c), "code") => first_code(&c.codings),
            (Res::Condition(c), "onsetDateTime") => c.onset.map(Field::Date),
            (Res::Condition(c), "clinicalStatus") => c.clinical_status.as_deref().map(Field::Text),
            (Res::Observation(o), "code") => first_code(&o.codings),
            (Res::Observation(o), "value.value") => o.value.map(Field::Num),
            (Res::Observation(o), "value.unit") => o.unit.as_deref().map(Field::Text),
            (Res::Observation(o), "effectiveDateTime") => o.effective.map(Field::Date),
            (Res::Procedure(p), "code") => first_code(&p.codings),
            (Res::Procedure(p), "performedDateTime") => p.performed.map(Field::Date),
            (Res::ServiceRequest(s), "code") => first_code(&s.codings),
            (Res::ServiceRequest(s), "authoredOn") => s.authored_on.map(Field::Date),
            _ => None,
        }
    }
}

/// A missing field fails every comparison.
fn filter_holds(field: Option<Field<'_>>, f: &Filter) -> Result<bool, EvalError> {
    let ord: Option<Ordering> = match (field, &f.value) {
        (None, _) => return Ok(false),
        (Some(Field::Num(a)), Literal::Number(b)) => a.partial_cmp(b),
        (Some(Field::Text(a)), Literal::Text(b)) => Some(a.cmp(b.as_str())),
        (Some(Field::Date(a)), Literal::Date(b)) => Some(a.cmp(b)),
        _ => {
            return Err(EvalError::Type(format!(
                "R.{} {} {} compares different types",
                f.path,
                f.op.symbol(),
                crate::cql::printer::print_literal(&f.value)
            )))
        }
    };
    Ok(ord.is_some_and(|o| f.op.holds(o)))
}

pub fn evaluate(
    defs: &Library,
    routing: &Library,
    record: &PatientRecord,
    as_of: NaiveDate,
) -> Result<EvaluationResult, EvalError> {
    evaluate_with(defs, routing, record, as_of, EvalOptions::default())
}

/// Evaluates `Recommended Action` (recording which defines it touches, for
/// review flags), then every journey define.
pub fn evaluate_with(
    defs: &Library,
    routing: &Library,
    record: &PatientRecord,
    as_of: NaiveDate,
    options: EvalOptions,
) -> Result<EvaluationResult, EvalError> {
    let include = routing
        .includes
        .iter()
        .find(|i| i.name == defs.name && i.version == defs.version)
        .ok_or_else(|| EvalError::Reference(format!("routing does not include {} version '{}'", defs.name, defs.version)))?;
    let action = routing.define(RECOMMENDED_ACTION).ok_or_else(|| EvalError::Reference(format!("\"{RECOMMENDED_ACTION}\"")))?;

    let mut ev = Evaluator {
        libs: [defs, routing],
        defs_alias: &include.alias,
        record,
        as_of,
        options,
        memo: HashMap::new(),
        active: HashSet::new(),
        tracing: true,
        trace: BTreeSet::new(),
    };
    ev.trace.insert((ROUTING, RECOMMENDED_ACTION));

    let mut matched_journey = None;
    let mut e = &action.expression;
    let outcome = loop {
        match e {
            Expr::If { cond, then, otherwise } => {
                if ev.truth(ROUTING, cond)? {
                    if let Expr::Ref { alias: None, name } = cond.as_ref() {
                        matched_journey = Some(name.clone());
                    }
                    break ev.eval(ROUTING, then)?;
                }
                e = otherwise;
            }
            other => break ev.eval(ROUTING, other)?,
        }
    };
    let recommended_action = match outcome {
        Value::Str(s) => s,
        other => return Err(EvalError::Type(format!("\"{RECOMMENDED_ACTION}\" produced {}, expected String", other.describe()))),
    };
    ev.tracing = false;

    let mut journey_values = BTreeMap::new();
    for d in routing.defines.iter().filter(|d| is_journey_define(&d.name)) {
        match ev.define(ROUTING, &d.name)? {
            Value::Bool(b) => journey_values.insert(d.name.clone(), b),
            other => return Err(EvalError::Type(format!("\"{}\" is {}", d.name, other.describe()))),
        };
    }

    let mut review_flags = Vec::new();
    let mut sentinels: BTreeMap<&str, &str> = BTreeMap::new();
    for &(lib, name) in &ev.trace {
        if lib != DEFS {
            continue;
        }
        let Some(d) = defs.define(name) else { continue };
        let Some(node) = d.node_binding.as_deref() else {
            continue;
        };
        if d.expression == Expr::Bool(false) {
            review_flags.push(ReviewFlag {
                node_id: node.to_string(),
                reason: ReviewReason::UncomputablePlaceholder,
                detail: d.name.clone(),
            });
        }
        for code in d.expression.code_refs() {
            if is_sentinel_name(code) {
                let slot = sentinels.entry(code).or_insert(node);
                if node < *slot {
                    *slot = node;
                }
            }
        }
    }
    review_flags.extend(sentinels.into_iter().map(|(code, node)| ReviewFlag {
        node_id: node.to_string(),
        reason: ReviewReason::UnmappedTerminology,
        detail: code.to_string(),
    }));
    review_flags.sort_by(|a, b| (a.reason, &a.node_id, &a.detail).cmp(&(b.reason, &b.node_id, &b.detail)));

    Ok(EvaluationResult { recommended_action, matched_journey, journey_values, review_flags, as_of })
}
