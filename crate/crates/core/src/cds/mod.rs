//! CDS Hooks `patient-view` service over generated pathway libraries.
//!
//! [`invoke`] is the transport-free core: it maps a request body to a status
//! code and JSON response. [`router`] exposes it over HTTP.

mod card;
mod http;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

pub use card::{build_card, CardSource, CdsCard, Indicator, FALLBACK_DETAIL, MAX_SUMMARY_CHARS, REVIEW_PREFIX};
pub use http::{router, serve_on};

use crate::cql::ast::Library;
use crate::cql::checker::{check_library, is_journey_define};
use crate::cql::{extract_bindings, parse_library};
use crate::diagram::{parse_diagram, FlowchartDiagram};
use crate::fhir::{evaluate, load_bundle_value};
use crate::graph_audit::{enumerate_journeys, Journey};
use crate::semantic_audit::AuditLexicon;
use crate::terminology::TerminologyDictionary;

pub const HOOK: &str = "patient-view";
pub const DEFAULT_REFERRAL_PATTERN: &str = "refer";

#[derive(Debug, Error)]
pub enum CdsError {
    #[error("{dir}: {message}")]
    StartupCheck { dir: PathBuf, message: String },
}

impl CdsError {
    pub fn code(&self) -> &'static str {
        "E_STARTUP_CHECK"
    }
}

/// One served pathway. Immutable once registered.
#[derive(Clone, Debug)]
pub struct ServiceRegistration {
    pub service_id: String,
    pub title: String,
    pub description: String,
    pub defs: Library,
    pub routing: Library,
    pub diagram: FlowchartDiagram,
    /// Journeys in enumeration order; `Journey_n` is `journeys[n - 1]`.
    pub journeys: Vec<Journey>,
    pub urgency_colors: Vec<String>,
    /// Lowercase substring marking a terminal node as a referral.
    pub referral_pattern: String,
}

impl ServiceRegistration {
    pub fn journey(&self, define_name: &str) -> Option<&Journey> {
        let n: usize = define_name.strip_prefix("Journey_")?.parse().ok()?;
        self.journeys.get(n.checked_sub(1)?)
    }

    /// Re-checks a library pair against its diagram and dictionary.
    pub fn new(
        diagram: FlowchartDiagram,
        defs: Library,
        routing: Library,
        dictionary: &TerminologyDictionary,
        lexicon: &AuditLexicon,
    ) -> Result<ServiceRegistration, String> {
        let report = check_library(&defs, &[], dictionary);
        if !report.ok {
            return Err(format!("definitions library fails the checker:\n{}", report.render()));
        }
        let report = check_library(&routing, std::slice::from_ref(&defs), dictionary);
        if !report.ok {
            return Err(format!("routing library fails the checker:\n{}", report.render()));
        }
        extract_bindings(&defs).map_err(|e| e.to_string())?;
        let journeys = enumerate_journeys(&diagram).map_err(|e| e.to_string())?;
        let defined = routing.defines.iter().filter(|d| is_journey_define(&d.name)).count();
        if defined != journeys.len() {
            return Err(format!(
                "routing library has {defined} journey defines but the diagram enumerates {} journeys",
                journeys.len()
            ));
        }
        let service_id = crate::slug(&diagram.pathway_name);
        if service_id.is_empty() {
            return Err("pathway name yields an empty service id".into());
        }
        Ok(ServiceRegistration {
            title: diagram.pathway_name.clone(),
            description: format!(
                "Routes a patient through the {} pathway ({} journeys) from {}",
                diagram.pathway_name,
                journeys.len(),
                diagram.source_document
            ),
            service_id,
            defs,
            routing,
            diagram,
            journeys,
            urgency_colors: lexicon.urgency_colors.clone(),
            referral_pattern: DEFAULT_REFERRAL_PATTERN.to_string(),
        })
    }

    /// Loads `<name>_diagram.json`, `_definitions.cql`, `_routing.cql` and
    /// `_terminology.csv` from a pipeline output directory.
    pub fn from_artifacts(dir: &Path, lexicon: &AuditLexicon) -> Result<ServiceRegistration, CdsError> {
        let fail = |message: String| CdsError::StartupCheck { dir: dir.to_path_buf(), message };
        let entries = std::fs::read_dir(dir).map_err(|e| fail(format!("cannot read directory: {e}")))?;
        let mut prefixes: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix("_diagram.json")).map(str::to_string))
            .collect();
        prefixes.sort();
        let prefix = match prefixes.as_slice() {
            [one] => one.clone(),
            [] => return Err(fail("no *_diagram.json artifact".into())),
            many => return Err(fail(format!("several diagrams: {many:?}"))),
        };
        let read = |suffix: &str| {
            let path = dir.join(format!("{prefix}{suffix}"));
            std::fs::read_to_string(&path).map_err(|e| fail(format!("cannot read {}: {e}", path.display())))
        };
        let diagram = parse_diagram(&read("_diagram.json")?).map_err(|e| fail(e.to_string()))?;
        let defs = parse_library(&read("_definitions.cql")?).map_err(|e| fail(format!("definitions: {e}")))?;
        let routing = parse_library(&read("_routing.cql")?).map_err(|e| fail(format!("routing: {e}")))?;
        let dictionary = TerminologyDictionary::from_csv(&read("_terminology.csv")?).map_err(|e| fail(e.to_string()))?;
        ServiceRegistration::new(diagram, defs, routing, &dictionary, lexicon).map_err(fail)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Registry {
    services: BTreeMap<String, ServiceRegistration>,
}

#[derive(Clone, Debug, Serialize)]
struct ServiceDescriptor<'a> {
    id: &'a str,
    hook: &'static str,
    title: &'a str,
    description: &'a str,
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    pub fn register(&mut self, reg: ServiceRegistration) -> Result<(), String> {
        if self.services.contains_key(&reg.service_id) {
            return Err(format!("service id {:?} is registered twice", reg.service_id));
        }
        self.services.insert(reg.service_id.clone(), reg);
        Ok(())
    }

    pub fn from_artifact_dirs(dirs: &[PathBuf], lexicon: &AuditLexicon) -> Result<Registry, CdsError> {
        let mut registry = Registry::new();
        for dir in dirs {
            let reg = ServiceRegistration::from_artifacts(dir, lexicon)?;
            registry.register(reg).map_err(|message| CdsError::StartupCheck { dir: dir.clone(), message })?;
        }
        Ok(registry)
    }

    pub fn get(&self, id: &str) -> Option<&ServiceRegistration> {
        self.services.get(id)
    }

    pub fn len(&self) -> usize {
        self.services.len()
    }

    pub fn is_empty(&self) -> bool {
        self.services.is_empty()
    }

    /// Discovery document, services sorted by id.
    pub fn discovery(&self) -> Value {
        let services: Vec<ServiceDescriptor> = self
            .services
            .values()
            .map(|r| ServiceDescriptor { id: &r.service_id, hook: HOOK, title: &r.title, description: &r.description })
            .collect();
        json!({ "services": services })
    }
}

fn error_body(code: &str, message: impl Into<String>) -> Value {
    json!({ "error": message.into(), "code": code })
}

/// Handles one hook invocation. `receipt_date` is the evaluation date when
/// the request carries no `context.asOf`.
pub fn invoke(registry: &Registry, service_id: &str, body: &[u8], receipt_date: NaiveDate) -> (u16, Value) {
    let Some(reg) = registry.get(service_id) else {
        return (404, json!({ "error": "unknown service" }));
    };
    let request: Value = match serde_json::from_slice(body) {
        Ok(v @ Value::Object(_)) => v,
        Ok(_) => return (400, error_body("E_REQUEST", "request body must be a JSON object")),
        Err(e) => return (400, error_body("E_REQUEST", format!("request body is not JSON: {e}"))),
    };
    match request.get("hook").and_then(Value::as_str) {
        Some(HOOK) => {}
        Some(other) => return (422, error_body("E_HOOK", format!("service handles {HOOK:?}, not {other:?}"))),
        None => return (400, error_body("E_REQUEST", "request has no hook")),
    }
    let context = request.get("context");
    let Some(patient_id) = context.and_then(|c| c.get("patientId")).and_then(Value::as_str) else {
        return (400, error_body("E_REQUEST", "context.patientId is required"));
    };
    let as_of = match context.and_then(|c| c.get("asOf")) {
        None | Some(Value::Null) => receipt_date,
        Some(Value::String(s)) => match NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            Ok(d) => d,
            Err(_) => return (400, error_body("E_REQUEST", format!("context.asOf {s:?} is not YYYY-MM-DD"))),
        },
        Some(_) => return (400, error_body("E_REQUEST", "context.asOf must be a string")),
    };
    let Some(bundle) = request.get("prefetch").and_then(|p| p.get("patientBundle")) else {
        return (400, error_body("E_PREFETCH", "prefetch.patientBundle is required"));
    };
    let record = match load_bundle_value(bundle) {
        Ok(r) => r,
        Err(e) => return (400, error_body(e.code(), e.to_string())),
    };
    match evaluate(&reg.defs, &reg.routing, &record, as_of) {
        Ok(result) => {
            let card = build_card(&result, reg, Some(patient_id));
            (200, json!({ "cards": [card] }))
        }
        Err(e) => (500, error_body(e.code(), e.to_string())),
    }
}
