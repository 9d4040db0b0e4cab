//! Python bindings. Results cross the boundary as plain dicts and lists
//! decoded from the same JSON the CLI emits.

use std::fmt::Display;
use std::path::PathBuf;

use chrono::NaiveDate;
use pathwise_core::cql::{check_library, parse_library, Library};
use pathwise_core::diagram::parse_diagram;
use pathwise_core::fhir::{evaluate as evaluate_record, load_bundle};
use pathwise_core::graph_audit::{audit_graph_with, EnumerationOptions};
use pathwise_core::pipeline::{run_pipeline as run, PipelineConfig};
use pathwise_core::terminology::TerminologyDictionary;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde_json::json;

create_exception!(pathwise, PathwiseError, PyException, "Raised with (code, message) arguments.");

fn fail(code: &str, message: impl Display) -> PyErr {
    PathwiseError::new_err((code.to_string(), message.to_string()))
}

fn to_py<'py>(py: Python<'py>, json: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (json,))
}

fn parse(source: &str) -> PyResult<Library> {
    parse_library(source).map_err(|e| fail(e.code(), e))
}

/// Runs the full pipeline and returns `{exit_code, slug, artifacts, failure}`.
/// Phase failures are reported in the result; only configuration errors raise.
#[pyfunction]
#[pyo3(signature = (diagram, terminology, out, journey_cap=None, version=None))]
fn run_pipeline<'py>(
    py: Python<'py>,
    diagram: PathBuf,
    terminology: PathBuf,
    out: PathBuf,
    journey_cap: Option<usize>,
    version: Option<String>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut config = PipelineConfig::new(diagram, terminology, out);
    if let Some(cap) = journey_cap {
        config.journey_cap = (cap > 0).then_some(cap);
    }
    if let Some(v) = version {
        config.library_version = v;
    }
    let outcome = py.detach(|| run(&config)).map_err(|e| fail("E_CONFIG", e))?;
    let doc = json!({
        "exit_code": outcome.exit_code(),
        "slug": outcome.slug,
        "artifacts": outcome.artifacts.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "failure": outcome.failure.as_ref().map(|f| json!({"phase": f.phase.as_str(), "code": f.code, "message": f.message})),
        "journey_count": outcome.journey_count,
    });
    to_py(py, &doc.to_string())
}

/// Graph audit of a diagram document (JSON text).
#[pyfunction]
#[pyo3(signature = (diagram_json, journey_cap=None))]
fn enumerate<'py>(py: Python<'py>, diagram_json: &str, journey_cap: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
    let diagram = parse_diagram(diagram_json).map_err(|e| fail(e.code(), e))?;
    let options = EnumerationOptions { journey_cap };
    let audit = audit_graph_with(&diagram, options).map_err(|e| fail(e.code(), e))?;
    to_py(py, &audit.to_json())
}

/// Static check of a CQL library against its dependencies and a dictionary.
#[pyfunction]
#[pyo3(signature = (source, terminology, deps=Vec::new()))]
fn check<'py>(py: Python<'py>, source: &str, terminology: PathBuf, deps: Vec<String>) -> PyResult<Bound<'py, PyAny>> {
    let dict = TerminologyDictionary::load(&terminology).map_err(|e| fail(e.code(), e))?;
    let deps = deps.iter().map(|d| parse(d)).collect::<PyResult<Vec<_>>>()?;
    let report = check_library(&parse(source)?, &deps, &dict);
    to_py(py, &serde_json::to_string(&report).expect("report serializes"))
}

/// Evaluates a patient bundle against compiled definitions and routing.
#[pyfunction]
fn evaluate<'py>(
    py: Python<'py>,
    definitions: &str,
    routing: &str,
    bundle_json: &str,
    as_of: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let as_of: NaiveDate = as_of.parse().map_err(|e| fail("E_REQUEST", format!("as_of: {e}")))?;
    let record = load_bundle(bundle_json).map_err(|e| fail(e.code(), e))?;
    let result = evaluate_record(&parse(definitions)?, &parse(routing)?, &record, as_of).map_err(|e| fail(e.code(), e))?;
    to_py(py, &serde_json::to_string(&result).expect("result serializes"))
}

#[pymodule]
fn pathwise(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PathwiseError", m.py().get_type::<PathwiseError>())?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
