use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde_json::Value;
use thiserror::Error;

use super::*;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}: {message}")]
pub struct BundleError {
    pub path: String,
    pub message: String,
}

impl BundleError {
    pub fn code(&self) -> &'static str {
        "E_BUNDLE"
    }
}

fn err(path: impl Into<String>, message: impl Into<String>) -> BundleError {
    BundleError { path: path.into(), message: message.into() }
}

pub fn load_bundle(json: &str) -> Result<PatientRecord, BundleError> {
    let value: Value = serde_json::from_str(json).map_err(|e| err("$", format!("not valid JSON: {e}")))?;
    load_bundle_value(&value)
}

/// Maps a FHIR Bundle onto a [`PatientRecord`]. Unsupported resource types
/// are counted in `skipped_resources`.
pub fn load_bundle_value(value: &Value) -> Result<PatientRecord, BundleError> {
    let obj = value.as_object().ok_or_else(|| err("$", "bundle must be a JSON object"))?;
    if obj.get("resourceType").and_then(Value::as_str) != Some("Bundle") {
        return Err(err("$.resourceType", "resourceType must be \"Bundle\""));
    }
    let mut record = PatientRecord::default();
    let entries = match obj.get("entry") {
        None | Some(Value::Null) => return Ok(record),
        Some(Value::Array(a)) => a,
        Some(_) => return Err(err("$.entry", "entry must be an array")),
    };
    for (i, entry) in entries.iter().enumerate() {
        let path = format!("$.entry[{i}].resource");
        let Some(resource) = entry.get("resource") else {
            return Err(err(format!("$.entry[{i}]"), "entry has no resource"));
        };
        let Some(kind) = resource.get("resourceType").and_then(Value::as_str) else {
            return Err(err(format!("{path}.resourceType"), "resource has no resourceType"));
        };
        match kind {
            "Patient" => {
                if record.patient.is_some() {
                    return Err(err(path, "bundle contains more than one Patient"));
                }
                record.patient = Some(PatientInfo {
                    id: opt_str(resource, "id", &path)?,
                    birth_date: opt_date(resource, "birthDate", &path)?,
                    gender: opt_str(resource, "gender", &path)?,
                });
            }
            "Condition" => record.conditions.push(ConditionRecord {
                codings: codings(resource, &path)?,
                onset: opt_date(resource, "onsetDateTime", &path)?,
                clinical_status: match resource.get("clinicalStatus") {
                    None | Some(Value::Null) => None,
                    Some(cs) => first_code(cs).map(str::to_string),
                },
            }),
            "Observation" => {
                let (value, unit) = quantity(resource, &path)?;
                record.observations.push(ObservationRecord {
                    codings: codings(resource, &path)?,
                    value,
                    unit,
                    effective: opt_date(resource, "effectiveDateTime", &path)?,
                });
            }
            "Procedure" => record.procedures.push(ProcedureRecord {
                codings: codings(resource, &path)?,
                performed: opt_date(resource, "performedDateTime", &path)?,
            }),
            "ServiceRequest" => record.service_requests.push(ServiceRequestRecord {
                codings: codings(resource, &path)?,
                authored_on: opt_date(resource, "authoredOn", &path)?,
            }),
            _ => record.skipped_resources += 1,
        }
    }
    Ok(record)
}

fn opt_str(resource: &Value, field: &str, path: &str) -> Result<Option<String>, BundleError> {
    match resource.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(err(format!("{path}.{field}"), "must be a string")),
    }
}

fn opt_date(resource: &Value, field: &str, path: &str) -> Result<Option<NaiveDate>, BundleError> {
    let Some(text) = opt_str(resource, field, path)? else {
        return Ok(None);
    };
    parse_date(&text)
        .map(Some)
        .ok_or_else(|| err(format!("{path}.{field}"), format!("{text:?} is not an ISO-8601 date or datetime")))
}

/// Accepts `YYYY-MM-DD`, RFC 3339 datetimes and offset-free datetimes.
pub(crate) fn parse_date(text: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .ok()
        .or_else(|| DateTime::parse_from_rfc3339(text).ok().map(|d| d.date_naive()))
        .or_else(|| NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%S%.f").ok().map(|d| d.date()))
}

fn first_code(concept: &Value) -> Option<&str> {
    concept.get("coding")?.as_array()?.iter().find_map(|c| c.get("code").and_then(Value::as_str))
}

fn codings(resource: &Value, path: &str) -> Result<Vec<Coding>, BundleError> {
    let missing = || err(format!("{path}.code"), "resource has no coded code (code.coding[].system and code)");
    let list = resource.get("code").and_then(|c| c.get("coding")).and_then(Value::as_array).ok_or_else(missing)?;
    let out: Vec<Coding> = list
        .iter()
        .filter_map(|c| {
            Some(Coding { system: c.get("system")?.as_str()?.to_string(), code: c.get("code")?.as_str()?.to_string() })
        })
        .collect();
    if out.is_empty() {
        return Err(missing());
    }
    Ok(out)
}

fn quantity(resource: &Value, path: &str) -> Result<(Option<f64>, Option<String>), BundleError> {
    let q = match resource.get("valueQuantity") {
        None | Some(Value::Null) => return Ok((None, None)),
        Some(q @ Value::Object(_)) => q,
        Some(_) => return Err(err(format!("{path}.valueQuantity"), "must be an object")),
    };
    let value = match q.get("value") {
        None | Some(Value::Null) => None,
        Some(v) => Some(v.as_f64().ok_or_else(|| err(format!("{path}.valueQuantity.value"), "must be a number"))?),
    };
    let qpath = format!("{path}.valueQuantity");
    let unit = opt_str(q, "unit", &qpath)?.or(opt_str(q, "code", &qpath)?);
    Ok((value, unit))
}
