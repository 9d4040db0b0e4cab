//! Minimal FHIR R4 patient record model and the library interpreter.

mod bundle;
mod eval;

use chrono::{Datelike, NaiveDate};
use serde::Serialize;

pub use bundle::{load_bundle, load_bundle_value, BundleError};
pub use eval::{evaluate, evaluate_with, EvalError, EvalOptions, EvaluationResult, ReviewFlag, ReviewReason};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Coding {
    pub system: String,
    pub code: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PatientInfo {
    pub id: Option<String>,
    pub birth_date: Option<NaiveDate>,
    pub gender: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionRecord {
    pub codings: Vec<Coding>,
    pub onset: Option<NaiveDate>,
    pub clinical_status: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservationRecord {
    pub codings: Vec<Coding>,
    pub value: Option<f64>,
    pub unit: Option<String>,
    pub effective: Option<NaiveDate>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProcedureRecord {
    pub codings: Vec<Coding>,
    pub performed: Option<NaiveDate>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ServiceRequestRecord {
    pub codings: Vec<Coding>,
    pub authored_on: Option<NaiveDate>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PatientRecord {
    pub patient: Option<PatientInfo>,
    pub conditions: Vec<ConditionRecord>,
    pub observations: Vec<ObservationRecord>,
    pub procedures: Vec<ProcedureRecord>,
    pub service_requests: Vec<ServiceRequestRecord>,
    /// Bundle entries of resource types the model does not read.
    pub skipped_resources: usize,
}

impl PatientRecord {
    pub fn resource_count(&self) -> usize {
        usize::from(self.patient.is_some())
            + self.conditions.len()
            + self.observations.len()
            + self.procedures.len()
            + self.service_requests.len()
    }
}

/// Whole years from `birth` to `as_of`; negative when `birth` is later.
pub fn age_in_years(birth: NaiveDate, as_of: NaiveDate) -> i32 {
    let mut years = as_of.year() - birth.year();
    if (as_of.month(), as_of.day()) < (birth.month(), birth.day()) {
        years -= 1;
    }
    years
}
