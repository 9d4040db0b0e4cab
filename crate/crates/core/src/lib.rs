//! Clinical pathway flowcharts compiled into checked CQL-subset decision
//! libraries and served as CDS Hooks `patient-view` services.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`diagram`] ingests a schema-validated flowchart graph.
//! 2. [`graph_audit`] enumerates patient journeys by depth-first search.
//! 3. [`semantic_audit`] labels every node computable or not and records
//!    governance findings.
//! 4. [`codegen`] emits a terminology-constrained definitions library and a
//!    routing library, both verified by the [`cql`] checker.
//! 5. [`cds`] evaluates the routing library with [`fhir`] records and
//!    returns decision cards.
//!
//! [`pipeline`] wires the batch stages together and writes the artifacts.

pub mod cds;
pub mod codegen;
pub mod cql;
pub mod diagram;
pub mod fhir;
pub mod graph_audit;
pub mod pipeline;
pub mod semantic_audit;
pub mod terminology;
mod text;

pub use text::{normalize_term, slug};
