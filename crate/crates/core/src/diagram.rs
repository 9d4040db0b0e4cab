//! Typed flowchart graph and the admissibility checks applied on ingestion.
//!
//! A diagram document is accepted only if every field validates; there is no
//! partial result. Errors carry a JSON path to the offending field and a
//! stable reason code.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeType {
    StartBlock,
    EndBlock,
    CriteriaBlock,
    ActionBlock,
    DecisionDiamond,
    ProcessBlock,
    Annotation,
    Other,
}

impl NodeType {
    pub const ALL: [NodeType; 8] = [
        NodeType::StartBlock,
        NodeType::EndBlock,
        NodeType::CriteriaBlock,
        NodeType::ActionBlock,
        NodeType::DecisionDiamond,
        NodeType::ProcessBlock,
        NodeType::Annotation,
        NodeType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeType::StartBlock => "start_block",
            NodeType::EndBlock => "end_block",
            NodeType::CriteriaBlock => "criteria_block",
            NodeType::ActionBlock => "action_block",
            NodeType::DecisionDiamond => "decision_diamond",
            NodeType::ProcessBlock => "process_block",
            NodeType::Annotation => "annotation",
            NodeType::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<NodeType> {
        NodeType::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FontWeight {
    Normal,
    Bold,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TextCase {
    Mixed,
    Upper,
    Lower,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VisualAttributes {
    pub background_color: String,
    pub border_color: String,
    pub font_weight: FontWeight,
    pub text_case: TextCase,
}

impl Default for VisualAttributes {
    fn default() -> Self {
        VisualAttributes {
            background_color: "white".to_string(),
            border_color: "black".to_string(),
            font_weight: FontWeight::Normal,
            text_case: TextCase::Mixed,
        }
    }
}

/// Normalized center coordinates and box dimensions, each in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowNode {
    pub id: String,
    pub node_type: NodeType,
    pub bbox: BoundingBox,
    pub visual: VisualAttributes,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct FlowEdge {
    pub source: String,
    pub target: String,
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowchartDiagram {
    pub pathway_name: String,
    pub source_document: String,
    pub pages: u32,
    pub nodes: Vec<FlowNode>,
    pub edges: Vec<FlowEdge>,
}

impl FlowchartDiagram {
    pub fn node(&self, id: &str) -> Option<&FlowNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Node lookup table keyed by id.
    pub fn node_index(&self) -> HashMap<&str, &FlowNode> {
        self.nodes.iter().map(|n| (n.id.as_str(), n)).collect()
    }

    /// Canonical pretty-printed JSON (the `*_diagram.json` artifact).
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("diagram serializes");
        s.push('\n');
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaReason {
    UnknownNodeType,
    BboxOutOfRange,
    DanglingEdge,
    DuplicateNodeId,
    DuplicateEdge,
    MissingField,
    UnknownKey,
    InvalidType,
    InvalidValue,
    EmptyDiagram,
    EmptyText,
}

impl fmt::Display for SchemaReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("reason serializes");
        f.write_str(s.as_str().unwrap_or_default())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagramError {
    #[error("E_MALFORMED_JSON: {0}")]
    MalformedJson(String),
    #[error("E_SCHEMA at {path}: {reason}: {message}")]
    Schema { path: String, reason: SchemaReason, message: String },
    #[error("E_BACKEND_UNKNOWN: no extractor registered as {0:?}")]
    BackendUnknown(String),
}

impl DiagramError {
    pub fn code(&self) -> &'static str {
        match self {
            DiagramError::MalformedJson(_) => "E_MALFORMED_JSON",
            DiagramError::Schema { .. } => "E_SCHEMA",
            DiagramError::BackendUnknown(_) => "E_BACKEND_UNKNOWN",
        }
    }

    pub fn schema_reason(&self) -> Option<SchemaReason> {
        match self {
            DiagramError::Schema { reason, .. } => Some(*reason),
            _ => None,
        }
    }
}

fn schema(path: impl Into<String>, reason: SchemaReason, message: impl Into<String>) -> DiagramError {
    DiagramError::Schema { path: path.into(), reason, message: message.into() }
}

/// Parses and validates a diagram document.
pub fn parse_diagram(document: &str) -> Result<FlowchartDiagram, DiagramError> {
    let value: Value = serde_json::from_str(document).map_err(|e| DiagramError::MalformedJson(e.to_string()))?;
    diagram_from_value(&value)
}

/// Validates an already-parsed JSON value.
pub fn diagram_from_value(value: &Value) -> Result<FlowchartDiagram, DiagramError> {
    let root = as_object(value, "$")?;
    reject_unknown_keys(root, "$", &["pathway_name", "source_document", "pages", "nodes", "edges"])?;

    let pathway_name = required_str(root, "$", "pathway_name")?;
    if pathway_name.trim().is_empty() {
        return Err(schema("$.pathway_name", SchemaReason::InvalidValue, "must not be empty"));
    }
    let source_document = required_str(root, "$", "source_document")?;
    let pages = match required(root, "$", "pages")?.as_u64() {
        Some(p) if p >= 1 && p <= u32::MAX as u64 => p as u32,
        _ => return Err(schema("$.pages", SchemaReason::InvalidValue, "must be a positive integer")),
    };

    let raw_nodes = required_array(root, "$", "nodes")?;
    if raw_nodes.is_empty() {
        return Err(schema("$.nodes", SchemaReason::EmptyDiagram, "at least one node is required"));
    }
    let mut nodes = Vec::with_capacity(raw_nodes.len());
    let mut seen = HashSet::new();
    for (i, raw) in raw_nodes.iter().enumerate() {
        let path = format!("$.nodes[{i}]");
        let node = parse_node(raw, &path)?;
        if !seen.insert(node.id.clone()) {
            return Err(schema(
                format!("{path}.id"),
                SchemaReason::DuplicateNodeId,
                format!("node id {:?} appears more than once", node.id),
            ));
        }
        nodes.push(node);
    }

    let raw_edges = required_array(root, "$", "edges")?;
    let mut edges = Vec::with_capacity(raw_edges.len());
    let mut seen_edges = HashSet::new();
    for (i, raw) in raw_edges.iter().enumerate() {
        let path = format!("$.edges[{i}]");
        let edge = parse_edge(raw, &path)?;
        for (field, id) in [("source", &edge.source), ("target", &edge.target)] {
            if !seen.contains(id) {
                return Err(schema(format!("{path}.{field}"), SchemaReason::DanglingEdge, format!("node {id:?} does not exist")));
            }
        }
        if !seen_edges.insert(edge.clone()) {
            return Err(schema(path, SchemaReason::DuplicateEdge, format!("edge {} -> {} repeats", edge.source, edge.target)));
        }
        edges.push(edge);
    }

    Ok(FlowchartDiagram { pathway_name, source_document, pages, nodes, edges })
}

fn parse_node(raw: &Value, path: &str) -> Result<FlowNode, DiagramError> {
    let obj = as_object(raw, path)?;
    reject_unknown_keys(obj, path, &["id", "node_type", "bbox", "visual", "text"])?;

    let id = required_str(obj, path, "id")?;
    if !valid_node_id(&id) {
        return Err(schema(
            format!("{path}.id"),
            SchemaReason::InvalidValue,
            "ids are non-empty and use only letters, digits, '_', '-' and '.'",
        ));
    }

    let type_str = required_str(obj, path, "node_type")?;
    let node_type = NodeType::parse(&type_str).ok_or_else(|| {
        schema(
            format!("{path}.node_type"),
            SchemaReason::UnknownNodeType,
            format!("{type_str:?} is not in the node type vocabulary"),
        )
    })?;

    let bbox_path = format!("{path}.bbox");
    let bbox_obj = as_object(required(obj, path, "bbox")?, &bbox_path)?;
    reject_unknown_keys(bbox_obj, &bbox_path, &["x", "y", "w", "h"])?;
    let mut coords = [0.0; 4];
    for (slot, key) in coords.iter_mut().zip(["x", "y", "w", "h"]) {
        let v = required(bbox_obj, &bbox_path, key)?;
        let n = v.as_f64().ok_or_else(|| schema(format!("{bbox_path}.{key}"), SchemaReason::InvalidType, "expected a number"))?;
        if !(0.0..=1.0).contains(&n) {
            return Err(schema(format!("{bbox_path}.{key}"), SchemaReason::BboxOutOfRange, format!("{n} is outside [0, 1]")));
        }
        *slot = n;
    }
    let bbox = BoundingBox { x: coords[0], y: coords[1], w: coords[2], h: coords[3] };

    let visual = match obj.get("visual") {
        None | Some(Value::Null) => VisualAttributes::default(),
        Some(v) => parse_visual(v, &format!("{path}.visual"))?,
    };

    let text = required_str(obj, path, "text")?;
    if text.trim().is_empty() && node_type != NodeType::Other {
        return Err(schema(format!("{path}.text"), SchemaReason::EmptyText, format!("{node_type} nodes need a label")));
    }

    Ok(FlowNode { id, node_type, bbox, visual, text })
}

fn parse_visual(raw: &Value, path: &str) -> Result<VisualAttributes, DiagramError> {
    let obj = as_object(raw, path)?;
    reject_unknown_keys(obj, path, &["background_color", "border_color", "font_weight", "text_case"])?;
    let mut visual = VisualAttributes::default();
    if let Some(c) = optional_str(obj, path, "background_color")? {
        visual.background_color = color(&c, &format!("{path}.background_color"))?;
    }
    if let Some(c) = optional_str(obj, path, "border_color")? {
        visual.border_color = color(&c, &format!("{path}.border_color"))?;
    }
    if let Some(w) = optional_str(obj, path, "font_weight")? {
        visual.font_weight = match w.as_str() {
            "normal" => FontWeight::Normal,
            "bold" => FontWeight::Bold,
            _ => return Err(schema(format!("{path}.font_weight"), SchemaReason::InvalidValue, "expected normal or bold")),
        };
    }
    if let Some(c) = optional_str(obj, path, "text_case")? {
        visual.text_case = match c.as_str() {
            "mixed" => TextCase::Mixed,
            "upper" => TextCase::Upper,
            "lower" => TextCase::Lower,
            _ => return Err(schema(format!("{path}.text_case"), SchemaReason::InvalidValue, "expected mixed, upper or lower")),
        };
    }
    Ok(visual)
}

/// Color tokens are lowercase words (`red`, `light_blue`) or `#rgb`/`#rrggbb`.
fn color(raw: &str, path: &str) -> Result<String, DiagramError> {
    let c = raw.trim().to_ascii_lowercase();
    let ok = match c.strip_prefix('#') {
        Some(hex) => matches!(hex.len(), 3 | 6) && hex.chars().all(|ch| ch.is_ascii_hexdigit()),
        None => !c.is_empty() && c.chars().all(|ch| ch.is_ascii_lowercase() || ch == '_' || ch == '-' || ch == ' '),
    };
    if ok {
        Ok(c)
    } else {
        Err(schema(path, SchemaReason::InvalidValue, format!("{raw:?} is not a color")))
    }
}

fn parse_edge(raw: &Value, path: &str) -> Result<FlowEdge, DiagramError> {
    let obj = as_object(raw, path)?;
    reject_unknown_keys(obj, path, &["source", "target", "label"])?;
    let source = required_str(obj, path, "source")?;
    let target = required_str(obj, path, "target")?;
    let label = optional_str(obj, path, "label")?;
    Ok(FlowEdge { source, target, label })
}

fn valid_node_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, DiagramError> {
    v.as_object().ok_or_else(|| schema(path, SchemaReason::InvalidType, "expected an object"))
}

fn reject_unknown_keys(obj: &Map<String, Value>, path: &str, allowed: &[&str]) -> Result<(), DiagramError> {
    // serde_json maps iterate in key order, so the first reported key is stable.
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(schema(format!("{path}.{k}"), SchemaReason::UnknownKey, format!("unexpected key {k:?}"))),
        None => Ok(()),
    }
}

fn required<'a>(obj: &'a Map<String, Value>, path: &str, key: &str) -> Result<&'a Value, DiagramError> {
    obj.get(key).ok_or_else(|| schema(format!("{path}.{key}"), SchemaReason::MissingField, format!("{key} is required")))
}

fn required_str(obj: &Map<String, Value>, path: &str, key: &str) -> Result<String, DiagramError> {
    required(obj, path, key)?
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| schema(format!("{path}.{key}"), SchemaReason::InvalidType, "expected a string"))
}

fn optional_str(obj: &Map<String, Value>, path: &str, key: &str) -> Result<Option<String>, DiagramError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(schema(format!("{path}.{key}"), SchemaReason::InvalidType, "expected a string or null")),
    }
}

fn required_array<'a>(obj: &'a Map<String, Value>, path: &str, key: &str) -> Result<&'a Vec<Value>, DiagramError> {
    required(obj, path, key)?
        .as_array()
        .ok_or_else(|| schema(format!("{path}.{key}"), SchemaReason::InvalidType, "expected an array"))
}

/// A source of diagram JSON. Backends only produce candidate documents;
/// [`ExtractorRegistry::extract`] validates every result.
pub trait DiagramExtractor: Send + Sync {
    fn id(&self) -> &str;
    fn extract(&self, source: &[u8]) -> Result<String, DiagramError>;
}

/// Accepts bytes that are already diagram JSON.
pub struct PassthroughExtractor;

impl DiagramExtractor for PassthroughExtractor {
    fn id(&self) -> &str {
        "passthrough"
    }

    fn extract(&self, source: &[u8]) -> Result<String, DiagramError> {
        String::from_utf8(source.to_vec()).map_err(|e| DiagramError::MalformedJson(format!("input is not UTF-8: {e}")))
    }
}

pub struct ExtractorRegistry {
    backends: BTreeMap<String, Box<dyn DiagramExtractor>>,
}

impl Default for ExtractorRegistry {
    fn default() -> Self {
        let mut registry = ExtractorRegistry::empty();
        registry.register(Box::new(PassthroughExtractor));
        registry
    }
}

impl ExtractorRegistry {
    pub fn empty() -> Self {
        ExtractorRegistry { backends: BTreeMap::new() }
    }

    pub fn register(&mut self, backend: Box<dyn DiagramExtractor>) {
        self.backends.insert(backend.id().to_string(), backend);
    }

    pub fn backend_ids(&self) -> Vec<&str> {
        self.backends.keys().map(String::as_str).collect()
    }

    /// Runs `backend` over `source` and validates its output. Non-conforming
    /// output is rejected as-is.
    pub fn extract(&self, source: &[u8], backend: &str) -> Result<FlowchartDiagram, DiagramError> {
        let extractor = self.backends.get(backend).ok_or_else(|| DiagramError::BackendUnknown(backend.to_string()))?;
        let document = extractor.extract(source)?;
        parse_diagram(&document)
    }
}
