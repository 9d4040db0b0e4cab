//! Deterministic structural audit of a flowchart: diagnostics plus
//! exhaustive depth-first enumeration of patient journeys.
//!
//! A journey starts at an entry node and ends at the first end node it
//! reaches. When the walk steps onto a node already on the current path, the
//! journey is emitted with that node repeated once more and marked as
//! loop-terminated; that branch of the search stops there.

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::diagram::{FlowchartDiagram, NodeType};

pub const DEFAULT_JOURNEY_CAP: usize = 100_000;
const LOOP_SUFFIX: &str = " (LOOP)";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("E_NO_ENTRY: diagram has no start_block and no non-annotation node with in-degree 0")]
    NoEntry,
    #[error("E_PATH_EXPLOSION: more than {cap} journeys")]
    PathExplosion { cap: usize },
}

impl GraphError {
    pub fn code(&self) -> &'static str {
        match self {
            GraphError::NoEntry => "E_NO_ENTRY",
            GraphError::PathExplosion { .. } => "E_PATH_EXPLOSION",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Journey {
    pub steps: Vec<String>,
    pub loop_terminated: bool,
    pub loop_node: Option<String>,
}

impl Journey {
    /// Steps with the re-entered node rendered as `"<id> (LOOP)"`.
    pub fn rendered(&self) -> Vec<String> {
        let mut out = self.steps.clone();
        if self.loop_terminated {
            if let Some(last) = out.last_mut() {
                last.push_str(LOOP_SUFFIX);
            }
        }
        out
    }

    /// Inverse of [`Journey::rendered`].
    pub fn from_rendered(items: &[String]) -> Journey {
        let mut steps = items.to_vec();
        let mut loop_node = None;
        if let Some(last) = steps.last_mut() {
            if let Some(id) = last.strip_suffix(LOOP_SUFFIX).map(str::to_string) {
                *last = id.clone();
                loop_node = Some(id);
            }
        }
        Journey { steps, loop_terminated: loop_node.is_some(), loop_node }
    }

    /// Steps whose logic is conjoined for routing: everything except the
    /// final element (the terminal, or the loop re-entry).
    pub fn gating_steps(&self) -> &[String] {
        &self.steps[..self.steps.len().saturating_sub(1)]
    }

    pub fn terminal(&self) -> &str {
        self.steps.last().map(String::as_str).unwrap_or_default()
    }
}

impl Serialize for Journey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rendered = self.rendered();
        let mut seq = serializer.serialize_seq(Some(rendered.len()))?;
        for step in &rendered {
            seq.serialize_element(step)?;
        }
        seq.end()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub node_id: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    AnnotationWithOutgoingEdges,
    EndWithOutgoingEdges,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphAudit {
    pub node_count: usize,
    pub edge_count: usize,
    pub orphan_nodes: Vec<String>,
    pub dead_end_nodes: Vec<String>,
    pub has_cycle: bool,
    pub journey_count: usize,
    pub avg_steps: f64,
    pub min_steps: usize,
    pub max_steps: usize,
    pub journeys: Vec<Journey>,
    pub diagnostics: Vec<Diagnostic>,
}

impl GraphAudit {
    /// The `*_audit.json` artifact.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("audit serializes");
        s.push('\n');
        s
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EnumerationOptions {
    /// `None` disables the cap.
    pub journey_cap: Option<usize>,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        EnumerationOptions { journey_cap: Some(DEFAULT_JOURNEY_CAP) }
    }
}

/// Index-based view of a diagram. Parallel edges collapse into one successor;
/// successors are ordered by target id.
struct Graph<'a> {
    diagram: &'a FlowchartDiagram,
    successors: Vec<Vec<usize>>,
    in_degree: Vec<usize>,
}

impl<'a> Graph<'a> {
    fn new(diagram: &'a FlowchartDiagram) -> Self {
        let index =
            diagram.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect::<std::collections::HashMap<_, _>>();
        let n = diagram.nodes.len();
        let mut edges: Vec<(usize, &str, Option<&str>, usize)> = diagram
            .edges
            .iter()
            .map(|e| (index[e.source.as_str()], e.target.as_str(), e.label.as_deref(), index[e.target.as_str()]))
            .collect();
        edges.sort();
        let mut successors = vec![Vec::new(); n];
        let mut in_degree = vec![0; n];
        for (src, _, _, dst) in edges {
            if successors[src].last() != Some(&dst) {
                successors[src].push(dst);
            }
        }
        for e in &diagram.edges {
            in_degree[index[e.target.as_str()]] += 1;
        }
        Graph { diagram, successors, in_degree }
    }

    fn id(&self, i: usize) -> &str {
        &self.diagram.nodes[i].id
    }

    fn node_type(&self, i: usize) -> NodeType {
        self.diagram.nodes[i].node_type
    }

    fn entries(&self) -> Vec<usize> {
        let n = self.diagram.nodes.len();
        let mut entries: Vec<usize> = (0..n).filter(|&i| self.node_type(i) == NodeType::StartBlock).collect();
        if entries.is_empty() {
            entries = (0..n).filter(|&i| self.node_type(i) != NodeType::Annotation && self.in_degree[i] == 0).collect();
        }
        entries.sort_by(|&a, &b| self.id(a).cmp(self.id(b)));
        entries
    }

    /// End blocks, or every non-annotation sink when the diagram has none.
    fn end_mask(&self) -> Vec<bool> {
        let n = self.diagram.nodes.len();
        let explicit: Vec<bool> = (0..n).map(|i| self.node_type(i) == NodeType::EndBlock).collect();
        if explicit.iter().any(|&b| b) {
            explicit
        } else {
            (0..n).map(|i| self.node_type(i) != NodeType::Annotation && self.successors[i].is_empty()).collect()
        }
    }

    fn has_cycle(&self) -> bool {
        #[derive(Clone, Copy, PartialEq)]
        enum Color {
            White,
            Grey,
            Black,
        }
        let n = self.diagram.nodes.len();
        let mut color = vec![Color::White; n];
        for root in 0..n {
            if color[root] != Color::White {
                continue;
            }
            let mut stack = vec![(root, 0usize)];
            color[root] = Color::Grey;
            while let Some((u, next)) = stack.last_mut() {
                let u = *u;
                if let Some(&w) = self.successors[u].get(*next) {
                    *next += 1;
                    match color[w] {
                        Color::Grey => return true,
                        Color::White => {
                            color[w] = Color::Grey;
                            stack.push((w, 0));
                        }
                        Color::Black => {}
                    }
                } else {
                    color[u] = Color::Black;
                    stack.pop();
                }
            }
        }
        false
    }
}

/// Entry nodes sorted by id: start blocks, or else every non-annotation node
/// with no incoming edge.
pub fn find_entries(diagram: &FlowchartDiagram) -> Result<Vec<String>, GraphError> {
    let graph = Graph::new(diagram);
    let entries = graph.entries();
    if entries.is_empty() {
        return Err(GraphError::NoEntry);
    }
    Ok(entries.into_iter().map(|i| graph.id(i).to_string()).collect())
}

pub fn enumerate_journeys(diagram: &FlowchartDiagram) -> Result<Vec<Journey>, GraphError> {
    enumerate_journeys_with(diagram, EnumerationOptions::default())
}

pub fn enumerate_journeys_with(diagram: &FlowchartDiagram, options: EnumerationOptions) -> Result<Vec<Journey>, GraphError> {
    let graph = Graph::new(diagram);
    let entries = graph.entries();
    if entries.is_empty() {
        return Err(GraphError::NoEntry);
    }
    let is_end = graph.end_mask();
    let n = diagram.nodes.len();
    let mut journeys = Vec::new();
    let mut on_path = vec![false; n];

    let emit = |path: &[usize], last: usize, looped: bool, journeys: &mut Vec<Journey>| {
        if let Some(cap) = options.journey_cap {
            if journeys.len() >= cap {
                return Err(GraphError::PathExplosion { cap });
            }
        }
        let mut steps: Vec<String> = path.iter().map(|&i| graph.id(i).to_string()).collect();
        steps.push(graph.id(last).to_string());
        journeys.push(Journey { steps, loop_terminated: looped, loop_node: looped.then(|| graph.id(last).to_string()) });
        Ok(())
    };

    for &entry in &entries {
        let mut path = vec![entry];
        let mut cursor = vec![0usize];
        on_path[entry] = true;
        while let Some(next) = cursor.last_mut() {
            let u = *path.last().expect("path tracks cursor");
            let Some(&w) = graph.successors[u].get(*next) else {
                cursor.pop();
                path.pop();
                on_path[u] = false;
                continue;
            };
            *next += 1;
            if on_path[w] {
                emit(&path, w, true, &mut journeys)?;
            } else if is_end[w] {
                emit(&path, w, false, &mut journeys)?;
            } else {
                on_path[w] = true;
                path.push(w);
                cursor.push(0);
            }
        }
    }
    Ok(journeys)
}

pub fn audit_graph(diagram: &FlowchartDiagram) -> Result<GraphAudit, GraphError> {
    audit_graph_with(diagram, EnumerationOptions::default())
}

pub fn audit_graph_with(diagram: &FlowchartDiagram, options: EnumerationOptions) -> Result<GraphAudit, GraphError> {
    let graph = Graph::new(diagram);
    let journeys = enumerate_journeys_with(diagram, options)?;

    let mut incident = vec![false; diagram.nodes.len()];
    for e in &diagram.edges {
        for id in [&e.source, &e.target] {
            if let Some(i) = diagram.nodes.iter().position(|n| &n.id == id) {
                incident[i] = true;
            }
        }
    }
    let orphan_nodes = diagram.nodes.iter().zip(&incident).filter(|(_, &inc)| !inc).map(|(n, _)| n.id.clone()).collect();
    let dead_end_nodes = diagram
        .nodes
        .iter()
        .enumerate()
        .filter(|(i, n)| !matches!(n.node_type, NodeType::EndBlock | NodeType::Annotation) && graph.successors[*i].is_empty())
        .map(|(_, n)| n.id.clone())
        .collect();

    let mut diagnostics = Vec::new();
    for (i, n) in diagram.nodes.iter().enumerate() {
        if graph.successors[i].is_empty() {
            continue;
        }
        let kind = match n.node_type {
            NodeType::Annotation => DiagnosticKind::AnnotationWithOutgoingEdges,
            NodeType::EndBlock => DiagnosticKind::EndWithOutgoingEdges,
            _ => continue,
        };
        diagnostics.push(Diagnostic { kind, node_id: n.id.clone() });
    }

    let lengths: Vec<usize> = journeys.iter().map(|j| j.steps.len()).collect();
    let avg_steps = if lengths.is_empty() { 0.0 } else { lengths.iter().sum::<usize>() as f64 / lengths.len() as f64 };

    Ok(GraphAudit {
        node_count: diagram.nodes.len(),
        edge_count: diagram.edges.len(),
        orphan_nodes,
        dead_end_nodes,
        has_cycle: graph.has_cycle(),
        journey_count: journeys.len(),
        avg_steps,
        min_steps: lengths.iter().copied().min().unwrap_or(0),
        max_steps: lengths.iter().copied().max().unwrap_or(0),
        journeys,
        diagnostics,
    })
}
