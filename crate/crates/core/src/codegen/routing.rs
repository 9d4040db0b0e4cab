use super::CodegenError;
use crate::cql::ast::{Define, Expr, IncludeDecl, Library, Location};
use crate::cql::bindings::LibraryBindings;
use crate::cql::checker::RECOMMENDED_ACTION;
use crate::diagram::{FlowchartDiagram, NodeType};
use crate::graph_audit::Journey;

pub const DEFS_ALIAS: &str = "Defs";
pub const LOOP_OUTCOME: &str = "Pathway loop — clinical review required";
pub const NO_MATCH_OUTCOME: &str = "No pathway criteria met — clinical review required";

pub fn routing_library_name(definitions_name: &str) -> String {
    let base = definitions_name.strip_suffix("Definitions").unwrap_or(definitions_name);
    format!("{base}Routing")
}

fn bound(bindings: &LibraryBindings, journey: usize, node: &str) -> Result<Expr, CodegenError> {
    bindings
        .define_for(node)
        .map(|d| Expr::aliased(DEFS_ALIAS, d))
        .ok_or_else(|| CodegenError::MissingBinding { journey, node: node.to_string() })
}

/// Builds the routing library: `Journey_n` is the conjunction of the bound
/// defines of every step before the journey's last element, skipping
/// annotations and end blocks; `Recommended Action` returns the outcome of
/// the first journey that holds.
pub fn generate_routing(
    journeys: &[Journey],
    bindings: &LibraryBindings,
    diagram: &FlowchartDiagram,
) -> Result<Library, CodegenError> {
    let nodes = diagram.node_index();
    let mut lib = Library::new(routing_library_name(&bindings.library_name), bindings.version.clone());
    lib.includes.push(IncludeDecl {
        name: bindings.library_name.clone(),
        version: bindings.version.clone(),
        alias: DEFS_ALIAS.to_string(),
        location: Location::default(),
    });

    let mut branches = Vec::new();
    for (i, journey) in journeys.iter().enumerate() {
        let n = i + 1;
        let mut conjuncts = Vec::new();
        for step in journey.gating_steps() {
            let gates =
                nodes.get(step.as_str()).is_some_and(|node| !matches!(node.node_type, NodeType::Annotation | NodeType::EndBlock));
            if gates {
                conjuncts.push(bound(bindings, n, step)?);
            }
        }
        let name = format!("Journey_{n}");
        let mut define = Define::new(&name, Expr::conjunction(conjuncts).unwrap_or(Expr::Bool(true)));
        define.leading_comment = Some(format!("journey {n}: {}", journey.rendered().join(" -> ")));
        lib.defines.push(define);

        let terminal = journey.terminal();
        let outcome = match nodes.get(terminal) {
            _ if journey.loop_terminated => Expr::Str(LOOP_OUTCOME.to_string()),
            Some(node) if node.node_type == NodeType::EndBlock => bound(bindings, n, terminal)?,
            Some(node) if !node.text.trim().is_empty() => Expr::Str(node.text.clone()),
            _ => Expr::Str(terminal.to_string()),
        };
        branches.push((Expr::local(name), outcome));
    }

    let action = branches.into_iter().rev().fold(Expr::Str(NO_MATCH_OUTCOME.to_string()), |otherwise, (cond, then)| Expr::If {
        cond: Box::new(cond),
        then: Box::new(then),
        otherwise: Box::new(otherwise),
    });
    lib.defines.push(Define::new(RECOMMENDED_ACTION, action));
    Ok(lib)
}
