use serde::Serialize;
use serde_json::{json, Value};

use super::ServiceRegistration;
use crate::diagram::{FontWeight, TextCase};
use crate::fhir::{EvaluationResult, ReviewReason};
use crate::text::single_line;

pub const MAX_SUMMARY_CHARS: usize = 140;
pub const REVIEW_PREFIX: &str = "REQUIRES_HUMAN_REVIEW:";
pub const FALLBACK_DETAIL: &str = "No enumerated pathway journey matched this patient record; clinical review required.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Indicator {
    Info,
    Warning,
    Critical,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CardSource {
    pub label: String,
    pub url: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CdsCard {
    pub summary: String,
    pub detail: String,
    pub indicator: Indicator,
    pub source: CardSource,
    pub suggestions: Vec<Value>,
    pub review_items: Vec<String>,
}

fn truncate_chars(s: &str, max: usize) -> String {
    if s.chars().count() <= max {
        return s.to_string();
    }
    let mut out: String = s.chars().take(max - 1).collect();
    out.push('…');
    out
}

/// Turns an evaluation into the single card returned for an invocation.
pub fn build_card(result: &EvaluationResult, reg: &ServiceRegistration, patient_id: Option<&str>) -> CdsCard {
    let nodes = reg.diagram.node_index();
    let text_of =
        |id: &str| nodes.get(id).map(|n| single_line(&n.text)).filter(|t| !t.is_empty()).unwrap_or_else(|| id.to_string());
    let journey = result.matched_journey.as_deref().and_then(|name| reg.journey(name));

    let detail = match journey {
        Some(j) => {
            let mut parts: Vec<String> = j
                .steps
                .iter()
                .filter(|id| nodes.get(id.as_str()).is_none_or(|n| n.node_type != crate::diagram::NodeType::Annotation))
                .map(|id| text_of(id))
                .collect();
            if j.loop_terminated {
                if let Some(last) = parts.last_mut() {
                    last.push_str(" (loop)");
                }
            }
            parts.join(" → ")
        }
        None => FALLBACK_DETAIL.to_string(),
    };

    let review_items: Vec<String> = result
        .review_flags
        .iter()
        .map(|f| match f.reason {
            ReviewReason::UncomputablePlaceholder => format!(
                "{REVIEW_PREFIX} node {} (\"{}\") has no computable logic and was never used to route",
                f.node_id,
                text_of(&f.node_id)
            ),
            ReviewReason::UnmappedTerminology => format!(
                "{REVIEW_PREFIX} node {} (\"{}\") uses concept {} with no approved terminology code",
                f.node_id,
                text_of(&f.node_id),
                f.detail
            ),
        })
        .collect();

    let terminal = journey.filter(|j| !j.loop_terminated).and_then(|j| nodes.get(j.terminal()).copied());
    let urgent = terminal.is_some_and(|n| {
        reg.urgency_colors.contains(&n.visual.background_color)
            || (n.visual.font_weight == FontWeight::Bold && n.visual.text_case == TextCase::Upper)
    });
    let indicator = if urgent {
        Indicator::Critical
    } else if !review_items.is_empty() {
        Indicator::Warning
    } else {
        Indicator::Info
    };

    let suggestions = terminal
        .filter(|n| n.text.to_lowercase().contains(&reg.referral_pattern))
        .map(|n| {
            let text = single_line(&n.text);
            let mut resource = json!({
                "resourceType": "ServiceRequest",
                "status": "draft",
                "intent": "proposal",
                "code": { "text": text },
            });
            if let Some(pid) = patient_id {
                resource["subject"] = json!({ "reference": format!("Patient/{pid}") });
            }
            json!({
                "label": truncate_chars(&format!("Create referral: {text}"), MAX_SUMMARY_CHARS),
                "actions": [{
                    "type": "create",
                    "description": format!("Draft referral from the {} pathway", reg.diagram.pathway_name),
                    "resource": resource,
                }],
            })
        })
        .into_iter()
        .collect();

    CdsCard {
        summary: truncate_chars(&single_line(&result.recommended_action), MAX_SUMMARY_CHARS),
        detail,
        indicator,
        source: CardSource { label: reg.diagram.pathway_name.clone(), url: reg.diagram.source_document.clone() },
        suggestions,
        review_items,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_is_bounded() {
        let long = "x".repeat(300);
        let t = truncate_chars(&long, MAX_SUMMARY_CHARS);
        assert_eq!(t.chars().count(), MAX_SUMMARY_CHARS);
        assert!(t.ends_with('…'));
        assert_eq!(truncate_chars("short", MAX_SUMMARY_CHARS), "short");
    }
}
