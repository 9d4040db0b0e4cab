//! Text matchers that turn normalized node text into computable atoms.

use regex::Regex;

use super::lexicon::{AuditLexicon, ComputablePattern};
use crate::cql::ast::{CompareOp, Expr, Filter, Literal, ResourceType, Retrieve};

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum AtomKind {
    Quantity {
        concept: String,
        op: CompareOp,
        value: f64,
        /// Configured unit, present when the text states it.
        unit: Option<String>,
        expected_unit: String,
        unit_required: bool,
    },
    Concept {
        concept: String,
        resource: ResourceType,
        negated: bool,
    },
    Age {
        op: CompareOp,
        years: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Atom {
    pub kind: AtomKind,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Connective {
    And,
    Or,
    Mixed,
}

struct QuantityMatcher {
    regex: Regex,
    concept: String,
    unit: String,
    unit_required: bool,
}

struct ConceptMatcher {
    concept: String,
    phrases: Vec<String>,
    resource: ResourceType,
}

/// Regexes compiled once per lexicon.
pub(crate) struct Matchers {
    quantities: Vec<QuantityMatcher>,
    concepts: Vec<ConceptMatcher>,
    ages: Vec<(Regex, Regex)>,
    lookback: Regex,
    negations: Vec<String>,
}

const COMPARATORS: &[(&str, CompareOp)] = &[
    ("greater than or equal to", CompareOp::Ge),
    ("less than or equal to", CompareOp::Le),
    ("at least", CompareOp::Ge),
    ("at most", CompareOp::Le),
    ("greater than", CompareOp::Gt),
    ("more than", CompareOp::Gt),
    ("less than", CompareOp::Lt),
    ("fewer than", CompareOp::Lt),
    ("exceeds", CompareOp::Gt),
    ("above", CompareOp::Gt),
    ("over", CompareOp::Gt),
    ("below", CompareOp::Lt),
    ("under", CompareOp::Lt),
    (">=", CompareOp::Ge),
    ("=>", CompareOp::Ge),
    ("≥", CompareOp::Ge),
    ("<=", CompareOp::Le),
    ("=<", CompareOp::Le),
    ("≤", CompareOp::Le),
    ("!=", CompareOp::Ne),
    ("≠", CompareOp::Ne),
    (">", CompareOp::Gt),
    ("<", CompareOp::Lt),
    ("=", CompareOp::Eq),
];

fn comparator_alternation() -> String {
    COMPARATORS.iter().map(|(s, _)| regex::escape(s)).collect::<Vec<_>>().join("|")
}

fn comparator(s: &str) -> CompareOp {
    COMPARATORS.iter().find(|(w, _)| *w == s).map(|(_, op)| *op).unwrap_or(CompareOp::Eq)
}

/// Escaped alternation, longest phrase first so the regex prefers it.
fn alternation(phrases: &[String]) -> String {
    let mut sorted: Vec<&String> = phrases.iter().collect();
    sorted.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
    sorted.iter().map(|p| regex::escape(p)).collect::<Vec<_>>().join("|")
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Byte spans of `phrase` in `text` that sit on word boundaries.
pub(crate) fn find_phrase(text: &str, phrase: &str) -> Vec<(usize, usize)> {
    if phrase.is_empty() {
        return Vec::new();
    }
    text.match_indices(phrase)
        .filter(|(i, _)| {
            let end = i + phrase.len();
            let before_ok = !phrase.starts_with(is_word_char) || text[..*i].chars().next_back().is_none_or(|c| !is_word_char(c));
            let after_ok = !phrase.ends_with(is_word_char) || text[end..].chars().next().is_none_or(|c| !is_word_char(c));
            before_ok && after_ok
        })
        .map(|(i, _)| (i, i + phrase.len()))
        .collect()
}

impl Matchers {
    pub fn new(lexicon: &AuditLexicon) -> Self {
        let ops = comparator_alternation();
        let mut quantities = Vec::new();
        let mut concepts = Vec::new();
        let mut ages = Vec::new();
        for p in &lexicon.computable_patterns {
            match p {
                ComputablePattern::Quantity { concept, aliases, unit, unit_required } => {
                    let pattern = format!(
                        r"(?:^|[^\p{{L}}\p{{N}}])(?P<alias>{})(?:\s+(?:result|level|value|count|test|is|was|of))*\s*:?\s*(?P<op>{ops})\s*(?P<num>\d+(?:\.\d+)?)(?:\s*(?P<unit>{}))?",
                        alternation(aliases),
                        regex::escape(&unit.to_lowercase()),
                    );
                    quantities.push(QuantityMatcher {
                        regex: Regex::new(&pattern).expect("escaped quantity pattern"),
                        concept: concept.clone(),
                        unit: unit.clone(),
                        unit_required: *unit_required,
                    });
                }
                ComputablePattern::Concept { concept, phrases, resource } => concepts.push(ConceptMatcher {
                    concept: concept.clone(),
                    phrases: phrases.clone(),
                    resource: ResourceType::parse(resource).expect("validated resource"),
                }),
                ComputablePattern::Age { words } => {
                    let words = alternation(words);
                    let range = format!(
                        r"(?:^|[^\p{{L}}\p{{N}}])(?P<w>{words})\s*(?P<num>\d+)(?:\s*(?:years?|yrs?))?(?:\s+old)?\s+(?:and|or)\s+(?P<dir>over|above|older|under|below|younger)"
                    );
                    let direct = format!(r"(?:^|[^\p{{L}}\p{{N}}])(?P<w>{words})\s*:?\s*(?P<op>{ops})\s*(?P<num>\d+)");
                    ages.push((
                        Regex::new(&range).expect("escaped age pattern"),
                        Regex::new(&direct).expect("escaped age pattern"),
                    ));
                }
            }
        }
        Matchers {
            quantities,
            concepts,
            ages,
            lookback: Regex::new(
                r"(?:within|in|over|during)\s+(?:the\s+)?(?:last|past|previous|preceding)\s+(?:(?P<num>\d+)\s*)?(?P<unit>days?|weeks?|months?|years?)\b",
            )
            .expect("static regex"),
            negations: lexicon.negation_words.clone(),
        }
    }

    /// All atoms in `text` (already normalized), non-overlapping, in text
    /// order. Earlier and then longer matches win overlaps.
    pub fn atoms(&self, text: &str) -> Vec<Atom> {
        let mut found = Vec::new();
        for q in &self.quantities {
            for caps in q.regex.captures_iter(text) {
                let alias = caps.name("alias").expect("alias group");
                let op = comparator(&caps["op"]);
                let Ok(value) = caps["num"].parse::<f64>() else { continue };
                let end = caps.get(0).expect("whole match").end();
                found.push(Atom {
                    kind: AtomKind::Quantity {
                        concept: q.concept.clone(),
                        op,
                        value,
                        unit: caps.name("unit").map(|_| q.unit.clone()),
                        expected_unit: q.unit.clone(),
                        unit_required: q.unit_required,
                    },
                    start: alias.start(),
                    end,
                });
            }
        }
        for (range, direct) in &self.ages {
            for caps in range.captures_iter(text) {
                let op = match &caps["dir"] {
                    "over" | "above" | "older" => CompareOp::Ge,
                    _ => CompareOp::Le,
                };
                let Ok(years) = caps["num"].parse::<f64>() else { continue };
                found.push(Atom {
                    kind: AtomKind::Age { op, years },
                    start: caps.name("w").expect("word group").start(),
                    end: caps.get(0).expect("whole match").end(),
                });
            }
            for caps in direct.captures_iter(text) {
                let Ok(years) = caps["num"].parse::<f64>() else { continue };
                found.push(Atom {
                    kind: AtomKind::Age { op: comparator(&caps["op"]), years },
                    start: caps.name("w").expect("word group").start(),
                    end: caps.get(0).expect("whole match").end(),
                });
            }
        }
        for c in &self.concepts {
            for phrase in &c.phrases {
                for (start, end) in find_phrase(text, phrase) {
                    let negation_start = self.negation_before(text, start);
                    found.push(Atom {
                        kind: AtomKind::Concept {
                            concept: c.concept.clone(),
                            resource: c.resource,
                            negated: negation_start.is_some(),
                        },
                        start: negation_start.unwrap_or(start),
                        end,
                    });
                }
            }
        }

        found.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)));
        let mut kept: Vec<Atom> = Vec::new();
        for atom in found {
            if kept.last().is_none_or(|k| atom.start >= k.end) {
                kept.push(atom);
            }
        }
        kept
    }

    /// Start of a negation word directly preceding `start`, if any.
    fn negation_before(&self, text: &str, start: usize) -> Option<usize> {
        let before = text[..start].trim_end();
        self.negations
            .iter()
            .filter_map(|neg| {
                let at = before.strip_suffix(neg.as_str())?.len();
                let boundary = before[..at].chars().next_back().is_none_or(|c| !is_word_char(c));
                boundary.then_some(at)
            })
            .min()
    }

    /// Lookback windows in `text` as (matched text, days).
    pub fn lookbacks<'t>(&self, text: &'t str) -> Vec<(&'t str, u64)> {
        self.lookback
            .captures_iter(text)
            .map(|caps| {
                let n: u64 = caps.name("num").and_then(|m| m.as_str().parse().ok()).unwrap_or(1);
                let per = match caps["unit"].trim_end_matches('s') {
                    "day" => 1,
                    "week" => 7,
                    "month" => 30,
                    _ => 365,
                };
                (caps.get(0).expect("whole match").as_str(), n.saturating_mul(per))
            })
            .collect()
    }
}

/// How the atoms are joined, judged from the text between them.
pub(crate) fn connective(text: &str, atoms: &[Atom]) -> Connective {
    let mut and = false;
    let mut or = false;
    for pair in atoms.windows(2) {
        let gap = &text[pair[0].end..pair[1].start];
        if !find_phrase(gap, "or").is_empty() {
            or = true;
        } else {
            and = true;
        }
    }
    match (and, or) {
        (true, true) => Connective::Mixed,
        (false, true) => Connective::Or,
        _ => Connective::And,
    }
}

#[derive(Clone, Copy, Debug)]
struct Bound {
    value: f64,
    inclusive: bool,
}

/// Whether a set of comparisons on one quantity can all hold at once.
pub(crate) fn satisfiable(constraints: &[(CompareOp, f64)]) -> bool {
    let mut lower: Option<Bound> = None;
    let mut upper: Option<Bound> = None;
    let tighter_lower = |cur: Option<Bound>, b: Bound| match cur {
        Some(c) if c.value > b.value || (c.value == b.value && !c.inclusive) => Some(c),
        _ => Some(b),
    };
    let tighter_upper = |cur: Option<Bound>, b: Bound| match cur {
        Some(c) if c.value < b.value || (c.value == b.value && !c.inclusive) => Some(c),
        _ => Some(b),
    };
    for &(op, value) in constraints {
        let incl = Bound { value, inclusive: true };
        let excl = Bound { value, inclusive: false };
        match op {
            CompareOp::Eq => {
                lower = tighter_lower(lower, incl);
                upper = tighter_upper(upper, incl);
            }
            CompareOp::Ge => lower = tighter_lower(lower, incl),
            CompareOp::Gt => lower = tighter_lower(lower, excl),
            CompareOp::Le => upper = tighter_upper(upper, incl),
            CompareOp::Lt => upper = tighter_upper(upper, excl),
            CompareOp::Ne => {}
        }
    }
    match (lower, upper) {
        (Some(l), Some(u)) => l.value < u.value || (l.value == u.value && l.inclusive && u.inclusive),
        _ => true,
    }
}

/// Builds the proposed expression. Under conjunction, comparisons on the
/// same quantity share one retrieve so a single observation must satisfy all.
pub(crate) fn build_expression(atoms: &[Atom], mode: Connective) -> Option<Expr> {
    let mut exprs: Vec<Expr> = Vec::new();
    let mut quantity_slot: Vec<(String, usize)> = Vec::new();
    for atom in atoms {
        match &atom.kind {
            AtomKind::Quantity { concept, op, value, unit, .. } => {
                let filter = Filter { path: "value.value".into(), op: *op, value: Literal::Number(*value) };
                let unit_filter = unit.as_ref().map(|u| Filter {
                    path: "value.unit".into(),
                    op: CompareOp::Eq,
                    value: Literal::Text(u.clone()),
                });
                let existing =
                    quantity_slot.iter().find(|(c, _)| c == concept).map(|(_, i)| *i).filter(|_| mode == Connective::And);
                if let Some(Expr::Exists(r)) = existing.map(|i| &mut exprs[i]) {
                    match r.filters.iter().position(|f| f.path == "value.unit") {
                        Some(at) => r.filters.insert(at, filter),
                        None => {
                            r.filters.push(filter);
                            r.filters.extend(unit_filter);
                        }
                    }
                    continue;
                }
                quantity_slot.push((concept.clone(), exprs.len()));
                exprs.push(Expr::Exists(Retrieve {
                    resource: ResourceType::Observation.as_str().into(),
                    code_ref: Some(concept.clone()),
                    filters: std::iter::once(filter).chain(unit_filter).collect(),
                }));
            }
            AtomKind::Concept { concept, resource, negated } => {
                let e = Expr::Exists(Retrieve {
                    resource: resource.as_str().into(),
                    code_ref: Some(concept.clone()),
                    filters: Vec::new(),
                });
                exprs.push(if *negated { Expr::Not(Box::new(e)) } else { e });
            }
            AtomKind::Age { op, years } => {
                exprs.push(Expr::Compare { left: Box::new(Expr::AgeInYears), op: *op, right: Literal::Number(*years) })
            }
        }
    }
    match mode {
        Connective::Or => Expr::disjunction(exprs),
        _ => Expr::conjunction(exprs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cql::printer::print_expr;

    fn matchers() -> Matchers {
        Matchers::new(&AuditLexicon::default())
    }

    fn expr(text: &str) -> String {
        let m = matchers();
        let atoms = m.atoms(text);
        print_expr(&build_expression(&atoms, connective(text, &atoms)).unwrap(), 0)
    }

    #[test]
    fn phrase_boundaries() {
        assert_eq!(find_phrase("fit and unfit", "fit"), vec![(0, 3)]);
        assert_eq!(find_phrase("ida, ida", "ida"), vec![(0, 3), (5, 8)]);
        assert!(find_phrase("idaho", "ida").is_empty());
    }

    #[test]
    fn quantities_ages_and_concepts() {
        assert_eq!(expr("fit result >= 10"), "exists([Observation: \"faecal immunochemical test\"] R where R.value.value >= 10)");
        assert_eq!(
            expr("fit < 10 ug/g and iron deficiency anaemia"),
            "exists([Observation: \"faecal immunochemical test\"] R where R.value.value < 10 and R.value.unit = 'ug/g') \
             and exists([Condition: \"iron deficiency anaemia\"])"
        );
        assert_eq!(expr("aged 40 and over with haemoptysis"), "AgeInYears() >= 40 and exists([Condition: \"haemoptysis\"])");
        assert_eq!(expr("age < 16"), "AgeInYears() < 16");
        assert_eq!(expr("no melanoma"), "not exists([Condition: \"melanoma\"])");
        assert_eq!(
            expr("haemoptysis or chest x-ray"),
            "exists([Condition: \"haemoptysis\"]) or exists([Procedure: \"chest x-ray\"])"
        );
        assert_eq!(
            expr("fit >= 4 ug/g and fit < 10"),
            "exists([Observation: \"faecal immunochemical test\"] R where R.value.value >= 4 and R.value.value < 10 and R.value.unit = 'ug/g')"
        );
    }

    #[test]
    fn connectives() {
        let m = matchers();
        let text = "haemoptysis and melanoma or dysphagia";
        assert_eq!(connective(text, &m.atoms(text)), Connective::Mixed);
        assert_eq!(connective("melanoma", &m.atoms("melanoma")), Connective::And);
    }

    #[test]
    fn interval_satisfiability() {
        use CompareOp::*;
        assert!(!satisfiable(&[(Ge, 10.0), (Lt, 4.0)]));
        assert!(!satisfiable(&[(Gt, 4.0), (Le, 4.0)]));
        assert!(satisfiable(&[(Ge, 4.0), (Le, 4.0)]));
        assert!(!satisfiable(&[(Eq, 3.0), (Eq, 5.0)]));
        assert!(satisfiable(&[(Ne, 3.0), (Eq, 3.0)]));
        assert!(satisfiable(&[(Lt, 10.0)]));
    }

    #[test]
    fn lookback_days() {
        let m = matchers();
        assert_eq!(m.lookbacks("bleeding in the last 6 months"), vec![("in the last 6 months", 180)]);
        assert_eq!(m.lookbacks("within the past year"), vec![("within the past year", 365)]);
    }
}
