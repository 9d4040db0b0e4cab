mod common;

use std::time::Instant;

use common::{oracle_journeys, random_graph, read_fixture, scc_has_cycle};
use pathwise_core::diagram::parse_diagram;
use pathwise_core::graph_audit::{
    audit_graph, enumerate_journeys, enumerate_journeys_with, EnumerationOptions, GraphError, Journey,
};
use proptest::prelude::*;

fn rendered_sorted(journeys: &[Journey]) -> Vec<Vec<String>> {
    let mut v: Vec<Vec<String>> = journeys.iter().map(Journey::rendered).collect();
    v.sort();
    v
}

#[test]
fn matches_oracle_on_random_graphs() {
    let started = Instant::now();
    let mut cyclic = 0;
    for seed in 0..300 {
        let d = random_graph(seed, 12);
        let expected = oracle_journeys(&d);
        match enumerate_journeys(&d) {
            Ok(j) => assert_eq!(rendered_sorted(&j), expected, "seed {seed}"),
            Err(GraphError::NoEntry) => assert!(expected.is_empty(), "seed {seed}"),
            Err(e) => panic!("seed {seed}: {e}"),
        }
        cyclic += scc_has_cycle(&d) as usize;
    }
    assert!(cyclic > 50, "corpus should mix cyclic and acyclic graphs, got {cyclic} cyclic");
    assert!(started.elapsed().as_secs() < 10);
}

#[test]
fn has_cycle_agrees_with_scc() {
    for seed in 0..300 {
        let d = random_graph(seed, 12);
        if let Ok(audit) = audit_graph(&d) {
            assert_eq!(audit.has_cycle, scc_has_cycle(&d), "seed {seed}");
        }
    }
}

#[test]
fn cyclic_fixture_scale() {
    let d = parse_diagram(&read_fixture("cyclic45.json")).unwrap();
    assert_eq!(d.nodes.len(), 45);
    let started = Instant::now();
    let audit = audit_graph(&d).unwrap();
    assert!(started.elapsed().as_secs_f64() < 1.0);
    assert!(audit.has_cycle);
    assert!(audit.journey_count >= 234, "{}", audit.journey_count);
    assert!(audit.journeys.iter().any(|j| j.loop_terminated));
}

#[test]
fn journey_cap_is_enforced() {
    let d = parse_diagram(&read_fixture("cyclic45.json")).unwrap();
    let err = enumerate_journeys_with(&d, EnumerationOptions { journey_cap: Some(100) }).unwrap_err();
    assert_eq!(err.code(), "E_PATH_EXPLOSION");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn enumeration_is_deterministic_and_well_formed(seed in any::<u64>()) {
        let d = random_graph(seed, 10);
        let first = enumerate_journeys(&d);
        let second = enumerate_journeys(&d);
        prop_assert_eq!(&first, &second);
        if let Ok(journeys) = first {
            let ids: std::collections::HashSet<&str> = d.nodes.iter().map(|n| n.id.as_str()).collect();
            for j in &journeys {
                prop_assert!(j.steps.len() >= 2);
                prop_assert!(j.steps.iter().all(|s| ids.contains(s.as_str())));
                // all but the final step are distinct
                let prefix = &j.steps[..j.steps.len() - 1];
                let unique: std::collections::HashSet<_> = prefix.iter().collect();
                prop_assert_eq!(unique.len(), prefix.len());
                prop_assert_eq!(j.loop_terminated, prefix.contains(&j.steps[j.steps.len() - 1]));
                prop_assert_eq!(Journey::from_rendered(&j.rendered()), j.clone());
            }
        }
    }

    #[test]
    fn edge_order_does_not_matter(seed in any::<u64>()) {
        let d = random_graph(seed, 10);
        let mut shuffled = d.clone();
        shuffled.edges.reverse();
        prop_assert_eq!(enumerate_journeys(&d), enumerate_journeys(&shuffled));
    }
}
