//! Inclusion is reflexive and transitive on states drawn from real graphs
//! and on random weakenings of them.

#[path = "oracles/includes.rs"]
mod oracle;

use proptest::prelude::*;

#[test]
fn pools_are_nonempty() {
    assert!(oracle::pools().iter().all(|p| !p.states.is_empty()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(600))]

    #[test]
    fn includes_is_reflexive_and_transitive(p in oracle::pick()) {
        oracle::reflexive_and_transitive(&p)?;
    }

    #[test]
    fn transitivity_across_graph_nodes(p in oracle::pick()) {
        oracle::transitive_across_nodes(&p)?;
    }
}
