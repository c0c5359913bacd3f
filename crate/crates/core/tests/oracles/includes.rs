//! Inclusion oracles over states drawn from real graphs and random
//! weakenings of them.

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use std::sync::OnceLock;
use tbnet_core::constraint::{AffineExpr, Atom, LinearConstraint, Var};
use tbnet_core::graph::{build_graph, BuildConfig};
use tbnet_core::net::{parse_net, TbNet};
use tbnet_core::rational::int;
use tbnet_core::symbolic::{Engine, EngineConfig, Inclusion, SymbolicState};

fn model(name: &str) -> TbNet {
    let path = format!("{}/../../models/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_net(&std::fs::read_to_string(&path).expect("fixture")).expect("fixture parses")
}

pub struct Pool {
    pub net: TbNet,
    pub config: EngineConfig,
    pub states: Vec<SymbolicState>,
}

pub fn pools() -> &'static [Pool] {
    static POOLS: OnceLock<Vec<Pool>> = OnceLock::new();
    POOLS.get_or_init(|| {
        let runs = [
            ("running_example.tb", EngineConfig::default(), None, 1000),
            ("running_example.tb", EngineConfig::without_ta(), Some(int(3)), 1000),
            ("dead_token.tb", EngineConfig::without_ta(), None, 40),
            ("gas_burner_0.5.tb", EngineConfig::default(), None, 300),
        ];
        runs.into_iter()
            .map(|(file, engine, time_limit, max_states)| {
                let net = model(file);
                let g = build_graph(&net, BuildConfig { engine, time_limit, max_states, ..BuildConfig::default() });
                let states = g.nodes.into_iter().map(|n| n.state).collect();
                Pool { net, config: engine, states }
            })
            .collect()
    })
}

fn ts(i: u32) -> AffineExpr {
    AffineExpr::var(Var::Ts(i))
}

/// Same marking; keeps the time order of the symbols and the atoms of `s`
/// selected by `mask`.
pub fn weaken(s: &SymbolicState, mask: u64) -> SymbolicState {
    let k = s.symbol_count();
    let mut c = LinearConstraint::truth();
    for i in 1..k {
        c.add(&Atom::le(ts(i - 1), ts(i)));
    }
    if k > 0 {
        c.add(&Atom::ge(AffineExpr::var(Var::Tl), ts(k - 1)));
    }
    for (n, atom) in s.constraint.split_atoms().into_iter().enumerate() {
        if mask >> (n % 64) & 1 == 1 {
            c = c.and(&atom);
        }
    }
    SymbolicState { marking: s.marking.clone(), constraint: c }
}

pub fn contains(i: Inclusion) -> bool {
    matches!(i, Inclusion::Equal | Inclusion::StrictSuperset)
}

/// Pool, two node indices and two weakening masks.
pub type Pick = (usize, prop::sample::Index, prop::sample::Index, u64, u64);

pub fn pick() -> impl Strategy<Value = Pick> {
    (0..pools().len(), any::<prop::sample::Index>(), any::<prop::sample::Index>(), any::<u64>(), any::<u64>())
}

/// `s`, a weakening `w1` of it and a weakening `w2` of `w1` form an
/// inclusion chain, and each is equal to itself.
pub fn reflexive_and_transitive(&(which, pick, _, m1, m2): &Pick) -> Result<(), TestCaseError> {
    let pool = &pools()[which];
    let engine = Engine::new(&pool.net, pool.config);
    let s = &pool.states[pick.index(pool.states.len())];
    let w1 = weaken(s, m1);
    let w2 = weaken(&w1, m2);
    prop_assert_eq!(engine.includes(s, s), Inclusion::Equal);
    prop_assert_eq!(engine.includes(&w1, &w1), Inclusion::Equal);
    prop_assert!(contains(engine.includes(&w1, s)));
    prop_assert!(contains(engine.includes(&w2, &w1)));
    prop_assert!(contains(engine.includes(&w2, s)));
    Ok(())
}

/// Containment between two graph nodes survives weakening the outer one
/// and strengthening the inner one.
pub fn transitive_across_nodes(&(which, a, b, m, _): &Pick) -> Result<(), TestCaseError> {
    let pool = &pools()[which];
    let engine = Engine::new(&pool.net, pool.config);
    let x = &pool.states[a.index(pool.states.len())];
    let y = &pool.states[b.index(pool.states.len())];
    let wx = weaken(x, m);
    if contains(engine.includes(x, y)) {
        prop_assert!(contains(engine.includes(&wx, y)));
    }
    if contains(engine.includes(y, &wx)) {
        prop_assert!(contains(engine.includes(y, x)));
    }
    Ok(())
}
