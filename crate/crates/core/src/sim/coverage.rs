//! Coverage of concrete markings by symbolic states, and the per-step check
//! that every concrete firing is mirrored by an edge of the graph.

use super::{enabled_instances, eval_concrete, instances, simulate, ConcreteState};
use crate::constraint::{Bound, Bounds, LinearConstraint, Var};
use crate::graph::{NodeId, ReachGraph};
use crate::net::{PlaceId, TbNet};
use crate::rational::Rational;
use crate::symbolic::{Stamp, SymbolicState};
use itertools::Itertools;
use serde::Serialize;
use std::collections::HashMap;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// One way of reading a concrete marking as an instance of a symbolic one.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Witness {
    /// Value of `T_i`.
    sym: Vec<Rational>,
    /// Per place, the values taken by `TA` tokens.
    ta: Vec<Vec<Rational>>,
}

impl Witness {
    fn satisfies(&self, c: &LinearConstraint, now: Rational) -> bool {
        c.holds(&|v| match v {
            Var::Tl => Some(now),
            Var::Ts(i) => self.sym.get(i as usize).copied(),
            Var::Aux(_) => None,
        }) == Some(true)
    }

    /// Symbolic stamps the value `v` in place `p` may stand for.
    fn readings(&self, s: &SymbolicState, p: PlaceId, v: Rational) -> Vec<Stamp> {
        let mut out: Vec<Stamp> = s.marking[p.0]
            .iter()
            .filter_map(Stamp::sym)
            .filter(|i| self.sym[*i as usize] == v)
            .dedup()
            .map(Stamp::Sym)
            .collect();
        if self.ta[p.0].contains(&v) {
            out.push(Stamp::Ta);
        }
        out
    }
}

/// Symbol values fixed by a split, and the concrete stamps left to `TA`.
type Split = (Vec<(u32, Rational)>, Vec<Rational>);

/// Splits of one place: which concrete tokens are `TA`, the rest matched
/// in order to the sorted symbols.
fn place_splits(symbolic: &[Stamp], concrete: &[Rational], now: Rational) -> Vec<Split> {
    let syms: Vec<u32> = symbolic.iter().filter_map(Stamp::sym).collect();
    let n_ta = symbolic.len() - syms.len();
    let mut out = Vec::new();
    for picked in (0..concrete.len()).combinations(n_ta) {
        let ta: Vec<Rational> = picked.iter().map(|i| concrete[*i]).collect();
        if ta.iter().any(|v| *v > now) {
            continue;
        }
        let rest: Vec<Rational> = (0..concrete.len()).filter(|i| !picked.contains(i)).map(|i| concrete[i]).collect();
        let pairs: Vec<(u32, Rational)> = syms.iter().copied().zip(rest).collect();
        if !out.iter().any(|(p, t)| *p == pairs && *t == ta) {
            out.push((pairs, ta));
        }
    }
    out
}

fn witnesses(m: &ConcreteState, s: &SymbolicState) -> Vec<Witness> {
    if m.marking.iter().map(Vec::len).ne(s.topology()) {
        return Vec::new();
    }
    let splits: Vec<_> = s.marking.iter().zip(&m.marking).map(|(sb, cb)| place_splits(sb, cb, m.now)).collect();
    let k = s.symbol_count() as usize;
    let mut out = Vec::new();
    for choice in splits.into_iter().multi_cartesian_product() {
        let mut sym: Vec<Option<Rational>> = vec![None; k];
        let consistent = choice.iter().flat_map(|(pairs, _)| pairs).all(|(i, v)| match sym[*i as usize] {
            Some(old) => old == *v,
            None => {
                sym[*i as usize] = Some(*v);
                true
            }
        });
        if !consistent {
            continue;
        }
        let w = Witness {
            sym: sym.into_iter().map(|v| v.expect("every symbol occurs in the marking")).collect(),
            ta: choice.into_iter().map(|(_, ta)| ta).collect(),
        };
        if w.satisfies(&s.constraint, m.now) && !out.contains(&w) {
            out.push(w);
        }
    }
    out
}

/// Every alive instance keeps its effective window `[max(lb, now), ub]`
/// when its `TA` positions are erased, for some reading of its tokens.
fn windows_preserved(net: &TbNet, m: &ConcreteState, s: &SymbolicState, w: &Witness) -> bool {
    instances(net, &m.marking).iter().filter(|i| i.alive(m.now)).all(|inst| {
        let t = net.transition(inst.transition);
        let readings: Vec<Vec<Stamp>> = t.pre.iter().zip(&inst.tuple).map(|(p, v)| w.readings(s, *p, *v)).collect();
        readings.into_iter().multi_cartesian_product().any(|tuple| {
            let erased = |q: PlaceId| tuple[t.pre.iter().position(|x| *x == q).expect("preset")].is_ta();
            let Some(tf) = t.tf.erase(&t.pre, &erased) else {
                return false;
            };
            let value = |q: PlaceId| inst.tuple[t.pre.iter().position(|x| *x == q).expect("preset")];
            let lb = eval_concrete(&tf.lb, &t.pre, &value);
            let ub = eval_concrete(&tf.ub, &t.pre, &value);
            lb.max(m.now) == inst.lb.max(m.now) && ub == inst.ub
        })
    })
}

/// Whether some solution of `s` yields `m` and anonymized tokens do not
/// alter any firing window.
pub fn covered_by(net: &TbNet, m: &ConcreteState, s: &SymbolicState) -> bool {
    witnesses(m, s).iter().any(|w| windows_preserved(net, m, s, w))
}

fn valid_witnesses(net: &TbNet, m: &ConcreteState, s: &SymbolicState) -> Vec<Witness> {
    witnesses(m, s).into_iter().filter(|w| windows_preserved(net, m, s, w)).collect()
}

fn within(b: &Bounds, d: Rational) -> bool {
    let lo = match b.lower {
        Bound::Infinite => true,
        Bound::Finite { value, closed } => d > value || (closed && d == value),
    };
    let hi = match b.upper {
        Bound::Infinite => true,
        Bound::Finite { value, closed } => d < value || (closed && d == value),
    };
    lo && hi
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub seed: u64,
    pub step: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageReport {
    pub runs: usize,
    pub steps: usize,
    pub violations: Vec<Violation>,
    /// The graph was capped or has unexpanded nodes; violations may be
    /// artifacts of the missing part.
    pub incomplete: bool,
}

struct Checker<'a> {
    net: &'a TbNet,
    graph: &'a ReachGraph,
    by_topology: HashMap<Vec<usize>, Vec<NodeId>>,
}

impl Checker<'_> {
    fn covering(&self, m: &ConcreteState) -> Vec<(NodeId, Vec<Witness>)> {
        let topo: Vec<usize> = m.marking.iter().map(Vec::len).collect();
        self.by_topology
            .get(&topo)
            .into_iter()
            .flatten()
            .filter_map(|n| {
                let ws = valid_witnesses(self.net, m, &self.graph.nodes[*n].state);
                (!ws.is_empty()).then_some((*n, ws))
            })
            .collect()
    }

    /// Replays one run; returns the number of checked steps.
    fn run(&self, seed: u64, steps: usize, out: &mut Vec<Violation>) -> usize {
        let Some(trace) = simulate(self.net, seed, steps) else {
            out.push(Violation { seed, step: 0, reason: "initial constraint has no grid solution".into() });
            return 0;
        };
        let mut cover = self.covering(&trace.initial);
        let covered_initially = cover.iter().any(|(n, _)| self.graph.initial.contains(n));
        if !covered_initially {
            out.push(Violation { seed, step: 0, reason: "initial marking not covered by an initial node".into() });
            return 0;
        }
        let mut state = trace.initial.clone();
        for (k, step) in trace.steps.iter().enumerate() {
            if cover.iter().all(|(n, _)| self.graph.nodes[*n].flags.not_expanded) {
                return k;
            }
            let next_cover = self.covering(&step.state);
            let t = self.net.transition(step.transition);
            let delay = step.time - state.now;
            let matched =
                cover.iter().any(|(n, ws)| {
                    self.graph.out_edges(*n).any(|e| {
                        e.transition == step.transition
                            && within(&e.delay, delay)
                            && next_cover.iter().any(|(d, _)| *d == e.dst)
                            && ws.iter().any(|w| {
                                w.satisfies(&e.condition, state.now)
                                    && t.pre.iter().zip(&e.tuple).zip(&step.tuple).all(|((p, st), v)| {
                                        w.readings(&self.graph.nodes[*n].state, *p, *v).contains(st)
                                    })
                            })
                    })
                });
            if !matched {
                let name = &t.name;
                let reason = if next_cover.is_empty() {
                    format!("marking after {name} at {} not covered by any node", step.time)
                } else {
                    format!("no edge matches {name} at {} (delay {delay})", step.time)
                };
                out.push(Violation { seed, step: k + 1, reason });
                return k + 1;
            }
            // Strong deadlines are respected by construction of the run; check
            // the recorded firing against the window once more.
            debug_assert!(enabled_instances(self.net, &state).iter().any(|(i, lo, hi)| i.transition
                == step.transition
                && i.tuple == step.tuple
                && *lo <= step.time
                && step.time <= *hi));
            cover = next_cover;
            state = step.state.clone();
        }
        trace.steps.len()
    }
}

/// Simulates `runs` seeded traces of up to `steps` firings and checks each
/// against the graph.
pub fn coverage_check(net: &TbNet, graph: &ReachGraph, runs: usize, steps: usize, seed: u64) -> CoverageReport {
    let mut by_topology: HashMap<Vec<usize>, Vec<NodeId>> = HashMap::new();
    for (i, n) in graph.nodes.iter().enumerate() {
        by_topology.entry(n.state.topology()).or_default().push(i);
    }
    let checker = Checker { net, graph, by_topology };
    let one = |r: usize| {
        let mut v = Vec::new();
        let n = checker.run(seed.wrapping_add(r as u64), steps, &mut v);
        (n, v)
    };
    #[cfg(feature = "parallel")]
    let results: Vec<(usize, Vec<Violation>)> = (0..runs).into_par_iter().map(one).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<(usize, Vec<Violation>)> = (0..runs).map(one).collect();
    let mut report = CoverageReport { runs, steps: 0, violations: Vec::new(), incomplete: !graph.is_exhaustive() };
    for (n, v) in results {
        report.steps += n;
        report.violations.extend(v);
    }
    report
}

/// Symbol values of the first witness, for diagnostics.
#[cfg(test)]
pub(crate) fn witness_values(
    m: &ConcreteState,
    s: &SymbolicState,
) -> Option<std::collections::BTreeMap<u32, Rational>> {
    witnesses(m, s).first().map(|w| w.sym.iter().enumerate().map(|(i, v)| (i as u32, *v)).collect())
}
