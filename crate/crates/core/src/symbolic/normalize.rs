//! Normal form: only live symbols, numbered `T0..T{k-1}` in time order,
//! with equal symbols merged and redundant atoms dropped.

use super::{rename_syms, Engine, Marking, Stamp, SymbolicState};
use crate::constraint::{AffineExpr, Atom, LinearConstraint, Var};
use crate::rational::Rational;
use std::collections::{BTreeMap, BTreeSet};

fn ts(i: u32) -> AffineExpr {
    AffineExpr::var(Var::Ts(i))
}

/// Outcome of trying to sort symbols under a constraint.
enum Sorted {
    Total(Vec<u32>),
    /// The constraint does not decide `a` against `b`.
    Open(u32, u32),
}

/// Insertion sort by implication; stops at the first undecided pair.
fn sort_syms(c: &LinearConstraint, syms: &[u32]) -> Sorted {
    let mut order: Vec<u32> = Vec::with_capacity(syms.len());
    for &s in syms {
        let mut j = order.len();
        while j > 0 {
            let x = order[j - 1];
            if c.implies_atom(&Atom::le(ts(x), ts(s))) {
                break;
            }
            if !c.implies_atom(&Atom::le(ts(s), ts(x))) {
                return Sorted::Open(x, s);
            }
            j -= 1;
        }
        order.insert(j, s);
    }
    Sorted::Total(order)
}

/// Every time order of `syms` compatible with `c`, each with `c`
/// strengthened so that it implies that order. Ties are kept on both sides.
pub(crate) fn orderings(c: &LinearConstraint, syms: &[u32]) -> Vec<(Vec<u32>, LinearConstraint)> {
    let mut out = Vec::new();
    let mut work = vec![c.clone()];
    while let Some(c) = work.pop() {
        match sort_syms(&c, syms) {
            Sorted::Total(order) => out.push((order, c)),
            Sorted::Open(a, b) => {
                work.push(c.with(&Atom::le(ts(b), ts(a))));
                work.push(c.with(&Atom::le(ts(a), ts(b))));
            }
        }
    }
    out
}

impl Engine<'_> {
    /// Brings `<marking, constraint>` to normal form. Returns several states
    /// when the order of the symbols is not decided, none when the
    /// constraint is unsatisfiable.
    pub(crate) fn normalize(&self, marking: Marking, constraint: LinearConstraint) -> Vec<SymbolicState> {
        let live: BTreeSet<u32> = marking.iter().flatten().filter_map(Stamp::sym).collect();
        let dead: BTreeSet<Var> = constraint
            .vars()
            .into_iter()
            .filter(|v| !matches!(v, Var::Tl | Var::Ts(_)) || matches!(v, Var::Ts(i) if !live.contains(i)))
            .collect();
        let mut c = constraint.project_out(&dead);
        if !c.is_satisfiable() {
            return Vec::new();
        }
        if self.relative {
            c = c.canonicalize_relative();
        }
        let syms: Vec<u32> = live.into_iter().collect();
        orderings(&c, &syms).into_iter().map(|(order, c)| renumber(&marking, &c, &order)).collect()
    }
}

impl Engine<'_> {
    /// Drops everything the constraint says about stale symbols except
    /// their time order and `TL - T_i > horizon`. `None` when nothing is
    /// stale or the state is already widened.
    pub(crate) fn widen_stale(&self, s: &SymbolicState, horizon: Rational) -> Option<SymbolicState> {
        let c = &s.constraint;
        let k = s.symbol_count();
        let old = |i: u32| Atom::gt(AffineExpr::var(Var::Tl).minus(&ts(i)), AffineExpr::constant(horizon));
        // Symbols are numbered in time order, so the stale ones are a prefix.
        let m = (0..k).take_while(|i| c.implies_atom(&old(*i))).count() as u32;
        if m == 0 {
            return None;
        }
        let stale: BTreeSet<Var> = (0..m).map(Var::Ts).collect();
        let mut w = c.project_out(&stale).with(&old(m - 1));
        for i in 0..m.min(k - 1) {
            let strict = c.implies_atom(&Atom::lt(ts(i), ts(i + 1)));
            w.add(&if strict { Atom::lt(ts(i), ts(i + 1)) } else { Atom::le(ts(i), ts(i + 1)) });
        }
        let mut out = self.normalize(s.marking.clone(), w);
        debug_assert_eq!(out.len(), 1, "order atoms fix the symbol order");
        let widened = out.pop()?;
        (widened != *s).then_some(widened)
    }
}

/// Merges adjacent symbols that `c` forces equal and renames the rest to
/// `0..k-1` following `order`.
fn renumber(marking: &Marking, c: &LinearConstraint, order: &[u32]) -> SymbolicState {
    let mut map = BTreeMap::new();
    let mut next = 0u32;
    for (idx, &s) in order.iter().enumerate() {
        if idx > 0 && c.implies_atom(&Atom::le(ts(s), ts(order[idx - 1]))) {
            map.insert(s, next - 1);
        } else {
            map.insert(s, next);
            next += 1;
        }
    }
    let marking: Marking = marking
        .iter()
        .map(|bag| {
            let mut b: Vec<Stamp> = bag
                .iter()
                .map(|s| match s {
                    Stamp::Sym(i) => Stamp::Sym(map[i]),
                    Stamp::Ta => Stamp::Ta,
                })
                .collect();
            b.sort();
            b
        })
        .collect();
    // Merged symbols become equal variables; the equality atom collapses to
    // a trivial one and is dropped by pruning.
    let constraint = rename_syms(c, &map).prune_redundant();
    SymbolicState { marking, constraint }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orderings_split_open_pairs() {
        let c = LinearConstraint::parse("T0 >= 0 && T1 >= 0").unwrap();
        let o = orderings(&c, &[0, 1]);
        assert_eq!(o.len(), 2);
        let orders: BTreeSet<Vec<u32>> = o.iter().map(|(v, _)| v.clone()).collect();
        assert_eq!(orders, BTreeSet::from([vec![0, 1], vec![1, 0]]));
    }

    #[test]
    fn decided_order_is_single() {
        let c = LinearConstraint::parse("T1 <= T0 - 1 && T2 >= T0").unwrap();
        let o = orderings(&c, &[0, 1, 2]);
        assert_eq!(o.len(), 1);
        assert_eq!(o[0].0, vec![1, 0, 2]);
    }
}
