use super::eval::{eval_tf, tl};
use super::{Engine, Marking, Stamp, SymbolicState, FIRE, OLD_TL};
use crate::constraint::{AffineExpr, Atom, Bounds, LinearConstraint, Var};
use crate::net::{PlaceId, TimeFunction, TransId, Transition};
use itertools::Itertools;
use std::collections::{BTreeMap, BTreeSet};

/// One way an enabling can fire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiringBranch {
    /// State constraint, max-case guards, `lb <= F <= ub`, `F >= TL` and the
    /// strong-semantics bounds, over the state variables and `F`.
    pub condition: LinearConstraint,
    /// Atoms of the condition projected on the state variables that the
    /// state constraint does not imply; empty iff the branch is total.
    pub residual: LinearConstraint,
    pub lb: AffineExpr,
    pub ub: AffineExpr,
    /// Range of `F - TL`.
    pub delay: Bounds,
}

impl FiringBranch {
    /// Every marking of the state can take this branch.
    pub fn is_total(&self) -> bool {
        self.residual.is_true()
    }
}

/// A transition with a tuple of stamps (one per preset place, in preset
/// order) that can fire in some marking of the state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicEnabling {
    pub transition: TransId,
    pub tuple: Vec<Stamp>,
    pub branches: Vec<FiringBranch>,
}

impl SymbolicEnabling {
    pub fn tuple_string(&self) -> String {
        tuple_string(&self.tuple)
    }
}

pub(crate) fn tuple_string(tuple: &[Stamp]) -> String {
    format!("<{}>", tuple.iter().map(Stamp::to_string).join(","))
}

/// A strong instance constrains every firing to happen no later than `ub`
/// whenever `alive` holds.
struct Obligation {
    alive: LinearConstraint,
    ub: AffineExpr,
}

pub(crate) fn value_of(t: &Transition, tuple: &[Stamp]) -> impl Fn(PlaceId) -> Option<AffineExpr> {
    let map: BTreeMap<PlaceId, Option<AffineExpr>> =
        t.pre.iter().zip(tuple).map(|(p, s)| (*p, s.sym().map(|i| AffineExpr::var(Var::Ts(i))))).collect();
    move |p| map.get(&p).cloned().flatten()
}

/// Erases the TA positions of `tuple`; `None` when the erasure is not
/// well-defined. An all-TA tuple survives only if the time function does not
/// depend on its tokens.
pub(crate) fn erased_tf(t: &Transition, tuple: &[Stamp]) -> Option<TimeFunction> {
    let ta: BTreeSet<PlaceId> = t.pre.iter().zip(tuple).filter(|(_, s)| s.is_ta()).map(|(p, _)| *p).collect();
    t.tf.erase(&t.pre, &|q| ta.contains(&q))
}

/// Tuples drawn from the marking, optionally with one place pinned to a
/// stamp.
pub(crate) fn tuples(marking: &Marking, t: &Transition, pinned: Option<(PlaceId, Stamp)>) -> Vec<Vec<Stamp>> {
    let choices: Vec<Vec<Stamp>> = t
        .pre
        .iter()
        .map(|p| match pinned {
            Some((q, s)) if q == *p => {
                if marking[p.0].contains(&s) {
                    vec![s]
                } else {
                    vec![]
                }
            }
            _ => marking[p.0].iter().copied().dedup().collect(),
        })
        .collect();
    if choices.iter().any(Vec::is_empty) {
        return Vec::new();
    }
    choices.into_iter().multi_cartesian_product().collect()
}

impl Engine<'_> {
    /// Symbolic enablings in transition order, tuples in lexicographic
    /// order.
    pub fn enablings(&self, state: &SymbolicState) -> Vec<SymbolicEnabling> {
        let c = &state.constraint;
        let obligations = self.obligations(state);
        let fire = AffineExpr::var(FIRE);
        let mut out = Vec::new();
        for (ti, t) in self.net.transitions.iter().enumerate() {
            for tuple in tuples(&state.marking, t, None) {
                let Some(tf) = erased_tf(t, &tuple) else {
                    continue;
                };
                let value = value_of(t, &tuple);
                let mut branches = Vec::new();
                for (g, lb, ub) in eval_tf(c, &tf.lb, &tf.ub, &t.pre, &value) {
                    let k = c
                        .and(&g)
                        .with(&Atom::le(lb.clone(), fire.clone()))
                        .with(&Atom::le(fire.clone(), ub.clone()))
                        .with(&Atom::ge(fire.clone(), tl()));
                    if !k.is_satisfiable() {
                        continue;
                    }
                    for k in apply_obligations(k, &obligations) {
                        let projected = k.eliminate(&BTreeSet::from([FIRE]));
                        let delay = k.bounds_of(&fire.minus(&tl())).expect("satisfiable firing condition");
                        branches.push(FiringBranch {
                            residual: projected.residual(c),
                            condition: k,
                            lb: lb.clone(),
                            ub: ub.clone(),
                            delay,
                        });
                    }
                }
                if !branches.is_empty() {
                    out.push(SymbolicEnabling { transition: TransId(ti), tuple, branches });
                }
            }
        }
        out
    }

    fn obligations(&self, state: &SymbolicState) -> Vec<Obligation> {
        let c = &state.constraint;
        let mut out = Vec::new();
        for t in self.net.transitions.iter().filter(|t| t.is_strong()) {
            for tuple in tuples(&state.marking, t, None) {
                let Some(tf) = erased_tf(t, &tuple) else {
                    continue;
                };
                let value = value_of(t, &tuple);
                for (g, lb, ub) in eval_tf(c, &tf.lb, &tf.ub, &t.pre, &value) {
                    let alive = g.with(&Atom::le(lb, ub.clone())).with(&Atom::le(tl(), ub.clone()));
                    if c.and(&alive).is_satisfiable() {
                        out.push(Obligation { alive, ub });
                    }
                }
            }
        }
        out
    }

    /// Fires branch `branch` of `e` and returns the normalized successors.
    pub fn fire(&self, state: &SymbolicState, e: &SymbolicEnabling, branch: usize) -> Vec<SymbolicState> {
        let t = self.net.transition(e.transition);
        let mut marking = state.marking.clone();
        for (p, s) in t.pre.iter().zip(&e.tuple) {
            let bag = &mut marking[p.0];
            let at = bag.iter().position(|x| x == s).expect("tuple stamp present in marking");
            bag.remove(at);
        }
        let k = state.symbols().iter().next_back().map_or(0, |m| m + 1);
        let mut rename = BTreeMap::from([(Var::Tl, OLD_TL)]);
        let mut c = e.branches[branch].condition.clone();
        if t.post.is_empty() {
            rename.insert(FIRE, Var::Tl);
            c = c.rename(&rename);
        } else {
            rename.insert(FIRE, Var::Ts(k));
            c = c.rename(&rename).with(&Atom::eq(tl(), AffineExpr::var(Var::Ts(k))));
            for p in &t.post {
                marking[p.0].push(Stamp::Sym(k));
            }
        }
        for bag in marking.iter_mut() {
            bag.sort();
        }
        self.finish(marking, c.project_out(&BTreeSet::from([OLD_TL])))
    }
}

/// Conjoins the strong-semantics bounds, case-splitting on obligations
/// whose liveness the condition leaves open.
fn apply_obligations(k: LinearConstraint, obligations: &[Obligation]) -> Vec<LinearConstraint> {
    let fire = AffineExpr::var(FIRE);
    let mut work = vec![k];
    for o in obligations {
        let mut next = Vec::new();
        for k in work {
            let open = o.alive.residual(&k);
            let bounded = k.with(&Atom::le(fire.clone(), o.ub.clone()));
            if open.is_true() {
                if bounded.is_satisfiable() {
                    next.push(bounded);
                }
                continue;
            }
            if !k.and(&open).is_satisfiable() {
                next.push(k);
                continue;
            }
            let live = bounded.and(&open);
            if live.is_satisfiable() {
                next.push(live);
            }
            // Not alive: the first open atom fails, with the earlier ones
            // holding, so the pieces are disjoint.
            let mut prefix = k.clone();
            for a in open.split_atoms() {
                let piece = prefix.and(&a.negate_atom());
                if piece.is_satisfiable() {
                    next.push(piece);
                }
                prefix = prefix.and(&a);
            }
        }
        work = next;
    }
    work
}
