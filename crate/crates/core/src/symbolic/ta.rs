//! Time-anonymous replacement: a symbol in place `p` becomes `TA` when no
//! transition consuming from `p` can ever observe its value. Each check
//! below is a sufficient condition for one consumer; the first that holds
//! wins.

use super::enabling::tuples;
use super::eval::{eval_tf, tl};
use super::{Engine, Stamp, SymbolicState};
use crate::constraint::{AffineExpr, Atom, LinearConstraint, Var};
use crate::net::{PlaceId, Transition};
use itertools::Itertools;

/// Per preset position: the token's value, `None` for `TA`.
type Vals = Vec<Option<AffineExpr>>;

/// `(guard, lb, ub)` cases of a time function.
type Cases = Vec<(LinearConstraint, AffineExpr, AffineExpr)>;

struct Check<'s> {
    t: &'s Transition,
    p: PlaceId,
    c: &'s LinearConstraint,
    state: &'s SymbolicState,
    sym: u32,
    future_after_tl: bool,
}

impl Check<'_> {
    fn pos(&self, q: PlaceId) -> usize {
        self.t.pre.iter().position(|x| *x == q).expect("place in preset")
    }

    fn all_marked(&self) -> bool {
        self.t.pre.iter().all(|q| !self.state.marking[q.0].is_empty())
    }

    /// Evaluates the time function with `vals`, `extra` being erased as well.
    /// `None` when the erasure is not well-defined.
    fn cases(&self, ctx: &LinearConstraint, vals: &Vals, extra: Option<PlaceId>) -> Option<Cases> {
        let erased = |q: PlaceId| vals[self.pos(q)].is_none() || extra == Some(q);
        let tf = self.t.tf.erase(&self.t.pre, &erased)?;
        let value = |q: PlaceId| vals[self.pos(q)].clone();
        Some(eval_tf(ctx, &tf.lb, &tf.ub, &self.t.pre, &value))
    }

    /// Current tuples using `T_sym` at `p`, as values; ill-defined ones are
    /// not tuples and are skipped.
    fn current(&self) -> Vec<Vals> {
        tuples(&self.state.marking, self.t, Some((self.p, Stamp::Sym(self.sym))))
            .into_iter()
            .map(|tuple| tuple.iter().map(|s| s.sym().map(|i| AffineExpr::var(Var::Ts(i)))).collect::<Vals>())
            .filter(|vals| self.cases(self.c, vals, None).is_some())
            .collect()
    }

    /// Possible future tuples: `T_sym` at `p`, current stamps at marked
    /// places, a fresh unknown at each empty place. Returns the context
    /// extended with the assumptions on the unknowns.
    fn future(&self) -> (LinearConstraint, Vec<Vals>) {
        let mut ctx = self.c.clone();
        let mut choices: Vec<Vec<Option<AffineExpr>>> = Vec::new();
        for (k, q) in self.t.pre.iter().enumerate() {
            let bag = &self.state.marking[q.0];
            if *q == self.p {
                choices.push(vec![Some(AffineExpr::var(Var::Ts(self.sym)))]);
            } else if bag.is_empty() {
                let x = AffineExpr::var(Var::Aux(k as u32));
                if self.future_after_tl {
                    ctx.add(&Atom::ge(x.clone(), tl()));
                }
                choices.push(vec![Some(x)]);
            } else {
                choices.push(bag.iter().dedup().map(|s| s.sym().map(|i| AffineExpr::var(Var::Ts(i)))).collect());
            }
        }
        let all = choices
            .into_iter()
            .multi_cartesian_product()
            .filter(|vals| self.cases(&ctx, vals, None).is_some())
            .collect();
        (ctx, all)
    }

    /// For every tuple and case, `test(ctx && guard, lb, ub)`.
    fn every(
        &self,
        ctx: &LinearConstraint,
        tuples: &[Vals],
        test: impl Fn(&LinearConstraint, &AffineExpr, &AffineExpr) -> bool,
    ) -> bool {
        tuples.iter().all(|vals| {
            self.cases(ctx, vals, None).is_some_and(|cases| cases.iter().all(|(g, lb, ub)| test(&ctx.and(g), lb, ub)))
        })
    }

    /// Erasing `p` does not change the selected bound(s) of any tuple.
    fn erasure_invariant(&self, ctx: &LinearConstraint, tuples: &[Vals], lb_only: bool) -> bool {
        tuples.iter().all(|vals| {
            let (Some(full), Some(erased)) = (self.cases(ctx, vals, None), self.cases(ctx, vals, Some(self.p))) else {
                return false;
            };
            full.iter().all(|(g1, l1, u1)| {
                erased.iter().all(|(g2, l2, u2)| {
                    let both = ctx.and(g1).and(g2);
                    !both.is_satisfiable()
                        || (both.implies_atom(&Atom::eq(l1.clone(), l2.clone()))
                            && (lb_only || both.implies_atom(&Atom::eq(u1.clone(), u2.clone()))))
                })
            })
        })
    }

    fn holds(&self) -> bool {
        let tf = &self.t.tf;
        let expired = |k: &LinearConstraint, lb: &AffineExpr, ub: &AffineExpr| {
            k.implies_atom(&Atom::gt(tl(), ub.clone())) && k.implies_atom(&Atom::ge(tl(), lb.clone()))
        };
        if self.all_marked() {
            if !tf.contains(self.p) {
                return true;
            }
            let cur = self.current();
            if tf.lb.is_enab_form() && tf.ub.is_enab_form() && self.newer_elsewhere() {
                return true;
            }
            if tf.lb.is_max_form() && tf.ub.is_max_form() && self.erasure_invariant(self.c, &cur, false) {
                return true;
            }
            if self.every(self.c, &cur, expired) {
                return true;
            }
            let never = |k: &LinearConstraint, lb: &AffineExpr, ub: &AffineExpr| {
                k.implies_atom(&Atom::gt(lb.clone(), ub.clone()))
            };
            if self.every(self.c, &cur, never) {
                let started =
                    |k: &LinearConstraint, lb: &AffineExpr, _: &AffineExpr| k.implies_atom(&Atom::ge(tl(), lb.clone()));
                if self.every(self.c, &cur, started) || self.erasure_invariant(self.c, &cur, true) {
                    return true;
                }
            }
            self.only_p_concrete_expired()
        } else {
            if !tf.contains(self.p) {
                return true;
            }
            let (ctx, fut) = self.future();
            let started =
                |k: &LinearConstraint, lb: &AffineExpr, _: &AffineExpr| k.implies_atom(&Atom::ge(tl(), lb.clone()));
            if tf.lb.contains(self.p) && !tf.ub.contains(self.p) && self.every(&ctx, &fut, started) {
                return true;
            }
            if tf.lb.is_max_form() && tf.ub.is_max_form() && self.erasure_invariant(&ctx, &fut, false) {
                return true;
            }
            if self.every(&ctx, &fut, expired) {
                return true;
            }
            let never_started = |k: &LinearConstraint, lb: &AffineExpr, ub: &AffineExpr| {
                k.implies_atom(&Atom::gt(lb.clone(), ub.clone())) && k.implies_atom(&Atom::ge(tl(), lb.clone()))
            };
            self.every(&ctx, &fut, never_started)
        }
    }

    /// Some other preset place holds only concrete tokens no older than
    /// `T_sym`, so `enab` never picks `T_sym` uniquely.
    fn newer_elsewhere(&self) -> bool {
        self.t.pre.iter().any(|q| {
            *q != self.p && {
                let bag = &self.state.marking[q.0];
                !bag.is_empty() && bag.iter().all(|s| s.sym().is_some_and(|j| j >= self.sym))
            }
        })
    }

    /// With every other token anonymous, the window has already passed.
    fn only_p_concrete_expired(&self) -> bool {
        let vals: Vals =
            self.t.pre.iter().map(|q| (*q == self.p).then(|| AffineExpr::var(Var::Ts(self.sym)))).collect();
        match self.cases(self.c, &vals, None) {
            Some(cases) => cases.iter().all(|(g, lb, ub)| {
                let k = self.c.and(g);
                k.implies_atom(&Atom::gt(tl(), ub.clone())) && k.implies_atom(&Atom::ge(tl(), lb.clone()))
            }),
            None => false,
        }
    }
}

impl Engine<'_> {
    /// Replaces by `TA` every symbol occurrence whose value no consumer can
    /// observe, scanning places in declaration order until a full pass
    /// changes nothing. The constraint is left as is; the caller
    /// renormalizes.
    pub(crate) fn ta_replace(&self, state: &SymbolicState) -> SymbolicState {
        let mut st = state.clone();
        loop {
            let mut changed = false;
            for p in 0..st.marking.len() {
                let syms: Vec<u32> = st.marking[p].iter().filter_map(Stamp::sym).dedup().collect();
                for sym in syms {
                    if self.replaceable(&st, PlaceId(p), sym) {
                        let bag = &mut st.marking[p];
                        let at = bag.iter().position(|s| *s == Stamp::Sym(sym)).expect("symbol in bag");
                        bag[at] = Stamp::Ta;
                        bag.sort();
                        changed = true;
                    }
                }
            }
            if !changed {
                return st;
            }
        }
    }

    fn replaceable(&self, st: &SymbolicState, p: PlaceId, sym: u32) -> bool {
        self.net.postset(p).iter().all(|t| {
            let t = self.net.transition(*t);
            if t.tf.erase(&t.pre, &|q| q == p).is_none() {
                return false;
            }
            Check { t, p, c: &st.constraint, state: st, sym, future_after_tl: self.config.future_after_tl }.holds()
        })
    }
}
