//! Symbolic evaluation of time expressions. `max` nodes are resolved by
//! implication against the context constraint and case-split otherwise.

use crate::constraint::{AffineExpr, Atom, LinearConstraint, Var};
use crate::net::{PlaceId, TimeExpr};

/// One case of an evaluation: under `guard`, the expression equals `value`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch {
    pub guard: LinearConstraint,
    pub value: AffineExpr,
}

/// Evaluates `expr` (already erased) given the value of each place.
///
/// `enab` ranges over `preset`; every place referenced must have a value.
/// Branch guards are disjoint up to ties and each is satisfiable together
/// with `ctx`.
pub(crate) fn eval(
    ctx: &LinearConstraint,
    expr: &TimeExpr,
    preset: &[PlaceId],
    value: &dyn Fn(PlaceId) -> Option<AffineExpr>,
) -> Vec<Branch> {
    let guard = LinearConstraint::truth();
    eval_under(ctx, &guard, expr, preset, value)
}

fn eval_under(
    ctx: &LinearConstraint,
    guard: &LinearConstraint,
    expr: &TimeExpr,
    preset: &[PlaceId],
    value: &dyn Fn(PlaceId) -> Option<AffineExpr>,
) -> Vec<Branch> {
    let get = |p: PlaceId| value(p).expect("time expression refers to a place without a value");
    match expr {
        TimeExpr::PlaceRef { place, offset } => {
            vec![Branch { guard: guard.clone(), value: get(*place).offset(*offset) }]
        }
        TimeExpr::Affine { terms, constant } => {
            let mut v = AffineExpr::constant(*constant);
            for (p, c) in terms {
                v = v.plus(&get(*p).scaled(*c));
            }
            vec![Branch { guard: guard.clone(), value: v }]
        }
        TimeExpr::Enab { offset } => {
            let values: Vec<AffineExpr> = preset.iter().map(|p| get(*p)).collect();
            resolve_max(ctx, guard, values)
                .into_iter()
                .map(|b| Branch { value: b.value.offset(*offset), ..b })
                .collect()
        }
        TimeExpr::Max { args, offset } => {
            // Product over the argument branches, then one max per combination.
            let mut partial: Vec<(LinearConstraint, Vec<AffineExpr>)> = vec![(guard.clone(), Vec::new())];
            for a in args {
                let mut next = Vec::new();
                for (g, vals) in &partial {
                    for b in eval_under(ctx, g, a, preset, value) {
                        let mut v = vals.clone();
                        v.push(b.value);
                        next.push((b.guard, v));
                    }
                }
                partial = next;
            }
            partial
                .into_iter()
                .flat_map(|(g, vals)| resolve_max(ctx, &g, vals))
                .map(|b| Branch { value: b.value.offset(*offset), ..b })
                .collect()
        }
    }
}

/// `max(values)` under `ctx && guard`. Dominated values are dropped using
/// implication; on ties the earliest argument wins.
pub(crate) fn resolve_max(ctx: &LinearConstraint, guard: &LinearConstraint, values: Vec<AffineExpr>) -> Vec<Branch> {
    let mut uniq: Vec<AffineExpr> = Vec::new();
    for v in values {
        if !uniq.contains(&v) {
            uniq.push(v);
        }
    }
    if uniq.len() == 1 {
        return vec![Branch { guard: guard.clone(), value: uniq.pop().unwrap() }];
    }
    let base = ctx.and(guard);
    let ge = |a: &AffineExpr, b: &AffineExpr| -> bool {
        let d = a.minus(b);
        if d.is_constant() {
            return d.constant_part() >= 0.into();
        }
        base.implies_atom(&Atom::ge(a.clone(), b.clone()))
    };
    let n = uniq.len();
    let mut alive = vec![true; n];
    for j in 0..n {
        for i in 0..n {
            if i == j || !alive[i] || !alive[j] {
                continue;
            }
            // i beats j if always >= and, on a tie, i comes first.
            if ge(&uniq[i], &uniq[j]) && (i < j || !ge(&uniq[j], &uniq[i])) {
                alive[j] = false;
            }
        }
    }
    let idx: Vec<usize> = (0..n).filter(|i| alive[*i]).collect();
    if idx.len() == 1 {
        return vec![Branch { guard: guard.clone(), value: uniq[idx[0]].clone() }];
    }
    let mut out = Vec::new();
    for &j in &idx {
        let mut g = guard.clone();
        for &i in &idx {
            if i != j {
                g.add(&Atom::ge(uniq[j].clone(), uniq[i].clone()));
            }
        }
        if ctx.and(&g).is_satisfiable() {
            out.push(Branch { guard: g, value: uniq[j].clone() });
        }
    }
    out
}

/// `(guard, lb, ub)` combinations of a time function, each satisfiable with
/// `ctx`.
pub(crate) fn eval_tf(
    ctx: &LinearConstraint,
    lb: &TimeExpr,
    ub: &TimeExpr,
    preset: &[PlaceId],
    value: &dyn Fn(PlaceId) -> Option<AffineExpr>,
) -> Vec<(LinearConstraint, AffineExpr, AffineExpr)> {
    let lbs = eval(ctx, lb, preset, value);
    let ubs = eval(ctx, ub, preset, value);
    let mut out = Vec::new();
    for l in &lbs {
        for u in &ubs {
            let g = l.guard.and(&u.guard);
            if lbs.len() * ubs.len() == 1 || ctx.and(&g).is_satisfiable() {
                out.push((g, l.value.clone(), u.value.clone()));
            }
        }
    }
    out
}

pub(crate) fn tl() -> AffineExpr {
    AffineExpr::var(Var::Tl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::parse_rational;

    fn t(i: u32) -> AffineExpr {
        AffineExpr::var(Var::Ts(i))
    }

    #[test]
    fn max_decided_by_constraint() {
        // max(T1 + 0.1, T0 + 0.01) with T1 >= T0: the first argument dominates.
        let ctx = LinearConstraint::parse("T1 >= T0 && T1 <= T0 + 0.1").unwrap();
        let e = TimeExpr::Max {
            args: vec![
                TimeExpr::PlaceRef { place: PlaceId(1), offset: parse_rational("0.1").unwrap() },
                TimeExpr::PlaceRef { place: PlaceId(0), offset: parse_rational("0.01").unwrap() },
            ],
            offset: 0.into(),
        };
        let val = |p: PlaceId| Some(t(p.0 as u32));
        let b = eval(&ctx, &e, &[PlaceId(0), PlaceId(1)], &val);
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].value, t(1).offset(parse_rational("0.1").unwrap()));
        assert!(b[0].guard.is_true());
    }

    #[test]
    fn undecided_max_splits() {
        let ctx = LinearConstraint::truth();
        let b = resolve_max(&ctx, &LinearConstraint::truth(), vec![t(0), t(1)]);
        assert_eq!(b.len(), 2);
        assert!(b[0].guard.implies_atom(&Atom::ge(t(0), t(1))));
        assert!(b[1].guard.implies_atom(&Atom::ge(t(1), t(0))));
    }

    #[test]
    fn tie_resolves_to_first_argument() {
        let ctx = LinearConstraint::parse("T0 = T1").unwrap();
        let b = resolve_max(&ctx, &LinearConstraint::truth(), vec![t(1), t(0)]);
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].value, t(1));
    }
}
