use super::PlaceId;
use crate::rational::{int, Rational};
use num_traits::{Signed, Zero};
use std::collections::BTreeMap;

/// Bound expression of a time function.
///
/// `Enab` stands for the maximum timestamp of the enabling tuple. `Affine`
/// covers general linear combinations (and pure constants, which are
/// absolute time references).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TimeExpr {
    PlaceRef { place: PlaceId, offset: Rational },
    Enab { offset: Rational },
    Max { args: Vec<TimeExpr>, offset: Rational },
    Affine { terms: BTreeMap<PlaceId, Rational>, constant: Rational },
}

/// Result of erasing places from an expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Erased {
    Expr(TimeExpr),
    /// An operator lost a required operand.
    NotWellDefined,
}

enum Partial {
    Keep(TimeExpr),
    Drop,
    Broken,
}

impl TimeExpr {
    pub fn place(place: PlaceId) -> Self {
        TimeExpr::PlaceRef { place, offset: Rational::zero() }
    }

    pub fn enab() -> Self {
        TimeExpr::Enab { offset: Rational::zero() }
    }

    pub fn offset(&self) -> Rational {
        match self {
            TimeExpr::PlaceRef { offset, .. } | TimeExpr::Enab { offset } | TimeExpr::Max { offset, .. } => *offset,
            TimeExpr::Affine { constant, .. } => *constant,
        }
    }

    /// Places syntactically referenced (not counting `enab`).
    pub fn places(&self) -> Vec<PlaceId> {
        let mut out = Vec::new();
        self.collect_places(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_places(&self, out: &mut Vec<PlaceId>) {
        match self {
            TimeExpr::PlaceRef { place, .. } => out.push(*place),
            TimeExpr::Enab { .. } => {}
            TimeExpr::Max { args, .. } => args.iter().for_each(|a| a.collect_places(out)),
            TimeExpr::Affine { terms, .. } => out.extend(terms.keys().copied()),
        }
    }

    pub fn contains_enab(&self) -> bool {
        match self {
            TimeExpr::Enab { .. } => true,
            TimeExpr::Max { args, .. } => args.iter().any(TimeExpr::contains_enab),
            _ => false,
        }
    }

    /// Whether the value depends on the token in `p` (`enab` depends on every
    /// preset place).
    pub fn contains(&self, p: PlaceId) -> bool {
        self.contains_enab() || self.places().contains(&p)
    }

    pub fn is_enab_form(&self) -> bool {
        matches!(self, TimeExpr::Enab { .. })
    }

    /// `max(...) + c`; `enab` counts since it is a max over the preset, and
    /// `p + c` as the single-argument case.
    pub fn is_max_form(&self) -> bool {
        matches!(self, TimeExpr::Max { .. } | TimeExpr::Enab { .. } | TimeExpr::PlaceRef { .. })
    }

    /// Shift-equivariant: `f(x + d) = f(x) + d`.
    pub fn is_relative(&self) -> bool {
        match self {
            TimeExpr::PlaceRef { .. } | TimeExpr::Enab { .. } => true,
            TimeExpr::Max { args, .. } => args.iter().all(TimeExpr::is_relative),
            TimeExpr::Affine { terms, .. } => terms.values().fold(Rational::zero(), |a, c| a + c) == int(1),
        }
    }

    /// Largest `|offset|` any place term is shifted by, enclosing `max`
    /// offsets included; `None` for affine combinations.
    pub fn offset_reach(&self) -> Option<Rational> {
        fn go(e: &TimeExpr, outer: Rational) -> Option<Rational> {
            match e {
                TimeExpr::PlaceRef { offset, .. } | TimeExpr::Enab { offset } => Some((outer + offset).abs()),
                TimeExpr::Max { args, offset } => {
                    args.iter().map(|a| go(a, outer + offset)).try_fold(Rational::zero(), |m, r| r.map(|r| m.max(r)))
                }
                TimeExpr::Affine { .. } => None,
            }
        }
        go(self, Rational::zero())
    }

    pub(crate) fn collect_constants(&self, out: &mut Vec<Rational>) {
        match self {
            TimeExpr::PlaceRef { offset, .. } | TimeExpr::Enab { offset } => out.push(*offset),
            TimeExpr::Max { args, offset } => {
                out.push(*offset);
                args.iter().for_each(|a| a.collect_constants(out));
            }
            TimeExpr::Affine { terms, constant } => {
                out.push(*constant);
                out.extend(terms.values().copied());
            }
        }
    }

    /// Removes the places in `erased` from the expression, `enab` being
    /// expanded over `preset`.
    pub fn erase(&self, preset: &[PlaceId], erased: &dyn Fn(PlaceId) -> bool) -> Erased {
        if !preset.iter().any(|p| erased(*p)) {
            return Erased::Expr(self.clone());
        }
        match self.erase_inner(preset, erased, false) {
            Partial::Keep(e) => Erased::Expr(e),
            Partial::Drop | Partial::Broken => Erased::NotWellDefined,
        }
    }

    fn erase_inner(&self, preset: &[PlaceId], erased: &dyn Fn(PlaceId) -> bool, in_max: bool) -> Partial {
        let droppable = |offset: &Rational| {
            if in_max && offset.is_zero() {
                Partial::Drop
            } else {
                Partial::Broken
            }
        };
        match self {
            TimeExpr::PlaceRef { place, offset } => {
                if erased(*place) {
                    droppable(offset)
                } else {
                    Partial::Keep(self.clone())
                }
            }
            TimeExpr::Enab { offset } => {
                let left: Vec<TimeExpr> = preset.iter().filter(|p| !erased(**p)).map(|p| TimeExpr::place(*p)).collect();
                if left.len() == preset.len() {
                    Partial::Keep(self.clone())
                } else if left.is_empty() {
                    droppable(offset)
                } else {
                    Partial::Keep(TimeExpr::Max { args: left, offset: *offset }.simplified())
                }
            }
            TimeExpr::Max { args, offset } => {
                let mut kept = Vec::new();
                for a in args {
                    match a.erase_inner(preset, erased, true) {
                        Partial::Keep(e) => kept.push(e),
                        Partial::Drop => {}
                        Partial::Broken => return Partial::Broken,
                    }
                }
                if kept.is_empty() {
                    droppable(offset)
                } else {
                    Partial::Keep(TimeExpr::Max { args: kept, offset: *offset }.simplified())
                }
            }
            TimeExpr::Affine { terms, .. } => {
                if terms.keys().any(|p| erased(*p)) {
                    Partial::Broken
                } else {
                    Partial::Keep(self.clone())
                }
            }
        }
    }

    /// `max({e}) + c` collapses to `e + c` when `e` is a place reference.
    fn simplified(self) -> TimeExpr {
        match self {
            TimeExpr::Max { mut args, offset } if args.len() == 1 => match args.pop().unwrap() {
                TimeExpr::PlaceRef { place, offset: inner } => TimeExpr::PlaceRef { place, offset: inner + offset },
                other => TimeExpr::Max { args: vec![other], offset },
            },
            other => other,
        }
    }
}

/// `[lb, ub]`; the possible firing instants of a tuple.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TimeFunction {
    pub lb: TimeExpr,
    pub ub: TimeExpr,
}

impl TimeFunction {
    pub fn places(&self) -> Vec<PlaceId> {
        let mut v = self.lb.places();
        v.extend(self.ub.places());
        v.sort();
        v.dedup();
        v
    }

    pub fn contains(&self, p: PlaceId) -> bool {
        self.lb.contains(p) || self.ub.contains(p)
    }

    pub fn contains_enab(&self) -> bool {
        self.lb.contains_enab() || self.ub.contains_enab()
    }

    /// Both bounds erased; `None` when either is not well-defined.
    pub fn erase(&self, preset: &[PlaceId], erased: &dyn Fn(PlaceId) -> bool) -> Option<TimeFunction> {
        match (self.lb.erase(preset, erased), self.ub.erase(preset, erased)) {
            (Erased::Expr(lb), Erased::Expr(ub)) => Some(TimeFunction { lb, ub }),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::parse_rational;

    fn p(i: usize) -> PlaceId {
        PlaceId(i)
    }

    fn r(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn erasure_of_max_argument() {
        // [max({p1, p2}), p2 + 0.5]
        let tf = TimeFunction {
            lb: TimeExpr::Max { args: vec![TimeExpr::place(p(1)), TimeExpr::place(p(2))], offset: Rational::zero() },
            ub: TimeExpr::PlaceRef { place: p(2), offset: r("0.5") },
        };
        let preset = [p(1), p(2)];
        let erased = tf.erase(&preset, &|q| q == p(1)).unwrap();
        assert_eq!(erased.lb, TimeExpr::place(p(2)));
        assert_eq!(erased.ub, TimeExpr::PlaceRef { place: p(2), offset: r("0.5") });
        assert!(tf.erase(&preset, &|q| q == p(2)).is_none());
        assert_eq!(tf.erase(&preset, &|_| false).unwrap(), tf);
    }

    #[test]
    fn enab_erasure() {
        let e = TimeExpr::Enab { offset: r("0.5") };
        let preset = [p(0), p(1), p(2)];
        assert_eq!(
            e.erase(&preset, &|q| q != p(1)),
            Erased::Expr(TimeExpr::PlaceRef { place: p(1), offset: r("0.5") })
        );
        assert_eq!(e.erase(&preset, &|_| true), Erased::NotWellDefined);
        match e.erase(&preset, &|q| q == p(0)) {
            Erased::Expr(TimeExpr::Max { args, offset }) => {
                assert_eq!(args, vec![TimeExpr::place(p(1)), TimeExpr::place(p(2))]);
                assert_eq!(offset, r("0.5"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn offset_operand_cannot_be_erased() {
        // max(p0 + 0.1, p1 + 0.01): erasing p0 deletes an operand of `+`.
        let e = TimeExpr::Max {
            args: vec![
                TimeExpr::PlaceRef { place: p(0), offset: r("0.1") },
                TimeExpr::PlaceRef { place: p(1), offset: r("0.01") },
            ],
            offset: Rational::zero(),
        };
        assert_eq!(e.erase(&[p(0), p(1)], &|q| q == p(0)), Erased::NotWellDefined);
    }

    #[test]
    fn relativity() {
        assert!(TimeExpr::Enab { offset: r("2") }.is_relative());
        let constant = TimeExpr::Affine { terms: BTreeMap::new(), constant: r("5") };
        assert!(!constant.is_relative());
        let avg = TimeExpr::Affine { terms: BTreeMap::from([(p(0), r("0.5")), (p(1), r("0.5"))]), constant: r("1") };
        assert!(avg.is_relative());
    }
}
