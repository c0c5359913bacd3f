//! Exact linear-constraint algebra over timestamp symbols.
//!
//! A [`LinearConstraint`] is a conjunction of linear inequalities with
//! rational coefficients. Internally every atom is kept as
//! `sum(a_i * v_i) + k <= 0` (or `< 0`) with integer coefficients whose gcd
//! is one, which makes parallel atoms directly comparable. Equalities are
//! stored as two opposite non-strict atoms.
//!
//! Satisfiability, projection and bounds are all computed by Fourier-Motzkin
//! elimination with strictness propagation; no floating point is involved.

use crate::rational::{fmt_decimal, fmt_fraction, int, parse_rational, Rational};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// A constraint variable.
///
/// `Ts(i)` is the timestamp symbol `T_i`, `Tl` the last firing time and
/// `Aux` a temporary (elimination helpers, future-token placeholders).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Var {
    Tl,
    Ts(u32),
    Aux(u32),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Tl => write!(f, "TL"),
            Var::Ts(i) => write!(f, "T{i}"),
            Var::Aux(i) => write!(f, "X{i}"),
        }
    }
}

impl Var {
    /// Ordering used when printing: TL first, then newest symbols first.
    fn print_rank(&self) -> (u8, i64) {
        match self {
            Var::Tl => (0, 0),
            Var::Ts(i) => (1, -(*i as i64)),
            Var::Aux(i) => (2, *i as i64),
        }
    }
}

/// `sum(terms) + constant` with no zero coefficients stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct AffineExpr {
    terms: BTreeMap<Var, Rational>,
    constant: Rational,
}

impl AffineExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational) -> Self {
        AffineExpr { terms: BTreeMap::new(), constant: c }
    }

    pub fn var(v: Var) -> Self {
        Self::term(v, int(1))
    }

    pub fn term(v: Var, coeff: Rational) -> Self {
        let mut e = Self::zero();
        e.add_term(v, coeff);
        e
    }

    pub fn terms(&self) -> &BTreeMap<Var, Rational> {
        &self.terms
    }

    pub fn constant_part(&self) -> Rational {
        self.constant
    }

    pub fn coeff(&self, v: Var) -> Rational {
        self.terms.get(&v).copied().unwrap_or_else(Rational::zero)
    }

    pub fn add_term(&mut self, v: Var, coeff: Rational) {
        let entry = self.terms.entry(v).or_insert_with(Rational::zero);
        *entry += coeff;
        if entry.is_zero() {
            self.terms.remove(&v);
        }
    }

    pub fn plus(&self, other: &AffineExpr) -> AffineExpr {
        let mut out = self.clone();
        for (v, c) in &other.terms {
            out.add_term(*v, *c);
        }
        out.constant += other.constant;
        out
    }

    pub fn minus(&self, other: &AffineExpr) -> AffineExpr {
        self.plus(&other.scaled(-int(1)))
    }

    pub fn offset(&self, c: Rational) -> AffineExpr {
        let mut out = self.clone();
        out.constant += c;
        out
    }

    pub fn scaled(&self, k: Rational) -> AffineExpr {
        if k.is_zero() {
            return AffineExpr::zero();
        }
        AffineExpr { terms: self.terms.iter().map(|(v, c)| (*v, c * k)).collect(), constant: self.constant * k }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    /// Replaces every variable through `f`.
    pub fn substitute(&self, f: &dyn Fn(Var) -> AffineExpr) -> AffineExpr {
        let mut out = AffineExpr::constant(self.constant);
        for (v, c) in &self.terms {
            out = out.plus(&f(*v).scaled(*c));
        }
        out
    }

    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> AffineExpr {
        self.substitute(&|v| AffineExpr::var(*map.get(&v).unwrap_or(&v)))
    }

    pub fn eval(&self, assign: &dyn Fn(Var) -> Option<Rational>) -> Option<Rational> {
        let mut acc = self.constant;
        for (v, c) in &self.terms {
            acc += c * assign(*v)?;
        }
        Some(acc)
    }
}

impl fmt::Display for AffineExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms: Vec<_> = self.terms.iter().collect();
        terms.sort_by_key(|(v, _)| v.print_rank());
        let s = render_terms(terms.iter().map(|(v, c)| (**v, **c)), self.constant, true, false);
        f.write_str(&s)
    }
}

fn render_terms(
    terms: impl Iterator<Item = (Var, Rational)>,
    constant: Rational,
    include_constant: bool,
    decimal: bool,
) -> String {
    let num = |r: &Rational| {
        if decimal {
            fmt_decimal(r)
        } else {
            fmt_fraction(r)
        }
    };
    let mut out = String::new();
    for (v, c) in terms {
        let neg = c < Rational::zero();
        let mag = c.abs();
        if out.is_empty() {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        if mag != int(1) {
            out.push_str(&num(&mag));
            out.push('*');
        }
        out.push_str(&v.to_string());
    }
    if include_constant && (!constant.is_zero() || out.is_empty()) {
        if out.is_empty() {
            out.push_str(&num(&constant));
        } else if constant < Rational::zero() {
            out.push_str(" - ");
            out.push_str(&num(&constant.abs()));
        } else {
            out.push_str(" + ");
            out.push_str(&num(&constant));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rel {
    Le,
    Lt,
    Eq,
    Ge,
    Gt,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Le => "<=",
            Rel::Lt => "<",
            Rel::Eq => "=",
            Rel::Ge => ">=",
            Rel::Gt => ">",
        }
    }
}

/// `lhs rel rhs`; the user-facing form of a constraint atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub lhs: AffineExpr,
    pub rel: Rel,
    pub rhs: AffineExpr,
}

impl Atom {
    pub fn new(lhs: AffineExpr, rel: Rel, rhs: AffineExpr) -> Self {
        Atom { lhs, rel, rhs }
    }

    pub fn le(lhs: AffineExpr, rhs: AffineExpr) -> Self {
        Self::new(lhs, Rel::Le, rhs)
    }

    pub fn lt(lhs: AffineExpr, rhs: AffineExpr) -> Self {
        Self::new(lhs, Rel::Lt, rhs)
    }

    pub fn ge(lhs: AffineExpr, rhs: AffineExpr) -> Self {
        Self::new(lhs, Rel::Ge, rhs)
    }

    pub fn gt(lhs: AffineExpr, rhs: AffineExpr) -> Self {
        Self::new(lhs, Rel::Gt, rhs)
    }

    pub fn eq(lhs: AffineExpr, rhs: AffineExpr) -> Self {
        Self::new(lhs, Rel::Eq, rhs)
    }

    fn to_ineqs(&self) -> Vec<Ineq> {
        let d = self.lhs.minus(&self.rhs);
        match self.rel {
            Rel::Le => vec![Ineq::from_expr(&d, false)],
            Rel::Lt => vec![Ineq::from_expr(&d, true)],
            Rel::Ge => vec![Ineq::from_expr(&d.scaled(-int(1)), false)],
            Rel::Gt => vec![Ineq::from_expr(&d.scaled(-int(1)), true)],
            Rel::Eq => vec![Ineq::from_expr(&d, false), Ineq::from_expr(&d.scaled(-int(1)), false)],
        }
    }
}

/// `sum(coeffs) + constant <= 0`, or `< 0` when strict.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Ineq {
    coeffs: Vec<(Var, i128)>,
    constant: Rational,
    strict: bool,
}

fn checked_mul(a: i128, b: i128) -> i128 {
    a.checked_mul(b).expect("coefficient overflow in constraint arithmetic")
}

impl Ineq {
    fn from_expr(e: &AffineExpr, strict: bool) -> Ineq {
        let l = e.terms.values().fold(1i128, |acc, c| acc.lcm(c.denom()));
        let coeffs: Vec<(Var, i128)> = e.terms.iter().map(|(v, c)| (*v, (c * int(l)).to_integer())).collect();
        Ineq::normalized(coeffs, e.constant * int(l), strict)
    }

    fn normalized(mut coeffs: Vec<(Var, i128)>, constant: Rational, strict: bool) -> Ineq {
        coeffs.retain(|(_, c)| *c != 0);
        let g = coeffs.iter().fold(0i128, |acc, (_, c)| acc.gcd(c));
        if g > 1 {
            for (_, c) in coeffs.iter_mut() {
                *c /= g;
            }
            return Ineq { coeffs, constant: constant / int(g), strict };
        }
        Ineq { coeffs, constant, strict }
    }

    fn false_atom() -> Ineq {
        Ineq { coeffs: vec![], constant: int(1), strict: false }
    }

    fn coeff(&self, v: Var) -> i128 {
        self.coeffs.iter().find(|(w, _)| *w == v).map(|(_, c)| *c).unwrap_or(0)
    }

    fn is_trivially_true(&self) -> bool {
        self.coeffs.is_empty()
            && if self.strict { self.constant < Rational::zero() } else { self.constant <= Rational::zero() }
    }

    fn is_trivially_false(&self) -> bool {
        self.coeffs.is_empty() && !self.is_trivially_true()
    }

    fn negated(&self) -> Ineq {
        Ineq {
            coeffs: self.coeffs.iter().map(|(v, c)| (*v, -c)).collect(),
            constant: -self.constant,
            strict: !self.strict,
        }
    }

    /// Whether `other` is the opposite non-strict atom (together: an equality).
    fn is_opposite(&self, other: &Ineq) -> bool {
        !self.strict
            && !other.strict
            && self.constant == -other.constant
            && self.coeffs.len() == other.coeffs.len()
            && self.coeffs.iter().zip(&other.coeffs).all(|(a, b)| a.0 == b.0 && a.1 == -b.1)
    }

    /// `ka * self + kb * other` (ka, kb > 0).
    fn combine(&self, ka: i128, other: &Ineq, kb: i128) -> Ineq {
        let mut map: BTreeMap<Var, i128> = BTreeMap::new();
        for (v, c) in &self.coeffs {
            *map.entry(*v).or_insert(0) += checked_mul(*c, ka);
        }
        for (v, c) in &other.coeffs {
            let e = map.entry(*v).or_insert(0);
            *e = e.checked_add(checked_mul(*c, kb)).expect("coefficient overflow in constraint arithmetic");
        }
        Ineq::normalized(
            map.into_iter().collect(),
            self.constant * int(ka) + other.constant * int(kb),
            self.strict || other.strict,
        )
    }

    fn to_expr(&self) -> AffineExpr {
        let mut e = AffineExpr::constant(self.constant);
        for (v, c) in &self.coeffs {
            e.add_term(*v, int(*c));
        }
        e
    }

    fn holds(&self, assign: &dyn Fn(Var) -> Option<Rational>) -> Option<bool> {
        let v = self.to_expr().eval(assign)?;
        Some(if self.strict { v < Rational::zero() } else { v <= Rational::zero() })
    }
}

/// Lower or upper end of an expression's range over a constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bound {
    Infinite,
    Finite { value: Rational, closed: bool },
}

impl Bound {
    pub fn value(&self) -> Option<Rational> {
        match self {
            Bound::Infinite => None,
            Bound::Finite { value, .. } => Some(*value),
        }
    }

    pub fn closed(value: Rational) -> Bound {
        Bound::Finite { value, closed: true }
    }
}

/// Infimum and supremum of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Bound,
    pub upper: Bound,
}

impl Bounds {
    /// Whether every value in `other` lies in `self`.
    pub fn contains(&self, other: &Bounds) -> bool {
        // `a` reaches at least as far out as `b` on one side; `outward` says
        // which direction is outward.
        let covers = |a: &Bound, b: &Bound, outward: std::cmp::Ordering| match (a, b) {
            (Bound::Infinite, _) => true,
            (_, Bound::Infinite) => false,
            (Bound::Finite { value: va, closed: ca }, Bound::Finite { value: vb, closed: cb }) => {
                va.cmp(vb) == outward || (va == vb && (*ca || !*cb))
            }
        };
        covers(&self.lower, &other.lower, std::cmp::Ordering::Less)
            && covers(&self.upper, &other.upper, std::cmp::Ordering::Greater)
    }
}

/// Conjunction of linear atoms; `TRUE` is the empty conjunction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct LinearConstraint {
    ineqs: Vec<Ineq>,
}

/// Rendering style for constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumberStyle {
    Fraction,
    Decimal,
}

impl LinearConstraint {
    pub fn truth() -> Self {
        Self::default()
    }

    pub fn falsity() -> Self {
        LinearConstraint { ineqs: vec![Ineq::false_atom()] }
    }

    pub fn from_atoms<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> Self {
        let mut c = Self::truth();
        for a in atoms {
            c.add(a);
        }
        c
    }

    pub fn single(atom: Atom) -> Self {
        Self::from_atoms([&atom])
    }

    pub fn is_true(&self) -> bool {
        self.ineqs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.ineqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ineqs.is_empty()
    }

    pub fn add(&mut self, atom: &Atom) {
        let mut ineqs = std::mem::take(&mut self.ineqs);
        ineqs.extend(atom.to_ineqs());
        self.ineqs = tidy(ineqs);
    }

    pub fn with(&self, atom: &Atom) -> Self {
        let mut c = self.clone();
        c.add(atom);
        c
    }

    pub fn and(&self, other: &LinearConstraint) -> Self {
        let mut ineqs = self.ineqs.clone();
        ineqs.extend(other.ineqs.iter().cloned());
        LinearConstraint { ineqs: tidy(ineqs) }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.ineqs.iter().flat_map(|i| i.coeffs.iter().map(|(v, _)| *v)).collect()
    }

    pub fn mentions(&self, v: Var) -> bool {
        self.ineqs.iter().any(|i| i.coeff(v) != 0)
    }

    /// Replaces every variable through `f`.
    pub fn substitute(&self, f: &dyn Fn(Var) -> AffineExpr) -> Self {
        let ineqs = self.ineqs.iter().map(|i| Ineq::from_expr(&i.to_expr().substitute(f), i.strict)).collect();
        LinearConstraint { ineqs: tidy(ineqs) }
    }

    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> Self {
        self.substitute(&|v| AffineExpr::var(*map.get(&v).unwrap_or(&v)))
    }

    /// Evaluates the constraint under a complete assignment; `None` when a
    /// mentioned variable is unassigned.
    pub fn holds(&self, assign: &dyn Fn(Var) -> Option<Rational>) -> Option<bool> {
        let mut all = true;
        for i in &self.ineqs {
            all &= i.holds(assign)?;
        }
        Some(all)
    }

    pub fn is_satisfiable(&self) -> bool {
        if self.ineqs.is_empty() {
            return true;
        }
        if let Some(sat) = difference_satisfiable(&self.ineqs) {
            return sat;
        }
        let vars: Vec<Var> = self.vars().into_iter().collect();
        let rest = eliminate_all(self.ineqs.clone(), &vars);
        !rest.iter().any(Ineq::is_trivially_false)
    }

    /// Every solution of `self` satisfies `other`.
    pub fn implies(&self, other: &LinearConstraint) -> bool {
        other.ineqs.iter().all(|i| self.implies_ineq(i))
    }

    pub fn implies_atom(&self, atom: &Atom) -> bool {
        atom.to_ineqs().iter().all(|i| self.implies_ineq(i))
    }

    fn implies_ineq(&self, i: &Ineq) -> bool {
        if i.is_trivially_true() {
            return true;
        }
        let negated = i.negated();
        if let Some(sat) = difference_satisfiable(self.ineqs.iter().chain([&negated])) {
            return !sat;
        }
        let mut ineqs = self.ineqs.clone();
        ineqs.push(negated);
        !LinearConstraint { ineqs: tidy(ineqs) }.is_satisfiable()
    }

    /// Atoms of `self` that `ctx` does not already imply.
    pub fn residual(&self, ctx: &LinearConstraint) -> Self {
        let ineqs = self.ineqs.iter().filter(|i| !ctx.implies_ineq(i)).cloned().collect();
        LinearConstraint { ineqs }
    }

    /// The individual inequalities, each as a one-atom constraint
    /// (an equality contributes two).
    pub fn split_atoms(&self) -> Vec<LinearConstraint> {
        self.ineqs.iter().map(|i| LinearConstraint { ineqs: vec![i.clone()] }).collect()
    }

    /// Negation of a one-atom constraint.
    ///
    /// # Panics
    /// When `self` has more than one inequality.
    pub fn negate_atom(&self) -> LinearConstraint {
        assert!(self.ineqs.len() <= 1, "negate_atom on a conjunction");
        match self.ineqs.first() {
            None => Self::falsity(),
            Some(i) => LinearConstraint { ineqs: tidy(vec![i.negated()]) },
        }
    }

    /// Mutual implication.
    pub fn equivalent(&self, other: &LinearConstraint) -> bool {
        self.implies(other) && other.implies(self)
    }

    /// Projects away `vars` and prunes redundant atoms.
    pub fn eliminate(&self, vars: &BTreeSet<Var>) -> Self {
        let vs: Vec<Var> = vars.iter().copied().filter(|v| self.mentions(*v)).collect();
        let projected = LinearConstraint { ineqs: tidy(eliminate_all(self.ineqs.clone(), &vs)) };
        projected.prune_redundant()
    }

    /// Projection without the redundancy pass.
    pub fn project_out(&self, vars: &BTreeSet<Var>) -> Self {
        let vs: Vec<Var> = vars.iter().copied().filter(|v| self.mentions(*v)).collect();
        LinearConstraint { ineqs: tidy(eliminate_all(self.ineqs.clone(), &vs)) }
    }

    /// Drops every atom implied by the remaining ones.
    pub fn prune_redundant(&self) -> Self {
        if self.ineqs.iter().any(Ineq::is_trivially_false) {
            return Self::falsity();
        }
        let mut kept = self.ineqs.clone();
        let mut idx = 0;
        while idx < kept.len() {
            let candidate = kept[idx].clone();
            let others: Vec<Ineq> =
                kept.iter().enumerate().filter(|(j, _)| *j != idx).map(|(_, i)| i.clone()).collect();
            if (LinearConstraint { ineqs: others.clone() }).implies_ineq(&candidate) {
                kept = others;
            } else {
                idx += 1;
            }
        }
        LinearConstraint { ineqs: tidy(kept) }
    }

    /// Infimum and supremum of `e` over the solutions; `None` when
    /// unsatisfiable.
    pub fn bounds_of(&self, e: &AffineExpr) -> Option<Bounds> {
        if !self.is_satisfiable() {
            return None;
        }
        let z = Var::Aux(u32::MAX);
        let mut ineqs = self.ineqs.clone();
        let def = AffineExpr::var(z).minus(e);
        ineqs.push(Ineq::from_expr(&def, false));
        ineqs.push(Ineq::from_expr(&def.scaled(-int(1)), false));
        let vars: Vec<Var> = LinearConstraint { ineqs: ineqs.clone() }.vars().into_iter().filter(|v| *v != z).collect();
        let rest = eliminate_all(tidy(ineqs), &vars);
        if rest.iter().any(Ineq::is_trivially_false) {
            return None;
        }
        let mut lower = Bound::Infinite;
        let mut upper = Bound::Infinite;
        for i in &rest {
            let a = i.coeff(z);
            if a == 0 {
                continue;
            }
            let value = -i.constant / int(a);
            let closed = !i.strict;
            if a > 0 {
                upper = match upper {
                    Bound::Finite { value: u, closed: uc } if u < value || (u == value && !uc) => upper,
                    _ => Bound::Finite { value, closed },
                };
            } else {
                lower = match lower {
                    Bound::Finite { value: l, closed: lc } if l > value || (l == value && !lc) => lower,
                    _ => Bound::Finite { value, closed },
                };
            }
        }
        Some(Bounds { lower, upper })
    }

    /// Strongest constraint over differences implied by `self`: every
    /// variable is shifted by a fresh offset which is then projected away.
    pub fn canonicalize_relative(&self) -> Self {
        let delta = Var::Aux(u32::MAX - 1);
        let shifted = self.substitute(&|v| AffineExpr::var(v).plus(&AffineExpr::var(delta)));
        shifted.eliminate(&BTreeSet::from([delta]))
    }

    /// Human-readable atoms, equalities recombined.
    pub fn atom_strings(&self, style: NumberStyle) -> Vec<String> {
        let mut used = vec![false; self.ineqs.len()];
        let mut out = Vec::new();
        for (i, a) in self.ineqs.iter().enumerate() {
            if used[i] {
                continue;
            }
            used[i] = true;
            let partner = (i + 1..self.ineqs.len()).find(|&j| !used[j] && a.is_opposite(&self.ineqs[j]));
            if let Some(j) = partner {
                used[j] = true;
            }
            let eq = partner.is_some();
            out.push(render_ineq(a, eq, style));
        }
        out
    }

    pub fn display(&self, style: NumberStyle) -> String {
        if self.is_true() {
            return "TRUE".to_string();
        }
        self.atom_strings(style).join(" && ")
    }

    /// Parses `a <= b && c = d ...` over `T<i>`, `TL`, `X<i>`.
    pub fn parse(text: &str) -> Result<Self, ConstraintParseError> {
        let text = text.trim();
        if text.eq_ignore_ascii_case("true") || text.is_empty() {
            return Ok(Self::truth());
        }
        let mut atoms = Vec::new();
        for part in text.split("&&") {
            atoms.push(parse_atom(part, &|name| parse_var_name(name))?);
        }
        Ok(Self::from_atoms(&atoms))
    }
}

impl fmt::Display for LinearConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display(NumberStyle::Fraction))
    }
}

fn render_ineq(i: &Ineq, eq: bool, style: NumberStyle) -> String {
    let mut terms: Vec<(Var, Rational)> = i.coeffs.iter().map(|(v, c)| (*v, int(*c))).collect();
    terms.sort_by_key(|(v, _)| v.print_rank());
    // sum + k <= 0  <=>  sum <= -k ; scale so the leading coefficient is 1.
    let lead = terms[0].1;
    let scale = Rational::one() / lead.abs();
    let flip = lead < Rational::zero();
    let sign = if flip { -int(1) } else { int(1) };
    let terms: Vec<(Var, Rational)> = terms.into_iter().map(|(v, c)| (v, c * scale * sign)).collect();
    let rhs = -i.constant * scale * sign;
    let rel = match (eq, i.strict, flip) {
        (true, _, _) => "=",
        (false, false, false) => "<=",
        (false, true, false) => "<",
        (false, false, true) => ">=",
        (false, true, true) => ">",
    };
    let lhs = render_terms(terms.into_iter(), Rational::zero(), false, style == NumberStyle::Decimal);
    let rhs = match style {
        NumberStyle::Decimal => fmt_decimal(&rhs),
        NumberStyle::Fraction => fmt_fraction(&rhs),
    };
    format!("{lhs} {rel} {rhs}")
}

/// Sorts, drops trivially true atoms and keeps only the tightest atom per
/// coefficient vector.
fn tidy(mut ineqs: Vec<Ineq>) -> Vec<Ineq> {
    if ineqs.iter().any(Ineq::is_trivially_false) {
        return vec![Ineq::false_atom()];
    }
    ineqs.retain(|i| !i.is_trivially_true());
    ineqs.sort_by(|a, b| a.coeffs.cmp(&b.coeffs).then(b.constant.cmp(&a.constant)).then(b.strict.cmp(&a.strict)));
    ineqs.dedup_by(|later, first| later.coeffs == first.coeffs);
    ineqs
}

/// Satisfiability of a system of difference constraints `x - y (<|<=) c`
/// (one side may be the constant zero) as absence of a negative cycle;
/// `None` when some inequality has another shape.
fn difference_satisfiable<'a>(ineqs: impl IntoIterator<Item = &'a Ineq>) -> Option<bool> {
    // Node 0 is the constant zero.
    let mut index: BTreeMap<Var, usize> = BTreeMap::new();
    let mut arcs: Vec<(usize, usize, Rational, bool)> = Vec::new();
    for i in ineqs {
        let (pos, neg) = match i.coeffs.as_slice() {
            [] => return Some(!i.is_trivially_false()),
            [(v, 1)] => (Some(*v), None),
            [(v, -1)] => (None, Some(*v)),
            [(a, 1), (b, -1)] => (Some(*a), Some(*b)),
            [(a, -1), (b, 1)] => (Some(*b), Some(*a)),
            _ => return None,
        };
        let mut node = |v: Option<Var>| match v {
            None => 0,
            Some(v) => {
                let next = index.len() + 1;
                *index.entry(v).or_insert(next)
            }
        };
        // pos - neg <= -constant: an arc neg -> pos.
        let (to, from) = (node(pos), node(neg));
        arcs.push((from, to, -i.constant, i.strict));
    }
    let scale = arcs.iter().fold(1i128, |acc, a| acc.lcm(a.2.denom()));
    let n = index.len() + 1;
    // Shortest known bound per pair; `strict` marks an open bound.
    let mut d: Vec<Option<(i128, bool)>> = vec![None; n * n];
    let tighter = |a: (i128, bool), b: (i128, bool)| a.0 < b.0 || (a.0 == b.0 && a.1 && !b.1);
    for (from, to, c, strict) in arcs {
        let w = ((c * int(scale)).to_integer(), strict);
        let slot = &mut d[from * n + to];
        if slot.is_none_or(|old| tighter(w, old)) {
            *slot = Some(w);
        }
    }
    for k in 0..n {
        for a in 0..n {
            let Some(ak) = d[a * n + k] else { continue };
            for b in 0..n {
                let Some(kb) = d[k * n + b] else { continue };
                let w = (checked_add(ak.0, kb.0), ak.1 || kb.1);
                let slot = &mut d[a * n + b];
                if slot.is_none_or(|old| tighter(w, old)) {
                    *slot = Some(w);
                }
            }
            if d[a * n + a].is_some_and(|(w, strict)| w < 0 || (w == 0 && strict)) {
                return Some(false);
            }
        }
    }
    Some(true)
}

fn checked_add(a: i128, b: i128) -> i128 {
    a.checked_add(b).expect("constant overflow in constraint arithmetic")
}

fn eliminate_all(mut ineqs: Vec<Ineq>, vars: &[Var]) -> Vec<Ineq> {
    let mut pending: Vec<Var> = vars.to_vec();
    while !pending.is_empty() {
        if ineqs.iter().any(Ineq::is_trivially_false) {
            return vec![Ineq::false_atom()];
        }
        // Prefer a variable bound by an equality, then the cheapest FM step.
        let mut best = 0usize;
        let mut best_cost = i64::MAX;
        for (k, v) in pending.iter().enumerate() {
            let cost = if find_equality(&ineqs, *v).is_some() {
                -1
            } else {
                let pos = ineqs.iter().filter(|i| i.coeff(*v) > 0).count() as i64;
                let neg = ineqs.iter().filter(|i| i.coeff(*v) < 0).count() as i64;
                pos * neg - pos - neg
            };
            if cost < best_cost {
                best_cost = cost;
                best = k;
            }
        }
        let v = pending.swap_remove(best);
        ineqs = tidy(eliminate_var(ineqs, v));
    }
    ineqs
}

fn find_equality(ineqs: &[Ineq], v: Var) -> Option<usize> {
    for (k, a) in ineqs.iter().enumerate() {
        if a.strict || a.coeff(v) <= 0 {
            continue;
        }
        if ineqs.iter().any(|b| a.is_opposite(b)) {
            return Some(k);
        }
    }
    None
}

fn eliminate_var(ineqs: Vec<Ineq>, v: Var) -> Vec<Ineq> {
    if let Some(k) = find_equality(&ineqs, v) {
        let eq = ineqs[k].clone();
        let a = eq.coeff(v);
        let neg_eq = eq.negated();
        let mut out = Vec::with_capacity(ineqs.len());
        for i in ineqs {
            let b = i.coeff(v);
            if b == 0 {
                out.push(i);
            } else if b > 0 {
                // a*i - b*eq, using the opposite atom to keep positive multipliers.
                let opp = Ineq { strict: false, ..neg_eq.clone() };
                out.push(i.combine(a, &opp, b));
            } else {
                out.push(i.combine(a, &eq, -b));
            }
        }
        return out;
    }
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    let mut out = Vec::new();
    for i in ineqs {
        match i.coeff(v) {
            0 => out.push(i),
            c if c > 0 => pos.push(i),
            _ => neg.push(i),
        }
    }
    for p in &pos {
        let a = p.coeff(v);
        for n in &neg {
            let b = -n.coeff(v);
            let lg = a.lcm(&b);
            out.push(p.combine(lg / a, n, lg / b));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ConstraintParseError(pub String);

pub(crate) fn parse_var_name(name: &str) -> Option<Var> {
    if name == "TL" {
        return Some(Var::Tl);
    }
    let (prefix, rest) = name.split_at(1);
    let idx: u32 = rest.parse().ok()?;
    match prefix {
        "T" => Some(Var::Ts(idx)),
        "X" => Some(Var::Aux(idx)),
        _ => None,
    }
}

/// Parses `affine rel affine`, resolving identifiers through `resolve`.
pub(crate) fn parse_atom(text: &str, resolve: &dyn Fn(&str) -> Option<Var>) -> Result<Atom, ConstraintParseError> {
    let mut found = None;
    for (pos, ch) in text.char_indices() {
        if ch == '<' || ch == '>' || ch == '=' {
            found = Some(pos);
            break;
        }
    }
    let pos = found.ok_or_else(|| ConstraintParseError(format!("missing relation in `{}`", text.trim())))?;
    let rest = &text[pos..];
    let (rel, len) = if rest.starts_with("<=") {
        (Rel::Le, 2)
    } else if rest.starts_with(">=") {
        (Rel::Ge, 2)
    } else if rest.starts_with("==") {
        (Rel::Eq, 2)
    } else if rest.starts_with('<') {
        (Rel::Lt, 1)
    } else if rest.starts_with('>') {
        (Rel::Gt, 1)
    } else {
        (Rel::Eq, 1)
    };
    let lhs = parse_affine(&text[..pos], resolve)?;
    let rhs = parse_affine(&text[pos + len..], resolve)?;
    Ok(Atom::new(lhs, rel, rhs))
}

/// `term (+|- term)*` with `term := [number [*]] ident | number`.
pub(crate) fn parse_affine(
    text: &str,
    resolve: &dyn Fn(&str) -> Option<Var>,
) -> Result<AffineExpr, ConstraintParseError> {
    let err = |m: String| ConstraintParseError(m);
    let mut e = AffineExpr::zero();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut sign = int(1);
    let mut expect_term = true;
    let skip_ws = |i: &mut usize| {
        while *i < chars.len() && chars[*i].is_whitespace() {
            *i += 1;
        }
    };
    loop {
        skip_ws(&mut i);
        if i >= chars.len() {
            break;
        }
        let c = chars[i];
        if c == '+' || c == '-' {
            if !expect_term {
                expect_term = true;
                sign = if c == '-' { -int(1) } else { int(1) };
            } else if c == '-' {
                sign = -sign;
            }
            i += 1;
            continue;
        }
        if !expect_term {
            return Err(err(format!("unexpected `{c}` in `{}`", text.trim())));
        }
        let mut coeff = int(1);
        let mut have_number = false;
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.' || chars[i] == '/') {
                i += 1;
            }
            let lit: String = chars[start..i].iter().collect();
            coeff = parse_rational(&lit).map_err(|e| err(e.to_string()))?;
            have_number = true;
            skip_ws(&mut i);
            if i < chars.len() && chars[i] == '*' {
                i += 1;
                skip_ws(&mut i);
            }
        }
        if i < chars.len() && (chars[i].is_alphabetic() || chars[i] == '_') {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let name: String = chars[start..i].iter().collect();
            let v = resolve(&name).ok_or_else(|| err(format!("unknown symbol `{name}`")))?;
            e.add_term(v, coeff * sign);
        } else if have_number {
            e.constant += coeff * sign;
        } else {
            return Err(err(format!("expected a term in `{}`", text.trim())));
        }
        sign = int(1);
        expect_term = false;
    }
    if expect_term {
        return Err(err(format!("incomplete expression `{}`", text.trim())));
    }
    Ok(e)
}
