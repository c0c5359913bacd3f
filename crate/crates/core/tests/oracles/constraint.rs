//! Constraint-engine oracles: each works on concrete points or on explicit
//! vertex lists and never calls back into elimination.

use num_traits::Zero;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use tbnet_core::constraint::{AffineExpr, Atom, Bound, LinearConstraint, Rel, Var};
use tbnet_core::rational::{int, Rational};

pub const X: Var = Var::Ts(0);
pub const Y: Var = Var::Ts(1);
pub const Z: Var = Var::Tl;

/// `a*X + b*Y + c*Z rel k` with small integer data.
#[derive(Debug, Clone)]
pub struct RawAtom {
    pub coeffs: [i128; 3],
    pub rel: Rel,
    pub k: i128,
}

impl RawAtom {
    pub fn atom(&self) -> Atom {
        let mut lhs = AffineExpr::zero();
        for (v, c) in [X, Y, Z].into_iter().zip(self.coeffs) {
            lhs.add_term(v, int(c));
        }
        Atom::new(lhs, self.rel, AffineExpr::constant(int(self.k)))
    }

    pub fn lhs_at(&self, p: [Rational; 3]) -> Rational {
        (0..3).map(|i| int(self.coeffs[i]) * p[i]).fold(Rational::zero(), |a, b| a + b)
    }

    pub fn holds_at(&self, p: [Rational; 3]) -> bool {
        let (l, k) = (self.lhs_at(p), int(self.k));
        match self.rel {
            Rel::Le => l <= k,
            Rel::Lt => l < k,
            Rel::Eq => l == k,
            Rel::Ge => l >= k,
            Rel::Gt => l > k,
        }
    }
}

pub fn rel() -> impl Strategy<Value = Rel> {
    prop_oneof![Just(Rel::Le), Just(Rel::Lt), Just(Rel::Ge), Just(Rel::Gt), Just(Rel::Eq)]
}

pub fn raw_atom(vars: usize) -> impl Strategy<Value = RawAtom> {
    (prop::array::uniform3(-3i128..=3), rel(), -6i128..=6).prop_map(move |(mut coeffs, rel, k)| {
        for c in coeffs.iter_mut().skip(vars) {
            *c = 0;
        }
        RawAtom { coeffs, rel, k }
    })
}

pub fn system(vars: usize, max_atoms: usize) -> impl Strategy<Value = Vec<RawAtom>> {
    prop::collection::vec(raw_atom(vars), 1..=max_atoms)
}

pub fn constraint(atoms: &[RawAtom]) -> LinearConstraint {
    LinearConstraint::from_atoms(&atoms.iter().map(RawAtom::atom).collect::<Vec<_>>())
}

pub fn assign(p: [Rational; 3]) -> impl Fn(Var) -> Option<Rational> {
    move |v| match v {
        Var::Ts(0) => Some(p[0]),
        Var::Ts(1) => Some(p[1]),
        Var::Tl => Some(p[2]),
        _ => None,
    }
}

/// Quarter-step grid on `[-4, 4]`.
pub fn grid() -> Vec<Rational> {
    (-16..=16).map(|i| Rational::new(i, 4)).collect()
}

/// Whether some `z` satisfies every atom at `(x, y, z)`: each atom is a
/// bound on `z`, intersected by hand.
pub fn exists_z(atoms: &[RawAtom], x: Rational, y: Rational) -> bool {
    let mut lo: Option<(Rational, bool)> = None;
    let mut hi: Option<(Rational, bool)> = None;
    let tighten_lo = |lo: &mut Option<(Rational, bool)>, v: Rational, strict: bool| {
        if lo.is_none_or(|(l, s)| v > l || (v == l && strict && !s)) {
            *lo = Some((v, strict));
        }
    };
    let tighten_hi = |hi: &mut Option<(Rational, bool)>, v: Rational, strict: bool| {
        if hi.is_none_or(|(h, s)| v < h || (v == h && strict && !s)) {
            *hi = Some((v, strict));
        }
    };
    for a in atoms {
        let rest = a.lhs_at([x, y, Rational::zero()]);
        let c = int(a.coeffs[2]);
        let k = int(a.k);
        if c.is_zero() {
            if !a.holds_at([x, y, Rational::zero()]) {
                return false;
            }
            continue;
        }
        // c*z rel k - rest
        let v = (k - rest) / c;
        let flip = c < Rational::zero();
        let (upper, lower, strict) = match (a.rel, flip) {
            (Rel::Le, false) | (Rel::Ge, true) => (true, false, false),
            (Rel::Lt, false) | (Rel::Gt, true) => (true, false, true),
            (Rel::Ge, false) | (Rel::Le, true) => (false, true, false),
            (Rel::Gt, false) | (Rel::Lt, true) => (false, true, true),
            (Rel::Eq, _) => (true, true, false),
        };
        if upper {
            tighten_hi(&mut hi, v, strict);
        }
        if lower {
            tighten_lo(&mut lo, v, strict);
        }
    }
    match (lo, hi) {
        (Some((l, ls)), Some((h, hs))) => l < h || (l == h && !ls && !hs),
        _ => true,
    }
}

pub type Rows = Vec<([i128; 2], i128)>;

pub fn half_planes() -> impl Strategy<Value = (Rows, [i128; 2])> {
    (prop::collection::vec((prop::array::uniform2(-3i128..=3), -6i128..=6), 0..=4), prop::array::uniform2(-3i128..=3))
}

/// Eliminating `Z` keeps exactly the `(x, y)` that extend to a solution.
pub fn projection_matches_pointwise_existence(atoms: &[RawAtom]) -> Result<(), TestCaseError> {
    let c = constraint(atoms);
    let p = c.project_out(&[Z].into_iter().collect());
    prop_assert!(!p.mentions(Z));
    for &x in &grid() {
        for &y in grid().iter().step_by(3) {
            let expected = exists_z(atoms, x, y);
            prop_assert_eq!(p.holds(&assign([x, y, Rational::zero()])), Some(expected), "at ({}, {})", x, y);
        }
    }
    Ok(())
}

/// An implied atom holds at every sampled solution.
pub fn implication_agrees_with_samples(atoms: &[RawAtom], goal: &RawAtom) -> Result<(), TestCaseError> {
    let c = constraint(atoms);
    let implied = c.implies_atom(&goal.atom());
    let g = grid();
    for &x in g.iter().step_by(2) {
        for &y in g.iter().step_by(2) {
            for &z in g.iter().step_by(2) {
                let p = [x, y, z];
                if atoms.iter().all(|a| a.holds_at(p)) {
                    prop_assert_eq!(c.holds(&assign(p)), Some(true));
                    if implied {
                        prop_assert!(goal.holds_at(p), "implied atom fails at {:?}", p);
                    }
                }
            }
        }
    }
    Ok(())
}

/// Range of `obj` over closed half-planes inside `[-5, 5]^2` equals the
/// range over the polygon's vertices.
pub fn bounds_match_vertex_enumeration(atoms: &Rows, obj: [i128; 2]) -> Result<(), TestCaseError> {
    let mut ints: Rows = atoms.iter().copied().filter(|(a, _)| a != &[0, 0]).collect();
    ints.extend([([1, 0], 5), ([-1, 0], 5), ([0, 1], 5), ([0, -1], 5)]);
    let raw: Vec<RawAtom> =
        ints.iter().map(|(a, k)| RawAtom { coeffs: [a[0], a[1], 0], rel: Rel::Le, k: *k }).collect();
    let rows: Vec<([Rational; 2], Rational)> = ints.iter().map(|(a, k)| ([int(a[0]), int(a[1])], int(*k))).collect();
    let c = constraint(&raw);
    let inside = |p: [Rational; 2]| rows.iter().all(|(a, k)| a[0] * p[0] + a[1] * p[1] <= *k);
    let mut vertices = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let ((a, k1), (b, k2)) = (&rows[i], &rows[j]);
            let det = a[0] * b[1] - a[1] * b[0];
            if det.is_zero() {
                continue;
            }
            let p = [(*k1 * b[1] - a[1] * *k2) / det, (a[0] * *k2 - *k1 * b[0]) / det];
            if inside(p) {
                vertices.push(p);
            }
        }
    }
    let e = AffineExpr::term(X, int(obj[0])).plus(&AffineExpr::term(Y, int(obj[1])));
    let value = |p: &[Rational; 2]| int(obj[0]) * p[0] + int(obj[1]) * p[1];
    match c.bounds_of(&e) {
        None => prop_assert!(vertices.is_empty()),
        Some(b) => {
            prop_assert!(!vertices.is_empty());
            let lo = vertices.iter().map(value).min().unwrap();
            let hi = vertices.iter().map(value).max().unwrap();
            prop_assert_eq!(b.lower, Bound::closed(lo));
            prop_assert_eq!(b.upper, Bound::closed(hi));
        }
    }
    Ok(())
}

/// A solution on a fine grid proves satisfiability.
pub fn grid_witness_implies_satisfiable(atoms: &[RawAtom]) -> Result<(), TestCaseError> {
    let c = constraint(atoms);
    let fine: Vec<Rational> = (-96..=96).map(|i| Rational::new(i, 12)).collect();
    let witness =
        fine.iter().any(|&x| fine.iter().any(|&y| atoms.iter().all(|a| a.holds_at([x, y, Rational::zero()]))));
    if witness {
        prop_assert!(c.is_satisfiable());
    }
    Ok(())
}
