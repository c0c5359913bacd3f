//! Randomized checks of the constraint engine against direct evaluation.

#[path = "oracles/constraint.rs"]
mod oracle;

use num_traits::{One, Zero};
use oracle::{constraint, half_planes, raw_atom, system, RawAtom, X};
use proptest::prelude::*;
use tbnet_core::constraint::{AffineExpr, Bound, Rel};
use tbnet_core::rational::Rational;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn projection_matches_pointwise_existence(atoms in system(3, 4)) {
        oracle::projection_matches_pointwise_existence(&atoms)?;
    }

    #[test]
    fn implication_agrees_with_samples(atoms in system(3, 3), goal in raw_atom(3)) {
        oracle::implication_agrees_with_samples(&atoms, &goal)?;
    }

    #[test]
    fn bounds_match_vertex_enumeration((rows, obj) in half_planes()) {
        oracle::bounds_match_vertex_enumeration(&rows, obj)?;
    }

    #[test]
    fn grid_witness_implies_satisfiable(atoms in system(2, 3)) {
        oracle::grid_witness_implies_satisfiable(&atoms)?;
    }
}

#[test]
fn strict_bounds_stay_open() {
    let c = constraint(&[
        RawAtom { coeffs: [1, 0, 0], rel: Rel::Gt, k: 0 },
        RawAtom { coeffs: [1, 0, 0], rel: Rel::Le, k: 1 },
    ]);
    let b = c.bounds_of(&AffineExpr::var(X)).unwrap();
    assert_eq!(b.lower, Bound::Finite { value: Rational::zero(), closed: false });
    assert_eq!(b.upper, Bound::Finite { value: Rational::one(), closed: true });
}
