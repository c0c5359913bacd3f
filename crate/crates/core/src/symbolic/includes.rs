//! Inclusion between symbolic states: every concrete marking described by
//! the smaller state is described by the larger one.

use super::{rename_syms, Engine, Stamp, SymbolicState};
use std::collections::BTreeMap;

/// Result of comparing two states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inclusion {
    Equal,
    StrictSuperset,
    No,
}

/// Leaves of the symbol-matching search tried before giving up.
const MATCH_BUDGET: usize = 4096;

struct Matcher<'s> {
    sup: &'s SymbolicState,
    sub: &'s SymbolicState,
    ta_covers_concrete: bool,
    /// Per super symbol, the sub symbols it may map to.
    candidates: Vec<Vec<u32>>,
    budget: usize,
}

impl Matcher<'_> {
    /// Finds a monotone map from super to sub symbols under which the sub
    /// constraint implies the super one.
    fn search(&mut self, sigma: &mut Vec<u32>) -> bool {
        let j = sigma.len();
        if j == self.candidates.len() {
            if self.budget == 0 {
                return false;
            }
            self.budget -= 1;
            return self.bags_match(sigma) && self.constraint_holds(sigma);
        }
        let floor = sigma.last().copied().unwrap_or(0);
        for k in self.candidates[j].clone() {
            if k < floor {
                continue;
            }
            sigma.push(k);
            if self.search(sigma) {
                return true;
            }
            sigma.pop();
        }
        false
    }

    fn bags_match(&self, sigma: &[u32]) -> bool {
        self.sup.marking.iter().zip(&self.sub.marking).all(|(big, small)| {
            let mut mapped: Vec<Stamp> =
                big.iter().filter_map(Stamp::sym).map(|j| Stamp::Sym(sigma[j as usize])).collect();
            mapped.sort();
            let concrete: Vec<Stamp> = small.iter().copied().filter(|s| !s.is_ta()).collect();
            let big_ta = big.len() - mapped.len();
            let small_ta = small.len() - concrete.len();
            if small_ta > big_ta {
                return false;
            }
            if !self.ta_covers_concrete {
                return mapped == concrete;
            }
            is_sub_multiset(&mapped, &concrete)
        })
    }

    fn constraint_holds(&self, sigma: &[u32]) -> bool {
        let map: BTreeMap<u32, u32> = sigma.iter().enumerate().map(|(j, k)| (j as u32, *k)).collect();
        self.sub.constraint.implies(&rename_syms(&self.sup.constraint, &map))
    }
}

/// Both sorted.
fn is_sub_multiset(small: &[Stamp], big: &[Stamp]) -> bool {
    let mut it = big.iter();
    small.iter().all(|s| it.by_ref().any(|b| b == s))
}

impl Engine<'_> {
    /// How `sup` relates to `sub`. Only states with the same token count in
    /// every place are compared.
    pub fn includes(&self, sup: &SymbolicState, sub: &SymbolicState) -> Inclusion {
        if sup.topology() != sub.topology() {
            return Inclusion::No;
        }
        if sup.marking == sub.marking {
            if sup.constraint == sub.constraint || sup.constraint.equivalent(&sub.constraint) {
                return Inclusion::Equal;
            }
            if sub.constraint.implies(&sup.constraint) {
                return Inclusion::StrictSuperset;
            }
        }
        let ks = sup.symbol_count() as usize;
        let kb = sub.symbol_count();
        // A super symbol maps to a sub symbol present in every place where the
        // super symbol occurs.
        let mut candidates = Vec::with_capacity(ks);
        for j in 0..ks as u32 {
            let c: Vec<u32> = (0..kb)
                .filter(|k| {
                    sup.marking.iter().zip(&sub.marking).all(|(big, small)| {
                        let need = big.iter().filter(|s| **s == Stamp::Sym(j)).count();
                        need == 0 || small.iter().filter(|s| **s == Stamp::Sym(*k)).count() >= need
                    })
                })
                .collect();
            if c.is_empty() {
                return Inclusion::No;
            }
            candidates.push(c);
        }
        let mut m =
            Matcher { sup, sub, ta_covers_concrete: self.config.ta_covers_concrete, candidates, budget: MATCH_BUDGET };
        if m.search(&mut Vec::with_capacity(ks)) {
            Inclusion::StrictSuperset
        } else {
            if m.budget == 0 {
                log::debug!("inclusion search budget exhausted");
            }
            Inclusion::No
        }
    }
}
