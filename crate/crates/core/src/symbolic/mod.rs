//! Symbolic states and the operations on them: enabling and firing,
//! normalization, time-anonymous (TA) replacement and inclusion.
//!
//! A state is a marking whose tokens carry symbolic timestamps `T_i` (or the
//! anonymous `TA`) plus a linear constraint over those symbols and `TL`, the
//! time of the last firing. `TL` is always an explicit variable; it is only
//! hidden when printing if it coincides with the newest symbol.

mod enabling;
mod eval;
mod includes;
mod normalize;
mod ta;

pub use enabling::{FiringBranch, SymbolicEnabling};
pub use eval::Branch;
pub use includes::Inclusion;

use crate::constraint::{AffineExpr, Atom, LinearConstraint, NumberStyle, Var};
use crate::net::{PlaceId, TbNet};
use crate::rational::{int, Rational};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// A token timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stamp {
    Sym(u32),
    /// Anonymous: some instant in the past whose value no longer matters.
    Ta,
}

impl Stamp {
    pub fn sym(&self) -> Option<u32> {
        match self {
            Stamp::Sym(i) => Some(*i),
            Stamp::Ta => None,
        }
    }

    pub fn is_ta(&self) -> bool {
        matches!(self, Stamp::Ta)
    }
}

impl fmt::Display for Stamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stamp::Sym(i) => write!(f, "T{i}"),
            Stamp::Ta => write!(f, "TA"),
        }
    }
}

/// Place-indexed bags of stamps; each bag is kept sorted.
pub type Marking = Vec<Vec<Stamp>>;

/// `<M, C>` in normal form: the symbols in `marking` are exactly
/// `T_0..T_{k-1}`, `C` implies `T_i <= T_{i+1}` and `TL >= T_i`, and `C` is
/// satisfiable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolicState {
    pub marking: Marking,
    pub constraint: LinearConstraint,
}

impl SymbolicState {
    /// Number of distinct symbols.
    pub fn symbol_count(&self) -> u32 {
        self.symbols().len() as u32
    }

    pub fn symbols(&self) -> BTreeSet<u32> {
        self.marking.iter().flatten().filter_map(Stamp::sym).collect()
    }

    pub fn tokens(&self, p: PlaceId) -> &[Stamp] {
        &self.marking[p.0]
    }

    /// Token count per place.
    pub fn topology(&self) -> Vec<usize> {
        self.marking.iter().map(Vec::len).collect()
    }

    /// Whether `TL` carries information beyond being the newest symbol.
    pub fn has_tl(&self) -> bool {
        match self.symbol_count() {
            0 => self.constraint.mentions(Var::Tl),
            k => !self.constraint.implies_atom(&Atom::eq(AffineExpr::var(Var::Tl), AffineExpr::var(Var::Ts(k - 1)))),
        }
    }

    /// Constraint as printed: `TL` substituted away when it equals the newest
    /// symbol.
    pub fn display_constraint(&self) -> LinearConstraint {
        let k = self.symbol_count();
        if k > 0 && !self.has_tl() {
            self.constraint
                .substitute(&|v| {
                    if v == Var::Tl {
                        AffineExpr::var(Var::Ts(k - 1))
                    } else {
                        AffineExpr::var(v)
                    }
                })
                .prune_redundant()
        } else {
            self.constraint.clone()
        }
    }

    pub fn marking_string(&self, places: &[String]) -> String {
        marking_string(&self.marking, places)
    }

    pub fn display<'a>(&'a self, places: &'a [String], style: NumberStyle) -> impl fmt::Display + 'a {
        StateDisplay { state: self, places, style }
    }

    /// Re-checks the normal-form invariants; used by debug assertions and
    /// tests.
    pub fn check_invariants(&self) -> Result<(), String> {
        let syms = self.symbols();
        let k = syms.len() as u32;
        if syms.iter().copied().ne(0..k) {
            return Err(format!("symbols are not T0..T{}: {syms:?}", k.saturating_sub(1)));
        }
        if !self.constraint.is_satisfiable() {
            return Err("unsatisfiable constraint".into());
        }
        for v in self.constraint.vars() {
            match v {
                Var::Tl => {}
                Var::Ts(i) if i < k => {}
                other => return Err(format!("constraint mentions {other}")),
            }
        }
        for i in 0..k {
            let ti = AffineExpr::var(Var::Ts(i));
            if !self.constraint.implies_atom(&Atom::ge(AffineExpr::var(Var::Tl), ti.clone())) {
                return Err(format!("TL >= T{i} not implied"));
            }
            if i + 1 < k && !self.constraint.implies_atom(&Atom::le(ti, AffineExpr::var(Var::Ts(i + 1)))) {
                return Err(format!("T{i} <= T{} not implied", i + 1));
            }
        }
        for bag in &self.marking {
            if bag.windows(2).any(|w| w[0] > w[1]) {
                return Err("unsorted bag".into());
            }
        }
        Ok(())
    }
}

pub(crate) fn marking_string(marking: &Marking, places: &[String]) -> String {
    let parts: Vec<String> = marking
        .iter()
        .enumerate()
        .filter(|(_, bag)| !bag.is_empty())
        .map(|(p, bag)| {
            let stamps: Vec<String> = bag.iter().map(Stamp::to_string).collect();
            format!("{}{{{}}}", places[p], stamps.join(", "))
        })
        .collect();
    if parts.is_empty() {
        "(empty)".to_string()
    } else {
        parts.join(", ")
    }
}

struct StateDisplay<'a> {
    state: &'a SymbolicState,
    places: &'a [String],
    style: NumberStyle,
}

impl fmt::Display for StateDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "M: {}; C: {}",
            self.state.marking_string(self.places),
            self.state.display_constraint().display(self.style)
        )
    }
}

/// Knobs of the symbolic engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Apply TA replacement after every firing.
    pub ta: bool,
    /// Shift-invariant canonicalization (only effective on relative nets).
    pub relative_erasure: bool,
    /// Future tokens of unmarked places are assumed `>= TL` in the
    /// heuristics that reason about future enablings.
    pub future_after_tl: bool,
    /// A concrete stamp of the included state may sit where the including
    /// state has `TA`.
    pub ta_covers_concrete: bool,
    /// With `ta`: keep only the time order of symbols too old to influence
    /// any firing window (see [`Engine::stale_horizon`]).
    pub stale_widening: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            ta: true,
            relative_erasure: true,
            future_after_tl: false,
            ta_covers_concrete: false,
            stale_widening: true,
        }
    }
}

impl EngineConfig {
    /// Plain symbolic states: no TA replacement and absolute time kept.
    pub fn without_ta() -> Self {
        EngineConfig { ta: false, relative_erasure: false, stale_widening: false, ..EngineConfig::default() }
    }
}

/// Symbolic operations bound to one net.
#[derive(Debug, Clone)]
pub struct Engine<'a> {
    pub net: &'a TbNet,
    pub config: EngineConfig,
    relative: bool,
    stale: Option<Rational>,
}

/// Variable standing for the firing instant while a firing is built.
pub(crate) const FIRE: Var = Var::Aux(u32::MAX - 2);
/// The previous `TL` while a firing is normalized.
pub(crate) const OLD_TL: Var = Var::Aux(u32::MAX - 3);

/// One successor of a state: which enabling branch fired and the resulting
/// normalized states (more than one only when the order of symbols had to be
/// case-split).
#[derive(Debug, Clone)]
pub struct Successor {
    pub enabling: usize,
    pub branch: usize,
    pub states: Vec<SymbolicState>,
}

impl<'a> Engine<'a> {
    pub fn new(net: &'a TbNet, config: EngineConfig) -> Self {
        let relative = config.relative_erasure && net.is_relative();
        let stale =
            (config.ta && config.stale_widening).then(|| net.offset_reach()).flatten().map(|k| k * int(3) + int(1));
        Engine { net, config, relative, stale }
    }

    /// A symbol `T_i` with `TL - T_i` above this is stale. With every
    /// function a `max` of stamps shifted by at most `k`, the horizon is
    /// `3k + 1`: a stale term then loses every `max` against a term no older
    /// than `TL - k`, and a `max` of terms all older than that ends before
    /// `TL`, where it bounds nothing. `None` when widening is off or the
    /// net has affine functions.
    pub fn stale_horizon(&self) -> Option<Rational> {
        self.stale
    }

    /// Whether shift-invariant canonicalization is in effect.
    pub fn is_relative(&self) -> bool {
        self.relative
    }

    /// Initial states; several when the initial constraint leaves the order
    /// of the initial symbols open.
    pub fn initial_states(&self) -> Vec<SymbolicState> {
        let marking: Marking = self
            .net
            .initial_marking
            .iter()
            .map(|bag| {
                let mut b: Vec<Stamp> = bag.iter().map(|i| Stamp::Sym(*i)).collect();
                b.sort();
                b
            })
            .collect();
        let syms: Vec<u32> = self.net.initial_symbols();
        let mut out = Vec::new();
        for (order, c) in normalize::orderings(&self.net.initial_constraint, &syms) {
            // TL starts at the newest initial stamp.
            let c = match order.last() {
                Some(last) => c.with(&Atom::eq(AffineExpr::var(Var::Tl), AffineExpr::var(Var::Ts(*last)))),
                None => c,
            };
            out.extend(self.finish(marking.clone(), c));
        }
        dedup(out)
    }

    /// Normalization followed by TA replacement.
    pub(crate) fn finish(&self, marking: Marking, constraint: LinearConstraint) -> Vec<SymbolicState> {
        let mut out = Vec::new();
        for s in self.normalize(marking, constraint) {
            let mut states = vec![s];
            if self.config.ta {
                let replaced = self.ta_replace(&states[0]);
                if replaced.marking != states[0].marking {
                    states = self.normalize(replaced.marking, replaced.constraint);
                }
            }
            if let Some(h) = self.stale {
                states = states.into_iter().map(|s| self.widen_stale(&s, h).unwrap_or(s)).collect();
            }
            out.extend(states);
        }
        for s in &out {
            debug_assert_eq!(s.check_invariants(), Ok(()), "{}", s.display(&self.net.places, NumberStyle::Fraction));
        }
        out
    }

    /// Enablings of `state` and, for every firing branch, the successor
    /// states.
    pub fn successors(&self, state: &SymbolicState) -> (Vec<SymbolicEnabling>, Vec<Successor>) {
        let enablings = self.enablings(state);
        let mut out = Vec::new();
        for (ei, e) in enablings.iter().enumerate() {
            for (bi, _) in e.branches.iter().enumerate() {
                out.push(Successor { enabling: ei, branch: bi, states: self.fire(state, e, bi) });
            }
        }
        (enablings, out)
    }
}

fn dedup(states: Vec<SymbolicState>) -> Vec<SymbolicState> {
    let mut out: Vec<SymbolicState> = Vec::new();
    for s in states {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// Renames `Ts` variables through `map` (others unchanged).
pub(crate) fn rename_syms(c: &LinearConstraint, map: &BTreeMap<u32, u32>) -> LinearConstraint {
    let m: BTreeMap<Var, Var> = map.iter().map(|(a, b)| (Var::Ts(*a), Var::Ts(*b))).collect();
    c.rename(&m)
}
