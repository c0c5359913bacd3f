//! Time-Basic net model: places, transitions with time functions, the
//! initial symbolic state and the textual model format.

mod expr;
mod parse;
mod print;

pub use expr::{Erased, TimeExpr, TimeFunction};
pub use parse::parse_net;
pub use print::print_net;

use crate::constraint::{LinearConstraint, Var};
use crate::rational::Rational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PlaceId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TransId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Semantics {
    Strong,
    Weak,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub name: String,
    pub semantics: Semantics,
    /// Preset in declaration order; tuples are reported in this order.
    pub pre: Vec<PlaceId>,
    pub post: Vec<PlaceId>,
    pub tf: TimeFunction,
}

impl Transition {
    pub fn is_strong(&self) -> bool {
        self.semantics == Semantics::Strong
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NetError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: unknown place `{name}`")]
    UnknownPlace { line: usize, name: String },
    #[error("line {line}: time function of `{transition}` references `{place}` outside its preset")]
    TfReferencesNonPreset { line: usize, transition: String, place: String },
    #[error("initial constraint is unsatisfiable")]
    UnsatInitialConstraint,
}

/// A Time-Basic net together with its initial symbolic state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TbNet {
    pub name: String,
    pub places: Vec<String>,
    pub transitions: Vec<Transition>,
    /// Place -> bag of initial symbol indices (`T<i>`), sorted.
    pub initial_marking: Vec<Vec<u32>>,
    pub initial_constraint: LinearConstraint,
    pub time_limit: Option<Rational>,
    consumers: Vec<Vec<TransId>>,
}

impl TbNet {
    pub fn new(
        name: impl Into<String>,
        places: Vec<String>,
        transitions: Vec<Transition>,
        mut initial_marking: Vec<Vec<u32>>,
        initial_constraint: LinearConstraint,
        time_limit: Option<Rational>,
    ) -> Result<Self, NetError> {
        initial_marking.resize(places.len(), Vec::new());
        for bag in initial_marking.iter_mut() {
            bag.sort_unstable();
        }
        for t in &transitions {
            for p in t.tf.places() {
                if !t.pre.contains(&p) {
                    return Err(NetError::TfReferencesNonPreset {
                        line: 0,
                        transition: t.name.clone(),
                        place: places[p.0].clone(),
                    });
                }
            }
        }
        if !initial_constraint.is_satisfiable() {
            return Err(NetError::UnsatInitialConstraint);
        }
        let mut consumers = vec![Vec::new(); places.len()];
        for (i, t) in transitions.iter().enumerate() {
            for p in &t.pre {
                consumers[p.0].push(TransId(i));
            }
        }
        Ok(TbNet { name: name.into(), places, transitions, initial_marking, initial_constraint, time_limit, consumers })
    }

    pub fn place_id(&self, name: &str) -> Option<PlaceId> {
        self.places.iter().position(|p| p == name).map(PlaceId)
    }

    pub fn transition_id(&self, name: &str) -> Option<TransId> {
        self.transitions.iter().position(|t| t.name == name).map(TransId)
    }

    pub fn place_name(&self, p: PlaceId) -> &str {
        &self.places[p.0]
    }

    pub fn transition(&self, t: TransId) -> &Transition {
        &self.transitions[t.0]
    }

    /// Transitions consuming from `p` (the postset of the place).
    pub fn postset(&self, p: PlaceId) -> &[TransId] {
        &self.consumers[p.0]
    }

    /// True when no time function uses an absolute time reference, which is
    /// what makes shift-invariant canonicalization sound.
    pub fn is_relative(&self) -> bool {
        self.transitions.iter().all(|t| t.tf.lb.is_relative() && t.tf.ub.is_relative())
    }

    /// How far from a token stamp any time function can reach; `None` when
    /// some function is an affine combination.
    pub fn offset_reach(&self) -> Option<Rational> {
        self.transitions
            .iter()
            .flat_map(|t| [&t.tf.lb, &t.tf.ub])
            .map(TimeExpr::offset_reach)
            .try_fold(Rational::zero(), |m, r| r.map(|r| m.max(r)))
    }

    /// Every rational constant appearing in the model.
    pub fn constants(&self) -> Vec<Rational> {
        let mut out = Vec::new();
        for t in &self.transitions {
            t.tf.lb.collect_constants(&mut out);
            t.tf.ub.collect_constants(&mut out);
        }
        if let Some(l) = self.time_limit {
            out.push(l);
        }
        out
    }

    pub fn initial_symbols(&self) -> Vec<u32> {
        let mut s: Vec<u32> = self.initial_marking.iter().flatten().copied().collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Static diagnostics; see [`Diagnostic`].
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for (i, t) in self.transitions.iter().enumerate() {
            if t.pre.is_empty() {
                out.push(Diagnostic::EmptyPreset(TransId(i)));
            }
        }
        for (i, _) in self.places.iter().enumerate() {
            if self.consumers[i].is_empty() {
                out.push(Diagnostic::EmptyPostset(PlaceId(i)));
            }
        }
        for (i, t) in self.transitions.iter().enumerate() {
            if !(t.tf.lb.is_relative() && t.tf.ub.is_relative()) {
                out.push(Diagnostic::AbsoluteTime(TransId(i)));
            }
        }
        let marked: Vec<u32> = self.initial_symbols();
        for v in self.initial_constraint.vars() {
            match v {
                Var::Ts(i) if marked.contains(&i) => {}
                other => out.push(Diagnostic::ForeignInitialSymbol(other)),
            }
        }
        out
    }

    pub fn describe(&self, d: &Diagnostic) -> String {
        match d {
            Diagnostic::EmptyPostset(p) => {
                format!("place {} has an empty postset (its tokens are always time-anonymous)", self.place_name(*p))
            }
            Diagnostic::EmptyPreset(t) => {
                format!("transition {} has an empty preset and is rejected", self.transition(*t).name)
            }
            Diagnostic::AbsoluteTime(t) => format!(
                "transition {} uses an absolute time reference; absolute-time erasure disabled",
                self.transition(*t).name
            ),
            Diagnostic::ForeignInitialSymbol(v) => {
                format!("initial constraint mentions {v}, which is not in the initial marking")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    /// Tokens here are never consumed.
    EmptyPostset(PlaceId),
    /// Such a transition could fire spontaneously; the builder rejects it.
    EmptyPreset(TransId),
    /// Disables relative canonicalization for the whole net.
    AbsoluteTime(TransId),
    ForeignInitialSymbol(Var),
}

impl Diagnostic {
    pub fn is_error(&self) -> bool {
        matches!(self, Diagnostic::EmptyPreset(_) | Diagnostic::ForeignInitialSymbol(_))
    }
}

impl fmt::Display for PlaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const RUNNING: &str = include_str!("../../../../models/running_example.tb");
    pub(crate) const FIG3: &str = include_str!("../../../../models/dead_token.tb");

    #[test]
    fn running_example_shape() {
        let net = parse_net(RUNNING).unwrap();
        assert_eq!(net.places.len(), 8);
        assert_eq!(net.transitions.len(), 5);
        let weak: Vec<&str> =
            net.transitions.iter().filter(|t| t.semantics == Semantics::Weak).map(|t| t.name.as_str()).collect();
        assert_eq!(weak, vec!["FlameLightOff2"]);
        assert!(net.is_relative());
    }

    #[test]
    fn dead_token_net_shape() {
        let net = parse_net(FIG3).unwrap();
        assert_eq!(net.places.len(), 3);
        assert_eq!(net.transitions.len(), 2);
        let t0 = &net.transitions[net.transition_id("t0").unwrap().0];
        assert_eq!(print::print_tf(&net, t0), "[enab + 0.2, enab + 0.3]");
    }

    #[test]
    fn running_example_diagnostics() {
        let net = parse_net(RUNNING).unwrap();
        let empty: Vec<&str> = net
            .validate()
            .iter()
            .filter_map(|d| match d {
                Diagnostic::EmptyPostset(p) => Some(net.place_name(*p)),
                _ => None,
            })
            .collect();
        assert_eq!(empty, vec!["BURN_PHASE_B", "IGNITE_PHASE_B"]);
        assert!(net.validate().iter().all(|d| matches!(d, Diagnostic::EmptyPostset(_))));
    }

    #[test]
    fn empty_net_has_no_diagnostics() {
        let net = parse_net("net empty\n").unwrap();
        assert!(net.validate().is_empty());
    }

    #[test]
    fn constant_bounds_are_absolute() {
        let net = parse_net("place a\ntrans t pre a post a tf [5, 7]\ninit a{T0}\n").unwrap();
        assert!(!net.is_relative());
        assert!(net.validate().iter().any(|d| matches!(d, Diagnostic::AbsoluteTime(_))));
    }
}
