//! Concrete-time execution of a net, used as an independent oracle for the
//! symbolic construction.
//!
//! Times live on a rational grid whose step divides every constant of the
//! model ten times over, so all arithmetic is exact.

mod coverage;

pub use coverage::{coverage_check, covered_by, CoverageReport, Violation};

use crate::constraint::{AffineExpr, Bound, LinearConstraint, Var};
use crate::net::{PlaceId, TbNet, TimeExpr, TransId};
use crate::rational::{fmt_decimal, int, lcm_denominators, Rational};
use itertools::Itertools;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt;

/// Place-indexed sorted bags of timestamps.
pub type ConcreteMarking = Vec<Vec<Rational>>;

/// A marking plus the time of the last firing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcreteState {
    pub marking: ConcreteMarking,
    pub now: Rational,
}

/// A transition with one token value per preset place and its firing
/// interval; `lb > ub` means the instance is not enabled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub transition: TransId,
    pub tuple: Vec<Rational>,
    pub lb: Rational,
    pub ub: Rational,
}

impl Instance {
    /// Can still fire at or after `now`.
    pub fn alive(&self, now: Rational) -> bool {
        self.lb.max(now) <= self.ub
    }
}

pub(crate) fn eval_concrete(e: &TimeExpr, preset: &[PlaceId], value: &dyn Fn(PlaceId) -> Rational) -> Rational {
    match e {
        TimeExpr::PlaceRef { place, offset } => value(*place) + offset,
        TimeExpr::Enab { offset } => preset.iter().map(|p| value(*p)).max().expect("non-empty preset") + offset,
        TimeExpr::Max { args, offset } => {
            args.iter().map(|a| eval_concrete(a, preset, value)).max().expect("max of no arguments") + offset
        }
        TimeExpr::Affine { terms, constant } => terms.iter().fold(*constant, |acc, (p, k)| acc + value(*p) * k),
    }
}

/// Every instance with a token in each preset place, enabled or not, in
/// transition order.
pub fn instances(net: &TbNet, m: &ConcreteMarking) -> Vec<Instance> {
    let mut out = Vec::new();
    for (ti, t) in net.transitions.iter().enumerate() {
        let choices: Vec<Vec<Rational>> = t.pre.iter().map(|p| m[p.0].iter().copied().dedup().collect()).collect();
        if choices.iter().any(Vec::is_empty) {
            continue;
        }
        for tuple in choices.into_iter().multi_cartesian_product() {
            let value = |p: PlaceId| tuple[t.pre.iter().position(|q| *q == p).expect("preset place")];
            let lb = eval_concrete(&t.tf.lb, &t.pre, &value);
            let ub = eval_concrete(&t.tf.ub, &t.pre, &value);
            out.push(Instance { transition: TransId(ti), tuple: tuple.clone(), lb, ub });
        }
    }
    out
}

/// Instances that may fire now, with their admissible firing window: it
/// starts no earlier than `now` and ends no later than the earliest deadline
/// of an alive strong instance.
pub fn enabled_instances(net: &TbNet, s: &ConcreteState) -> Vec<(Instance, Rational, Rational)> {
    let all = instances(net, &s.marking);
    let deadline =
        all.iter().filter(|i| net.transition(i.transition).is_strong() && i.alive(s.now)).map(|i| i.ub).min();
    all.into_iter()
        .filter_map(|i| {
            let lo = i.lb.max(s.now);
            let hi = deadline.map_or(i.ub, |d| i.ub.min(d));
            (lo <= hi).then_some((i, lo, hi))
        })
        .collect()
}

/// Fires `inst` at `time`: consumes one token per preset place and puts a
/// token stamped `time` in every postset place.
pub fn fire(net: &TbNet, s: &ConcreteState, inst: &Instance, time: Rational) -> ConcreteState {
    let t = net.transition(inst.transition);
    let mut m = s.marking.clone();
    for (p, v) in t.pre.iter().zip(&inst.tuple) {
        let at = m[p.0].iter().position(|x| x == v).expect("token in marking");
        m[p.0].remove(at);
    }
    for p in &t.post {
        m[p.0].push(time);
        m[p.0].sort();
    }
    ConcreteState { marking: m, now: time }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Step {
    pub transition: TransId,
    #[serde(serialize_with = "ser_rationals")]
    pub tuple: Vec<Rational>,
    #[serde(serialize_with = "ser_rational")]
    pub time: Rational,
    #[serde(skip)]
    pub state: ConcreteState,
}

fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

fn ser_rationals<S: serde::Serializer>(r: &[Rational], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(r.iter().map(Rational::to_string))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub seed: u64,
    pub initial: ConcreteState,
    pub steps: Vec<Step>,
}

impl Trace {
    /// One line per step: index, transition, tuple and time.
    pub fn dump<'a>(&'a self, net: &'a TbNet) -> impl fmt::Display + 'a {
        TraceDump { trace: self, net }
    }
}

struct TraceDump<'a> {
    trace: &'a Trace,
    net: &'a TbNet,
}

impl fmt::Display for TraceDump<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.trace.steps.iter().enumerate() {
            let tuple: Vec<String> = s.tuple.iter().map(fmt_decimal).collect();
            writeln!(
                f,
                "{{\"step\":{i},\"transition\":\"{}\",\"tuple\":[{}],\"time\":\"{}\"}}",
                self.net.transition(s.transition).name,
                tuple.join(","),
                s.time
            )?;
        }
        Ok(())
    }
}

/// Grid step: `1 / (10 * lcm of the model's denominators)`.
pub fn grid(net: &TbNet) -> Rational {
    let consts = net.constants();
    Rational::new(1, 10 * lcm_denominators(consts.iter()))
}

/// A grid value of `[lo, hi]`; each endpoint with probability 1/5 when it is
/// on the grid, otherwise uniform.
fn pick(rng: &mut ChaCha8Rng, lo: Rational, hi: Rational, step: Rational) -> Rational {
    let a = (lo / step).ceil().to_integer();
    let b = (hi / step).floor().to_integer();
    if a > b {
        return lo;
    }
    let r: f64 = rng.gen();
    let k = if r < 0.2 {
        a
    } else if r < 0.4 {
        b
    } else {
        rng.gen_range(a..=b)
    };
    step * int(k)
}

/// A grid solution of the initial constraint, chosen symbol by symbol.
pub fn sample_initial(net: &TbNet, rng: &mut ChaCha8Rng) -> Option<ConcreteState> {
    let step = grid(net);
    let mut c: LinearConstraint = net.initial_constraint.clone();
    let syms = net.initial_symbols();
    let mut values = Vec::new();
    for &i in &syms {
        let b = c.bounds_of(&AffineExpr::var(Var::Ts(i)))?;
        let lo = match b.lower {
            Bound::Finite { value, .. } => value,
            Bound::Infinite => Rational::zero(),
        }
        .max(Rational::zero());
        let hi = b.upper.value().unwrap_or(lo + int(10));
        // Open bounds: step inside.
        let lo = if matches!(b.lower, Bound::Finite { closed: false, .. }) { lo + step } else { lo };
        let hi = if matches!(b.upper, Bound::Finite { closed: false, .. }) { hi - step } else { hi };
        let v = pick(rng, lo, hi, step);
        c = c.substitute(&|x| {
            if x == Var::Ts(i) {
                AffineExpr::constant(v)
            } else {
                AffineExpr::var(x)
            }
        });
        if !c.is_satisfiable() {
            return None;
        }
        values.push((i, v));
    }
    let value = |i: u32| values.iter().find(|(j, _)| *j == i).map(|(_, v)| *v).expect("initial symbol");
    let marking: ConcreteMarking = net
        .initial_marking
        .iter()
        .map(|bag| {
            let mut b: Vec<Rational> = bag.iter().map(|i| value(*i)).collect();
            b.sort();
            b
        })
        .collect();
    let now = values.iter().map(|(_, v)| *v).max().unwrap_or_else(Rational::zero);
    Some(ConcreteState { marking, now })
}

/// A seeded random run of at most `max_steps` firings.
pub fn simulate(net: &TbNet, seed: u64, max_steps: usize) -> Option<Trace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial = sample_initial(net, &mut rng)?;
    Some(simulate_from(net, initial, seed, &mut rng, max_steps))
}

/// Continues a run from `initial` with the given generator.
pub fn simulate_from(net: &TbNet, initial: ConcreteState, seed: u64, rng: &mut ChaCha8Rng, max_steps: usize) -> Trace {
    let step = grid(net);
    let mut state = initial.clone();
    let mut steps = Vec::new();
    for _ in 0..max_steps {
        let options = enabled_instances(net, &state);
        if options.is_empty() {
            break;
        }
        let (inst, lo, hi) = &options[rng.gen_range(0..options.len())];
        let time = pick(rng, *lo, *hi, step);
        let next = fire(net, &state, inst, time);
        steps.push(Step { transition: inst.transition, tuple: inst.tuple.clone(), time, state: next.clone() });
        state = next;
    }
    Trace { seed, initial, steps }
}
