//! Questions answered from a built graph: marking existence, token
//! extremals, deadlocks, stamp relations and path time bounds.

mod parse;

pub use parse::{parse_queries, parse_query};

use crate::constraint::{AffineExpr, Atom, LinearConstraint, Var};
use crate::graph::{Color, NodeId, ReachGraph};
use crate::net::{PlaceId, TbNet};
use crate::rational::{fmt_decimal, Rational};
use crate::symbolic::Marking;
use num_traits::Zero;
use petgraph::algo::{dijkstra, tarjan_scc};
use petgraph::graph::{DiGraph, NodeIndex};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unknown place `{0}`")]
    UnknownPlace(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("no node matches the filter")]
    EmptySelection,
    #[error("no node has a token at both {0}")]
    PlaceEmptyOrMulti(String),
    #[error("S{to} is not reachable from S{from}")]
    Unreachable { from: NodeId, to: NodeId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    fn holds<T: Ord>(self, a: T, b: T) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }

    fn negated(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
        }
    }
}

/// Integer linear combination of token counts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CountExpr {
    pub terms: Vec<(PlaceId, i64)>,
    pub constant: i64,
}

impl CountExpr {
    pub fn eval(&self, m: &Marking) -> i64 {
        self.constant + self.terms.iter().map(|(p, k)| k * m[p.0].len() as i64).sum::<i64>()
    }
}

/// Boolean combination of comparisons between token counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MarkingPredicate {
    True,
    Cmp(CountExpr, CmpOp, CountExpr),
    Not(Box<MarkingPredicate>),
    And(Vec<MarkingPredicate>),
    Or(Vec<MarkingPredicate>),
}

impl MarkingPredicate {
    pub fn eval(&self, m: &Marking) -> bool {
        match self {
            MarkingPredicate::True => true,
            MarkingPredicate::Cmp(a, op, b) => op.holds(a.eval(m), b.eval(m)),
            MarkingPredicate::Not(p) => !p.eval(m),
            MarkingPredicate::And(ps) => ps.iter().all(|p| p.eval(m)),
            MarkingPredicate::Or(ps) => ps.iter().any(|p| p.eval(m)),
        }
    }
}

/// The `index`-th token (in stamp order) of a place.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StampRef {
    pub place: PlaceId,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Query {
    Exists(MarkingPredicate),
    Max(CountExpr, Option<MarkingPredicate>),
    Min(CountExpr, Option<MarkingPredicate>),
    Deadlocks,
    Relation(StampRef, CmpOp, StampRef),
    PathBounds(NodeId, NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict3 {
    No,
    Maybe,
    Yes,
}

impl fmt::Display for Verdict3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict3::Yes => "yes",
            Verdict3::No => "no",
            Verdict3::Maybe => "maybe",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Deadlocks {
    /// Nodes where nothing can fire.
    pub definite: Vec<NodeId>,
    /// Nodes with outgoing edges where some represented marking may still
    /// enable nothing.
    pub potential: Vec<NodeId>,
}

/// Elapsed-time range between two nodes; `max == None` is unbounded.
/// Both ends are conservative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathBounds {
    #[serde(serialize_with = "ser_rational")]
    pub min: Rational,
    #[serde(serialize_with = "ser_opt_rational")]
    pub max: Option<Rational>,
}

fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

fn ser_opt_rational<S: serde::Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_str(&r.to_string()),
        None => s.serialize_str("inf"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Answer {
    Exists { found: Vec<NodeId>, complete: bool },
    Extremal { min: i64, max: i64, exact: bool },
    Deadlocks(Deadlocks),
    Relation { per_node: Vec<(NodeId, Verdict3)>, aggregate: Verdict3 },
    PathBounds(PathBounds),
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids = |v: &[NodeId]| v.iter().map(|n| format!("S{n}")).collect::<Vec<_>>().join(" ");
        let tag = |exact: bool| if exact { "" } else { " (incomplete graph)" };
        match self {
            Answer::Exists { found, complete } if found.is_empty() => {
                write!(f, "not found{}", tag(*complete))
            }
            Answer::Exists { found, complete } => {
                write!(f, "found: {}{}", ids(found), tag(*complete))
            }
            Answer::Extremal { min, max, exact } => {
                write!(f, "min {min}, max {max}{}", tag(*exact))
            }
            Answer::Deadlocks(d) => write!(f, "definite: [{}], potential: [{}]", ids(&d.definite), ids(&d.potential)),
            Answer::Relation { per_node, aggregate } => {
                let cells: Vec<String> = per_node.iter().map(|(n, v)| format!("S{n}={v}")).collect();
                write!(f, "{aggregate} ({})", cells.join(" "))
            }
            Answer::PathBounds(b) => write!(
                f,
                "min {}, max {} (conservative)",
                fmt_decimal(&b.min),
                b.max.as_ref().map_or("inf".to_string(), fmt_decimal)
            ),
        }
    }
}

pub fn evaluate(graph: &ReachGraph, query: &Query) -> Result<Answer, QueryError> {
    Ok(match query {
        Query::Exists(p) => {
            let found = query_exists(graph, p);
            Answer::Exists { found, complete: graph.is_exhaustive() }
        }
        Query::Max(e, filter) | Query::Min(e, filter) => {
            let (min, max) = query_extremal(graph, e, filter.as_ref())?;
            Answer::Extremal { min, max, exact: graph.is_exhaustive() }
        }
        Query::Deadlocks => Answer::Deadlocks(query_deadlocks(graph)),
        Query::Relation(a, op, b) => {
            let per_node = query_stamp_relation(graph, *a, *op, *b)?;
            let aggregate = per_node.iter().map(|(_, v)| *v).max().unwrap_or(Verdict3::No);
            Answer::Relation { per_node, aggregate }
        }
        Query::PathBounds(from, to) => Answer::PathBounds(query_path_bounds(graph, *from, *to)?),
    })
}

/// Nodes whose marking satisfies `pred`.
pub fn query_exists(graph: &ReachGraph, pred: &MarkingPredicate) -> Vec<NodeId> {
    (0..graph.nodes.len()).filter(|n| pred.eval(&graph.nodes[*n].state.marking)).collect()
}

/// `(min, max)` of `expr` over the nodes matching `filter`.
pub fn query_extremal(
    graph: &ReachGraph,
    expr: &CountExpr,
    filter: Option<&MarkingPredicate>,
) -> Result<(i64, i64), QueryError> {
    let values: Vec<i64> = graph
        .nodes
        .iter()
        .filter(|n| filter.is_none_or(|p| p.eval(&n.state.marking)))
        .map(|n| expr.eval(&n.state.marking))
        .collect();
    match (values.iter().min(), values.iter().max()) {
        (Some(a), Some(b)) => Ok((*a, *b)),
        _ => Err(QueryError::EmptySelection),
    }
}

pub fn query_deadlocks(graph: &ReachGraph) -> Deadlocks {
    let mut definite = Vec::new();
    let mut potential = Vec::new();
    for (id, node) in graph.nodes.iter().enumerate() {
        if node.flags.not_expanded {
            continue;
        }
        if node.flags.deadlock {
            definite.push(id);
            continue;
        }
        let mut seen = HashSet::new();
        let mut conditions = Vec::new();
        let mut all_white = true;
        for e in graph.out_edges(id) {
            all_white &= e.tail == Color::White;
            if seen.insert((e.transition, e.tuple.clone(), e.branch)) {
                conditions.push(e.condition.split_atoms());
            }
        }
        if all_white && escapes(&node.state.constraint, &conditions) {
            potential.push(id);
        }
    }
    Deadlocks { definite, potential }
}

/// Whether `c` has a solution violating every condition: one failed atom is
/// picked per condition, depth first.
fn escapes(c: &LinearConstraint, conditions: &[Vec<LinearConstraint>]) -> bool {
    let Some((first, rest)) = conditions.split_first() else {
        return true;
    };
    first.iter().any(|a| {
        let next = c.and(&a.negate_atom());
        next.is_satisfiable() && escapes(&next, rest)
    })
}

/// Per node holding both tokens: does the relation hold in every
/// represented marking (yes), in none (no), or is it undecided (maybe)?
pub fn query_stamp_relation(
    graph: &ReachGraph,
    a: StampRef,
    op: CmpOp,
    b: StampRef,
) -> Result<Vec<(NodeId, Verdict3)>, QueryError> {
    let mut out = Vec::new();
    for (id, node) in graph.nodes.iter().enumerate() {
        let m = &node.state.marking;
        let (Some(sa), Some(sb)) = (m[a.place.0].get(a.index), m[b.place.0].get(b.index)) else {
            continue;
        };
        let verdict = match (sa.sym(), sb.sym()) {
            (Some(i), Some(j)) => {
                let c = &node.state.constraint;
                let (x, y) = (AffineExpr::var(Var::Ts(i)), AffineExpr::var(Var::Ts(j)));
                if entails(c, &x, op, &y) {
                    Verdict3::Yes
                } else if entails(c, &x, op.negated(), &y) {
                    Verdict3::No
                } else {
                    Verdict3::Maybe
                }
            }
            _ => Verdict3::Maybe,
        };
        out.push((id, verdict));
    }
    if out.is_empty() {
        return Err(QueryError::PlaceEmptyOrMulti(format!("{}.{} and {}.{}", a.place.0, a.index, b.place.0, b.index)));
    }
    Ok(out)
}

fn entails(c: &LinearConstraint, x: &AffineExpr, op: CmpOp, y: &AffineExpr) -> bool {
    let (x, y) = (x.clone(), y.clone());
    match op {
        CmpOp::Eq => c.implies_atom(&Atom::eq(x, y)),
        CmpOp::Ne => !c.with(&Atom::eq(x, y)).is_satisfiable(),
        CmpOp::Lt => c.implies_atom(&Atom::lt(x, y)),
        CmpOp::Le => c.implies_atom(&Atom::le(x, y)),
        CmpOp::Gt => c.implies_atom(&Atom::gt(x, y)),
        CmpOp::Ge => c.implies_atom(&Atom::ge(x, y)),
    }
}

/// Shortest path by minimum edge delay; longest by maximum delay, unbounded
/// when a cycle with positive delay lies between the two nodes.
pub fn query_path_bounds(graph: &ReachGraph, from: NodeId, to: NodeId) -> Result<PathBounds, QueryError> {
    let n = graph.nodes.len();
    if from >= n {
        return Err(QueryError::UnknownNode(format!("S{from}")));
    }
    if to >= n {
        return Err(QueryError::UnknownNode(format!("S{to}")));
    }
    if from == to {
        return Ok(PathBounds { min: Rational::zero(), max: Some(Rational::zero()) });
    }
    let mut g: DiGraph<(), (Rational, Option<Rational>)> = DiGraph::with_capacity(n, graph.edges.len());
    for _ in 0..n {
        g.add_node(());
    }
    for e in &graph.edges {
        let lo = e.delay.lower.value().unwrap_or_else(Rational::zero);
        g.add_edge(NodeIndex::new(e.src), NodeIndex::new(e.dst), (lo, e.delay.upper.value()));
    }
    let dist = dijkstra(&g, NodeIndex::new(from), Some(NodeIndex::new(to)), |e| e.weight().0);
    let min = *dist.get(&NodeIndex::new(to)).ok_or(QueryError::Unreachable { from, to })?;

    // Restrict to nodes lying on some from -> to path.
    let forward = reach(&g, from, petgraph::Direction::Outgoing);
    let backward = reach(&g, to, petgraph::Direction::Incoming);
    let on_path: BTreeSet<usize> = forward.intersection(&backward).copied().collect();
    let sub = g.filter_map(|i, _| on_path.contains(&i.index()).then_some(i.index()), |_, w| Some(*w));
    let positive = |w: &(Rational, Option<Rational>)| w.1.is_none_or(|u| u > Rational::zero());
    let unbounded = |w: &(Rational, Option<Rational>)| w.1.is_none();
    if sub.edge_weights().any(unbounded) {
        return Ok(PathBounds { min, max: None });
    }
    let sccs = tarjan_scc(&sub);
    let mut comp = vec![0usize; sub.node_count()];
    for (k, scc) in sccs.iter().enumerate() {
        for v in scc {
            comp[v.index()] = k;
        }
    }
    for e in sub.edge_indices() {
        let (a, b) = sub.edge_endpoints(e).expect("edge of the subgraph");
        if comp[a.index()] == comp[b.index()] && positive(&sub[e]) {
            return Ok(PathBounds { min, max: None });
        }
    }
    // tarjan_scc lists components in reverse topological order.
    let mut best: BTreeMap<usize, Rational> = BTreeMap::new();
    let start = sub.node_indices().find(|i| sub[*i] == from).expect("source on its own path");
    let goal = sub.node_indices().find(|i| sub[*i] == to).expect("target on its own path");
    best.insert(comp[start.index()], Rational::zero());
    for k in (0..sccs.len()).rev() {
        let Some(here) = best.get(&k).copied() else {
            continue;
        };
        for v in &sccs[k] {
            for e in sub.edges(*v) {
                use petgraph::visit::EdgeRef;
                let t = comp[e.target().index()];
                if t == k {
                    continue;
                }
                let cand = here + e.weight().1.expect("bounded edge");
                let slot = best.entry(t).or_insert(cand);
                if cand > *slot {
                    *slot = cand;
                }
            }
        }
    }
    Ok(PathBounds { min, max: best.get(&comp[goal.index()]).copied() })
}

fn reach<E>(g: &DiGraph<(), E>, from: NodeId, dir: petgraph::Direction) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([from]);
    let mut stack = vec![NodeIndex::new(from)];
    while let Some(v) = stack.pop() {
        for w in g.neighbors_directed(v, dir) {
            if seen.insert(w.index()) {
                stack.push(w);
            }
        }
    }
    seen
}

/// Place lookup shared by the query parser.
pub(crate) fn place(net: &TbNet, name: &str) -> Result<PlaceId, QueryError> {
    net.place_id(name).ok_or_else(|| QueryError::UnknownPlace(name.to_string()))
}
