//! Graph writers: annotated DOT for viewing and JSON-lines records for
//! tooling. Both are byte-deterministic for a given graph.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt::Write as _;
use tbnet_core::constraint::{Bound, Bounds, LinearConstraint, NumberStyle};
use tbnet_core::graph::{BuildConfig, Color, Edge, Node, NodeFlags, NodeId, ReachGraph};
use tbnet_core::net::TbNet;
use tbnet_core::query::query_deadlocks;
use tbnet_core::rational::{fmt_decimal, fmt_fraction, parse_rational};
use tbnet_core::symbolic::{Stamp, SymbolicState};

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// `[a,b]`, `(a,b)`, ... with decimals; an infinite end prints as `inf`.
pub fn interval(b: &Bounds) -> String {
    let (open, lo) = match b.lower {
        Bound::Infinite => ('(', "-inf".to_string()),
        Bound::Finite { value, closed } => (if closed { '[' } else { '(' }, fmt_decimal(&value)),
    };
    let (close, hi) = match b.upper {
        Bound::Infinite => (')', "inf".to_string()),
        Bound::Finite { value, closed } => (if closed { ']' } else { ')' }, fmt_decimal(&value)),
    };
    format!("{open}{lo},{hi}{close}")
}

/// Boxes for states, doubled for possible deadlocks and dashed when left
/// unexpanded; edges read `t [dmin,dmax]` with an open head when merged into
/// a larger state and an open tail when only part of the source can fire.
pub fn export_dot(net: &TbNet, graph: &ReachGraph) -> String {
    let d = query_deadlocks(graph);
    let deadlocked: HashSet<NodeId> = d.definite.iter().chain(&d.potential).copied().collect();
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", escape(&net.name));
    out.push_str("  node [shape=box];\n");
    for (id, node) in graph.nodes.iter().enumerate() {
        let mut attrs = vec![
            format!("label=\"S{id}\""),
            format!("tooltip=\"{}\"", escape(&node.state.display(&net.places, NumberStyle::Decimal).to_string())),
        ];
        if deadlocked.contains(&id) {
            attrs.push("peripheries=2".into());
        }
        let mut style = Vec::new();
        if node.flags.not_expanded {
            style.push("dashed");
        }
        if node.flags.initial {
            style.push("bold");
        }
        if !style.is_empty() {
            attrs.push(format!("style=\"{}\"", style.join(",")));
        }
        let _ = writeln!(out, "  S{id} [{}];", attrs.join(", "));
    }
    for e in &graph.edges {
        let name = &net.transition(e.transition).name;
        let mut attrs = vec![format!("label=\"{} {}\"", escape(name), interval(&e.delay))];
        if e.head == Color::White {
            attrs.push("arrowhead=empty".into());
        }
        if e.tail == Color::White {
            attrs.push("dir=both".into());
            attrs.push("arrowtail=odot".into());
        }
        if !e.condition.is_true() {
            attrs.push(format!("tooltip=\"{}\"", escape(&e.condition.display(NumberStyle::Decimal))));
        }
        let _ = writeln!(out, "  S{} -> S{} [{}];", e.src, e.dst, attrs.join(", "));
    }
    out.push_str("}\n");
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaceTokens {
    pub place: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
pub enum Record {
    Node {
        id: NodeId,
        /// Non-empty places only, in declaration order.
        marking: Vec<PlaceTokens>,
        constraint: Vec<String>,
        flags: NodeFlags,
    },
    Edge {
        src: NodeId,
        dst: NodeId,
        transition: String,
        tuple: Vec<String>,
        branch: usize,
        condition: Vec<String>,
        tail: Color,
        head: Color,
        /// `None` when unbounded.
        dmin: Option<String>,
        dmin_closed: bool,
        dmax: Option<String>,
        dmax_closed: bool,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("record line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

fn bound_fields(b: &Bound) -> (Option<String>, bool) {
    match b {
        Bound::Infinite => (None, false),
        Bound::Finite { value, closed } => (Some(fmt_fraction(value)), *closed),
    }
}

/// One JSON object per line: every node, then every edge.
pub fn export_records(net: &TbNet, graph: &ReachGraph) -> String {
    let atoms = |c: &LinearConstraint| c.atom_strings(NumberStyle::Fraction);
    let mut out = String::new();
    for (id, node) in graph.nodes.iter().enumerate() {
        let marking = node
            .state
            .marking
            .iter()
            .enumerate()
            .filter(|(_, bag)| !bag.is_empty())
            .map(|(p, bag)| PlaceTokens {
                place: net.places[p].clone(),
                tokens: bag.iter().map(Stamp::to_string).collect(),
            })
            .collect();
        let r = Record::Node { id, marking, constraint: atoms(&node.state.constraint), flags: node.flags };
        out.push_str(&serde_json::to_string(&r).expect("records serialize"));
        out.push('\n');
    }
    for e in &graph.edges {
        let (dmin, dmin_closed) = bound_fields(&e.delay.lower);
        let (dmax, dmax_closed) = bound_fields(&e.delay.upper);
        let r = Record::Edge {
            src: e.src,
            dst: e.dst,
            transition: net.transition(e.transition).name.clone(),
            tuple: e.tuple.iter().map(Stamp::to_string).collect(),
            branch: e.branch,
            condition: atoms(&e.condition),
            tail: e.tail,
            head: e.head,
            dmin,
            dmin_closed,
            dmax,
            dmax_closed,
        };
        out.push_str(&serde_json::to_string(&r).expect("records serialize"));
        out.push('\n');
    }
    out
}

fn parse_stamp(s: &str) -> Option<Stamp> {
    if s == "TA" {
        return Some(Stamp::Ta);
    }
    s.strip_prefix('T')?.parse().ok().map(Stamp::Sym)
}

/// Rebuilds a graph from [`export_records`] output. Node ids must be dense
/// and come before the edges that use them. The build configuration is not
/// recorded; the result carries the default one.
pub fn load_records(net: &TbNet, text: &str) -> Result<ReachGraph, RecordError> {
    let mut nodes: Vec<Node> = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let err = |reason: String| RecordError::Malformed { line: i + 1, reason };
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        let constraint =
            |atoms: &[String]| LinearConstraint::parse(&atoms.join(" && ")).map_err(|e| err(e.to_string()));
        let stamps = |v: &[String]| {
            v.iter()
                .map(|s| parse_stamp(s).ok_or_else(|| err(format!("bad stamp `{s}`"))))
                .collect::<Result<Vec<_>, _>>()
        };
        match record {
            Record::Node { id, marking: places, constraint: atoms, flags } => {
                if id != nodes.len() {
                    return Err(err(format!("expected node {}, found {id}", nodes.len())));
                }
                let mut marking = vec![Vec::new(); net.places.len()];
                for pt in places {
                    let p = net.place_id(&pt.place).ok_or_else(|| err(format!("unknown place `{}`", pt.place)))?;
                    marking[p.0] = stamps(&pt.tokens)?;
                }
                nodes.push(Node { state: SymbolicState { marking, constraint: constraint(&atoms)? }, flags });
            }
            Record::Edge {
                src,
                dst,
                transition,
                tuple,
                branch,
                condition,
                tail,
                head,
                dmin,
                dmin_closed,
                dmax,
                dmax_closed,
            } => {
                if src >= nodes.len() || dst >= nodes.len() {
                    return Err(err(format!("edge S{src} -> S{dst} refers to an unknown node")));
                }
                let t =
                    net.transition_id(&transition).ok_or_else(|| err(format!("unknown transition `{transition}`")))?;
                let bound = |v: Option<String>, closed: bool| -> Result<Bound, RecordError> {
                    match v {
                        None => Ok(Bound::Infinite),
                        Some(s) => {
                            Ok(Bound::Finite { value: parse_rational(&s).map_err(|e| err(e.to_string()))?, closed })
                        }
                    }
                };
                edges.push(Edge {
                    src,
                    dst,
                    transition: t,
                    tuple: stamps(&tuple)?,
                    branch,
                    condition: constraint(&condition)?,
                    tail,
                    head,
                    delay: Bounds { lower: bound(dmin, dmin_closed)?, upper: bound(dmax, dmax_closed)? },
                });
            }
        }
    }
    let initial = (0..nodes.len()).filter(|n| nodes[*n].flags.initial).collect();
    let complete = nodes.iter().all(|n| !n.flags.not_expanded);
    Ok(ReachGraph { nodes, edges, initial, complete, config: BuildConfig::default(), stats: Default::default() })
}
