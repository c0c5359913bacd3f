//! Breadth-first construction of the symbolic reachability graph.
//!
//! Exploration is level-synchronous: every node of the current frontier is
//! expanded independently (in parallel with the `parallel` feature), then the
//! successors are merged into the graph one at a time in a fixed order. The
//! merge is the only step that mutates the graph, so both modes produce the
//! same graph, numbering included.

use crate::constraint::{AffineExpr, Atom, Bounds, LinearConstraint, Var};
use crate::net::{TbNet, TransId};
use crate::rational::Rational;
use crate::symbolic::{Engine, EngineConfig, Inclusion, Marking, Stamp, SymbolicState};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Black,
    White,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NodeFlags {
    pub initial: bool,
    /// No transition can fire in any represented marking.
    pub deadlock: bool,
    /// Left unexpanded: over the time limit, or the state cap was reached
    /// while expanding it.
    pub not_expanded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub state: SymbolicState,
    pub flags: NodeFlags,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub transition: TransId,
    pub tuple: Vec<Stamp>,
    /// Index of the firing branch within the source's enabling.
    pub branch: usize,
    /// Condition on the source markings able to take the edge; `TRUE` for a
    /// black tail.
    pub condition: LinearConstraint,
    pub tail: Color,
    /// White when the fired state was merged into a strictly larger node.
    pub head: Color,
    /// Range of the time elapsed along the edge.
    pub delay: Bounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub engine: EngineConfig,
    /// Nodes whose `TL - T0` may exceed this are not expanded. Falls back to
    /// the net's own limit.
    pub time_limit: Option<Rational>,
    pub max_states: usize,
    /// Expand frontier nodes on the rayon pool. Ignored without the
    /// `parallel` feature.
    pub parallel: bool,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            engine: EngineConfig::default(),
            time_limit: None,
            max_states: 100_000,
            parallel: cfg!(feature = "parallel"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub merged_equal: usize,
    pub merged_strict: usize,
    pub levels: usize,
}

#[derive(Debug, Clone)]
pub struct ReachGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub initial: Vec<NodeId>,
    /// False when the state cap stopped the exploration.
    pub complete: bool,
    pub config: BuildConfig,
    pub stats: BuildStats,
}

impl ReachGraph {
    pub fn out_edges(&self, n: NodeId) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.src == n)
    }

    /// Every node explored and none left unexpanded.
    pub fn is_exhaustive(&self) -> bool {
        self.complete && self.nodes.iter().all(|n| !n.flags.not_expanded)
    }
}

/// One firing of an expanded node, before merging.
struct Fired {
    transition: TransId,
    tuple: Vec<Stamp>,
    branch: usize,
    condition: LinearConstraint,
    delay: Bounds,
    states: Vec<SymbolicState>,
}

struct Expansion {
    deadlock: bool,
    fired: Vec<Fired>,
}

fn expand(engine: &Engine, net: &TbNet, state: &SymbolicState) -> Expansion {
    let enablings = engine.enablings(state);
    let mut fired = Vec::new();
    for e in &enablings {
        for (bi, b) in e.branches.iter().enumerate() {
            fired.push(Fired {
                transition: e.transition,
                tuple: e.tuple.clone(),
                branch: bi,
                condition: b.residual.clone(),
                delay: b.delay,
                states: engine.fire(state, e, bi),
            });
        }
    }
    // Canonical merge order: transition name, then tuple.
    fired.sort_by(|a, b| {
        (&net.transition(a.transition).name, &a.tuple, a.branch).cmp(&(
            &net.transition(b.transition).name,
            &b.tuple,
            b.branch,
        ))
    });
    Expansion { deadlock: enablings.is_empty(), fired }
}

/// `TL - T0` can exceed `limit`.
fn beyond(state: &SymbolicState, limit: Rational) -> bool {
    if state.symbol_count() == 0 {
        return false;
    }
    let gap = AffineExpr::var(Var::Tl).minus(&AffineExpr::var(Var::Ts(0)));
    state.constraint.with(&Atom::gt(gap, AffineExpr::constant(limit))).is_satisfiable()
}

fn tl_range(s: &SymbolicState) -> Bounds {
    s.constraint.bounds_of(&AffineExpr::var(Var::Tl)).expect("states are satisfiable")
}

struct Builder<'a> {
    engine: Engine<'a>,
    config: BuildConfig,
    limit: Option<Rational>,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    by_marking: HashMap<(Marking, Bounds), Vec<NodeId>>,
    by_topology: HashMap<Vec<usize>, Vec<NodeId>>,
    /// Range of `TL` per node. Inclusion never renames `TL`, so a node
    /// can only include states whose range lies within its own.
    tl_range: Vec<Bounds>,
    stats: BuildStats,
    complete: bool,
}

impl Builder<'_> {
    /// Node equal to or including `s`, preferring equality.
    fn find(&self, s: &SymbolicState) -> Option<(NodeId, Inclusion)> {
        let range = tl_range(s);
        // Equal states have the same marking and the same range of `TL`.
        if let Some(ids) = self.by_marking.get(&(s.marking.clone(), range)) {
            for &n in ids {
                if self.engine.includes(&self.nodes[n].state, s) == Inclusion::Equal {
                    return Some((n, Inclusion::Equal));
                }
            }
        }
        let ids = self.by_topology.get(&s.topology())?;
        let strict = |n: &NodeId| {
            self.tl_range[*n].contains(&range)
                && self.engine.includes(&self.nodes[*n].state, s) == Inclusion::StrictSuperset
        };
        #[cfg(feature = "parallel")]
        if self.config.parallel && ids.len() > 8 {
            return ids.par_iter().position_first(strict).map(|i| (ids[i], Inclusion::StrictSuperset));
        }
        ids.iter().position(strict).map(|i| (ids[i], Inclusion::StrictSuperset))
    }

    fn add(&mut self, state: SymbolicState, initial: bool) -> NodeId {
        let id = self.nodes.len();
        let not_expanded = self.limit.is_some_and(|l| beyond(&state, l));
        let range = tl_range(&state);
        self.by_marking.entry((state.marking.clone(), range)).or_default().push(id);
        self.by_topology.entry(state.topology()).or_default().push(id);
        self.tl_range.push(range);
        self.nodes.push(Node { state, flags: NodeFlags { initial, deadlock: false, not_expanded } });
        id
    }

    /// Merges the expansion of `src`; returns the new nodes.
    fn merge(&mut self, src: NodeId, x: Expansion) -> Vec<NodeId> {
        self.nodes[src].flags.deadlock = x.deadlock;
        let mut fresh = Vec::new();
        for f in x.fired {
            for s in f.states {
                let (dst, head) = match self.find(&s) {
                    Some((n, Inclusion::Equal)) => {
                        self.stats.merged_equal += 1;
                        (n, Color::Black)
                    }
                    Some((n, _)) => {
                        self.stats.merged_strict += 1;
                        (n, Color::White)
                    }
                    None if self.nodes.len() >= self.config.max_states => {
                        self.complete = false;
                        self.nodes[src].flags.not_expanded = true;
                        continue;
                    }
                    None => {
                        let n = self.add(s, false);
                        fresh.push(n);
                        (n, Color::Black)
                    }
                };
                let tail = if f.condition.is_true() { Color::Black } else { Color::White };
                self.edges.push(Edge {
                    src,
                    dst,
                    transition: f.transition,
                    tuple: f.tuple.clone(),
                    branch: f.branch,
                    condition: f.condition.clone(),
                    tail,
                    head,
                    delay: f.delay,
                });
            }
        }
        fresh
    }
}

/// Builds the graph of `net`.
pub fn build_graph(net: &TbNet, config: BuildConfig) -> ReachGraph {
    let engine = Engine::new(net, config.engine);
    let mut b = Builder {
        engine,
        config,
        limit: config.time_limit.or(net.time_limit),
        nodes: Vec::new(),
        edges: Vec::new(),
        by_marking: HashMap::new(),
        by_topology: HashMap::new(),
        tl_range: Vec::new(),
        stats: BuildStats::default(),
        complete: true,
    };
    let mut initial = Vec::new();
    for s in b.engine.initial_states() {
        match b.find(&s) {
            Some((n, _)) => initial.push(n),
            None => {
                let n = b.add(s, true);
                initial.push(n);
            }
        }
    }
    initial.dedup();
    let mut frontier: Vec<NodeId> = initial.clone();
    while !frontier.is_empty() {
        b.stats.levels += 1;
        let todo: Vec<NodeId> = frontier.into_iter().filter(|n| !b.nodes[*n].flags.not_expanded).collect();
        let expansions = expand_all(&b.engine, net, &b.nodes, &todo, config.parallel);
        let mut next = Vec::new();
        for (src, x) in todo.into_iter().zip(expansions) {
            next.extend(b.merge(src, x));
        }
        log::debug!("level {}: {} nodes, {} edges", b.stats.levels, b.nodes.len(), b.edges.len());
        frontier = next;
    }
    if !b.complete {
        log::warn!("state cap of {} reached; graph is incomplete", config.max_states);
    }
    ReachGraph { nodes: b.nodes, edges: b.edges, initial, complete: b.complete, config, stats: b.stats }
}

#[cfg(feature = "parallel")]
fn expand_all(engine: &Engine, net: &TbNet, nodes: &[Node], todo: &[NodeId], parallel: bool) -> Vec<Expansion> {
    if parallel {
        todo.par_iter().map(|n| expand(engine, net, &nodes[*n].state)).collect()
    } else {
        todo.iter().map(|n| expand(engine, net, &nodes[*n].state)).collect()
    }
}

#[cfg(not(feature = "parallel"))]
fn expand_all(engine: &Engine, net: &TbNet, nodes: &[Node], todo: &[NodeId], _parallel: bool) -> Vec<Expansion> {
    todo.iter().map(|n| expand(engine, net, &nodes[*n].state)).collect()
}
