//! Symbolic reachability graphs for Time-Basic Petri nets.
//!
//! A model is parsed with [`net::parse_net`], explored with
//! [`graph::build_graph`] and inspected with the functions in [`query`].
//! [`sim`] runs concrete executions and checks that the graph covers them.

pub mod constraint;
pub mod graph;
pub mod net;
pub mod query;
pub mod rational;
pub mod sim;
pub mod symbolic;
