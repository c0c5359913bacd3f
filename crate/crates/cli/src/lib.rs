//! Front end of `tbnet`: loads a model, builds its graph, writes the
//! requested artifacts and runs queries and the simulation cross-check.

pub mod export;

use export::{export_dot, export_records, load_records, RecordError};
use log::info;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;
use tbnet_core::graph::{build_graph, BuildConfig, BuildStats, ReachGraph};
use tbnet_core::net::{parse_net, NetError, TbNet};
use tbnet_core::query::{evaluate, parse_queries, Answer, QueryError};
use tbnet_core::rational::Rational;
use tbnet_core::sim::{coverage_check, CoverageReport};
use tbnet_core::symbolic::EngineConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Net { path: PathBuf, source: NetError },
    #[error("{}: {reason}", path.display())]
    Invalid { path: PathBuf, reason: String },
    #[error("{}: {source}", path.display())]
    Query { path: PathBuf, source: QueryError },
    #[error("{}: {source}", path.display())]
    Records { path: PathBuf, source: RecordError },
}

impl CliError {
    pub const EXIT_CODE: i32 = 2;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulateConfig {
    pub seed: u64,
    pub runs: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub ta: bool,
    /// Shift-invariant canonicalization on relative nets; only applied
    /// together with TA replacement.
    pub erasure: bool,
    /// Tokens yet to arrive in an empty place are stamped no earlier than
    /// the current time when deciding anonymity.
    pub future_after_tl: bool,
    pub time_limit: Option<Rational>,
    pub max_states: usize,
    pub parallel: bool,
    pub dot: Option<PathBuf>,
    pub records: Option<PathBuf>,
    /// JSON summary of the whole run.
    pub report: Option<PathBuf>,
    pub query: Option<PathBuf>,
    pub simulate: Option<SimulateConfig>,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>) -> Self {
        RunConfig {
            input: input.into(),
            ta: true,
            erasure: true,
            future_after_tl: false,
            time_limit: None,
            max_states: BuildConfig::default().max_states,
            parallel: cfg!(feature = "parallel"),
            dot: None,
            records: None,
            report: None,
            query: None,
            simulate: None,
        }
    }

    pub fn build_config(&self) -> BuildConfig {
        let engine = EngineConfig {
            ta: self.ta,
            relative_erasure: self.erasure && self.ta,
            future_after_tl: self.future_after_tl,
            ..EngineConfig::default()
        };
        BuildConfig { engine, time_limit: self.time_limit, max_states: self.max_states, parallel: self.parallel }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryResult {
    pub query: String,
    /// `Err` text when the query could not be answered on this graph.
    pub answer: Result<Answer, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub net: String,
    pub nodes: usize,
    pub edges: usize,
    pub complete: bool,
    pub stats: BuildStats,
    pub queries: Vec<QueryResult>,
    pub coverage: Option<CoverageReport>,
}

impl Report {
    /// Findings that make the run exit with 1.
    pub fn has_findings(&self) -> bool {
        self.coverage.as_ref().is_some_and(|c| !c.violations.is_empty())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "net {}: {} nodes, {} edges{}",
            self.net,
            self.nodes,
            self.edges,
            if self.complete { "" } else { " (incomplete)" }
        );
        for q in &self.queries {
            match &q.answer {
                Ok(a) => {
                    let _ = writeln!(s, "{} => {a}", q.query);
                }
                Err(e) => {
                    let _ = writeln!(s, "{} => error: {e}", q.query);
                }
            }
        }
        if let Some(c) = &self.coverage {
            let _ = writeln!(
                s,
                "coverage: {} runs, {} steps, {} violations{}",
                c.runs,
                c.steps,
                c.violations.len(),
                if c.incomplete { " (incomplete graph)" } else { "" }
            );
            for v in c.violations.iter().take(10) {
                let _ = writeln!(s, "  seed {} step {}: {}", v.seed, v.step, v.reason);
            }
        }
        s
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

/// Parses and validates a model file.
pub fn load_net(path: &Path) -> Result<TbNet, CliError> {
    let net = parse_net(&read(path)?).map_err(|source| CliError::Net { path: path.to_owned(), source })?;
    let diags = net.validate();
    for d in diags.iter().filter(|d| !d.is_error()) {
        info!("{}", net.describe(d));
    }
    if let Some(d) = diags.iter().find(|d| d.is_error()) {
        return Err(CliError::Invalid { path: path.to_owned(), reason: net.describe(d) });
    }
    Ok(net)
}

fn run_queries(net: &TbNet, graph: &ReachGraph, path: &Path) -> Result<Vec<QueryResult>, CliError> {
    let queries =
        parse_queries(&read(path)?, net).map_err(|source| CliError::Query { path: path.to_owned(), source })?;
    Ok(queries
        .into_iter()
        .map(|(text, q)| QueryResult { query: text, answer: evaluate(graph, &q).map_err(|e| e.to_string()) })
        .collect())
}

/// Builds the graph and performs every requested action.
pub fn analyze(config: &RunConfig) -> Result<Report, CliError> {
    let net = load_net(&config.input)?;
    let started = Instant::now();
    let graph = build_graph(&net, config.build_config());
    info!("built {} nodes, {} edges in {:.2?}", graph.nodes.len(), graph.edges.len(), started.elapsed());
    if let Some(p) = &config.dot {
        write(p, &export_dot(&net, &graph))?;
    }
    if let Some(p) = &config.records {
        write(p, &export_records(&net, &graph))?;
    }
    let queries = match &config.query {
        Some(p) => run_queries(&net, &graph, p)?,
        None => Vec::new(),
    };
    let coverage = config.simulate.map(|s| {
        let started = Instant::now();
        let c = coverage_check(&net, &graph, s.runs, s.steps, s.seed);
        info!("coverage check over {} steps in {:.2?}", c.steps, started.elapsed());
        c
    });
    let report = Report {
        net: net.name.clone(),
        nodes: graph.nodes.len(),
        edges: graph.edges.len(),
        complete: graph.complete,
        stats: graph.stats,
        queries,
        coverage,
    };
    if let Some(p) = &config.report {
        write(p, &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
    }
    Ok(report)
}

/// Answers queries against a previously exported record file.
pub fn eval_records(model: &Path, records: &Path, query: &Path) -> Result<Vec<QueryResult>, CliError> {
    let net = load_net(model)?;
    let graph =
        load_records(&net, &read(records)?).map_err(|source| CliError::Records { path: records.to_owned(), source })?;
    run_queries(&net, &graph, query)
}
