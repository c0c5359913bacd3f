use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use tbnet_cli::{analyze, eval_records, CliError, RunConfig, SimulateConfig};
use tbnet_core::rational::{parse_rational, Rational};

/// Symbolic reachability analysis of Time-Basic Petri nets.
#[derive(Parser)]
#[command(name = "tbnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the reachability graph of a model.
    Analyze(AnalyzeArgs),
    /// Answer queries against an exported record file.
    Eval {
        model: PathBuf,
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        query: PathBuf,
    },
}

#[derive(Args)]
struct AnalyzeArgs {
    model: PathBuf,
    /// Keep every timestamp symbolic and time absolute.
    #[arg(long)]
    no_ta: bool,
    /// Keep absolute time on relative nets.
    #[arg(long)]
    no_erasure: bool,
    /// Assume tokens still to come are stamped no earlier than now.
    #[arg(long)]
    future_after_tl: bool,
    /// Do not expand states whose elapsed time may exceed this.
    #[arg(long, value_parser = rational)]
    time_limit: Option<Rational>,
    /// Stop adding nodes after this many; the graph is then incomplete.
    #[arg(long, default_value_t = 100_000)]
    max_states: usize,
    /// Expand on a single thread.
    #[arg(long)]
    sequential: bool,
    /// Write the graph in Graphviz format.
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Write nodes and edges as JSON lines.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Write a JSON summary of the run.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Answer the queries in this file, one per line.
    #[arg(long)]
    query: Option<PathBuf>,
    /// Cross-check the graph against random concrete runs.
    #[arg(long)]
    simulate: bool,
    #[arg(long, default_value_t = 0, requires = "simulate")]
    seed: u64,
    #[arg(long, default_value_t = 100, requires = "simulate")]
    runs: usize,
    #[arg(long, default_value_t = 50, requires = "simulate")]
    steps: usize,
}

fn rational(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

impl AnalyzeArgs {
    fn into_config(self) -> RunConfig {
        RunConfig {
            ta: !self.no_ta,
            erasure: !self.no_erasure,
            future_after_tl: self.future_after_tl,
            time_limit: self.time_limit,
            max_states: self.max_states,
            parallel: !self.sequential && cfg!(feature = "parallel"),
            dot: self.dot,
            records: self.records,
            report: self.report,
            query: self.query,
            simulate: self.simulate.then_some(SimulateConfig { seed: self.seed, runs: self.runs, steps: self.steps }),
            ..RunConfig::new(self.model)
        }
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(CliError::EXIT_CODE as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TBNET_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match cli.command {
        Command::Analyze(args) => match analyze(&args.into_config()) {
            Ok(report) => {
                print!("{}", report.summary());
                ExitCode::from(u8::from(report.has_findings()))
            }
            Err(e) => fail(e),
        },
        Command::Eval { model, records, query } => match eval_records(&model, &records, &query) {
            Ok(results) => {
                for q in &results {
                    match &q.answer {
                        Ok(a) => println!("{} => {a}", q.query),
                        Err(e) => println!("{} => error: {e}", q.query),
                    }
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}
