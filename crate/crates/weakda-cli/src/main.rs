//! `weakda`: generate graphs, build and compile machines, run them, compute
//! verdicts and run verification corpora.

mod checks;
mod experiment;
mod resolve;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;
use weakda::formats::{
    absence_detection_to_file, machine_to_file, parse_descriptor, population_to_file, to_json,
    weak_broadcast_to_file, write_trace, Descriptor, FormatError,
};
use weakda::compile::{compile_absence_detection, compile_rendezvous, compile_weak_broadcast};
use weakda::error::graph_error_name;
use weakda::semantics::{run_with_schedule, verdict_adversarial, verdict_pseudostochastic, Regime, Schedule, ScheduleFamily};
use weakda::verify::VerifyError;
use weakda::{GraphError, MachineError};

use resolve::{parse_kind, parse_labels, resolve_graph, MachineArgs, Source};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

impl CliError {
    pub fn name(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "UsageError",
            CliError::Io(_) => "IoError",
            CliError::Machine(e) => e.name(),
            CliError::Graph(e) => graph_error_name(e),
            CliError::Format(e) => e.name(),
            CliError::Verify(e) => e.name(),
        }
    }

    /// `Name: message`, without repeating a name the message already has.
    pub fn describe(&self) -> String {
        let msg = self.to_string();
        if msg.starts_with(self.name()) {
            msg
        } else {
            format!("{}: {msg}", self.name())
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "weakda", version, about = "Weak asynchronous distributed automata workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled graph in the text format.
    Generate {
        /// line, cycle, star, clique or random<k> (maximum degree k).
        #[arg(long)]
        kind: String,
        /// `a,a,b` in node order or `a=3,b=2` as counts.
        #[arg(long)]
        labels: String,
        /// Required for random graphs.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "g")]
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a machine under a scheduler.
    Run {
        #[command(flatten)]
        machine: MachineArgs,
        /// Graph file or `kind:labels[:seed]`.
        #[arg(long)]
        graph: String,
        /// synchronous, exclusive or liberal.
        #[arg(long)]
        scheduler: String,
        /// uniform, round-robin or biased:<node>.
        #[arg(long, default_value = "uniform")]
        family: String,
        /// Required unless the scheduler is synchronous.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_steps: usize,
        /// Writes the run as a TSV trace.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Decide acceptance under adversarial or pseudo-stochastic scheduling.
    Verdict {
        #[command(flatten)]
        machine: MachineArgs,
        #[arg(long)]
        graph: String,
        /// adversarial or pseudostochastic.
        #[arg(long)]
        mode: String,
        /// Step budget (adversarial) or configuration budget
        /// (pseudostochastic).
        #[arg(long, default_value_t = 1_000_000)]
        budget: usize,
    },
    /// Compile an extended-model descriptor into a plain machine.
    Compile {
        #[arg(long)]
        input: PathBuf,
        /// Required for absence detection.
        #[arg(long)]
        degree_bound: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the descriptor of a named protocol.
    Protocol {
        #[command(flatten)]
        machine: MachineArgs,
        /// Write the compiled plain machine instead of the descriptor.
        #[arg(long)]
        compiled: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification corpus and report one TSV row per instance.
    Verify {
        /// Check name, or `all`.
        #[arg(long)]
        check: String,
        #[arg(long, default_value_t = 10)]
        instances: u64,
        #[arg(long, default_value_t = 500)]
        steps: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every instance of a JSON experiment config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print `-` instead of the wall time, for byte-stable reports.
        #[arg(long)]
        omit_wall_time: bool,
    },
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string())),
    }
}

/// Number of worker threads from `DA_WORKERS`, default 1.
pub fn workers() -> Result<usize, CliError> {
    match std::env::var("DA_WORKERS") {
        Err(_) => Ok(1),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(usage(format!("DA_WORKERS must be a positive integer, got `{s}`"))),
        },
    }
}

pub fn parse_family(s: &str, n: usize) -> Result<ScheduleFamily, CliError> {
    match s {
        "uniform" => Ok(ScheduleFamily::Uniform),
        "round-robin" => Ok(ScheduleFamily::RoundRobin),
        _ => match s.strip_prefix("biased:").map(str::parse::<usize>) {
            Some(Ok(v)) if v < n => Ok(ScheduleFamily::Biased(v)),
            _ => Err(usage(format!("unknown schedule family `{s}`"))),
        },
    }
}

/// Builds the schedule; seeds are mandatory for randomized regimes.
pub fn schedule(regime: &str, family: &str, seed: Option<u64>, n: usize) -> Result<Schedule, CliError> {
    let regime = Regime::parse(regime).ok_or_else(|| usage(format!("unknown scheduler `{regime}`")))?;
    let family = parse_family(family, n)?;
    match (regime, seed) {
        (Regime::Synchronous, s) => Ok(Schedule::random(n, regime, family, s.unwrap_or(0))),
        (_, Some(s)) => Ok(Schedule::random(n, regime, family, s)),
        (_, None) => Err(usage("randomized schedulers need --seed")),
    }
}

pub fn consensus(m: &dyn weakda::Machine, c: &[weakda::State]) -> &'static str {
    if c.iter().all(|q| m.is_accepting(q)) {
        "ACCEPT"
    } else if c.iter().all(|q| m.is_rejecting(q)) {
        "REJECT"
    } else {
        "NO_CONSENSUS"
    }
}

fn compiled_file(d: &Descriptor, degree_bound: Option<u32>) -> Result<weakda::formats::MachineFile, CliError> {
    Ok(match d {
        Descriptor::Plain(t) => machine_to_file(t)?,
        Descriptor::WeakBroadcast(wb) => machine_to_file(&compile_weak_broadcast(wb)?)?,
        Descriptor::AbsenceDetection(ad) => {
            let k = degree_bound.ok_or_else(|| usage("absence detection needs --degree-bound"))?;
            machine_to_file(&compile_absence_detection(ad, k as usize)?)?
        }
        Descriptor::Population(p) => machine_to_file(&compile_rendezvous(p)?)?,
    })
}

fn dispatch(cmd: Command) -> Result<ExitCode, CliError> {
    let here = Path::new(".");
    match cmd {
        Command::Generate { kind, labels, seed, name, out } => {
            let kind = parse_kind(&kind)?;
            if matches!(kind, weakda::graph::GraphKind::RandomBounded(_)) && seed.is_none() {
                return Err(usage("random graphs need --seed"));
            }
            let g = weakda::graph::generate(kind, &parse_labels(&labels)?, seed)?;
            emit(out.as_deref(), &g.to_text(&name))?;
        }
        Command::Run { machine, graph, scheduler, family, seed, max_steps, trace } => {
            let r = machine.resolve(here)?;
            let g = resolve_graph(&graph, here)?;
            let sched = schedule(&scheduler, &family, seed, g.node_count())?;
            let run = run_with_schedule(r.machine.clone(), &g, sched, max_steps)?;
            if let Some(p) = trace {
                emit(Some(&p), &write_trace(&run))?;
            }
            emit(None, &format!("{}\t{}\n", consensus(r.machine.as_ref(), run.last()), run.steps()))?;
        }
        Command::Verdict { machine, graph, mode, budget } => {
            let r = machine.resolve(here)?;
            let g = resolve_graph(&graph, here)?;
            let v = match mode.as_str() {
                "adversarial" => verdict_adversarial(r.machine, &g, budget)?,
                "pseudostochastic" | "pseudo-stochastic" => verdict_pseudostochastic(r.machine, &g, budget)?,
                other => return Err(usage(format!("unknown mode `{other}`"))),
            };
            emit(None, &format!("{}\n", v.outcome))?;
        }
        Command::Compile { input, degree_bound, out } => {
            let d = parse_descriptor(&resolve::read_file(&input)?)?;
            emit(out.as_deref(), &to_json(&compiled_file(&d, degree_bound)?))?;
        }
        Command::Protocol { machine, compiled, out } => {
            if machine.machine.is_some() {
                return Err(usage("protocol takes --protocol, not --machine"));
            }
            let r = machine.resolve(here)?;
            let file = if compiled {
                machine_to_file(r.machine.as_ref())?
            } else {
                match &r.source {
                    Source::Plain(m) => machine_to_file(m.as_ref())?,
                    Source::WeakBroadcast(wb) => weak_broadcast_to_file(wb)?,
                    Source::AbsenceDetection(ad, _) => absence_detection_to_file(ad)?,
                    Source::Population(p) => population_to_file(p)?,
                    Source::Majority(_) | Source::Pipeline(_) => machine_to_file(r.machine.as_ref())?,
                }
            };
            emit(out.as_deref(), &to_json(&file))?;
        }
        Command::Verify { check, instances, steps, seed, out } => {
            let (text, status) = checks::corpus_report(&check, instances, steps, seed)?;
            emit(out.as_deref(), &text)?;
            return Ok(status);
        }
        Command::Experiment { config, out, omit_wall_time } => {
            let (text, status) = experiment::run_config(&config, !omit_wall_time)?;
            emit(out.as_deref(), &text)?;
            return Ok(status);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.describe());
            ExitCode::from(e.exit_code())
        }
    }
}

