//! Turning command-line and config inputs into graphs and machines.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use clap::Args;
use weakda::compile::{compile_absence_detection, compile_rendezvous, compile_weak_broadcast};
use weakda::extended::{AbsenceDetectionMachine, PopulationProtocol, WeakBroadcastMachine};
use weakda::formats::{parse_descriptor, Descriptor};
use weakda::graph::{generate, GraphKind, LabelSpec};
use weakda::machine::MachineRef;
use weakda::protocols::{
    flood_presence, majority_daf, nl_pipeline, parity_sbp, threshold_daf_for, token_protocol, MajorityDaf, NlPipeline,
    ThresholdSpec,
};
use weakda::verify::Probe;
use weakda::{LabelledGraph, State};

use crate::CliError;

/// Protocol names accepted by `--protocol`.
pub const PROTOCOLS: [&str; 5] = ["majority", "threshold", "flood", "token", "parity"];

/// Machine source: a descriptor file or a named protocol.
#[derive(Args, Clone, Debug, Default)]
pub struct MachineArgs {
    /// Machine or extended-model descriptor (JSON).
    #[arg(long)]
    pub machine: Option<String>,
    /// Named protocol: majority, threshold, flood, token or parity.
    #[arg(long)]
    pub protocol: Option<String>,
    /// Majority coefficients, one per label a, b, ...
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub coeffs: Vec<i64>,
    /// Degree bound of majority and of compiled absence detection.
    #[arg(long)]
    pub degree_bound: Option<u32>,
    /// Threshold of the threshold protocol.
    #[arg(long)]
    pub k: Option<u32>,
    /// Counted label of threshold and flood.
    #[arg(long)]
    pub label: Option<String>,
}

/// A resolved machine with what the checkers need to know about it.
pub enum Source {
    Plain(MachineRef),
    WeakBroadcast(WeakBroadcastMachine),
    AbsenceDetection(AbsenceDetectionMachine, usize),
    Population(PopulationProtocol),
    Majority(MajorityDaf),
    Pipeline(NlPipeline),
}

pub struct Resolved {
    pub machine: MachineRef,
    pub source: Source,
}

impl Resolved {
    /// Probe readers for the invariant checks.
    pub fn probe(&self) -> Result<Probe, CliError> {
        Ok(match &self.source {
            Source::Plain(m) if m.is_halting() => Probe::halting(m.clone()),
            Source::Plain(_) => Probe::default(),
            Source::WeakBroadcast(wb) => Probe::weak_broadcast(&compile_weak_broadcast(wb)?),
            Source::AbsenceDetection(ad, k) => Probe::absence_detection(&compile_absence_detection(ad, *k)?),
            Source::Population(p) => Probe::rendezvous_token(&compile_rendezvous(p)?),
            Source::Majority(m) => Probe::majority(m),
            Source::Pipeline(p) => Probe::pipeline(p),
        })
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// The token protocol started with a token on every `l` node.
pub fn token_with_init() -> PopulationProtocol {
    let mut p = token_protocol();
    p.init = [("l".to_string(), State::sym("L")), ("*".to_string(), State::sym("0"))].into_iter().collect();
    p
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Parses a descriptor and compiles extended models into plain machines.
pub fn resolve_descriptor(text: &str, degree_bound: Option<u32>) -> Result<Resolved, CliError> {
    Ok(match parse_descriptor(text)? {
        Descriptor::Plain(t) => {
            let m: MachineRef = Arc::new(t);
            Resolved { machine: m.clone(), source: Source::Plain(m) }
        }
        Descriptor::WeakBroadcast(wb) => {
            Resolved { machine: Arc::new(compile_weak_broadcast(&wb)?), source: Source::WeakBroadcast(wb) }
        }
        Descriptor::AbsenceDetection(ad) => {
            let k = degree_bound.ok_or_else(|| usage("absence detection needs --degree-bound"))? as usize;
            Resolved { machine: Arc::new(compile_absence_detection(&ad, k)?), source: Source::AbsenceDetection(ad, k) }
        }
        Descriptor::Population(p) => {
            Resolved { machine: Arc::new(compile_rendezvous(&p)?), source: Source::Population(p) }
        }
    })
}

impl MachineArgs {
    /// Resolves the machine; relative paths are taken from `base`.
    pub fn resolve(&self, base: &Path) -> Result<Resolved, CliError> {
        match (&self.machine, &self.protocol) {
            (Some(path), None) => resolve_descriptor(&read_file(&base.join(path))?, self.degree_bound),
            (None, Some(name)) => self.named(name),
            _ => Err(usage("give exactly one of --machine and --protocol")),
        }
    }

    fn named(&self, name: &str) -> Result<Resolved, CliError> {
        let label = self.label.clone();
        Ok(match name {
            "majority" => {
                if self.coeffs.is_empty() {
                    return Err(usage("majority needs --coeffs"));
                }
                let k = self.degree_bound.ok_or_else(|| usage("majority needs --degree-bound"))?;
                let m = majority_daf(&ThresholdSpec::new(self.coeffs.clone(), k)?)?;
                Resolved { machine: m.full.clone(), source: Source::Majority(m) }
            }
            "threshold" => {
                let k = self.k.ok_or_else(|| usage("threshold needs --k"))?;
                let wb = threshold_daf_for(k, label.as_deref().unwrap_or("x"))?;
                Resolved { machine: Arc::new(compile_weak_broadcast(&wb)?), source: Source::WeakBroadcast(wb) }
            }
            "flood" => {
                let m: MachineRef = Arc::new(flood_presence(label.as_deref().unwrap_or("a")));
                Resolved { machine: m.clone(), source: Source::Plain(m) }
            }
            "token" => {
                let p = token_with_init();
                Resolved { machine: Arc::new(compile_rendezvous(&p)?), source: Source::Population(p) }
            }
            "parity" => {
                let p = nl_pipeline(&parity_sbp())?;
                Resolved { machine: p.full.clone(), source: Source::Pipeline(p) }
            }
            other => return Err(usage(format!("unknown protocol `{other}`; expected one of {}", PROTOCOLS.join(", ")))),
        })
    }
}

/// Parses a kind name: line, cycle, star, clique or random<k>.
pub fn parse_kind(s: &str) -> Result<GraphKind, CliError> {
    Ok(match s {
        "line" => GraphKind::Line,
        "cycle" => GraphKind::Cycle,
        "star" => GraphKind::Star,
        "clique" => GraphKind::Clique,
        _ => match s.strip_prefix("random").map(str::parse::<usize>) {
            Some(Ok(k)) => GraphKind::RandomBounded(k),
            _ => return Err(usage(format!("unknown graph kind `{s}`"))),
        },
    })
}

/// Parses `a,a,b` (positional) or `a=3,b=2` (counts).
pub fn parse_labels(s: &str) -> Result<LabelSpec, CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
    if parts.iter().any(|p| p.contains('=')) {
        let mut counts = Vec::new();
        for p in parts {
            let (l, n) = p.split_once('=').ok_or_else(|| usage(format!("mixed label spec `{s}`")))?;
            let n: usize = n.parse().map_err(|_| usage(format!("bad label count `{p}`")))?;
            counts.push((l.to_string(), n));
        }
        Ok(LabelSpec::counts(&counts))
    } else {
        Ok(LabelSpec::positional(&parts))
    }
}

/// A graph given as a file path or as `kind:labels[:seed]`
/// (`kind labels` also works).
pub fn resolve_graph(spec: &str, base: &Path) -> Result<LabelledGraph, CliError> {
    let path = base.join(spec);
    if path.is_file() {
        return Ok(LabelledGraph::parse(&read_file(&path)?)?.1);
    }
    let spec = spec.trim();
    let (kind, rest) = spec
        .split_once(':')
        .or_else(|| spec.split_once(char::is_whitespace))
        .ok_or_else(|| usage(format!("graph `{spec}` is neither a file nor kind:labels")))?;
    let (labels, seed) = match rest.split_once(':') {
        Some((l, s)) => (l, Some(s.trim().parse::<u64>().map_err(|_| usage(format!("bad graph seed `{s}`")))?)),
        None => (rest, None),
    };
    let kind = parse_kind(kind.trim())?;
    if matches!(kind, GraphKind::RandomBounded(_)) && seed.is_none() {
        return Err(usage("random graphs need a seed: random<k>:labels:seed"));
    }
    Ok(generate(kind, &parse_labels(labels.trim())?, seed)?)
}
