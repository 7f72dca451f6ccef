//! JSON machine descriptors and TSV traces.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::MachineError;
use crate::extended::{
    AbsenceDetectionMachine, PopulationProtocol, TableBroadcasts, TableDetections, WeakBroadcastMachine,
};
use crate::machine::{to_table, Cmp, Guard, Machine, Rule, TableMachine};
use crate::semantics::Run;
use crate::state::State;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("ParseError: {0}")]
    Json(#[from] serde_json::Error),
    #[error("ParseError: {0}")]
    Syntax(String),
    #[error("MixedModel: a descriptor may carry only one of broadcasts, detections and rendezvous")]
    MixedModel,
    #[error("AmbiguousStateName: two states print as `{0}`")]
    AmbiguousStateName(String),
    #[error("{0}")]
    Machine(#[from] MachineError),
}

impl FormatError {
    pub fn name(&self) -> &'static str {
        match self {
            FormatError::Json(_) | FormatError::Syntax(_) => "ParseError",
            FormatError::MixedModel => "MixedModel",
            FormatError::AmbiguousStateName(_) => "AmbiguousStateName",
            FormatError::Machine(e) => e.name(),
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn default_beta() -> u32 {
    1
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuardFile {
    pub state: String,
    pub op: String,
    pub value: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleFile {
    pub from: String,
    #[serde(default)]
    pub guards: Vec<GuardFile>,
    pub to: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BroadcastFile {
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub responses: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionFile {
    pub from: String,
    pub support: Vec<String>,
    pub to: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RendezvousFile {
    pub p: String,
    pub q: String,
    pub p2: String,
    pub q2: String,
}

/// The machine file format and its extended-model variants.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineFile {
    #[serde(default = "default_beta")]
    pub beta: u32,
    pub states: Vec<String>,
    pub init: BTreeMap<String, String>,
    #[serde(default)]
    pub accept: Vec<String>,
    #[serde(default)]
    pub reject: Vec<String>,
    #[serde(default)]
    pub rules: Vec<RuleFile>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub halting: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub broadcasts: Vec<BroadcastFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub detections: Vec<DetectionFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rendezvous: Vec<RendezvousFile>,
}

/// A parsed descriptor.
#[derive(Clone)]
pub enum Descriptor {
    Plain(TableMachine),
    WeakBroadcast(WeakBroadcastMachine),
    AbsenceDetection(AbsenceDetectionMachine),
    Population(PopulationProtocol),
}

impl Descriptor {
    pub fn kind(&self) -> &'static str {
        match self {
            Descriptor::Plain(_) => "machine",
            Descriptor::WeakBroadcast(_) => "weak-broadcast",
            Descriptor::AbsenceDetection(_) => "absence-detection",
            Descriptor::Population(_) => "population",
        }
    }
}

fn sym(s: &str) -> State {
    State::sym(s)
}

fn syms<'a>(v: impl IntoIterator<Item = &'a String>) -> BTreeSet<State> {
    v.into_iter().map(|s| sym(s)).collect()
}

impl MachineFile {
    pub fn table(&self) -> Result<TableMachine, FormatError> {
        let rules = self
            .rules
            .iter()
            .map(|r| {
                let guards = r
                    .guards
                    .iter()
                    .map(|g| {
                        let op = Cmp::parse(&g.op).ok_or_else(|| FormatError::Syntax(format!("unknown guard op `{}`", g.op)))?;
                        Ok(Guard { state: sym(&g.state), op, value: g.value })
                    })
                    .collect::<Result<_, FormatError>>()?;
                Ok(Rule { from: sym(&r.from), guards, to: sym(&r.to) })
            })
            .collect::<Result<_, FormatError>>()?;
        Ok(TableMachine::new(
            self.beta,
            self.states.iter().map(|s| sym(s)).collect(),
            self.init.iter().map(|(l, q)| (l.clone(), sym(q))).collect(),
            syms(&self.accept),
            syms(&self.reject),
            rules,
            self.halting,
        )?)
    }

    pub fn descriptor(&self) -> Result<Descriptor, FormatError> {
        let extended = [!self.broadcasts.is_empty(), !self.detections.is_empty(), !self.rendezvous.is_empty()];
        if extended.iter().filter(|&&x| x).count() > 1 {
            return Err(FormatError::MixedModel);
        }
        let known: BTreeSet<&str> = self.states.iter().map(String::as_str).collect();
        let check = |q: &str| {
            if known.contains(q) {
                Ok(())
            } else {
                Err(FormatError::Machine(MachineError::InvalidMachine(format!("unknown state {q}"))))
            }
        };
        if !self.rendezvous.is_empty() {
            if !self.rules.is_empty() {
                return Err(FormatError::MixedModel);
            }
            let mut table = Vec::new();
            for r in &self.rendezvous {
                table.push(((sym(&r.p), sym(&r.q)), (sym(&r.p2), sym(&r.q2))));
            }
            return Ok(Descriptor::Population(PopulationProtocol::new(
                self.states.iter().map(|s| sym(s)).collect(),
                self.init.iter().map(|(l, q)| (l.clone(), sym(q))).collect(),
                syms(&self.accept),
                syms(&self.reject),
                table,
            )?));
        }
        let base = Arc::new(self.table()?);
        if !self.broadcasts.is_empty() {
            let mut entries = Vec::new();
            for b in &self.broadcasts {
                check(&b.from)?;
                check(&b.to)?;
                let mut resp = BTreeMap::new();
                for (x, y) in &b.responses {
                    check(x)?;
                    check(y)?;
                    resp.insert(sym(x), sym(y));
                }
                entries.push((sym(&b.from), sym(&b.to), resp));
            }
            return Ok(Descriptor::WeakBroadcast(WeakBroadcastMachine {
                base,
                broadcasts: Arc::new(TableBroadcasts::new(entries)?),
            }));
        }
        if !self.detections.is_empty() {
            let mut entries = Vec::new();
            for d in &self.detections {
                check(&d.from)?;
                check(&d.to)?;
                for s in &d.support {
                    check(s)?;
                }
                entries.push((sym(&d.from), d.support.iter().map(|s| sym(s)).collect(), sym(&d.to)));
            }
            return Ok(Descriptor::AbsenceDetection(AbsenceDetectionMachine {
                base,
                detections: Arc::new(TableDetections::new(entries)),
            }));
        }
        Ok(Descriptor::Plain((*base).clone()))
    }
}

pub fn parse_machine_file(text: &str) -> Result<MachineFile, FormatError> {
    Ok(serde_json::from_str(text)?)
}

pub fn parse_descriptor(text: &str) -> Result<Descriptor, FormatError> {
    parse_machine_file(text)?.descriptor()
}

/// Printed names of `states`; distinct states must print differently.
fn names(states: &[State]) -> Result<BTreeMap<State, String>, FormatError> {
    let mut seen = BTreeSet::new();
    let mut out = BTreeMap::new();
    for q in states {
        let n = q.to_string();
        if !seen.insert(n.clone()) {
            return Err(FormatError::AmbiguousStateName(n));
        }
        out.insert(q.clone(), n);
    }
    Ok(out)
}

fn plain_file(t: &TableMachine) -> Result<(MachineFile, BTreeMap<State, String>), FormatError> {
    let states = t.states().expect("tables enumerate their states");
    let nm = names(&states)?;
    let n = |q: &State| nm[q].clone();
    let file = MachineFile {
        beta: t.beta(),
        states: states.iter().map(n).collect(),
        init: t.init_map().iter().map(|(l, q)| (l.clone(), n(q))).collect(),
        accept: t.accepting_states().iter().map(n).collect(),
        reject: t.rejecting_states().iter().map(n).collect(),
        rules: t
            .rules()
            .unwrap_or(&[])
            .iter()
            .map(|r| RuleFile {
                from: n(&r.from),
                guards: r
                    .guards
                    .iter()
                    .map(|g| GuardFile { state: n(&g.state), op: g.op.name().to_string(), value: g.value })
                    .collect(),
                to: n(&r.to),
            })
            .collect(),
        halting: t.is_halting(),
        ..MachineFile::default()
    };
    Ok((file, nm))
}

/// Serializes any machine, enumerating its rules if it is
/// procedure-backed.
pub fn machine_to_file(m: &dyn Machine) -> Result<MachineFile, FormatError> {
    Ok(plain_file(&to_table(m)?)?.0)
}

pub fn weak_broadcast_to_file(wb: &WeakBroadcastMachine) -> Result<MachineFile, FormatError> {
    let (mut file, nm) = plain_file(&to_table(wb.base.as_ref())?)?;
    for q in nm.keys() {
        if let Some((to, f)) = wb.broadcasts.broadcast(q) {
            let responses = nm
                .keys()
                .filter_map(|r| {
                    let r2 = wb.broadcasts.respond(f, r);
                    (&r2 != r).then(|| (nm[r].clone(), nm[&r2].clone()))
                })
                .collect();
            file.broadcasts.push(BroadcastFile { from: nm[q].clone(), to: nm[&to].clone(), responses });
        }
    }
    Ok(file)
}

/// Enumerates every non-silent detection; refuses when the number of
/// (initiator, support) pairs exceeds 10^6.
pub fn absence_detection_to_file(ad: &AbsenceDetectionMachine) -> Result<MachineFile, FormatError> {
    let (mut file, nm) = plain_file(&to_table(ad.base.as_ref())?)?;
    let states: Vec<State> = nm.keys().cloned().collect();
    let initiators: Vec<&State> = states.iter().filter(|q| ad.detections.is_initiator(q)).collect();
    let size = (initiators.len() as u128).saturating_mul(1u128 << states.len().min(100));
    if size > 1_000_000 {
        return Err(MachineError::TooLargeToSerialize(size).into());
    }
    for q in initiators {
        for mask in 1u64..(1 << states.len()) {
            let support: Vec<State> =
                states.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, s)| s.clone()).collect();
            let to = ad.detections.detect(q, &support);
            if &to != q {
                file.detections.push(DetectionFile {
                    from: nm[q].clone(),
                    support: support.iter().map(|s| nm[s].clone()).collect(),
                    to: nm[&to].clone(),
                });
            }
        }
    }
    Ok(file)
}

pub fn population_to_file(p: &PopulationProtocol) -> Result<MachineFile, FormatError> {
    let nm = names(&p.states)?;
    let n = |q: &State| nm[q].clone();
    Ok(MachineFile {
        beta: 1,
        states: p.states.iter().map(n).collect(),
        init: p.init.iter().map(|(l, q)| (l.clone(), n(q))).collect(),
        accept: p.accept.iter().map(n).collect(),
        reject: p.reject.iter().map(n).collect(),
        rendezvous: p
            .rendezvous()
            .iter()
            .filter(|(a, b)| a != b)
            .map(|((a, b), (c, d))| RendezvousFile { p: n(a), q: n(b), p2: n(c), q2: n(d) })
            .collect(),
        ..MachineFile::default()
    })
}

pub fn descriptor_to_file(d: &Descriptor) -> Result<MachineFile, FormatError> {
    match d {
        Descriptor::Plain(t) => machine_to_file(t),
        Descriptor::WeakBroadcast(wb) => weak_broadcast_to_file(wb),
        Descriptor::AbsenceDetection(ad) => absence_detection_to_file(ad),
        Descriptor::Population(p) => population_to_file(p),
    }
}

pub fn to_json(file: &MachineFile) -> String {
    let mut s = serde_json::to_string_pretty(file).expect("machine files serialize");
    s.push('\n');
    s
}

pub const TRACE_HEADER: &str = "step\tselection\tchanged";

/// One row of a trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRow {
    pub step: usize,
    /// `None` stands for every node.
    pub selection: Option<Vec<usize>>,
    pub changed: Vec<(usize, String)>,
}

/// Writes one row per step; a selection of every node prints as `ALL`.
pub fn write_trace(run: &Run) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for (i, sel) in run.selections.iter().enumerate() {
        let (a, b) = (&run.configurations[i], &run.configurations[i + 1]);
        let all = !a.is_empty() && sel.len() == a.len() && {
            let s: BTreeSet<&usize> = sel.iter().collect();
            s.len() == a.len()
        };
        let selection = if all {
            "ALL".to_string()
        } else {
            sel.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        };
        let changed: Vec<String> =
            (0..a.len()).filter(|&v| a[v] != b[v]).map(|v| format!("{v}:{}", b[v])).collect();
        out.push_str(&format!("{i}\t{selection}\t{}\n", changed.join(" ")));
    }
    out
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>, FormatError> {
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err(FormatError::Syntax("missing trace header".into()));
    }
    let bad = |i: usize, what: &str| FormatError::Syntax(format!("trace line {}: {what}", i + 2));
    lines
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split('\t').collect();
            let [step, sel, changed] = cols[..] else { return Err(bad(i, "expected three columns")) };
            let step = step.parse().map_err(|_| bad(i, "bad step"))?;
            let selection = match sel {
                "ALL" => None,
                "" => Some(Vec::new()),
                s => Some(s.split(',').map(|v| v.parse().map_err(|_| bad(i, "bad node id"))).collect::<Result<_, _>>()?),
            };
            let changed = changed
                .split(' ')
                .filter(|s| !s.is_empty())
                .map(|p| {
                    let (v, q) = p.split_once(':').ok_or_else(|| bad(i, "bad change"))?;
                    Ok((v.parse().map_err(|_| bad(i, "bad node id"))?, q.to_string()))
                })
                .collect::<Result<_, FormatError>>()?;
            Ok(TraceRow { step, selection, changed })
        })
        .collect()
}
