//! Batch experiments from a JSON config.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use serde::Deserialize;
use weakda::semantics::{run_with_schedule, verdict_adversarial, verdict_pseudostochastic, Witness};

use crate::checks::{check_resolved, run_pooled};
use crate::resolve::{read_file, resolve_graph, MachineArgs};
use crate::{consensus, schedule, usage, CliError};

pub const REPORT_HEADER: &str = "id\tresult\tsteps\twall_ms\terror";

/// Instance ids are numbers or strings; numbers sort first.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(untagged)]
pub enum InstanceId {
    Num(u64),
    Str(String),
}

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceId::Num(n) => write!(f, "{n}"),
            InstanceId::Str(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerConfig {
    /// synchronous, exclusive or liberal.
    pub regime: String,
    #[serde(default = "uniform")]
    pub family: String,
    pub seed: Option<u64>,
    pub max_steps: usize,
}

fn uniform() -> String {
    "uniform".into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub id: InstanceId,
    pub machine: Option<String>,
    pub protocol: Option<String>,
    #[serde(default)]
    pub coeffs: Vec<i64>,
    pub degree_bound: Option<u32>,
    pub k: Option<u32>,
    pub label: Option<String>,
    /// Graph file or `kind:labels[:seed]`.
    pub graph: String,
    /// run, verdict-adversarial, verdict-pseudostochastic or verify.
    pub mode: String,
    pub scheduler: Option<SchedulerConfig>,
    /// Verdict budget.
    pub budget: Option<usize>,
    /// Check name for verify mode.
    pub check: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instances: Vec<Instance>,
}

const MODES: [&str; 4] = ["run", "verdict-adversarial", "verdict-pseudostochastic", "verify"];

impl Instance {
    fn machine_args(&self) -> MachineArgs {
        MachineArgs {
            machine: self.machine.clone(),
            protocol: self.protocol.clone(),
            coeffs: self.coeffs.clone(),
            degree_bound: self.degree_bound,
            k: self.k,
            label: self.label.clone(),
        }
    }

    /// Static checks; violations are usage errors for the whole config.
    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(usage(format!("instance {}: {m}", self.id)));
        if self.machine.is_some() == self.protocol.is_some() {
            return bad("give exactly one of machine and protocol");
        }
        if !MODES.contains(&self.mode.as_str()) {
            return bad(&format!("unknown mode `{}`", self.mode));
        }
        let needs_schedule = matches!(self.mode.as_str(), "run" | "verify");
        match &self.scheduler {
            None if needs_schedule => return bad("mode needs a scheduler"),
            Some(s) if s.seed.is_none() && (s.regime != "synchronous" || self.mode == "verify") => {
                return bad("randomized components need a seed")
            }
            _ => {}
        }
        if self.mode == "verify" && self.check.is_none() {
            return bad("verify mode needs a check");
        }
        Ok(())
    }
}

struct Row {
    result: String,
    steps: String,
    wall_ms: u128,
    error: String,
}

fn execute(inst: &Instance, base: &Path) -> Result<(String, String), CliError> {
    let r = inst.machine_args().resolve(base)?;
    let g = resolve_graph(&inst.graph, base)?;
    match inst.mode.as_str() {
        "run" => {
            let s = inst.scheduler.as_ref().expect("validated");
            let sched = schedule(&s.regime, &s.family, s.seed, g.node_count())?;
            let run = run_with_schedule(r.machine.clone(), &g, sched, s.max_steps)?;
            Ok((consensus(r.machine.as_ref(), run.last()).to_string(), run.steps().to_string()))
        }
        "verdict-adversarial" => {
            let v = verdict_adversarial(r.machine, &g, inst.budget.unwrap_or(1_000_000))?;
            let steps = match &v.witness {
                Some(Witness::Lasso(l)) => (l.prefix.len() + l.cycle.len()).to_string(),
                _ => "-".into(),
            };
            Ok((v.outcome.to_string(), steps))
        }
        "verdict-pseudostochastic" => {
            let v = verdict_pseudostochastic(r.machine, &g, inst.budget.unwrap_or(1_000_000))?;
            Ok((v.outcome.to_string(), "-".into()))
        }
        _ => {
            let s = inst.scheduler.as_ref().expect("validated");
            let check = inst.check.as_deref().expect("validated");
            let (ok, step) = check_resolved(&r, &g, check, s.seed.expect("validated"), s.max_steps)?;
            Ok((if ok { "PASS" } else { "FAIL" }.into(), step.map_or("-".into(), |t| t.to_string())))
        }
    }
}

/// Runs a config file. Rows are ordered by instance id; the exit status is
/// 3 if any row errored.
pub fn run_config(path: &Path, wall_time: bool) -> Result<(String, ExitCode), CliError> {
    let text = read_file(path)?;
    let mut config: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let mut ids = BTreeSet::new();
    for inst in &config.instances {
        if !ids.insert(inst.id.clone()) {
            return Err(usage(format!("duplicate instance id {}", inst.id)));
        }
        inst.validate()?;
    }
    config.instances.sort_by(|a, b| a.id.cmp(&b.id));
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let rows = run_pooled(config.instances.clone(), |inst| {
        let start = Instant::now();
        let r = execute(&inst, &base);
        let wall_ms = start.elapsed().as_millis();
        match r {
            Ok((result, steps)) => Row { result, steps, wall_ms, error: "-".into() },
            Err(e) => Row {
                result: "ERROR".into(),
                steps: "-".into(),
                wall_ms,
                error: e.describe().replace(['\t', '\n'], " "),
            },
        }
    })?;
    let mut out = format!("{REPORT_HEADER}\n");
    let mut errored = false;
    for (inst, row) in config.instances.iter().zip(rows) {
        errored |= row.result == "ERROR";
        let wall = if wall_time { row.wall_ms.to_string() } else { "-".into() };
        out.push_str(&format!("{}\t{}\t{}\t{wall}\t{}\n", inst.id, row.result, row.steps, row.error));
    }
    Ok((out, if errored { ExitCode::from(3) } else { ExitCode::SUCCESS }))
}
