//! Seeded random machines and the per-run soundness checks built on the
//! other verify modules.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::extract::{extract_absence_detection, extract_rendezvous, extract_weak_broadcast, Extraction};
use super::invariants::{run_invariant_checks, InvariantCheck, Probe};
use super::limits::{check_covering_lockstep, check_cutoff_indistinguishable};
use super::reorder::{check_extension, check_reordering, check_weak_extension, phase_shape_holds};
use super::VerifyError;
use crate::compile::{compile_absence_detection, compile_rendezvous, compile_weak_broadcast, RvView};
use crate::extended::{
    add_broadcasts, AbsenceDetectionMachine, ExtendedModel, PopulationProtocol, TableBroadcasts, TableDetections,
    WeakBroadcastMachine,
};
use crate::error::MachineError;
use crate::graph::{generate, make_cycle_cover, GraphKind, LabelCount, LabelSpec, LabelledGraph};
use crate::machine::{Cmp, Guard, Machine, MachineRef, Rule, TableMachine};
use crate::semantics::{run_with_schedule, Regime, Run, Schedule, ScheduleFamily};
use crate::state::{cutoff_multiset, State};

fn states(n: usize) -> Vec<State> {
    (0..n).map(|i| State::sym(&format!("s{i}"))).collect()
}

/// Random rule-table machine over states `s0..s{n-1}`.
pub fn random_machine(rng: &mut ChaCha8Rng, beta: u32, n: usize, labels: &[&str]) -> TableMachine {
    let qs = states(n);
    let init = labels.iter().map(|l| (l.to_string(), qs.choose(rng).unwrap().clone())).collect();
    let mut accept = BTreeSet::new();
    let mut reject = BTreeSet::new();
    for q in &qs {
        match rng.gen_range(0..3) {
            0 => {
                accept.insert(q.clone());
            }
            1 => {
                reject.insert(q.clone());
            }
            _ => {}
        }
    }
    let ops = [Cmp::Eq, Cmp::Ge, Cmp::Le];
    let rules = (0..rng.gen_range(1..=2 * n))
        .map(|_| Rule {
            from: qs.choose(rng).unwrap().clone(),
            guards: (0..rng.gen_range(0..=2))
                .map(|_| Guard {
                    state: qs.choose(rng).unwrap().clone(),
                    op: *ops.choose(rng).unwrap(),
                    value: rng.gen_range(0..=beta),
                })
                .collect(),
            to: qs.choose(rng).unwrap().clone(),
        })
        .collect();
    TableMachine::new(beta, qs, init, accept, reject, rules, false).expect("generated machine is valid")
}

fn random_map(rng: &mut ChaCha8Rng, qs: &[State]) -> BTreeMap<State, State> {
    let mut out = BTreeMap::new();
    for q in qs {
        if rng.gen_bool(0.5) {
            out.insert(q.clone(), qs.choose(rng).unwrap().clone());
        }
    }
    out
}

/// Random machine with one or two weak broadcasts.
pub fn random_weak_broadcast(seed: u64) -> WeakBroadcastMachine {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=4);
    let base = random_machine(&mut rng, 1, n, &["a", "b"]);
    let qs = states(n);
    let mut from = qs.clone();
    from.shuffle(&mut rng);
    let entries = from
        .into_iter()
        .take(rng.gen_range(1..=2))
        .map(|q| {
            let to = qs.choose(&mut rng).unwrap().clone();
            (q, to, random_map(&mut rng, &qs))
        })
        .collect();
    let b = TableBroadcasts::new(entries).expect("generated broadcasts are valid");
    add_broadcasts(Arc::new(base), Arc::new(b))
}

/// Random machine whose state `s0` initiates absence detections.
pub fn random_absence_detection(seed: u64) -> AbsenceDetectionMachine {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=3);
    let base = random_machine(&mut rng, 1, n, &["a", "b"]);
    let qs = states(n);
    let mut entries = Vec::new();
    for mask in 1u32..(1 << n) {
        let support: Vec<State> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| qs[i].clone()).collect();
        if support.contains(&qs[0]) && rng.gen_bool(0.6) {
            entries.push((qs[0].clone(), support, qs.choose(&mut rng).unwrap().clone()));
        }
    }
    if entries.is_empty() {
        entries.push((qs[0].clone(), vec![qs[0].clone()], qs[n - 1].clone()));
    }
    AbsenceDetectionMachine { base: Arc::new(base), detections: Arc::new(TableDetections::new(entries)) }
}

/// Random graph population protocol.
pub fn random_protocol(seed: u64) -> PopulationProtocol {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=4);
    let qs = states(n);
    let init = ["a", "b"].iter().map(|l| (l.to_string(), qs.choose(&mut rng).unwrap().clone())).collect();
    let mut table = Vec::new();
    for p in &qs {
        for q in &qs {
            if rng.gen_bool(0.5) {
                table.push(((p.clone(), q.clone()), (qs.choose(&mut rng).unwrap().clone(), qs.choose(&mut rng).unwrap().clone())));
            }
        }
    }
    let accept = qs.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect::<BTreeSet<_>>();
    let reject = qs.iter().filter(|q| !accept.contains(*q)).cloned().collect();
    PopulationProtocol::new(qs, init, accept, reject, table).expect("generated protocol is valid")
}

/// Schedule family used for the `i`-th sampled run of a corpus.
pub fn schedule_family(i: u64, n: usize) -> ScheduleFamily {
    match i % 3 {
        0 => ScheduleFamily::Uniform,
        1 => ScheduleFamily::RoundRobin,
        _ => ScheduleFamily::Biased(i as usize % n),
    }
}

/// Findings on one sampled run of a compiled machine.
#[derive(Clone, Debug, Default)]
pub struct Soundness {
    pub steps: usize,
    /// Steps of the reordered run explained by the extracted run.
    pub explained: usize,
    pub base_steps: usize,
    pub reordering: bool,
    pub shape: bool,
    pub extension: bool,
    /// The extracted run replays under the extended semantics.
    pub legal: bool,
    /// Checks with their first violating configuration.
    pub violations: Vec<(InvariantCheck, usize)>,
}

impl Soundness {
    pub fn passed(&self) -> bool {
        self.reordering && self.shape && self.extension && self.legal && self.violations.is_empty()
    }

    /// First failing item, for reports.
    pub fn failure(&self) -> Option<String> {
        if let Some((c, t)) = self.violations.first() {
            return Some(format!("{}@{t}", c.name()));
        }
        [("reordering", self.reordering), ("shape", self.shape), ("extension", self.extension), ("legal", self.legal)]
            .iter()
            .find(|e| !e.1)
            .map(|e| e.0.to_string())
    }
}

fn sample(m: MachineRef, g: &LabelledGraph, i: u64, seed: u64, steps: usize) -> Result<Run, VerifyError> {
    let schedule = Schedule::random(g.node_count(), Regime::Exclusive, schedule_family(i, g.node_count()), seed);
    Ok(run_with_schedule(m, g, schedule, steps)?)
}

fn replays(model: ExtendedModel<'_>, g: &LabelledGraph, ext: &Extraction) -> bool {
    let b = &ext.base;
    b.configurations.len() == b.selections.len() + 1
        && (0..b.selections.len())
            .all(|k| model.step(g, &b.configurations[k], &b.selections[k]).as_ref() == Ok(&b.configurations[k + 1]))
}

fn violations(
    g: &LabelledGraph,
    run: &Run,
    probe: &Probe,
    checks: &[InvariantCheck],
) -> Result<Vec<(InvariantCheck, usize)>, VerifyError> {
    Ok(run_invariant_checks(g, &run.configurations, probe, checks)?
        .into_iter()
        .filter_map(|o| o.first_violation.map(|t| (o.check, t)))
        .collect())
}

/// Samples the `i`-th run of the compiled machine and checks that it
/// reorders into an extension of a legal weak-broadcast run.
pub fn weak_broadcast_soundness(
    wb: &WeakBroadcastMachine,
    g: &LabelledGraph,
    i: u64,
    seed: u64,
    steps: usize,
) -> Result<Soundness, VerifyError> {
    let m = compile_weak_broadcast(wb)?;
    let run = sample(Arc::new(m.clone()), g, i, seed, steps)?;
    let ext = extract_weak_broadcast(&m, g, &run)?;
    let embed = |s: &State| m.base_state(s).cloned();
    Ok(Soundness {
        steps,
        explained: ext.settled,
        base_steps: ext.base.selections.len(),
        reordering: check_reordering(&m, g, &run, &ext.reordered, &ext.f)?,
        shape: phase_shape_holds(&ext.reordered, &|s| m.phase(s), ext.settled),
        extension: check_extension(&ext.reordered.configurations, &ext.base.configurations, &ext.g, &embed),
        legal: replays(ExtendedModel::WeakBroadcast(wb), g, &ext),
        violations: violations(g, &run, &Probe::weak_broadcast(&m), &[InvariantCheck::PhaseGap])?,
    })
}

/// As [`weak_broadcast_soundness`] for absence detection on graphs of
/// maximum degree `k`, also checking the distance labels.
pub fn absence_detection_soundness(
    ad: &AbsenceDetectionMachine,
    k: usize,
    g: &LabelledGraph,
    i: u64,
    seed: u64,
    steps: usize,
) -> Result<Soundness, VerifyError> {
    let m = compile_absence_detection(ad, k)?;
    let run = sample(Arc::new(m.clone()), g, i, seed, steps)?;
    let ext = extract_absence_detection(&m, g, &run)?;
    let embed = |s: &State| m.base_state(s).cloned();
    Ok(Soundness {
        steps,
        explained: ext.settled,
        base_steps: ext.base.selections.len(),
        reordering: check_reordering(&m, g, &run, &ext.reordered, &ext.f)?,
        shape: phase_shape_holds(&ext.reordered, &|s| m.phase(s), ext.settled),
        extension: check_extension(&ext.reordered.configurations, &ext.base.configurations, &ext.g, &embed),
        legal: replays(ExtendedModel::AbsenceDetection(ad), g, &ext),
        violations: violations(
            g,
            &run,
            &Probe::absence_detection(&m),
            &[InvariantCheck::PhaseGap, InvariantCheck::DistanceNoCycle],
        )?,
    })
}

/// Samples a run of the compiled protocol and checks that its base-state
/// changes pair up into legal rendezvous. `token` adds the single-token
/// check.
pub fn rendezvous_soundness(
    p: &PopulationProtocol,
    g: &LabelledGraph,
    i: u64,
    seed: u64,
    steps: usize,
    token: bool,
) -> Result<Soundness, VerifyError> {
    let m = compile_rendezvous(p)?;
    let run = sample(Arc::new(m.clone()), g, i, seed, steps)?;
    let ext = extract_rendezvous(&m, g, &run)?;
    let waiting = |s: &State| match m.view(s) {
        Some(RvView::Wait(q)) => Some(q.clone()),
        _ => None,
    };
    let checks: &[InvariantCheck] = if token { &[InvariantCheck::SingleToken] } else { &[] };
    Ok(Soundness {
        steps,
        explained: ext.settled,
        base_steps: ext.base.selections.len(),
        reordering: check_reordering(&m, g, &run, &ext.reordered, &ext.f)?,
        shape: true,
        extension: check_weak_extension(&ext.reordered.configurations, &ext.base.configurations, &ext.g, &waiting),
        legal: replays(ExtendedModel::Population(p), g, &ext),
        violations: violations(g, &run, &Probe::rendezvous_token(&m), checks)?,
    })
}

/// Machines of a cutoff or covering corpus: seeded, `β ∈ {1, 2}`, at most
/// four states.
pub fn random_corpus_machine(seed: u64, labels: &[&str]) -> MachineRef {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = rng.gen_range(1..=2);
    let n = rng.gen_range(2..=4);
    Arc::new(random_machine(&mut rng, beta, n, labels))
}


/// Random machine with halting acceptance: rules leaving accepting or
/// rejecting states are dropped.
pub fn random_halting_machine(seed: u64, labels: &[&str]) -> TableMachine {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=4);
    let m = random_machine(&mut rng, 1, n, labels);
    let halted = |q: &State| m.accepting_states().contains(q) || m.rejecting_states().contains(q);
    let rules = m.rules().unwrap().iter().filter(|r| !halted(&r.from)).cloned().collect();
    TableMachine::new(
        1,
        m.states().unwrap(),
        m.init_map().clone(),
        m.accepting_states().clone(),
        m.rejecting_states().clone(),
        rules,
        true,
    )
    .expect("dropping rules keeps the machine valid")
}

/// Connected graph with 4 to 6 nodes, maximum degree 3 and labels drawn
/// from `labels`.
pub fn random_small_graph(seed: u64, labels: &[&str]) -> LabelledGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let n = rng.gen_range(4..=6);
    let ls: Vec<&str> = (0..n).map(|_| *labels.choose(&mut rng).unwrap()).collect();
    generate(GraphKind::RandomBounded(3), &LabelSpec::positional(&ls), Some(seed)).expect("4 to 6 nodes are feasible")
}

/// Checks a corpus can be run for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorpusCheck {
    Invariant(InvariantCheck),
    Reordering,
    Extension,
    CoveringLockstep,
    Cutoff,
}

impl CorpusCheck {
    pub fn all() -> Vec<CorpusCheck> {
        let mut v: Vec<CorpusCheck> = InvariantCheck::ALL.into_iter().map(CorpusCheck::Invariant).collect();
        v.extend([CorpusCheck::Reordering, CorpusCheck::Extension, CorpusCheck::CoveringLockstep, CorpusCheck::Cutoff]);
        v
    }

    pub fn name(self) -> &'static str {
        match self {
            CorpusCheck::Invariant(c) => c.name(),
            CorpusCheck::Reordering => "reordering",
            CorpusCheck::Extension => "extension",
            CorpusCheck::CoveringLockstep => "covering_lockstep",
            CorpusCheck::Cutoff => "cutoff",
        }
    }

    pub fn parse(s: &str) -> Option<CorpusCheck> {
        Self::all().into_iter().find(|c| c.name() == s)
    }
}

/// One row of a corpus report.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusRow {
    pub check: CorpusCheck,
    pub instance: u64,
    pub passed: bool,
    /// First violating step, when the check locates one.
    pub step: Option<usize>,
    pub detail: String,
}

/// Runs `check` on corpus instance `instance`. Machines, graphs and
/// schedules all derive from `seed + instance`.
pub fn run_corpus_instance(check: CorpusCheck, instance: u64, seed: u64, steps: usize) -> Result<CorpusRow, VerifyError> {
    let s = seed.wrapping_add(instance);
    let row = |passed: bool, step: Option<usize>, detail: String| CorpusRow { check, instance, passed, step, detail };
    let first = |v: &[(InvariantCheck, usize)]| v.first().map(|e| e.1);
    let ab = ["a", "b"];
    match check {
        CorpusCheck::Invariant(InvariantCheck::PhaseGap) | CorpusCheck::Reordering | CorpusCheck::Extension => {
            let g = random_small_graph(s, &ab);
            let r = weak_broadcast_soundness(&random_weak_broadcast(s), &g, instance, s, steps)?;
            Ok(match check {
                CorpusCheck::Reordering => row(r.reordering && r.shape, None, format!("explained={}", r.explained)),
                CorpusCheck::Extension => row(r.extension && r.legal, None, format!("base_steps={}", r.base_steps)),
                _ => row(r.violations.is_empty(), first(&r.violations), String::new()),
            })
        }
        CorpusCheck::Invariant(InvariantCheck::DistanceNoCycle) => {
            let g = random_small_graph(s, &ab);
            let r = absence_detection_soundness(&random_absence_detection(s), 3, &g, instance, s, steps)?;
            Ok(row(r.violations.is_empty(), first(&r.violations), format!("base_steps={}", r.base_steps)))
        }
        CorpusCheck::Invariant(InvariantCheck::SingleToken) => {
            let mut p = crate::protocols::token_protocol();
            p.init = [("l".to_string(), State::sym("L")), ("*".to_string(), State::sym("0"))].into_iter().collect();
            let mut g = random_small_graph(s, &["x"]);
            let mut labels = g.labels().to_vec();
            let at = (s % labels.len() as u64) as usize;
            labels[at] = "l".into();
            g = g.relabel(labels).expect("relabelling keeps the graph valid");
            let r = rendezvous_soundness(&p, &g, instance, s, steps, true)?;
            Ok(row(r.passed(), first(&r.violations), r.failure().unwrap_or_default()))
        }
        CorpusCheck::Invariant(InvariantCheck::SumPreserved) => {
            let cancel = crate::protocols::CancelMachine { k: 3, e: 6 };
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let g = random_small_graph(s, &ab);
            let labels: Vec<String> = g.nodes().map(|_| rng.gen_range(-2i64..=2).to_string()).collect();
            let g = g.relabel(labels).expect("relabelling keeps the graph valid");
            let run = sample(Arc::new(cancel.clone()), &g, instance, s, steps)?;
            let v = violations(&g, &run, &Probe::cancel(&cancel), &[InvariantCheck::SumPreserved])?;
            Ok(row(v.is_empty(), first(&v), String::new()))
        }
        CorpusCheck::Invariant(InvariantCheck::LeadersNotAllBot) => {
            let spec = crate::protocols::ThresholdSpec::new(vec![1, -1], 3)?;
            let maj = crate::protocols::majority_daf(&spec)?;
            let g = random_small_graph(s, &ab);
            let run = sample(maj.full.clone(), &g, instance, s, steps)?;
            let v = violations(&g, &run, &Probe::majority(&maj), &[InvariantCheck::LeadersNotAllBot])?;
            Ok(row(v.is_empty(), first(&v), String::new()))
        }
        CorpusCheck::Invariant(InvariantCheck::HaltedMonotone) => {
            let m: MachineRef = Arc::new(random_halting_machine(s, &ab));
            let g = random_small_graph(s, &ab);
            let run = sample(m.clone(), &g, instance, s, steps)?;
            let v = violations(&g, &run, &Probe::halting(m), &[InvariantCheck::HaltedMonotone])?;
            Ok(row(v.is_empty(), first(&v), String::new()))
        }
        CorpusCheck::CoveringLockstep => {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let labels = ["a", "b", "c"];
            let n = rng.gen_range(3..=6);
            let ls: Vec<&str> = (0..n).map(|_| *labels.choose(&mut rng).unwrap()).collect();
            let g = generate(GraphKind::Cycle, &LabelSpec::positional(&ls), None).expect("cycles of 3+ nodes exist");
            let lambda = 2 + (instance % 2) as usize;
            let cover = make_cycle_cover(&g, lambda).map_err(MachineError::from)?;
            Ok(row(check_covering_lockstep(random_corpus_machine(s, &labels), &cover, steps), None, format!("lambda={lambda}")))
        }
        CorpusCheck::Cutoff => {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let mut counts = LabelCount::new();
            counts.insert("a".into(), rng.gen_range(0..=7));
            counts.insert("b".into(), rng.gen_range(0..=7));
            let m = random_corpus_machine(s, &ab);
            let k = m.beta() as usize + 1;
            if cutoff_multiset(&counts, k).values().sum::<usize>() < 3 {
                for c in counts.values_mut() {
                    *c = (*c).max(2);
                }
            }
            let detail = format!("{counts:?}");
            Ok(row(check_cutoff_indistinguishable(m, &counts, steps), None, detail))
        }
    }
}
