//! Recovery of the simulated run from a run of a compiled machine.

use std::collections::{BTreeMap, BTreeSet};

use super::reorder::{non_silent_steps, reorder_three_phase};
use super::VerifyError;
use crate::compile::{
    AdView, CompiledAbsenceDetection, CompiledRendezvous, CompiledWeakBroadcast, Dist, RvView, WbView,
};
use crate::extended::{ad_sync_step, pp_step, wb_successor, ExtendedRun, ExtendedSelection};
use crate::graph::LabelledGraph;
use crate::semantics::{successor, Configuration, Run};
use crate::state::State;

/// A reordering of a compiled run together with the run it extends.
#[derive(Clone, Debug)]
pub struct Extraction {
    /// Pairs `(i, f(i))` from non-silent input steps to reordered steps.
    pub f: Vec<(usize, usize)>,
    pub reordered: Run,
    /// Number of reordered steps covered by the extraction.
    pub settled: usize,
    pub base: ExtendedRun,
    /// Index in `reordered` of each configuration of `base`.
    pub g: Vec<usize>,
}

/// Compiled machines whose runs can be traced back.
#[derive(Clone, Copy)]
pub enum Compiled<'a> {
    WeakBroadcast(&'a CompiledWeakBroadcast),
    AbsenceDetection(&'a CompiledAbsenceDetection),
    Rendezvous(&'a CompiledRendezvous),
}

pub fn extract_base_run(m: Compiled<'_>, g: &LabelledGraph, run: &Run) -> Result<Extraction, VerifyError> {
    match m {
        Compiled::WeakBroadcast(c) => extract_weak_broadcast(c, g, run),
        Compiled::AbsenceDetection(c) => extract_absence_detection(c, g, run),
        Compiled::Rendezvous(c) => extract_rendezvous(c, g, run),
    }
}

fn ill(msg: String) -> VerifyError {
    VerifyError::NotWellFormed(msg)
}

fn project(c: &[State], base: impl Fn(&State) -> Option<&State>) -> Result<Configuration, VerifyError> {
    c.iter()
        .enumerate()
        .map(|(v, s)| base(s).cloned().ok_or_else(|| ill(format!("node {v} holds {s} outside phase 0"))))
        .collect()
}

/// Indices up to `upto` of configurations with every node in phase 0.
fn idle_points(run: &Run, upto: usize, phase: impl Fn(&State) -> Option<u8>) -> Vec<usize> {
    (0..=upto).filter(|&k| run.configurations[k].iter().all(|s| phase(s) == Some(0))).collect()
}

pub fn extract_weak_broadcast(
    m: &CompiledWeakBroadcast,
    g: &LabelledGraph,
    run: &Run,
) -> Result<Extraction, VerifyError> {
    let r = reorder_three_phase(m, g, run, &|s| m.phase(s))?;
    let pts = idle_points(&r.run, r.settled, |s| m.phase(s));
    let cs = &r.run.configurations;
    let mut configurations = vec![project(&cs[0], |s| m.base_state(s))?];
    let mut selections = Vec::new();
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let sel = if b == a + 1 {
            ExtendedSelection::Neighbourhood(r.run.selections[a].clone())
        } else {
            let mut signals: BTreeMap<usize, (u32, bool)> = BTreeMap::new();
            for k in a..b {
                let v = r.run.selections[k][0];
                if m.phase(&cs[k][v]) != Some(0) {
                    continue;
                }
                let Some(WbView::Signal(_, f)) = m.view(&cs[k + 1][v]) else {
                    return Err(ill(format!("step {k}: node {v} leaves phase 0 without a signal")));
                };
                let heard = g.neighbours(v).iter().any(|&w| m.phase(&cs[k][w]) == Some(1));
                signals.insert(v, (f, !heard));
            }
            if signals.len() != g.node_count() {
                return Err(ill(format!("round at {a} misses nodes")));
            }
            let nodes: Vec<usize> = signals.iter().filter(|e| e.1 .1).map(|e| *e.0).collect();
            let mut resolution = BTreeMap::new();
            for (&v, &(f, init)) in &signals {
                if init {
                    continue;
                }
                let u = nodes
                    .iter()
                    .copied()
                    .find(|u| signals[u].0 == f)
                    .ok_or_else(|| ill(format!("round at {a}: signal {f} at node {v} has no initiator")))?;
                resolution.insert(v, u);
            }
            ExtendedSelection::Broadcast { nodes, resolution }
        };
        let next = wb_successor(&m.source, g, configurations.last().unwrap(), &sel)?;
        let want = project(&cs[b], |s| m.base_state(s))?;
        if next != want {
            return Err(ill(format!("steps {a}..{b} do not replay as {sel:?}")));
        }
        configurations.push(next);
        selections.push(sel);
    }
    Ok(Extraction {
        f: r.f,
        settled: pts.last().copied().unwrap_or(0),
        reordered: r.run,
        base: ExtendedRun { configurations, selections },
        g: pts,
    })
}

pub fn extract_absence_detection(
    m: &CompiledAbsenceDetection,
    g: &LabelledGraph,
    run: &Run,
) -> Result<Extraction, VerifyError> {
    let r = reorder_three_phase(m, g, run, &|s| m.phase(s))?;
    let pts = idle_points(&r.run, r.settled, |s| m.phase(s));
    let cs = &r.run.configurations;
    let mut configurations = vec![project(&cs[0], |s| m.base_state(s))?];
    let mut selections = Vec::new();
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let before = configurations.last().unwrap().clone();
        let n = g.node_count();
        let mut sets: Vec<Option<BTreeSet<usize>>> = vec![None; n];
        let mut payload: Vec<Option<State>> = vec![None; n];
        let mut roots = Vec::new();
        for k in a..b {
            let v = r.run.selections[k][0];
            match (m.phase(&cs[k][v]), m.view(&cs[k + 1][v])) {
                (Some(0), Some(AdView::Tree(q, old, d))) => {
                    if old != &before[v] {
                        return Err(ill(format!("step {k}: node {v} stores {old}, held {}", before[v])));
                    }
                    if d == Dist::Root {
                        roots.push(v);
                    }
                    payload[v] = Some(q.clone());
                }
                (Some(1), Some(AdView::Report(_, seen))) => {
                    let mut set: BTreeSet<usize> = BTreeSet::from([v]);
                    for &u in g.neighbours(v) {
                        if m.phase(&cs[k][u]) == Some(2) {
                            set.extend(sets[u].iter().flatten());
                        }
                    }
                    let states: BTreeSet<State> =
                        set.iter().map(|&u| payload[u].clone().ok_or_else(|| ill(format!("node {u} reports before joining")))).collect::<Result<_, _>>()?;
                    if !states.iter().eq(seen.iter()) {
                        return Err(ill(format!("step {k}: node {v} reports {seen:?}, expected {states:?}")));
                    }
                    sets[v] = Some(set);
                }
                (Some(2), Some(AdView::Idle(_))) => {}
                _ => return Err(ill(format!("step {k}: unexpected move of node {v} inside a round"))),
            }
        }
        let families: BTreeMap<usize, Vec<usize>> = roots
            .iter()
            .map(|&v| sets[v].as_ref().map(|s| (v, s.iter().copied().collect())).ok_or_else(|| ill(format!("root {v} never reports"))))
            .collect::<Result<_, _>>()?;
        let next = ad_sync_step(&m.source, g, &before, &families)?;
        let want = project(&cs[b], |s| m.base_state(s))?;
        if next != want {
            return Err(ill(format!("round {a}..{b} does not replay with families {families:?}")));
        }
        configurations.push(next);
        selections.push(ExtendedSelection::Detection { families });
    }
    Ok(Extraction {
        f: r.f,
        settled: pts.last().copied().unwrap_or(0),
        reordered: r.run,
        base: ExtendedRun { configurations, selections },
        g: pts,
    })
}

/// Pairs each committing answer with the confirmation of its partner and
/// moves the confirmation right behind it.
pub fn extract_rendezvous(m: &CompiledRendezvous, g: &LabelledGraph, run: &Run) -> Result<Extraction, VerifyError> {
    if run.configurations.len() != run.selections.len() + 1 {
        return Err(VerifyError::LengthMismatch("configurations and selections".into()));
    }
    let ns = non_silent_steps(run);
    let mut node_of = Vec::with_capacity(ns.len());
    for &i in &ns {
        match run.selections[i][..] {
            [v] => node_of.push(v),
            _ => return Err(VerifyError::NotExclusive(i)),
        }
    }
    let cs = &run.configurations;
    let mut partner_of: BTreeMap<usize, usize> = BTreeMap::new();
    let mut moved: BTreeSet<usize> = BTreeSet::new();
    let mut unpaired: BTreeSet<usize> = BTreeSet::new();
    for (p, &i) in ns.iter().enumerate() {
        let v = node_of[p];
        let (Some(RvView::Answer(_)), Some(RvView::Wait(_))) = (m.view(&cs[i][v]), m.view(&cs[i + 1][v])) else {
            continue;
        };
        let busy: Vec<usize> = g.neighbours(v).iter().copied().filter(|&u| !m.is_waiting(&cs[i][u])).collect();
        let [u] = busy[..] else { continue };
        if !matches!(m.view(&cs[i][u]), Some(RvView::Confirm(..))) {
            continue;
        }
        let Some(q) = (p + 1..ns.len()).find(|&q| node_of[q] == u) else {
            unpaired.insert(p);
            continue;
        };
        let j = ns[q];
        if !matches!((m.view(&cs[j][u]), m.view(&cs[j + 1][u])), (Some(RvView::Confirm(..)), Some(RvView::Wait(_)))) {
            return Err(ill(format!("step {j}: node {u} leaves its confirmation without committing")));
        }
        partner_of.insert(p, q);
        moved.insert(q);
    }
    let mut order = Vec::with_capacity(ns.len());
    for p in 0..ns.len() {
        if moved.contains(&p) {
            continue;
        }
        order.push(p);
        if let Some(&q) = partner_of.get(&p) {
            order.push(q);
        }
    }
    let mut configurations = vec![cs[0].clone()];
    let mut selections = Vec::with_capacity(order.len());
    let mut f = Vec::with_capacity(order.len());
    for (k, &p) in order.iter().enumerate() {
        let (i, v) = (ns[p], node_of[p]);
        let next = successor(m, g, configurations.last().unwrap(), &[v]);
        if next[v] != cs[i + 1][v] {
            return Err(ill(format!("replay of step {i} diverges at node {v}")));
        }
        configurations.push(next);
        selections.push(vec![v]);
        f.push((i, k));
    }
    f.sort_unstable();
    let reordered = Run { configurations, selections };
    let carried = |c: &[State]| project(c, |s| m.base_state(s));
    let mut base_cs = vec![carried(&reordered.configurations[0])?];
    let mut base_sel = Vec::new();
    let mut gs = vec![0];
    let mut k = 0;
    while k < order.len() && !unpaired.contains(&order[k]) {
        if let Some(&q) = partner_of.get(&order[k]) {
            debug_assert_eq!(order[k + 1], q);
            let (v, u) = (node_of[order[k]], node_of[q]);
            let next = pp_step(&m.source, g, base_cs.last().unwrap(), (u, v))?;
            if next != carried(&reordered.configurations[k + 2])? {
                return Err(ill(format!("rendezvous of {u} and {v} at reordered step {k} is not a legal interaction")));
            }
            base_cs.push(next);
            base_sel.push(ExtendedSelection::Pair(u, v));
            gs.push(k + 2);
            k += 2;
        } else {
            if carried(&reordered.configurations[k + 1])? != *base_cs.last().unwrap() {
                return Err(ill(format!("reordered step {k} changes a base state outside a rendezvous")));
            }
            k += 1;
        }
    }
    Ok(Extraction {
        f,
        settled: gs.last().copied().unwrap_or(0),
        reordered,
        base: ExtendedRun { configurations: base_cs, selections: base_sel },
        g: gs,
    })
}
