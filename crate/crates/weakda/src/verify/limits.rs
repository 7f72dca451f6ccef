//! Executable forms of the covering, cutoff and splicing arguments.

use rustc_hash::FxHashMap;

use crate::abstraction::{clique_sync_step, cut, initial_abstract, AbstractIds, Counts, Shape};
use crate::engine::{Consensus, Engine, StateId};
use crate::error::MachineError;
use crate::graph::{splice_cyclic, CoveringMap, LabelCount, LabelledGraph};
use crate::machine::MachineRef;
use crate::protocols::NlPipeline;
use crate::semantics::{Outcome, Run};
use crate::state::cutoff_multiset;

use super::VerifyError;

/// Synchronous runs on the cover and on its target agree through the map
/// for `t` steps.
pub fn check_covering_lockstep(m: MachineRef, cover: &CoveringMap, t: usize) -> bool {
    let mut e = Engine::new(m);
    let (Ok(mut ch), Ok(mut cg)) = (e.initial(&cover.source), e.initial(&cover.target)) else {
        return false;
    };
    for step in 0..=t {
        if cover.map.iter().enumerate().any(|(v, &fv)| ch[v] != cg[fv]) {
            return false;
        }
        if step < t {
            ch = e.sync_step(&cover.source, &ch);
            cg = e.sync_step(&cover.target, &cg);
        }
    }
    true
}

fn clique_outcome(e: &mut Engine, start: Counts, max_steps: usize) -> Outcome {
    let mut seen: FxHashMap<Counts, usize> = FxHashMap::default();
    let mut trace = vec![start];
    loop {
        let cur = trace.last().unwrap();
        if let Some(&i) = seen.get(cur) {
            let cycle = &trace[i..trace.len() - 1];
            let all = |want: Consensus| {
                cycle.iter().all(|c| {
                    let ids: Vec<StateId> = c.iter().map(|x| x.0).collect();
                    e.consensus(&ids) == want
                })
            };
            return if all(Consensus::Accepting) {
                Outcome::Accept
            } else if all(Consensus::Rejecting) {
                Outcome::Reject
            } else {
                Outcome::NoConsensus
            };
        }
        if trace.len() > max_steps {
            return Outcome::BudgetExceeded;
        }
        seen.insert(cur.clone(), trace.len() - 1);
        let next = clique_sync_step(e, cur);
        trace.push(next);
    }
}

/// Synchronous clique runs for `labels` and for its cutoff at `β + 1` have
/// equal state counts up to `β + 1` for `t` steps and the same lasso
/// verdict.
pub fn check_cutoff_indistinguishable(m: MachineRef, labels: &LabelCount, t: usize) -> bool {
    let k = m.beta() + 1;
    let small = cutoff_multiset(labels, k as usize);
    let mut e = Engine::new(m);
    let (Ok(AbstractIds::Clique(mut a)), Ok(AbstractIds::Clique(mut b))) = (
        initial_abstract(&mut e, Shape::Clique, labels, None),
        initial_abstract(&mut e, Shape::Clique, &small, None),
    ) else {
        return false;
    };
    let (a0, b0) = (a.clone(), b.clone());
    for step in 0..=t {
        if cut(&a, k) != cut(&b, k) {
            return false;
        }
        if step < t {
            a = clique_sync_step(&mut e, &a);
            b = clique_sync_step(&mut e, &b);
        }
    }
    let budget = 100_000;
    clique_outcome(&mut e, a0, budget) == clique_outcome(&mut e, b0, budget)
}

/// Spliced graph on which a halting machine both accepts and rejects.
#[derive(Clone, Debug)]
pub struct SpliceWitness {
    pub graph: LabelledGraph,
    /// Halting times on the accepted and the rejected cycle.
    pub accept_time: usize,
    pub reject_time: usize,
    /// First step with both halted-accepting and halted-rejecting nodes.
    pub step: usize,
}

fn halting_time(e: &mut Engine, g: &LabelledGraph, max_steps: usize) -> Result<(usize, Consensus), MachineError> {
    let mut c = e.initial(g)?;
    for t in 0..=max_steps {
        if c.iter().all(|&q| e.accepting(q)) {
            return Ok((t, Consensus::Accepting));
        }
        if c.iter().all(|&q| e.rejecting(q)) {
            return Ok((t, Consensus::Rejecting));
        }
        c = e.sync_step(g, &c);
    }
    Err(MachineError::BudgetExceeded(max_steps))
}

/// Splices a cycle `g` accepted by halting with a cycle `h` rejected by
/// halting, with copy counts given by the halting times, and runs the
/// result synchronously until halted-accepting and halted-rejecting nodes
/// coexist.
pub fn halting_splice_witness(
    m: MachineRef,
    g: &LabelledGraph,
    e_g: (usize, usize),
    h: &LabelledGraph,
    e_h: (usize, usize),
    max_steps: usize,
) -> Result<Option<SpliceWitness>, MachineError> {
    if !m.is_halting() {
        return Err(MachineError::InvalidMachine("machine is not halting".into()));
    }
    let mut e = Engine::new(m);
    let (tg, cg) = halting_time(&mut e, g, max_steps)?;
    let (th, ch) = halting_time(&mut e, h, max_steps)?;
    if cg != Consensus::Accepting || ch != Consensus::Rejecting {
        return Err(MachineError::InvalidMachine("first cycle must be accepted and second rejected".into()));
    }
    let graph = splice_cyclic(g, e_g, h, e_h, tg, th)?;
    let mut c = e.initial(&graph)?;
    for step in 0..=max_steps {
        if c.iter().any(|&q| e.accepting(q)) && c.iter().any(|&q| e.rejecting(q)) {
            return Ok(Some(SpliceWitness { graph, accept_time: tg, reject_time: th, step }));
        }
        c = e.sync_step(&graph, &c);
    }
    Ok(None)
}

/// Token counts of a pipeline run: the initial count followed by the
/// number of restarting nodes in each outer round.
pub fn reset_initiator_counts(p: &NlPipeline, g: &LabelledGraph, run: &Run) -> Result<Vec<usize>, VerifyError> {
    let phase = |s| p.t5.phase(s);
    let c0 = &run.configurations[0];
    let mut counts = vec![c0.iter().filter(|s| p.holds_token(s)).count()];
    let mut pc = vec![0usize; g.node_count()];
    for i in 0..run.steps() {
        let (a, b) = (&run.configurations[i], &run.configurations[i + 1]);
        for v in g.nodes() {
            if a[v] == b[v] {
                continue;
            }
            let (Some(x), Some(y)) = (phase(&a[v]), phase(&b[v])) else {
                return Err(VerifyError::NotWellFormed(format!("step {i}: node {v} outside the outer layer")));
            };
            if x == y {
                continue;
            }
            if y != (x + 1) % 3 {
                return Err(VerifyError::NotThreePhase { step: i, node: v });
            }
            if x == 0 && g.neighbours(v).iter().all(|&w| phase(&a[w]) != Some(1)) {
                let round = pc[v] / 3 + 1;
                if counts.len() <= round {
                    counts.resize(round + 1, 0);
                }
                counts[round] += 1;
            }
            pc[v] += 1;
        }
    }
    Ok(counts)
}
