//! Reorderings and extensions of runs.

use std::collections::BTreeMap;

use super::VerifyError;
use crate::graph::LabelledGraph;
use crate::machine::Machine;
use crate::semantics::{neighbourhood, successor, Configuration, Run};
use crate::state::State;

pub type PhaseFn<'a> = &'a dyn Fn(&State) -> Option<u8>;

fn check_lengths(run: &Run) -> Result<(), VerifyError> {
    if run.configurations.len() != run.selections.len() + 1 {
        return Err(VerifyError::LengthMismatch(format!(
            "{} configurations for {} selections",
            run.configurations.len(),
            run.selections.len()
        )));
    }
    Ok(())
}

/// Indices of the steps that change the configuration.
pub fn non_silent_steps(run: &Run) -> Vec<usize> {
    (0..run.steps()).filter(|&i| run.configurations[i] != run.configurations[i + 1]).collect()
}

/// The node selected at a non-silent step, which must be the only one.
fn selected(run: &Run, i: usize) -> Result<usize, VerifyError> {
    match run.selections[i][..] {
        [v] => Ok(v),
        _ => Err(VerifyError::NotExclusive(i)),
    }
}

fn is_legal(m: &dyn Machine, g: &LabelledGraph, run: &Run) -> bool {
    (0..run.steps()).all(|i| successor(m, g, &run.configurations[i], &run.selections[i]) == run.configurations[i + 1])
}

/// Whether `pi2` is the reordering of `pi` given by `f`, a list of pairs
/// `(i, f(i))` over the non-silent steps of both runs.
pub fn check_reordering(
    m: &dyn Machine,
    g: &LabelledGraph,
    pi: &Run,
    pi2: &Run,
    f: &[(usize, usize)],
) -> Result<bool, VerifyError> {
    check_lengths(pi)?;
    check_lengths(pi2)?;
    let ns = non_silent_steps(pi);
    let ns2 = non_silent_steps(pi2);
    if ns.len() != ns2.len() || f.len() != ns.len() {
        return Err(VerifyError::LengthMismatch(format!(
            "{} and {} non-silent steps, {} mapped",
            ns.len(),
            ns2.len(),
            f.len()
        )));
    }
    let map: BTreeMap<usize, usize> = f.iter().copied().collect();
    let mut image: Vec<usize> = f.iter().map(|p| p.1).collect();
    image.sort_unstable();
    if map.len() != f.len() || !map.keys().copied().eq(ns.iter().copied()) || image != ns2 {
        return Ok(false);
    }
    if pi.configurations[0] != pi2.configurations[0] || !is_legal(m, g, pi) || !is_legal(m, g, pi2) {
        return Ok(false);
    }
    let beta = m.beta();
    for (&i, &j) in &map {
        let v = selected(pi, i)?;
        if selected(pi2, j)? != v {
            return Ok(false);
        }
        let (a, b) = (&pi.configurations[i], &pi2.configurations[j]);
        if a[v] != b[v]
            || pi.configurations[i + 1][v] != pi2.configurations[j + 1][v]
            || neighbourhood(g, a, v, beta) != neighbourhood(g, b, v, beta)
        {
            return Ok(false);
        }
    }
    // Order: f(i) < f(j) for i < j whenever v_j is v_i or adjacent to it.
    let mut first = vec![usize::MAX; g.node_count()];
    for (&i, &j) in map.iter().rev() {
        let v = selected(pi, i)?;
        if std::iter::once(&v).chain(g.neighbours(v)).any(|&w| first[w] <= j) {
            return Ok(false);
        }
        first[v] = j;
    }
    Ok(true)
}

/// Phase counts `pc(v, t)` for every configuration of the run.
pub fn phase_counts(run: &Run, phase: PhaseFn<'_>) -> Result<Vec<Vec<u32>>, VerifyError> {
    check_lengths(run)?;
    let c0 = &run.configurations[0];
    if let Some(v) = (0..c0.len()).find(|&v| phase(&c0[v]) != Some(0)) {
        return Err(VerifyError::NotInitialPhase0(v));
    }
    let mut pc = vec![0u32; c0.len()];
    let mut out = vec![pc.clone()];
    for i in 0..run.steps() {
        let (a, b) = (&run.configurations[i], &run.configurations[i + 1]);
        for v in 0..a.len() {
            if a[v] == b[v] {
                continue;
            }
            match (phase(&a[v]), phase(&b[v])) {
                (Some(p), Some(q)) if p == q => {}
                (Some(p), Some(q)) if q == (p + 1) % 3 => pc[v] += 1,
                _ => return Err(VerifyError::NotThreePhase { step: i, node: v }),
            }
        }
        out.push(pc.clone());
    }
    Ok(out)
}

/// Output of [`reorder_three_phase`].
#[derive(Clone, Debug)]
pub struct ThreePhaseReordering {
    /// Pairs `(i, f(i))` from non-silent steps of the input to steps of
    /// `run`.
    pub f: Vec<(usize, usize)>,
    pub run: Run,
    /// Length of the prefix of `run` that no continuation of the input
    /// can change.
    pub settled: usize,
}

/// Sorts the non-silent steps by `(pc before, pc after, index)` and replays
/// them.
pub fn reorder_three_phase(
    m: &dyn Machine,
    g: &LabelledGraph,
    run: &Run,
    phase: PhaseFn<'_>,
) -> Result<ThreePhaseReordering, VerifyError> {
    let pc = phase_counts(run, phase)?;
    let ns = non_silent_steps(run);
    let mut keys = Vec::with_capacity(ns.len());
    for &i in &ns {
        let v = selected(run, i)?;
        keys.push((pc[i][v], pc[i + 1][v], i, v));
    }
    keys.sort_unstable();
    let floor = pc.last().and_then(|p| p.iter().copied().min()).unwrap_or(0);
    let settled = keys.iter().take_while(|k| k.0 < floor || (k.0 == floor && k.1 == floor)).count();
    let mut configurations = vec![run.configurations[0].clone()];
    let mut selections = Vec::with_capacity(keys.len());
    let mut f = Vec::with_capacity(keys.len());
    for (k, &(_, _, i, v)) in keys.iter().enumerate() {
        let cur = configurations.last().unwrap();
        let next = successor(m, g, cur, &[v]);
        if next[v] != run.configurations[i + 1][v] {
            return Err(VerifyError::NotWellFormed(format!("replay of step {i} diverges at node {v}")));
        }
        configurations.push(next);
        selections.push(vec![v]);
        f.push((i, k));
    }
    f.sort_unstable();
    Ok(ThreePhaseReordering { f, run: Run { configurations, selections }, settled })
}

/// Whether every configuration up to `upto` spans at most two consecutive
/// phases, and every two-phase configuration is followed by a step that
/// moves a node to its next phase.
pub fn phase_shape_holds(run: &Run, phase: PhaseFn<'_>, upto: usize) -> bool {
    let upto = upto.min(run.steps());
    (0..=upto).all(|k| {
        let c = &run.configurations[k];
        let mut present = [false; 3];
        for q in c {
            match phase(q) {
                Some(p) if p < 3 => present[p as usize] = true,
                _ => return false,
            }
        }
        match present.iter().filter(|&&x| x).count() {
            1 => true,
            2 => {
                let p = (0..3).find(|&p| present[p] && present[(p + 1) % 3]);
                if p.is_none() {
                    return false;
                }
                if k == upto {
                    return true;
                }
                let next = &run.configurations[k + 1];
                (0..c.len())
                    .filter(|&v| c[v] != next[v])
                    .all(|v| matches!((phase(&c[v]), phase(&next[v])), (Some(a), Some(b)) if b == (a + 1) % 3))
            }
            _ => false,
        }
    })
}

/// `C1 ∼_Q C2`: agreement on every node where both states embed into `Q`.
fn similar(c1: &[State], c2: &[State], embed: &dyn Fn(&State) -> Option<State>) -> bool {
    c1.iter().zip(c2).all(|(a, b)| match (embed(a), embed(b)) {
        (Some(x), Some(y)) => x == y,
        _ => true,
    })
}

fn extension(
    pi_prime: &[Configuration],
    pi: &[Configuration],
    g: &[usize],
    embed: &dyn Fn(&State) -> Option<State>,
    strict: bool,
) -> bool {
    if g.len() != pi.len() || g.windows(2).any(|w| w[0] >= w[1]) || g.last().is_some_and(|&x| x >= pi_prime.len()) {
        return false;
    }
    let matches = |i: usize| {
        let c = &pi_prime[g[i]];
        c.len() == pi[i].len()
            && if strict {
                c.iter().zip(&pi[i]).all(|(s, q)| embed(s).as_ref() == Some(q))
            } else {
                c.iter().zip(&pi[i]).all(|(s, q)| embed(s).is_none_or(|x| &x == q))
            }
    };
    if !(0..pi.len()).all(matches) {
        return false;
    }
    g.windows(2).all(|w| {
        (w[0]..=w[1]).all(|j| similar(&pi_prime[j], &pi_prime[w[0]], embed) || similar(&pi_prime[j], &pi_prime[w[1]], embed))
    })
}

/// Whether `pi_prime` extends `pi` via `g`. `embed` maps a state of
/// `pi_prime` to the state of `pi` it stands for, or `None` for
/// intermediate states.
pub fn check_extension(
    pi_prime: &[Configuration],
    pi: &[Configuration],
    g: &[usize],
    embed: &dyn Fn(&State) -> Option<State>,
) -> bool {
    extension(pi_prime, pi, g, embed, true)
}

/// As [`check_extension`], but `pi(i)` only has to agree with
/// `pi_prime(g(i))` on non-intermediate states.
pub fn check_weak_extension(
    pi_prime: &[Configuration],
    pi: &[Configuration],
    g: &[usize],
    embed: &dyn Fn(&State) -> Option<State>,
) -> bool {
    extension(pi_prime, pi, g, embed, false)
}
