//! Named run invariants.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::VerifyError;
use crate::compile::{CompiledAbsenceDetection, CompiledRendezvous, CompiledWeakBroadcast, Dist};
use crate::graph::LabelledGraph;
use crate::machine::Machine;
use crate::protocols::{CancelMachine, LeaderRole, MajorityDaf, NlPipeline};
use crate::semantics::Configuration;
use crate::state::State;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InvariantCheck {
    PhaseGap,
    SingleToken,
    LeadersNotAllBot,
    SumPreserved,
    DistanceNoCycle,
    HaltedMonotone,
}

impl InvariantCheck {
    pub const ALL: [InvariantCheck; 6] = [
        InvariantCheck::PhaseGap,
        InvariantCheck::SingleToken,
        InvariantCheck::LeadersNotAllBot,
        InvariantCheck::SumPreserved,
        InvariantCheck::DistanceNoCycle,
        InvariantCheck::HaltedMonotone,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InvariantCheck::PhaseGap => "phase_gap",
            InvariantCheck::SingleToken => "single_token",
            InvariantCheck::LeadersNotAllBot => "leaders_not_all_bot",
            InvariantCheck::SumPreserved => "sum_preserved",
            InvariantCheck::DistanceNoCycle => "distance_no_cycle",
            InvariantCheck::HaltedMonotone => "halted_monotone",
        }
    }

    pub fn parse(s: &str) -> Option<InvariantCheck> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

type Reader<T> = Arc<dyn Fn(&State) -> Option<T> + Send + Sync>;

/// What a family of machines exposes to the invariant checks. Every reader
/// returns `None` for states it does not understand.
#[derive(Clone, Default)]
pub struct Probe {
    pub phase: Option<Reader<u8>>,
    pub token: Option<Reader<bool>>,
    pub role: Option<Reader<LeaderRole>>,
    pub contribution: Option<Reader<i64>>,
    /// Distance label of a node in phase 1.
    pub distance: Option<Reader<Dist>>,
    /// Child label modulus parameter: the degree bound.
    pub degree_bound: usize,
    pub halted: Option<Reader<bool>>,
}

impl Probe {
    pub fn weak_broadcast(m: &CompiledWeakBroadcast) -> Probe {
        let m = m.clone();
        Probe { phase: Some(Arc::new(move |s| m.phase(s))), ..Probe::default() }
    }

    pub fn absence_detection(m: &CompiledAbsenceDetection) -> Probe {
        let (a, b) = (m.clone(), m.clone());
        Probe {
            phase: Some(Arc::new(move |s| a.phase(s))),
            distance: Some(Arc::new(move |s| b.distance(s))),
            degree_bound: m.k,
            ..Probe::default()
        }
    }

    /// Token holders of the compiled token protocol: base state `L` or
    /// `L'`, whatever the handshake status.
    pub fn rendezvous_token(m: &CompiledRendezvous) -> Probe {
        let m = m.clone();
        Probe {
            token: Some(Arc::new(move |s| m.base_state(s).map(|q| q.is_sym("L") || q.is_sym("L'")))),
            ..Probe::default()
        }
    }

    /// Token holders of the plain token protocol.
    pub fn token_protocol() -> Probe {
        Probe { token: Some(Arc::new(|s| s.as_sym().map(|x| x == "L" || x == "L'"))), ..Probe::default() }
    }

    pub fn cancel(m: &CancelMachine) -> Probe {
        let e = m.e;
        Probe { contribution: Some(Arc::new(move |s| s.as_int().filter(|x| x.abs() <= e))), ..Probe::default() }
    }

    pub fn majority(m: &MajorityDaf) -> Probe {
        let (a, b) = (m.clone(), m.l5.clone());
        Probe {
            role: Some(Arc::new(move |s| a.role(s))),
            phase: Some(Arc::new(move |s| b.phase(s))),
            ..Probe::default()
        }
    }

    pub fn pipeline(p: &NlPipeline) -> Probe {
        let (a, b) = (p.clone(), p.t5.clone());
        Probe {
            token: Some(Arc::new(move |s| a.token_state(s).map(|t| t.is_sym("L") || t.is_sym("L'")))),
            phase: Some(Arc::new(move |s| b.phase(s))),
            ..Probe::default()
        }
    }

    /// Halted nodes of a machine with halting acceptance.
    pub fn halting(m: Arc<dyn Machine>) -> Probe {
        Probe { halted: Some(Arc::new(move |s| Some(m.is_accepting(s) || m.is_rejecting(s)))), ..Probe::default() }
    }
}

/// Result of one check: the first configuration index violating it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckOutcome {
    pub check: InvariantCheck,
    pub first_violation: Option<usize>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.first_violation.is_none()
    }
}

fn need<'a, T>(r: &'a Option<Reader<T>>, check: InvariantCheck) -> Result<&'a Reader<T>, VerifyError> {
    r.as_ref().ok_or_else(|| VerifyError::InapplicableCheck(check.name().to_string()))
}

fn read<T>(r: &Reader<T>, s: &State, t: usize, v: usize) -> Result<T, VerifyError> {
    r(s).ok_or_else(|| VerifyError::InapplicableCheck(format!("configuration {t}, node {v}: unreadable state {s}")))
}

/// Runs `checks` over `configs`. Every configuration is checked, so runs
/// with several nodes per step are fine.
pub fn run_invariant_checks(
    g: &LabelledGraph,
    configs: &[Configuration],
    probe: &Probe,
    checks: &[InvariantCheck],
) -> Result<Vec<CheckOutcome>, VerifyError> {
    checks
        .iter()
        .map(|&check| {
            let first_violation = match check {
                InvariantCheck::PhaseGap => phase_gap(g, configs, need(&probe.phase, check)?)?,
                InvariantCheck::SingleToken => {
                    let r = need(&probe.token, check)?;
                    first_where(configs, |t, c| {
                        let mut n = 0;
                        for (v, s) in c.iter().enumerate() {
                            n += read(r, s, t, v)? as usize;
                        }
                        Ok(n > 1)
                    })?
                }
                InvariantCheck::LeadersNotAllBot => {
                    let r = need(&probe.role, check)?;
                    first_where(configs, |t, c| {
                        let mut roles = Vec::with_capacity(c.len());
                        for (v, s) in c.iter().enumerate() {
                            roles.push(read(r, s, t, v)?);
                        }
                        let has = |x: LeaderRole| roles.contains(&x);
                        Ok(has(LeaderRole::Bot) && !has(LeaderRole::Leader) && !has(LeaderRole::Rejected))
                    })?
                }
                InvariantCheck::SumPreserved => {
                    let r = need(&probe.contribution, check)?;
                    let mut start = None;
                    first_where(configs, |t, c| {
                        let mut sum = 0i64;
                        for (v, s) in c.iter().enumerate() {
                            sum += read(r, s, t, v)?;
                        }
                        Ok(*start.get_or_insert(sum) != sum)
                    })?
                }
                InvariantCheck::DistanceNoCycle => {
                    distance_cycle(g, configs, need(&probe.distance, check)?, probe.degree_bound)?
                }
                InvariantCheck::HaltedMonotone => {
                    let r = need(&probe.halted, check)?;
                    let mut found = None;
                    for t in 1..configs.len() {
                        let mut bad = false;
                        for v in 0..configs[t].len() {
                            if read(r, &configs[t - 1][v], t - 1, v)? && configs[t - 1][v] != configs[t][v] {
                                bad = true;
                            }
                        }
                        if bad {
                            found = Some(t);
                            break;
                        }
                    }
                    found
                }
            };
            Ok(CheckOutcome { check, first_violation })
        })
        .collect()
}

fn first_where(
    configs: &[Configuration],
    mut bad: impl FnMut(usize, &Configuration) -> Result<bool, VerifyError>,
) -> Result<Option<usize>, VerifyError> {
    for (t, c) in configs.iter().enumerate() {
        if bad(t, c)? {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

/// Adjacent nodes never differ by more than one in their phase counts.
fn phase_gap(g: &LabelledGraph, configs: &[Configuration], phase: &Reader<u8>) -> Result<Option<usize>, VerifyError> {
    let Some(c0) = configs.first() else { return Ok(None) };
    let mut pc = vec![0i64; c0.len()];
    let mut last: Vec<u8> = Vec::with_capacity(c0.len());
    for (v, s) in c0.iter().enumerate() {
        last.push(read(phase, s, 0, v)?);
    }
    for (t, c) in configs.iter().enumerate() {
        for (v, s) in c.iter().enumerate() {
            let p = read(phase, s, t, v)?;
            if p != last[v] {
                if p != (last[v] + 1) % 3 {
                    return Ok(Some(t));
                }
                pc[v] += 1;
                last[v] = p;
            }
        }
        if g.edges().iter().any(|&(u, v)| (pc[u] - pc[v]).abs() > 1) {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

/// No directed cycle among phase-1 nodes along edges from a label to its
/// child label.
fn distance_cycle(
    g: &LabelledGraph,
    configs: &[Configuration],
    distance: &Reader<Dist>,
    k: usize,
) -> Result<Option<usize>, VerifyError> {
    for (t, c) in configs.iter().enumerate() {
        let d: Vec<Option<Dist>> = c.iter().map(|s| distance(s)).collect();
        // Kahn's algorithm on the child relation.
        let mut indeg: BTreeMap<usize, usize> = BTreeMap::new();
        let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for v in g.nodes().filter(|&v| d[v].is_some()) {
            indeg.entry(v).or_insert(0);
            for &w in g.neighbours(v) {
                if let (Some(a), Some(b)) = (d[v], d[w]) {
                    if b == a.child(k) {
                        out.entry(v).or_default().push(w);
                        *indeg.entry(w).or_insert(0) += 1;
                    }
                }
            }
        }
        let mut queue: Vec<usize> = indeg.iter().filter(|e| *e.1 == 0).map(|e| *e.0).collect();
        let mut seen = 0;
        while let Some(v) = queue.pop() {
            seen += 1;
            for &w in out.get(&v).into_iter().flatten() {
                let e = indeg.get_mut(&w).unwrap();
                *e -= 1;
                if *e == 0 {
                    queue.push(w);
                }
            }
        }
        if seen != indeg.len() {
            return Ok(Some(t));
        }
    }
    Ok(None)
}
