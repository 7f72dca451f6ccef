//! Weak absence detection on bounded-degree graphs by a three-phase
//! protocol with distance labels.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::last::{current, remembered, with_last_state, LastState};
use crate::error::MachineError;
use crate::extended::AbsenceDetectionMachine;
use crate::graph::LabelledGraph;
use crate::machine::Machine;
use crate::state::{Neighbourhood, State};

const P0: &str = "ad0";
const P1: &str = "ad1";
const P2: &str = "ad2";
const ROOT: &str = "root";

/// Distance label: an element of `Z_{2k+1}` or the root label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dist {
    Root,
    Z(u32),
}

impl Dist {
    /// Child label modulo `2k+1`; the root's child is 1.
    pub fn child(self, k: usize) -> Dist {
        let m = 2 * k as u32 + 1;
        match self {
            Dist::Root => Dist::Z(1 % m),
            Dist::Z(d) => Dist::Z((d + 1) % m),
        }
    }

    fn to_state(self) -> State {
        match self {
            Dist::Root => State::sym(ROOT),
            Dist::Z(d) => State::int(d as i64),
        }
    }

    fn of_state(s: &State) -> Option<Dist> {
        if s.is_sym(ROOT) {
            return Some(Dist::Root);
        }
        s.as_int().map(|d| Dist::Z(d as u32))
    }
}

/// Decoded compiled state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AdView<'a> {
    Idle(&'a State),
    /// New state, phase-0 state before the round, distance label.
    Tree(&'a State, &'a State, Dist),
    /// New state and the set of states seen below.
    Report(&'a State, &'a [State]),
}

pub fn ad_view(s: &State) -> Option<AdView<'_>> {
    let State::Tagged(tag, items) = s else { return None };
    match (*tag, &items[..]) {
        (P0, [q]) => Some(AdView::Idle(q)),
        (P1, [q, r, d]) => Some(AdView::Tree(q, r, Dist::of_state(d)?)),
        (P2, [q, set]) => Some(AdView::Report(q, set.as_set()?)),
        _ => None,
    }
}

pub fn ad_phase(s: &State) -> Option<u8> {
    ad_view(s).map(|v| match v {
        AdView::Idle(_) => 0,
        AdView::Tree(..) => 1,
        AdView::Report(..) => 2,
    })
}

pub fn ad_idle(q: State) -> State {
    State::tagged(P0, vec![q])
}

fn ad_tree(q: State, r: State, d: Dist) -> State {
    State::tagged(P1, vec![q, r, d.to_state()])
}

fn ad_report(q: State, set: Vec<State>) -> State {
    State::tagged(P2, vec![q, State::set(set)])
}

/// A label `d'+1` with `d' ∈ labels` and `d'+2 ∉ labels`. Candidates are
/// scanned in the order `0..2k` then root.
pub fn child_label(labels: &BTreeSet<Dist>, k: usize) -> Option<Dist> {
    let m = 2 * k as u32 + 1;
    (0..m)
        .map(Dist::Z)
        .chain(std::iter::once(Dist::Root))
        .filter(|d| labels.contains(d))
        .find(|d| !labels.contains(&d.child(k).child(k)))
        .map(|d| d.child(k))
}

/// Three-phase machine without the last-state wrapper.
#[derive(Clone)]
pub struct AdRaw {
    source: AbsenceDetectionMachine,
    k: usize,
}

impl AdRaw {
    /// Neighbour states before the round: phase-0 states and the stored old
    /// states of phase-1 neighbours.
    fn old(&self, n: &Neighbourhood) -> Neighbourhood {
        n.project(self.source.base.beta(), |x| match ad_view(x) {
            Some(AdView::Idle(q)) => Some(q.clone()),
            Some(AdView::Tree(_, r, _)) => Some(r.clone()),
            _ => None,
        })
    }
}

impl Machine for AdRaw {
    fn beta(&self) -> u32 {
        self.source.base.beta().max(1)
    }
    fn alphabet(&self) -> Vec<String> {
        self.source.base.alphabet()
    }
    fn initial_state(&self, label: &str) -> Option<State> {
        self.source.base.initial_state(label).map(ad_idle)
    }
    fn delta(&self, s: &State, n: &Neighbourhood) -> State {
        let Some(view) = ad_view(s) else { return s.clone() };
        let phase_count = |p: u8| n.sum_where(|x| ad_phase(x) == Some(p));
        match view {
            AdView::Idle(q) => {
                if phase_count(2) > 0 {
                    return s.clone();
                }
                let next = self.source.base.delta(q, &self.old(n));
                if self.source.detections.is_initiator(&next) {
                    return ad_tree(next, q.clone(), Dist::Root);
                }
                if phase_count(1) == 0 {
                    return s.clone();
                }
                let labels: BTreeSet<Dist> = n
                    .states()
                    .filter_map(|x| match ad_view(x) {
                        Some(AdView::Tree(_, _, d)) => Some(d),
                        _ => None,
                    })
                    .collect();
                match child_label(&labels, self.k) {
                    Some(d) => ad_tree(next, q.clone(), d),
                    None => s.clone(),
                }
            }
            AdView::Tree(q, _, d) => {
                if phase_count(0) > 0 {
                    return s.clone();
                }
                let child = d.child(self.k);
                let waiting = n.any(|x| matches!(ad_view(x), Some(AdView::Tree(_, _, e)) if e == child));
                if waiting {
                    return s.clone();
                }
                let mut seen: BTreeSet<State> = BTreeSet::new();
                for x in n.states() {
                    if let Some(AdView::Report(_, set)) = ad_view(x) {
                        seen.extend(set.iter().cloned());
                    }
                }
                seen.insert(q.clone());
                ad_report(q.clone(), seen.into_iter().collect())
            }
            AdView::Report(q, set) => {
                if phase_count(1) > 0 {
                    return s.clone();
                }
                if self.source.detections.is_initiator(q) {
                    ad_idle(self.source.detections.detect(q, set))
                } else {
                    ad_idle(q.clone())
                }
            }
        }
    }
    fn is_accepting(&self, s: &State) -> bool {
        ad_payload(s).is_some_and(|q| self.source.base.is_accepting(q))
    }
    fn is_rejecting(&self, s: &State) -> bool {
        ad_payload(s).is_some_and(|q| self.source.base.is_rejecting(q))
    }
    fn check_graph(&self, g: &LabelledGraph) -> Result<(), MachineError> {
        for v in g.nodes() {
            if g.degree(v) > self.k {
                return Err(MachineError::DegreeBoundExceeded { node: v, degree: g.degree(v), bound: self.k });
            }
        }
        self.source.base.check_graph(g)
    }
}

/// Current base-state payload in any phase.
pub fn ad_payload(s: &State) -> Option<&State> {
    ad_view(s).map(|v| match v {
        AdView::Idle(q) | AdView::Tree(q, _, _) | AdView::Report(q, _) => q,
    })
}

/// Compiled absence-detection machine for graphs of maximum degree `k`.
#[derive(Clone)]
pub struct CompiledAbsenceDetection {
    pub source: AbsenceDetectionMachine,
    pub k: usize,
    pub raw: Arc<AdRaw>,
    wrapped: LastState,
}

pub fn compile_absence_detection(ad: &AbsenceDetectionMachine, k: usize) -> Result<CompiledAbsenceDetection, MachineError> {
    if k == 0 {
        return Err(MachineError::InvalidMachine("degree bound must be positive".into()));
    }
    let raw = Arc::new(AdRaw { source: ad.clone(), k });
    // A reporting node has finished its neighbourhood step, and the
    // detection may already have seen the new state, so it commits to it.
    let commit = |q: &State| match ad_view(q)? {
        AdView::Idle(_) => Some(q.clone()),
        AdView::Report(p, _) => Some(ad_idle(p.clone())),
        AdView::Tree(..) => None,
    };
    let wrapped = with_last_state(raw.clone(), Arc::new(commit))?;
    Ok(CompiledAbsenceDetection { source: ad.clone(), k, raw, wrapped })
}

impl CompiledAbsenceDetection {
    pub fn lift(&self, q: State) -> State {
        self.wrapped.lift(ad_idle(q))
    }

    pub fn phase(&self, s: &State) -> Option<u8> {
        ad_phase(current(s))
    }

    pub fn base_state<'a>(&self, s: &'a State) -> Option<&'a State> {
        match ad_view(current(s))? {
            AdView::Idle(q) => Some(q),
            _ => None,
        }
    }

    pub fn remembered_base<'a>(&self, s: &'a State) -> Option<&'a State> {
        ad_payload(remembered(s))
    }

    pub fn view<'a>(&self, s: &'a State) -> Option<AdView<'a>> {
        ad_view(current(s))
    }

    pub fn distance(&self, s: &State) -> Option<Dist> {
        match self.view(s)? {
            AdView::Tree(_, _, d) => Some(d),
            _ => None,
        }
    }
}

impl Machine for CompiledAbsenceDetection {
    fn beta(&self) -> u32 {
        self.wrapped.beta()
    }
    fn alphabet(&self) -> Vec<String> {
        self.wrapped.alphabet()
    }
    fn initial_state(&self, label: &str) -> Option<State> {
        self.wrapped.initial_state(label)
    }
    fn delta(&self, q: &State, n: &Neighbourhood) -> State {
        self.wrapped.delta(q, n)
    }
    fn is_accepting(&self, q: &State) -> bool {
        self.wrapped.is_accepting(q)
    }
    fn is_rejecting(&self, q: &State) -> bool {
        self.wrapped.is_rejecting(q)
    }
    fn check_graph(&self, g: &LabelledGraph) -> Result<(), MachineError> {
        self.wrapped.check_graph(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ds: &[Dist]) -> BTreeSet<Dist> {
        ds.iter().copied().collect()
    }

    #[test]
    fn child_labels() {
        assert_eq!(child_label(&set(&[Dist::Z(0), Dist::Z(2), Dist::Z(4)]), 2), Some(Dist::Z(0)));
        assert_eq!(child_label(&set(&[Dist::Root]), 2), Some(Dist::Z(1)));
        assert_eq!(child_label(&set(&[Dist::Z(4)]), 2), Some(Dist::Z(0)));
        assert_eq!(child_label(&set(&[]), 2), None);
        for k in 1..4usize {
            let m = 2 * k as u32 + 1;
            for mask in 1u32..(1 << (m + 1)) {
                let labels: BTreeSet<Dist> = (0..=m)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| if i == m { Dist::Root } else { Dist::Z(i) })
                    .collect();
                if labels.len() > k {
                    continue;
                }
                let d = child_label(&labels, k).unwrap();
                assert!(!labels.contains(&d.child(k)));
                assert!(labels.iter().any(|e| e.child(k) == d));
            }
        }
    }
}
