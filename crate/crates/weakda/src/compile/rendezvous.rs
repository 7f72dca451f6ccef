//! Rendezvous transitions by a search/answer/confirm handshake.

use std::sync::Arc;

use super::last::{core_only, current, remembered, with_last_state, LastState};
use crate::error::MachineError;
use crate::extended::PopulationProtocol;
use crate::graph::LabelledGraph;
use crate::machine::Machine;
use crate::state::{Neighbourhood, State};

const WAIT: &str = "wait";
const SEARCH: &str = "search";
const ANSWER: &str = "answer";
const CONFIRM: &str = "confirm";

/// Decoded compiled state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RvView<'a> {
    Wait(&'a State),
    Search(&'a State),
    Answer(&'a State),
    /// Base state and the state after the pending rendezvous.
    Confirm(&'a State, &'a State),
}

impl<'a> RvView<'a> {
    /// The base state the node currently holds.
    pub fn base(&self) -> &'a State {
        match *self {
            RvView::Wait(q) | RvView::Search(q) | RvView::Answer(q) | RvView::Confirm(q, _) => q,
        }
    }
}

pub fn rv_view(s: &State) -> Option<RvView<'_>> {
    let State::Tagged(tag, items) = s else { return None };
    match (*tag, &items[..]) {
        (WAIT, [q]) => Some(RvView::Wait(q)),
        (SEARCH, [q]) => Some(RvView::Search(q)),
        (ANSWER, [q]) => Some(RvView::Answer(q)),
        (CONFIRM, [q, r]) => Some(RvView::Confirm(q, r)),
        _ => None,
    }
}

pub fn rv_wait(q: State) -> State {
    State::tagged(WAIT, vec![q])
}

fn is_waiting(s: &State) -> bool {
    matches!(rv_view(s), Some(RvView::Wait(_)))
}

/// The unique non-waiting neighbour.
enum Partner<'a> {
    AllWaiting,
    One(RvView<'a>),
    Ambiguous,
}

fn partner(n: &Neighbourhood) -> Partner<'_> {
    let mut others = n.iter().filter(|(x, _)| !is_waiting(x));
    match (others.next(), others.next()) {
        (None, _) => Partner::AllWaiting,
        (Some((x, 1)), None) => rv_view(x).map_or(Partner::Ambiguous, Partner::One),
        _ => Partner::Ambiguous,
    }
}

/// Handshake machine without the last-state wrapper.
#[derive(Clone)]
pub struct RvRaw {
    source: Arc<PopulationProtocol>,
}

impl Machine for RvRaw {
    fn beta(&self) -> u32 {
        2
    }
    fn alphabet(&self) -> Vec<String> {
        self.source.init.keys().cloned().collect()
    }
    fn initial_state(&self, label: &str) -> Option<State> {
        self.source.initial_state(label).map(rv_wait)
    }
    fn delta(&self, s: &State, n: &Neighbourhood) -> State {
        let Some(view) = rv_view(s) else { return s.clone() };
        let p = partner(n);
        let reset = rv_wait(view.base().clone());
        match (view, p) {
            (RvView::Wait(q), Partner::AllWaiting) => State::tagged(SEARCH, vec![q.clone()]),
            (RvView::Wait(q), Partner::One(RvView::Search(_))) => State::tagged(ANSWER, vec![q.clone()]),
            (RvView::Search(q), Partner::One(RvView::Answer(r))) => {
                let (mine, _) = self.source.interact(q, r);
                State::tagged(CONFIRM, vec![q.clone(), mine])
            }
            (RvView::Answer(q), Partner::One(RvView::Confirm(r, _))) => {
                let (_, mine) = self.source.interact(r, q);
                rv_wait(mine)
            }
            (RvView::Confirm(_, next), Partner::AllWaiting) => rv_wait(next.clone()),
            _ => reset,
        }
    }
    fn is_accepting(&self, s: &State) -> bool {
        rv_view(s).is_some_and(|v| self.source.accept.contains(v.base()))
    }
    fn is_rejecting(&self, s: &State) -> bool {
        rv_view(s).is_some_and(|v| self.source.reject.contains(v.base()))
    }
    fn states(&self) -> Option<Vec<State>> {
        let q = &self.source.states;
        let mut out = Vec::new();
        for a in q {
            out.push(rv_wait(a.clone()));
            out.push(State::tagged(SEARCH, vec![a.clone()]));
            out.push(State::tagged(ANSWER, vec![a.clone()]));
            for b in q {
                out.push(State::tagged(CONFIRM, vec![a.clone(), b.clone()]));
            }
        }
        Some(out)
    }
}

/// Compiled population protocol with last-state acceptance.
#[derive(Clone)]
pub struct CompiledRendezvous {
    pub source: Arc<PopulationProtocol>,
    pub raw: Arc<RvRaw>,
    wrapped: LastState,
}

pub fn compile_rendezvous(p: &PopulationProtocol) -> Result<CompiledRendezvous, MachineError> {
    let source = Arc::new(p.clone());
    let raw = Arc::new(RvRaw { source: source.clone() });
    let wrapped = with_last_state(raw.clone(), core_only(is_waiting))?;
    Ok(CompiledRendezvous { source, raw, wrapped })
}

impl CompiledRendezvous {
    pub fn lift(&self, q: State) -> State {
        self.wrapped.lift(rv_wait(q))
    }

    pub fn view<'a>(&self, s: &'a State) -> Option<RvView<'a>> {
        rv_view(current(s))
    }

    /// Base state held by the node, whatever its status.
    pub fn base_state<'a>(&self, s: &'a State) -> Option<&'a State> {
        self.view(s).map(|v| v.base())
    }

    pub fn remembered_base<'a>(&self, s: &'a State) -> Option<&'a State> {
        rv_view(remembered(s)).map(|v| v.base())
    }

    pub fn is_waiting(&self, s: &State) -> bool {
        is_waiting(current(s))
    }
}

impl Machine for CompiledRendezvous {
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
    fn states(&self) -> Option<Vec<State>> {
        self.wrapped.states()
    }
    fn check_graph(&self, g: &LabelledGraph) -> Result<(), MachineError> {
        self.wrapped.check_graph(g)
    }
}
