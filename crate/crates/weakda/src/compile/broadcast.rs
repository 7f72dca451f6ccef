//! Weak broadcasts by a three-phase protocol.

use std::sync::Arc;

use super::last::{core_only, current, remembered, with_last_state, LastState};
use crate::error::MachineError;
use crate::extended::{ResponseId, WeakBroadcastMachine};
use crate::graph::LabelledGraph;
use crate::machine::Machine;
use crate::state::{Neighbourhood, State};

const P0: &str = "wb0";
const P1: &str = "wb1";
const P2: &str = "wb2";

/// Decoded compiled state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WbView<'a> {
    Idle(&'a State),
    Signal(&'a State, ResponseId),
    Done(&'a State, ResponseId),
}

pub fn wb_view(s: &State) -> Option<WbView<'_>> {
    let State::Tagged(tag, items) = s else { return None };
    let f = || items.get(1).and_then(State::as_int).map(|f| f as ResponseId);
    match *tag {
        P0 => items.first().map(WbView::Idle),
        P1 => Some(WbView::Signal(items.first()?, f()?)),
        P2 => Some(WbView::Done(items.first()?, f()?)),
        _ => None,
    }
}

pub fn wb_phase(s: &State) -> Option<u8> {
    wb_view(s).map(|v| match v {
        WbView::Idle(_) => 0,
        WbView::Signal(..) => 1,
        WbView::Done(..) => 2,
    })
}

pub fn wb_idle(q: State) -> State {
    State::tagged(P0, vec![q])
}

fn wb_signal(q: State, f: ResponseId) -> State {
    State::tagged(P1, vec![q, State::int(f as i64)])
}

fn wb_done(q: State, f: ResponseId) -> State {
    State::tagged(P2, vec![q, State::int(f as i64)])
}

/// Three-phase machine without the last-state wrapper.
#[derive(Clone)]
pub struct WbRaw {
    source: WeakBroadcastMachine,
}

impl Machine for WbRaw {
    fn beta(&self) -> u32 {
        self.source.base.beta().max(1)
    }
    fn alphabet(&self) -> Vec<String> {
        self.source.base.alphabet()
    }
    fn initial_state(&self, label: &str) -> Option<State> {
        self.source.base.initial_state(label).map(wb_idle)
    }
    fn delta(&self, s: &State, n: &Neighbourhood) -> State {
        let Some(view) = wb_view(s) else { return s.clone() };
        let phase_count = |p: u8| n.sum_where(|x| wb_phase(x) == Some(p));
        match view {
            WbView::Idle(q) => {
                if phase_count(2) > 0 {
                    return s.clone();
                }
                let signal = n.iter().find_map(|(x, _)| match wb_view(x) {
                    Some(WbView::Signal(_, f)) => Some(f),
                    _ => None,
                });
                if let Some(f) = signal {
                    return wb_signal(self.source.broadcasts.respond(f, q), f);
                }
                if let Some((to, f)) = self.source.broadcasts.broadcast(q) {
                    return wb_signal(to, f);
                }
                let inner = n.project(self.source.base.beta(), |x| match wb_view(x) {
                    Some(WbView::Idle(r)) => Some(r.clone()),
                    _ => None,
                });
                wb_idle(self.source.base.delta(q, &inner))
            }
            WbView::Signal(q, f) => {
                if phase_count(0) > 0 {
                    s.clone()
                } else {
                    wb_done(q.clone(), f)
                }
            }
            WbView::Done(q, _) => {
                if phase_count(1) > 0 {
                    s.clone()
                } else {
                    wb_idle(q.clone())
                }
            }
        }
    }
    fn is_accepting(&self, s: &State) -> bool {
        wb_payload(s).is_some_and(|q| self.source.base.is_accepting(q))
    }
    fn is_rejecting(&self, s: &State) -> bool {
        wb_payload(s).is_some_and(|q| self.source.base.is_rejecting(q))
    }
    fn states(&self) -> Option<Vec<State>> {
        let base = self.source.base.states()?;
        let ids = self.source.broadcasts.response_ids();
        let mut out: Vec<State> = base.iter().cloned().map(wb_idle).collect();
        for q in &base {
            for &f in &ids {
                out.push(wb_signal(q.clone(), f));
                out.push(wb_done(q.clone(), f));
            }
        }
        Some(out)
    }
    fn check_graph(&self, g: &LabelledGraph) -> Result<(), MachineError> {
        self.source.base.check_graph(g)
    }
}

/// Base-state payload of a compiled state in any phase.
pub fn wb_payload(s: &State) -> Option<&State> {
    wb_view(s).map(|v| match v {
        WbView::Idle(q) | WbView::Signal(q, _) | WbView::Done(q, _) => q,
    })
}

/// Compiled weak-broadcast machine with last-state acceptance.
#[derive(Clone)]
pub struct CompiledWeakBroadcast {
    pub source: WeakBroadcastMachine,
    pub raw: Arc<WbRaw>,
    wrapped: LastState,
}

pub fn compile_weak_broadcast(wb: &WeakBroadcastMachine) -> Result<CompiledWeakBroadcast, MachineError> {
    let raw = Arc::new(WbRaw { source: wb.clone() });
    let wrapped = with_last_state(raw.clone(), core_only(|q: &State| wb_phase(q) == Some(0)))?;
    Ok(CompiledWeakBroadcast { source: wb.clone(), raw, wrapped })
}

impl CompiledWeakBroadcast {
    /// Compiled form of base state `q`.
    pub fn lift(&self, q: State) -> State {
        self.wrapped.lift(wb_idle(q))
    }

    pub fn phase(&self, s: &State) -> Option<u8> {
        wb_phase(current(s))
    }

    /// Base state of a phase-0 compiled state.
    pub fn base_state<'a>(&self, s: &'a State) -> Option<&'a State> {
        match wb_view(current(s))? {
            WbView::Idle(q) => Some(q),
            _ => None,
        }
    }

    /// Base state of the last phase-0 state visited.
    pub fn remembered_base<'a>(&self, s: &'a State) -> Option<&'a State> {
        wb_payload(remembered(s))
    }

    pub fn view<'a>(&self, s: &'a State) -> Option<WbView<'a>> {
        wb_view(current(s))
    }
}

impl Machine for CompiledWeakBroadcast {
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
