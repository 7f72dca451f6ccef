//! Simulation of a strong broadcast protocol by a single circulating token
//! with restarts.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::compile::{
    compile_rendezvous, compile_weak_broadcast, current, product_parts, product_with, remembered, rv_view, wb_payload,
    CompiledRendezvous, CompiledWeakBroadcast,
};
use crate::error::MachineError;
use crate::extended::{add_broadcasts, BroadcastRules, PopulationProtocol, ResponseId, StrongBroadcastProtocol, WeakBroadcastMachine};
use crate::machine::{Customized, MachineRef};
use crate::state::State;

const ZERO: &str = "0";
const TOKEN: &str = "L";
const SPENT: &str = "L'";
const BOT: &str = "bot";

/// Tokens move, collide into ⊥, and are spent by broadcasting.
pub fn token_protocol() -> PopulationProtocol {
    let (z, l, spent, bot) = (State::sym(ZERO), State::sym(TOKEN), State::sym(SPENT), State::sym(BOT));
    PopulationProtocol::new(
        vec![z.clone(), l.clone(), spent.clone(), bot.clone()],
        BTreeMap::new(),
        BTreeSet::new(),
        BTreeSet::new(),
        vec![
            ((l.clone(), l.clone()), (z.clone(), bot)),
            ((z.clone(), l.clone()), (l.clone(), z.clone())),
            ((l.clone(), z.clone()), (spent, z)),
        ],
    )
    .expect("token protocol is well formed")
}

/// A spent token performs the protocol broadcast of its node.
struct Step {
    t1: Arc<CompiledRendezvous>,
    p: StrongBroadcastProtocol,
}

impl BroadcastRules for Step {
    fn broadcast(&self, q: &State) -> Option<(State, ResponseId)> {
        let (t, r) = product_parts(q)?;
        if !self.t1.is_waiting(t) || self.t1.base_state(t)? != &State::sym(SPENT) || remembered(t) != current(t) {
            return None;
        }
        let (to, f) = match self.p.broadcasts.broadcast(r) {
            Some((to, f)) => (to, f + 1),
            None => (r.clone(), 0),
        };
        Some((State::pair(self.t1.lift(State::sym(TOKEN)), to), f))
    }

    fn respond(&self, f: ResponseId, q: &State) -> State {
        match (f, product_parts(q)) {
            (0, _) | (_, None) => q.clone(),
            (f, Some((t, r))) => State::pair(t.clone(), self.p.broadcasts.respond(f - 1, r)),
        }
    }

    fn response_ids(&self) -> Vec<ResponseId> {
        (0..=self.p.broadcasts.entries().len() as ResponseId).collect()
    }
}

/// A node holding ⊥ restarts the computation with a token of its own.
struct Reset {
    t1: Arc<CompiledRendezvous>,
    t3: Arc<CompiledWeakBroadcast>,
}

impl Reset {
    fn restart(&self, token: &str, q0: &State) -> State {
        State::pair(self.t3.lift(State::pair(self.t1.lift(State::sym(token)), q0.clone())), q0.clone())
    }
}

impl BroadcastRules for Reset {
    fn broadcast(&self, q: &State) -> Option<(State, ResponseId)> {
        let (s3, q0) = product_parts(q)?;
        let (t, _) = product_parts(self.t3.base_state(s3)?)?;
        (self.t1.remembered_base(t)? == &State::sym(BOT)).then(|| (self.restart(TOKEN, q0), 0))
    }

    fn respond(&self, _f: ResponseId, q: &State) -> State {
        match product_parts(q) {
            Some((_, r0)) => self.restart(ZERO, r0),
            None => q.clone(),
        }
    }

    fn response_ids(&self) -> Vec<ResponseId> {
        vec![0]
    }
}

/// The pipeline with every stage exposed.
#[derive(Clone)]
pub struct NlPipeline {
    pub protocol: StrongBroadcastProtocol,
    pub t1: Arc<CompiledRendezvous>,
    pub t2: WeakBroadcastMachine,
    pub t3: Arc<CompiledWeakBroadcast>,
    pub t4: WeakBroadcastMachine,
    pub t5: Arc<CompiledWeakBroadcast>,
    pub full: MachineRef,
}

/// Protocol state remembered through every wrapper.
fn remembered_protocol_state(s: &State) -> Option<&State> {
    let (s3, _) = product_parts(wb_payload(remembered(s))?)?;
    let (_, p) = product_parts(wb_payload(remembered(s3))?)?;
    Some(p)
}

pub fn nl_pipeline(p: &StrongBroadcastProtocol) -> Result<NlPipeline, MachineError> {
    let t1 = Arc::new(compile_rendezvous(&token_protocol())?);
    let t2 = add_broadcasts(
        Arc::new(product_with(t1.clone(), p.states.clone())),
        Arc::new(Step { t1: t1.clone(), p: p.clone() }),
    );
    let t3 = Arc::new(compile_weak_broadcast(&t2)?);
    let t4 = add_broadcasts(
        Arc::new(product_with(t3.clone(), p.states.clone())),
        Arc::new(Reset { t1: t1.clone(), t3: t3.clone() }),
    );
    let t5 = Arc::new(compile_weak_broadcast(&t4)?);
    let init = {
        let (p, t1, t3, t5) = (p.clone(), t1.clone(), t3.clone(), t5.clone());
        move |label: &str| {
            let q = p.initial_state(label)?;
            Some(t5.lift(State::pair(t3.lift(State::pair(t1.lift(State::sym(TOKEN)), q.clone())), q)))
        }
    };
    let alphabet = p.init.keys().cloned().collect();
    let (acc, rej) = (p.accept.clone(), p.reject.clone());
    let full = Customized::new(t5.clone()).with_init(alphabet, init).with_acceptance(
        move |s| remembered_protocol_state(s).is_some_and(|q| acc.contains(q)),
        move |s| remembered_protocol_state(s).is_some_and(|q| rej.contains(q)),
    );
    Ok(NlPipeline { protocol: p.clone(), t1, t2, t3, t4, t5, full: Arc::new(full) })
}

impl NlPipeline {
    /// Token-protocol state currently simulated by a full-machine state.
    pub fn token_state<'a>(&self, s: &'a State) -> Option<&'a State> {
        let (s3, _) = product_parts(wb_payload(current(s))?)?;
        let (t, _) = product_parts(wb_payload(current(s3))?)?;
        rv_view(current(t)).map(|v| v.base())
    }

    /// Whether the node currently simulates a token holder.
    pub fn holds_token(&self, s: &State) -> bool {
        self.token_state(s).is_some_and(|t| t.is_sym(TOKEN) || t.is_sym(SPENT))
    }

    pub fn protocol_state<'a>(&self, s: &'a State) -> Option<&'a State> {
        remembered_protocol_state(s)
    }

    /// Whether `s` is a phase-0 state of the outer layer whose payload
    /// initiates a restart.
    pub fn is_reset_initiator(&self, s: &State) -> bool {
        self.t5.base_state(s).is_some_and(|q| self.t4.is_initiator(q))
    }
}
