//! Interned, memoizing executor for machines.
//!
//! Compiled protocols have large structured state spaces, but a single run
//! touches few distinct `(state, neighbourhood)` pairs. The engine interns
//! states as dense ids and caches δ on id-level neighbourhood keys, so the
//! structured `delta` is evaluated once per distinct input.

use rustc_hash::FxHashMap;

use crate::error::MachineError;
use crate::graph::LabelledGraph;
use crate::machine::MachineRef;
use crate::state::{Neighbourhood, State};

pub type StateId = u32;

const ACCEPT: u8 = 1;
const REJECT: u8 = 2;

/// Consensus status of a configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Consensus {
    Accepting,
    Rejecting,
    Mixed,
}

pub struct Engine {
    machine: MachineRef,
    beta: u32,
    ids: FxHashMap<State, StateId>,
    states: Vec<State>,
    flags: Vec<u8>,
    memo: FxHashMap<Box<[u32]>, StateId>,
    key: Vec<u32>,
    scratch: Vec<u32>,
    counts: Vec<(StateId, u32)>,
}

impl Engine {
    pub fn new(machine: MachineRef) -> Self {
        let beta = machine.beta();
        Engine {
            machine,
            beta,
            ids: FxHashMap::default(),
            states: Vec::new(),
            flags: Vec::new(),
            memo: FxHashMap::default(),
            key: Vec::new(),
            scratch: Vec::new(),
            counts: Vec::new(),
        }
    }

    pub fn machine(&self) -> &MachineRef {
        &self.machine
    }

    pub fn intern(&mut self, q: &State) -> StateId {
        if let Some(&id) = self.ids.get(q) {
            return id;
        }
        let id = self.states.len() as StateId;
        let mut f = 0;
        if self.machine.is_accepting(q) {
            f |= ACCEPT;
        }
        if self.machine.is_rejecting(q) {
            f |= REJECT;
        }
        self.ids.insert(q.clone(), id);
        self.states.push(q.clone());
        self.flags.push(f);
        id
    }

    pub fn state(&self, id: StateId) -> &State {
        &self.states[id as usize]
    }

    pub fn interned(&self) -> usize {
        self.states.len()
    }

    pub fn accepting(&self, id: StateId) -> bool {
        self.flags[id as usize] & ACCEPT != 0
    }

    pub fn rejecting(&self, id: StateId) -> bool {
        self.flags[id as usize] & REJECT != 0
    }

    pub fn consensus(&self, c: &[StateId]) -> Consensus {
        if c.iter().all(|&q| self.accepting(q)) {
            Consensus::Accepting
        } else if c.iter().all(|&q| self.rejecting(q)) {
            Consensus::Rejecting
        } else {
            Consensus::Mixed
        }
    }

    pub fn encode(&mut self, c: &[State]) -> Vec<StateId> {
        c.iter().map(|q| self.intern(q)).collect()
    }

    pub fn decode(&self, c: &[StateId]) -> Vec<State> {
        c.iter().map(|&q| self.states[q as usize].clone()).collect()
    }

    pub fn initial(&mut self, g: &LabelledGraph) -> Result<Vec<StateId>, MachineError> {
        self.machine.check_graph(g)?;
        let mut c = Vec::with_capacity(g.node_count());
        for v in g.nodes() {
            let q = self
                .machine
                .initial_state(g.label(v))
                .ok_or_else(|| MachineError::UnknownLabel(g.label(v).to_string()))?;
            c.push(self.intern(&q));
        }
        Ok(c)
    }

    /// δ on id-level counts. `counts` must be sorted by id and already cut
    /// off at β.
    pub fn delta_counts(&mut self, q: StateId, counts: &[(StateId, u32)]) -> StateId {
        self.key.clear();
        self.key.push(q);
        for &(s, c) in counts {
            self.key.push(s);
            self.key.push(c);
        }
        if let Some(&r) = self.memo.get(self.key.as_slice()) {
            return r;
        }
        let n = Neighbourhood::from_counts(counts.iter().map(|&(s, c)| (self.states[s as usize].clone(), c)), self.beta);
        let out = self.machine.delta(&self.states[q as usize], &n);
        let r = self.intern(&out);
        self.memo.insert(self.key.clone().into_boxed_slice(), r);
        r
    }

    /// New state of `v` when selected in `c`.
    pub fn delta_at(&mut self, g: &LabelledGraph, c: &[StateId], v: usize) -> StateId {
        self.scratch.clear();
        self.scratch.extend(g.neighbours(v).iter().map(|&w| c[w]));
        self.scratch.sort_unstable();
        let mut counts = std::mem::take(&mut self.counts);
        counts.clear();
        for &s in &self.scratch {
            match counts.last_mut() {
                Some((last, n)) if *last == s => *n = (*n + 1).min(self.beta),
                _ => counts.push((s, 1)),
            }
        }
        let r = self.delta_counts(c[v], &counts);
        self.counts = counts;
        r
    }

    /// Successor of `c` for selection `sel`, written into `out`.
    pub fn step_into(&mut self, g: &LabelledGraph, c: &[StateId], sel: &[usize], out: &mut Vec<StateId>) {
        out.clear();
        out.extend_from_slice(c);
        for &v in sel {
            out[v] = self.delta_at(g, c, v);
        }
    }

    pub fn step(&mut self, g: &LabelledGraph, c: &[StateId], sel: &[usize]) -> Vec<StateId> {
        let mut out = Vec::with_capacity(c.len());
        self.step_into(g, c, sel, &mut out);
        out
    }

    pub fn sync_step(&mut self, g: &LabelledGraph, c: &[StateId]) -> Vec<StateId> {
        (0..c.len()).map(|v| self.delta_at(g, c, v)).collect()
    }
}
