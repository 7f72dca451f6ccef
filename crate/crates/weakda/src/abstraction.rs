//! Clique and star configurations up to isomorphism.
//!
//! On a clique a configuration is determined by its state counts; on a star
//! by the centre state and the leaf state counts. Successor computations on
//! these abstractions are exact for exclusive selection.

use std::collections::{BTreeMap, BTreeSet};
use rustc_hash::FxHashMap;

use crate::engine::{Engine, StateId};
use crate::error::MachineError;
use crate::explore::TransitionSystem;
use crate::extended::{ResponseId, WeakBroadcastMachine};
use crate::graph::LabelCount;
use crate::machine::MachineRef;
use crate::semantics::{verdict_of_system, Configuration, Verdict};
use crate::state::State;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    Clique,
    Star,
}

/// Id-level multiset: sorted by id, positive counts.
pub type Counts = Vec<(StateId, u32)>;

/// Abstract configuration over interned states.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AbstractIds {
    Clique(Counts),
    Star { centre: StateId, leaves: Counts },
}

/// Abstract configuration over states.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AbstractConfig {
    Clique(BTreeMap<State, usize>),
    Star { centre: State, leaves: BTreeMap<State, usize> },
}

fn add(c: &mut Counts, q: StateId, n: u32) {
    if n == 0 {
        return;
    }
    match c.binary_search_by_key(&q, |e| e.0) {
        Ok(i) => c[i].1 += n,
        Err(i) => c.insert(i, (q, n)),
    }
}

fn remove(c: &mut Counts, q: StateId, n: u32) {
    if n == 0 {
        return;
    }
    let i = c.binary_search_by_key(&q, |e| e.0).expect("state present");
    c[i].1 -= n;
    if c[i].1 == 0 {
        c.remove(i);
    }
}

pub fn cut(c: &Counts, beta: u32) -> Counts {
    c.iter().map(|&(q, n)| (q, n.min(beta))).collect()
}

/// Abstraction of a concrete configuration.
pub fn abstract_of(shape: Shape, c: &[State]) -> AbstractConfig {
    let mut m = BTreeMap::new();
    let from = if shape == Shape::Star { 1 } else { 0 };
    for q in &c[from..] {
        *m.entry(q.clone()).or_insert(0) += 1;
    }
    match shape {
        Shape::Clique => AbstractConfig::Clique(m),
        Shape::Star => AbstractConfig::Star { centre: c[0].clone(), leaves: m },
    }
}

impl AbstractIds {
    pub fn encode(engine: &mut Engine, a: &AbstractConfig) -> AbstractIds {
        let mut enc = |m: &BTreeMap<State, usize>| {
            let mut c = Counts::new();
            for (q, &n) in m {
                let id = engine.intern(q);
                add(&mut c, id, n as u32);
            }
            c
        };
        match a {
            AbstractConfig::Clique(m) => AbstractIds::Clique(enc(m)),
            AbstractConfig::Star { centre, leaves } => {
                let leaves = enc(leaves);
                AbstractIds::Star { centre: engine.intern(centre), leaves }
            }
        }
    }

    pub fn decode(&self, engine: &Engine) -> AbstractConfig {
        let dec = |c: &Counts| c.iter().map(|&(q, n)| (engine.state(q).clone(), n as usize)).collect();
        match self {
            AbstractIds::Clique(c) => AbstractConfig::Clique(dec(c)),
            AbstractIds::Star { centre, leaves } => {
                AbstractConfig::Star { centre: engine.state(*centre).clone(), leaves: dec(leaves) }
            }
        }
    }

    /// A concrete representative; the star centre is node 0.
    pub fn concrete(&self, engine: &Engine) -> Configuration {
        let mut out = Vec::new();
        let leaves = match self {
            AbstractIds::Clique(c) => c,
            AbstractIds::Star { centre, leaves } => {
                out.push(engine.state(*centre).clone());
                leaves
            }
        };
        for &(q, n) in leaves {
            out.extend(std::iter::repeat(engine.state(q).clone()).take(n as usize));
        }
        out
    }

    fn all(&self, mut p: impl FnMut(StateId) -> bool) -> bool {
        match self {
            AbstractIds::Clique(c) => c.iter().all(|e| p(e.0)),
            AbstractIds::Star { centre, leaves } => p(*centre) && leaves.iter().all(|e| p(e.0)),
        }
    }
}

/// Initial abstract configuration for a label count. For stars the centre
/// carries `centre_label`, which is removed from the count.
pub fn initial_abstract(
    engine: &mut Engine,
    shape: Shape,
    labels: &LabelCount,
    centre_label: Option<&str>,
) -> Result<AbstractIds, MachineError> {
    let m = engine.machine().clone();
    let init = |l: &str| m.initial_state(l).ok_or_else(|| MachineError::UnknownLabel(l.to_string()));
    let mut counts = labels.clone();
    let mut centre = None;
    if shape == Shape::Star {
        let l = centre_label
            .map(str::to_string)
            .or_else(|| counts.iter().find(|e| *e.1 > 0).map(|e| e.0.clone()))
            .ok_or(MachineError::Graph(crate::graph::GraphError::TooFewNodes(0)))?;
        match counts.get_mut(&l) {
            Some(n) if *n > 0 => *n -= 1,
            _ => return Err(MachineError::UnknownLabel(l)),
        }
        centre = Some(engine.intern(&init(&l)?));
    }
    let mut c = Counts::new();
    for (l, &n) in &counts {
        if n > 0 {
            let q = init(l)?;
            add(&mut c, engine.intern(&q), n as u32);
        }
    }
    let total: usize = labels.values().sum();
    if total < 3 {
        return Err(MachineError::Graph(crate::graph::GraphError::TooFewNodes(total)));
    }
    Ok(match centre {
        None => AbstractIds::Clique(c),
        Some(centre) => AbstractIds::Star { centre, leaves: c },
    })
}

/// All exclusive neighbourhood successors, excluding silent ones. States
/// rejected by `frozen` do not take neighbourhood steps.
fn plain_successors(engine: &mut Engine, a: &AbstractIds, frozen: &dyn Fn(StateId) -> bool, out: &mut Vec<AbstractIds>) {
    let beta = engine.machine().beta();
    match a {
        AbstractIds::Clique(c) => {
            for &(q, _) in c {
                if frozen(q) {
                    continue;
                }
                let mut others = c.clone();
                remove(&mut others, q, 1);
                let q2 = engine.delta_counts(q, &cut(&others, beta));
                if q2 != q {
                    let mut next = others;
                    add(&mut next, q2, 1);
                    out.push(AbstractIds::Clique(next));
                }
            }
        }
        AbstractIds::Star { centre, leaves } => {
            if !frozen(*centre) {
                let q2 = engine.delta_counts(*centre, &cut(leaves, beta));
                if q2 != *centre {
                    out.push(AbstractIds::Star { centre: q2, leaves: leaves.clone() });
                }
            }
            for &(q, _) in leaves {
                if frozen(q) {
                    continue;
                }
                let q2 = engine.delta_counts(q, &[(*centre, 1)]);
                if q2 != q {
                    let mut next = leaves.clone();
                    remove(&mut next, q, 1);
                    add(&mut next, q2, 1);
                    out.push(AbstractIds::Star { centre: *centre, leaves: next });
                }
            }
        }
    }
}

/// Synchronous step on a clique abstraction.
pub fn clique_sync_step(engine: &mut Engine, c: &Counts) -> Counts {
    let beta = engine.machine().beta();
    let mut next = Counts::new();
    for &(q, n) in c {
        let mut others = c.clone();
        remove(&mut others, q, 1);
        let q2 = engine.delta_counts(q, &cut(&others, beta));
        add(&mut next, q2, n);
    }
    next
}

/// Exclusive abstract successors of a plain machine.
pub fn abstract_successor(m: MachineRef, a: &AbstractConfig) -> BTreeSet<AbstractConfig> {
    let mut e = Engine::new(m);
    let ids = AbstractIds::encode(&mut e, a);
    let mut out = Vec::new();
    plain_successors(&mut e, &ids, &|_| false, &mut out);
    out.iter().map(|x| x.decode(&e)).collect()
}

/// Abstract transition system of a plain machine under exclusive selection.
pub struct AbstractPlain {
    pub engine: Engine,
    start: AbstractIds,
}

impl AbstractPlain {
    pub fn new(m: MachineRef, shape: Shape, labels: &LabelCount, centre_label: Option<&str>) -> Result<Self, MachineError> {
        let mut engine = Engine::new(m);
        let start = initial_abstract(&mut engine, shape, labels, centre_label)?;
        Ok(AbstractPlain { engine, start })
    }
}

impl TransitionSystem for AbstractPlain {
    type Config = AbstractIds;
    fn initial(&mut self) -> AbstractIds {
        self.start.clone()
    }
    fn successors(&mut self, c: &AbstractIds, out: &mut Vec<AbstractIds>) {
        plain_successors(&mut self.engine, c, &|_| false, out);
    }
    fn accepting(&mut self, c: &AbstractIds) -> bool {
        let e = &self.engine;
        c.all(|q| e.accepting(q))
    }
    fn rejecting(&mut self, c: &AbstractIds) -> bool {
        let e = &self.engine;
        c.all(|q| e.rejecting(q))
    }
}

/// Abstract transition system of a weak-broadcast machine: exclusive
/// neighbourhood steps plus every weak broadcast with every resolution.
pub struct AbstractWeakBroadcast {
    pub engine: Engine,
    wb: WeakBroadcastMachine,
    start: AbstractIds,
    bcast: FxHashMap<StateId, Option<(StateId, ResponseId)>>,
    resp: FxHashMap<(ResponseId, StateId), StateId>,
}

impl AbstractWeakBroadcast {
    pub fn new(wb: WeakBroadcastMachine, shape: Shape, labels: &LabelCount, centre_label: Option<&str>) -> Result<Self, MachineError> {
        let mut engine = Engine::new(wb.base.clone());
        let start = initial_abstract(&mut engine, shape, labels, centre_label)?;
        Ok(AbstractWeakBroadcast { engine, wb, start, bcast: FxHashMap::default(), resp: FxHashMap::default() })
    }

    fn broadcast(&mut self, q: StateId) -> Option<(StateId, ResponseId)> {
        if let Some(b) = self.bcast.get(&q) {
            return *b;
        }
        let b = self.wb.broadcasts.broadcast(self.engine.state(q)).map(|(t, f)| {
            let t = t.clone();
            (self.engine.intern(&t), f)
        });
        self.bcast.insert(q, b);
        b
    }

    fn respond(&mut self, f: ResponseId, q: StateId) -> StateId {
        if let Some(&r) = self.resp.get(&(f, q)) {
            return r;
        }
        let r = self.wb.broadcasts.respond(f, self.engine.state(q));
        let r = self.engine.intern(&r);
        self.resp.insert((f, q), r);
        r
    }

    fn respond_all(&mut self, f: ResponseId, c: &Counts) -> Counts {
        let mut out = Counts::new();
        for &(q, n) in c {
            let r = self.respond(f, q);
            add(&mut out, r, n);
        }
        out
    }

    fn broadcast_successors(&mut self, a: &AbstractIds, out: &mut Vec<AbstractIds>) {
        match a {
            AbstractIds::Clique(c) => {
                for &(q, _) in c {
                    if let Some((t, f)) = self.broadcast(q) {
                        let mut others = c.clone();
                        remove(&mut others, q, 1);
                        let mut next = self.respond_all(f, &others);
                        add(&mut next, t, 1);
                        out.push(AbstractIds::Clique(next));
                    }
                }
            }
            AbstractIds::Star { centre, leaves } => {
                if let Some((t, f)) = self.broadcast(*centre) {
                    out.push(AbstractIds::Star { centre: t, leaves: self.respond_all(f, leaves) });
                }
                let inits: Vec<(StateId, u32, StateId, ResponseId)> = leaves
                    .iter()
                    .filter_map(|&(q, n)| self.broadcast(q).map(|(t, f)| (q, n, t, f)))
                    .collect();
                if inits.is_empty() {
                    return;
                }
                // Every choice of how many leaves in each initiating state fire.
                let mut chosen = vec![0u32; inits.len()];
                loop {
                    let mut i = 0;
                    while i < chosen.len() && chosen[i] == inits[i].1 {
                        chosen[i] = 0;
                        i += 1;
                    }
                    if i == chosen.len() {
                        break;
                    }
                    chosen[i] += 1;
                    self.leaf_broadcast(*centre, leaves, &inits, &chosen, out);
                }
            }
        }
    }

    fn leaf_broadcast(
        &mut self,
        centre: StateId,
        leaves: &Counts,
        inits: &[(StateId, u32, StateId, ResponseId)],
        chosen: &[u32],
        out: &mut Vec<AbstractIds>,
    ) {
        let mut fired = Counts::new();
        let mut rest = leaves.clone();
        let mut fs: Vec<ResponseId> = Vec::new();
        for (k, &(q, _, t, f)) in inits.iter().enumerate() {
            if chosen[k] > 0 {
                remove(&mut rest, q, chosen[k]);
                add(&mut fired, t, chosen[k]);
                if !fs.contains(&f) {
                    fs.push(f);
                }
            }
        }
        // Each remaining leaf picks one of the emitted signals.
        let mut parts: Vec<Vec<Counts>> = Vec::new();
        for &(q, n) in &rest {
            let mut options = Vec::new();
            for split in compositions(n, fs.len()) {
                let mut c = Counts::new();
                for (j, &m) in split.iter().enumerate() {
                    let r = self.respond(fs[j], q);
                    add(&mut c, r, m);
                }
                options.push(c);
            }
            parts.push(options);
        }
        let centres: Vec<StateId> = fs.iter().map(|&f| self.respond(f, centre)).collect();
        let mut idx = vec![0usize; parts.len()];
        loop {
            let mut next = fired.clone();
            for (p, &i) in parts.iter().zip(&idx) {
                for &(q, n) in &p[i] {
                    add(&mut next, q, n);
                }
            }
            for &c in &centres {
                out.push(AbstractIds::Star { centre: c, leaves: next.clone() });
            }
            let mut k = 0;
            while k < idx.len() && idx[k] + 1 == parts[k].len() {
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                break;
            }
            idx[k] += 1;
        }
    }
}

/// Ways to write `n` as an ordered sum of `k` non-negative parts.
fn compositions(n: u32, k: usize) -> Vec<Vec<u32>> {
    if k == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for first in 0..=n {
        for mut rest in compositions(n - first, k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

impl TransitionSystem for AbstractWeakBroadcast {
    type Config = AbstractIds;
    fn initial(&mut self) -> AbstractIds {
        self.start.clone()
    }
    fn successors(&mut self, c: &AbstractIds, out: &mut Vec<AbstractIds>) {
        let start = out.len();
        let wb = self.wb.clone();
        let frozen = |q: StateId| wb.broadcasts.broadcast(self.engine.state(q)).is_some();
        let frozen_set: Vec<StateId> = match c {
            AbstractIds::Clique(x) => x.iter().map(|e| e.0).filter(|&q| frozen(q)).collect(),
            AbstractIds::Star { centre, leaves } => {
                std::iter::once(*centre).chain(leaves.iter().map(|e| e.0)).filter(|&q| frozen(q)).collect()
            }
        };
        plain_successors(&mut self.engine, c, &|q| frozen_set.contains(&q), out);
        self.broadcast_successors(c, out);
        let mut i = start;
        while i < out.len() {
            if &out[i] == c {
                out.swap_remove(i);
            } else {
                i += 1;
            }
        }
    }
    fn accepting(&mut self, c: &AbstractIds) -> bool {
        let e = &self.engine;
        c.all(|q| e.accepting(q))
    }
    fn rejecting(&mut self, c: &AbstractIds) -> bool {
        let e = &self.engine;
        c.all(|q| e.rejecting(q))
    }
}

/// Pseudo-stochastic verdict on a clique or star given by its label count.
pub fn verdict_abstract(
    m: MachineRef,
    shape: Shape,
    labels: &LabelCount,
    centre_label: Option<&str>,
    budget: usize,
) -> Result<Verdict, MachineError> {
    let mut ts = AbstractPlain::new(m, shape, labels, centre_label)?;
    verdict_of_system(&mut ts, budget, |ts, c| c.concrete(&ts.engine))
}

/// Pseudo-stochastic verdict of a weak-broadcast machine on a clique or star.
pub fn verdict_abstract_wb(
    wb: &WeakBroadcastMachine,
    shape: Shape,
    labels: &LabelCount,
    centre_label: Option<&str>,
    budget: usize,
) -> Result<Verdict, MachineError> {
    let mut ts = AbstractWeakBroadcast::new(wb.clone(), shape, labels, centre_label)?;
    verdict_of_system(&mut ts, budget, |ts, c| c.concrete(&ts.engine))
}

/// Reachable abstract configurations of a weak-broadcast machine.
pub fn reachable_abstract_wb(
    wb: &WeakBroadcastMachine,
    shape: Shape,
    labels: &LabelCount,
    centre_label: Option<&str>,
    budget: usize,
) -> Result<Vec<AbstractConfig>, MachineError> {
    let mut ts = AbstractWeakBroadcast::new(wb.clone(), shape, labels, centre_label)?;
    let space = crate::explore::explore(&mut ts, budget)?;
    Ok(space.configs.iter().map(|c| c.decode(&ts.engine)).collect())
}
