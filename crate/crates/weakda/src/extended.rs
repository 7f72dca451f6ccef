//! Reference semantics of the extended models.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::MachineError;
use crate::graph::LabelledGraph;
use crate::machine::{MachineRef, WILDCARD};
use crate::semantics::{initial_configuration, neighbourhood, Configuration};
use crate::state::State;

/// Identifier of a response function.
pub type ResponseId = u32;

/// Broadcast transitions `q ↦ q', f` for the initiating states.
pub trait BroadcastRules: Send + Sync {
    /// The non-silent broadcast of `q`, if `q` initiates one.
    fn broadcast(&self, q: &State) -> Option<(State, ResponseId)>;
    fn respond(&self, f: ResponseId, q: &State) -> State;
    /// All response ids that `broadcast` can return.
    fn response_ids(&self) -> Vec<ResponseId>;
}

/// Table of broadcasts; unspecified responses are the identity and silent
/// entries are dropped.
#[derive(Clone, Debug, Default)]
pub struct TableBroadcasts {
    entries: Vec<(State, State, BTreeMap<State, State>)>,
    index: HashMap<State, usize>,
}

impl TableBroadcasts {
    pub fn new(entries: Vec<(State, State, BTreeMap<State, State>)>) -> Result<Self, MachineError> {
        let mut kept = Vec::new();
        let mut index = HashMap::new();
        for (from, to, mut resp) in entries {
            resp.retain(|a, b| a != b);
            if from == to && resp.is_empty() {
                continue;
            }
            if index.insert(from.clone(), kept.len()).is_some() {
                return Err(MachineError::InvalidMachine(format!("two broadcasts from {from}")));
            }
            kept.push((from, to, resp));
        }
        Ok(TableBroadcasts { entries: kept, index })
    }

    pub fn entries(&self) -> &[(State, State, BTreeMap<State, State>)] {
        &self.entries
    }
}

impl BroadcastRules for TableBroadcasts {
    fn broadcast(&self, q: &State) -> Option<(State, ResponseId)> {
        self.index.get(q).map(|&i| (self.entries[i].1.clone(), i as ResponseId))
    }

    fn respond(&self, f: ResponseId, q: &State) -> State {
        self.entries[f as usize].2.get(q).cloned().unwrap_or_else(|| q.clone())
    }

    fn response_ids(&self) -> Vec<ResponseId> {
        (0..self.entries.len() as ResponseId).collect()
    }
}

/// A machine with weak broadcasts.
#[derive(Clone)]
pub struct WeakBroadcastMachine {
    pub base: MachineRef,
    pub broadcasts: Arc<dyn BroadcastRules>,
}

impl WeakBroadcastMachine {
    pub fn is_initiator(&self, q: &State) -> bool {
        self.broadcasts.broadcast(q).is_some()
    }
}

/// `+B`: attaches broadcasts to a machine. Silence is inferred by the rule
/// set.
pub fn add_broadcasts(m: MachineRef, b: Arc<dyn BroadcastRules>) -> WeakBroadcastMachine {
    WeakBroadcastMachine { base: m, broadcasts: b }
}

/// Absence-detection transitions for the initiating states.
pub trait DetectionRules: Send + Sync {
    fn is_initiator(&self, q: &State) -> bool;
    /// New state of initiator `q` observing the sorted support `support`.
    fn detect(&self, q: &State, support: &[State]) -> State;
}

/// Table of detections; missing `(q, s)` entries are silent.
#[derive(Clone, Debug, Default)]
pub struct TableDetections {
    initiators: BTreeSet<State>,
    table: HashMap<(State, Vec<State>), State>,
}

impl TableDetections {
    pub fn new(entries: Vec<(State, Vec<State>, State)>) -> Self {
        let mut initiators = BTreeSet::new();
        let mut table = HashMap::new();
        for (from, mut support, to) in entries {
            support.sort();
            support.dedup();
            initiators.insert(from.clone());
            table.insert((from, support), to);
        }
        TableDetections { initiators, table }
    }

    pub fn entries(&self) -> Vec<(State, Vec<State>, State)> {
        let mut v: Vec<_> = self.table.iter().map(|((f, s), t)| (f.clone(), s.clone(), t.clone())).collect();
        v.sort();
        v
    }
}

impl DetectionRules for TableDetections {
    fn is_initiator(&self, q: &State) -> bool {
        self.initiators.contains(q)
    }

    fn detect(&self, q: &State, support: &[State]) -> State {
        self.table.get(&(q.clone(), support.to_vec())).cloned().unwrap_or_else(|| q.clone())
    }
}

#[derive(Clone)]
pub struct AbsenceDetectionMachine {
    pub base: MachineRef,
    pub detections: Arc<dyn DetectionRules>,
}

/// Graph population protocol given by a rendezvous table; missing pairs
/// are the identity.
#[derive(Clone, Debug)]
pub struct PopulationProtocol {
    pub states: Vec<State>,
    pub init: BTreeMap<String, State>,
    pub accept: BTreeSet<State>,
    pub reject: BTreeSet<State>,
    table: HashMap<(State, State), (State, State)>,
}

impl PopulationProtocol {
    pub fn new(
        states: Vec<State>,
        init: BTreeMap<String, State>,
        accept: BTreeSet<State>,
        reject: BTreeSet<State>,
        rendezvous: Vec<((State, State), (State, State))>,
    ) -> Result<Self, MachineError> {
        let known: BTreeSet<&State> = states.iter().collect();
        let all = rendezvous.iter().flat_map(|((a, b), (c, d))| [a, b, c, d]);
        for q in all.chain(init.values()).chain(accept.iter()).chain(reject.iter()) {
            if !known.contains(q) {
                return Err(MachineError::InvalidMachine(format!("unknown state {q}")));
            }
        }
        Ok(PopulationProtocol { states, init, accept, reject, table: rendezvous.into_iter().collect() })
    }

    pub fn interact(&self, p: &State, q: &State) -> (State, State) {
        self.table.get(&(p.clone(), q.clone())).cloned().unwrap_or_else(|| (p.clone(), q.clone()))
    }

    pub fn rendezvous(&self) -> Vec<((State, State), (State, State))> {
        let mut v: Vec<_> = self.table.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        v.sort();
        v
    }

    pub fn initial_state(&self, label: &str) -> Option<State> {
        self.init.get(label).or_else(|| self.init.get(WILDCARD)).cloned()
    }
}

/// Strong broadcast protocol: exactly one node broadcasts per step.
#[derive(Clone, Debug)]
pub struct StrongBroadcastProtocol {
    pub states: Vec<State>,
    pub init: BTreeMap<String, State>,
    pub accept: BTreeSet<State>,
    pub reject: BTreeSet<State>,
    pub broadcasts: TableBroadcasts,
}

impl StrongBroadcastProtocol {
    pub fn initial_state(&self, label: &str) -> Option<State> {
        self.init.get(label).or_else(|| self.init.get(WILDCARD)).cloned()
    }
}

/// Selection of an extended model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtendedSelection {
    /// `(n, S)`: neighbourhood step of the non-initiators in `S`.
    Neighbourhood(Vec<usize>),
    /// `(b, S)`: `resolution` maps each receiving node to the initiator whose
    /// signal it gets.
    Broadcast { nodes: Vec<usize>, resolution: BTreeMap<usize, usize> },
    /// Synchronous step with absence detection over the families `S_v`.
    Detection { families: BTreeMap<usize, Vec<usize>> },
    Pair(usize, usize),
    Single(usize),
}

pub fn wb_successor(
    m: &WeakBroadcastMachine,
    g: &LabelledGraph,
    c: &[State],
    sel: &ExtendedSelection,
) -> Result<Configuration, MachineError> {
    match sel {
        ExtendedSelection::Neighbourhood(nodes) => {
            let mut out = c.to_vec();
            for &v in nodes.iter().filter(|&&v| !m.is_initiator(&c[v])) {
                out[v] = m.base.delta(&c[v], &neighbourhood(g, c, v, m.base.beta()));
            }
            Ok(out)
        }
        ExtendedSelection::Broadcast { nodes, resolution } => {
            if nodes.is_empty() || !g.is_independent(nodes) {
                return Err(MachineError::NotIndependentSet(nodes.clone()));
            }
            let effective: BTreeMap<usize, (State, crate::extended::ResponseId)> =
                nodes.iter().filter_map(|&v| m.broadcasts.broadcast(&c[v]).map(|b| (v, b))).collect();
            if effective.is_empty() {
                return Ok(c.to_vec());
            }
            let mut out = c.to_vec();
            for v in g.nodes() {
                if let Some((to, _)) = effective.get(&v) {
                    out[v] = to.clone();
                    continue;
                }
                let u = resolution
                    .get(&v)
                    .ok_or_else(|| MachineError::BadResolution(format!("node {v} has no signal")))?;
                let (_, f) = effective
                    .get(u)
                    .ok_or_else(|| MachineError::BadResolution(format!("node {v} listens to non-initiator {u}")))?;
                out[v] = m.broadcasts.respond(*f, &c[v]);
            }
            Ok(out)
        }
        other => Err(MachineError::BadResolution(format!("{other:?} is not a weak-broadcast selection"))),
    }
}

pub fn ad_sync_step(
    m: &AbsenceDetectionMachine,
    g: &LabelledGraph,
    c: &[State],
    families: &BTreeMap<usize, Vec<usize>>,
) -> Result<Configuration, MachineError> {
    let beta = m.base.beta();
    let c1: Configuration = g.nodes().map(|v| m.base.delta(&c[v], &neighbourhood(g, c, v, beta))).collect();
    let initiators: Vec<usize> = g.nodes().filter(|&v| m.detections.is_initiator(&c1[v])).collect();
    if initiators.is_empty() {
        return Ok(c.to_vec());
    }
    let mut covered = vec![false; g.node_count()];
    for &v in &initiators {
        let s = families.get(&v).ok_or_else(|| MachineError::BadResolution(format!("initiator {v} has no family")))?;
        if !s.contains(&v) {
            return Err(MachineError::BadResolution(format!("family of {v} misses {v}")));
        }
        for &u in s {
            if u >= covered.len() {
                return Err(MachineError::BadResolution(format!("unknown node {u}")));
            }
            covered[u] = true;
        }
    }
    if covered.iter().any(|x| !x) {
        return Err(MachineError::BadResolution("families do not cover V".into()));
    }
    let mut out = c1.clone();
    for &v in &initiators {
        let support: BTreeSet<State> = families[&v].iter().map(|&u| c1[u].clone()).collect();
        let support: Vec<State> = support.into_iter().collect();
        out[v] = m.detections.detect(&c1[v], &support);
    }
    Ok(out)
}

pub fn pp_step(p: &PopulationProtocol, g: &LabelledGraph, c: &[State], (u, v): (usize, usize)) -> Result<Configuration, MachineError> {
    if !g.has_edge(u, v) {
        return Err(MachineError::NotAdjacent(u, v));
    }
    let mut out = c.to_vec();
    let (a, b) = p.interact(&c[u], &c[v]);
    out[u] = a;
    out[v] = b;
    Ok(out)
}

pub fn sbp_step(p: &StrongBroadcastProtocol, c: &[State], v: usize) -> Configuration {
    match p.broadcasts.broadcast(&c[v]) {
        None => c.to_vec(),
        Some((to, f)) => c
            .iter()
            .enumerate()
            .map(|(u, q)| if u == v { to.clone() } else { p.broadcasts.respond(f, q) })
            .collect(),
    }
}

/// An extended model, borrowed for stepping.
#[derive(Clone, Copy)]
pub enum ExtendedModel<'a> {
    WeakBroadcast(&'a WeakBroadcastMachine),
    AbsenceDetection(&'a AbsenceDetectionMachine),
    Population(&'a PopulationProtocol),
    StrongBroadcast(&'a StrongBroadcastProtocol),
}

impl ExtendedModel<'_> {
    pub fn initial(&self, g: &LabelledGraph) -> Result<Configuration, MachineError> {
        let from_map = |f: &dyn Fn(&str) -> Option<State>| -> Result<Configuration, MachineError> {
            g.nodes().map(|v| f(g.label(v)).ok_or_else(|| MachineError::UnknownLabel(g.label(v).to_string()))).collect()
        };
        match self {
            ExtendedModel::WeakBroadcast(m) => initial_configuration(&*m.base, g),
            ExtendedModel::AbsenceDetection(m) => initial_configuration(&*m.base, g),
            ExtendedModel::Population(p) => from_map(&|l| p.initial_state(l)),
            ExtendedModel::StrongBroadcast(p) => from_map(&|l| p.initial_state(l)),
        }
    }

    pub fn step(&self, g: &LabelledGraph, c: &[State], sel: &ExtendedSelection) -> Result<Configuration, MachineError> {
        match (self, sel) {
            (ExtendedModel::WeakBroadcast(m), s) => wb_successor(m, g, c, s),
            (ExtendedModel::AbsenceDetection(m), ExtendedSelection::Detection { families }) => ad_sync_step(m, g, c, families),
            (ExtendedModel::Population(p), ExtendedSelection::Pair(u, v)) => pp_step(p, g, c, (*u, *v)),
            (ExtendedModel::StrongBroadcast(p), ExtendedSelection::Single(v)) => Ok(sbp_step(p, c, *v)),
            (_, s) => Err(MachineError::BadResolution(format!("selection {s:?} does not fit the model"))),
        }
    }

    pub fn accepting(&self, q: &State) -> bool {
        match self {
            ExtendedModel::WeakBroadcast(m) => m.base.is_accepting(q),
            ExtendedModel::AbsenceDetection(m) => m.base.is_accepting(q),
            ExtendedModel::Population(p) => p.accept.contains(q),
            ExtendedModel::StrongBroadcast(p) => p.accept.contains(q),
        }
    }

    pub fn rejecting(&self, q: &State) -> bool {
        match self {
            ExtendedModel::WeakBroadcast(m) => m.base.is_rejecting(q),
            ExtendedModel::AbsenceDetection(m) => m.base.is_rejecting(q),
            ExtendedModel::Population(p) => p.reject.contains(q),
            ExtendedModel::StrongBroadcast(p) => p.reject.contains(q),
        }
    }
}

/// Run of an extended model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtendedRun {
    pub configurations: Vec<Configuration>,
    pub selections: Vec<ExtendedSelection>,
}

pub fn extended_run(
    model: ExtendedModel<'_>,
    g: &LabelledGraph,
    start: Configuration,
    schedule: impl IntoIterator<Item = ExtendedSelection>,
    max_steps: usize,
) -> Result<ExtendedRun, MachineError> {
    let mut configurations = vec![start];
    let mut selections = Vec::new();
    for sel in schedule.into_iter().take(max_steps) {
        let next = model.step(g, configurations.last().unwrap(), &sel)?;
        configurations.push(next);
        selections.push(sel);
    }
    Ok(ExtendedRun { configurations, selections })
}

/// Seeded random driver producing legal selections for the current
/// configuration.
pub struct RandomDriver {
    rng: ChaCha8Rng,
}

impl RandomDriver {
    pub fn new(seed: u64) -> Self {
        RandomDriver { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn next(&mut self, model: ExtendedModel<'_>, g: &LabelledGraph, c: &[State]) -> ExtendedSelection {
        let n = g.node_count();
        match model {
            ExtendedModel::WeakBroadcast(m) => {
                let mut init: Vec<usize> = g.nodes().filter(|&v| m.is_initiator(&c[v])).collect();
                if init.is_empty() || self.rng.gen_bool(0.5) {
                    return ExtendedSelection::Neighbourhood(vec![self.rng.gen_range(0..n)]);
                }
                init.shuffle(&mut self.rng);
                let mut nodes: Vec<usize> = Vec::new();
                for v in init {
                    if nodes.iter().all(|&u| !g.has_edge(u, v)) && (nodes.is_empty() || self.rng.gen_bool(0.5)) {
                        nodes.push(v);
                    }
                }
                nodes.sort_unstable();
                let resolution =
                    g.nodes().filter(|v| !nodes.contains(v)).map(|v| (v, nodes[self.rng.gen_range(0..nodes.len())])).collect();
                ExtendedSelection::Broadcast { nodes, resolution }
            }
            ExtendedModel::AbsenceDetection(m) => {
                let beta = m.base.beta();
                let c1: Vec<State> = g.nodes().map(|v| m.base.delta(&c[v], &neighbourhood(g, c, v, beta))).collect();
                let init: Vec<usize> = g.nodes().filter(|&v| m.detections.is_initiator(&c1[v])).collect();
                let mut families: BTreeMap<usize, Vec<usize>> = init.iter().map(|&v| (v, vec![v])).collect();
                if !init.is_empty() {
                    for u in g.nodes() {
                        let owner = init[self.rng.gen_range(0..init.len())];
                        families.get_mut(&owner).unwrap().push(u);
                        for &v in &init {
                            if self.rng.gen_bool(0.2) {
                                families.get_mut(&v).unwrap().push(u);
                            }
                        }
                    }
                    for f in families.values_mut() {
                        f.sort_unstable();
                        f.dedup();
                    }
                }
                ExtendedSelection::Detection { families }
            }
            ExtendedModel::Population(_) => {
                let (u, v) = g.edges()[self.rng.gen_range(0..g.edges().len())];
                if self.rng.gen_bool(0.5) {
                    ExtendedSelection::Pair(u, v)
                } else {
                    ExtendedSelection::Pair(v, u)
                }
            }
            ExtendedModel::StrongBroadcast(_) => ExtendedSelection::Single(self.rng.gen_range(0..n)),
        }
    }

    pub fn run(
        &mut self,
        model: ExtendedModel<'_>,
        g: &LabelledGraph,
        start: Configuration,
        steps: usize,
    ) -> Result<ExtendedRun, MachineError> {
        let mut configurations = vec![start];
        let mut selections = Vec::new();
        for _ in 0..steps {
            let c = configurations.last().unwrap();
            let sel = self.next(model, g, c);
            let next = model.step(g, c, &sel)?;
            configurations.push(next);
            selections.push(sel);
        }
        Ok(ExtendedRun { configurations, selections })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind, LabelSpec};
    use crate::machine::{Cmp, Guard, Rule, TableMachine};

    fn sym(s: &str) -> State {
        State::sym(s)
    }

    /// Example 1: states a, b, x; x becomes a next to an a; broadcasts
    /// `a ↦ a, {x ↦ a}` and `b ↦ b, {b ↦ a, a ↦ x}`.
    pub(crate) fn example1() -> WeakBroadcastMachine {
        let base = TableMachine::new(
            1,
            vec![sym("a"), sym("b"), sym("x")],
            [("a", "a"), ("b", "b"), ("x", "x")].iter().map(|(l, q)| (l.to_string(), sym(q))).collect(),
            BTreeSet::new(),
            BTreeSet::new(),
            vec![Rule { from: sym("x"), guards: vec![Guard { state: sym("a"), op: Cmp::Ge, value: 1 }], to: sym("a") }],
            false,
        )
        .unwrap();
        let b = TableBroadcasts::new(vec![
            (sym("a"), sym("a"), [(sym("x"), sym("a"))].into_iter().collect()),
            (sym("b"), sym("b"), [(sym("b"), sym("a")), (sym("a"), sym("x"))].into_iter().collect()),
        ])
        .unwrap();
        add_broadcasts(Arc::new(base), Arc::new(b))
    }

    fn cfg(s: &[&str]) -> Configuration {
        s.iter().map(|x| sym(x)).collect()
    }

    #[test]
    fn example1_simultaneous_broadcasts() {
        let m = example1();
        let g = generate(GraphKind::Line, &LabelSpec::positional(&["a", "x", "x", "b", "b"]), None).unwrap();
        let c0 = cfg(&["a", "x", "x", "b", "b"]);
        // Both ends broadcast: the top signal reaches three nodes, the bottom two.
        let sel = ExtendedSelection::Broadcast {
            nodes: vec![0, 4],
            resolution: [(1, 0), (2, 0), (3, 4)].into_iter().collect(),
        };
        let c1 = wb_successor(&m, &g, &c0, &sel).unwrap();
        assert_eq!(c1, cfg(&["a", "a", "a", "a", "b"]));
        let last = ExtendedSelection::Broadcast { nodes: vec![4], resolution: (0..4).map(|v| (v, 4)).collect() };
        assert_eq!(wb_successor(&m, &g, &c1, &last).unwrap(), cfg(&["x", "x", "x", "x", "b"]));
        let bad = ExtendedSelection::Broadcast { nodes: vec![3, 4], resolution: BTreeMap::new() };
        assert!(matches!(wb_successor(&m, &g, &c0, &bad), Err(MachineError::NotIndependentSet(_))));
        let missing = ExtendedSelection::Broadcast { nodes: vec![0], resolution: BTreeMap::new() };
        assert!(matches!(wb_successor(&m, &g, &c0, &missing), Err(MachineError::BadResolution(_))));
        // A neighbourhood selection of an initiator is a no-op.
        assert_eq!(wb_successor(&m, &g, &c0, &ExtendedSelection::Neighbourhood(vec![0])).unwrap(), c0);
    }

    #[test]
    fn single_initiator_is_strong_broadcast() {
        let m = example1();
        let g = generate(GraphKind::Cycle, &LabelSpec::positional(&["a", "x", "b", "a"]), None).unwrap();
        let c0 = cfg(&["a", "x", "b", "a"]);
        let sel = ExtendedSelection::Broadcast { nodes: vec![2], resolution: [(0, 2), (1, 2), (3, 2)].into_iter().collect() };
        let sbp = StrongBroadcastProtocol {
            states: vec![sym("a"), sym("b"), sym("x")],
            init: BTreeMap::new(),
            accept: BTreeSet::new(),
            reject: BTreeSet::new(),
            broadcasts: TableBroadcasts::new(vec![
                (sym("a"), sym("a"), [(sym("x"), sym("a"))].into_iter().collect()),
                (sym("b"), sym("b"), [(sym("b"), sym("a")), (sym("a"), sym("x"))].into_iter().collect()),
            ])
            .unwrap(),
        };
        assert_eq!(wb_successor(&m, &g, &c0, &sel).unwrap(), sbp_step(&sbp, &c0, 2));
    }

    pub(crate) fn token() -> PopulationProtocol {
        let (l, z, bot) = (sym("L"), sym("0"), sym("bot"));
        PopulationProtocol::new(
            vec![z.clone(), l.clone(), sym("L'"), bot.clone()],
            BTreeMap::new(),
            BTreeSet::new(),
            BTreeSet::new(),
            vec![
                ((l.clone(), l.clone()), (z.clone(), bot)),
                ((z.clone(), l.clone()), (l.clone(), z.clone())),
                ((l.clone(), z.clone()), (sym("L'"), z)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn token_rendezvous() {
        let p = token();
        let g = generate(GraphKind::Line, &LabelSpec::positional(&["x", "x", "x"]), None).unwrap();
        assert_eq!(pp_step(&p, &g, &cfg(&["L", "L", "0"]), (0, 1)).unwrap(), cfg(&["0", "bot", "0"]));
        assert_eq!(pp_step(&p, &g, &cfg(&["0", "L", "0"]), (0, 1)).unwrap(), cfg(&["L", "0", "0"]));
        assert_eq!(pp_step(&p, &g, &cfg(&["0", "L", "0"]), (0, 2)), Err(MachineError::NotAdjacent(0, 2)));
    }

    #[test]
    fn absence_detection_hangs_and_detects() {
        // Base: silent. Initiator i detects whether any z is present.
        let base = TableMachine::new(
            1,
            vec![sym("i"), sym("z"), sym("o"), sym("yes"), sym("no")],
            BTreeMap::new(),
            BTreeSet::new(),
            BTreeSet::new(),
            vec![],
            false,
        )
        .unwrap();
        let det = TableDetections::new(vec![
            (sym("i"), vec![sym("i"), sym("o")], sym("no")),
            (sym("i"), vec![sym("i"), sym("o"), sym("z")], sym("yes")),
            (sym("i"), vec![sym("i"), sym("z")], sym("yes")),
            (sym("i"), vec![sym("i")], sym("no")),
        ]);
        let m = AbsenceDetectionMachine { base: Arc::new(base), detections: Arc::new(det) };
        let g = generate(GraphKind::Cycle, &LabelSpec::positional(&["x"; 4]), None).unwrap();
        let c = cfg(&["o", "o", "z", "o"]);
        assert_eq!(ad_sync_step(&m, &g, &c, &BTreeMap::new()).unwrap(), c);
        let c = cfg(&["i", "o", "z", "i"]);
        // Node 0 sees {0,1}, node 3 sees {2,3}: overlapping, covering V.
        let fam: BTreeMap<usize, Vec<usize>> = [(0, vec![0, 1, 3]), (3, vec![2, 3])].into_iter().collect();
        assert_eq!(ad_sync_step(&m, &g, &c, &fam).unwrap(), cfg(&["no", "o", "z", "yes"]));
        let full: BTreeMap<usize, Vec<usize>> = [(0, vec![0, 1, 2, 3]), (3, vec![3])].into_iter().collect();
        assert_eq!(ad_sync_step(&m, &g, &c, &full).unwrap(), cfg(&["yes", "o", "z", "no"]));
        let bad: BTreeMap<usize, Vec<usize>> = [(0, vec![0, 1]), (3, vec![3])].into_iter().collect();
        assert!(matches!(ad_sync_step(&m, &g, &c, &bad), Err(MachineError::BadResolution(_))));
    }
}
