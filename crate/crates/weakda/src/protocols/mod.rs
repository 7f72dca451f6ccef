//! Concrete protocols built from the machine, extended and compile layers.

mod majority;
mod pipeline;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::compile::compile_weak_broadcast;
use crate::error::MachineError;
use crate::extended::{add_broadcasts, PopulationProtocol, StrongBroadcastProtocol, TableBroadcasts, WeakBroadcastMachine};
use crate::graph::LabelledGraph;
use crate::machine::{Cmp, Guard, Machine, MachineRef, Rule, TableMachine, WILDCARD};
use crate::state::{Neighbourhood, State};

pub use majority::{cancel_delta, majority_daf, CancelMachine, LeaderRole, MajorityDaf, ThresholdSpec};
pub use pipeline::{nl_pipeline, token_protocol, NlPipeline};

fn sym(s: &str) -> State {
    State::sym(s)
}

fn init_map(pairs: &[(&str, State)]) -> BTreeMap<String, State> {
    pairs.iter().map(|(l, q)| (l.to_string(), q.clone())).collect()
}

/// Two-state flood: nodes labelled `target` start seen, and seen spreads.
pub fn flood_presence(target: &str) -> TableMachine {
    let (unseen, seen) = (sym("unseen"), sym("seen"));
    TableMachine::new(
        1,
        vec![unseen.clone(), seen.clone()],
        init_map(&[(target, seen.clone()), (WILDCARD, unseen.clone())]),
        [seen.clone()].into_iter().collect(),
        [unseen.clone()].into_iter().collect(),
        vec![Rule { from: unseen, guards: vec![Guard { state: seen.clone(), op: Cmp::Ge, value: 1 }], to: seen }],
        false,
    )
    .expect("flood machine is well formed")
}

/// Boolean formula over component acceptance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    Const(bool),
    Comp(usize),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    pub fn eval(&self, v: &[bool]) -> bool {
        match self {
            Formula::Const(b) => *b,
            Formula::Comp(i) => v[*i],
            Formula::Not(f) => !f.eval(v),
            Formula::And(fs) => fs.iter().all(|f| f.eval(v)),
            Formula::Or(fs) => fs.iter().any(|f| f.eval(v)),
        }
    }

    /// Parses `a & !(b | c)` style formulas over component indices.
    pub fn parse(s: &str) -> Result<Formula, MachineError> {
        let tokens: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut pos = 0;
        let f = parse_or(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(MachineError::InvalidMachine(format!("trailing input in formula `{s}`")));
        }
        Ok(f)
    }
}

fn parse_or(t: &[char], pos: &mut usize) -> Result<Formula, MachineError> {
    let mut parts = vec![parse_and(t, pos)?];
    while t.get(*pos) == Some(&'|') {
        *pos += 1;
        parts.push(parse_and(t, pos)?);
    }
    Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::Or(parts) })
}

fn parse_and(t: &[char], pos: &mut usize) -> Result<Formula, MachineError> {
    let mut parts = vec![parse_atom(t, pos)?];
    while t.get(*pos) == Some(&'&') {
        *pos += 1;
        parts.push(parse_atom(t, pos)?);
    }
    Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::And(parts) })
}

fn parse_atom(t: &[char], pos: &mut usize) -> Result<Formula, MachineError> {
    let bad = || MachineError::InvalidMachine("malformed formula".into());
    match t.get(*pos) {
        Some('!') => {
            *pos += 1;
            Ok(Formula::Not(Box::new(parse_atom(t, pos)?)))
        }
        Some('(') => {
            *pos += 1;
            let f = parse_or(t, pos)?;
            if t.get(*pos) != Some(&')') {
                return Err(bad());
            }
            *pos += 1;
            Ok(f)
        }
        Some(c) if c.is_ascii_digit() => {
            let start = *pos;
            while t.get(*pos).is_some_and(|c| c.is_ascii_digit()) {
                *pos += 1;
            }
            let n: String = t[start..*pos].iter().collect();
            Ok(Formula::Comp(n.parse().map_err(|_| bad())?))
        }
        _ => Err(bad()),
    }
}

/// Product of machines accepting iff `formula` holds over the components'
/// acceptance; rejecting otherwise. β is the largest component bound.
#[derive(Clone)]
pub struct Combined {
    components: Vec<MachineRef>,
    formula: Formula,
}

pub fn boolean_combine(components: Vec<MachineRef>, formula: Formula) -> Result<Combined, MachineError> {
    if components.is_empty() {
        return Err(MachineError::InvalidMachine("no components".into()));
    }
    Ok(Combined { components, formula })
}

impl Combined {
    fn verdicts(&self, s: &State) -> Option<Vec<bool>> {
        let parts = s.as_tuple()?;
        Some(self.components.iter().zip(parts).map(|(m, q)| m.is_accepting(q)).collect())
    }
}

impl Machine for Combined {
    fn beta(&self) -> u32 {
        self.components.iter().map(|m| m.beta()).max().unwrap_or(1)
    }
    fn alphabet(&self) -> Vec<String> {
        let mut all: BTreeSet<String> = BTreeSet::new();
        for m in &self.components {
            all.extend(m.alphabet());
        }
        all.into_iter().collect()
    }
    fn initial_state(&self, label: &str) -> Option<State> {
        let parts: Option<Vec<State>> = self.components.iter().map(|m| m.initial_state(label)).collect();
        parts.map(State::tuple)
    }
    fn delta(&self, s: &State, n: &Neighbourhood) -> State {
        let Some(parts) = s.as_tuple() else { return s.clone() };
        let next: Vec<State> = self
            .components
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let ni = n.project(m.beta(), |x| x.as_tuple().and_then(|t| t.get(i)).cloned());
                m.delta(&parts[i], &ni)
            })
            .collect();
        State::tuple(next)
    }
    fn is_accepting(&self, s: &State) -> bool {
        self.verdicts(s).is_some_and(|v| self.formula.eval(&v))
    }
    fn is_rejecting(&self, s: &State) -> bool {
        self.verdicts(s).is_some_and(|v| !self.formula.eval(&v))
    }
    fn check_graph(&self, g: &LabelledGraph) -> Result<(), MachineError> {
        self.components.iter().try_for_each(|m| m.check_graph(g))
    }
}

/// `x ≥ k` with weak broadcasts, counting nodes labelled `label`.
pub fn threshold_daf_for(k: u32, label: &str) -> Result<WeakBroadcastMachine, MachineError> {
    if k == 0 {
        return Err(MachineError::InvalidMachine("threshold must be positive".into()));
    }
    let levels: Vec<State> = (0..=k as i64).map(State::int).collect();
    let top = State::int(k as i64);
    let base = TableMachine::new(
        1,
        levels.clone(),
        init_map(&[(label, State::int(1)), (WILDCARD, State::int(0))]),
        [top.clone()].into_iter().collect(),
        levels[..k as usize].iter().cloned().collect(),
        Vec::new(),
        false,
    )?;
    let mut entries: Vec<(State, State, BTreeMap<State, State>)> = (1..k as i64)
        .map(|i| (State::int(i), State::int(i), [(State::int(i), State::int(i + 1))].into_iter().collect()))
        .collect();
    entries.push((top.clone(), top.clone(), levels.iter().map(|q| (q.clone(), top.clone())).collect()));
    Ok(add_broadcasts(Arc::new(base), Arc::new(TableBroadcasts::new(entries)?)))
}

/// `x ≥ k` over nodes labelled `x`.
pub fn threshold_daf(k: u32) -> Result<WeakBroadcastMachine, MachineError> {
    threshold_daf_for(k, "x")
}

/// Predicate depending only on label counts cut off at `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CutoffPredicate {
    pub k: u32,
    pub labels: Vec<String>,
    /// Accepted vectors, one entry per label in `labels` order.
    pub accepted: BTreeSet<Vec<u32>>,
}

impl CutoffPredicate {
    pub fn holds(&self, counts: &BTreeMap<String, usize>) -> bool {
        let v: Vec<u32> =
            self.labels.iter().map(|l| (*counts.get(l).unwrap_or(&0) as u32).min(self.k)).collect();
        self.accepted.contains(&v)
    }
}

/// A disjunction over accepted vectors of conjunctions of compiled
/// thresholds and their negations.
pub fn cutoff_automaton(spec: &CutoffPredicate) -> Result<Combined, MachineError> {
    let mut components: Vec<MachineRef> = Vec::new();
    let mut index: BTreeMap<(usize, u32), usize> = BTreeMap::new();
    for (li, l) in spec.labels.iter().enumerate() {
        for j in 1..=spec.k {
            index.insert((li, j), components.len());
            components.push(Arc::new(compile_weak_broadcast(&threshold_daf_for(j, l)?)?));
        }
    }
    let ge = |li: usize, j: u32| if j == 0 { Formula::Const(true) } else { Formula::Comp(index[&(li, j)]) };
    let disjuncts = spec
        .accepted
        .iter()
        .map(|v| {
            Formula::And(
                v.iter()
                    .enumerate()
                    .flat_map(|(li, &c)| {
                        let mut fs = vec![ge(li, c)];
                        if c < spec.k {
                            fs.push(Formula::Not(Box::new(ge(li, c + 1))));
                        }
                        fs
                    })
                    .collect(),
            )
        })
        .collect();
    if components.is_empty() {
        components.push(Arc::new(flood_presence(WILDCARD)));
    }
    boolean_combine(components, Formula::Or(disjuncts))
}

/// Strong broadcast protocol deciding whether the number of `a` nodes is
/// odd.
pub fn parity_sbp() -> StrongBroadcastProtocol {
    let st = |kind: &str, b: u8| sym(&format!("{kind}{b}"));
    let kinds = ["idle", "pend", "done"];
    let states: Vec<State> = kinds.iter().flat_map(|k| [st(k, 0), st(k, 1)]).collect();
    let flip: BTreeMap<State, State> = kinds.iter().flat_map(|k| [(st(k, 0), st(k, 1)), (st(k, 1), st(k, 0))]).collect();
    let entries = (0..2u8).map(|b| (st("pend", b), st("done", 1 - b), flip.clone())).collect();
    StrongBroadcastProtocol {
        states,
        init: init_map(&[("a", st("pend", 0)), (WILDCARD, st("idle", 0))]),
        accept: [st("idle", 1), st("done", 1)].into_iter().collect(),
        reject: [st("idle", 0), st("done", 0)].into_iter().collect(),
        broadcasts: TableBroadcasts::new(entries).expect("parity broadcasts are well formed"),
    }
}

/// Graph population protocol with the given rendezvous table; every label
/// starts in `init_of(label)`.
pub fn population_protocol(
    states: Vec<State>,
    init: BTreeMap<String, State>,
    rendezvous: Vec<((State, State), (State, State))>,
) -> Result<PopulationProtocol, MachineError> {
    PopulationProtocol::new(states, init, BTreeSet::new(), BTreeSet::new(), rendezvous)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind, LabelSpec};
    use crate::semantics::{verdict_adversarial, Outcome};

    fn line(labels: &[&str]) -> LabelledGraph {
        generate(GraphKind::Line, &LabelSpec::positional(labels), None).unwrap()
    }

    #[test]
    fn flood_examples() {
        let m: MachineRef = Arc::new(flood_presence("b"));
        assert_eq!(verdict_adversarial(m.clone(), &line(&["w", "b", "w"]), 100).unwrap().outcome, Outcome::Accept);
        assert_eq!(verdict_adversarial(m, &line(&["w", "w", "w"]), 100).unwrap().outcome, Outcome::Reject);
    }

    #[test]
    fn combine_examples() {
        let a: MachineRef = Arc::new(flood_presence("a"));
        let b: MachineRef = Arc::new(flood_presence("b"));
        let both: MachineRef = Arc::new(boolean_combine(vec![a.clone(), b], Formula::parse("0&1").unwrap()).unwrap());
        let g = generate(GraphKind::Cycle, &LabelSpec::positional(&["a", "b", "a"]), None).unwrap();
        assert_eq!(verdict_adversarial(both, &g, 100).unwrap().outcome, Outcome::Accept);
        let not_a: MachineRef = Arc::new(boolean_combine(vec![a], Formula::parse("!0").unwrap()).unwrap());
        assert_eq!(verdict_adversarial(not_a, &line(&["b", "b", "b"]), 100).unwrap().outcome, Outcome::Accept);
    }

    #[test]
    fn formula_parse() {
        assert_eq!(
            Formula::parse("0 & !(1 | 2)").unwrap(),
            Formula::And(vec![
                Formula::Comp(0),
                Formula::Not(Box::new(Formula::Or(vec![Formula::Comp(1), Formula::Comp(2)])))
            ])
        );
        assert!(Formula::parse("0 &").is_err());
    }

    #[test]
    fn threshold_broadcast_ids() {
        let m = threshold_daf(3).unwrap();
        assert_eq!(m.broadcasts.broadcast(&State::int(1)), Some((State::int(1), 0)));
        assert_eq!(m.broadcasts.broadcast(&State::int(3)), Some((State::int(3), 2)));
        assert_eq!(m.broadcasts.respond(1, &State::int(2)), State::int(3));
        assert_eq!(m.broadcasts.broadcast(&State::int(0)), None);
    }
}
