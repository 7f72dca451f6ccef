//! The distributed machine abstraction and the rule-table machine.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::error::MachineError;
use crate::graph::LabelledGraph;
use crate::state::{Neighbourhood, State};

/// Label key matching every label without an explicit entry.
pub const WILDCARD: &str = "*";

/// A distributed machine `(Q, δ0, δ, Y, N)` with counting bound β.
///
/// `delta` always receives the neighbourhood cut off at `beta()`.
pub trait Machine: Send + Sync {
    fn beta(&self) -> u32;
    /// Labels with an initial state; may contain [`WILDCARD`].
    fn alphabet(&self) -> Vec<String>;
    fn initial_state(&self, label: &str) -> Option<State>;
    fn delta(&self, q: &State, n: &Neighbourhood) -> State;
    fn is_accepting(&self, q: &State) -> bool;
    fn is_rejecting(&self, q: &State) -> bool;
    fn is_halting(&self) -> bool {
        false
    }
    /// Full state list, when the machine can enumerate it.
    fn states(&self) -> Option<Vec<State>> {
        None
    }
    /// Rule list for table-backed machines.
    fn rules(&self) -> Option<&[Rule]> {
        None
    }
    /// Rejects graphs the machine is not valid on.
    fn check_graph(&self, _g: &LabelledGraph) -> Result<(), MachineError> {
        Ok(())
    }
}

pub type MachineRef = Arc<dyn Machine>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cmp {
    Eq,
    Ge,
    Le,
}

impl Cmp {
    pub fn name(self) -> &'static str {
        match self {
            Cmp::Eq => "eq",
            Cmp::Ge => "ge",
            Cmp::Le => "le",
        }
    }

    pub fn parse(s: &str) -> Option<Cmp> {
        match s {
            "eq" => Some(Cmp::Eq),
            "ge" => Some(Cmp::Ge),
            "le" => Some(Cmp::Le),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Guard {
    pub state: State,
    pub op: Cmp,
    pub value: u32,
}

impl Guard {
    pub fn holds(&self, n: &Neighbourhood) -> bool {
        let c = n.count(&self.state);
        match self.op {
            Cmp::Eq => c == self.value,
            Cmp::Ge => c >= self.value,
            Cmp::Le => c <= self.value,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub from: State,
    pub guards: Vec<Guard>,
    pub to: State,
}

/// Machine given by an ordered rule list; first match wins, no match is
/// silent.
#[derive(Clone, Debug)]
pub struct TableMachine {
    beta: u32,
    states: Vec<State>,
    init: BTreeMap<String, State>,
    accept: BTreeSet<State>,
    reject: BTreeSet<State>,
    rules: Vec<Rule>,
    halting: bool,
    by_from: HashMap<State, Vec<usize>>,
}

impl TableMachine {
    pub fn new(
        beta: u32,
        states: Vec<State>,
        init: BTreeMap<String, State>,
        accept: BTreeSet<State>,
        reject: BTreeSet<State>,
        rules: Vec<Rule>,
        halting: bool,
    ) -> Result<Self, MachineError> {
        let invalid = |m: String| Err(MachineError::InvalidMachine(m));
        if beta == 0 {
            return invalid("beta must be at least 1".into());
        }
        let known: BTreeSet<&State> = states.iter().collect();
        if known.len() != states.len() {
            return invalid("duplicate state".into());
        }
        let check = |q: &State, what: &str| -> Result<(), MachineError> {
            if known.contains(q) {
                Ok(())
            } else {
                Err(MachineError::InvalidMachine(format!("{what} references unknown state {q}")))
            }
        };
        for q in init.values() {
            check(q, "init")?;
        }
        for q in accept.iter().chain(reject.iter()) {
            check(q, "accept/reject")?;
        }
        if let Some(q) = accept.intersection(&reject).next() {
            return invalid(format!("state {q} both accepting and rejecting"));
        }
        let mut by_from: HashMap<State, Vec<usize>> = HashMap::new();
        for (i, r) in rules.iter().enumerate() {
            check(&r.from, "rule")?;
            check(&r.to, "rule")?;
            for g in &r.guards {
                check(&g.state, "guard")?;
                if g.value > beta {
                    return invalid(format!("guard threshold {} exceeds beta {beta}", g.value));
                }
            }
            if halting && r.from != r.to && (accept.contains(&r.from) || reject.contains(&r.from)) {
                return Err(MachineError::NotHalting(r.from.to_string()));
            }
            by_from.entry(r.from.clone()).or_default().push(i);
        }
        Ok(TableMachine { beta, states, init, accept, reject, rules, halting, by_from })
    }

    pub fn init_map(&self) -> &BTreeMap<String, State> {
        &self.init
    }

    pub fn accepting_states(&self) -> &BTreeSet<State> {
        &self.accept
    }

    pub fn rejecting_states(&self) -> &BTreeSet<State> {
        &self.reject
    }
}

impl Machine for TableMachine {
    fn beta(&self) -> u32 {
        self.beta
    }

    fn alphabet(&self) -> Vec<String> {
        self.init.keys().cloned().collect()
    }

    fn initial_state(&self, label: &str) -> Option<State> {
        self.init.get(label).or_else(|| self.init.get(WILDCARD)).cloned()
    }

    fn delta(&self, q: &State, n: &Neighbourhood) -> State {
        if let Some(idx) = self.by_from.get(q) {
            for &i in idx {
                let r = &self.rules[i];
                if r.guards.iter().all(|g| g.holds(n)) {
                    return r.to.clone();
                }
            }
        }
        q.clone()
    }

    fn is_accepting(&self, q: &State) -> bool {
        self.accept.contains(q)
    }

    fn is_rejecting(&self, q: &State) -> bool {
        self.reject.contains(q)
    }

    fn is_halting(&self) -> bool {
        self.halting
    }

    fn states(&self) -> Option<Vec<State>> {
        Some(self.states.clone())
    }

    fn rules(&self) -> Option<&[Rule]> {
        Some(&self.rules)
    }
}

/// Overrides initial states and acceptance of an inner machine.
pub struct Customized {
    inner: MachineRef,
    init: Option<Arc<dyn Fn(&str) -> Option<State> + Send + Sync>>,
    alphabet: Option<Vec<String>>,
    accept: Option<Arc<dyn Fn(&State) -> bool + Send + Sync>>,
    reject: Option<Arc<dyn Fn(&State) -> bool + Send + Sync>>,
}

impl Customized {
    pub fn new(inner: MachineRef) -> Self {
        Customized { inner, init: None, alphabet: None, accept: None, reject: None }
    }

    pub fn with_init(mut self, alphabet: Vec<String>, f: impl Fn(&str) -> Option<State> + Send + Sync + 'static) -> Self {
        self.alphabet = Some(alphabet);
        self.init = Some(Arc::new(f));
        self
    }

    pub fn with_acceptance(
        mut self,
        accept: impl Fn(&State) -> bool + Send + Sync + 'static,
        reject: impl Fn(&State) -> bool + Send + Sync + 'static,
    ) -> Self {
        self.accept = Some(Arc::new(accept));
        self.reject = Some(Arc::new(reject));
        self
    }

    pub fn inner(&self) -> &MachineRef {
        &self.inner
    }
}

impl Machine for Customized {
    fn beta(&self) -> u32 {
        self.inner.beta()
    }
    fn alphabet(&self) -> Vec<String> {
        self.alphabet.clone().unwrap_or_else(|| self.inner.alphabet())
    }
    fn initial_state(&self, label: &str) -> Option<State> {
        match &self.init {
            Some(f) => f(label),
            None => self.inner.initial_state(label),
        }
    }
    fn delta(&self, q: &State, n: &Neighbourhood) -> State {
        self.inner.delta(q, n)
    }
    fn is_accepting(&self, q: &State) -> bool {
        match &self.accept {
            Some(f) => f(q),
            None => self.inner.is_accepting(q),
        }
    }
    fn is_rejecting(&self, q: &State) -> bool {
        match &self.reject {
            Some(f) => f(q),
            None => self.inner.is_rejecting(q),
        }
    }
    fn is_halting(&self) -> bool {
        self.inner.is_halting()
    }
    fn states(&self) -> Option<Vec<State>> {
        self.inner.states()
    }
    fn check_graph(&self, g: &LabelledGraph) -> Result<(), MachineError> {
        self.inner.check_graph(g)
    }
}

/// Number of guard-distinguishable (state, neighbourhood) inputs.
pub fn serialization_size(states: usize, beta: u32) -> u128 {
    let base = beta as u128 + 1;
    let mut total: u128 = states as u128;
    for _ in 0..states {
        total = total.saturating_mul(base);
        if total > u128::from(u64::MAX) {
            break;
        }
    }
    total
}

/// Materializes `m` as a rule table, enumerating every cut-off
/// neighbourhood when `m` is procedure-backed.
pub fn to_table(m: &dyn Machine) -> Result<TableMachine, MachineError> {
    let states = m.states().ok_or(MachineError::NotEnumerable)?;
    let beta = m.beta();
    let init: BTreeMap<String, State> = m
        .alphabet()
        .into_iter()
        .filter_map(|l| m.initial_state(&l).map(|q| (l, q)))
        .collect();
    let accept = states.iter().filter(|q| m.is_accepting(q)).cloned().collect();
    let reject = states.iter().filter(|q| m.is_rejecting(q)).cloned().collect();
    let rules = match m.rules() {
        Some(r) => r.to_vec(),
        None => {
            let size = serialization_size(states.len(), beta);
            if size > 1_000_000 {
                return Err(MachineError::TooLargeToSerialize(size));
            }
            let mut rules = Vec::new();
            let mut counts = vec![0u32; states.len()];
            loop {
                let n = Neighbourhood::from_counts(states.iter().cloned().zip(counts.iter().copied()), beta);
                for q in &states {
                    let to = m.delta(q, &n);
                    if &to != q {
                        let guards = states
                            .iter()
                            .zip(&counts)
                            .map(|(s, &c)| Guard { state: s.clone(), op: Cmp::Eq, value: c })
                            .collect();
                        rules.push(Rule { from: q.clone(), guards, to });
                    }
                }
                let mut i = 0;
                while i < counts.len() && counts[i] == beta {
                    counts[i] = 0;
                    i += 1;
                }
                if i == counts.len() {
                    break;
                }
                counts[i] += 1;
            }
            rules.sort_by(|a, b| a.from.cmp(&b.from));
            rules
        }
    };
    TableMachine::new(beta, states, init, accept, reject, rules, m.is_halting())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn flood() -> TableMachine {
        let w = State::sym("w");
        let b = State::sym("b");
        TableMachine::new(
            1,
            vec![w.clone(), b.clone()],
            [("w".to_string(), w.clone()), ("b".to_string(), b.clone())].into_iter().collect(),
            [b.clone()].into_iter().collect(),
            [w.clone()].into_iter().collect(),
            vec![Rule { from: w, guards: vec![Guard { state: b.clone(), op: Cmp::Ge, value: 1 }], to: b }],
            false,
        )
        .unwrap()
    }

    #[test]
    fn first_match_and_silence() {
        let m = flood();
        let w = State::sym("w");
        let b = State::sym("b");
        assert_eq!(m.delta(&w, &Neighbourhood::from_states([&b], 1)), b);
        assert_eq!(m.delta(&w, &Neighbourhood::from_states([&w], 1)), w);
        assert_eq!(m.delta(&b, &Neighbourhood::empty()), b);
    }

    #[test]
    fn validation() {
        let w = State::sym("w");
        let r = TableMachine::new(
            1,
            vec![w.clone()],
            BTreeMap::new(),
            [w.clone()].into_iter().collect(),
            [w.clone()].into_iter().collect(),
            vec![],
            false,
        );
        assert!(matches!(r, Err(MachineError::InvalidMachine(_))));
        let b = State::sym("b");
        let r = TableMachine::new(
            1,
            vec![w.clone(), b.clone()],
            BTreeMap::new(),
            [b.clone()].into_iter().collect(),
            BTreeSet::new(),
            vec![Rule { from: b.clone(), guards: vec![], to: w.clone() }],
            true,
        );
        assert!(matches!(r, Err(MachineError::NotHalting(_))));
    }

    #[test]
    fn enumerated_table_matches() {
        let m = flood();
        let t = to_table(&m).unwrap();
        assert_eq!(t.rules().unwrap().len(), 1);
        assert_eq!(serialization_size(3, 1), 24);
    }
}
