//! Last-state wrapper and products with a passive component.

use std::sync::Arc;

use crate::error::MachineError;
use crate::graph::LabelledGraph;
use crate::machine::{Machine, MachineRef};
use crate::state::{Neighbourhood, State};

const LAST: &str = "last";

/// Current and remembered component of a wrapped state.
pub fn last_parts(s: &State) -> Option<(&State, &State)> {
    match s.untag(LAST)? {
        [cur, rem] => Some((cur, rem)),
        _ => None,
    }
}

/// Current component, or the state itself when it is not wrapped.
pub fn current(s: &State) -> &State {
    last_parts(s).map_or(s, |p| p.0)
}

/// Remembered component, or the state itself when it is not wrapped.
pub fn remembered(s: &State) -> &State {
    last_parts(s).map_or(s, |p| p.1)
}

pub fn wrap_last(cur: State, rem: State) -> State {
    State::tagged(LAST, vec![cur, rem])
}

/// Core state an inner state commits to, if any. Core states commit to
/// themselves.
pub type CommitMap = Arc<dyn Fn(&State) -> Option<State> + Send + Sync>;

/// Remembers the last core state committed to and reads acceptance from it.
#[derive(Clone)]
pub struct LastState {
    inner: MachineRef,
    commit: CommitMap,
}

/// Wraps `m`, failing when some initial state is not core.
pub fn with_last_state(m: MachineRef, commit: CommitMap) -> Result<LastState, MachineError> {
    for l in m.alphabet() {
        if let Some(q) = m.initial_state(&l) {
            if commit(&q).as_ref() != Some(&q) {
                return Err(MachineError::InitNotCore(q.to_string()));
            }
        }
    }
    Ok(LastState { inner: m, commit })
}

/// Commit map of machines whose core states are exactly those in `core`.
pub fn core_only(core: impl Fn(&State) -> bool + Send + Sync + 'static) -> CommitMap {
    Arc::new(move |q: &State| core(q).then(|| q.clone()))
}

impl LastState {
    pub fn inner(&self) -> &MachineRef {
        &self.inner
    }

    pub fn is_core(&self, q: &State) -> bool {
        (self.commit)(q).as_ref() == Some(q)
    }

    /// Wrapped form of a core state.
    pub fn lift(&self, q: State) -> State {
        wrap_last(q.clone(), q)
    }
}

impl Machine for LastState {
    fn beta(&self) -> u32 {
        self.inner.beta()
    }
    fn alphabet(&self) -> Vec<String> {
        self.inner.alphabet()
    }
    fn initial_state(&self, label: &str) -> Option<State> {
        self.inner.initial_state(label).map(|q| self.lift(q))
    }
    fn delta(&self, s: &State, n: &Neighbourhood) -> State {
        let Some((cur, rem)) = last_parts(s) else {
            return s.clone();
        };
        let inner_n = n.project(self.beta(), |x| Some(current(x).clone()));
        let next = self.inner.delta(cur, &inner_n);
        if &next == cur {
            return s.clone();
        }
        let rem = (self.commit)(&next).unwrap_or_else(|| rem.clone());
        wrap_last(next, rem)
    }
    fn is_accepting(&self, s: &State) -> bool {
        self.inner.is_accepting(remembered(s))
    }
    fn is_rejecting(&self, s: &State) -> bool {
        self.inner.is_rejecting(remembered(s))
    }
    fn states(&self) -> Option<Vec<State>> {
        let inner = self.inner.states()?;
        let core: Vec<&State> = inner.iter().filter(|q| self.is_core(q)).collect();
        let mut out = Vec::new();
        for q in &inner {
            match (self.commit)(q) {
                Some(r) => out.push(wrap_last(q.clone(), r)),
                None => out.extend(core.iter().map(|r| wrap_last(q.clone(), (*r).clone()))),
            }
        }
        Some(out)
    }
    fn check_graph(&self, g: &LabelledGraph) -> Result<(), MachineError> {
        self.inner.check_graph(g)
    }
}

/// `M × Q'`: the second component is never changed by transitions.
/// Non-pair states are silent and invisible to pair states.
#[derive(Clone)]
pub struct Product {
    inner: MachineRef,
    extra: Vec<State>,
}

pub fn product_with(m: MachineRef, extra: Vec<State>) -> Product {
    Product { inner: m, extra }
}

/// Components of a product state.
pub fn product_parts(s: &State) -> Option<(&State, &State)> {
    match s.as_tuple()? {
        [a, b] => Some((a, b)),
        _ => None,
    }
}

impl Product {
    pub fn inner(&self) -> &MachineRef {
        &self.inner
    }

    pub fn extra(&self) -> &[State] {
        &self.extra
    }
}

impl Machine for Product {
    fn beta(&self) -> u32 {
        self.inner.beta()
    }
    fn alphabet(&self) -> Vec<String> {
        self.inner.alphabet()
    }
    /// Pairs the inner initial state with the first extra value.
    fn initial_state(&self, label: &str) -> Option<State> {
        let e = self.extra.first()?.clone();
        self.inner.initial_state(label).map(|q| State::pair(q, e))
    }
    fn delta(&self, s: &State, n: &Neighbourhood) -> State {
        let Some((q, e)) = product_parts(s) else {
            return s.clone();
        };
        let inner_n = n.project(self.beta(), |x| product_parts(x).map(|p| p.0.clone()));
        State::pair(self.inner.delta(q, &inner_n), e.clone())
    }
    fn is_accepting(&self, s: &State) -> bool {
        product_parts(s).is_some_and(|p| self.inner.is_accepting(p.0))
    }
    fn is_rejecting(&self, s: &State) -> bool {
        product_parts(s).is_some_and(|p| self.inner.is_rejecting(p.0))
    }
    fn states(&self) -> Option<Vec<State>> {
        let inner = self.inner.states()?;
        Some(
            inner
                .iter()
                .flat_map(|q| self.extra.iter().map(move |e| State::pair(q.clone(), e.clone())))
                .collect(),
        )
    }
    fn check_graph(&self, g: &LabelledGraph) -> Result<(), MachineError> {
        self.inner.check_graph(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::tests::flood;
    use crate::semantics::successor;
    use crate::graph::{generate, GraphKind, LabelSpec};

    #[test]
    fn last_state_reads_remembered() {
        let m: MachineRef = Arc::new(flood());
        let l = with_last_state(m.clone(), core_only(|q: &State| q.is_sym("w")));
        assert!(matches!(l, Err(MachineError::InitNotCore(_))));
        let l = with_last_state(m, core_only(|_: &State| true)).unwrap();
        let g = generate(GraphKind::Line, &LabelSpec::positional(&["b", "w", "w"]), None).unwrap();
        let c: Vec<State> = g.labels().iter().map(|x| l.initial_state(x).unwrap()).collect();
        let d = successor(&l, &g, &c, &[1]);
        assert_eq!(d[1], l.lift(State::sym("b")));
        assert!(l.is_accepting(&d[1]));
    }

    #[test]
    fn product_keeps_second_component() {
        let m: MachineRef = Arc::new(flood());
        let p = product_with(m, vec![State::int(7), State::int(8)]);
        let g = generate(GraphKind::Line, &LabelSpec::positional(&["b", "w", "w"]), None).unwrap();
        let c: Vec<State> = g.labels().iter().map(|x| p.initial_state(x).unwrap()).collect();
        let d = successor(&p, &g, &c, &[1]);
        assert_eq!(d[1], State::pair(State::sym("b"), State::int(7)));
        assert_eq!(p.states().unwrap().len(), 4);
    }
}
