//! Machine states and cutoff neighbourhoods.
//!
//! States are structured values so that compilers can build product and
//! phased state spaces without materializing them. The derived order is the
//! canonical state order used for tie-breaking throughout the crate.

use std::fmt;
use std::sync::Arc;

/// A machine state.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum State {
    Sym(Arc<str>),
    Int(i64),
    Tuple(Arc<[State]>),
    /// Sorted, duplicate-free.
    Set(Arc<[State]>),
    /// Constructor-tagged payload produced by compilers and combinators.
    Tagged(&'static str, Arc<[State]>),
}

impl State {
    pub fn sym(s: &str) -> State {
        State::Sym(Arc::from(s))
    }

    pub fn int(i: i64) -> State {
        State::Int(i)
    }

    pub fn tuple(items: Vec<State>) -> State {
        State::Tuple(Arc::from(items))
    }

    pub fn pair(a: State, b: State) -> State {
        State::Tuple(Arc::from(vec![a, b]))
    }

    pub fn set(mut items: Vec<State>) -> State {
        items.sort();
        items.dedup();
        State::Set(Arc::from(items))
    }

    pub fn tagged(tag: &'static str, items: Vec<State>) -> State {
        State::Tagged(tag, Arc::from(items))
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            State::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_sym(&self) -> Option<&str> {
        match self {
            State::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_tuple(&self) -> Option<&[State]> {
        match self {
            State::Tuple(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_set(&self) -> Option<&[State]> {
        match self {
            State::Set(s) => Some(s),
            _ => None,
        }
    }

    /// Payload of a state carrying `tag`.
    pub fn untag(&self, tag: &str) -> Option<&[State]> {
        match self {
            State::Tagged(t, items) if *t == tag => Some(items),
            _ => None,
        }
    }

    pub fn is_sym(&self, s: &str) -> bool {
        matches!(self, State::Sym(x) if &**x == s)
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, open: &str, items: &[State], close: &str) -> fmt::Result {
    f.write_str(open)?;
    for (i, s) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{s}")?;
    }
    f.write_str(close)
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            State::Sym(s) => f.write_str(s),
            State::Int(i) => write!(f, "{i}"),
            State::Tuple(t) => write_list(f, "(", t, ")"),
            State::Set(s) => write_list(f, "{", s, "}"),
            State::Tagged(tag, items) => {
                f.write_str(tag)?;
                write_list(f, "(", items, ")")
            }
        }
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl From<&str> for State {
    fn from(s: &str) -> State {
        State::sym(s)
    }
}

impl From<i64> for State {
    fn from(i: i64) -> State {
        State::Int(i)
    }
}

/// Neighbour state counts cut off at β. Entries are sorted by state and
/// every stored count lies in `1..=β`.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Neighbourhood {
    entries: Vec<(State, u32)>,
}

impl Neighbourhood {
    pub fn empty() -> Self {
        Neighbourhood { entries: Vec::new() }
    }

    /// Counts the given neighbour states and cuts off at `beta`.
    pub fn from_states<'a, I>(states: I, beta: u32) -> Self
    where
        I: IntoIterator<Item = &'a State>,
    {
        let mut all: Vec<&State> = states.into_iter().collect();
        all.sort();
        let mut entries: Vec<(State, u32)> = Vec::new();
        for s in all {
            match entries.last_mut() {
                Some((last, c)) if last == s => *c += 1,
                _ => entries.push((s.clone(), 1)),
            }
        }
        for e in &mut entries {
            e.1 = e.1.min(beta);
        }
        Neighbourhood { entries }
    }

    /// Builds from (state, count) pairs; zero counts are dropped.
    pub fn from_counts<I>(counts: I, beta: u32) -> Self
    where
        I: IntoIterator<Item = (State, u32)>,
    {
        let mut entries: Vec<(State, u32)> = counts.into_iter().filter(|(_, c)| *c > 0).collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(State, u32)> = Vec::with_capacity(entries.len());
        for (s, c) in entries {
            match merged.last_mut() {
                Some((last, lc)) if *last == s => *lc += c,
                _ => merged.push((s, c)),
            }
        }
        for e in &mut merged {
            e.1 = e.1.min(beta);
        }
        Neighbourhood { entries: merged }
    }

    pub fn count(&self, q: &State) -> u32 {
        match self.entries.binary_search_by(|e| e.0.cmp(q)) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&State, u32)> {
        self.entries.iter().map(|(s, c)| (s, *c))
    }

    pub fn states(&self) -> impl Iterator<Item = &State> {
        self.entries.iter().map(|(s, _)| s)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of the (cut-off) counts of states satisfying `pred`.
    pub fn sum_where(&self, mut pred: impl FnMut(&State) -> bool) -> u32 {
        self.entries.iter().filter(|(s, _)| pred(s)).map(|(_, c)| *c).sum()
    }

    pub fn any(&self, mut pred: impl FnMut(&State) -> bool) -> bool {
        self.entries.iter().any(|(s, _)| pred(s))
    }

    pub fn all(&self, mut pred: impl FnMut(&State) -> bool) -> bool {
        self.entries.iter().all(|(s, _)| pred(s))
    }

    /// Maps every neighbour state through `f` (dropping `None`), merges
    /// and cuts off again at `beta`.
    pub fn project(&self, beta: u32, mut f: impl FnMut(&State) -> Option<State>) -> Neighbourhood {
        Neighbourhood::from_counts(
            self.entries.iter().filter_map(|(s, c)| f(s).map(|t| (t, *c))),
            beta,
        )
    }
}

/// Pointwise `min(M(x), β)` on a multiset given as key/count pairs.
pub fn cutoff_multiset<K: Clone + Ord>(m: &std::collections::BTreeMap<K, usize>, beta: usize) -> std::collections::BTreeMap<K, usize> {
    m.iter().map(|(k, c)| (k.clone(), (*c).min(beta))).collect()
}
