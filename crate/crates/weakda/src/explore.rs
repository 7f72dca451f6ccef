//! Explicit-state exploration shared by concrete and abstract semantics.

use std::collections::VecDeque;
use std::hash::Hash;

use rustc_hash::FxHashMap;

use crate::error::MachineError;

/// A finitely branching transition system with a consensus labelling.
pub trait TransitionSystem {
    type Config: Clone + Eq + Hash;
    fn initial(&mut self) -> Self::Config;
    fn successors(&mut self, c: &Self::Config, out: &mut Vec<Self::Config>);
    fn accepting(&mut self, c: &Self::Config) -> bool;
    fn rejecting(&mut self, c: &Self::Config) -> bool;
}

/// Reachable configurations with their successor lists. Index 0 is the
/// initial configuration.
pub struct StateSpace<C> {
    pub configs: Vec<C>,
    pub succ: Vec<Vec<u32>>,
    pub accepting: Vec<bool>,
    pub rejecting: Vec<bool>,
}

/// Breadth-first exploration, failing once more than `budget`
/// configurations are discovered.
pub fn explore<T: TransitionSystem>(ts: &mut T, budget: usize) -> Result<StateSpace<T::Config>, MachineError> {
    let init = ts.initial();
    let mut index: FxHashMap<T::Config, u32> = FxHashMap::default();
    let mut configs = vec![init.clone()];
    index.insert(init, 0);
    let mut succ: Vec<Vec<u32>> = Vec::new();
    let mut queue = VecDeque::from([0u32]);
    let mut buf = Vec::new();
    while let Some(i) = queue.pop_front() {
        buf.clear();
        let c = configs[i as usize].clone();
        ts.successors(&c, &mut buf);
        let mut out = Vec::with_capacity(buf.len());
        for s in buf.drain(..) {
            let j = match index.get(&s) {
                Some(&j) => j,
                None => {
                    if configs.len() >= budget {
                        return Err(MachineError::BudgetExceeded(budget));
                    }
                    let j = configs.len() as u32;
                    configs.push(s.clone());
                    index.insert(s, j);
                    queue.push_back(j);
                    j
                }
            };
            if j != i && !out.contains(&j) {
                out.push(j);
            }
        }
        if succ.len() <= i as usize {
            succ.resize(i as usize + 1, Vec::new());
        }
        succ[i as usize] = out;
    }
    succ.resize(configs.len(), Vec::new());
    let accepting = configs.iter().map(|c| ts.accepting(c)).collect();
    let rejecting = configs.iter().map(|c| ts.rejecting(c)).collect();
    Ok(StateSpace { configs, succ, accepting, rejecting })
}

impl<C> StateSpace<C> {
    /// Configurations from which some configuration outside `good` is
    /// reachable.
    fn can_escape(&self, good: &[bool]) -> Vec<bool> {
        let n = self.configs.len();
        let mut pred: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (i, s) in self.succ.iter().enumerate() {
            for &j in s {
                pred[j as usize].push(i as u32);
            }
        }
        let mut bad = vec![false; n];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for i in 0..n {
            if !good[i] {
                bad[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(j) = queue.pop_front() {
            for &i in &pred[j] {
                if !bad[i as usize] {
                    bad[i as usize] = true;
                    queue.push_back(i as usize);
                }
            }
        }
        bad
    }

    /// Flags of stably accepting configurations.
    pub fn stably_accepting(&self) -> Vec<bool> {
        self.can_escape(&self.accepting).into_iter().map(|b| !b).collect()
    }

    /// Flags of stably rejecting configurations.
    pub fn stably_rejecting(&self) -> Vec<bool> {
        self.can_escape(&self.rejecting).into_iter().map(|b| !b).collect()
    }
}

/// Outcome of the reachability characterization: which certificates exist.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificates {
    pub accept: Option<usize>,
    pub reject: Option<usize>,
}

pub fn certificates<C>(space: &StateSpace<C>) -> Certificates {
    Certificates {
        accept: space.stably_accepting().iter().position(|&b| b),
        reject: space.stably_rejecting().iter().position(|&b| b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Counter 0..=n that can increment; accepting at n.
    struct Counter(u32);

    impl TransitionSystem for Counter {
        type Config = u32;
        fn initial(&mut self) -> u32 {
            0
        }
        fn successors(&mut self, c: &u32, out: &mut Vec<u32>) {
            if *c < self.0 {
                out.push(c + 1);
            }
        }
        fn accepting(&mut self, c: &u32) -> bool {
            *c == self.0
        }
        fn rejecting(&mut self, c: &u32) -> bool {
            *c != self.0
        }
    }

    #[test]
    fn counter_closure() {
        let s = explore(&mut Counter(3), 100).unwrap();
        assert_eq!(s.configs.len(), 4);
        let cert = certificates(&s);
        assert_eq!(cert.accept.map(|i| s.configs[i]), Some(3));
        assert_eq!(cert.reject, None);
        assert!(matches!(explore(&mut Counter(3), 2), Err(MachineError::BudgetExceeded(2))));
    }
}
