//! Plain machine semantics: configurations, schedules, runs and verdicts.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;

use crate::engine::{Consensus, Engine, StateId};
use crate::error::MachineError;
use crate::explore::{certificates, explore, TransitionSystem};
use crate::graph::LabelledGraph;
use crate::machine::{Machine, MachineRef};
use crate::state::{Neighbourhood, State};

pub type Configuration = Vec<State>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    Synchronous,
    Exclusive,
    Liberal,
}

impl Regime {
    pub fn parse(s: &str) -> Option<Regime> {
        match s {
            "synchronous" => Some(Regime::Synchronous),
            "exclusive" => Some(Regime::Exclusive),
            "liberal" => Some(Regime::Liberal),
            _ => None,
        }
    }
}

/// How a random schedule picks its selections.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleFamily {
    /// Uniform i.i.d. over the permitted selections.
    Uniform,
    /// Rounds of a fresh random permutation (exclusive regime only).
    RoundRobin,
    /// Node `favoured` is picked with probability 1/2, the rest uniformly
    /// (exclusive regime only).
    Biased(usize),
}

enum Source {
    Finite(std::vec::IntoIter<Vec<usize>>),
    Random { rng: ChaCha8Rng, n: usize, family: ScheduleFamily, round: Vec<usize> },
}

/// A sequence of selections. Iterating yields one selection per step.
pub struct Schedule {
    regime: Regime,
    source: Source,
}

impl Schedule {
    pub fn finite(regime: Regime, steps: Vec<Vec<usize>>) -> Self {
        Schedule { regime, source: Source::Finite(steps.into_iter()) }
    }

    pub fn random(n: usize, regime: Regime, family: ScheduleFamily, seed: u64) -> Self {
        Schedule {
            regime,
            source: Source::Random { rng: ChaCha8Rng::seed_from_u64(seed), n, family, round: Vec::new() },
        }
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }
}

impl Iterator for Schedule {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        match &mut self.source {
            Source::Finite(it) => it.next(),
            Source::Random { rng, n, family, round } => Some(match self.regime {
                Regime::Synchronous => (0..*n).collect(),
                Regime::Liberal => (0..*n).filter(|_| rng.gen_bool(0.5)).collect(),
                Regime::Exclusive => vec![match *family {
                    ScheduleFamily::Uniform => rng.gen_range(0..*n),
                    ScheduleFamily::RoundRobin => {
                        if round.is_empty() {
                            *round = (0..*n).collect();
                            use rand::seq::SliceRandom;
                            round.shuffle(rng);
                        }
                        round.pop().unwrap()
                    }
                    ScheduleFamily::Biased(v) => {
                        if rng.gen_bool(0.5) {
                            v % *n
                        } else {
                            rng.gen_range(0..*n)
                        }
                    }
                }],
            }),
        }
    }
}

/// Uniform random fair schedule for `regime`.
pub fn random_fair_schedule(g: &LabelledGraph, regime: Regime, seed: u64) -> Schedule {
    Schedule::random(g.node_count(), regime, ScheduleFamily::Uniform, seed)
}

/// A run: `configurations[i + 1]` results from `configurations[i]` under
/// `selections[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Run {
    pub configurations: Vec<Configuration>,
    pub selections: Vec<Vec<usize>>,
}

impl Run {
    pub fn steps(&self) -> usize {
        self.selections.len()
    }

    pub fn last(&self) -> &Configuration {
        self.configurations.last().expect("runs are nonempty")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lasso {
    pub prefix: Vec<Configuration>,
    pub cycle: Vec<Configuration>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Accept,
    Reject,
    NoConsensus,
    BudgetExceeded,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Accept => "ACCEPT",
            Outcome::Reject => "REJECT",
            Outcome::NoConsensus => "NO_CONSENSUS",
            Outcome::BudgetExceeded => "BUDGET_EXCEEDED",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Witness {
    Configuration(Configuration),
    Lasso(Lasso),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub outcome: Outcome,
    pub witness: Option<Witness>,
}

impl Verdict {
    pub fn bare(outcome: Outcome) -> Self {
        Verdict { outcome, witness: None }
    }
}

pub fn initial_configuration(m: &dyn Machine, g: &LabelledGraph) -> Result<Configuration, MachineError> {
    m.check_graph(g)?;
    g.nodes()
        .map(|v| m.initial_state(g.label(v)).ok_or_else(|| MachineError::UnknownLabel(g.label(v).to_string())))
        .collect()
}

/// Neighbourhood of `v` in `c`, cut off at `beta`.
pub fn neighbourhood(g: &LabelledGraph, c: &[State], v: usize, beta: u32) -> Neighbourhood {
    Neighbourhood::from_states(g.neighbours(v).iter().map(|&w| &c[w]), beta)
}

pub fn successor(m: &dyn Machine, g: &LabelledGraph, c: &[State], sel: &[usize]) -> Configuration {
    let mut out = c.to_vec();
    for &v in sel {
        out[v] = m.delta(&c[v], &neighbourhood(g, c, v, m.beta()));
    }
    out
}

/// Id-level synchronous lasso: returns the configurations and the index
/// where the cycle starts.
pub fn lasso_ids(
    engine: &mut Engine,
    g: &LabelledGraph,
    start: Vec<StateId>,
    max_steps: usize,
) -> Result<(Vec<Vec<StateId>>, usize), MachineError> {
    let mut seen: FxHashMap<Vec<StateId>, usize> = FxHashMap::default();
    let mut trace = vec![start.clone()];
    seen.insert(start, 0);
    for _ in 0..max_steps {
        let next = engine.sync_step(g, trace.last().unwrap());
        if let Some(&i) = seen.get(&next) {
            return Ok((trace, i));
        }
        seen.insert(next.clone(), trace.len());
        trace.push(next);
    }
    Err(MachineError::BudgetExceeded(max_steps))
}

pub fn synchronous_lasso(m: MachineRef, g: &LabelledGraph, max_steps: usize) -> Result<Lasso, MachineError> {
    let mut e = Engine::new(m);
    let c0 = e.initial(g)?;
    let (trace, start) = lasso_ids(&mut e, g, c0, max_steps)?;
    let decoded: Vec<Configuration> = trace.iter().map(|c| e.decode(c)).collect();
    let cycle = decoded[start..].to_vec();
    let mut prefix = decoded;
    prefix.truncate(start);
    Ok(Lasso { prefix, cycle })
}

/// Adversarial verdict read off the cycle of the synchronous lasso.
pub fn verdict_adversarial_with(engine: &mut Engine, g: &LabelledGraph, max_steps: usize) -> Result<Verdict, MachineError> {
    let c0 = engine.initial(g)?;
    let (trace, start) = match lasso_ids(engine, g, c0, max_steps) {
        Ok(x) => x,
        Err(MachineError::BudgetExceeded(_)) => return Ok(Verdict::bare(Outcome::BudgetExceeded)),
        Err(e) => return Err(e),
    };
    let cycle = &trace[start..];
    let all = |want: Consensus| cycle.iter().all(|c| engine.consensus(c) == want);
    let outcome = if all(Consensus::Accepting) {
        Outcome::Accept
    } else if all(Consensus::Rejecting) {
        Outcome::Reject
    } else {
        Outcome::NoConsensus
    };
    let witness = match outcome {
        Outcome::Accept | Outcome::Reject => Some(Witness::Lasso(Lasso {
            prefix: trace[..start].iter().map(|c| engine.decode(c)).collect(),
            cycle: cycle.iter().map(|c| engine.decode(c)).collect(),
        })),
        _ => None,
    };
    Ok(Verdict { outcome, witness })
}

pub fn verdict_adversarial(m: MachineRef, g: &LabelledGraph, max_steps: usize) -> Result<Verdict, MachineError> {
    verdict_adversarial_with(&mut Engine::new(m), g, max_steps)
}

/// Concrete configurations of a plain machine under one regime.
pub struct PlainSystem<'a> {
    pub engine: Engine,
    pub graph: &'a LabelledGraph,
    pub regime: Regime,
    start: Vec<StateId>,
}

impl<'a> PlainSystem<'a> {
    pub fn new(m: MachineRef, g: &'a LabelledGraph, regime: Regime) -> Result<Self, MachineError> {
        if regime == Regime::Liberal {
            return Err(MachineError::InvalidMachine("liberal regime is not explored exhaustively".into()));
        }
        let mut engine = Engine::new(m);
        let start = engine.initial(g)?;
        Ok(PlainSystem { engine, graph: g, regime, start })
    }
}

impl TransitionSystem for PlainSystem<'_> {
    type Config = Vec<StateId>;

    fn initial(&mut self) -> Vec<StateId> {
        self.start.clone()
    }

    fn successors(&mut self, c: &Vec<StateId>, out: &mut Vec<Vec<StateId>>) {
        match self.regime {
            Regime::Synchronous => out.push(self.engine.sync_step(self.graph, c)),
            _ => {
                for v in self.graph.nodes() {
                    let q = self.engine.delta_at(self.graph, c, v);
                    if q != c[v] {
                        let mut d = c.clone();
                        d[v] = q;
                        out.push(d);
                    }
                }
            }
        }
    }

    fn accepting(&mut self, c: &Vec<StateId>) -> bool {
        self.engine.consensus(c) == Consensus::Accepting
    }

    fn rejecting(&mut self, c: &Vec<StateId>) -> bool {
        self.engine.consensus(c) == Consensus::Rejecting
    }
}

pub fn reachable_set(
    m: MachineRef,
    g: &LabelledGraph,
    regime: Regime,
    budget: usize,
) -> Result<BTreeSet<Configuration>, MachineError> {
    let mut ts = PlainSystem::new(m, g, regime)?;
    let space = explore(&mut ts, budget)?;
    Ok(space.configs.iter().map(|c| ts.engine.decode(c)).collect())
}

pub fn stable_sets(
    m: MachineRef,
    g: &LabelledGraph,
    budget: usize,
) -> Result<(BTreeSet<Configuration>, BTreeSet<Configuration>), MachineError> {
    let mut ts = PlainSystem::new(m, g, Regime::Exclusive)?;
    let space = explore(&mut ts, budget)?;
    let pick = |flags: Vec<bool>| -> BTreeSet<Configuration> {
        flags.iter().zip(&space.configs).filter(|(f, _)| **f).map(|(_, c)| ts.engine.decode(c)).collect()
    };
    Ok((pick(space.stably_accepting()), pick(space.stably_rejecting())))
}

/// Verdict from the reachability characterization on any transition
/// system. Both certificates present signals a consistency violation and
/// is reported as no consensus.
pub fn verdict_of_system<T: TransitionSystem>(
    ts: &mut T,
    budget: usize,
    decode: impl Fn(&mut T, &T::Config) -> Configuration,
) -> Result<Verdict, MachineError> {
    let space = match explore(ts, budget) {
        Ok(s) => s,
        Err(MachineError::BudgetExceeded(_)) => return Ok(Verdict::bare(Outcome::BudgetExceeded)),
        Err(e) => return Err(e),
    };
    let cert = certificates(&space);
    Ok(match (cert.accept, cert.reject) {
        (Some(i), None) => Verdict {
            outcome: Outcome::Accept,
            witness: Some(Witness::Configuration(decode(ts, &space.configs[i]))),
        },
        (None, Some(i)) => Verdict {
            outcome: Outcome::Reject,
            witness: Some(Witness::Configuration(decode(ts, &space.configs[i]))),
        },
        _ => Verdict::bare(Outcome::NoConsensus),
    })
}

pub fn verdict_pseudostochastic(m: MachineRef, g: &LabelledGraph, budget: usize) -> Result<Verdict, MachineError> {
    let mut ts = PlainSystem::new(m, g, Regime::Exclusive)?;
    verdict_of_system(&mut ts, budget, |ts, c| ts.engine.decode(c))
}

/// Runs `m` on `g` under `schedule` for at most `max_steps` steps.
pub fn run_with_schedule(
    m: MachineRef,
    g: &LabelledGraph,
    schedule: Schedule,
    max_steps: usize,
) -> Result<Run, MachineError> {
    let mut e = Engine::new(m);
    let c0 = e.initial(g)?;
    let mut ids = vec![c0];
    let mut selections = Vec::new();
    for sel in schedule.take(max_steps) {
        let next = e.step(g, ids.last().unwrap(), &sel);
        ids.push(next);
        selections.push(sel);
    }
    Ok(Run { configurations: ids.iter().map(|c| e.decode(c)).collect(), selections })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind, LabelSpec};
    use crate::machine::tests::flood;
    use std::sync::Arc;

    fn line(labels: &[&str]) -> LabelledGraph {
        generate(GraphKind::Line, &LabelSpec::positional(labels), None).unwrap()
    }

    fn cfg(s: &[&str]) -> Configuration {
        s.iter().map(|x| State::sym(x)).collect()
    }

    #[test]
    fn flood_examples() {
        let m: MachineRef = Arc::new(flood());
        let g = line(&["w", "b", "w"]);
        let c0 = initial_configuration(&*m, &g).unwrap();
        assert_eq!(c0, cfg(&["w", "b", "w"]));
        assert_eq!(successor(&*m, &g, &c0, &[]), c0);
        assert_eq!(successor(&*m, &g, &c0, &[0, 1, 2]), cfg(&["b", "b", "b"]));
        let l = synchronous_lasso(m.clone(), &g, 10).unwrap();
        assert_eq!(l.prefix, vec![c0.clone()]);
        assert_eq!(l.cycle, vec![cfg(&["b", "b", "b"])]);
        assert!(matches!(synchronous_lasso(m.clone(), &g, 1), Err(MachineError::BudgetExceeded(1))));
        assert_eq!(verdict_adversarial(m.clone(), &g, 10).unwrap().outcome, Outcome::Accept);
        assert_eq!(verdict_adversarial(m.clone(), &line(&["w", "w", "w"]), 10).unwrap().outcome, Outcome::Reject);
        let r = reachable_set(m.clone(), &g, Regime::Exclusive, 100).unwrap();
        let want: BTreeSet<Configuration> =
            [cfg(&["w", "b", "w"]), cfg(&["b", "b", "w"]), cfg(&["w", "b", "b"]), cfg(&["b", "b", "b"])].into_iter().collect();
        assert_eq!(r, want);
        assert!(matches!(reachable_set(m.clone(), &g, Regime::Exclusive, 1), Err(MachineError::BudgetExceeded(1))));
        let (acc, _) = stable_sets(m.clone(), &g, 100).unwrap();
        assert!(acc.contains(&cfg(&["b", "b", "b"])));
        assert_eq!(acc.len(), 1);
    }

    #[test]
    fn unknown_label() {
        let m: MachineRef = Arc::new(flood());
        assert_eq!(initial_configuration(&*m, &line(&["w", "x", "w"])), Err(MachineError::UnknownLabel("x".into())));
    }

    #[test]
    fn schedules_are_reproducible() {
        let g = line(&["w", "b", "w", "w"]);
        let a: Vec<_> = random_fair_schedule(&g, Regime::Exclusive, 3).take(50).collect();
        let b: Vec<_> = random_fair_schedule(&g, Regime::Exclusive, 3).take(50).collect();
        assert_eq!(a, b);
        assert!(a.iter().all(|s| s.len() == 1));
        let s: Vec<_> = random_fair_schedule(&g, Regime::Synchronous, 3).take(3).collect();
        assert!(s.iter().all(|s| s == &vec![0, 1, 2, 3]));
        let rr: Vec<_> = Schedule::random(4, Regime::Exclusive, ScheduleFamily::RoundRobin, 1).take(4).collect();
        let mut flat: Vec<usize> = rr.into_iter().flatten().collect();
        flat.sort();
        assert_eq!(flat, vec![0, 1, 2, 3]);
    }

    #[test]
    fn run_matches_lasso_prefix() {
        let m: MachineRef = Arc::new(flood());
        let g = line(&["w", "b", "w", "w"]);
        let r = run_with_schedule(m.clone(), &g, random_fair_schedule(&g, Regime::Synchronous, 0), 3).unwrap();
        let l = synchronous_lasso(m, &g, 10).unwrap();
        let all: Vec<_> = l.prefix.iter().chain(l.cycle.iter()).cloned().collect();
        assert_eq!(r.configurations[..all.len()], all[..]);
        let empty = run_with_schedule(Arc::new(flood()), &g, Schedule::finite(Regime::Liberal, vec![vec![]; 4]), 4).unwrap();
        assert!(empty.configurations.iter().all(|c| c == &empty.configurations[0]));
    }
}
