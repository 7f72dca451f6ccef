use std::collections::BTreeMap;
use std::sync::Arc;

use super::corpus::*;
use super::*;
use crate::compile::{compile_absence_detection, compile_rendezvous, compile_weak_broadcast, wb_idle, wrap_last};
use crate::extended::tests::{example1, token};
use crate::extended::ExtendedSelection;
use crate::graph::{generate, make_cycle_cover, GraphKind, LabelSpec, LabelledGraph};
use crate::machine::{Machine, MachineRef, TableMachine};
use crate::semantics::{run_with_schedule, successor, Configuration, Regime, Run, Schedule};
use crate::state::State;

fn sym(s: &str) -> State {
    State::sym(s)
}

fn line(labels: &[&str]) -> LabelledGraph {
    generate(GraphKind::Line, &LabelSpec::positional(labels), None).unwrap()
}

fn cfg(s: &[&str]) -> Configuration {
    s.iter().map(|x| sym(x)).collect()
}

fn replay(m: &dyn Machine, g: &LabelledGraph, c0: Configuration, sels: &[usize]) -> Run {
    let mut configurations = vec![c0];
    for &v in sels {
        let next = successor(m, g, configurations.last().unwrap(), &[v]);
        configurations.push(next);
    }
    Run { configurations, selections: sels.iter().map(|&v| vec![v]).collect() }
}

fn flood() -> TableMachine {
    crate::machine::tests::flood()
}

#[test]
fn identity_reordering() {
    let m = flood();
    let g = line(&["b", "w", "w", "w"]);
    let run = replay(&m, &g, cfg(&["b", "w", "w", "w"]), &[3, 1, 1, 2, 0, 3]);
    let f: Vec<(usize, usize)> = non_silent_steps(&run).into_iter().map(|i| (i, i)).collect();
    assert_eq!(f.len(), 3);
    assert_eq!(check_reordering(&m, &g, &run, &run, &f), Ok(true));
    assert!(matches!(check_reordering(&m, &g, &run, &run, &f[1..]), Err(VerifyError::LengthMismatch(_))));
}

#[test]
fn swapping_adjacent_steps_is_rejected() {
    let m = flood();
    let g = line(&["b", "w", "w", "b"]);
    // 1 then 2: both flood, 2 only after 1 or from 3.
    let run = replay(&m, &g, cfg(&["b", "w", "w", "b"]), &[1, 2]);
    let swapped = replay(&m, &g, cfg(&["b", "w", "w", "b"]), &[2, 1]);
    assert_eq!(check_reordering(&m, &g, &run, &swapped, &[(0, 1), (1, 0)]), Ok(false));
    // Non-adjacent steps commute.
    let g = line(&["b", "w", "b", "w", "b"]);
    let run = replay(&m, &g, cfg(&["b", "w", "b", "w", "b"]), &[1, 3]);
    let swapped = replay(&m, &g, cfg(&["b", "w", "b", "w", "b"]), &[3, 1]);
    assert_eq!(check_reordering(&m, &g, &run, &swapped, &[(0, 1), (1, 0)]), Ok(true));
}

#[test]
fn extension_basics() {
    let id = |s: &State| Some(s.clone());
    let pi = vec![cfg(&["a", "b"]), cfg(&["b", "b"])];
    assert!(check_extension(&pi, &pi, &[0, 1], &id));
    assert!(!check_extension(&pi, &pi, &[1, 0], &id));
    assert!(!check_extension(&pi, &pi[..1], &[0, 1], &id));
    // Intermediate `m` states in between.
    let only_ab = |s: &State| (!s.is_sym("m")).then(|| s.clone());
    let long = vec![cfg(&["a", "b"]), cfg(&["m", "b"]), cfg(&["b", "b"])];
    assert!(check_extension(&long, &pi, &[0, 2], &only_ab));
    let bad = vec![cfg(&["a", "b"]), cfg(&["m", "a"]), cfg(&["b", "b"])];
    assert!(!check_extension(&bad, &pi, &[0, 2], &only_ab));
}

/// The compiled form of the run `a,x,x,b,b`: node 1 floods, then both
/// ends broadcast at once, then the last node broadcasts alone.
fn interleaved_ends() -> (crate::compile::CompiledWeakBroadcast, LabelledGraph, Run) {
    let wb = compile_weak_broadcast(&example1()).unwrap();
    let g = line(&["a", "x", "x", "b", "b"]);
    let c0: Configuration = g.labels().iter().map(|l| wb.initial_state(l).unwrap()).collect();
    // Node 4 signals before node 1 floods: they are not adjacent.
    let sels = [4, 1, 0, 1, 3, 2, 0, 1, 2, 3, 4, 0, 1, 2, 3, 4, 4, 3, 2, 1, 0, 0, 1, 2, 3, 4, 0, 1, 2, 3, 4];
    let run = replay(&wb, &g, c0, &sels);
    (wb, g, run)
}

#[test]
fn interleaved_ends_reorder_and_extract() {
    let (wb, g, run) = interleaved_ends();
    let phase = |s: &State| wb.phase(s);
    let r = reorder_three_phase(&wb, &g, &run, &phase).unwrap();
    assert_eq!(check_reordering(&wb, &g, &run, &r.run, &r.f), Ok(true));
    assert!(phase_shape_holds(&r.run, &phase, r.settled));
    // The flood of node 1 moves in front of the signal of node 4.
    assert_eq!(r.run.selections[0], vec![1]);
    let pc = phase_counts(&run, &phase).unwrap();
    let pc2 = phase_counts(&r.run, &phase).unwrap();
    for &(i, j) in &r.f {
        let v = run.selections[i][0];
        assert_eq!(pc2[j][v], pc[i][v]);
    }
    let ext = extract_weak_broadcast(&wb, &g, &run).unwrap();
    let base: Vec<Configuration> = ext.base.configurations.clone();
    assert_eq!(base[0], cfg(&["a", "x", "x", "b", "b"]));
    assert_eq!(base[1], cfg(&["a", "a", "x", "b", "b"]));
    assert_eq!(base[2], cfg(&["a", "a", "a", "a", "b"]));
    assert_eq!(
        ext.base.selections[1],
        ExtendedSelection::Broadcast { nodes: vec![0, 4], resolution: [(1, 0), (2, 0), (3, 4)].into_iter().collect() }
    );
    let embed = |s: &State| wb.base_state(s).cloned();
    assert!(check_extension(&ext.reordered.configurations, &base, &ext.g, &embed));
}

#[test]
fn never_broadcasting_run_projects_pointwise() {
    // Without initiators in reach every step is a neighbourhood step.
    let wb = compile_weak_broadcast(&example1()).unwrap();
    let g = line(&["x", "x", "x"]);
    let run = run_with_schedule(Arc::new(wb.clone()), &g, Schedule::random(3, Regime::Exclusive, crate::semantics::ScheduleFamily::Uniform, 1), 50).unwrap();
    let ext = extract_weak_broadcast(&wb, &g, &run).unwrap();
    assert!(ext.base.configurations.iter().all(|c| c == &cfg(&["x", "x", "x"])));
    assert!(ext.reordered.selections.is_empty());
}

#[test]
fn weak_broadcast_corpus_runs_are_sound() {
    let g = line(&["a", "x", "x", "b", "b"]);
    for i in 0..3 {
        let s = weak_broadcast_soundness(&example1(), &g, i, 7 + i, 400).unwrap();
        assert!(s.passed(), "{s:?}");
        assert!(s.base_steps > 3);
    }
    let g = generate(GraphKind::Cycle, &LabelSpec::positional(&["a", "b", "a", "b"]), None).unwrap();
    for seed in 0..5 {
        let wb = random_weak_broadcast(seed);
        let s = weak_broadcast_soundness(&wb, &g, seed, seed, 300).unwrap();
        assert!(s.passed(), "machine {seed}: {s:?}");
    }
}

#[test]
fn absence_detection_runs_are_sound() {
    let g = generate(GraphKind::Star, &LabelSpec::positional(&["a", "b", "a", "b"]), None).unwrap();
    for seed in 0..4 {
        let ad = random_absence_detection(seed);
        let s = absence_detection_soundness(&ad, 3, &g, seed, seed, 600).unwrap();
        assert!(s.passed(), "machine {seed}: {s:?}");
    }
    let g = line(&["a", "b", "a", "b", "a"]);
    let mut rounds = 0;
    for seed in 4..8 {
        let s = absence_detection_soundness(&random_absence_detection(seed), 2, &g, seed, seed, 1500).unwrap();
        assert!(s.passed(), "machine {seed}: {s:?}");
        rounds += s.base_steps;
    }
    assert!(rounds > 0);
}

#[test]
fn rendezvous_runs_pair_up() {
    let mut p = token();
    p.init = [("l".to_string(), sym("L")), ("z".to_string(), sym("0"))].into_iter().collect();
    let g = line(&["z", "l", "z", "z"]);
    for i in 0..5 {
        let s = rendezvous_soundness(&p, &g, i, i, 2000, true).unwrap();
        assert!(s.passed(), "{s:?}");
    }
    let rv = compile_rendezvous(&p).unwrap();
    let run = run_with_schedule(Arc::new(rv.clone()), &g, Schedule::random(4, Regime::Exclusive, crate::semantics::ScheduleFamily::Uniform, 5), 3000).unwrap();
    let ext = extract_rendezvous(&rv, &g, &run).unwrap();
    assert!(!ext.base.selections.is_empty());
    for sel in &ext.base.selections {
        let ExtendedSelection::Pair(u, v) = sel else { panic!("{sel:?}") };
        assert!(g.has_edge(*u, *v));
    }
}

#[test]
fn teleporting_token_fails_single_token() {
    let g = line(&["z", "z", "z"]);
    let configs = vec![cfg(&["L", "0", "0"]), cfg(&["0", "L", "0"]), cfg(&["L", "L", "0"]), cfg(&["0", "L", "0"])];
    let out = run_invariant_checks(&g, &configs, &Probe::token_protocol(), &[InvariantCheck::SingleToken]).unwrap();
    assert_eq!(out[0].first_violation, Some(2));
    let err = run_invariant_checks(&g, &configs, &Probe::token_protocol(), &[InvariantCheck::PhaseGap]);
    assert!(matches!(err, Err(VerifyError::InapplicableCheck(_))));
}

#[test]
fn silent_runs_pass_every_check() {
    let g = line(&["z", "z", "z"]);
    let wb = compile_weak_broadcast(&example1()).unwrap();
    let c = vec![wb.lift(sym("x")); 3];
    let configs = vec![c.clone(), c.clone(), c];
    let out = run_invariant_checks(&g, &configs, &Probe::weak_broadcast(&wb), &[InvariantCheck::PhaseGap]).unwrap();
    assert!(out[0].passed());
    let c = cfg(&["1", "-1", "0"]);
    let ints: Vec<Configuration> = vec![c.iter().map(|s| State::int(s.as_sym().unwrap().parse().unwrap())).collect(); 3];
    let probe = Probe::cancel(&crate::protocols::CancelMachine { k: 1, e: 2 });
    assert!(run_invariant_checks(&g, &ints, &probe, &[InvariantCheck::SumPreserved]).unwrap()[0].passed());
}

#[test]
fn phase_gap_catches_a_skip() {
    let g = line(&["z", "z", "z"]);
    let wb = compile_weak_broadcast(&example1()).unwrap();
    let idle = wb.lift(sym("x"));
    let signal = wrap_last(State::tagged("wb1", vec![sym("x"), State::int(0)]), wb_idle(sym("x")));
    let done = wrap_last(State::tagged("wb2", vec![sym("x"), State::int(0)]), wb_idle(sym("x")));
    let configs = vec![vec![idle.clone(); 3], vec![signal, idle.clone(), idle.clone()], vec![done, idle.clone(), idle]];
    let out = run_invariant_checks(&g, &configs, &Probe::weak_broadcast(&wb), &[InvariantCheck::PhaseGap]).unwrap();
    assert_eq!(out[0].first_violation, Some(2));
}

#[test]
fn distance_cycles_are_detected() {
    let ad = random_absence_detection(0);
    let m = compile_absence_detection(&ad, 2).unwrap();
    let g = generate(GraphKind::Cycle, &LabelSpec::positional(&["a", "a", "a", "a", "a"]), None).unwrap();
    // Labels 0,1,2,3,4 around a 5-cycle close a cycle modulo 5.
    let tree = |d: i64| wrap_last(State::tagged("ad1", vec![sym("s0"), sym("s0"), State::int(d)]), State::tagged("ad0", vec![sym("s0")]));
    let configs = vec![(0..5).map(tree).collect::<Vec<_>>()];
    let out = run_invariant_checks(&g, &configs, &Probe::absence_detection(&m), &[InvariantCheck::DistanceNoCycle]).unwrap();
    assert_eq!(out[0].first_violation, Some(0));
    let open = vec![vec![tree(0), tree(1), tree(2), tree(3), tree(3)]];
    let out = run_invariant_checks(&g, &open, &Probe::absence_detection(&m), &[InvariantCheck::DistanceNoCycle]).unwrap();
    assert!(out[0].passed());
}

#[test]
fn covering_lockstep_and_negative_control() {
    let m: MachineRef = Arc::new(flood());
    let g = generate(GraphKind::Cycle, &LabelSpec::positional(&["b", "w", "w"]), None).unwrap();
    let cover = make_cycle_cover(&g, 2).unwrap();
    assert!(check_covering_lockstep(m.clone(), &cover, 0));
    assert!(check_covering_lockstep(m.clone(), &cover, 100));
    for seed in 0..10 {
        let m = random_corpus_machine(seed, &["a", "b", "c"]);
        let g = generate(GraphKind::Cycle, &LabelSpec::positional(&["a", "b", "c"]), None).unwrap();
        assert!(check_covering_lockstep(m, &make_cycle_cover(&g, 3).unwrap(), 100));
    }
    // A 6-line mapped onto a 3-cycle is no covering; a degree-counting
    // machine tells the ends apart.
    let counting = TableMachine::new(
        2,
        vec![sym("x"), sym("end")],
        [("a".to_string(), sym("x"))].into_iter().collect(),
        Default::default(),
        Default::default(),
        vec![crate::machine::Rule {
            from: sym("x"),
            guards: vec![crate::machine::Guard { state: sym("x"), op: crate::machine::Cmp::Le, value: 1 }],
            to: sym("end"),
        }],
        false,
    )
    .unwrap();
    let target = generate(GraphKind::Cycle, &LabelSpec::positional(&["a", "a", "a"]), None).unwrap();
    let source = line(&["a"; 6]);
    let broken = crate::graph::CoveringMap { source, target, map: vec![0, 1, 2, 0, 1, 2] };
    assert!(!crate::graph::is_covering(&broken));
    assert!(!check_covering_lockstep(Arc::new(counting), &broken, 3));
}

#[test]
fn cutoff_examples() {
    let labels = |pairs: &[(&str, usize)]| pairs.iter().map(|(l, n)| (l.to_string(), *n)).collect::<BTreeMap<_, _>>();
    for seed in 0..10 {
        let m = random_corpus_machine(seed, &["a", "b"]);
        assert!(check_cutoff_indistinguishable(m.clone(), &labels(&[("a", 5), ("b", 1)]), 50));
        assert!(check_cutoff_indistinguishable(m, &labels(&[("a", 2), ("b", 1)]), 50));
    }
}

#[test]
fn splice_witness_for_counting_cycles() {
    let m = halting_pair();
    let g = generate(GraphKind::Cycle, &LabelSpec::positional(&["a", "a", "a"]), None).unwrap();
    let h = generate(GraphKind::Cycle, &LabelSpec::positional(&["b", "b", "b", "b"]), None).unwrap();
    let w = halting_splice_witness(m, &g, (0, 1), &h, (0, 1), 100).unwrap().unwrap();
    assert_eq!((w.accept_time, w.reject_time), (2, 3));
    assert_eq!(w.graph.node_count(), 5 * 3 + 7 * 4);
}

/// `a` nodes count to two and accept, `b` nodes count to three and reject;
/// a node only counts while its neighbours agree on the letter.
pub(crate) fn halting_pair() -> MachineRef {
    use crate::machine::{Cmp, Guard, Rule};
    let qs: Vec<State> = ["a0", "a1", "acc", "b0", "b1", "b2", "rej"].iter().map(|s| sym(s)).collect();
    let none_of = |xs: &[&str]| xs.iter().map(|x| Guard { state: sym(x), op: Cmp::Eq, value: 0 }).collect::<Vec<_>>();
    let bs = ["b0", "b1", "b2", "rej"];
    let as_ = ["a0", "a1", "acc"];
    let rules = vec![
        Rule { from: sym("a0"), guards: none_of(&bs), to: sym("a1") },
        Rule { from: sym("a1"), guards: none_of(&bs), to: sym("acc") },
        Rule { from: sym("b0"), guards: none_of(&as_), to: sym("b1") },
        Rule { from: sym("b1"), guards: none_of(&as_), to: sym("b2") },
        Rule { from: sym("b2"), guards: none_of(&as_), to: sym("rej") },
    ];
    Arc::new(
        TableMachine::new(
            1,
            qs,
            [("a".to_string(), sym("a0")), ("b".to_string(), sym("b0"))].into_iter().collect(),
            [sym("acc")].into_iter().collect(),
            [sym("rej")].into_iter().collect(),
            rules,
            true,
        )
        .unwrap(),
    )
}

#[test]
fn corpus_rows_pass() {
    use super::corpus::{run_corpus_instance, CorpusCheck};
    for check in CorpusCheck::all() {
        for i in 0..2 {
            let steps = if check == CorpusCheck::Invariant(InvariantCheck::LeadersNotAllBot) { 60 } else { 200 };
            let r = run_corpus_instance(check, i, 11, steps).unwrap();
            assert!(r.passed, "{} instance {i}: {:?}", check.name(), r);
        }
    }
    assert_eq!(CorpusCheck::parse("covering_lockstep"), Some(CorpusCheck::CoveringLockstep));
    assert_eq!(CorpusCheck::parse("nope"), None);
}
