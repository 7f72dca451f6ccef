//! End-to-end acceptance checks. Prints one line per criterion and exits
//! non-zero if any hard criterion fails. Statistical criteria that miss
//! unanimity are reported as FLAG.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weakda::abstraction::{verdict_abstract_wb, Shape};
use weakda::engine::{Consensus, Engine};
use weakda::extended::{add_broadcasts, PopulationProtocol, TableBroadcasts, WeakBroadcastMachine};
use weakda::graph::{
    enumerate_labelled, generate, label_count, make_cycle_cover, GraphKind, LabelCount, LabelSpec,
};
use weakda::machine::{Cmp, Guard, Rule, TableMachine};
use weakda::protocols::{
    majority_daf, nl_pipeline, parity_sbp, threshold_daf, token_protocol, CancelMachine, ThresholdSpec,
};
use weakda::semantics::{
    random_fair_schedule, run_with_schedule, successor, verdict_adversarial, Outcome, Regime, Schedule,
    ScheduleFamily,
};
use weakda::state::cutoff_multiset;
use weakda::verify::corpus::{
    absence_detection_soundness, random_absence_detection, random_corpus_machine, random_protocol,
    random_weak_broadcast, rendezvous_soundness, weak_broadcast_soundness, Soundness,
};
use weakda::verify::{check_covering_lockstep, check_cutoff_indistinguishable, halting_splice_witness, reset_initiator_counts};
use weakda::verify::{run_invariant_checks, InvariantCheck, Probe};
use weakda::{LabelledGraph, MachineRef, State};

enum Status {
    Pass(String),
    Fail(String),
    Flag(String),
}

type Checked = Result<String, String>;

fn sym(s: &str) -> State {
    State::sym(s)
}

fn graph(kind: GraphKind, labels: &[&str], seed: Option<u64>) -> LabelledGraph {
    generate(kind, &LabelSpec::positional(labels), seed).unwrap()
}

fn counts_of(g: &LabelledGraph) -> (usize, usize) {
    let c = label_count(g);
    (c.get("a").copied().unwrap_or(0), c.get("b").copied().unwrap_or(0))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Runs until the consensus has held for `hold` steps; returns it with
/// the step at which it was reached.
fn settle(e: &mut Engine, g: &LabelledGraph, seed: u64, hold: usize, max: usize) -> (Consensus, usize) {
    let mut c = e.initial(g).unwrap();
    let mut cons = e.consensus(&c);
    let mut since = 0;
    for (i, sel) in random_fair_schedule(g, Regime::Exclusive, seed).take(max).enumerate() {
        c = e.step(g, &c, &sel);
        let k = e.consensus(&c);
        if k != cons {
            cons = k;
            since = i + 1;
        } else if cons != Consensus::Mixed && i + 1 - since >= hold {
            break;
        }
    }
    (cons, since)
}

fn majority() -> Checked {
    let m = majority_daf(&ThresholdSpec::new(vec![1, -1], 3).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let graphs: Vec<LabelledGraph> = (3..=6).flat_map(|n| enumerate_labelled(n, 3, &["a", "b"], |_| true)).collect();
    let mut e = Engine::new(m.full.clone());
    let mut slowest = 0;
    for g in &graphs {
        let (a, b) = counts_of(g);
        let want = if a >= b { Outcome::Accept } else { Outcome::Reject };
        let got = verdict_adversarial(m.full.clone(), g, 1_000_000).map_err(|e| e.to_string())?.outcome;
        ensure(got == want, || format!("verdict {got} on {:?}", g.labels()))?;
        let want = if a >= b { Consensus::Accepting } else { Consensus::Rejecting };
        for seed in 0..20 {
            let (cons, at) = settle(&mut e, g, seed, 20_000, 400_000);
            ensure(cons == want, || format!("seed {seed} ends {cons:?} on {:?}", g.labels()))?;
            slowest = slowest.max(at);
        }
    }
    Ok(format!("{} graphs, 20 runs each, slowest consensus at step {slowest}", graphs.len()))
}

fn threshold() -> Checked {
    let mut cases = 0;
    for k in 1..=3u32 {
        let wb = threshold_daf(k).map_err(|e| e.to_string())?;
        for x in 0..=6usize {
            let labels: LabelCount = [("x".to_string(), x), ("y".to_string(), 3)].into_iter().collect();
            let want = if x >= k as usize { Outcome::Accept } else { Outcome::Reject };
            let mut shapes = vec![(Shape::Clique, None), (Shape::Star, Some("y"))];
            if x > 0 {
                shapes.push((Shape::Star, Some("x")));
            }
            for (shape, centre) in shapes {
                let v = verdict_abstract_wb(&wb, shape, &labels, centre, 1_000_000).map_err(|e| e.to_string())?;
                ensure(v.outcome == want, || format!("K={k} x={x} {shape:?} centre {centre:?}: {}", v.outcome))?;
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} star and clique instances"))
}

/// Synchronous clique run from a label count, as state counts cut at `k`.
fn clique_counts(m: &MachineRef, labels: &LabelCount, t: usize, k: usize) -> Vec<BTreeMap<State, usize>> {
    let names: Vec<&str> = labels.iter().flat_map(|(l, &n)| std::iter::repeat_n(l.as_str(), n)).collect();
    let g = graph(GraphKind::Clique, &names, None);
    let all: Vec<usize> = g.nodes().collect();
    let mut c: Vec<State> = names.iter().map(|l| m.initial_state(l).unwrap()).collect();
    let mut out = Vec::new();
    for step in 0..=t {
        let mut counts = BTreeMap::new();
        for q in &c {
            *counts.entry(q.clone()).or_insert(0) += 1;
        }
        out.push(cutoff_multiset(&counts, k));
        if step < t {
            c = successor(m.as_ref(), &g, &c, &all);
        }
    }
    out
}

fn cutoff() -> Checked {
    let mut checked = 0;
    for seed in 0..20u64 {
        let m = random_corpus_machine(1000 + seed, &["a", "b", "c"]);
        let k = m.beta() as usize + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut done = 0;
        while done < 10 {
            let labels: LabelCount = ["a", "b", "c"].iter().map(|l| (l.to_string(), rng.gen_range(0..=7))).collect();
            let small = cutoff_multiset(&labels, k);
            if small.values().sum::<usize>() < 3 {
                continue;
            }
            ensure(check_cutoff_indistinguishable(m.clone(), &labels, 200), || format!("machine {seed}, counts {labels:?}"))?;
            ensure(clique_counts(&m, &labels, 200, k) == clique_counts(&m, &small, 200, k), || {
                format!("direct simulation differs: machine {seed}, counts {labels:?}")
            })?;
            done += 1;
            checked += 1;
        }
    }
    Ok(format!("{checked} label counts over 20 machines, T = 200"))
}

fn covering() -> Checked {
    let letters = ["a", "b", "c"];
    let mut checked = 0;
    for seed in 0..20u64 {
        let m = random_corpus_machine(2000 + seed, &letters);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..5 {
            let n = rng.gen_range(3..=6);
            let labels: Vec<&str> = (0..n).map(|_| letters[rng.gen_range(0..3)]).collect();
            let g = graph(GraphKind::Cycle, &labels, None);
            for lambda in [2, 3] {
                let cover = make_cycle_cover(&g, lambda).map_err(|e| e.to_string())?;
                ensure(check_covering_lockstep(m.clone(), &cover, 200), || format!("machine {seed}, {labels:?}, λ={lambda}"))?;
                let (h, all_h) = (&cover.source, cover.source.nodes().collect::<Vec<_>>());
                let all_g: Vec<usize> = g.nodes().collect();
                let mut ch: Vec<State> = h.labels().iter().map(|l| m.initial_state(l).unwrap()).collect();
                let mut cg: Vec<State> = g.labels().iter().map(|l| m.initial_state(l).unwrap()).collect();
                for _ in 0..=200 {
                    ensure(cover.map.iter().enumerate().all(|(v, &fv)| ch[v] == cg[fv]), || {
                        format!("direct lockstep fails: machine {seed}, {labels:?}, λ={lambda}")
                    })?;
                    ch = successor(m.as_ref(), h, &ch, &all_h);
                    cg = successor(m.as_ref(), &g, &cg, &all_g);
                }
                let vg = verdict_adversarial(m.clone(), &g, 1_000_000).map_err(|e| e.to_string())?.outcome;
                let vh = verdict_adversarial(m.clone(), h, 1_000_000).map_err(|e| e.to_string())?.outcome;
                ensure(vg == vh, || format!("verdicts {vg} and {vh}: machine {seed}, {labels:?}, λ={lambda}"))?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} covers, T = 200"))
}

/// Example 1: a top broadcast from `a` recruits `x` nodes; a bottom
/// broadcast from `b` turns `b` into `a` and `a` into `x`.
fn example1() -> WeakBroadcastMachine {
    let base = TableMachine::new(
        1,
        vec![sym("a"), sym("b"), sym("x")],
        ["a", "b", "x"].iter().map(|l| (l.to_string(), sym(l))).collect(),
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

fn tally(s: &Soundness, what: &str) -> Result<usize, String> {
    ensure(s.passed(), || format!("{what}: {}", s.failure().unwrap_or_default()))?;
    Ok(s.base_steps)
}

fn weak_broadcast() -> Checked {
    let mut machines = vec![(example1(), vec!["a", "x", "x", "b", "b", "x"])];
    machines.extend((0..9).map(|seed| (random_weak_broadcast(seed), vec!["a", "b", "a", "b", "b"])));
    let mut base = 0;
    for (j, (wb, labels)) in machines.iter().enumerate() {
        for i in 0..10u64 {
            let g = graph(GraphKind::RandomBounded(3), labels, Some(100 * j as u64 + i));
            let s = weak_broadcast_soundness(wb, &g, i, 17 * i + j as u64, 600).map_err(|e| e.to_string())?;
            base += tally(&s, &format!("machine {j}, run {i}"))?;
        }
    }
    Ok(format!("100 runs of 600 steps, {base} extended steps extracted"))
}

fn absence_detection() -> Checked {
    let mut base = 0;
    for seed in 0..5u64 {
        let ad = random_absence_detection(seed);
        for i in 0..10u64 {
            let g = graph(GraphKind::RandomBounded(3), &["a", "b", "a", "b", "a", "b"], Some(50 * seed + i));
            let s = absence_detection_soundness(&ad, 3, &g, i, 31 * i + seed, 1500).map_err(|e| e.to_string())?;
            base += tally(&s, &format!("machine {seed}, run {i}"))?;
        }
    }
    Ok(format!("50 runs of 1500 steps, {base} detection rounds extracted"))
}

fn rendezvous() -> Checked {
    let mut token = token_protocol();
    token.init = [("l".to_string(), sym("L")), ("*".to_string(), sym("0"))].into_iter().collect();
    let mut protocols: Vec<(PopulationProtocol, bool, Vec<&str>)> = vec![(token, true, vec!["z", "l", "z", "z", "z"])];
    protocols.extend((0..3).map(|seed| (random_protocol(seed), false, vec!["a", "b", "a", "b"])));
    let mut pairs = 0;
    for (j, (p, single, labels)) in protocols.iter().enumerate() {
        for i in 0..10u64 {
            let g = graph(GraphKind::RandomBounded(3), labels, Some(70 * j as u64 + i));
            let s = rendezvous_soundness(p, &g, i, 13 * i + j as u64, 3000, *single).map_err(|e| e.to_string())?;
            pairs += tally(&s, &format!("protocol {j}, run {i}"))?;
        }
    }
    Ok(format!("40 runs of 3000 steps, {pairs} rendezvous extracted"))
}

fn pipeline() -> Result<Status, String> {
    let p = nl_pipeline(&parity_sbp()).map_err(|e| e.to_string())?;
    let graphs: Vec<LabelledGraph> = (3..=5)
        .flat_map(|n| enumerate_labelled(n, n - 1, &["a", "b"], |l| l.iter().filter(|x| x.as_str() == "a").count() <= 3))
        .collect();
    let (mut runs, mut agree, mut undecided) = (0, 0, 0);
    let mut first_miss = None;
    for g in &graphs {
        let (a, _) = counts_of(g);
        for seed in 0..50u64 {
            let sched = Schedule::random(g.node_count(), Regime::Exclusive, ScheduleFamily::Uniform, seed);
            let run = run_with_schedule(p.full.clone(), g, sched, 10_000).map_err(|e| e.to_string())?;
            let resets: Vec<usize> = reset_initiator_counts(&p, g, &run).map_err(|e| e.to_string())?;
            let observed: Vec<usize> = resets.iter().copied().enumerate().filter(|&(i, n)| i == 0 || n > 0).map(|e| e.1).collect();
            ensure(observed.windows(2).all(|w| w[1] < w[0]), || format!("token counts {observed:?} on {:?}", g.labels()))?;
            let last = run.last();
            let ok = if a % 2 == 1 {
                last.iter().all(|q| p.full.is_accepting(q))
            } else {
                last.iter().all(|q| p.full.is_rejecting(q))
            };
            runs += 1;
            if ok {
                agree += 1;
            } else {
                if !last.iter().all(|q| p.full.is_accepting(q)) && !last.iter().all(|q| p.full.is_rejecting(q)) {
                    undecided += 1;
                }
                first_miss.get_or_insert_with(|| format!("{:?} seed {seed}", g.labels()));
            }
        }
    }
    let summary = format!("{} graphs, {agree}/{runs} runs match parity after 10^4 steps", graphs.len());
    Ok(if agree == runs {
        Status::Pass(summary)
    } else {
        Status::Flag(format!(
            "{summary}; {undecided} without consensus, first miss {}",
            first_miss.unwrap_or_default()
        ))
    })
}

fn cancel() -> Checked {
    let (k, e) = (3u32, 6i64);
    let m: MachineRef = Arc::new(CancelMachine { k, e });
    let probe = Probe::cancel(&CancelMachine { k, e });
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut done = 0;
    let mut slowest = 0;
    while done < 50 {
        let n = rng.gen_range(3..=10);
        let xs: Vec<i64> = (0..n).map(|_| rng.gen_range(-e..=e)).collect();
        let sum: i64 = xs.iter().sum();
        if sum >= 0 {
            continue;
        }
        let names: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
        let labels: Vec<&str> = names.iter().map(String::as_str).collect();
        let g = graph(GraphKind::RandomBounded(3), &labels, Some(done));
        let budget = 10 * n * e as usize;
        let sched = Schedule::random(n, Regime::Synchronous, ScheduleFamily::Uniform, 0);
        let run = run_with_schedule(m.clone(), &g, sched, budget).map_err(|e| e.to_string())?;
        let values: Vec<Vec<i64>> = run.configurations.iter().map(|c| c.iter().map(|q| q.as_int().unwrap()).collect()).collect();
        ensure(values.iter().all(|c| c.iter().sum::<i64>() == sum), || format!("sum drifts on graph {done}"))?;
        let checks = run_invariant_checks(&g, &run.configurations, &probe, &[InvariantCheck::SumPreserved]).map_err(|e| e.to_string())?;
        ensure(checks[0].passed(), || format!("sum_preserved fails on graph {done}"))?;
        let terminal = |c: &Vec<i64>| c.iter().all(|&x| (-e..=-1).contains(&x)) || c.iter().all(|&x| x.abs() <= k as i64);
        let at = values.iter().position(terminal).ok_or_else(|| format!("graph {done} ({xs:?}) not terminal within {budget} steps"))?;
        slowest = slowest.max(at);
        done += 1;
    }
    Ok(format!("50 graphs, slowest terminal shape at step {slowest}"))
}

/// `a` nodes count to two and accept, `b` nodes count to three and reject;
/// a node counts only while no neighbour carries the other letter.
fn halting_pair() -> MachineRef {
    let none_of = |xs: &[&str]| xs.iter().map(|x| Guard { state: sym(x), op: Cmp::Eq, value: 0 }).collect::<Vec<_>>();
    let (bs, as_) = (["b0", "b1", "b2", "rej"], ["a0", "a1", "acc"]);
    let rule = |from: &str, to: &str, other: &[&str]| Rule { from: sym(from), guards: none_of(other), to: sym(to) };
    let m = TableMachine::new(
        1,
        ["a0", "a1", "acc", "b0", "b1", "b2", "rej"].iter().map(|s| sym(s)).collect(),
        [("a".to_string(), sym("a0")), ("b".to_string(), sym("b0"))].into_iter().collect(),
        [sym("acc")].into_iter().collect(),
        [sym("rej")].into_iter().collect(),
        vec![
            rule("a0", "a1", &bs),
            rule("a1", "acc", &bs),
            rule("b0", "b1", &as_),
            rule("b1", "b2", &as_),
            rule("b2", "rej", &as_),
        ],
        true,
    )
    .unwrap();
    Arc::new(m)
}

fn halting() -> Checked {
    let m = halting_pair();
    let g = graph(GraphKind::Cycle, &["a", "a", "a"], None);
    let h = graph(GraphKind::Cycle, &["b", "b", "b", "b"], None);
    let w = halting_splice_witness(m.clone(), &g, (0, 1), &h, (0, 1), 1000)
        .map_err(|e| e.to_string())?
        .ok_or("no mixed configuration on the spliced graph")?;
    let all: Vec<usize> = w.graph.nodes().collect();
    let mut c: Vec<State> = w.graph.labels().iter().map(|l| m.initial_state(l).unwrap()).collect();
    for _ in 0..w.step {
        c = successor(m.as_ref(), &w.graph, &c, &all);
    }
    ensure(c.iter().any(|q| m.is_accepting(q)) && c.iter().any(|q| m.is_rejecting(q)), || {
        format!("step {} is not mixed on replay", w.step)
    })?;
    Ok(format!("{} nodes, halting times {} and {}, mixed at step {}", w.graph.node_count(), w.accept_time, w.reject_time, w.step))
}

fn hard(f: fn() -> Checked) -> Status {
    match f() {
        Ok(s) => Status::Pass(s),
        Err(s) => Status::Fail(s),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, Box<dyn Fn() -> Status>); 10] = [
        ("majority, adversarial, degree <= 3", Box::new(|| hard(majority))),
        ("threshold on stars and cliques", Box::new(|| hard(threshold))),
        ("cutoff indistinguishability", Box::new(|| hard(cutoff))),
        ("covering lockstep", Box::new(|| hard(covering))),
        ("weak-broadcast compilation", Box::new(|| hard(weak_broadcast))),
        ("absence-detection compilation", Box::new(|| hard(absence_detection))),
        ("rendezvous compilation", Box::new(|| hard(rendezvous))),
        ("parity pipeline", Box::new(|| pipeline().unwrap_or_else(Status::Fail))),
        ("cancel convergence", Box::new(|| hard(cancel))),
        ("halting splice witness", Box::new(|| hard(halting))),
    ];
    let mut failed = false;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let status = run();
        let secs = t.elapsed().as_secs_f64();
        let (tag, detail) = match status {
            Status::Pass(d) => ("PASS", d),
            Status::Flag(d) => ("FLAG", d),
            Status::Fail(d) => {
                failed = true;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag} {name}: {detail} ({secs:.1}s)", i + 1);
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
