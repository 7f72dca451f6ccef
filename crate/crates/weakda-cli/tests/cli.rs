use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use weakda::formats::{parse_descriptor, parse_trace, Descriptor};
use weakda::graph::{enumerate_labelled, label_count};
use weakda::semantics::{run_with_schedule, successor, Regime, Schedule, ScheduleFamily};
use weakda::{LabelledGraph, Machine, MachineRef, State};

fn weakda(args: &[&str], dir: &Path, workers: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weakda"))
        .args(args)
        .current_dir(dir)
        .env("DA_WORKERS", workers)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

const TINY_WB: &str = r#"{"states": ["x", "y"], "init": {"a": "y", "*": "x"},
    "rules": [{"from": "x", "guards": [{"state": "y", "op": "ge", "value": 1}], "to": "y"}],
    "broadcasts": [{"from": "y", "to": "x", "responses": {"x": "y"}}]}"#;

#[test]
fn majority_verdict_on_a_line() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["verdict", "--protocol", "majority", "--coeffs", "1,-1", "--degree-bound", "3", "--graph", "line a,a,b", "--mode", "adversarial"];
    assert_eq!(ok(&weakda(&args, dir.path(), "1")), "ACCEPT\n");
}

#[test]
fn usage_and_semantic_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = weakda(&["verdict", "--frobnicate"], dir.path(), "1");
    assert_eq!(out.status.code(), Some(2));
    let out = weakda(&["nonsense"], dir.path(), "1");
    assert_eq!(out.status.code(), Some(2));
    let args = ["verdict", "--protocol", "majority", "--coeffs", "1,-1", "--degree-bound", "2", "--graph", "star:a,a,b,b", "--mode", "adversarial"];
    let out = weakda(&args, dir.path(), "1");
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("DegreeBoundExceeded"));
    let out = weakda(&["run", "--protocol", "flood", "--graph", "line:a,b,b", "--scheduler", "exclusive", "--max-steps", "5"], dir.path(), "1");
    assert_eq!(out.status.code(), Some(2), "randomized runs need a seed");
    let out = weakda(&["verify", "--check", "nope", "--seed", "1"], dir.path(), "1");
    assert_eq!(out.status.code(), Some(2));
    let out = weakda(&["verdict", "--protocol", "flood", "--graph", "line:a,b", "--mode", "adversarial"], dir.path(), "1");
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("InfeasibleSpec"));
    let out = weakda(&["verify", "--check", "phase_gap", "--instances", "1", "--seed", "1"], dir.path(), "zero");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.json"), ok(&weakda(&["protocol", "--protocol", "flood", "--label", "b"], dir.path(), "1"))).unwrap();
    fs::write(dir.path().join("g.txt"), ok(&weakda(&["generate", "--kind", "line", "--labels", "w,b,w,w"], dir.path(), "1"))).unwrap();
    let args = ["run", "--machine", "m.json", "--graph", "g.txt", "--scheduler", "synchronous", "--max-steps", "10", "--trace", "out.tsv"];
    assert_eq!(ok(&weakda(&args, dir.path(), "1")), "ACCEPT\t10\n");
    let text = fs::read_to_string(dir.path().join("out.tsv")).unwrap();
    assert!(text.starts_with("step\tselection\tchanged\n"));
    let rows = parse_trace(&text).unwrap();
    assert!(rows.len() <= 10);
    assert_eq!(rows[0].changed, vec![(0, "seen".to_string()), (2, "seen".to_string())]);
    assert!(rows.iter().all(|r| r.selection.is_none()));
}

#[test]
fn exclusive_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["run", "--protocol", "token", "--graph", "cycle:l,x,x,x", "--scheduler", "exclusive", "--seed", "9", "--max-steps", "300", "--trace", "t.tsv"];
    ok(&weakda(&args, dir.path(), "1"));
    let a = fs::read(dir.path().join("t.tsv")).unwrap();
    ok(&weakda(&args, dir.path(), "4"));
    assert_eq!(a, fs::read(dir.path().join("t.tsv")).unwrap());
    let rows = parse_trace(&String::from_utf8(a).unwrap()).unwrap();
    assert_eq!(rows.len(), 300);
    assert!(rows.iter().all(|r| r.selection.as_ref().is_some_and(|s| s.len() == 1)));
}

#[test]
fn generated_graphs_parse() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&weakda(&["generate", "--kind", "random3", "--labels", "a=4,b=3", "--seed", "2"], dir.path(), "1"));
    let (_, g) = LabelledGraph::parse(&text).unwrap();
    assert_eq!(g.node_count(), 7);
    assert!(g.max_degree() <= 3);
    assert_eq!(label_count(&g).get("a"), Some(&4));
    let out = weakda(&["generate", "--kind", "random3", "--labels", "a=4"], dir.path(), "1");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn protocol_descriptors_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["protocol", "--protocol", "token"],
        vec!["protocol", "--protocol", "threshold", "--k", "3"],
        vec!["protocol", "--protocol", "flood", "--label", "b"],
    ] {
        let text = ok(&weakda(&args, dir.path(), "1"));
        fs::write(dir.path().join("p.json"), &text).unwrap();
        let d = parse_descriptor(&text).unwrap();
        let again = weakda::formats::to_json(&weakda::formats::descriptor_to_file(&d).unwrap());
        assert_eq!(again, text, "{args:?}");
    }
    let out = weakda(&["protocol", "--protocol", "majority", "--coeffs", "1,-1", "--degree-bound", "3"], dir.path(), "1");
    assert_eq!(out.status.code(), Some(3));
}

/// Successor equivalence of a compiled machine and its parsed JSON form
/// on sampled runs, matching states by printed name.
fn equivalent_on_samples(m: MachineRef, parsed: &dyn Machine, graphs: &[LabelledGraph]) {
    let named = |c: &[State]| c.iter().map(|s| State::sym(&s.to_string())).collect::<Vec<_>>();
    for (i, g) in graphs.iter().enumerate() {
        let sched = Schedule::random(g.node_count(), Regime::Exclusive, ScheduleFamily::Uniform, i as u64);
        let run = run_with_schedule(m.clone(), g, sched, 300).unwrap();
        let mut c = named(&run.configurations[0]);
        for v in g.nodes() {
            assert_eq!(Some(c[v].clone()), parsed.initial_state(g.label(v)));
        }
        for (k, sel) in run.selections.iter().enumerate() {
            c = successor(parsed, g, &c, sel);
            assert_eq!(c, named(&run.configurations[k + 1]));
            for q in &c {
                let orig = run.configurations[k + 1].iter().find(|s| State::sym(&s.to_string()) == *q).unwrap();
                assert_eq!(parsed.is_accepting(q), m.is_accepting(orig));
                assert_eq!(parsed.is_rejecting(q), m.is_rejecting(orig));
            }
        }
    }
}

#[test]
fn compiled_machines_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("wb.json"), TINY_WB).unwrap();
    let text = ok(&weakda(&["compile", "--input", "wb.json"], dir.path(), "1"));
    let Descriptor::Plain(parsed) = parse_descriptor(&text).unwrap() else { panic!("compile writes plain machines") };
    let Descriptor::WeakBroadcast(wb) = parse_descriptor(TINY_WB).unwrap() else { panic!() };
    let m: MachineRef = std::sync::Arc::new(weakda::compile::compile_weak_broadcast(&wb).unwrap());
    let graphs: Vec<LabelledGraph> = enumerate_labelled(4, 3, &["a", "b"], |_| true).into_iter().step_by(7).collect();
    assert!(graphs.len() >= 3);
    equivalent_on_samples(m, &parsed, &graphs);
    let again = weakda::formats::to_json(&weakda::formats::machine_to_file(&parsed).unwrap());
    assert_eq!(again, text);

    fs::write(dir.path().join("t.json"), ok(&weakda(&["protocol", "--protocol", "threshold", "--k", "2"], dir.path(), "1"))).unwrap();
    let out = weakda(&["compile", "--input", "t.json"], dir.path(), "1");
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("TooLargeToSerialize"));
    let ad = r#"{"states": ["x", "y"], "init": {"*": "x"}, "detections": [{"from": "x", "support": ["x"], "to": "y"}]}"#;
    fs::write(dir.path().join("ad.json"), ad).unwrap();
    assert_eq!(weakda(&["compile", "--input", "ad.json"], dir.path(), "1").status.code(), Some(2));
}

#[test]
fn verify_reports_rows() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["verify", "--check", "phase_gap", "--instances", "4", "--steps", "300", "--seed", "7"];
    let one = ok(&weakda(&args, dir.path(), "1"));
    let lines: Vec<&str> = one.lines().collect();
    assert_eq!(lines[0], "check\tinstance\tresult\tstep");
    assert_eq!(lines.len(), 5);
    assert!(lines[1..].iter().enumerate().all(|(i, l)| *l == format!("phase_gap\t{i}\tpass\t-")));
    assert_eq!(ok(&weakda(&args, dir.path(), "3")), one);
}

fn experiment(dir: &Path, config: &str, workers: &str) -> Output {
    fs::write(dir.join("cfg.json"), config).unwrap();
    weakda(&["experiment", "--config", "cfg.json", "--omit-wall-time"], dir, workers)
}

#[test]
fn experiment_basics() {
    let dir = tempfile::tempdir().unwrap();
    let out = experiment(dir.path(), r#"{"instances": []}"#, "1");
    assert_eq!(ok(&out), "id\tresult\tsteps\twall_ms\terror\n");
    let dup = r#"{"instances": [
        {"id": 1, "protocol": "flood", "graph": "line:a,b,b", "mode": "verdict-adversarial"},
        {"id": 1, "protocol": "flood", "graph": "line:a,b,b", "mode": "verdict-adversarial"}]}"#;
    assert_eq!(experiment(dir.path(), dup, "1").status.code(), Some(2));
    let no_seed = r#"{"instances": [{"id": 1, "protocol": "flood", "graph": "line:a,b,b", "mode": "run",
        "scheduler": {"regime": "exclusive", "max_steps": 10}}]}"#;
    assert_eq!(experiment(dir.path(), no_seed, "1").status.code(), Some(2));
    let failing = r#"{"instances": [
        {"id": "ok", "protocol": "flood", "graph": "line:a,b,b", "mode": "verdict-adversarial"},
        {"id": "bad", "protocol": "majority", "coeffs": [1, -1], "degree_bound": 2, "graph": "star:a,a,b,b", "mode": "verdict-adversarial"}]}"#;
    let out = experiment(dir.path(), failing, "1");
    assert_eq!(out.status.code(), Some(3));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert!(rows[1].starts_with("bad\tERROR\t-\t-\tDegreeBoundExceeded"));
    assert!(rows[2].starts_with("ok\tACCEPT\t"));
}

#[test]
fn majority_corpus_matches_the_sign_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let graphs: Vec<LabelledGraph> = (3..=5).flat_map(|n| enumerate_labelled(n, 3, &["a", "b"], |_| true)).step_by(9).collect();
    let mut instances = Vec::new();
    for (i, g) in graphs.iter().enumerate() {
        fs::write(dir.path().join(format!("g{i}.txt")), g.to_text(&format!("g{i}"))).unwrap();
        instances.push(format!(
            r#"{{"id": {i}, "protocol": "majority", "coeffs": [1, -1], "degree_bound": 3, "graph": "g{i}.txt", "mode": "verdict-adversarial"}}"#
        ));
    }
    let config = format!(r#"{{"instances": [{}]}}"#, instances.join(",\n"));
    let one = ok(&experiment(dir.path(), &config, "1"));
    let many = ok(&experiment(dir.path(), &config, "4"));
    assert_eq!(one, many);
    let rows: Vec<&str> = one.lines().skip(1).collect();
    assert_eq!(rows.len(), graphs.len());
    for (row, g) in rows.iter().zip(&graphs) {
        let count = label_count(g);
        let want = if count.get("a").unwrap_or(&0) >= count.get("b").unwrap_or(&0) { "ACCEPT" } else { "REJECT" };
        assert_eq!(row.split('\t').nth(1), Some(want), "{row}");
    }
}
