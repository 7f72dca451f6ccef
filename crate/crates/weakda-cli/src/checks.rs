//! Verification corpora and single-run checks.

use std::process::ExitCode;

use rayon::prelude::*;
use weakda::semantics::run_with_schedule;
use weakda::verify::corpus::{
    absence_detection_soundness, rendezvous_soundness, run_corpus_instance, weak_broadcast_soundness, CorpusCheck,
    CorpusRow,
};
use weakda::verify::run_invariant_checks;
use weakda::LabelledGraph;

use crate::resolve::{Resolved, Source};
use crate::{usage, workers, CliError};

pub const CORPUS_HEADER: &str = "check\tinstance\tresult\tstep";

fn pool() -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers()?)
        .build()
        .map_err(|e| CliError::Io(format!("worker pool: {e}")))
}

pub fn run_pooled<T: Send, R: Send>(items: Vec<T>, f: impl Fn(T) -> R + Send + Sync) -> Result<Vec<R>, CliError> {
    Ok(pool()?.install(|| items.into_par_iter().map(f).collect()))
}

/// Runs the corpus of `check` (or of every check for `all`). Exit status
/// is 1 if a row fails and 3 if a row errors.
pub fn corpus_report(check: &str, instances: u64, steps: usize, seed: u64) -> Result<(String, ExitCode), CliError> {
    let checks = if check == "all" {
        CorpusCheck::all()
    } else {
        vec![CorpusCheck::parse(check).ok_or_else(|| {
            let names: Vec<&str> = CorpusCheck::all().iter().map(|c| c.name()).collect();
            usage(format!("unknown check `{check}`; expected all or one of {}", names.join(", ")))
        })?]
    };
    let jobs: Vec<(CorpusCheck, u64)> = checks.iter().flat_map(|&c| (0..instances).map(move |i| (c, i))).collect();
    let rows = run_pooled(jobs, |(c, i)| (c, i, run_corpus_instance(c, i, seed, steps)))?;
    let mut out = format!("{CORPUS_HEADER}\n");
    let (mut failed, mut errored) = (false, false);
    for (c, i, r) in rows {
        match r {
            Ok(CorpusRow { passed, step, .. }) => {
                failed |= !passed;
                let step = step.map_or("-".to_string(), |s| s.to_string());
                out.push_str(&format!("{}\t{i}\t{}\t{step}\n", c.name(), if passed { "pass" } else { "fail" }));
            }
            Err(e) => {
                errored = true;
                eprintln!("error: {} instance {i}: {}", c.name(), CliError::from(e).describe());
                out.push_str(&format!("{}\t{i}\terror\t-\n", c.name()));
            }
        }
    }
    let status = if errored {
        ExitCode::from(3)
    } else if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    };
    Ok((out, status))
}

/// Checks one sampled run of a resolved machine. Returns whether the check
/// passed and the first violating step.
pub fn check_resolved(
    r: &Resolved,
    g: &LabelledGraph,
    check: &str,
    seed: u64,
    steps: usize,
) -> Result<(bool, Option<usize>), CliError> {
    let check = CorpusCheck::parse(check).ok_or_else(|| usage(format!("unknown check `{check}`")))?;
    match check {
        CorpusCheck::Invariant(c) => {
            let schedule = weakda::semantics::Schedule::random(
                g.node_count(),
                weakda::semantics::Regime::Exclusive,
                weakda::semantics::ScheduleFamily::Uniform,
                seed,
            );
            let run = run_with_schedule(r.machine.clone(), g, schedule, steps)?;
            let out = run_invariant_checks(g, &run.configurations, &r.probe()?, &[c])?;
            Ok((out[0].passed(), out[0].first_violation))
        }
        CorpusCheck::Reordering | CorpusCheck::Extension => {
            let s = match &r.source {
                Source::WeakBroadcast(wb) => weak_broadcast_soundness(wb, g, 0, seed, steps)?,
                Source::AbsenceDetection(ad, k) => absence_detection_soundness(ad, *k, g, 0, seed, steps)?,
                Source::Population(p) => rendezvous_soundness(p, g, 0, seed, steps, false)?,
                _ => return Err(weakda::verify::VerifyError::InapplicableCheck(check.name().into()).into()),
            };
            let ok = if check == CorpusCheck::Reordering { s.reordering && s.shape } else { s.extension && s.legal };
            Ok((ok, None))
        }
        CorpusCheck::CoveringLockstep | CorpusCheck::Cutoff => {
            Err(weakda::verify::VerifyError::InapplicableCheck(format!("{} runs on generated corpora only", check.name())).into())
        }
    }
}

