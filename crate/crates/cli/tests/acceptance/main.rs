//! Acceptance runner: evaluates every criterion and prints one line each.

mod algebra;
mod corpus;
mod fixtures;
mod mining;
mod solver_oracle;

use std::process::ExitCode;
use std::thread;
use std::time::Instant;

type Check = fn() -> Result<String, String>;
type Outcome = (Result<String, String>, f64);

const CRITERIA: [(u32, &str, Check); 10] = [
    (
        1,
        "closest-approach fixture: one UTE001, fixed version clean",
        fixtures::closest_z,
    ),
    (
        2,
        "obstacle fixture: one UTE002 at the angle store, patch clean",
        fixtures::obstacle,
    ),
    (
        3,
        "time-sync fixture: one UTE003 through correct_time's argument",
        fixtures::time_sync,
    ),
    (
        4,
        "landing-target fixture: else-branch complement conflict, patch clean",
        fixtures::landing_target,
    ),
    (
        5,
        "mining rules agree with brute-force oracles",
        mining::oracle_agreement,
    ),
    (
        6,
        "approximate rule is monotone in eps",
        mining::eps_monotonicity,
    ),
    (7, "unit algebra laws on randomized cases", algebra::laws),
    (
        8,
        "solver agrees with exhaustive enumeration on small programs",
        solver_oracle::exhaustive,
    ),
    (
        9,
        "synthetic corpus checks quickly and deterministically",
        corpus::scale,
    ),
    (
        10,
        "shared-include bug is reported once with dedup, thrice without",
        corpus::dedup,
    ),
];

fn evaluate(check: Check) -> Outcome {
    let start = Instant::now();
    let r = std::panic::catch_unwind(check).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    (r, start.elapsed().as_secs_f64())
}

fn main() -> ExitCode {
    let filter: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let selected = CRITERIA
        .iter()
        .copied()
        .filter(|c| filter.is_empty() || filter.contains(&c.0));
    // The corpus criterion is timed, so it runs alone after the others.
    let (timed, rest): (Vec<(u32, &str, Check)>, Vec<_>) = selected.partition(|c| c.0 == 9);
    let mut results: Vec<(u32, &str, Outcome)> = thread::scope(|s| {
        let handles: Vec<_> = rest
            .iter()
            .map(|&(n, d, f)| (n, d, s.spawn(move || evaluate(f))))
            .collect();
        handles
            .into_iter()
            .map(|(n, d, h)| (n, d, h.join().expect("criterion thread")))
            .collect()
    });
    results.extend(timed.iter().map(|&(n, d, f)| (n, d, evaluate(f))));
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (n, desc, (r, secs)) in &results {
        match r {
            Ok(detail) => println!("criterion {n:>2}: PASS  {desc} [{detail}; {secs:.2}s]"),
            Err(why) => {
                failed += 1;
                println!("criterion {n:>2}: FAIL  {desc} [{why}; {secs:.2}s]");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

/// Fails with `msg` unless `cond` holds.
pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}
