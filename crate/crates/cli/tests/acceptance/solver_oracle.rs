//! Exhaustive small-instance check of the solver against direct evaluation
//! in the unit algebra.
//!
//! Instances are straight-line programs over the globals `a`..`d`, each
//! bound in the type database to one of five candidate types. Programs are
//! enumerated up to renaming: variables are introduced in first-use order,
//! and every assignment of candidate types to the used variables is tried.
//! The universe is every program of up to two statements over up to four
//! variables, plus every three-statement program over up to three.
//! Subtraction is left out since it generates the same constraints as
//! addition.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

use unitlint_core::frontend::{canonicalize, parse_source, Canonical, Program};
use unitlint_core::inference::{generate_constraints, seeds_from_units, solve, CheckOptions};
use unitlint_core::protocol::ProtocolModel;
use unitlint_core::units::{add, div, mul, parse_frame, parse_unit_string, subtype};
use unitlint_core::UnitType;

use crate::ensure;

/// `(statements, variables)` bounds of the enumerated universe.
const SHAPES: [(usize, usize); 3] = [(1, 4), (2, 4), (3, 3)];
const VARS: [&str; 4] = ["a", "b", "c", "d"];
const CANDIDATES: [(&str, &str); 5] = [
    ("m", "BODY"),
    ("m", "{BODY, GLOBAL}"),
    ("cm", "Any"),
    ("s", "Any"),
    ("m/s", "Any"),
];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Copy,
    Add,
    Mul,
    Div,
}

const OPS: [Op; 4] = [Op::Copy, Op::Add, Op::Mul, Op::Div];

#[derive(Debug, Clone, Copy)]
struct Stmt {
    op: Op,
    x: usize,
    y: usize,
    z: usize,
}

impl Stmt {
    fn source(&self) -> String {
        let (x, y, z) = (VARS[self.x], VARS[self.y], VARS[self.z]);
        match self.op {
            Op::Copy => format!("{x} = {y};"),
            Op::Add => format!("{x} = {y} + {z};"),
            Op::Mul => format!("{x} = {y} * {z};"),
            Op::Div => format!("{x} = {y} / {z};"),
        }
    }

    /// Direct evaluation: the right-hand side has a type and it is a
    /// subtype of the target's.
    fn holds(&self, types: &[UnitType]) -> bool {
        let (x, y, z) = (&types[self.x], &types[self.y], &types[self.z]);
        let rhs = match self.op {
            Op::Copy => Ok(y.clone()),
            Op::Add => add(y, z),
            Op::Mul => mul(y, z),
            Op::Div => div(y, z),
        };
        rhs.is_ok_and(|r| subtype(&r, x))
    }
}

/// Variable tuples of `arity` distinct variables where any variable not yet
/// in use is the next one in order; paired with the new in-use count.
fn tuples(arity: usize, used: usize, max_vars: usize) -> Vec<(Vec<usize>, usize)> {
    let mut out = vec![(Vec::new(), used)];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|(vars, used)| {
                (0..=used.min(max_vars - 1))
                    .filter(|v| !vars.contains(v))
                    .map(|v| {
                        let mut next = vars.clone();
                        next.push(v);
                        (next, used.max(v + 1))
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
    }
    out
}

/// Programs of exactly `n` statements over at most `max_vars` variables,
/// canonical under renaming, with pairwise distinct variables within each
/// statement.
fn programs(n: usize, max_vars: usize) -> Vec<(Vec<Stmt>, usize)> {
    let mut out: Vec<(Vec<Stmt>, usize)> = vec![(Vec::new(), 0)];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|(prefix, used)| {
                OPS.iter().flat_map(move |&op| {
                    let arity = if op == Op::Copy { 2 } else { 3 };
                    let prefix = prefix.clone();
                    tuples(arity, used, max_vars)
                        .into_iter()
                        .map(move |(v, used)| {
                            let mut p = prefix.clone();
                            p.push(Stmt {
                                op,
                                x: v[0],
                                y: v[1],
                                z: v.get(2).copied().unwrap_or(0),
                            });
                            (p, used)
                        })
                })
            })
            .collect();
    }
    out
}

fn source(stmts: &[Stmt], used: usize) -> String {
    let mut s: String = VARS[..used]
        .iter()
        .map(|v| format!("float {v};\n"))
        .collect();
    s.push_str("void f() {\n");
    for st in stmts {
        s.push_str("    ");
        s.push_str(&st.source());
        s.push('\n');
    }
    s.push_str("}\n");
    s
}

struct Instance {
    program: Program,
    canon: Canonical,
}

fn candidates() -> Vec<UnitType> {
    CANDIDATES
        .iter()
        .map(|(u, f)| {
            parse_unit_string(u)
                .expect("unit")
                .with_frame(parse_frame(f).expect("frame"))
        })
        .collect()
}

/// Solver verdict for every candidate assignment of one program, compared
/// against direct evaluation. Returns the number of instances and how many
/// were satisfiable.
fn check_program(
    stmts: &[Stmt],
    used: usize,
    cands: &[UnitType],
) -> Result<(usize, usize), String> {
    let text = source(stmts, used);
    let program = parse_source("oracle.ml4u", &text).map_err(|e| e.to_string())?;
    let canon = canonicalize(&program).map_err(|e| e.render(&program.files))?;
    let inst = Instance { program, canon };
    let protocol = ProtocolModel::default();
    let opts = CheckOptions::default();
    let total = cands.len().pow(used as u32);
    let mut sat = 0;
    let mut types = vec![cands[0].clone(); VARS.len()];
    for code in 0..total {
        let mut rest = code;
        let mut units = BTreeMap::new();
        for (i, name) in VARS[..used].iter().enumerate() {
            types[i] = cands[rest % cands.len()].clone();
            rest /= cands.len();
            units.insert(name.to_string(), types[i].clone());
        }
        let want = stmts.iter().all(|s| s.holds(&types));
        let set = generate_constraints(
            &inst.program,
            &inst.canon,
            &protocol,
            &seeds_from_units(&units),
            &opts,
        );
        let diags = solve(&set).diagnostics;
        let got = diags.is_empty();
        ensure(want == got, || {
            let binding: Vec<String> = units.iter().map(|(n, u)| format!("{n}: {u}")).collect();
            let first = diags
                .first()
                .map(|d| format!("; solver says {}: {}", d.code, d.message))
                .unwrap_or_default();
            format!(
                "disagreement on\n{text}with {}: oracle {want}, solver {got}{first}",
                binding.join(", ")
            )
        })?;
        sat += want as usize;
    }
    Ok((total, sat))
}

fn run() -> Result<(usize, usize, usize), String> {
    let cands = candidates();
    let all: Vec<(Vec<Stmt>, usize)> = SHAPES.iter().flat_map(|&(n, v)| programs(n, v)).collect();
    let next = AtomicUsize::new(0);
    let workers = thread::available_parallelism().map_or(1, |n| n.get());
    let results: Vec<Result<(usize, usize), String>> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let (mut n, mut sat) = (0, 0);
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some((stmts, used)) = all.get(i) else {
                            break;
                        };
                        let (a, b) = check_program(stmts, *used, &cands)?;
                        n += a;
                        sat += b;
                    }
                    Ok((n, sat))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("oracle worker"))
            .collect()
    });
    let (mut n, mut sat) = (0, 0);
    for r in results {
        let (a, b) = r?;
        n += a;
        sat += b;
    }
    Ok((all.len(), n, sat))
}

pub fn exhaustive() -> Result<String, String> {
    let start = std::time::Instant::now();
    let (programs, instances, sat) = run()?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!(
        "{programs} programs, {instances} instances ({sat} satisfiable), all agree"
    ))
}
