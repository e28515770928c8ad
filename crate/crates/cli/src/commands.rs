use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use unitlint_core::deduction::{build_type_db, TypeDatabase};
use unitlint_core::frontend::{canonicalize, load_unit, FrontendError};
use unitlint_core::inference::{
    self, seeds_from_db, CheckOptions, ConstraintSet, Diagnostic, Seeds,
};
use unitlint_core::interp::scenario::{default_qoi_decls, parse_qoi_decls, parse_scenario};
use unitlint_core::interp::trace::{parse_registry_json, registry_json, Trace};
use unitlint_core::interp::{enum_var_ids, interpret};
use unitlint_core::protocol::{parse_protocol, ProtocolModel};

use crate::config::{Config, Format};

pub struct CheckArgs {
    pub protocol: Option<PathBuf>,
    pub db: Option<PathBuf>,
    pub ignore: Vec<String>,
    pub format: Format,
    pub dedup: bool,
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn require(paths: &[&Path]) -> Result<(), String> {
    for p in paths {
        if !p.is_file() {
            return Err(format!("{}: no such file", p.display()));
        }
    }
    Ok(())
}

fn sidecar(trace: &Path, suffix: &str) -> PathBuf {
    let mut s = trace.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn frontend_error(path: &Path, e: &FrontendError) -> String {
    match e {
        FrontendError::Io { .. } => e.to_string(),
        _ => format!("{}:{e}", path.display()),
    }
}

pub fn run(program: &Path, scenario: &Path, out: &Path) -> Result<u8, String> {
    require(&[program, scenario])?;
    let scen =
        parse_scenario(&read(scenario)?).map_err(|e| format!("{}: {e}", scenario.display()))?;
    let prog = load_unit(program).map_err(|e| frontend_error(program, &e))?;
    let canon = canonicalize(&prog).map_err(|e| e.render(&prog.files))?;
    let trace = interpret(&prog, &canon, &scen).map_err(|e| e.to_string())?;
    write(out, &trace.to_csv())?;
    write(
        &sidecar(out, ".registry.json"),
        &registry_json(&canon.registry),
    )?;
    let enums: Vec<u32> = enum_var_ids(&canon).into_iter().collect();
    write(
        &sidecar(out, ".enums.json"),
        &serde_json::to_string(&enums).expect("ids serialize"),
    )?;
    Ok(0)
}

pub fn deduce(
    trace_path: &Path,
    qoi: Option<&Path>,
    out: Option<&Path>,
    eps_approx: Option<f64>,
    cfg: &Config,
) -> Result<u8, String> {
    let registry_path = sidecar(trace_path, ".registry.json");
    require(&[trace_path, &registry_path])?;
    if let Some(q) = qoi {
        require(&[q])?;
    }
    let mut mining = cfg.mining.clone().unwrap_or_default();
    if let Some(e) = eps_approx {
        mining.eps_approx = e;
    }
    mining.validate().map_err(|e| e.to_string())?;
    let trace = Trace::read(read(trace_path)?.as_bytes())
        .map_err(|e| format!("{}: {e}", trace_path.display()))?;
    let names = parse_registry_json(&read(&registry_path)?)
        .map_err(|e| format!("{}: {e}", registry_path.display()))?;
    let enums_path = sidecar(trace_path, ".enums.json");
    let enum_ids: BTreeSet<u32> = if enums_path.is_file() {
        serde_json::from_str(&read(&enums_path)?)
            .map_err(|e| format!("{}: {e}", enums_path.display()))?
    } else {
        BTreeSet::new()
    };
    let decls = match qoi {
        Some(q) => parse_qoi_decls(&read(q)?).map_err(|e| format!("{}: {e}", q.display()))?,
        None => default_qoi_decls(),
    };
    let db = build_type_db(&trace, &names, &enum_ids, &decls, &mining);
    let json = db.to_json();
    match out {
        Some(p) => write(p, &format!("{json}\n"))?,
        None => println!("{json}"),
    }
    Ok(0)
}

struct Inputs {
    protocol: ProtocolModel,
    seeds: Seeds,
    opts: CheckOptions,
}

fn inputs(programs: &[PathBuf], args: &CheckArgs, cfg: &Config) -> Result<Inputs, String> {
    let mut paths: Vec<&Path> = programs.iter().map(PathBuf::as_path).collect();
    paths.extend(args.protocol.as_deref());
    paths.extend(args.db.as_deref());
    require(&paths)?;
    let protocol = match &args.protocol {
        Some(p) => parse_protocol(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?,
        None => ProtocolModel::default(),
    };
    let seeds = match &args.db {
        Some(p) => seeds_from_db(
            &TypeDatabase::from_json(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?,
        ),
        None => Seeds::new(),
    };
    let mut opts = CheckOptions::default();
    opts.ignored.extend(cfg.ignore_fns.iter().cloned());
    opts.ignored.extend(args.ignore.iter().cloned());
    opts.conversions = cfg.conversion_units()?;
    Ok(Inputs {
        protocol,
        seeds,
        opts,
    })
}

/// Generates constraints for each translation unit on its own thread;
/// results come back in input order.
fn per_unit<T, F>(programs: &[PathBuf], work: F) -> Result<Vec<T>, String>
where
    T: Send,
    F: Fn(&Path) -> Result<T, String> + Sync,
{
    let workers = thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(programs.len().max(1));
    let chunk = programs.len().div_ceil(workers).max(1);
    let results: Vec<Result<Vec<T>, String>> = thread::scope(|s| {
        let handles: Vec<_> = programs
            .chunks(chunk)
            .map(|files| {
                s.spawn(|| {
                    files
                        .iter()
                        .map(|p| work(p))
                        .collect::<Result<Vec<T>, String>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(programs.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

fn constraints(path: &Path, inputs: &Inputs) -> Result<ConstraintSet, String> {
    let prog = load_unit(path).map_err(|e| frontend_error(path, &e))?;
    let canon = canonicalize(&prog).map_err(|e| e.render(&prog.files))?;
    Ok(inference::generate_constraints(
        &prog,
        &canon,
        &inputs.protocol,
        &inputs.seeds,
        &inputs.opts,
    ))
}

pub fn check(programs: &[PathBuf], args: &CheckArgs, cfg: &Config) -> Result<u8, String> {
    let inputs = inputs(programs, args, cfg)?;
    let per_file = per_unit(programs, |p| {
        Ok(inference::solve(&constraints(p, &inputs)?).diagnostics)
    })?;
    let all: Vec<Diagnostic> = per_file.into_iter().flatten().collect();
    let diags = if args.dedup {
        inference::dedup(all)
    } else {
        let mut all = all;
        inference::sort(&mut all);
        all
    };
    match args.format {
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&diags).expect("diagnostics serialize")
        ),
        Format::Human => {
            for d in &diags {
                print!("{}", d.explain());
            }
            let mut by_code: BTreeMap<String, usize> = BTreeMap::new();
            for d in &diags {
                *by_code.entry(d.code.to_string()).or_default() += 1;
            }
            if diags.is_empty() {
                println!("no unit type errors in {} file(s)", programs.len());
            } else {
                let parts: Vec<String> = by_code.iter().map(|(c, n)| format!("{n} {c}")).collect();
                println!("{} diagnostic(s): {}", diags.len(), parts.join(", "));
            }
        }
    }
    Ok(if diags.is_empty() { 0 } else { 1 })
}

pub fn dump(programs: &[PathBuf], args: &CheckArgs, cfg: &Config) -> Result<u8, String> {
    let inputs = inputs(programs, args, cfg)?;
    let dumps = per_unit(programs, |p| Ok(constraints(p, &inputs)?.dump()))?;
    for d in dumps {
        print!("{d}");
    }
    Ok(0)
}
