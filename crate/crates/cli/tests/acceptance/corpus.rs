use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ensure;
use crate::fixtures::fixture;

const FILES: usize = 60;
const FUNCTIONS: usize = 8;

struct Corpus {
    files: Vec<PathBuf>,
    lines: usize,
    /// `(file name, line)` of every injected centimeter/meter mix-up.
    bugs: BTreeSet<(String, u32)>,
}

/// Appends one step function; returns the line of the injected bug, if any.
fn step_function(out: &mut Vec<String>, rng: &mut ChaCha8Rng, f: usize, i: usize) -> Option<u32> {
    let buggy = rng.gen_ratio(1, 6);
    let threshold = rng.gen_range(1..9);
    out.push(format!(
        "float step_{f}_{i}(location_t l, velocity_t v, timing_t tm) {{"
    ));
    out.push(
        if buggy {
            "    float pos = l.z;"
        } else {
            "    float pos = l.z / 100.0;"
        }
        .into(),
    );
    out.push("    float rate = v.z;".into());
    out.push("    float dt = tm.dt;".into());
    out.push("    float next = pos + rate * dt;".into());
    let bug_line = buggy.then_some(out.len() as u32);
    out.push(format!("    if (dt > 0.{threshold}) {{"));
    out.push("        next = next - rate * dt;".into());
    out.push("    }".into());
    out.push(format!("    alt_{f}_{i} = next;"));
    out.push("    return next;".into());
    out.push("}".into());
    out.push(String::new());
    bug_line
}

fn generate(dir: &Path) -> Result<Corpus, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
    let mut corpus = Corpus {
        files: Vec::new(),
        lines: 0,
        bugs: BTreeSet::new(),
    };
    for f in 0..FILES {
        let name = format!("unit_{f:02}.ml4u");
        let mut src: Vec<String> = vec![
            format!("// generated unit {f}"),
            "struct location_t { float z; };".into(),
            "struct velocity_t { float z; };".into(),
            "struct timing_t { float dt; };".into(),
            String::new(),
        ];
        src.extend((0..FUNCTIONS).map(|i| format!("float alt_{f}_{i};")));
        src.push(String::new());
        for i in 0..FUNCTIONS {
            if let Some(l) = step_function(&mut src, &mut rng, f, i) {
                corpus.bugs.insert((name.clone(), l));
            }
        }
        src.push(format!(
            "void tick_{f}(location_t l, velocity_t v, timing_t tm) {{"
        ));
        src.extend((0..FUNCTIONS).map(|i| format!("    step_{f}_{i}(l, v, tm);")));
        src.push("}".into());
        corpus.lines += src.len();
        let path = dir.join(&name);
        std::fs::write(&path, src.join("\n") + "\n").map_err(|e| e.to_string())?;
        corpus.files.push(path);
    }
    Ok(corpus)
}

fn check(files: &[PathBuf], extra: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_unitlint"))
        .arg("check")
        .args(files)
        .args(extra)
        .args(["--format", "json"])
        .env_remove("UNITLINT_CONFIG")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(matches!(out.status.code(), Some(0 | 1)), || {
        format!(
            "check exited with {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        )
    })?;
    Ok(out.stdout)
}

fn reported(json: &[u8]) -> Result<Vec<(String, u32, String)>, String> {
    let v: serde_json::Value = serde_json::from_slice(json).map_err(|e| e.to_string())?;
    let arr = v.as_array().ok_or("diagnostics are not a list")?;
    Ok(arr
        .iter()
        .map(|d| {
            let file = d["file"].as_str().unwrap_or_default();
            let name = Path::new(file)
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            (
                name,
                d["line"].as_u64().unwrap_or(0) as u32,
                d["code"].as_str().unwrap_or_default().to_string(),
            )
        })
        .collect())
}

pub fn scale() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = generate(dir.path())?;
    ensure(corpus.lines >= 5_000 && corpus.files.len() >= 50, || {
        format!(
            "corpus too small: {} lines in {} files",
            corpus.lines,
            corpus.files.len()
        )
    })?;
    let proto = fixture("closest_z/protocol.xml").display().to_string();
    let args = ["--protocol", proto.as_str()];
    let mut times = Vec::new();
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let start = Instant::now();
        outputs.push(check(&corpus.files, &args)?);
        times.push(start.elapsed().as_secs_f64());
    }
    ensure(times.iter().all(|&t| t < 60.0), || {
        format!("too slow: {times:?}")
    })?;
    ensure(outputs[0] == outputs[1], || {
        "diagnostics differ between runs".into()
    })?;
    let diags = reported(&outputs[0])?;
    let at: BTreeSet<(String, u32)> = diags.iter().map(|d| (d.0.clone(), d.1)).collect();
    ensure(
        at == corpus.bugs && diags.iter().all(|d| d.2 == "UTE001"),
        || {
            format!(
                "expected UTE001 at exactly the {} injected bugs, got {diags:?}",
                corpus.bugs.len()
            )
        },
    )?;
    Ok(format!(
        "{} lines in {} files, {} diagnostics, {:.2}s and {:.2}s, identical",
        corpus.lines,
        corpus.files.len(),
        diags.len(),
        times[0],
        times[1]
    ))
}

pub fn dedup() -> Result<String, String> {
    let files: Vec<PathBuf> = ["a", "b", "c"]
        .iter()
        .map(|u| fixture(&format!("shared_include/user_{u}.ml4u")))
        .collect();
    let proto = fixture("shared_include/protocol.xml").display().to_string();
    let on = reported(&check(&files, &["--protocol", &proto])?)?;
    let off = reported(&check(&files, &["--protocol", &proto, "--no-dedup"])?)?;
    ensure(on.len() == 1 && off.len() == 3, || {
        format!("dedup on: {}, off: {}", on.len(), off.len())
    })?;
    ensure(off.iter().all(|d| d == &on[0]), || {
        format!("differing reports: {off:?}")
    })?;
    Ok(format!(
        "{} at shared.ml4u:{}: 1 with dedup, 3 without",
        on[0].2, on[0].1
    ))
}
