use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use unitlint_core::deduction::TypeDatabase;
use unitlint_core::frontend::{canonicalize, load_unit};
use unitlint_core::inference::{
    check_program, dedup, seeds_from_db, CheckOptions, Code, Diagnostic, Seeds,
};
use unitlint_core::protocol::parse_protocol;

use crate::ensure;

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(rel)
}

fn read(p: &Path) -> Result<String, String> {
    std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))
}

/// Checks one fixture program with its directory's protocol and database,
/// returning the deduplicated diagnostics and the elapsed time.
pub fn check(dir: &str, file: &str) -> Result<(Vec<Diagnostic>, Duration), String> {
    let start = Instant::now();
    let protocol = parse_protocol(&read(&fixture(&format!("{dir}/protocol.xml")))?)
        .map_err(|e| e.to_string())?;
    let db = fixture(&format!("{dir}/db.json"));
    let seeds = if db.is_file() {
        seeds_from_db(&TypeDatabase::from_json(&read(&db)?).map_err(|e| e.to_string())?)
    } else {
        Seeds::new()
    };
    let program = load_unit(&fixture(&format!("{dir}/{file}"))).map_err(|e| e.to_string())?;
    let canon = canonicalize(&program).map_err(|e| e.render(&program.files))?;
    let diags = dedup(check_program(
        &program,
        &canon,
        &protocol,
        &seeds,
        &CheckOptions::default(),
    ));
    Ok((diags, start.elapsed()))
}

fn line_of(dir: &str, file: &str, needle: &str) -> Result<u32, String> {
    let text = read(&fixture(&format!("{dir}/{file}")))?;
    text.lines()
        .position(|l| l.contains(needle))
        .map(|i| i as u32 + 1)
        .ok_or_else(|| format!("`{needle}` not found in {file}"))
}

fn summary(d: &[Diagnostic]) -> String {
    d.iter()
        .map(|d| format!("{}:{} {}", d.line, d.col, d.code))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Buggy/fixed pair: exactly one diagnostic (of `code`, when given) on the
/// line holding `needle`, none in the fixed version, each under a second.
fn pair(
    dir: &str,
    buggy: &str,
    fixed: &str,
    code: Option<Code>,
    needle: &str,
) -> Result<(Diagnostic, String), String> {
    let (d, t1) = check(dir, buggy)?;
    ensure(d.len() == 1, || {
        format!("{buggy}: expected 1 diagnostic, got [{}]", summary(&d))
    })?;
    if let Some(code) = code {
        ensure(d[0].code == code, || {
            format!("{buggy}: expected {code}, got {}", d[0].code)
        })?;
    }
    let line = line_of(dir, buggy, needle)?;
    ensure(d[0].line == line, || {
        format!("{buggy}: expected line {line}, got {}", d[0].line)
    })?;
    let (f, t2) = check(dir, fixed)?;
    ensure(f.is_empty(), || {
        format!("{fixed}: expected no diagnostics, got [{}]", summary(&f))
    })?;
    let limit = Duration::from_secs(1);
    ensure(t1 < limit && t2 < limit, || {
        format!("too slow: {t1:?} / {t2:?}")
    })?;
    let detail = format!(
        "{} at line {line}, fixed clean, {:.1} ms",
        d[0].code,
        (t1 + t2).as_secs_f64() * 1e3
    );
    Ok((d.into_iter().next().unwrap(), detail))
}

pub fn closest_z() -> Result<String, String> {
    let (d, detail) = pair(
        "closest_z",
        "closest_z.ml4u",
        "closest_z_fixed.ml4u",
        Some(Code::Dimension),
        "return fabsf",
    )?;
    ensure(d.message.contains("cm vs m"), || {
        format!("unexpected message `{}`", d.message)
    })?;
    Ok(detail)
}

pub fn obstacle() -> Result<String, String> {
    pair(
        "obstacle",
        "obstacle.ml4u",
        "obstacle_patched.ml4u",
        Some(Code::Frame),
        "_angle = angle",
    )
    .map(|r| r.1)
}

pub fn time_sync() -> Result<String, String> {
    let (d, t) = check("time_sync", "time_sync.ml4u")?;
    ensure(d.len() == 1, || {
        format!("expected 1 diagnostic, got [{}]", summary(&d))
    })?;
    ensure(d[0].code == Code::Signature, || {
        format!("expected UTE003, got {}", d[0].code)
    })?;
    let hop = d[0].chain.iter().find(|h| {
        h.contains("ArgType(Corr::correct_time, 1)") && h.contains("(us, {TIME_BOOT, TIME_UNIX})")
    });
    ensure(hop.is_some(), || {
        format!("chain lacks the argument binding: {:?}", d[0].chain)
    })?;
    ensure(t < Duration::from_secs(1), || format!("too slow: {t:?}"))?;
    Ok(format!(
        "UTE003 at line {}, chain binds (us, {{TIME_BOOT, TIME_UNIX}})",
        d[0].line
    ))
}

pub fn landing_target() -> Result<String, String> {
    pair(
        "landing_target",
        "landing_target.ml4u",
        "landing_target_patched.ml4u",
        None,
        "handler.set_target(t)",
    )
    .map(|r| r.1)
}
