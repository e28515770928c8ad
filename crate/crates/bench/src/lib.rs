//! Synthetic inputs shared by the benchmarks.

use std::fmt::Write;

pub const PROTOCOL: &str = r#"<mavlink>
  <messages>
    <msg id="1" name="LOCATION"><field name="z" units="cm">altitude</field></msg>
    <msg id="2" name="VELOCITY"><field name="z" units="m/s">vertical speed</field></msg>
    <msg id="3" name="TIMING"><field name="dt" units="s">horizon</field></msg>
  </messages>
</mavlink>"#;

/// A translation unit with `functions` step functions; every `bug_every`-th
/// one mixes centimeters with meters.
pub fn program(functions: usize, bug_every: usize) -> String {
    let mut s = String::from(
        "struct location_t { float z; };\nstruct velocity_t { float z; };\nstruct timing_t { float dt; };\n",
    );
    for i in 0..functions {
        let _ = writeln!(s, "float alt_{i};");
    }
    for i in 0..functions {
        let pos = if bug_every > 0 && i % bug_every == 0 {
            "l.z"
        } else {
            "l.z / 100.0"
        };
        let _ = write!(
            s,
            "float step_{i}(location_t l, velocity_t v, timing_t tm) {{
    float pos = {pos};
    float next = pos + v.z * tm.dt;
    if (tm.dt > 0.5) {{
        next = next - v.z * tm.dt;
    }}
    alt_{i} = next;
    return next;
}}
"
        );
    }
    s.push_str("void tick(location_t l, velocity_t v, timing_t tm) {\n");
    for i in 0..functions {
        let _ = writeln!(s, "    step_{i}(l, v, tm);");
    }
    s.push_str("}\n");
    s
}

pub type Series = Vec<(u64, f64)>;

/// A sampled signal and a scaled, slightly noisy copy of it, `n` points at
/// 100 ms spacing.
pub fn series_pair(n: usize, scale: f64) -> (Series, Series) {
    let qoi: Series = (0..n)
        .map(|i| (i as u64 * 100, 50.0 + 20.0 * (i as f64 / 15.0).sin()))
        .collect();
    let var = qoi
        .iter()
        .enumerate()
        .map(|(i, &(t, v))| {
            (
                t + 7,
                v * scale * (1.0 + 0.001 * ((i * 37 % 11) as f64 - 5.0) / 5.0),
            )
        })
        .collect();
    (var, qoi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use unitlint_core::frontend::{canonicalize, parse_source};
    use unitlint_core::inference::{check_program, CheckOptions, Seeds};
    use unitlint_core::protocol::parse_protocol;

    #[test]
    fn program_has_expected_bugs() {
        let p = parse_source("b.ml4u", &program(12, 4)).unwrap();
        let c = canonicalize(&p).unwrap();
        let proto = parse_protocol(PROTOCOL).unwrap();
        let d = check_program(&p, &c, &proto, &Seeds::new(), &CheckOptions::default());
        assert_eq!(d.len(), 3);
    }

    #[test]
    fn series_are_aligned() {
        let (v, q) = series_pair(50, 100.0);
        assert_eq!(v.len(), q.len());
        assert!((v[3].1 / q[3].1 - 100.0).abs() < 0.2);
    }
}
