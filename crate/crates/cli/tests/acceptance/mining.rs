use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unitlint_core::deduction::{
    build_type_db, conversion_table, mine_approximate, mine_eventually, mine_linear, MiningConfig,
    Rule,
};
use unitlint_core::frontend::{canonicalize, parse_source};
use unitlint_core::interp::scenario::{parse_qoi_decls, parse_scenario};
use unitlint_core::interp::{enum_var_ids, interpret};

use crate::ensure;

type Series = Vec<(u64, f64)>;

const CASES: usize = 120;

fn rel(v: f64, q: f64) -> f64 {
    (v - q).abs() / q.abs()
}

/// Approximate equality oracle: every sample pair, matched by index, is
/// within eps.
fn approx_oracle(var: &[f64], qoi: &[f64], eps: f64) -> bool {
    var.len() >= 2 && var.iter().zip(qoi).all(|(&v, &q)| rel(v, q) < eps)
}

/// Samples `qoi` once a second and `var` near each sample with jitter well
/// inside the alignment window.
fn jittered(rng: &mut ChaCha8Rng, vals: &[f64]) -> Series {
    vals.iter()
        .enumerate()
        .map(|(i, &v)| (1_000 + i as u64 * 1_000 + rng.gen_range(0..=150), v))
        .collect()
}

fn on_grid(vals: &[f64]) -> Series {
    vals.iter()
        .enumerate()
        .map(|(i, &v)| (1_000 + i as u64 * 1_000, v))
        .collect()
}

fn approximate_cases(rng: &mut ChaCha8Rng, cfg: &MiningConfig) -> Result<(usize, usize), String> {
    let eps = cfg.eps_approx;
    let mut positives = 0;
    for case in 0..CASES {
        let n = rng.gen_range(2..40);
        let q: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(50.0..500.0) * if rng.gen_bool(0.2) { -1.0 } else { 1.0 })
            .collect();
        let violations = if rng.gen_bool(0.5) {
            0
        } else {
            rng.gen_range(1..=n.min(3))
        };
        let mut v: Vec<f64> = q
            .iter()
            .map(|&x| x * (1.0 + rng.gen_range(-0.8..0.8) * eps))
            .collect();
        for _ in 0..violations {
            let i = rng.gen_range(0..n);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            v[i] = q[i] * (1.0 + sign * rng.gen_range(1.5..4.0) * eps);
        }
        let want = approx_oracle(&v, &q, eps);
        let got = mine_approximate(&jittered(rng, &v), &on_grid(&q), cfg).is_some();
        ensure(want == got, || {
            format!("approximate case {case}: oracle {want}, miner {got}")
        })?;
        positives += want as usize;
    }
    Ok((CASES, positives))
}

/// Linear oracle: some table factor `c` puts every pair within eps of
/// `v = c * q`.
fn linear_oracle(var: &[f64], qoi: &[f64], eps: f64) -> bool {
    var.len() >= 3
        && conversion_table()
            .iter()
            .any(|&(c, _)| var.iter().zip(qoi).all(|(&v, &q)| rel(v, c * q) < eps))
}

fn far_from_table(f: f64) -> bool {
    conversion_table().iter().all(|&(c, _)| rel(f, c) > 0.2)
}

fn linear_cases(rng: &mut ChaCha8Rng, cfg: &MiningConfig) -> Result<(usize, usize), String> {
    let table = conversion_table();
    let mut positives = 0;
    for case in 0..CASES {
        let n = rng.gen_range(5..40);
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(10.0..1000.0)).collect();
        let v: Vec<f64> = match case % 4 {
            0 | 1 => {
                let c = table[rng.gen_range(0..table.len())].0;
                q.iter()
                    .map(|&x| c * x * (1.0 + rng.gen_range(-0.003..0.003)))
                    .collect()
            }
            2 => {
                let f = loop {
                    let f = 10f64.powf(rng.gen_range(-3.0..4.0));
                    if far_from_table(f) {
                        break f;
                    }
                };
                q.iter().map(|&x| f * x).collect()
            }
            _ if rng.gen_bool(0.5) => {
                let c = table[rng.gen_range(0..table.len())].0;
                let offset = 0.5 * c * q.iter().sum::<f64>() / n as f64;
                q.iter().map(|&x| c * x + offset).collect()
            }
            _ => (0..n).map(|_| rng.gen_range(10.0..1000.0)).collect(),
        };
        let want = linear_oracle(&v, &q, cfg.eps_approx);
        let got = mine_linear(&jittered(rng, &v), &on_grid(&q), cfg).is_some();
        ensure(want == got, || {
            format!(
                "linear case {case} (kind {}): oracle {want}, miner {got}",
                case % 4
            )
        })?;
        positives += want as usize;
    }
    Ok((CASES, positives))
}

/// Piecewise-constant signal: `(start_ms, value)` segments.
struct Steps {
    segments: Vec<(u64, f64)>,
    end_ms: u64,
}

impl Steps {
    fn sample(&self, period: u64, offset: u64) -> Series {
        let mut out = Vec::new();
        let mut t = offset;
        while t < self.end_ms {
            let v = self
                .segments
                .iter()
                .rev()
                .find(|s| s.0 <= t)
                .map_or(self.segments[0].1, |s| s.1);
            out.push((t, v));
            t += period;
        }
        out
    }
}

/// Fraction of `held`'s segments whose value `target` attains at or after
/// the segment's first sample.
fn attained_fraction(held: &Steps, held_samples: &Series, target: &Series, eps: f64) -> f64 {
    let hits = held
        .segments
        .iter()
        .filter(|&&(start, v)| {
            let first = held_samples
                .iter()
                .find(|s| s.0 >= start)
                .map_or(u64::MAX, |s| s.0);
            target.iter().any(|&(t, q)| t >= first && rel(q, v) < eps)
        })
        .count();
    hits as f64 / held.segments.len() as f64
}

fn eventually_oracle(var: (&Steps, &Series), qoi: (&Steps, &Series), cfg: &MiningConfig) -> bool {
    let min = cfg.eventually_min_confidence;
    attained_fraction(var.0, var.1, qoi.1, cfg.eps_approx) >= min
        || attained_fraction(qoi.0, qoi.1, var.1, cfg.eps_approx) >= min
}

fn eventually_cases(rng: &mut ChaCha8Rng, cfg: &MiningConfig) -> Result<(usize, usize), String> {
    let mut positives = 0;
    for case in 0..CASES {
        let k = rng.gen_range(2..=10);
        let base = rng.gen_range(5.0..50.0);
        let mut powers: Vec<i32> = (0..k as i32).collect();
        powers.shuffle(rng);
        // Held values are 1.5^j apart, so no two are within eps of each other.
        let values: Vec<f64> = powers.iter().map(|&p| base * 1.5f64.powi(p)).collect();
        let len = rng.gen_range(30..60) * 100;
        let delay = rng.gen_range(5..25) * 100;
        let misses = if case % 2 == 0 {
            0
        } else {
            rng.gen_range(1..=k.min(3))
        };
        let missed: BTreeSet<usize> = (0..misses).map(|_| rng.gen_range(0..k)).collect();

        let var = Steps {
            segments: values
                .iter()
                .enumerate()
                .map(|(j, &v)| (j as u64 * len, v))
                .collect(),
            end_ms: k as u64 * len,
        };
        let mut qoi_segments = vec![(0, base * 0.6)];
        for (j, &v) in values.iter().enumerate() {
            let reached = if missed.contains(&j) { v * 1.22 } else { v };
            qoi_segments.push((j as u64 * len + delay, reached));
        }
        let qoi = Steps {
            segments: qoi_segments,
            end_ms: k as u64 * len + delay,
        };
        let var_s = var.sample(500, 0);
        let qoi_s = qoi.sample(100, 50);

        let want = eventually_oracle((&var, &var_s), (&qoi, &qoi_s), cfg);
        let got = mine_eventually(&var_s, &qoi_s, cfg).is_some();
        ensure(want == got, || {
            format!("eventually case {case}: oracle {want}, miner {got}")
        })?;
        positives += want as usize;
    }
    Ok((CASES, positives))
}

const PROPHECY_PROGRAM: &str = "float target_altitude;\n\
void set_target(float a) {\n    target_altitude = a;\n}\n";

const PROPHECY_SCENARIO: &str = r#"
duration_s = 40

[qoi.alt]
unit = "m"
frame = "MAV_FRAME_GLOBAL"
csv = [[0, 0.0], [4000, 10.0], [10000, 10.0], [14000, 25.0], [20000, 25.0],
       [24000, 40.0], [30000, 40.0], [34000, 15.0], [40000, 15.0]]

[[event]]
t_ms = 0
call = "set_target"
args = [10.0]

[[event]]
t_ms = 10000
call = "set_target"
args = [25.0]

[[event]]
t_ms = 20000
call = "set_target"
args = [40.0]

[[event]]
t_ms = 30000
call = "set_target"
args = [15.0]
"#;

/// A commanded target is only ever reached later by the altitude signal.
fn prophecy() -> Result<String, String> {
    let program = parse_source("prophecy.ml4u", PROPHECY_PROGRAM).map_err(|e| e.to_string())?;
    let canon = canonicalize(&program).map_err(|e| e.render(&program.files))?;
    let scenario = parse_scenario(PROPHECY_SCENARIO).map_err(|e| e.to_string())?;
    let trace = interpret(&program, &canon, &scenario).map_err(|e| e.to_string())?;
    let names: BTreeMap<u32, String> = canon
        .registry
        .iter()
        .map(|(id, n)| (id, n.to_string()))
        .collect();
    let decls = parse_qoi_decls(PROPHECY_SCENARIO).map_err(|e| e.to_string())?;
    let db = build_type_db(
        &trace,
        &names,
        &enum_var_ids(&canon),
        &decls,
        &MiningConfig::default(),
    );
    let entry = db
        .entries
        .values()
        .find(|e| e.canonical_name == "target_altitude")
        .ok_or("target_altitude missing from the database")?;
    ensure(
        entry.unit == decls["alt"] && entry.rule == Rule::Eventually && entry.qoi == "alt",
        || {
            format!(
                "target_altitude mined as {} via {:?} from {}",
                entry.unit, entry.rule, entry.qoi
            )
        },
    )?;
    Ok(format!("target_altitude = {}", entry.unit))
}

pub fn oracle_agreement() -> Result<String, String> {
    let cfg = MiningConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (a, ap) = approximate_cases(&mut rng, &cfg)?;
    let (l, lp) = linear_cases(&mut rng, &cfg)?;
    let (e, ep) = eventually_cases(&mut rng, &cfg)?;
    for (name, n, p) in [
        ("approximate", a, ap),
        ("linear", l, lp),
        ("eventually", e, ep),
    ] {
        ensure(p > 0 && p < n, || {
            format!("{name} cases are one-sided ({p} of {n} positive)")
        })?;
    }
    let p = prophecy()?;
    Ok(format!(
        "approximate {ap}/{a}, linear {lp}/{l}, eventually {ep}/{e} positive; {p}"
    ))
}

pub fn eps_monotonicity() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xe95);
    let n = 30;
    let q: Vec<f64> = (0..n).map(|_| rng.gen_range(100.0..500.0)).collect();
    // Each variable's worst-case relative error is spread log-uniformly.
    let vars: Vec<Series> = (0..60)
        .map(|_| {
            let worst = 10f64.powf(rng.gen_range(-2.7..-0.7));
            let peak = rng.gen_range(0..n);
            let vals: Vec<f64> = q
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let e = if i == peak {
                        worst
                    } else {
                        worst * rng.gen_range(0.0..1.0)
                    };
                    x * (1.0 + if rng.gen_bool(0.5) { e } else { -e })
                })
                .collect();
            jittered(&mut rng, &vals)
        })
        .collect();
    let qoi = on_grid(&q);
    let mut sets: Vec<(f64, BTreeSet<usize>)> = Vec::new();
    for eps in [0.10, 0.05, 0.025, 0.01] {
        let cfg = MiningConfig {
            eps_approx: eps,
            ..MiningConfig::default()
        };
        let matched = vars
            .iter()
            .enumerate()
            .filter(|(_, v)| mine_approximate(v, &qoi, &cfg).is_some())
            .map(|(i, _)| i);
        sets.push((eps, matched.collect()));
    }
    for w in sets.windows(2) {
        let ((e1, s1), (e2, s2)) = (&w[0], &w[1]);
        ensure(s2.is_subset(s1), || {
            format!(
                "eps {e2} matches {:?} not matched at {e1}",
                s2.difference(s1).collect::<Vec<_>>()
            )
        })?;
    }
    let sizes: Vec<usize> = sets.iter().map(|s| s.1.len()).collect();
    ensure(sizes[0] > sizes[3], || format!("trend is flat: {sizes:?}"))?;
    Ok(format!("matched {sizes:?} at eps 0.10, 0.05, 0.025, 0.01"))
}
