use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unitlint_core::units::{
    add, decimal, div, format_unit, frame_meet, mul, parse_frame, parse_unit_string, subtype,
    Dimension, UnitError, LOG10_60, LOG10_DEG, LOG10_MILE, LOG10_YARD,
};
use unitlint_core::{FrameSpec, Scalar, UnitType};

use crate::ensure;

const CASES: usize = 2_000;
const FRAMES: [&str; 3] = ["BODY", "GLOBAL", "LOCAL"];

fn scalar(rng: &mut ChaCha8Rng) -> Scalar {
    if rng.gen_bool(0.2) {
        let pinned = [LOG10_60, LOG10_DEG, LOG10_YARD, LOG10_MILE];
        decimal(pinned[rng.gen_range(0..pinned.len())]).expect("pinned constant")
    } else {
        Scalar::new(rng.gen_range(-9..=9), rng.gen_range(1..=3))
    }
}

fn frame(rng: &mut ChaCha8Rng) -> FrameSpec {
    if rng.gen_bool(0.25) {
        return FrameSpec::Any;
    }
    loop {
        let ids: Vec<&str> = FRAMES
            .iter()
            .copied()
            .filter(|_| rng.gen_bool(0.5))
            .collect();
        if let Ok(f) = FrameSpec::from_set(ids) {
            return f;
        }
    }
}

fn unit(rng: &mut ChaCha8Rng) -> UnitType {
    let mut exps = [0i32; 7];
    for e in exps.iter_mut() {
        *e = rng.gen_range(-2..=2);
    }
    UnitType::new(scalar(rng), exps, frame(rng))
}

/// Three types sharing a dimension, so the order laws are exercised.
fn related(rng: &mut ChaCha8Rng) -> [UnitType; 3] {
    let a = unit(rng);
    let b = a.with_frame(frame(rng));
    let c = a.with_frame(frame(rng));
    [a, b, c]
}

fn case(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let (a, b, c) = (unit(rng), unit(rng), unit(rng));
    ensure(mul(&a, &b).ok() == mul(&b, &a).ok(), || {
        format!("mul not commutative on {a} {b}")
    })?;
    let l = mul(&a, &b).ok().and_then(|ab| mul(&ab, &c).ok());
    let r = mul(&b, &c).ok().and_then(|bc| mul(&a, &bc).ok());
    ensure(l == r, || format!("mul not associative on {a} {b} {c}"))?;
    if let Ok(ab) = mul(&a, &b) {
        let back = div(&ab, &b).map_err(|e| e.to_string())?;
        let meet = frame_meet(&a.frame, &b.frame).map_err(|e| e.to_string())?;
        ensure(
            back.dimension() == a.dimension() && back.frame == meet,
            || format!("(a*b)/b != a on {a} {b}"),
        )?;
    }
    let aa = div(&a, &a).map_err(|e| e.to_string())?;
    ensure(aa.dimension() == Dimension::identity(), || {
        format!("a/a not dimensionless on {a}")
    })?;

    let [p, q, s] = related(rng);
    for x in [&a, &p, &q, &s] {
        ensure(subtype(x, x), || format!("subtype not reflexive on {x}"))?;
    }
    if subtype(&p, &q) && subtype(&q, &p) {
        ensure(p == q, || format!("subtype not antisymmetric on {p} {q}"))?;
    }
    if subtype(&p, &q) && subtype(&q, &s) {
        ensure(subtype(&p, &s), || {
            format!("subtype not transitive on {p} {q} {s}")
        })?;
    }

    for (l, r) in [(&p, &q), (&q, &s), (&p, &a)] {
        match add(l, r) {
            Ok(j) => {
                ensure(subtype(l, &j) && subtype(r, &j), || {
                    format!("{l} + {r} = {j} is not an upper bound")
                })?;
                ensure(&j == l || &j == r, || {
                    format!("{l} + {r} = {j} is neither operand")
                })?;
                for up in [&a, &p, &q, &s] {
                    if subtype(l, up) && subtype(r, up) {
                        ensure(subtype(&j, up), || {
                            format!("{l} + {r} = {j} is not below bound {up}")
                        })?;
                    }
                }
            }
            Err(UnitError::DimensionMismatch { .. }) => ensure(!l.same_dimension(r), || {
                format!("{l} + {r} rejected despite equal dimensions")
            })?,
            Err(_) => ensure(!subtype(l, r) && !subtype(r, l), || {
                format!("{l} + {r} rejected though comparable")
            })?,
        }
    }

    let any = a.with_frame(FrameSpec::Any);
    let text = format_unit(&any);
    let parsed = parse_unit_string(&text).map_err(|e| format!("`{text}`: {e}"))?;
    ensure(parsed == any, || {
        format!("`{text}` parses to {parsed}, expected {any}")
    })?;
    let ftext = a.frame.to_string();
    let f = parse_frame(&ftext).map_err(|e| e.to_string())?;
    ensure(f == a.frame, || {
        format!("frame `{ftext}` does not round-trip")
    })
}

pub fn laws() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa1);
    for i in 0..CASES {
        case(&mut rng).map_err(|e| format!("case {i}: {e}"))?;
    }
    Ok(format!("{CASES} cases, 0 failures"))
}
