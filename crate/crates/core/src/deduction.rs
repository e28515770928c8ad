//! Mining unit types from execution traces.
//!
//! Each candidate variable is compared against every quantity of interest
//! using three rules, tried in order: values approximately equal, values
//! linearly related by a known conversion factor, and values eventually
//! attained by the quantity (or the reverse).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interp::trace::{Series, Trace};
use crate::units::{
    decimal, format_unit, parse_frame, parse_ratio, parse_unit_string, ratio_string, Scalar,
    UnitType, LOG10_3600, LOG10_60, LOG10_FOOT, LOG10_INCH, LOG10_MILE, LOG10_YARD,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MiningConfig {
    pub eps_approx: f64,
    pub linear_min_abs_pearson: f64,
    pub eventually_min_confidence: f64,
    pub pair_window_ms: u64,
    pub small_const_threshold: f64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            eps_approx: 0.05,
            linear_min_abs_pearson: 0.975,
            eventually_min_confidence: 0.975,
            pair_window_ms: 500,
            small_const_threshold: 10.0,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DeductionError {
    #[error("invalid mining config: {0}")]
    Config(String),
    #[error("type database: {0}")]
    Format(String),
}

impl MiningConfig {
    pub fn validate(&self) -> Result<(), DeductionError> {
        let fractions = [
            ("eps_approx", self.eps_approx),
            ("linear_min_abs_pearson", self.linear_min_abs_pearson),
            ("eventually_min_confidence", self.eventually_min_confidence),
        ];
        for (name, v) in fractions {
            if !(v > 0.0 && v <= 1.0) {
                return Err(DeductionError::Config(format!(
                    "{name} must be in (0, 1], got {v}"
                )));
            }
        }
        if self.pair_window_ms == 0 {
            return Err(DeductionError::Config(
                "pair_window_ms must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Approximate,
    Linear,
    Eventually,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DbEntry {
    pub canonical_name: String,
    pub var_id: u32,
    pub unit: UnitType,
    pub rule: Rule,
    pub qoi: String,
    /// log10 of the conversion factor from the QOI to the variable.
    pub scale_log10: Scalar,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TypeDatabase {
    pub entries: BTreeMap<u32, DbEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryJson {
    canonical_name: String,
    var_id: u32,
    unit: String,
    frame: String,
    rule: Rule,
    qoi: String,
    scale_log10: String,
}

impl TypeDatabase {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Unit types keyed by canonical name.
    pub fn by_name(&self) -> BTreeMap<String, UnitType> {
        self.entries
            .values()
            .map(|e| (e.canonical_name.clone(), e.unit.clone()))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<EntryJson> = self
            .entries
            .values()
            .map(|e| EntryJson {
                canonical_name: e.canonical_name.clone(),
                var_id: e.var_id,
                unit: format_unit(&e.unit),
                frame: e.unit.frame.to_string(),
                rule: e.rule,
                qoi: e.qoi.clone(),
                scale_log10: ratio_string(&e.scale_log10),
            })
            .collect();
        serde_json::to_string_pretty(&rows).expect("database serializes")
    }

    pub fn from_json(text: &str) -> Result<TypeDatabase, DeductionError> {
        let rows: Vec<EntryJson> =
            serde_json::from_str(text).map_err(|e| DeductionError::Format(e.to_string()))?;
        let mut db = TypeDatabase::default();
        for r in rows {
            let bad = |m: String| DeductionError::Format(format!("`{}`: {m}", r.canonical_name));
            let unit = parse_unit_string(&r.unit).map_err(|e| bad(e.to_string()))?;
            let frame = parse_frame(&r.frame).map_err(|e| bad(e.to_string()))?;
            let scale_log10 =
                parse_ratio(&r.scale_log10).ok_or_else(|| bad("bad scale_log10".into()))?;
            let entry = DbEntry {
                canonical_name: r.canonical_name.clone(),
                var_id: r.var_id,
                unit: unit.with_frame(frame),
                rule: r.rule,
                qoi: r.qoi.clone(),
                scale_log10,
            };
            if db.entries.insert(r.var_id, entry).is_some() {
                return Err(bad(format!("duplicate var_id {}", r.var_id)));
            }
        }
        Ok(db)
    }
}

/// Conversion factors accepted by the linear rule, with exact log10 values.
pub fn conversion_table() -> Vec<(f64, Scalar)> {
    let mut out = Vec::new();
    for k in -9i128..=9 {
        out.push((10f64.powi(k as i32), Scalar::from_integer(k)));
    }
    let pinned = [
        (60.0, LOG10_60),
        (3600.0, LOG10_3600),
        (0.9144, LOG10_YARD),
        (0.3048, LOG10_FOOT),
        (0.0254, LOG10_INCH),
        (1609.344, LOG10_MILE),
    ];
    for (v, log) in pinned {
        let l = decimal(log).expect("pinned constant parses");
        out.push((v, l));
        out.push((1.0 / v, -l));
    }
    out
}

fn rel_err(v: f64, q: f64, eps: f64) -> (f64, bool) {
    if q.abs() < 1e-9 {
        let e = (v - q).abs();
        (e, e < eps)
    } else {
        let e = (v - q).abs() / q.abs();
        (e, e < eps)
    }
}

/// Removes enum-typed variables, variables that only ever hold one small
/// constant, and variables observed exactly once.
pub fn filter_candidates(
    vars: &BTreeMap<u32, Series>,
    enum_ids: &BTreeSet<u32>,
    cfg: &MiningConfig,
) -> BTreeSet<u32> {
    vars.iter()
        .filter(|(id, s)| {
            if enum_ids.contains(id) || s.len() <= 1 {
                return false;
            }
            let c = s[0].1;
            let constant = s.iter().all(|&(_, v)| v == c);
            !(constant && c.abs() < cfg.small_const_threshold)
        })
        .map(|(id, _)| *id)
        .collect()
}

/// Greedy nearest-timestamp matching: each observation of `a`, in order,
/// takes the closest unused observation of `b` within the window (the
/// earlier one on ties).
pub fn align_pairs(a: &[(u64, f64)], b: &[(u64, f64)], window_ms: u64) -> Vec<(f64, f64)> {
    let mut used = vec![false; b.len()];
    let mut out = Vec::new();
    for &(ta, va) in a {
        let split = b.partition_point(|&(tb, _)| tb < ta);
        let mut best: Option<(u64, usize)> = None;
        let mut consider = |j: usize| {
            let d = ta.abs_diff(b[j].0);
            if d <= window_ms && !used[j] {
                let better = match best {
                    None => true,
                    Some((bd, bj)) => d < bd || (d == bd && b[j].0 < b[bj].0),
                };
                if better {
                    best = Some((d, j));
                }
            }
        };
        let mut j = split;
        while j > 0 && ta - b[j - 1].0 <= window_ms {
            j -= 1;
            consider(j);
        }
        let mut j = split;
        while j < b.len() && b[j].0 - ta <= window_ms {
            consider(j);
            j += 1;
        }
        if let Some((_, j)) = best {
            used[j] = true;
            out.push((va, b[j].1));
        }
    }
    out
}

/// Mean relative error when every aligned pair is within `eps_approx`.
pub fn mine_approximate(var: &[(u64, f64)], qoi: &[(u64, f64)], cfg: &MiningConfig) -> Option<f64> {
    let pairs = align_pairs(var, qoi, cfg.pair_window_ms);
    if pairs.len() < 2 {
        return None;
    }
    let mut total = 0.0;
    for &(v, q) in &pairs {
        let (e, ok) = rel_err(v, q, cfg.eps_approx);
        if !ok {
            return None;
        }
        total += e;
    }
    Some(total / pairs.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub pearson_r: f64,
    /// log10 of the table entry the slope snapped to.
    pub snapped_scale: Scalar,
    pub snapped_value: f64,
    pub mean_error: f64,
}

fn mean(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = xs.clone().count();
    xs.sum::<f64>() / n as f64
}

pub fn mine_linear(
    var: &[(u64, f64)],
    qoi: &[(u64, f64)],
    cfg: &MiningConfig,
) -> Option<LinearFit> {
    let pairs = align_pairs(var, qoi, cfg.pair_window_ms);
    if pairs.len() < 3 {
        return None;
    }
    let mv = mean(pairs.iter().map(|p| p.0));
    let mq = mean(pairs.iter().map(|p| p.1));
    let (mut sqq, mut svv, mut sqv) = (0.0, 0.0, 0.0);
    for &(v, q) in &pairs {
        sqq += (q - mq) * (q - mq);
        svv += (v - mv) * (v - mv);
        sqv += (q - mq) * (v - mv);
    }
    if sqq <= 0.0 || svv <= 0.0 {
        return None;
    }
    let slope = sqv / sqq;
    let intercept = mv - slope * mq;
    let r = sqv / (sqq.sqrt() * svv.sqrt());
    if r.abs() < cfg.linear_min_abs_pearson || slope <= 0.0 {
        return None;
    }
    let mean_abs_var = mean(pairs.iter().map(|p| p.0.abs()));
    if intercept.abs() > cfg.eps_approx * mean_abs_var {
        return None;
    }
    let (value, log) = conversion_table()
        .into_iter()
        .map(|(v, l)| ((slope - v).abs() / v, v, l))
        .filter(|(e, _, _)| *e < cfg.eps_approx)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, v, l)| (v, l))?;
    let mean_error = mean(
        pairs
            .iter()
            .map(|&(v, q)| rel_err(v, value * q, f64::INFINITY).0),
    );
    Some(LinearFit {
        slope,
        intercept,
        pearson_r: r,
        snapped_scale: log,
        snapped_value: value,
        mean_error,
    })
}

/// Greedy plateaus: `(start time, mean value)` of maximal runs whose
/// members all lie within `eps` of the run mean.
pub fn plateaus(series: &[(u64, f64)], eps: f64) -> Vec<(u64, f64)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < series.len() {
        let mut end = start + 1;
        let mut sum = series[start].1;
        while end < series.len() {
            let s2 = sum + series[end].1;
            let m = s2 / (end - start + 1) as f64;
            if series[start..=end]
                .iter()
                .all(|&(_, v)| rel_err(v, m, eps).1)
            {
                sum = s2;
                end += 1;
            } else {
                break;
            }
        }
        out.push((series[start].0, sum / (end - start) as f64));
        start = end;
    }
    out
}

fn distinct_values(ps: &[(u64, f64)], eps: f64) -> usize {
    let mut seen: Vec<f64> = Vec::new();
    for &(_, v) in ps {
        if !seen.iter().any(|&s| rel_err(v, s, eps).1) {
            seen.push(v);
        }
    }
    seen.len()
}

/// Fraction of plateaus of `held` whose value is attained at or after the
/// plateau's start by some observation of `target`, with the mean error of
/// the hits.
fn attained(held: &[(u64, f64)], target: &[(u64, f64)], eps: f64) -> Option<(f64, f64)> {
    let ps = plateaus(held, eps);
    if distinct_values(&ps, eps) < 2 {
        return None;
    }
    let mut hits = 0usize;
    let mut err = 0.0;
    for &(t0, v) in &ps {
        let best = target
            .iter()
            .filter(|&&(t, _)| t >= t0)
            .map(|&(_, q)| rel_err(q, v, eps))
            .filter(|(_, ok)| *ok)
            .map(|(e, _)| e)
            .min_by(f64::total_cmp);
        if let Some(e) = best {
            hits += 1;
            err += e;
        }
    }
    let conf = hits as f64 / ps.len() as f64;
    Some((
        conf,
        if hits > 0 {
            err / hits as f64
        } else {
            f64::INFINITY
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventuallyMatch {
    pub confidence: f64,
    pub mean_error: f64,
}

pub fn mine_eventually(
    var: &[(u64, f64)],
    qoi: &[(u64, f64)],
    cfg: &MiningConfig,
) -> Option<EventuallyMatch> {
    let eps = cfg.eps_approx;
    let forward = attained(var, qoi, eps).filter(|(c, _)| *c >= cfg.eventually_min_confidence);
    let reverse = attained(qoi, var, eps).filter(|(c, _)| *c >= cfg.eventually_min_confidence);
    let best = match (forward, reverse) {
        (Some(a), Some(b)) => Some(if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
            b
        } else {
            a
        }),
        (a, b) => a.or(b),
    }?;
    Some(EventuallyMatch {
        confidence: best.0,
        mean_error: best.1,
    })
}

/// Builds the type database: per candidate, the first rule with any
/// matching QOI wins; within a rule the smallest mean error wins, then the
/// QOI name.
pub fn build_type_db(
    trace: &Trace,
    names: &BTreeMap<u32, String>,
    enum_ids: &BTreeSet<u32>,
    qoi_decls: &BTreeMap<String, UnitType>,
    cfg: &MiningConfig,
) -> TypeDatabase {
    let vars = trace.var_series();
    let qois = trace.qoi_series();
    let candidates = filter_candidates(&vars, enum_ids, cfg);
    let mut db = TypeDatabase::default();
    let zero = Scalar::from_integer(0);
    for id in candidates {
        let Some(name) = names.get(&id) else { continue };
        let var = &vars[&id];
        let available: Vec<(&String, &UnitType, &Series)> = qoi_decls
            .iter()
            .filter_map(|(q, u)| qois.get(q).map(|s| (q, u, s)))
            .collect();
        let mut chosen: Option<(Rule, String, UnitType, Scalar)> = None;
        for rule in [Rule::Approximate, Rule::Linear, Rule::Eventually] {
            let mut best: Option<(f64, &String, UnitType, Scalar)> = None;
            for &(q, unit, series) in &available {
                let m = match rule {
                    Rule::Approximate => {
                        mine_approximate(var, series, cfg).map(|e| (e, unit.clone(), zero))
                    }
                    Rule::Linear => mine_linear(var, series, cfg).map(|f| {
                        let u = unit.with_scalar(unit.scalar_log10 - f.snapped_scale);
                        (f.mean_error, u, f.snapped_scale)
                    }),
                    Rule::Eventually => mine_eventually(var, series, cfg)
                        .map(|m| (m.mean_error, unit.clone(), zero)),
                };
                if let Some((e, u, s)) = m {
                    // QOIs are visited in name order, so strict < keeps the first on ties.
                    if best.as_ref().is_none_or(|b| e < b.0) {
                        best = Some((e, q, u, s));
                    }
                }
            }
            if let Some((_, q, u, s)) = best {
                chosen = Some((rule, q.clone(), u, s));
                break;
            }
        }
        if let Some((rule, qoi, unit, scale_log10)) = chosen {
            db.entries.insert(
                id,
                DbEntry {
                    canonical_name: name.clone(),
                    var_id: id,
                    unit,
                    rule,
                    qoi,
                    scale_log10,
                },
            );
        }
    }
    db
}
