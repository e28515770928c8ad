//! Scenario files: simulated signals plus scripted input events.

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::units::{parse_frame, parse_unit_string, FrameSpec, UnitType};

pub const DEFAULT_QOI_TOML: &str = include_str!("default_qoi.toml");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Generator {
    Constant {
        value: f64,
    },
    /// `intercept + slope * t_s`
    Linear {
        #[serde(default)]
        intercept: f64,
        slope: f64,
    },
    /// `from` until `start_s`, linear to `to` at `end_s`, then held.
    Ramp {
        from: f64,
        to: f64,
        #[serde(default)]
        start_s: f64,
        end_s: f64,
    },
}

/// A simulated signal as a function of virtual time.
#[derive(Debug, Clone, PartialEq)]
pub enum Signal {
    Gen(Generator),
    /// `(t_ms, value)` points, interpolated linearly and held at the ends.
    Points(Vec<(f64, f64)>),
}

impl Signal {
    pub fn value_at(&self, t_ms: u64) -> f64 {
        let t = t_ms as f64;
        match self {
            Signal::Gen(Generator::Constant { value }) => *value,
            Signal::Gen(Generator::Linear { intercept, slope }) => intercept + slope * t / 1000.0,
            Signal::Gen(Generator::Ramp {
                from,
                to,
                start_s,
                end_s,
            }) => {
                let s = t / 1000.0;
                if s >= *end_s {
                    *to
                } else if s <= *start_s {
                    *from
                } else {
                    from + (to - from) * (s - start_s) / (end_s - start_s)
                }
            }
            Signal::Points(pts) => {
                let Some(first) = pts.first() else { return 0.0 };
                if t <= first.0 {
                    return first.1;
                }
                for w in pts.windows(2) {
                    let ((t0, v0), (t1, v1)) = (w[0], w[1]);
                    if t <= t1 {
                        if t1 == t0 {
                            return v1;
                        }
                        return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
                    }
                }
                pts.last().unwrap().1
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Qoi {
    pub unit: UnitType,
    pub signal: Signal,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArgSpec {
    Num(f64),
    /// Enum constant (or string, if no such constant exists).
    Name(String),
    Qoi {
        name: String,
        scale: f64,
        offset: f64,
    },
    Struct(BTreeMap<String, ArgSpec>),
    List(Vec<ArgSpec>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub t_ms: u64,
    pub every_ms: Option<u64>,
    pub until_ms: Option<u64>,
    pub call: String,
    pub args: Vec<ArgSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub duration_ms: u64,
    pub tick_ms: u64,
    pub sample_rate_hz: f64,
    pub qois: BTreeMap<String, Qoi>,
    pub events: Vec<Event>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QoiFile {
    unit: Option<String>,
    frame: Option<String>,
    csv: Option<Vec<[f64; 2]>>,
    expr: Option<Generator>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SignalFile {
    Number(f64),
    Gen(Generator),
    Points(Vec<[f64; 2]>),
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ObstacleFile {
    distance: Option<SignalFile>,
    heading: Option<SignalFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EventFile {
    t_ms: u64,
    call: String,
    #[serde(default)]
    args: Vec<toml::Value>,
    every_ms: Option<u64>,
    until_ms: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    duration_s: f64,
    #[serde(default = "default_tick")]
    tick_ms: u64,
    sample_rate_hz: Option<f64>,
    #[serde(default)]
    qoi: BTreeMap<String, QoiFile>,
    obstacle: Option<ObstacleFile>,
    #[serde(default)]
    event: Vec<EventFile>,
}

fn default_tick() -> u64 {
    10
}

#[derive(Deserialize)]
struct QoiOnly {
    #[serde(default)]
    qoi: BTreeMap<String, QoiFile>,
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

fn unit_of(name: &str, unit: Option<&str>, frame: Option<&str>) -> Result<UnitType, ScenarioError> {
    let unit = unit.ok_or_else(|| invalid(format!("qoi `{name}` has no unit")))?;
    let u = parse_unit_string(unit).map_err(|e| invalid(format!("qoi `{name}`: {e}")))?;
    let frame = match frame {
        Some(f) => parse_frame(f).map_err(|e| invalid(format!("qoi `{name}`: {e}")))?,
        None => FrameSpec::Any,
    };
    Ok(u.with_frame(frame))
}

fn signal_of(
    name: &str,
    csv: Option<Vec<[f64; 2]>>,
    expr: Option<Generator>,
) -> Result<Option<Signal>, ScenarioError> {
    match (csv, expr) {
        (Some(_), Some(_)) => Err(invalid(format!("qoi `{name}` has both `csv` and `expr`"))),
        (Some(pts), None) => {
            if pts.windows(2).any(|w| w[1][0] < w[0][0]) {
                return Err(invalid(format!(
                    "qoi `{name}`: csv points must be time-sorted"
                )));
            }
            Ok(Some(Signal::Points(
                pts.into_iter().map(|[t, v]| (t, v)).collect(),
            )))
        }
        (None, Some(g)) => Ok(Some(Signal::Gen(g))),
        (None, None) => Ok(None),
    }
}

fn merge_qois(
    into: &mut BTreeMap<String, Qoi>,
    files: BTreeMap<String, QoiFile>,
) -> Result<(), ScenarioError> {
    for (name, q) in files {
        let signal = signal_of(&name, q.csv, q.expr)?;
        match into.get_mut(&name) {
            Some(existing) => {
                if q.unit.is_some() || q.frame.is_some() {
                    let unit = q
                        .unit
                        .as_deref()
                        .map(str::to_string)
                        .unwrap_or_else(|| existing.unit.unit_string());
                    existing.unit = unit_of(&name, Some(&unit), q.frame.as_deref())?;
                }
                if let Some(s) = signal {
                    existing.signal = s;
                }
            }
            None => {
                let unit = unit_of(&name, q.unit.as_deref(), q.frame.as_deref())?;
                let signal = signal.unwrap_or(Signal::Gen(Generator::Constant { value: 0.0 }));
                into.insert(name, Qoi { unit, signal });
            }
        }
    }
    Ok(())
}

/// The built-in quantities of interest.
pub fn default_qois() -> BTreeMap<String, Qoi> {
    let files: QoiOnly = toml::from_str(DEFAULT_QOI_TOML).expect("built-in QOI table parses");
    let mut out = BTreeMap::new();
    merge_qois(&mut out, files.qoi).expect("built-in QOI table is valid");
    out
}

fn obstacle_qois(
    into: &mut BTreeMap<String, Qoi>,
    spec: ObstacleFile,
) -> Result<(), ScenarioError> {
    let to_signal = |s: Option<SignalFile>, default: f64| match s {
        None => Signal::Gen(Generator::Constant { value: default }),
        Some(SignalFile::Number(v)) => Signal::Gen(Generator::Constant { value: v }),
        Some(SignalFile::Gen(g)) => Signal::Gen(g),
        Some(SignalFile::Points(p)) => Signal::Points(p.into_iter().map(|[t, v]| (t, v)).collect()),
    };
    into.insert(
        "obstacle_distance".into(),
        Qoi {
            unit: unit_of("obstacle_distance", Some("m"), Some("MAV_FRAME_BODY_FRD"))?,
            signal: to_signal(spec.distance, 5.0),
        },
    );
    into.insert(
        "obstacle_heading".into(),
        Qoi {
            unit: unit_of("obstacle_heading", Some("deg"), Some("MAV_FRAME_BODY_FRD"))?,
            signal: to_signal(spec.heading, 30.0),
        },
    );
    Ok(())
}

fn arg_of(v: &toml::Value) -> Result<ArgSpec, ScenarioError> {
    Ok(match v {
        toml::Value::Integer(i) => ArgSpec::Num(*i as f64),
        toml::Value::Float(f) => ArgSpec::Num(*f),
        toml::Value::Boolean(b) => ArgSpec::Num(f64::from(u8::from(*b))),
        toml::Value::String(s) => ArgSpec::Name(s.clone()),
        toml::Value::Array(a) => ArgSpec::List(a.iter().map(arg_of).collect::<Result<_, _>>()?),
        toml::Value::Table(t) if t.contains_key("qoi") => {
            let num = |k: &str, default: f64| match t.get(k) {
                None => Ok(default),
                Some(toml::Value::Float(f)) => Ok(*f),
                Some(toml::Value::Integer(i)) => Ok(*i as f64),
                Some(_) => Err(invalid(format!("`{k}` must be a number"))),
            };
            if let Some(k) = t
                .keys()
                .find(|k| !["qoi", "scale", "offset"].contains(&k.as_str()))
            {
                return Err(invalid(format!("unknown key `{k}` in qoi argument")));
            }
            let name = t["qoi"]
                .as_str()
                .ok_or_else(|| invalid("`qoi` must be a string"))?;
            ArgSpec::Qoi {
                name: name.to_string(),
                scale: num("scale", 1.0)?,
                offset: num("offset", 0.0)?,
            }
        }
        toml::Value::Table(t) => {
            let mut fields = BTreeMap::new();
            for (k, v) in t {
                fields.insert(k.clone(), arg_of(v)?);
            }
            ArgSpec::Struct(fields)
        }
        toml::Value::Datetime(_) => return Err(invalid("datetime arguments are not supported")),
    })
}

fn check_qoi_refs(arg: &ArgSpec, qois: &BTreeMap<String, Qoi>) -> Result<(), ScenarioError> {
    match arg {
        ArgSpec::Qoi { name, .. } if !qois.contains_key(name) => {
            Err(invalid(format!("unknown qoi `{name}`")))
        }
        ArgSpec::Struct(fields) => fields.values().try_for_each(|a| check_qoi_refs(a, qois)),
        ArgSpec::List(items) => items.iter().try_for_each(|a| check_qoi_refs(a, qois)),
        _ => Ok(()),
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text)?;
    if file.duration_s.is_nan() || file.duration_s <= 0.0 {
        return Err(invalid("duration_s must be positive"));
    }
    if file.tick_ms == 0 {
        return Err(invalid("tick_ms must be positive"));
    }
    let sample_rate_hz = file.sample_rate_hz.unwrap_or(1.0);
    if sample_rate_hz.is_nan() || sample_rate_hz <= 0.0 {
        return Err(invalid("sample_rate_hz must be positive"));
    }
    let mut qois = default_qois();
    if let Some(ob) = file.obstacle {
        obstacle_qois(&mut qois, ob)?;
    }
    merge_qois(&mut qois, file.qoi)?;
    let mut events = Vec::new();
    for e in file.event {
        if e.every_ms == Some(0) {
            return Err(invalid(format!(
                "event `{}`: every_ms must be positive",
                e.call
            )));
        }
        let args = e.args.iter().map(arg_of).collect::<Result<Vec<_>, _>>()?;
        for a in &args {
            check_qoi_refs(a, &qois)?;
        }
        events.push(Event {
            t_ms: e.t_ms,
            every_ms: e.every_ms,
            until_ms: e.until_ms,
            call: e.call,
            args,
        });
    }
    Ok(Scenario {
        duration_ms: (file.duration_s * 1000.0).round() as u64,
        tick_ms: file.tick_ms,
        sample_rate_hz,
        qois,
        events,
    })
}

/// QOI unit declarations from a QOI or scenario file; the built-in and
/// obstacle quantities are always included.
pub fn parse_qoi_decls(text: &str) -> Result<BTreeMap<String, UnitType>, ScenarioError> {
    let table: toml::Table = toml::from_str(text)?;
    let mut qois = default_qois();
    obstacle_qois(&mut qois, ObstacleFile::default())?;
    if let Some(q) = table.get("qoi") {
        let files: BTreeMap<String, QoiFile> = q.clone().try_into()?;
        merge_qois(&mut qois, files)?;
    }
    Ok(qois.into_iter().map(|(k, q)| (k, q.unit)).collect())
}

pub fn default_qoi_decls() -> BTreeMap<String, UnitType> {
    parse_qoi_decls("").expect("built-in declarations parse")
}
