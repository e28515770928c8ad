//! Instrumented interpreter: runs a program against a scenario in virtual
//! time and records rate-limited writes to non-local variables alongside
//! sampled quantities of interest.

pub mod scenario;
pub mod trace;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::frontend::ast::*;
use crate::frontend::{Canonical, Resolved};

pub use scenario::{
    default_qoi_decls, parse_qoi_decls, parse_scenario, ArgSpec, Scenario, ScenarioError,
};
pub use trace::{ObsId, Observation, Series, Trace, TraceError};

const MAX_DEPTH: usize = 256;
const MAX_LOOP_ITERATIONS: u64 = 100_000;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum InterpError {
    #[error("{file}:{line}:{col}: runtime fault: {message}")]
    RuntimeFault {
        file: String,
        line: u32,
        col: u32,
        message: String,
    },
    #[error("scenario event calls undefined function `{0}`")]
    UnknownEventTarget(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Num(f64),
    Str(String),
    Struct(BTreeMap<String, Value>),
    Array(BTreeMap<i64, Value>),
    Void,
}

impl Value {
    fn num(&self) -> f64 {
        match self {
            Value::Num(n) => *n,
            _ => 0.0,
        }
    }
}

enum Flow {
    Normal,
    Break,
    Return(Value),
}

enum Root {
    Local(String),
    Global(String),
}

enum Step {
    Field(String),
    Index(i64),
}

struct Place {
    root: Root,
    path: Vec<Step>,
}

type Locals = HashMap<String, Value>;
type R<T> = Result<T, InterpError>;

struct Machine<'a> {
    program: &'a Program,
    canon: &'a Canonical,
    scenario: &'a Scenario,
    functions: HashMap<&'a str, &'a FunctionDef>,
    structs: HashMap<&'a str, &'a [FieldDecl]>,
    globals: HashMap<String, Value>,
    now: u64,
    period_ms: f64,
    last_write: HashMap<u32, u64>,
    recording: bool,
    depth: usize,
    trace: Trace,
}

/// Runs `program` against `scenario` at the scenario's sample rate.
pub fn interpret(
    program: &Program,
    canon: &Canonical,
    scenario: &Scenario,
) -> Result<Trace, InterpError> {
    interpret_at(program, canon, scenario, scenario.sample_rate_hz)
}

pub fn interpret_at(
    program: &Program,
    canon: &Canonical,
    scenario: &Scenario,
    sample_rate_hz: f64,
) -> Result<Trace, InterpError> {
    let mut m = Machine {
        program,
        canon,
        scenario,
        functions: program.functions().map(|f| (f.name.as_str(), f)).collect(),
        structs: program
            .structs()
            .map(|s| (s.name.as_str(), s.fields.as_slice()))
            .chain(
                program
                    .classes()
                    .map(|c| (c.name.as_str(), c.fields.as_slice())),
            )
            .collect(),
        globals: HashMap::new(),
        now: 0,
        period_ms: 1000.0 / sample_rate_hz,
        last_write: HashMap::new(),
        recording: false,
        depth: 0,
        trace: Trace::default(),
    };
    for e in &scenario.events {
        if !m.functions.contains_key(e.call.as_str()) {
            return Err(InterpError::UnknownEventTarget(e.call.clone()));
        }
    }
    m.init_globals()?;
    m.recording = true;

    // (time, 0 = QOI sample / 1 = event, event index)
    let mut schedule: Vec<(u64, u8, usize)> = Vec::new();
    let duration = scenario.duration_ms;
    let mut k = 0u64;
    loop {
        let t = (k as f64 * m.period_ms).round() as u64;
        if t >= duration {
            break;
        }
        schedule.push((t, 0, 0));
        k += 1;
    }
    let tick = scenario.tick_ms;
    for (i, e) in scenario.events.iter().enumerate() {
        let until = e.until_ms.unwrap_or(u64::MAX);
        let mut t = e.t_ms;
        while t < duration && t <= until {
            schedule.push((t.div_ceil(tick) * tick, 1, i));
            match e.every_ms {
                Some(step) => t += step,
                None => break,
            }
        }
    }
    schedule.sort();
    for (t, kind, i) in schedule {
        m.now = t;
        if kind == 0 {
            for (name, q) in &scenario.qois {
                m.trace
                    .push(t, ObsId::Qoi(name.clone()), q.signal.value_at(t));
            }
        } else {
            m.fire(&scenario.events[i])?;
        }
    }
    Ok(m.trace)
}

impl<'a> Machine<'a> {
    fn fault(&self, span: Span, message: impl Into<String>) -> InterpError {
        InterpError::RuntimeFault {
            file: self.program.file_name(&span).to_string(),
            line: span.line,
            col: span.col,
            message: message.into(),
        }
    }

    fn default_value(&self, ty: &TypeRef) -> Value {
        match ty {
            TypeRef::Named(n) => match self.structs.get(n.as_str()) {
                Some(fields) => Value::Struct(
                    fields
                        .iter()
                        .map(|f| (f.name.clone(), self.default_value(&f.ty)))
                        .collect(),
                ),
                None => Value::Num(0.0),
            },
            TypeRef::Array(_) => Value::Array(BTreeMap::new()),
            _ => Value::Num(0.0),
        }
    }

    fn init_globals(&mut self) -> R<()> {
        for c in self.program.classes() {
            for f in &c.fields {
                let v = self.default_value(&f.ty);
                self.globals.insert(format!("{}::{}", c.name, f.name), v);
            }
        }
        for g in self.program.globals() {
            let v = match &g.init {
                Some(e) => {
                    let v = self.eval(e, &mut Locals::new())?;
                    coerce(v, &g.ty)
                }
                None => self.default_value(&g.ty),
            };
            self.globals.insert(g.name.clone(), v);
        }
        Ok(())
    }

    fn arg_value(&self, spec: &ArgSpec, ty: &TypeRef) -> Value {
        match spec {
            ArgSpec::Num(n) => coerce(Value::Num(*n), ty),
            ArgSpec::Name(s) => match self.canon.enum_values.get(s) {
                Some((_, v)) => Value::Num(*v as f64),
                None => Value::Str(s.clone()),
            },
            ArgSpec::Qoi {
                name,
                scale,
                offset,
            } => {
                let q = self.scenario.qois[name].signal.value_at(self.now);
                coerce(Value::Num(q * scale + offset), ty)
            }
            ArgSpec::Struct(fields) => {
                let mut base = match self.default_value(ty) {
                    Value::Struct(m) => m,
                    _ => BTreeMap::new(),
                };
                let decl = ty
                    .named()
                    .and_then(|n| self.structs.get(n))
                    .copied()
                    .unwrap_or(&[]);
                for (k, spec) in fields {
                    let fty = decl
                        .iter()
                        .find(|f| &f.name == k)
                        .map_or(TypeRef::Float, |f| f.ty.clone());
                    base.insert(k.clone(), self.arg_value(spec, &fty));
                }
                Value::Struct(base)
            }
            ArgSpec::List(items) => {
                let elem = match ty {
                    TypeRef::Array(t) => (**t).clone(),
                    _ => TypeRef::Float,
                };
                Value::Array(
                    items
                        .iter()
                        .enumerate()
                        .map(|(i, s)| (i as i64, self.arg_value(s, &elem)))
                        .collect(),
                )
            }
        }
    }

    fn fire(&mut self, e: &scenario::Event) -> R<()> {
        let f = self.functions[e.call.as_str()];
        let args: Vec<Value> = f
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| match e.args.get(i) {
                Some(spec) => self.arg_value(spec, &p.ty),
                None => self.default_value(&p.ty),
            })
            .collect();
        self.call(f, args, f.span)?;
        Ok(())
    }

    fn call(&mut self, f: &'a FunctionDef, args: Vec<Value>, at: Span) -> R<Value> {
        if self.depth >= MAX_DEPTH {
            return Err(self.fault(at, "call depth limit exceeded"));
        }
        let mut locals = Locals::new();
        for (p, v) in f.params.iter().zip(args) {
            locals.insert(format!("{}::{}", f.name, p.name), coerce(v, &p.ty));
        }
        self.depth += 1;
        let flow = self.block(&f.body, &mut locals, &f.name);
        self.depth -= 1;
        Ok(match flow? {
            Flow::Return(v) => coerce(v, &f.ret),
            _ => Value::Void,
        })
    }

    fn block(&mut self, body: &'a [Stmt], locals: &mut Locals, func: &str) -> R<Flow> {
        for s in body {
            match self.stmt(s, locals, func)? {
                Flow::Normal => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Normal)
    }

    fn stmt(&mut self, s: &'a Stmt, locals: &mut Locals, func: &str) -> R<Flow> {
        match &s.kind {
            StmtKind::VarDecl(d) => {
                let v = match &d.init {
                    Some(e) => coerce(self.eval(e, locals)?, &d.ty),
                    None => self.default_value(&d.ty),
                };
                locals.insert(format!("{func}::{}", d.name), v);
            }
            StmtKind::Assign(l, r) => {
                let v = self.eval(r, locals)?;
                let v = match self.canon.types.get(&l.id) {
                    Some(t) => coerce(v, t),
                    None => v,
                };
                let place = self.place(l, locals)?;
                self.record(l, &v);
                self.store(place, v, locals);
            }
            StmtKind::If(c, t, e) => {
                let branch = if truthy(&self.eval(c, locals)?) { t } else { e };
                return self.block(branch, locals, func);
            }
            StmtKind::Switch(x, cases) => {
                let v = self.eval(x, locals)?;
                let mut start = None;
                for (i, case) in cases.iter().enumerate() {
                    if let Some(l) = &case.label {
                        if self.eval(l, locals)? == v {
                            start = Some(i);
                            break;
                        }
                    }
                }
                let start = start.or_else(|| cases.iter().position(|c| c.label.is_none()));
                if let Some(start) = start {
                    for case in &cases[start..] {
                        match self.block(&case.body, locals, func)? {
                            Flow::Normal => {}
                            Flow::Break => break,
                            ret => return Ok(ret),
                        }
                    }
                }
            }
            StmtKind::While(c, b) => {
                let mut n = 0u64;
                while truthy(&self.eval(c, locals)?) {
                    n += 1;
                    if n > MAX_LOOP_ITERATIONS {
                        return Err(self.fault(s.span, "loop iteration limit exceeded"));
                    }
                    match self.block(b, locals, func)? {
                        Flow::Normal => {}
                        Flow::Break => break,
                        ret => return Ok(ret),
                    }
                }
            }
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.eval(e, locals)?,
                    None => Value::Void,
                };
                return Ok(Flow::Return(v));
            }
            StmtKind::Break => return Ok(Flow::Break),
            StmtKind::Expr(e) => {
                self.eval(e, locals)?;
            }
        }
        Ok(Flow::Normal)
    }

    fn record(&mut self, lhs: &Expr, v: &Value) {
        let Value::Num(n) = v else { return };
        if !self.recording {
            return;
        }
        let canon = self.canon;
        let Some(name) = canon.name_of(lhs.id) else {
            return;
        };
        if !canon.is_non_local(name) {
            return;
        }
        let Some(id) = canon.registry.id(name) else {
            return;
        };
        let due = match self.last_write.get(&id) {
            Some(&last) => (self.now - last) as f64 >= self.period_ms - 1e-9,
            None => true,
        };
        if due {
            self.last_write.insert(id, self.now);
            self.trace.push(self.now, ObsId::Var(id), *n);
        }
    }

    fn place(&mut self, e: &'a Expr, locals: &mut Locals) -> R<Place> {
        match &e.kind {
            ExprKind::Var(_) => match self.canon.resolved.get(&e.id) {
                Some(Resolved::Var {
                    name, local: true, ..
                }) => Ok(Place {
                    root: Root::Local(name.clone()),
                    path: vec![],
                }),
                Some(Resolved::Var { name, .. }) => Ok(Place {
                    root: Root::Global(name.clone()),
                    path: vec![],
                }),
                _ => Err(self.fault(e.span, "expression is not assignable")),
            },
            ExprKind::Member(base, field) => match self.canon.resolved.get(&e.id) {
                Some(Resolved::Var { name, .. }) => Ok(Place {
                    root: Root::Global(name.clone()),
                    path: vec![],
                }),
                _ => {
                    let mut p = self.place(base, locals)?;
                    p.path.push(Step::Field(field.clone()));
                    Ok(p)
                }
            },
            ExprKind::Index(base, idx) => {
                let i = self.eval(idx, locals)?.num();
                let mut p = self.place(base, locals)?;
                p.path.push(Step::Index(i as i64));
                Ok(p)
            }
            _ => Err(self.fault(e.span, "expression is not assignable")),
        }
    }

    fn load(&self, p: &Place, locals: &Locals) -> Value {
        let root = match &p.root {
            Root::Local(n) => locals.get(n),
            Root::Global(n) => self.globals.get(n),
        };
        let mut cur = match root {
            Some(v) => v,
            None => return Value::Num(0.0),
        };
        for step in &p.path {
            let next = match (step, cur) {
                (Step::Field(f), Value::Struct(m)) => m.get(f),
                (Step::Index(i), Value::Array(m)) => m.get(i),
                _ => None,
            };
            match next {
                Some(v) => cur = v,
                None => return Value::Num(0.0),
            }
        }
        cur.clone()
    }

    fn store(&mut self, p: Place, v: Value, locals: &mut Locals) {
        let slot = match p.root {
            Root::Local(n) => locals.entry(n).or_insert(Value::Num(0.0)),
            Root::Global(n) => self.globals.entry(n).or_insert(Value::Num(0.0)),
        };
        let mut cur = slot;
        for step in p.path {
            cur = match step {
                Step::Field(f) => {
                    if !matches!(cur, Value::Struct(_)) {
                        *cur = Value::Struct(BTreeMap::new());
                    }
                    let Value::Struct(m) = cur else {
                        unreachable!()
                    };
                    m.entry(f).or_insert(Value::Num(0.0))
                }
                Step::Index(i) => {
                    if !matches!(cur, Value::Array(_)) {
                        *cur = Value::Array(BTreeMap::new());
                    }
                    let Value::Array(m) = cur else { unreachable!() };
                    m.entry(i).or_insert(Value::Num(0.0))
                }
            };
        }
        *cur = v;
    }

    fn eval(&mut self, e: &'a Expr, locals: &mut Locals) -> R<Value> {
        Ok(match &e.kind {
            ExprKind::Number(text) => {
                let t = text.trim_end_matches(['f', 'F']);
                Value::Num(
                    t.parse()
                        .map_err(|_| self.fault(e.span, format!("bad number `{text}`")))?,
                )
            }
            ExprKind::Str(s) => Value::Str(s.clone()),
            ExprKind::Var(_) | ExprKind::Member(..) | ExprKind::Index(..) => {
                if let Some(Resolved::EnumConst { value, .. }) = self.canon.resolved.get(&e.id) {
                    return Ok(Value::Num(*value as f64));
                }
                let p = self.place(e, locals)?;
                self.load(&p, locals)
            }
            ExprKind::Neg(a) => Value::Num(-self.eval(a, locals)?.num()),
            ExprKind::Not(a) => Value::Num(if truthy(&self.eval(a, locals)?) {
                0.0
            } else {
                1.0
            }),
            ExprKind::Binary(BinOp::And, a, b) => {
                let r = truthy(&self.eval(a, locals)?) && truthy(&self.eval(b, locals)?);
                Value::Num(f64::from(u8::from(r)))
            }
            ExprKind::Binary(BinOp::Or, a, b) => {
                let r = truthy(&self.eval(a, locals)?) || truthy(&self.eval(b, locals)?);
                Value::Num(f64::from(u8::from(r)))
            }
            ExprKind::Binary(op, a, b) => {
                let x = self.eval(a, locals)?;
                let y = self.eval(b, locals)?;
                let bool_num = |c: bool| Value::Num(f64::from(u8::from(c)));
                match op {
                    BinOp::Eq => bool_num(x == y),
                    BinOp::Ne => bool_num(x != y),
                    _ => {
                        let (x, y) = (x.num(), y.num());
                        match op {
                            BinOp::Add => Value::Num(x + y),
                            BinOp::Sub => Value::Num(x - y),
                            BinOp::Mul => Value::Num(x * y),
                            BinOp::Div => {
                                if y == 0.0 {
                                    return Err(self.fault(e.span, "division by zero"));
                                }
                                Value::Num(x / y)
                            }
                            BinOp::Lt => bool_num(x < y),
                            BinOp::Gt => bool_num(x > y),
                            BinOp::Le => bool_num(x <= y),
                            BinOp::Ge => bool_num(x >= y),
                            BinOp::Eq | BinOp::Ne | BinOp::And | BinOp::Or => unreachable!(),
                        }
                    }
                }
            }
            ExprKind::Call(_, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a, locals)?);
                }
                let target = self.canon.callee(e.id).unwrap_or_default();
                if let Some(f) = self.functions.get(target).copied() {
                    return self.call(f, vals, e.span);
                }
                self.builtin(target, &vals)
                    .ok_or_else(|| self.fault(e.span, format!("unresolved call `{target}`")))?
            }
        })
    }

    fn builtin(&self, name: &str, args: &[Value]) -> Option<Value> {
        let x = args.first().map_or(0.0, Value::num);
        let y = args.get(1).map_or(0.0, Value::num);
        Some(match name {
            "fabsf" | "fabs" | "abs" => Value::Num(x.abs()),
            "log" => match args.first() {
                Some(Value::Num(n)) => Value::Num(n.ln()),
                _ => Value::Void,
            },
            "sqrt" | "sqrtf" => Value::Num(x.sqrt()),
            "min" => Value::Num(x.min(y)),
            "max" => Value::Num(x.max(y)),
            _ => return None,
        })
    }
}

fn truthy(v: &Value) -> bool {
    match v {
        Value::Num(n) => *n != 0.0,
        Value::Str(s) => !s.is_empty(),
        Value::Void => false,
        Value::Struct(_) | Value::Array(_) => true,
    }
}

/// Integer-typed storage truncates toward zero.
fn coerce(v: Value, ty: &TypeRef) -> Value {
    match (v, ty) {
        (Value::Num(n), TypeRef::Int | TypeRef::U32) => Value::Num(n.trunc()),
        (v, _) => v,
    }
}

/// Registry ids of enum-typed variables.
pub fn enum_var_ids(canon: &Canonical) -> BTreeSet<u32> {
    canon
        .enum_vars
        .iter()
        .filter_map(|n| canon.registry.id(n))
        .collect()
}
