//! Static unit-type checking: constraint generation over the AST, an
//! incremental solver over the unit algebra and the frame lattice, and
//! diagnostic rendering.

mod gen;
mod solve;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::deduction::TypeDatabase;
use crate::frontend::{Canonical, Program, Span};
use crate::protocol::ProtocolModel;
use num_traits::Zero;

use crate::units::{format_unit, ratio_string, Dimension, FrameSpec, UnitType};

pub use gen::generate_constraints;
pub use solve::{solve, Solution};

/// Functions whose arguments and results carry no unit information.
pub const DEFAULT_IGNORED: [&str; 5] = ["fabsf", "log", "min", "max", "abs"];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    /// Fixed unit type with an exact frame.
    Known(UnitType),
    /// Fixed dimension whose frame adapts to its context (numeric literals,
    /// reads whose frame is irrelevant).
    Lit(Dimension),
    Var(u32),
    /// Parameter type shared by all call sites; index is 1-based.
    ArgType(String, usize),
    ReturnType(String),
    Product(Box<Term>, Box<Term>),
    Quotient(Box<Term>, Box<Term>),
}

impl Term {
    /// True when the term mentions an argument or return type.
    pub fn mentions_signature(&self) -> bool {
        match self {
            Term::ArgType(..) | Term::ReturnType(_) => true,
            Term::Product(a, b) | Term::Quotient(a, b) => {
                a.mentions_signature() || b.mentions_signature()
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintKind {
    Equal,
    Subtype,
    SameDimension,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub left: Term,
    pub right: Term,
    pub span: Span,
    pub reason: String,
    /// Frame seed for a struct argument passed at a call.
    pub struct_token: bool,
}

/// Constraints of one translation unit, in generation order.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSet {
    pub constraints: Vec<Constraint>,
    /// Canonical name per variable id; `None` for temporaries.
    pub var_names: Vec<Option<String>>,
    /// Temporaries standing for literals; their frame adapts to context.
    pub poly_vars: BTreeSet<u32>,
    /// Source text of the expression a temporary stands for.
    pub labels: BTreeMap<u32, String>,
    pub files: Vec<String>,
}

impl ConstraintSet {
    pub fn term_string(&self, t: &Term) -> String {
        match t {
            Term::Known(u) => u.to_string(),
            Term::Lit(d) => format!("({}, *)", dim_string(d)),
            Term::Var(v) => match (self.var_names.get(*v as usize), self.labels.get(v)) {
                (Some(Some(n)), _) => n.clone(),
                (_, Some(l)) => format!("`{l}`"),
                _ => format!("t{v}"),
            },
            Term::ArgType(f, i) => format!("ArgType({f}, {i})"),
            Term::ReturnType(f) => format!("ReturnType({f})"),
            Term::Product(a, b) => {
                format!("{} * {}", self.operand_string(a), self.operand_string(b))
            }
            Term::Quotient(a, b) => {
                format!("{} / {}", self.operand_string(a), self.operand_string(b))
            }
        }
    }

    fn operand_string(&self, t: &Term) -> String {
        match t {
            Term::Product(..) | Term::Quotient(..) => format!("({})", self.term_string(t)),
            _ => self.term_string(t),
        }
    }

    pub fn location(&self, span: &Span) -> String {
        if span.line == 0 {
            return "<type-db>".to_string();
        }
        let file = self
            .files
            .get(span.file as usize)
            .map_or("<input>", String::as_str);
        format!("{file}:{}", span.line)
    }

    /// One-line human rendering.
    pub fn render(&self, c: &Constraint) -> String {
        let op = match c.kind {
            ConstraintKind::Equal => "=",
            ConstraintKind::Subtype => "<:",
            ConstraintKind::SameDimension => "~",
        };
        format!(
            "{}: {} {op} {}  [{}]",
            self.location(&c.span),
            self.term_string(&c.left),
            self.term_string(&c.right),
            c.reason
        )
    }

    fn sexp_term(&self, t: &Term) -> String {
        match t {
            Term::Known(u) => format!("(unit {:?} {:?})", format_unit(u), u.frame.to_string()),
            Term::Lit(d) => format!("(lit {:?})", dim_string(d)),
            Term::Var(v) => match self.var_names.get(*v as usize) {
                Some(Some(n)) => format!("(var {n:?})"),
                _ => format!("(tmp {v})"),
            },
            Term::ArgType(f, i) => format!("(arg {f:?} {i})"),
            Term::ReturnType(f) => format!("(ret {f:?})"),
            Term::Product(a, b) => format!("(* {} {})", self.sexp_term(a), self.sexp_term(b)),
            Term::Quotient(a, b) => format!("(/ {} {})", self.sexp_term(a), self.sexp_term(b)),
        }
    }

    /// S-expression dump, one constraint per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for c in &self.constraints {
            let head = match c.kind {
                ConstraintKind::Equal => "eq",
                ConstraintKind::Subtype => "sub",
                ConstraintKind::SameDimension => "samedim",
            };
            out.push_str(&format!(
                "({head} {} {} {:?})\n",
                self.sexp_term(&c.left),
                self.sexp_term(&c.right),
                self.location(&c.span)
            ));
        }
        out
    }
}

/// Pure scales print as powers of ten rather than unit ratios.
fn dim_string(d: &Dimension) -> String {
    if d.exponents.iter().all(|&e| e == 0) && !d.scalar_log10.is_zero() {
        let k = &d.scalar_log10;
        if k.is_integer() {
            format!("10^{}", k.numer())
        } else {
            format!("10^({})", ratio_string(k))
        }
    } else {
        format_unit(&d.with_frame(FrameSpec::Any))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Code {
    /// Dimension or scale conflict.
    #[serde(rename = "UTE001")]
    Dimension,
    /// Frame conflict.
    #[serde(rename = "UTE002")]
    Frame,
    /// Inconsistent argument or return types across call sites.
    #[serde(rename = "UTE003")]
    Signature,
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Code::Dimension => "UTE001",
            Code::Frame => "UTE002",
            Code::Signature => "UTE003",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub file: String,
    pub line: u32,
    pub col: u32,
    pub severity: Severity,
    pub code: Code,
    pub message: String,
    pub left_type: String,
    pub right_type: String,
    /// Constraint path from the offending constraint back to its seeds.
    pub chain: Vec<String>,
    #[serde(skip)]
    pub links: Vec<Constraint>,
}

impl Diagnostic {
    fn key(&self) -> (String, u32, Code, String, String) {
        (
            self.file.clone(),
            self.line,
            self.code,
            self.left_type.clone(),
            self.right_type.clone(),
        )
    }

    /// Multi-line report: header, then one constraint per line.
    pub fn explain(&self) -> String {
        let mut out = format!(
            "{}:{}:{}: {} [{}] {}\n  left:  {}\n  right: {}\n",
            self.file,
            self.line,
            self.col,
            match self.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            },
            self.code,
            self.message,
            self.left_type,
            self.right_type
        );
        for (i, hop) in self.chain.iter().enumerate() {
            out.push_str(&format!("  {} {hop}\n", if i == 0 { "at" } else { "<-" }));
        }
        out
    }
}

/// Unit type fixed for a variable before checking, with a note on where it
/// came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Seed {
    pub unit: UnitType,
    pub origin: String,
}

pub type Seeds = BTreeMap<String, Seed>;

pub fn seeds_from_db(db: &TypeDatabase) -> Seeds {
    db.entries
        .values()
        .map(|e| {
            let rule = format!("{:?}", e.rule).to_lowercase();
            let origin = format!("type database: {rule} match with `{}`", e.qoi);
            (
                e.canonical_name.clone(),
                Seed {
                    unit: e.unit.clone(),
                    origin,
                },
            )
        })
        .collect()
}

pub fn seeds_from_units(units: &BTreeMap<String, UnitType>) -> Seeds {
    units
        .iter()
        .map(|(n, u)| {
            (
                n.clone(),
                Seed {
                    unit: u.clone(),
                    origin: "declared unit".to_string(),
                },
            )
        })
        .collect()
}

/// Settings for a check run.
#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub ignored: BTreeSet<String>,
    /// Trusted conversion functions and the unit type they return.
    pub conversions: BTreeMap<String, UnitType>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            ignored: DEFAULT_IGNORED.iter().map(|s| s.to_string()).collect(),
            conversions: BTreeMap::new(),
        }
    }
}

/// Generates and solves the constraints of one translation unit.
pub fn check_program(
    program: &Program,
    canon: &Canonical,
    protocol: &ProtocolModel,
    seeds: &Seeds,
    opts: &CheckOptions,
) -> Vec<Diagnostic> {
    let set = generate_constraints(program, canon, protocol, seeds, opts);
    solve(&set).diagnostics
}

/// Collapses diagnostics sharing file, line and conflict signature, then
/// sorts by position.
pub fn dedup(mut diags: Vec<Diagnostic>) -> Vec<Diagnostic> {
    let mut seen = BTreeSet::new();
    diags.retain(|d| seen.insert(d.key()));
    sort(&mut diags);
    diags
}

pub fn sort(diags: &mut [Diagnostic]) {
    diags.sort_by(|a, b| {
        (&a.file, a.line, a.col, a.code, &a.left_type, &a.right_type).cmp(&(
            &b.file,
            b.line,
            b.col,
            b.code,
            &b.left_type,
            &b.right_type,
        ))
    });
}
