use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use crate::frontend::ast::{block_returns, BinOp, FunctionDef, Item, SwitchCase, TypeRef};
use crate::frontend::format::format_expr;
use crate::frontend::{Canonical, Expr, ExprKind, Program, Resolved, Span, Stmt, StmtKind};
use crate::protocol::{MessageDef, ProtocolModel};
use crate::units::{frame_complement, frame_meet, power_of_ten, Dimension, FrameSpec, Scalar};

use super::{CheckOptions, Constraint, ConstraintKind, ConstraintSet, Seeds, Term};

/// What is known about the frame selected by a message's control field in
/// the current scope.
#[derive(Debug, Clone, PartialEq)]
enum Refinement {
    Refined(FrameSpec),
    /// The frame holds whenever `guard` (rendered source text) holds.
    Conditional(FrameSpec, String),
    /// The message's frame-dependent fields are not used meaningfully.
    Discharged,
}

/// Refinements keyed by struct type name.
type Refs = BTreeMap<String, Refinement>;

struct Gen<'a> {
    canon: &'a Canonical,
    protocol: &'a ProtocolModel,
    opts: &'a CheckOptions,
    functions: HashMap<&'a str, &'a FunctionDef>,
    called: HashSet<String>,
    vars: HashMap<String, u32>,
    set: ConstraintSet,
    func: Option<&'a FunctionDef>,
}

/// Walks every function of `program` in source order and emits constraints.
/// Seeds from the type database come first.
pub fn generate_constraints(
    program: &Program,
    canon: &Canonical,
    protocol: &ProtocolModel,
    seeds: &Seeds,
    opts: &CheckOptions,
) -> ConstraintSet {
    let mut functions = HashMap::new();
    let mut called = HashSet::new();
    for item in &program.items {
        if let Item::Function(f) = item {
            functions.insert(f.name.as_str(), f);
            for_each_expr(&f.body, &mut |e| {
                if let ExprKind::Call(..) = e.kind {
                    if let Some(c) = canon.callee(e.id) {
                        called.insert(c.to_string());
                    }
                }
            });
        }
    }
    let mut g = Gen {
        canon,
        protocol,
        opts,
        functions,
        called,
        vars: HashMap::new(),
        set: ConstraintSet {
            files: program.files.clone(),
            ..ConstraintSet::default()
        },
        func: None,
    };
    for (name, seed) in seeds {
        if canon.registry.id(name).is_some() {
            let v = g.var(name);
            g.push(
                ConstraintKind::Equal,
                v,
                Term::Known(seed.unit.clone()),
                Span::default(),
                &seed.origin,
            );
        }
    }
    for (name, unit) in &opts.conversions {
        g.push(
            ConstraintKind::Equal,
            Term::ReturnType(name.clone()),
            Term::Known(unit.clone()),
            Span::default(),
            "trusted conversion",
        );
    }
    for item in &program.items {
        if let Item::Function(f) = item {
            g.function(f);
        }
    }
    g.set
}

fn for_each_expr<'a>(stmts: &'a [Stmt], f: &mut dyn FnMut(&'a Expr)) {
    for s in stmts {
        match &s.kind {
            StmtKind::VarDecl(d) => {
                if let Some(e) = &d.init {
                    e.walk(f);
                }
            }
            StmtKind::Assign(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            StmtKind::If(c, t, e) => {
                c.walk(f);
                for_each_expr(t, f);
                for_each_expr(e, f);
            }
            StmtKind::Switch(c, cases) => {
                c.walk(f);
                for case in cases {
                    for_each_expr(&case.body, f);
                }
            }
            StmtKind::While(c, body) => {
                c.walk(f);
                for_each_expr(body, f);
            }
            StmtKind::Return(Some(e)) | StmtKind::Expr(e) => e.walk(f),
            StmtKind::Return(None) | StmtKind::Break => {}
        }
    }
}

fn conjuncts<'e>(e: &'e Expr, out: &mut Vec<&'e Expr>) {
    match &e.kind {
        ExprKind::Binary(BinOp::And, a, b) => {
            conjuncts(a, out);
            conjuncts(b, out);
        }
        _ => out.push(e),
    }
}

fn dimensionless() -> Dimension {
    Dimension::identity()
}

impl<'a> Gen<'a> {
    fn var(&mut self, name: &str) -> Term {
        if let Some(&v) = self.vars.get(name) {
            return Term::Var(v);
        }
        let v = self.set.var_names.len() as u32;
        self.set.var_names.push(Some(name.to_string()));
        self.vars.insert(name.to_string(), v);
        Term::Var(v)
    }

    fn fresh(&mut self, poly: bool) -> Term {
        let v = self.set.var_names.len() as u32;
        self.set.var_names.push(None);
        if poly {
            self.set.poly_vars.insert(v);
        }
        Term::Var(v)
    }

    /// Names a compound or constant term with a temporary so constraints
    /// sharing it refer to one solver node.
    fn atomize(&mut self, t: Term, e: &Expr) -> Term {
        match t {
            Term::Var(_) | Term::ArgType(..) | Term::ReturnType(_) => t,
            _ => {
                let v = self.fresh(matches!(t, Term::Lit(_)));
                self.label(&v, e);
                let span = e.span;
                self.push(ConstraintKind::Equal, v.clone(), t, span, "operand");
                v
            }
        }
    }

    /// Operand of `+`, `-` or a comparison. A literal there carries no scale
    /// or dimension of its own, so it becomes a fresh unconstrained atom.
    fn additive(&mut self, t: Term, e: &Expr) -> Term {
        if let Term::Lit(_) = t {
            let v = self.fresh(true);
            self.label(&v, e);
            return v;
        }
        self.atomize(t, e)
    }

    fn label(&mut self, t: &Term, e: &Expr) {
        if let Term::Var(v) = t {
            self.set.labels.insert(*v, format_expr(e));
        }
    }

    fn push(&mut self, kind: ConstraintKind, left: Term, right: Term, span: Span, reason: &str) {
        self.set.constraints.push(Constraint {
            kind,
            left,
            right,
            span,
            reason: reason.to_string(),
            struct_token: false,
        });
    }

    fn push_token(&mut self, frame: FrameSpec, callee: &str, index: usize, span: Span) {
        self.set.constraints.push(Constraint {
            kind: ConstraintKind::Subtype,
            left: Term::Known(dimensionless().with_frame(frame)),
            right: Term::ArgType(callee.to_string(), index),
            span,
            reason: format!("frame of message argument {index} passed to `{callee}`"),
            struct_token: true,
        });
    }

    /// Message with frame-controlled fields behind a struct type.
    fn controlled_message(&self, struct_ty: &str) -> Option<&'a MessageDef> {
        self.protocol
            .message_for_struct(struct_ty)
            .filter(|m| !m.control_relations.is_empty())
    }

    /// Frames any control field of the message may select.
    fn message_frames(&self, m: &MessageDef) -> BTreeSet<String> {
        let set: BTreeSet<String> = m
            .control_relations
            .iter()
            .map(|r| r.control_value.clone())
            .collect();
        if set.is_empty() {
            self.protocol.frame_universe.clone()
        } else {
            set
        }
    }

    /// `(function, 0-based index)` when `base` is a message parameter of the
    /// current function and that function is called somewhere in the unit.
    fn token_param(&self, base: &Expr) -> Option<(String, usize)> {
        let f = self.func?;
        if !self.called.contains(&f.name) {
            return None;
        }
        match (&base.kind, self.canon.resolved.get(&base.id)) {
            (ExprKind::Var(_), Some(Resolved::Var { param: Some(i), .. })) => {
                Some((f.name.clone(), *i))
            }
            _ => None,
        }
    }

    fn function(&mut self, f: &'a FunctionDef) {
        self.func = Some(f);
        let names = self.canon.params.get(&f.name).cloned().unwrap_or_default();
        for (i, p) in f.params.iter().enumerate() {
            let arg = Term::ArgType(f.name.clone(), i + 1);
            match &p.ty {
                TypeRef::Named(s) => {
                    if self.controlled_message(s).is_some() && self.called.contains(&f.name) {
                        self.push(
                            ConstraintKind::SameDimension,
                            arg,
                            Term::Lit(dimensionless()),
                            p.span,
                            "message parameter carries only a frame",
                        );
                    }
                }
                TypeRef::Void => {}
                _ => {
                    let name = names
                        .get(i)
                        .cloned()
                        .unwrap_or_else(|| format!("{}::{}", f.name, p.name));
                    let v = self.var(&name);
                    self.push(
                        ConstraintKind::Equal,
                        v,
                        arg,
                        p.span,
                        &format!("parameter `{}`", p.name),
                    );
                }
            }
        }
        let mut refs = Refs::new();
        self.block(&f.body, &mut refs);
        self.func = None;
    }

    fn block(&mut self, stmts: &[Stmt], refs: &mut Refs) {
        for s in stmts {
            self.stmt(s, refs);
        }
    }

    fn stmt(&mut self, s: &Stmt, refs: &mut Refs) {
        match &s.kind {
            StmtKind::VarDecl(d) => {
                if let Some(init) = &d.init {
                    let t = self.expr(init, refs);
                    let Some(f) = self.func else { return };
                    let v = self.var(&format!("{}::{}", f.name, d.name));
                    self.push(
                        ConstraintKind::Subtype,
                        t,
                        v,
                        s.span,
                        &format!("initialization of `{}`", d.name),
                    );
                }
            }
            StmtKind::Assign(lhs, rhs) => {
                let r = self.expr(rhs, refs);
                let l = self.expr(lhs, refs);
                let reason = format!("assignment to `{}`", format_expr(lhs));
                self.push(ConstraintKind::Subtype, r, l, s.span, &reason);
            }
            StmtKind::If(c, then_b, else_b) => {
                self.expr(c, refs);
                let (then_r, else_r) = self.branch_refs(c, refs);
                let mut tr = then_r.clone();
                self.block(then_b, &mut tr);
                let mut er = else_r.clone();
                self.block(else_b, &mut er);
                match (block_returns(then_b), block_returns(else_b)) {
                    (true, false) => *refs = else_r,
                    (false, true) => *refs = then_r,
                    _ => {}
                }
            }
            StmtKind::Switch(scrut, cases) => self.switch(scrut, cases, refs),
            StmtKind::While(c, body) => {
                self.expr(c, refs);
                let mut r = refs.clone();
                self.block(body, &mut r);
            }
            StmtKind::Return(Some(e)) => {
                let t = self.expr(e, refs);
                if let Some(f) = self.func {
                    let ret = Term::ReturnType(f.name.clone());
                    self.push(ConstraintKind::Subtype, t, ret, s.span, "returned value");
                }
            }
            StmtKind::Return(None) | StmtKind::Break => {}
            StmtKind::Expr(e) => {
                self.expr(e, refs);
            }
        }
    }

    /// Recognizes `m.ctrl == C` / `m.ctrl != C` on a frame field; returns
    /// the struct type and the frame set the test admits.
    fn frame_test(&self, e: &Expr) -> Option<(String, FrameSpec)> {
        let ExprKind::Binary(op @ (BinOp::Eq | BinOp::Ne), a, b) = &e.kind else {
            return None;
        };
        let (struct_ty, konst) = self
            .frame_field(a)
            .zip(self.enum_const(b))
            .or_else(|| self.frame_field(b).zip(self.enum_const(a)))?;
        let m = self.controlled_message(&struct_ty)?;
        let single = FrameSpec::concrete(konst);
        let frame = if *op == BinOp::Eq {
            single
        } else {
            frame_complement(&single, &self.message_frames(m)).ok()?
        };
        Some((struct_ty, frame))
    }

    fn frame_field(&self, e: &Expr) -> Option<String> {
        match self.canon.resolved.get(&e.id)? {
            Resolved::Member {
                struct_ty, field, ..
            } => {
                let m = self.protocol.message_for_struct(struct_ty)?;
                m.is_frame_field(field).then(|| struct_ty.clone())
            }
            _ => None,
        }
    }

    fn enum_const(&self, e: &Expr) -> Option<String> {
        match self.canon.resolved.get(&e.id)? {
            Resolved::EnumConst { variant, .. } => Some(variant.clone()),
            _ => None,
        }
    }

    fn narrowed(&self, refs: &Refs, struct_ty: &str, frame: FrameSpec) -> Refinement {
        let current = match refs.get(struct_ty) {
            Some(Refinement::Refined(f)) | Some(Refinement::Conditional(f, _)) => Some(f),
            _ => None,
        };
        let f = match current {
            Some(cur) => frame_meet(cur, &frame).unwrap_or(frame),
            None => frame,
        };
        Refinement::Refined(f)
    }

    fn complement_of(&self, struct_ty: &str, frame: &FrameSpec) -> Option<FrameSpec> {
        let m = self.controlled_message(struct_ty)?;
        frame_complement(frame, &self.message_frames(m)).ok()
    }

    /// Refinements for the then and else branches of `if (cond)`.
    fn branch_refs(&self, cond: &Expr, refs: &Refs) -> (Refs, Refs) {
        let mut parts = Vec::new();
        conjuncts(cond, &mut parts);
        for (i, part) in parts.iter().enumerate() {
            let Some((sty, frame)) = self.frame_test(part) else {
                continue;
            };
            let mut then_r = refs.clone();
            let mut else_r = refs.clone();
            then_r.insert(sty.clone(), self.narrowed(refs, &sty, frame.clone()));
            if let Some(neg) = self.complement_of(&sty, &frame) {
                let rest: Vec<String> = parts
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, e)| format_expr(e))
                    .collect();
                if rest.is_empty() {
                    else_r.insert(sty.clone(), self.narrowed(refs, &sty, neg));
                } else {
                    else_r.insert(sty, Refinement::Conditional(neg, rest.join(" && ")));
                }
            }
            return (then_r, else_r);
        }
        let text = format_expr(cond);
        let mut then_r = refs.clone();
        let mut else_r = refs.clone();
        for (sty, r) in refs {
            if let Refinement::Conditional(f, guard) = r {
                if *guard == text {
                    then_r.insert(sty.clone(), Refinement::Refined(f.clone()));
                    else_r.insert(sty.clone(), Refinement::Discharged);
                }
            }
        }
        (then_r, else_r)
    }

    fn switch(&mut self, scrut: &Expr, cases: &[SwitchCase], refs: &Refs) {
        self.expr(scrut, refs);
        let sty = self
            .frame_field(scrut)
            .filter(|s| self.controlled_message(s).is_some());
        let labels: Vec<String> = cases
            .iter()
            .filter_map(|c| c.label.as_ref().and_then(|l| self.enum_const(l)))
            .collect();
        for case in cases {
            let mut r = refs.clone();
            if let Some(sty) = &sty {
                match &case.label {
                    Some(l) => {
                        if let Some(k) = self.enum_const(l) {
                            r.insert(
                                sty.clone(),
                                self.narrowed(refs, sty, FrameSpec::concrete(k)),
                            );
                        }
                    }
                    None => {
                        if let Ok(taken) = FrameSpec::from_set(labels.iter().cloned()) {
                            if let Some(rest) = self.complement_of(sty, &taken) {
                                r.insert(sty.clone(), self.narrowed(refs, sty, rest));
                            }
                        }
                    }
                }
            }
            self.block(&case.body, &mut r);
        }
    }

    fn expr(&mut self, e: &Expr, refs: &Refs) -> Term {
        match &e.kind {
            ExprKind::Number(text) => match power_of_ten(text) {
                Some(k) => Term::Lit(Dimension {
                    scalar_log10: Scalar::from_integer(-(k as i128)),
                    exponents: [0; crate::units::BASE_COUNT],
                }),
                None => self.fresh(true),
            },
            ExprKind::Str(_) => self.fresh(true),
            ExprKind::Var(_) => match self.canon.resolved.get(&e.id) {
                Some(Resolved::EnumConst { .. }) | None => self.fresh(true),
                Some(r) => {
                    let name = r.canonical().unwrap_or_default().to_string();
                    self.var(&name)
                }
            },
            ExprKind::Member(base, field) => self.member(e, base, field, refs),
            ExprKind::Index(base, idx) => {
                self.expr(idx, refs);
                self.expr(base, refs)
            }
            ExprKind::Neg(a) => self.expr(a, refs),
            ExprKind::Not(a) => {
                self.expr(a, refs);
                Term::Lit(dimensionless())
            }
            ExprKind::Binary(op, a, b) => {
                let ta = self.expr(a, refs);
                let tb = self.expr(b, refs);
                let sym = op.symbol();
                match op {
                    BinOp::Add | BinOp::Sub => {
                        let ta = self.additive(ta, a);
                        let tb = self.additive(tb, b);
                        let r = self.fresh(false);
                        self.label(&r, e);
                        let why = format!("operands of `{sym}`");
                        self.push(
                            ConstraintKind::SameDimension,
                            ta.clone(),
                            tb.clone(),
                            e.span,
                            &why,
                        );
                        let why = format!("result of `{sym}`");
                        self.push(ConstraintKind::Subtype, ta, r.clone(), e.span, &why);
                        self.push(ConstraintKind::Subtype, tb, r.clone(), e.span, &why);
                        r
                    }
                    BinOp::Mul => Term::Product(Box::new(ta), Box::new(tb)),
                    BinOp::Div => Term::Quotient(Box::new(ta), Box::new(tb)),
                    BinOp::And | BinOp::Or => Term::Lit(dimensionless()),
                    _ => {
                        let ta = self.additive(ta, a);
                        let tb = self.additive(tb, b);
                        let why = format!("operands of `{sym}`");
                        self.push(ConstraintKind::SameDimension, ta, tb, e.span, &why);
                        Term::Lit(dimensionless())
                    }
                }
            }
            ExprKind::Call(_, args) => self.call(e, args, refs),
        }
    }

    fn member(&mut self, e: &Expr, base: &Expr, field: &str, refs: &Refs) -> Term {
        let Some(Resolved::Member {
            name, struct_ty, ..
        }) = self.canon.resolved.get(&e.id)
        else {
            return match self.canon.name_of(e.id) {
                Some(n) => {
                    let n = n.to_string();
                    self.var(&n)
                }
                None => self.fresh(false),
            };
        };
        let unit = self.protocol.message_for_struct(struct_ty).and_then(|m| {
            m.field_units
                .get(field)
                .map(|u| (u.clone(), m.is_controlled(field)))
        });
        let Some((unit, controlled)) = unit else {
            let name = name.clone();
            return self.var(&name);
        };
        if !controlled {
            return Term::Known(unit);
        }
        match refs.get(struct_ty) {
            Some(Refinement::Refined(f)) | Some(Refinement::Conditional(f, _)) => {
                Term::Known(unit.with_frame(f.clone()))
            }
            Some(Refinement::Discharged) => Term::Lit(unit.dimension()),
            None => match self.token_param(base) {
                Some((f, i)) => Term::Product(
                    Box::new(Term::Known(unit.with_frame(FrameSpec::Any))),
                    Box::new(Term::ArgType(f, i + 1)),
                ),
                None => Term::Known(unit.with_frame(self.protocol.default_frame(struct_ty, field))),
            },
        }
    }

    fn call(&mut self, e: &Expr, args: &[Expr], refs: &Refs) -> Term {
        let name = self.canon.callee(e.id).unwrap_or_default().to_string();
        let short = name.rsplit("::").next().unwrap_or(&name);
        if self.opts.ignored.contains(&name) || self.opts.ignored.contains(short) {
            for a in args {
                self.expr(a, refs);
            }
            let r = self.fresh(false);
            self.label(&r, e);
            return r;
        }
        if self.opts.conversions.contains_key(&name) {
            for a in args {
                self.expr(a, refs);
            }
            return Term::ReturnType(name);
        }
        let defined = self.functions.contains_key(name.as_str());
        for (i, a) in args.iter().enumerate() {
            let ty = self.canon.types.get(&a.id);
            if let Some(TypeRef::Named(sty)) = ty {
                if defined {
                    if let Some(m) = self.controlled_message(sty) {
                        self.message_arg(a, sty, m, &name, i + 1, refs, e.span);
                    }
                }
                continue;
            }
            let t = self.expr(a, refs);
            let arg = Term::ArgType(name.clone(), i + 1);
            let why = format!("argument {} of call to `{name}`", i + 1);
            self.push(ConstraintKind::Equal, arg, t, e.span, &why);
        }
        Term::ReturnType(name)
    }

    #[allow(clippy::too_many_arguments)]
    fn message_arg(
        &mut self,
        a: &Expr,
        sty: &str,
        m: &MessageDef,
        callee: &str,
        index: usize,
        refs: &Refs,
        span: Span,
    ) {
        match refs.get(sty) {
            Some(Refinement::Refined(f)) | Some(Refinement::Conditional(f, _)) => {
                self.push_token(f.clone(), callee, index, span)
            }
            Some(Refinement::Discharged) => {}
            None => match self.token_param(a) {
                Some((f, j)) => self.push(
                    ConstraintKind::Subtype,
                    Term::ArgType(f, j + 1),
                    Term::ArgType(callee.to_string(), index),
                    span,
                    &format!("message forwarded to `{callee}`"),
                ),
                None => {
                    if let Ok(all) = FrameSpec::from_set(self.message_frames(m)) {
                        self.push_token(all, callee, index, span);
                    }
                }
            },
        }
    }
}
